"""The `emu` command line: interactive REPL, batch runs, protocol servers."""

from __future__ import annotations

import argparse
import sys

from . import __version__, emulator, server
from .assembler import AssemblyError, parse_int
from .isa import ABI_NAMES, sign_extend
from .session import NoProgramLoaded, Session, StateSnapshot


def format_registers(registers: list[int], radix: str = "hex") -> list[str]:
    rows = []
    for i, value in enumerate(registers):
        if radix == "dec":
            rendered = str(sign_extend(value, 32))
        elif radix == "bin":
            rendered = format(value, "032b")
        else:
            rendered = f"0x{value:08x}"
        rows.append(f"x{i} ({ABI_NAMES[i]}) = {rendered}")
    return rows


def format_listing(snap: StateSnapshot) -> list[str]:
    rows = []
    for ln in snap.listing:
        cur = "=>" if ln.is_current else "  "
        bp = "*" if ln.has_breakpoint else " "
        addr = f"0x{ln.address:08x}" if ln.kind in ("instruction", "pseudo") else " " * 10
        kern = "k" if ln.is_kernel else " "
        rows.append(f"{cur}{bp}{kern} {addr}  {ln.text}")
    return rows


class Repl:
    """Line-oriented debugger driving one Session."""

    def __init__(self, out):
        self.session = Session()
        self.out = out

    def emit(self, text=""):
        self.out.write(text + "\n")

    def _resolve_address(self, token: str) -> int | None:
        value = parse_int(token)
        if value is not None:
            return value
        program = self.session.program
        if program and token in program.labels:
            return program.labels[token]
        self.emit(f"error: not an address or known label: {token}")
        return None

    def _status(self, snap: StateSnapshot):
        line = f"pc=0x{snap.pc:08x} halt={snap.halt} steps={snap.step_count}"
        if snap.changed_registers:
            changed = " ".join(
                f"x{i}({ABI_NAMES[i]})=0x{snap.registers[i]:08x}"
                for i in snap.changed_registers)
            line += f"  changed: {changed}"
        self.emit(line)

    def dispatch(self, line: str) -> bool:
        """Handle one command line; returns False when the REPL should stop."""
        parts = line.split()
        if not parts:
            return True
        cmd, args = parts[0], parts[1:]
        try:
            if cmd == "quit":
                return False
            if cmd == "load":
                if not args:
                    self.emit("usage: load <file.s>")
                    return True
                try:
                    with open(args[0], encoding="utf-8") as fh:
                        source = fh.read()
                except OSError as exc:
                    self.emit(f"error: {exc}")
                    return True
                snap = self.session.load(source)
                self.emit(f"loaded {args[0]} ({len(snap.listing)} lines)")
                return True
            if cmd == "step":
                count = int(args[0]) if args else 1
                self._status(self.session.step(count))
                return True
            if cmd == "run":
                max_steps = int(args[0]) if args else emulator.DEFAULT_MAX_STEPS
                self._status(self.session.run(max_steps))
                return True
            if cmd in ("break", "unbreak"):
                if not args:
                    self.emit(f"usage: {cmd} <addr|label>")
                    return True
                address = self._resolve_address(args[0])
                if address is None:
                    return True
                if cmd == "break":
                    self.session.set_break(address)
                    self.emit(f"breakpoint set at 0x{address:08x}")
                else:
                    self.session.clear_break(address)
                    self.emit(f"breakpoint cleared at 0x{address:08x}")
                return True
            if cmd == "regs":
                radix = args[0] if args else "hex"
                if radix not in ("hex", "dec", "bin"):
                    self.emit("usage: regs [hex|dec|bin]")
                    return True
                for row in format_registers(self.session.snapshot().registers, radix):
                    self.emit(row)
                return True
            if cmd == "mem":
                if not args:
                    self.emit("usage: mem <addr> [nwords]")
                    return True
                address = self._resolve_address(args[0])
                if address is None:
                    return True
                count = int(args[1]) if len(args) > 1 else 1
                for k in range(count):
                    value = emulator.memory_access(self.session.state, address + 4 * k, 4, "read")
                    self.emit(f"0x{address + 4 * k:08x}: 0x{value:08x}")
                return True
            if cmd == "list":
                for row in format_listing(self.session.snapshot()):
                    self.emit(row)
                return True
            if cmd == "reset":
                snap = self.session.reset()
                self.emit(f"reset; pc=0x{snap.pc:08x}")
                return True
            if cmd == "help":
                self.emit("commands: load <file> | step [n] | run [max] | break <addr|label> | "
                          "unbreak <addr|label> | regs [hex|dec|bin] | mem <addr> [n] | "
                          "list | reset | quit")
                return True
            self.emit(f"unknown command: {cmd} (try help)")
            return True
        except AssemblyError as exc:
            for item in exc.errors:
                self.emit(f"error: line {item.line}: {item.error_message}")
            return True
        except (emulator.MachineHalted, emulator.MisalignedAccess,
                emulator.NotAnInstructionAddress, NoProgramLoaded, ValueError) as exc:
            self.emit(f"error: {exc}")
            return True


def cli_repl(in_stream, out_stream) -> int:
    """Read commands from in_stream until quit/EOF; returns the exit status."""
    repl = Repl(out_stream)
    interactive = getattr(in_stream, "isatty", lambda: False)()
    while True:
        if interactive:
            out_stream.write("emu> ")
            out_stream.flush()
        line = in_stream.readline()
        if not line:
            return 0
        if not repl.dispatch(line.strip()):
            return 0


def run_file(path: str, max_steps: int, break_tokens: list[str], out) -> int:
    session = Session()
    try:
        with open(path, encoding="utf-8") as fh:
            session.load(fh.read())
    except OSError as exc:
        out.write(f"error: {exc}\n")
        return 2
    except AssemblyError as exc:
        for item in exc.errors:
            out.write(f"error: line {item.line}: {item.error_message}\n")
        return 2
    for token in break_tokens:
        address = parse_int(token)
        if address is None:
            address = session.program.labels.get(token)
        if address is None:
            out.write(f"error: bad breakpoint {token!r}\n")
            return 2
        session.set_break(address)
    snap = session.run(max_steps)
    out.write(f"halt={snap.halt} pc=0x{snap.pc:08x} steps={snap.step_count}\n")
    for row in format_registers(snap.registers):
        out.write(row + "\n")
    return 0 if snap.halt in ("exit", "breakpoint") else 1


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="emu",
                                     description="RV32I assembly workbench")
    parser.add_argument("--version", action="version", version=f"emu {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    repl_p = sub.add_parser("repl", help="interactive debugger")
    repl_p.add_argument("--script", help="replay commands from a file non-interactively")

    run_p = sub.add_parser("run", help="assemble and run a source file")
    run_p.add_argument("file")
    run_p.add_argument("--max-steps", type=int, default=emulator.DEFAULT_MAX_STEPS)
    run_p.add_argument("--break", dest="breaks", action="append", default=[],
                       metavar="ADDR", help="breakpoint address or label (repeatable)")

    serve_p = sub.add_parser("serve", help="HTTP protocol + UI server")
    serve_p.add_argument("--port", type=int, default=8000)
    serve_p.add_argument("--ui", help="directory with the built frontend")

    sub.add_parser("proto", help="newline-delimited JSON protocol on stdio")

    args = parser.parse_args(argv)
    if args.command == "repl":
        if args.script:
            with open(args.script, encoding="utf-8") as fh:
                return cli_repl(fh, sys.stdout)
        return cli_repl(sys.stdin, sys.stdout)
    if args.command == "run":
        return run_file(args.file, args.max_steps, args.breaks, sys.stdout)
    if args.command == "serve":
        return server.serve(args.port, args.ui)
    if args.command == "proto":
        return server.proto_loop(sys.stdin, sys.stdout)
    return 2  # pragma: no cover


if __name__ == "__main__":
    sys.exit(main())
