"""Debug sessions: snapshots, the five-region memory view, command protocol.

A Session owns one program + machine state and answers dict-shaped commands
with dict-shaped responses (the wire format, pre-JSON).
"""

from __future__ import annotations

from dataclasses import dataclass

from . import emulator, isa
from .assembler import (
    DIRECTIVE,
    INSTRUCTION,
    LABEL,
    PSEUDO,
    AssembledProgram,
    AssemblyError,
    KernelConfig,
    assemble,
)
from .emulator import LayoutConfig, MachineState

REGION_ORDER = ("stack", "free", "heap", "data", "text")


class NoProgramLoaded(Exception):
    pass


@dataclass
class ListingLine:
    address: int | None
    text: str
    kind: str
    is_kernel: bool
    is_current: bool
    has_breakpoint: bool
    line: int
    is_label: bool


@dataclass
class RegionWord:
    address: int
    value: int
    comment: str | None = None


@dataclass
class MemoryRegion:
    name: str
    start: int
    end: int
    words: list[RegionWord]


@dataclass
class StateSnapshot:
    pc: int
    registers: list[int]
    changed_registers: list[int]
    listing: list[ListingLine]
    current_breakdown: list[isa.FieldSegment] | None
    memory_regions: list[MemoryRegion]
    halt: str
    step_count: int
    breakpoints: list[int]


def layout_for(config: KernelConfig) -> LayoutConfig:
    return LayoutConfig(
        text_base=config.text_base,
        data_base=config.data_base,
        heap_base=config.data_base + emulator.DEFAULT_HEAP_OFFSET,
        stack_top=config.stack_top,
    )


def _disassemble(word: int) -> str | None:
    try:
        return isa.render_instruction(isa.decode(word))
    except isa.IllegalInstruction:
        return None


def memory_regions(state: MachineState, layout: LayoutConfig,
                   program: AssembledProgram) -> list[MemoryRegion]:
    """Partition the materialized words into the five fixed regions.

    Heap and stack are separated at the largest untouched gap between
    heap_base and the top of the stack; the gap itself is the free region.
    """
    text_words: list[RegionWord] = []
    data_words: list[RegionWord] = []
    upper: list[int] = []   # candidates for heap/stack classification
    for addr in sorted(state.memory):
        value = state.memory[addr]
        if addr < layout.data_base:
            text_words.append(RegionWord(addr, value, _disassemble(value)))
        elif addr < layout.heap_base:
            data_words.append(RegionWord(addr, value))
        else:
            upper.append(addr)

    stack_limit = layout.stack_top + 4
    if upper:
        stack_limit = max(stack_limit, upper[-1] + 4)
        gaps = [(layout.heap_base, upper[0])]
        gaps += [(a + 4, b) for a, b in zip(upper, upper[1:])]
        gaps.append((upper[-1] + 4, stack_limit))
        free_start, free_end = max(gaps, key=lambda g: g[1] - g[0])
    else:
        free_start, free_end = layout.heap_base, stack_limit

    heap_words = [RegionWord(a, state.memory[a]) for a in upper if a < free_start]
    stack_words = [RegionWord(a, state.memory[a]) for a in upper if a >= free_end]

    regions = [
        MemoryRegion("stack", free_end, stack_limit, stack_words),
        MemoryRegion("free", free_start, free_end, []),
        MemoryRegion("heap", layout.heap_base, free_start, heap_words),
        MemoryRegion("data", layout.data_base, layout.heap_base, data_words),
        MemoryRegion("text", layout.text_base, program.text_end, text_words),
    ]
    for region in regions:
        region.words.sort(key=lambda w: -w.address)
    return regions


def build_snapshot(state: MachineState, program: AssembledProgram,
                   breakpoints: set[int], last_changes: set[int],
                   layout: LayoutConfig | None = None) -> StateSnapshot:
    """Assemble the full UI-facing view of the machine."""
    if program is None or state is None:
        raise NoProgramLoaded("no program loaded")
    layout = layout or layout_for(program.config)

    listing = []
    for item in program.source_items:
        executable = item.kind in (INSTRUCTION, PSEUDO) and item.address is not None
        span = 4 * max(item.size, 1)
        is_current = executable and item.address <= state.pc < item.address + span
        has_bp = executable and any(
            bp in breakpoints for bp in range(item.address, item.address + span, 4))
        listing.append(ListingLine(
            address=item.address,
            text=item.text,
            kind=item.kind,
            is_kernel=item.is_kernel,
            is_current=is_current,
            has_breakpoint=has_bp,
            line=item.line,
            is_label=item.kind == LABEL,
        ))

    breakdown = None
    if program.config.text_base <= state.pc < program.text_end:
        try:
            breakdown = isa.breakdown(state.memory.get(state.pc, 0))
        except isa.IllegalInstruction:
            breakdown = None

    return StateSnapshot(
        pc=state.pc,
        registers=list(state.regs),
        changed_registers=sorted(last_changes),
        listing=listing,
        current_breakdown=breakdown,
        memory_regions=memory_regions(state, layout, program),
        halt=state.halt,
        step_count=state.step_count,
        breakpoints=sorted(breakpoints),
    )


# ------------------------------------------------------- wire serialization

def snapshot_to_dict(snap: StateSnapshot) -> dict:
    d = {
        "pc": snap.pc,
        "registers": list(snap.registers),
        "changed_registers": list(snap.changed_registers),
        "listing": [{
            "address": ln.address,
            "text": ln.text,
            "kind": ln.kind,
            "is_kernel": ln.is_kernel,
            "is_current": ln.is_current,
            "has_breakpoint": ln.has_breakpoint,
            "line": ln.line,
            "is_label": ln.is_label,
        } for ln in snap.listing],
        "memory_regions": [{
            "name": r.name,
            "start": r.start,
            "end": r.end,
            "words": [
                {"address": w.address, "value": w.value, "comment": w.comment}
                if w.comment is not None else
                {"address": w.address, "value": w.value}
                for w in r.words
            ],
        } for r in snap.memory_regions],
        "halt": snap.halt,
        "step_count": snap.step_count,
        "breakpoints": list(snap.breakpoints),
    }
    if snap.current_breakdown is not None:
        d["current_breakdown"] = [
            {"hi": s.hi, "lo": s.lo, "name": s.name, "bits": s.bits}
            for s in snap.current_breakdown
        ]
    return d


def snapshot_from_dict(d: dict) -> StateSnapshot:
    breakdown = None
    if "current_breakdown" in d:
        breakdown = [isa.FieldSegment(s["hi"], s["lo"], s["name"], s["bits"])
                     for s in d["current_breakdown"]]
    return StateSnapshot(
        pc=d["pc"],
        registers=list(d["registers"]),
        changed_registers=list(d["changed_registers"]),
        listing=[ListingLine(
            address=ln["address"], text=ln["text"], kind=ln["kind"],
            is_kernel=ln["is_kernel"], is_current=ln["is_current"],
            has_breakpoint=ln["has_breakpoint"], line=ln["line"],
            is_label=ln["is_label"],
        ) for ln in d["listing"]],
        current_breakdown=breakdown,
        memory_regions=[MemoryRegion(
            name=r["name"], start=r["start"], end=r["end"],
            words=[RegionWord(w["address"], w["value"], w.get("comment"))
                   for w in r["words"]],
        ) for r in d["memory_regions"]],
        halt=d["halt"],
        step_count=d["step_count"],
        breakpoints=list(d["breakpoints"]),
    )


# ------------------------------------------------------------------ session

class Session:
    """One serialized debug session: a program, its machine, its breakpoints."""

    def __init__(self, config: KernelConfig | None = None):
        self.config = config or KernelConfig()
        self.layout = layout_for(self.config)
        self.program: AssembledProgram | None = None
        self.state: MachineState | None = None
        self.breakpoints: set[int] = set()
        self.last_changes: set[int] = set()

    # -- direct API ---------------------------------------------------

    def load(self, source: str) -> StateSnapshot:
        program = assemble(source, self.config)   # may raise AssemblyError
        self.program = program
        self.state = emulator.setup_emulator(program)
        self.breakpoints = set()
        self.last_changes = set()
        return self.snapshot()

    def reset(self) -> StateSnapshot:
        self._require_loaded()
        self.state = emulator.setup_emulator(self.program)
        self.last_changes = set()
        return self.snapshot()

    def step(self, count: int = 1) -> StateSnapshot:
        self._require_loaded()
        before = list(self.state.regs)
        for _ in range(max(count, 1)):
            emulator.single_step(self.state, self.program)
            self._mark_exit()
            if self.state.halt != emulator.RUNNING:
                break
        self.last_changes = self._reg_diff(before)
        return self.snapshot()

    def run(self, max_steps: int = emulator.DEFAULT_MAX_STEPS) -> StateSnapshot:
        self._require_loaded()
        before = list(self.state.regs)
        emulator.run(self.state, self.program, self.breakpoints, max_steps)
        self.last_changes = self._reg_diff(before)
        return self.snapshot()

    def set_break(self, address: int) -> StateSnapshot:
        self._require_loaded()
        self.breakpoints = emulator.set_breakpoint(self.breakpoints, address, self.program)
        return self.snapshot()

    def clear_break(self, address: int) -> StateSnapshot:
        self._require_loaded()
        self.breakpoints = emulator.clear_breakpoint(self.breakpoints, address, self.program)
        return self.snapshot()

    def snapshot(self) -> StateSnapshot:
        self._require_loaded()
        return build_snapshot(self.state, self.program, self.breakpoints,
                              self.last_changes, self.layout)

    # -- command protocol ----------------------------------------------

    def handle_command(self, command: dict) -> dict:
        """One wire-format command in, exactly one wire-format response out."""
        try:
            cmd = command.get("cmd")
            if cmd == "load":
                source = command.get("source")
                if not isinstance(source, str):
                    return _err("load requires a 'source' string")
                return _ok(self.load(source))
            if cmd == "step":
                return _ok(self.step(int(command.get("count", 1))))
            if cmd == "run":
                return _ok(self.run(int(command.get("max_steps", emulator.DEFAULT_MAX_STEPS))))
            if cmd == "set_break":
                return _ok(self.set_break(self._addr_arg(command)))
            if cmd == "clear_break":
                return _ok(self.clear_break(self._addr_arg(command)))
            if cmd == "reset":
                return _ok(self.reset())
            if cmd == "get_state":
                return _ok(self.snapshot())
            return _err(f"unknown command {cmd!r}")
        except AssemblyError as exc:
            return _err(str(exc), line=exc.errors[0].line if exc.errors else None)
        except emulator.MachineHalted as exc:
            return _err(str(exc))
        except (emulator.NotAnInstructionAddress, NoProgramLoaded, ValueError) as exc:
            return _err(str(exc))

    # -- helpers --------------------------------------------------------

    def _require_loaded(self):
        if self.program is None or self.state is None:
            raise NoProgramLoaded("no program loaded")

    def _reg_diff(self, before: list[int]) -> set[int]:
        return {i for i in range(1, 32) if before[i] != self.state.regs[i]}

    def _mark_exit(self):
        if self.state.halt == emulator.RUNNING and self.state.pc == self.program.exit_address:
            self.state.halt = emulator.EXIT

    @staticmethod
    def _addr_arg(command: dict) -> int:
        address = command.get("address")
        if not isinstance(address, int):
            raise ValueError("command requires an integer 'address'")
        return address


def _ok(snap: StateSnapshot) -> dict:
    return {"ok": True, "snapshot": snapshot_to_dict(snap)}


def _err(message: str, line: int | None = None) -> dict:
    response = {"ok": False, "error": message}
    if line is not None:
        response["line"] = line
    return response
