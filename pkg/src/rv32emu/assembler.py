"""Two-pass assembler: kernel wrapping, tokenizing, pseudo expansion, encoding.

Pipeline: wrap_with_kernel -> parse (two passes, errors accumulate as items)
-> resolve_and_encode (labels become immediates, items become words).
`assemble()` runs the whole pipeline.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from . import isa
from .isa import MASK32

DEFAULT_TEXT_BASE = 0x00000000
DEFAULT_DATA_BASE = 0x10000000
DEFAULT_STACK_TOP = 0x7FFFFFF0

EXIT_LABEL = "__exit"

LABEL_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")

# item kinds
INSTRUCTION = "instruction"
LABEL = "label"
PSEUDO = "pseudo"
DIRECTIVE = "directive"
ERROR = "error"

PSEUDO_MNEMONICS = {"nop", "mv", "li", "la", "j", "jr", "ret", "beqz", "bnez"}

_R_TYPE = {"add", "sub", "sll", "slt", "sltu", "xor", "srl", "sra", "or", "and",
           "mul", "mulh", "mulhsu", "mulhu"}
_I_ARITH = {"addi", "slti", "sltiu", "xori", "ori", "andi"}
_SHIFTS = {"slli", "srli", "srai"}
_LOADS = {"lb", "lh", "lw", "lbu", "lhu"}
_STORES = {"sb", "sh", "sw"}
_BRANCHES = {"beq", "bne", "blt", "bge", "bltu", "bgeu"}
_NO_OPERANDS = {"ecall", "ebreak", "fence"}

_EMITTING_DIRECTIVES = {".word", ".half", ".byte", ".space", ".string", ".asciz"}
_DIRECTIVES = {".text", ".data"} | _EMITTING_DIRECTIVES


class AssemblyError(Exception):
    """Raised by assemble() when the source has error items."""

    def __init__(self, errors: list["ProgramItem"]):
        self.errors = errors
        super().__init__("; ".join(f"line {e.line}: {e.error_message}" for e in errors))


class AssemblyHasErrors(AssemblyError):
    pass


class UndefinedLabel(Exception):
    def __init__(self, name: str, line: int | None = None):
        self.name = name
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"undefined label {name!r}{where}")


class BranchOutOfRange(Exception):
    def __init__(self, line: int, detail: str):
        self.line = line
        super().__init__(f"line {line}: {detail}")


class UnknownDirective(Exception):
    pass


class MalformedOperand(Exception):
    pass


@dataclass(frozen=True)
class KernelConfig:
    text_base: int = DEFAULT_TEXT_BASE
    data_base: int = DEFAULT_DATA_BASE
    stack_top: int = DEFAULT_STACK_TOP

    def __post_init__(self):
        if not (self.text_base < self.data_base < self.stack_top):
            raise ValueError("layout must satisfy text_base < data_base < stack_top")
        if any(v % 4 for v in (self.text_base, self.data_base, self.stack_top)):
            raise ValueError("layout addresses must be 4-aligned")


@dataclass
class ProgramItem:
    """One parsed source element, in combined (kernel + user) line numbering."""
    symbols: list[str]
    kind: str
    line: int
    address: int | None = None
    is_kernel: bool = False
    error_message: str = ""
    text: str = ""                 # the source slice this item came from
    size: int = 0                  # text words occupied, post-expansion
    data_bytes: bytes = b""        # emission payload for data directives


@dataclass
class KernelWrap:
    source: str
    kernel_lines: frozenset[int]
    config: KernelConfig


@dataclass
class AssembledProgram:
    items: list[ProgramItem]           # post-expansion (pseudos replaced)
    source_items: list[ProgramItem]    # as parsed, pseudos intact (listing view)
    labels: dict[str, int]
    text_image: list[tuple[int, int, ProgramItem]]   # (address, word, item)
    data_image: list[tuple[int, int]]                # (address, word)
    entry_address: int
    exit_address: int
    config: KernelConfig

    @property
    def text_end(self) -> int:
        return self.config.text_base + 4 * len(self.text_image)

    @property
    def kernel_prefix_words(self) -> int:
        """Instructions executed before the first user instruction."""
        for addr, _, item in self.text_image:
            if not item.is_kernel:
                return (addr - self.config.text_base) // 4
        return (self.exit_address - self.config.text_base) // 4


def parse_int(token: str) -> int | None:
    """Decimal (leading zeros ok), negative decimal, or 0x hex; else None."""
    t = token.strip()
    neg = t.startswith("-")
    if neg or t.startswith("+"):
        t = t[1:]
    if not t:
        return None
    try:
        if t[:2].lower() == "0x":
            value = int(t[2:], 16)
        elif t.isdigit():
            value = int(t, 10)
        else:
            return None
    except ValueError:
        return None
    return -value if neg else value


def tokenize(line: str) -> list[str]:
    """Split one line into tokens.

    Separators are whitespace, commas and parentheses; `:` is emitted as its
    own token; double-quoted strings stay whole (quotes kept) and may contain
    `#`, which otherwise starts a comment.
    """
    tokens: list[str] = []
    cur = ""
    i = 0
    n = len(line)
    while i < n:
        c = line[i]
        if c == '"':
            if cur:
                tokens.append(cur)
                cur = ""
            j = i + 1
            while j < n and line[j] != '"':
                j += 2 if line[j] == "\\" else 1
            tokens.append(line[i:min(j + 1, n)])
            i = j + 1
            continue
        if c == "#":
            break
        if c in " \t,()":
            if cur:
                tokens.append(cur)
                cur = ""
        elif c == ":":
            if cur:
                tokens.append(cur)
                cur = ""
            tokens.append(":")
        else:
            cur += c
        i += 1
    if cur:
        tokens.append(cur)
    return tokens


def _li_expansion_size(symbols: list[str]) -> int:
    if len(symbols) == 3:
        imm = parse_int(symbols[2])
        if imm is not None and -2048 <= imm <= 2047:
            return 1
    return 2


def pseudo_size(symbols: list[str]) -> int:
    """Text words a pseudo-instruction occupies after expansion."""
    name = symbols[0].lower()
    if name == "li":
        return _li_expansion_size(symbols)
    if name == "la":
        return 2
    return 1


def split_hi_lo(value: int) -> tuple[int, int]:
    """Split a 32-bit value into lui/addi halves with bit-11 carry correction."""
    value &= MASK32
    lo = value & 0xFFF
    if lo & 0x800:
        lo -= 0x1000
    hi = ((value - lo) >> 12) & 0xFFFFF
    return hi, lo


def wrap_with_kernel(user_source: str, config: KernelConfig | None = None) -> KernelWrap:
    """Sandwich user source between the setup prefix and the exit-loop suffix."""
    config = config or KernelConfig()
    prefix = [
        f"li sp, 0x{config.stack_top:x}",
        f"li gp, 0x{config.data_base:x}",
    ]
    # the .text switch keeps the exit loop in the text segment even when the
    # user source ends inside .data
    suffix = [
        ".text",
        f"{EXIT_LABEL}:",
        f"j {EXIT_LABEL}",
    ]
    user_lines = user_source.splitlines()
    combined = prefix + user_lines + suffix
    kernel_lines = set(range(1, len(prefix) + 1))
    kernel_lines.update(range(len(prefix) + len(user_lines) + 1, len(combined) + 1))
    return KernelWrap("\n".join(combined) + "\n", frozenset(kernel_lines), config)


def _is_register(token: str) -> bool:
    try:
        isa.register_name_to_index(token)
        return True
    except isa.UnknownRegister:
        return False


def _validate_operands(symbols: list[str]) -> str | None:
    """Arity/kind/range check for one instruction or pseudo; returns an error
    message or None."""
    name = symbols[0].lower()
    ops = symbols[1:]

    def want(n):
        if len(ops) != n:
            return f"{name} expects {n} operand(s), got {len(ops)}"
        return None

    def reg(tok):
        if not _is_register(tok):
            return f"{name}: expected register, got {tok!r}"
        return None

    def imm(tok, lo, hi, even=False):
        v = parse_int(tok)
        if v is None:
            return f"{name}: expected integer, got {tok!r}"
        if not lo <= v <= hi:
            return f"{name}: immediate {v} not in [{lo}, {hi}]"
        if even and v % 2:
            return f"{name}: offset {v} must be even"
        return None

    def target(tok, lo, hi):
        if LABEL_RE.match(tok):
            return None
        return imm(tok, lo, hi, even=True)

    if name in _R_TYPE:
        return want(3) or reg(ops[0]) or reg(ops[1]) or reg(ops[2])
    if name in _I_ARITH:
        return want(3) or reg(ops[0]) or reg(ops[1]) or imm(ops[2], -2048, 2047)
    if name in _SHIFTS:
        return want(3) or reg(ops[0]) or reg(ops[1]) or imm(ops[2], 0, 31)
    if name in _LOADS:
        return want(3) or reg(ops[0]) or imm(ops[1], -2048, 2047) or reg(ops[2])
    if name in _STORES:
        return want(3) or reg(ops[0]) or imm(ops[1], -2048, 2047) or reg(ops[2])
    if name == "jalr":
        err = want(3) or reg(ops[0])
        if err:
            return err
        if _is_register(ops[1]):
            return imm(ops[2], -2048, 2047)
        return imm(ops[1], -2048, 2047) or reg(ops[2])
    if name in _BRANCHES:
        return want(3) or reg(ops[0]) or reg(ops[1]) or target(ops[2], -4096, 4094)
    if name == "jal":
        return want(2) or reg(ops[0]) or target(ops[1], -(1 << 20), (1 << 20) - 2)
    if name in ("lui", "auipc"):
        return want(2) or reg(ops[0]) or imm(ops[1], -0x80000, 0xFFFFF)
    if name in _NO_OPERANDS or name in ("nop", "ret"):
        return want(0)
    if name == "mv":
        return want(2) or reg(ops[0]) or reg(ops[1])
    if name == "li":
        return want(2) or reg(ops[0]) or imm(ops[1], -(1 << 31), (1 << 32) - 1)
    if name == "la":
        err = want(2) or reg(ops[0])
        if err:
            return err
        return None if LABEL_RE.match(ops[1]) else f"la: expected label, got {ops[1]!r}"
    if name == "j":
        return want(1) or target(ops[0], -(1 << 20), (1 << 20) - 2)
    if name == "jr":
        return want(1) or reg(ops[0])
    if name in ("beqz", "bnez"):
        return want(2) or reg(ops[0]) or target(ops[1], -4096, 4094)
    return f"unknown instruction {name!r}"  # pragma: no cover


def _decode_string_literal(token: str) -> bytes | None:
    if len(token) < 2 or not token.startswith('"') or not token.endswith('"'):
        return None
    body = token[1:-1]
    out = bytearray()
    i = 0
    escapes = {"n": 10, "t": 9, "r": 13, "0": 0, '"': 34, "\\": 92}
    while i < len(body):
        c = body[i]
        if c == "\\" and i + 1 < len(body) and body[i + 1] in escapes:
            out.append(escapes[body[i + 1]])
            i += 2
        else:
            out.extend(c.encode("utf-8"))
            i += 1
    return bytes(out)


def process_directive(item: ProgramItem, cursor: int) -> tuple[bytes, int, int]:
    """Emit bytes for a data directive.

    Returns (payload, start_address, new_cursor); start_address is the cursor
    aligned up per the directive's natural alignment.
    """
    name = item.symbols[0].lower()
    args = item.symbols[1:]
    if name not in _DIRECTIVES:
        raise UnknownDirective(f"unknown directive {name!r}")
    if name in (".text", ".data"):
        return b"", cursor, cursor

    def ints(lo, hi):
        values = []
        for tok in args:
            v = parse_int(tok)
            if v is None:
                raise MalformedOperand(f"{name}: expected integer, got {tok!r}")
            if not lo <= v <= hi:
                raise MalformedOperand(f"{name}: value {v} not in [{lo}, {hi}]")
            values.append(v)
        if not values:
            raise MalformedOperand(f"{name}: expected at least one value")
        return values

    if name == ".word":
        start = (cursor + 3) & ~3
        payload = b"".join((v & MASK32).to_bytes(4, "little") for v in ints(-(1 << 31), (1 << 32) - 1))
    elif name == ".half":
        start = (cursor + 1) & ~1
        payload = b"".join((v & 0xFFFF).to_bytes(2, "little") for v in ints(-(1 << 15), (1 << 16) - 1))
    elif name == ".byte":
        start = cursor
        payload = bytes(v & 0xFF for v in ints(-128, 255))
    elif name == ".space":
        start = cursor
        if len(args) != 1:
            raise MalformedOperand(".space: expected one size operand")
        n = parse_int(args[0])
        if n is None or n < 0:
            raise MalformedOperand(f".space: bad size {args[0]!r}")
        payload = bytes(n)
    else:  # .string / .asciz
        start = cursor
        if len(args) != 1:
            raise MalformedOperand(f"{name}: expected one string operand")
        decoded = _decode_string_literal(args[0])
        if decoded is None:
            raise MalformedOperand(f"{name}: expected quoted string, got {args[0]!r}")
        payload = decoded + b"\x00"
    return payload, start, start + len(payload)


def parse(source: str, kernel_lines: frozenset[int] = frozenset(),
          config: KernelConfig | None = None) -> tuple[list[ProgramItem], dict[str, int]]:
    """Two-pass parse into program items and a label map.

    Malformed lines become kind="error" items; parsing always continues.
    """
    config = config or KernelConfig()
    items: list[ProgramItem] = []
    labels: dict[str, int] = {}
    pending: list[ProgramItem] = []   # label items awaiting the next address
    segment = "text"
    text_cursor = config.text_base
    data_cursor = config.data_base

    def bind_pending(address):
        for lab in pending:
            lab.address = address
            labels[lab.symbols[0]] = address
        pending.clear()

    def flush_pending():
        bind_pending(text_cursor if segment == "text" else data_cursor)

    for line_no, raw in enumerate(source.splitlines(), start=1):
        tokens = tokenize(raw)
        if not tokens:
            continue
        is_kernel = line_no in kernel_lines

        def add(kind, symbols, text, **kw):
            item = ProgramItem(symbols=symbols, kind=kind, line=line_no,
                               is_kernel=is_kernel, text=text, **kw)
            items.append(item)
            return item

        # peel leading `name :` label definitions
        while len(tokens) >= 2 and tokens[1] == ":" and LABEL_RE.match(tokens[0]):
            name = tokens[0]
            tokens = tokens[2:]
            text = f"{name}:"
            if name == EXIT_LABEL and not is_kernel:
                add(ERROR, [name], text, error_message=f"label {EXIT_LABEL!r} is reserved")
            elif name in labels or any(p.symbols[0] == name for p in pending):
                add(ERROR, [name], text, error_message=f"duplicate label {name!r}")
            else:
                pending.append(add(LABEL, [name], text))
        if not tokens:
            continue

        head = tokens[0].lower()
        stmt_text = raw.split("#", 1)[0].strip()
        if ":" in stmt_text:
            stmt_text = stmt_text.rsplit(":", 1)[-1].strip()

        if tokens[0] == ":" or ":" in tokens:
            add(ERROR, tokens, stmt_text, error_message="malformed label")
            continue

        if head.startswith("."):
            if head not in _DIRECTIVES:
                add(ERROR, tokens, stmt_text, error_message=f"unknown directive {head!r}")
                continue
            item = add(DIRECTIVE, [head] + tokens[1:], stmt_text)
            if head == ".text":
                flush_pending()
                segment = "text"
            elif head == ".data":
                flush_pending()
                segment = "data"
            else:
                if segment != "data":
                    item.kind = ERROR
                    item.error_message = f"{head} outside .data segment"
                    continue
                try:
                    payload, start, data_cursor = process_directive(item, data_cursor)
                except (UnknownDirective, MalformedOperand) as exc:
                    item.kind = ERROR
                    item.error_message = str(exc)
                    continue
                item.address = start
                item.data_bytes = payload
                bind_pending(start)
            continue

        if head in PSEUDO_MNEMONICS or head in isa.OPSPECS:
            if segment != "text":
                add(ERROR, tokens, stmt_text, error_message="instruction outside .text segment")
                continue
            kind = PSEUDO if head in PSEUDO_MNEMONICS else INSTRUCTION
            size = pseudo_size(tokens) if kind == PSEUDO else 1
            item = add(kind, tokens, stmt_text, address=text_cursor, size=size)
            bind_pending(text_cursor)
            text_cursor += 4 * size
            continue

        add(ERROR, tokens, stmt_text, error_message=f"unknown instruction {tokens[0]!r}")

    flush_pending()

    # second pass: operand arity/kind validation against the tables
    for item in items:
        if item.kind in (INSTRUCTION, PSEUDO):
            message = _validate_operands(item.symbols)
            if message:
                item.kind = ERROR
                item.error_message = message
                item.address = None
    return items, labels


def expand_pseudo(item: ProgramItem, labels: dict[str, int] | None = None) -> list[ProgramItem]:
    """Expand one pseudo item into base-instruction items (same line number)."""
    sym = item.symbols
    name = sym[0].lower()

    def base(*symbols):
        return [list(symbols)]

    if name == "nop":
        expansion = base("addi", "x0", "x0", "0")
    elif name == "mv":
        expansion = base("addi", sym[1], sym[2], "0")
    elif name == "li":
        imm = parse_int(sym[2])
        if imm is None or not -(1 << 31) <= imm <= (1 << 32) - 1:
            raise isa.ImmediateOutOfRange(f"li: immediate {sym[2]} does not fit in 32 bits")
        if -2048 <= imm <= 2047:
            expansion = base("addi", sym[1], "x0", str(imm))
        else:
            hi, lo = split_hi_lo(imm)
            expansion = [["lui", sym[1], f"0x{hi:x}"], ["addi", sym[1], sym[1], str(lo)]]
    elif name == "la":
        if labels is None or sym[2] not in labels:
            raise UndefinedLabel(sym[2], item.line)
        hi, lo = split_hi_lo(labels[sym[2]])
        expansion = [["lui", sym[1], f"0x{hi:x}"], ["addi", sym[1], sym[1], str(lo)]]
    elif name == "j":
        expansion = base("jal", "x0", sym[1])
    elif name == "jr":
        expansion = base("jalr", "x0", sym[1], "0")
    elif name == "ret":
        expansion = base("jalr", "x0", "ra", "0")
    elif name == "beqz":
        expansion = base("beq", sym[1], "x0", sym[2])
    elif name == "bnez":
        expansion = base("bne", sym[1], "x0", sym[2])
    else:
        raise ValueError(f"not a pseudo-instruction: {name!r}")

    out = []
    for k, symbols in enumerate(expansion):
        address = None if item.address is None else item.address + 4 * k
        out.append(ProgramItem(symbols=symbols, kind=INSTRUCTION, line=item.line,
                               address=address, is_kernel=item.is_kernel,
                               text=item.text, size=1))
    return out


def _to_decoded(item: ProgramItem, labels: dict[str, int]) -> isa.DecodedInstruction:
    """Build the DecodedInstruction for a validated base-instruction item."""
    name = item.symbols[0].lower()
    ops = item.symbols[1:]
    reg = isa.register_name_to_index

    def resolve_target(tok, lo, hi, what):
        if LABEL_RE.match(tok):
            if tok not in labels:
                raise UndefinedLabel(tok, item.line)
            offset = labels[tok] - item.address
            if not lo <= offset <= hi:
                raise BranchOutOfRange(item.line, f"{what} to {tok!r} out of range ({offset})")
            return offset
        return parse_int(tok)

    if name in _R_TYPE:
        return isa.DecodedInstruction(name, rd=reg(ops[0]), rs1=reg(ops[1]), rs2=reg(ops[2]))
    if name in _I_ARITH or name in _SHIFTS:
        return isa.DecodedInstruction(name, rd=reg(ops[0]), rs1=reg(ops[1]), imm=parse_int(ops[2]))
    if name in _LOADS:
        return isa.DecodedInstruction(name, rd=reg(ops[0]), rs1=reg(ops[2]), imm=parse_int(ops[1]))
    if name in _STORES:
        return isa.DecodedInstruction(name, rs2=reg(ops[0]), rs1=reg(ops[2]), imm=parse_int(ops[1]))
    if name == "jalr":
        if _is_register(ops[1]):
            return isa.DecodedInstruction(name, rd=reg(ops[0]), rs1=reg(ops[1]), imm=parse_int(ops[2]))
        return isa.DecodedInstruction(name, rd=reg(ops[0]), rs1=reg(ops[2]), imm=parse_int(ops[1]))
    if name in _BRANCHES:
        imm = resolve_target(ops[2], -4096, 4094, "branch")
        return isa.DecodedInstruction(name, rs1=reg(ops[0]), rs2=reg(ops[1]), imm=imm)
    if name == "jal":
        imm = resolve_target(ops[1], -(1 << 20), (1 << 20) - 2, "jump")
        return isa.DecodedInstruction(name, rd=reg(ops[0]), imm=imm)
    if name in ("lui", "auipc"):
        field_value = parse_int(ops[1]) & 0xFFFFF
        return isa.DecodedInstruction(name, rd=reg(ops[0]),
                                      imm=isa.sign_extend(field_value, 20) * 4096)
    if name in _NO_OPERANDS:
        if name == "fence":
            return isa.DecodedInstruction(name, rd=0, rs1=0, imm=0x0FF)
        return isa.DecodedInstruction(name, rd=0, rs1=0,
                                      imm=isa.OPSPECS[name].funct12)
    raise ValueError(f"cannot encode {name!r}")  # pragma: no cover


def resolve_and_encode(items: list[ProgramItem], labels: dict[str, int],
                       config: KernelConfig | None = None) -> AssembledProgram:
    """Resolve labels, expand pseudos, and encode the text/data images."""
    config = config or KernelConfig()
    errors = [it for it in items if it.kind == ERROR]
    if errors:
        raise AssemblyHasErrors(errors)

    expanded: list[ProgramItem] = []
    for item in items:
        if item.kind == PSEUDO:
            expanded.extend(expand_pseudo(item, labels))
        else:
            expanded.append(item)

    text_image = []
    for item in expanded:
        if item.kind != INSTRUCTION:
            continue
        word = isa.encode(_to_decoded(item, labels))
        text_image.append((item.address, word, item))

    # pack directive payloads into little-endian words
    byte_map: dict[int, bytearray] = {}
    for item in expanded:
        if item.kind != DIRECTIVE or not item.data_bytes:
            continue
        for i, b in enumerate(item.data_bytes):
            addr = item.address + i
            word_addr = addr & ~3
            byte_map.setdefault(word_addr, bytearray(4))[addr & 3] = b
    data_image = [(addr, int.from_bytes(bs, "little"))
                  for addr, bs in sorted(byte_map.items())]

    if EXIT_LABEL not in labels:
        raise UndefinedLabel(EXIT_LABEL)
    return AssembledProgram(
        items=expanded,
        source_items=items,
        labels=labels,
        text_image=text_image,
        data_image=data_image,
        entry_address=config.text_base,
        exit_address=labels[EXIT_LABEL],
        config=config,
    )


def assemble(user_source: str, config: KernelConfig | None = None) -> AssembledProgram:
    """Full pipeline over user source; raises AssemblyError on any error item."""
    wrap = wrap_with_kernel(user_source, config)
    items, labels = parse(wrap.source, wrap.kernel_lines, wrap.config)
    errors = [it for it in items if it.kind == ERROR]
    if errors:
        raise AssemblyError(errors)
    return resolve_and_encode(items, labels, wrap.config)
