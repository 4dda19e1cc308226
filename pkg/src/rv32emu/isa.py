"""RV32I (+ M-extension multiplies) instruction tables, encoding and decoding.

Everything here is pure: immutable tables, no machine state.
"""

from __future__ import annotations

from dataclasses import dataclass

MASK32 = 0xFFFFFFFF


class UnknownMnemonic(Exception):
    pass


class UnknownRegister(Exception):
    pass


class IllegalInstruction(Exception):
    def __init__(self, word: int, reason: str = ""):
        detail = f": {reason}" if reason else ""
        super().__init__(f"illegal instruction 0x{word & MASK32:08x}{detail}")
        self.word = word & MASK32


class ImmediateOutOfRange(Exception):
    pass


class InvalidOperandForFormat(Exception):
    pass


@dataclass(frozen=True)
class OpSpec:
    """One row of the instruction table.

    funct12 discriminates the system instructions (ecall/ebreak), which share
    opcode and funct3 and differ only in the immediate field.
    """
    mnemonic: str
    fmt: str                     # one of R, I, S, B, U, J
    opcode: int
    funct3: int | None = None
    funct7: int | None = None
    funct12: int | None = None


@dataclass(frozen=True)
class DecodedInstruction:
    """Mnemonic plus operand fields, independent of bit layout.

    Field presence follows the format: R has rd/rs1/rs2, I has rd/rs1/imm,
    S and B have rs1/rs2/imm, U and J have rd/imm.  U-format imm carries the
    full 32-bit value (upper 20 bits already shifted left by 12).
    """
    mnemonic: str
    rd: int | None = None
    rs1: int | None = None
    rs2: int | None = None
    imm: int | None = None


@dataclass(frozen=True)
class FieldSegment:
    hi: int
    lo: int
    name: str
    bits: str


_TABLE = [
    # mnemonic  fmt  opcode      funct3  funct7
    ("lui",    "U", 0b0110111, None,  None),
    ("auipc",  "U", 0b0010111, None,  None),
    ("jal",    "J", 0b1101111, None,  None),
    ("jalr",   "I", 0b1100111, 0b000, None),
    ("beq",    "B", 0b1100011, 0b000, None),
    ("bne",    "B", 0b1100011, 0b001, None),
    ("blt",    "B", 0b1100011, 0b100, None),
    ("bge",    "B", 0b1100011, 0b101, None),
    ("bltu",   "B", 0b1100011, 0b110, None),
    ("bgeu",   "B", 0b1100011, 0b111, None),
    ("lb",     "I", 0b0000011, 0b000, None),
    ("lh",     "I", 0b0000011, 0b001, None),
    ("lw",     "I", 0b0000011, 0b010, None),
    ("lbu",    "I", 0b0000011, 0b100, None),
    ("lhu",    "I", 0b0000011, 0b101, None),
    ("sb",     "S", 0b0100011, 0b000, None),
    ("sh",     "S", 0b0100011, 0b001, None),
    ("sw",     "S", 0b0100011, 0b010, None),
    ("addi",   "I", 0b0010011, 0b000, None),
    ("slti",   "I", 0b0010011, 0b010, None),
    ("sltiu",  "I", 0b0010011, 0b011, None),
    ("xori",   "I", 0b0010011, 0b100, None),
    ("ori",    "I", 0b0010011, 0b110, None),
    ("andi",   "I", 0b0010011, 0b111, None),
    # shift-immediates are I-format with a 5-bit shamt; funct7 discriminates
    ("slli",   "I", 0b0010011, 0b001, 0b0000000),
    ("srli",   "I", 0b0010011, 0b101, 0b0000000),
    ("srai",   "I", 0b0010011, 0b101, 0b0100000),
    ("add",    "R", 0b0110011, 0b000, 0b0000000),
    ("sub",    "R", 0b0110011, 0b000, 0b0100000),
    ("sll",    "R", 0b0110011, 0b001, 0b0000000),
    ("slt",    "R", 0b0110011, 0b010, 0b0000000),
    ("sltu",   "R", 0b0110011, 0b011, 0b0000000),
    ("xor",    "R", 0b0110011, 0b100, 0b0000000),
    ("srl",    "R", 0b0110011, 0b101, 0b0000000),
    ("sra",    "R", 0b0110011, 0b101, 0b0100000),
    ("or",     "R", 0b0110011, 0b110, 0b0000000),
    ("and",    "R", 0b0110011, 0b111, 0b0000000),
    ("fence",  "I", 0b0001111, 0b000, None),
    ("mul",    "R", 0b0110011, 0b000, 0b0000001),
    ("mulh",   "R", 0b0110011, 0b001, 0b0000001),
    ("mulhsu", "R", 0b0110011, 0b010, 0b0000001),
    ("mulhu",  "R", 0b0110011, 0b011, 0b0000001),
]

OPSPECS: dict[str, OpSpec] = {m: OpSpec(m, f, op, f3, f7) for m, f, op, f3, f7 in _TABLE}
OPSPECS["ecall"] = OpSpec("ecall", "I", 0b1110011, 0b000, funct12=0b000000000000)
OPSPECS["ebreak"] = OpSpec("ebreak", "I", 0b1110011, 0b000, funct12=0b000000000001)

ABI_NAMES = (
    "zero ra sp gp tp t0 t1 t2 s0 s1 a0 a1 a2 a3 a4 a5 a6 a7 "
    "s2 s3 s4 s5 s6 s7 s8 s9 s10 s11 t3 t4 t5 t6"
).split()

_REGISTER_ALIASES = {name: i for i, name in enumerate(ABI_NAMES)}
_REGISTER_ALIASES["fp"] = 8
_REGISTER_ALIASES.update({f"x{i}": i for i in range(32)})

# decode lookup: opcode -> candidate OpSpecs
_BY_OPCODE: dict[int, list[OpSpec]] = {}
for _spec in OPSPECS.values():
    _BY_OPCODE.setdefault(_spec.opcode, []).append(_spec)


def lookup_opspec(mnemonic: str) -> OpSpec:
    """Table lookup by mnemonic, case-insensitive."""
    try:
        return OPSPECS[mnemonic.lower()]
    except KeyError:
        raise UnknownMnemonic(f"unknown mnemonic: {mnemonic!r}") from None


def register_name_to_index(name: str) -> int:
    """Resolve 'x0'..'x31' or an ABI name (sp, ra, a0, fp, ...) to its index."""
    idx = _REGISTER_ALIASES.get(name.lower())
    if idx is None:
        raise UnknownRegister(f"unknown register: {name!r}")
    return idx


def sign_extend(value: int, bits: int) -> int:
    """Two's-complement sign extension from `bits` wide to a Python int."""
    if value & (1 << (bits - 1)):
        return value - (1 << bits)
    return value


def _check_reg(field: str, val: int | None) -> int:
    if val is None:
        raise InvalidOperandForFormat(f"missing {field}")
    if not 0 <= val <= 31:
        raise InvalidOperandForFormat(f"{field} index {val} outside x0..x31")
    return val


def _check_imm(mnemonic: str, imm: int | None, lo: int, hi: int, multiple: int = 1) -> int:
    if imm is None:
        raise InvalidOperandForFormat(f"{mnemonic}: missing immediate")
    if not lo <= imm <= hi:
        raise ImmediateOutOfRange(f"{mnemonic}: immediate {imm} not in [{lo}, {hi}]")
    if imm % multiple:
        raise ImmediateOutOfRange(f"{mnemonic}: immediate {imm} not a multiple of {multiple}")
    return imm


def encode(instr: DecodedInstruction) -> int:
    """Encode to the unique 32-bit word, including B/J immediate scattering."""
    spec = lookup_opspec(instr.mnemonic)
    op, f3, f7 = spec.opcode, spec.funct3 or 0, spec.funct7 or 0
    fmt = spec.fmt

    if fmt == "R":
        rd = _check_reg("rd", instr.rd)
        rs1 = _check_reg("rs1", instr.rs1)
        rs2 = _check_reg("rs2", instr.rs2)
        return (f7 << 25) | (rs2 << 20) | (rs1 << 15) | (f3 << 12) | (rd << 7) | op

    if fmt == "I":
        if spec.funct12 is not None:
            # ecall/ebreak: fixed zero operands, immediate is the discriminator
            if (instr.rd or 0) != 0 or (instr.rs1 or 0) != 0 \
                    or instr.imm not in (None, spec.funct12):
                raise InvalidOperandForFormat(f"{spec.mnemonic} takes no operands")
            return (spec.funct12 << 20) | (f3 << 12) | op
        rd = _check_reg("rd", instr.rd)
        rs1 = _check_reg("rs1", instr.rs1)
        if spec.funct7 is not None:
            shamt = _check_imm(spec.mnemonic, instr.imm, 0, 31)
            imm12 = (spec.funct7 << 5) | shamt
        else:
            imm12 = _check_imm(spec.mnemonic, instr.imm, -2048, 2047) & 0xFFF
        return (imm12 << 20) | (rs1 << 15) | (f3 << 12) | (rd << 7) | op

    if fmt == "S":
        rs1 = _check_reg("rs1", instr.rs1)
        rs2 = _check_reg("rs2", instr.rs2)
        imm = _check_imm(spec.mnemonic, instr.imm, -2048, 2047) & 0xFFF
        return (((imm >> 5) & 0x7F) << 25) | (rs2 << 20) | (rs1 << 15) | (f3 << 12) \
            | ((imm & 0x1F) << 7) | op

    if fmt == "B":
        rs1 = _check_reg("rs1", instr.rs1)
        rs2 = _check_reg("rs2", instr.rs2)
        imm = _check_imm(spec.mnemonic, instr.imm, -4096, 4094, multiple=2) & 0x1FFF
        return (((imm >> 12) & 1) << 31) | (((imm >> 5) & 0x3F) << 25) | (rs2 << 20) \
            | (rs1 << 15) | (f3 << 12) | (((imm >> 1) & 0xF) << 8) | (((imm >> 11) & 1) << 7) | op

    if fmt == "U":
        rd = _check_reg("rd", instr.rd)
        imm = _check_imm(spec.mnemonic, instr.imm, -(1 << 31), (1 << 31) - 4096, multiple=4096)
        return (imm & 0xFFFFF000) | (rd << 7) | op

    if fmt == "J":
        rd = _check_reg("rd", instr.rd)
        imm = _check_imm(spec.mnemonic, instr.imm, -(1 << 20), (1 << 20) - 2, multiple=2) & 0x1FFFFF
        return (((imm >> 20) & 1) << 31) | (((imm >> 1) & 0x3FF) << 21) | (((imm >> 11) & 1) << 20) \
            | (((imm >> 12) & 0xFF) << 12) | (rd << 7) | op

    raise InvalidOperandForFormat(f"unhandled format {fmt}")  # pragma: no cover


def decode(word: int) -> DecodedInstruction:
    """Decode a 32-bit word; raises IllegalInstruction for anything unimplemented."""
    word &= MASK32
    if word == 0 or word == MASK32:
        raise IllegalInstruction(word, "reserved all-zero/all-one pattern")
    opcode = word & 0x7F
    f3 = (word >> 12) & 0x7
    f7 = (word >> 25) & 0x7F
    rd = (word >> 7) & 0x1F
    rs1 = (word >> 15) & 0x1F
    rs2 = (word >> 20) & 0x1F
    imm12 = (word >> 20) & 0xFFF

    spec = None
    for cand in _BY_OPCODE.get(opcode, ()):
        if cand.funct3 is not None and cand.funct3 != f3:
            continue
        if cand.funct12 is not None:
            if cand.funct12 != imm12 or rd != 0 or rs1 != 0:
                continue
        elif cand.funct7 is not None and cand.funct7 != f7:
            continue
        spec = cand
        break
    if spec is None:
        raise IllegalInstruction(word)

    fmt = spec.fmt
    if fmt == "R":
        return DecodedInstruction(spec.mnemonic, rd=rd, rs1=rs1, rs2=rs2)
    if fmt == "I":
        if spec.funct12 is not None:
            imm = spec.funct12
        elif spec.funct7 is not None:
            imm = rs2  # shamt lives in the rs2 field
        else:
            imm = sign_extend(imm12, 12)
        return DecodedInstruction(spec.mnemonic, rd=rd, rs1=rs1, imm=imm)
    if fmt == "S":
        imm = sign_extend((f7 << 5) | rd, 12)
        return DecodedInstruction(spec.mnemonic, rs1=rs1, rs2=rs2, imm=imm)
    if fmt == "B":
        raw = (((word >> 31) & 1) << 12) | (((word >> 7) & 1) << 11) \
            | (((word >> 25) & 0x3F) << 5) | (((word >> 8) & 0xF) << 1)
        return DecodedInstruction(spec.mnemonic, rs1=rs1, rs2=rs2, imm=sign_extend(raw, 13))
    if fmt == "U":
        return DecodedInstruction(spec.mnemonic, rd=rd, imm=sign_extend(word & 0xFFFFF000, 32))
    # J
    raw = (((word >> 31) & 1) << 20) | (((word >> 12) & 0xFF) << 12) \
        | (((word >> 20) & 1) << 11) | (((word >> 21) & 0x3FF) << 1)
    return DecodedInstruction(spec.mnemonic, rd=rd, imm=sign_extend(raw, 21))


_BREAKDOWN_LAYOUTS = {
    "R": [(31, 25, "funct7"), (24, 20, "rs2"), (19, 15, "rs1"),
          (14, 12, "funct3"), (11, 7, "rd"), (6, 0, "opcode")],
    "I": [(31, 20, "imm"), (19, 15, "rs1"),
          (14, 12, "funct3"), (11, 7, "rd"), (6, 0, "opcode")],
    "S": [(31, 25, "imm[11:5]"), (24, 20, "rs2"), (19, 15, "rs1"),
          (14, 12, "funct3"), (11, 7, "imm[4:0]"), (6, 0, "opcode")],
    "B": [(31, 25, "imm[12|10:5]"), (24, 20, "rs2"), (19, 15, "rs1"),
          (14, 12, "funct3"), (11, 7, "imm[4:1|11]"), (6, 0, "opcode")],
    "U": [(31, 12, "imm[31:12]"), (11, 7, "rd"), (6, 0, "opcode")],
    "J": [(31, 12, "imm[20|10:1|11|19:12]"), (11, 7, "rd"), (6, 0, "opcode")],
}


def breakdown(word: int) -> list[FieldSegment]:
    """Per-format bit-field segments tiling bits 31..0, descending."""
    word &= MASK32
    spec = lookup_opspec(decode(word).mnemonic)
    segments = []
    for hi, lo, name in _BREAKDOWN_LAYOUTS[spec.fmt]:
        width = hi - lo + 1
        bits = format((word >> lo) & ((1 << width) - 1), f"0{width}b")
        segments.append(FieldSegment(hi, lo, name, bits))
    return segments


def render_instruction(instr: DecodedInstruction) -> str:
    """Disassembly text for one decoded instruction, ABI register names."""
    m = instr.mnemonic
    spec = lookup_opspec(m)
    r = ABI_NAMES.__getitem__
    if m in ("ecall", "ebreak", "fence"):
        return m
    if spec.fmt == "R":
        return f"{m} {r(instr.rd)}, {r(instr.rs1)}, {r(instr.rs2)}"
    if spec.fmt == "I":
        if m in ("lb", "lh", "lw", "lbu", "lhu", "jalr"):
            return f"{m} {r(instr.rd)}, {instr.imm}({r(instr.rs1)})"
        return f"{m} {r(instr.rd)}, {r(instr.rs1)}, {instr.imm}"
    if spec.fmt == "S":
        return f"{m} {r(instr.rs2)}, {instr.imm}({r(instr.rs1)})"
    if spec.fmt == "B":
        return f"{m} {r(instr.rs1)}, {r(instr.rs2)}, {instr.imm}"
    if spec.fmt == "U":
        return f"{m} {r(instr.rd)}, 0x{(instr.imm >> 12) & 0xFFFFF:x}"
    return f"{m} {r(instr.rd)}, {instr.imm}"  # J
