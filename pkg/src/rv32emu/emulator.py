"""Machine state and the fetch-decode-execute interpreter.

Registers live in a 32-entry list; memory is a sparse map of word-aligned
addresses to 32-bit values, materialized on write (and by the program image).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import isa
from .assembler import DEFAULT_DATA_BASE, DEFAULT_STACK_TOP, DEFAULT_TEXT_BASE, AssembledProgram
from .isa import MASK32, sign_extend

# halt statuses
RUNNING = "running"
EXIT = "exit"
BREAKPOINT = "breakpoint"
STEP_LIMIT = "step_limit"
FAULT = "fault"
ECALL = "ecall"
EBREAK = "ebreak"

# breakpoint and step_limit are pauses; the rest never resume
RESUMABLE = frozenset({BREAKPOINT, STEP_LIMIT})
TERMINAL = frozenset({EXIT, FAULT, ECALL, EBREAK})

DEFAULT_MAX_STEPS = 1_000_000
DEFAULT_HEAP_OFFSET = 0x10000   # data region size reserved below the heap


class MisalignedAccess(Exception):
    pass


class MachineHalted(Exception):
    def __init__(self, status: str, detail: str | None = None):
        self.status = status
        self.detail = detail
        suffix = f" ({detail})" if detail else ""
        super().__init__(f"halted: {status}{suffix}")


class NotAnInstructionAddress(Exception):
    pass


@dataclass(frozen=True)
class LayoutConfig:
    """The five-region memory layout: text, data, heap, free gap, stack."""
    text_base: int = DEFAULT_TEXT_BASE
    data_base: int = DEFAULT_DATA_BASE
    heap_base: int = DEFAULT_DATA_BASE + DEFAULT_HEAP_OFFSET
    stack_top: int = DEFAULT_STACK_TOP

    def __post_init__(self):
        if not (self.text_base < self.data_base <= self.heap_base < self.stack_top):
            raise ValueError("layout must satisfy text < data <= heap < stack")


@dataclass
class MachineState:
    regs: list[int] = field(default_factory=lambda: [0] * 32)
    pc: int = 0
    memory: dict[int, int] = field(default_factory=dict)
    halt: str = RUNNING
    halt_detail: str | None = None
    step_count: int = 0


@dataclass
class StepResult:
    pc_before: int
    pc_after: int
    changed_registers: set[int]
    changed_memory: set[tuple[int, int, int]]   # (word address, old, new)
    halt: str


def setup_emulator(program: AssembledProgram) -> MachineState:
    """Fresh machine: zero registers, pc at entry, program image preloaded.

    sp and gp get their values by executing the kernel prefix, not here.
    """
    memory = {addr: word for addr, word, _ in program.text_image}
    memory.update(dict(program.data_image))
    return MachineState(pc=program.entry_address, memory=memory)


def memory_access(state: MachineState, address: int, width: int, op: str,
                  value: int | None = None, signed: bool = False) -> int:
    """Sub-word read/write against the sparse map.

    Reads of never-written locations return 0; writes materialize (and
    read-modify-write) the containing little-endian word.
    """
    address &= MASK32
    if width not in (1, 2, 4):
        raise ValueError(f"width must be 1, 2 or 4, not {width}")
    if address % width:
        raise MisalignedAccess(f"misaligned {op} of width {width} at 0x{address:08x}")
    word_addr = address & ~3
    shift = (address & 3) * 8
    lane_mask = (1 << (8 * width)) - 1
    if op == "read":
        raw = (state.memory.get(word_addr, 0) >> shift) & lane_mask
        if signed:
            raw = sign_extend(raw, 8 * width) & MASK32
        return raw
    if op != "write":
        raise ValueError(f"op must be 'read' or 'write', not {op!r}")
    old = state.memory.get(word_addr, 0)
    state.memory[word_addr] = (old & ~(lane_mask << shift)) | ((value & lane_mask) << shift)
    return state.memory[word_addr]


def _resume_or_raise(state: MachineState):
    if state.halt in RESUMABLE:
        state.halt = RUNNING
        state.halt_detail = None
    if state.halt != RUNNING:
        raise MachineHalted(state.halt, state.halt_detail)


def single_step(state: MachineState, program: AssembledProgram) -> StepResult:
    """Fetch, decode, and execute the instruction at pc.

    Faults (illegal fetch, misaligned access, misaligned jump target) leave
    the machine state untouched apart from halt/halt_detail, with pc still at
    the faulting instruction.
    """
    _resume_or_raise(state)
    pc = state.pc
    changed_regs: set[int] = set()
    changed_mem: set[tuple[int, int, int]] = set()

    def result():
        return StepResult(pc, state.pc, changed_regs, changed_mem, state.halt)

    def fault(detail):
        state.halt = FAULT
        state.halt_detail = detail
        return result()

    # fetch
    if pc % 4:
        return fault(f"misaligned pc 0x{pc:08x}")
    if not (program.config.text_base <= pc < program.text_end):
        return fault(f"illegal instruction fetch outside text segment at 0x{pc:08x}")
    try:
        instr = isa.decode(state.memory.get(pc, 0))
    except isa.IllegalInstruction as exc:
        return fault(f"{exc} at 0x{pc:08x}")

    regs = state.regs
    m = instr.mnemonic
    rd, rs1, rs2, imm = instr.rd, instr.rs1, instr.rs2, instr.imm
    u1 = regs[rs1] if rs1 is not None else 0
    u2 = regs[rs2] if rs2 is not None else 0
    s1 = sign_extend(u1, 32)
    s2 = sign_extend(u2, 32)
    next_pc = (pc + 4) & MASK32

    def write_reg(index, val):
        val &= MASK32
        if index and regs[index] != val:
            changed_regs.add(index)
        if index:
            regs[index] = val

    def jump_to(target):
        nonlocal next_pc
        target &= MASK32
        if target % 4:
            return f"misaligned jump target 0x{target:08x}"
        next_pc = target
        return None

    def store(addr, width, val):
        word_addr = (addr & MASK32) & ~3
        old = state.memory.get(word_addr, 0)
        new = memory_access(state, addr, width, "write", value=val)
        if old != new:
            changed_mem.add((word_addr, old, new))

    try:
        if m == "lui":
            write_reg(rd, imm)
        elif m == "auipc":
            write_reg(rd, pc + imm)
        elif m == "jal":
            err = jump_to(pc + imm)
            if err:
                return fault(err)
            write_reg(rd, pc + 4)
        elif m == "jalr":
            err = jump_to((u1 + imm) & ~1)
            if err:
                return fault(err)
            write_reg(rd, pc + 4)
        elif m in ("beq", "bne", "blt", "bge", "bltu", "bgeu"):
            taken = {
                "beq": u1 == u2, "bne": u1 != u2,
                "blt": s1 < s2, "bge": s1 >= s2,
                "bltu": u1 < u2, "bgeu": u1 >= u2,
            }[m]
            if taken:
                err = jump_to(pc + imm)
                if err:
                    return fault(err)
        elif m in ("lb", "lh", "lw", "lbu", "lhu"):
            width = {"lb": 1, "lbu": 1, "lh": 2, "lhu": 2, "lw": 4}[m]
            val = memory_access(state, u1 + imm, width, "read", signed=m in ("lb", "lh"))
            write_reg(rd, val)
        elif m in ("sb", "sh", "sw"):
            width = {"sb": 1, "sh": 2, "sw": 4}[m]
            store(u1 + imm, width, u2)
        elif m == "addi":
            write_reg(rd, u1 + imm)
        elif m == "slti":
            write_reg(rd, 1 if s1 < imm else 0)
        elif m == "sltiu":
            write_reg(rd, 1 if u1 < (imm & MASK32) else 0)
        elif m == "xori":
            write_reg(rd, u1 ^ (imm & MASK32))
        elif m == "ori":
            write_reg(rd, u1 | (imm & MASK32))
        elif m == "andi":
            write_reg(rd, u1 & (imm & MASK32))
        elif m == "slli":
            write_reg(rd, u1 << imm)
        elif m == "srli":
            write_reg(rd, u1 >> imm)
        elif m == "srai":
            write_reg(rd, s1 >> imm)
        elif m == "add":
            write_reg(rd, u1 + u2)
        elif m == "sub":
            write_reg(rd, u1 - u2)
        elif m == "sll":
            write_reg(rd, u1 << (u2 & 31))
        elif m == "slt":
            write_reg(rd, 1 if s1 < s2 else 0)
        elif m == "sltu":
            write_reg(rd, 1 if u1 < u2 else 0)
        elif m == "xor":
            write_reg(rd, u1 ^ u2)
        elif m == "srl":
            write_reg(rd, u1 >> (u2 & 31))
        elif m == "sra":
            write_reg(rd, s1 >> (u2 & 31))
        elif m == "or":
            write_reg(rd, u1 | u2)
        elif m == "and":
            write_reg(rd, u1 & u2)
        elif m == "mul":
            write_reg(rd, s1 * s2)
        elif m == "mulh":
            write_reg(rd, (s1 * s2) >> 32)
        elif m == "mulhsu":
            write_reg(rd, (s1 * u2) >> 32)
        elif m == "mulhu":
            write_reg(rd, (u1 * u2) >> 32)
        elif m == "ecall":
            state.halt = ECALL
            state.step_count += 1
            return result()
        elif m == "ebreak":
            state.halt = EBREAK
            state.step_count += 1
            return result()
        elif m == "fence":
            pass
        else:  # pragma: no cover
            return fault(f"unimplemented instruction {m!r}")
    except MisalignedAccess as exc:
        return fault(str(exc))

    state.pc = next_pc
    state.step_count += 1
    return result()


def run(state: MachineState, program: AssembledProgram,
        breakpoints: frozenset[int] | set[int] = frozenset(),
        max_steps: int = DEFAULT_MAX_STEPS) -> MachineState:
    """Step until the exit loop, a breakpoint, a halt, or the step budget.

    The breakpointed instruction is not executed; a breakpoint at the current
    pc does not re-trigger until at least one step has been taken.
    """
    _resume_or_raise(state)
    steps = 0
    while True:
        if state.pc == program.exit_address:
            state.halt = EXIT
            break
        if steps > 0 and state.pc in breakpoints:
            state.halt = BREAKPOINT
            break
        if steps >= max_steps:
            state.halt = STEP_LIMIT
            break
        single_step(state, program)
        steps += 1
        if state.halt != RUNNING:
            break
    return state


def _check_instruction_address(program: AssembledProgram, address: int):
    if address % 4 or not (program.config.text_base <= address < program.text_end):
        raise NotAnInstructionAddress(f"0x{address:08x} is not a text instruction address")


def set_breakpoint(breakpoints: set[int], address: int,
                   program: AssembledProgram) -> set[int]:
    """Add a breakpoint (idempotent); returns the new set."""
    _check_instruction_address(program, address)
    return set(breakpoints) | {address}


def clear_breakpoint(breakpoints: set[int], address: int,
                     program: AssembledProgram) -> set[int]:
    """Remove a breakpoint (idempotent); returns the new set."""
    _check_instruction_address(program, address)
    return set(breakpoints) - {address}
