"""RV32I assembly workbench: assembler, stepping emulator, debug sessions."""

__version__ = "0.1.0"

from .isa import DecodedInstruction, OpSpec, breakdown, decode, encode  # noqa: F401
from .assembler import AssembledProgram, KernelConfig, assemble  # noqa: F401
from .emulator import MachineState, run, setup_emulator, single_step  # noqa: F401
from .session import Session  # noqa: F401
