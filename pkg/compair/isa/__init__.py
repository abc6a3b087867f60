# ISA package: row-level instructions, packet format, translator and executors
from .packet import (
    NONE_STEP, PACKET_BITS, PATH_STEPS, RECORD_BYTES, Packet, PacketFieldError, PacketType, PathStep,
    decode_packet, dump_schedule, encode_packet, load_schedule,
)
from .instructions import (
    AssemblyError, ITER_TAG, IterConfig, NO_ITER, NocAccess, NocBCast, NocExchange, NocReduce, NocScalar,
    RowAddr, RowInstruction, SramCompute, SramWrite, assemble, disassemble,
)
from .translate import (
    FusedScalar, Geometry, Phase, Schedule, ScheduledPacket, TranslationError, co_schedule, exchange_partner,
    fuse_paths, translate,
)
from .executor import ExecutionResult, PacketExecutor, RowInterpreter

assert PACKET_BITS == 72

__all__ = [
    'NONE_STEP', 'PACKET_BITS', 'PATH_STEPS', 'RECORD_BYTES', 'Packet', 'PacketFieldError', 'PacketType',
    'PathStep', 'decode_packet', 'dump_schedule', 'encode_packet', 'load_schedule',
    'AssemblyError', 'ITER_TAG', 'IterConfig', 'NO_ITER', 'NocAccess', 'NocBCast', 'NocExchange',
    'NocReduce', 'NocScalar', 'RowAddr', 'RowInstruction', 'SramCompute', 'SramWrite', 'assemble',
    'disassemble', 'FusedScalar', 'Geometry', 'Phase', 'Schedule', 'ScheduledPacket', 'TranslationError',
    'co_schedule', 'exchange_partner', 'fuse_paths', 'translate', 'ExecutionResult', 'PacketExecutor',
    'RowInterpreter',
]
