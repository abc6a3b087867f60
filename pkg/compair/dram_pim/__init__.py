# DRAM-PIM package
from .channel import (
    BankState, CommandKind, CrossChannelTransferError, DramChannel, DramCommand,
    IllegalCommandError, TimingMonitor, TraceRecord, gemv_row_energy_pj, sustained_gemv_power_w,
)

__all__ = [
    'BankState', 'CommandKind', 'CrossChannelTransferError', 'DramChannel', 'DramCommand',
    'IllegalCommandError', 'TimingMonitor', 'TraceRecord', 'gemv_row_energy_pj',
    'sustained_gemv_power_w',
]
