# SRAM-PIM package
from .bank import (
    BondLink, GemmResult, LayoutMismatchError, MacroState, SramPimBank, SramTraceRecord,
    TileTooLargeError, gemm_weights, operating_point, split_tiles, sram_energy, tile_shape,
)

__all__ = [
    'BondLink', 'GemmResult', 'LayoutMismatchError', 'MacroState', 'SramPimBank',
    'SramTraceRecord', 'TileTooLargeError', 'gemm_weights', 'operating_point', 'split_tiles',
    'sram_energy', 'tile_shape',
]
