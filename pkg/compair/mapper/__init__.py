# Mapper: Schicht-Graph -> Bänke, Kacheln und Ziele
from .costs import MAC_LANES, TileCost, dram_tile_cost, pad_rows, sram_tile_cost, sram_tile_count, stream_cost
from .planner import (
    DRAM_VARIANTS, NLU_VARIANTS, AttentionPlan, CapacityError, FcPlan, NonlinearPlan, TilePlan,
    Utilization, estimate_utilization, fc_op_cost, fc_shapes, group_banks, plan_attention, plan_layer,
    plan_nonlinear, split_weight, stage_layers,
)
from .functional import reference_gemv, simulate_gemv

__all__ = [
    'MAC_LANES', 'TileCost', 'dram_tile_cost', 'pad_rows', 'sram_tile_cost', 'sram_tile_count',
    'stream_cost', 'DRAM_VARIANTS', 'NLU_VARIANTS', 'AttentionPlan', 'CapacityError', 'FcPlan',
    'NonlinearPlan', 'TilePlan', 'Utilization', 'estimate_utilization', 'fc_op_cost', 'fc_shapes',
    'group_banks', 'plan_attention', 'plan_layer', 'plan_nonlinear', 'split_weight', 'stage_layers',
    'reference_gemv', 'simulate_gemv',
]
