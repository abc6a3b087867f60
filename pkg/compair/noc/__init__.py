# NoC package
from .router import (
    CurryAluState, RouterState, PORTS, alu_apply, alu_configure, hop_count, route_next_hop,
)
from .mesh import (
    COMPUTE, MOVE, READ, WRITE, DeadlockError, Flit, FlitConservationError, Hop, Mesh, NocStats,
)
from .collectives import (
    CollectiveResult, RowStore, Transfer, banks_from_mask, collective_broadcast, collective_reduce,
    element_batches, execute_phases, lane_coord, plan_broadcast, plan_reduce, rotate, tree_levels,
    tree_reduce,
)

__all__ = [
    'CurryAluState', 'RouterState', 'PORTS', 'alu_apply', 'alu_configure', 'hop_count',
    'route_next_hop', 'COMPUTE', 'MOVE', 'READ', 'WRITE', 'DeadlockError', 'Flit',
    'FlitConservationError', 'Hop', 'Mesh', 'NocStats', 'CollectiveResult', 'RowStore', 'Transfer',
    'banks_from_mask', 'collective_broadcast', 'collective_reduce', 'element_batches',
    'execute_phases', 'lane_coord', 'plan_broadcast', 'plan_reduce', 'rotate', 'tree_levels',
    'tree_reduce',
]
