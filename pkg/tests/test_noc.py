import pytest
from hypothesis import given, settings, strategies as st

from config.hardware import NocSpec
from compair.numerics import Bf16, ONE, ZERO
from compair.noc import (
    COMPUTE, MOVE, WRITE, CurryAluState, DeadlockError, Flit, FlitConservationError, Hop, Mesh, RowStore,
    alu_apply, alu_configure, banks_from_mask, collective_broadcast, collective_reduce, element_batches,
    hop_count, lane_coord, rotate, route_next_hop, tree_levels, tree_reduce,
)


def bf(x):
    return Bf16.from_float(x)


def move_flit(src, dst):
    return Flit(kind=MOVE, data=ONE, steps=[Hop(*dst)], src=src)


class TestRouting:
    def test_pure_x(self):
        assert route_next_hop((0, 0), (3, 0)) == 'E'

    def test_pure_y(self):
        assert route_next_hop((2, 5), (2, 9)) == 'N'
        assert route_next_hop((2, 9), (2, 5)) == 'S'

    def test_x_before_y(self):
        assert route_next_hop((1, 2), (3, 7)) == 'E'
        assert route_next_hop((3, 2), (1, 7)) == 'W'

    def test_already_there(self):
        with pytest.raises(ValueError):
            route_next_hop((1, 1), (1, 1))

    def test_hop_count(self):
        assert hop_count((0, 0), (3, 15)) == 18


class TestCurryAlu:
    def test_input_op_leaves_argreg(self):
        state, out = alu_apply(CurryAluState(arg_reg=bf(2.0)), '+=', bf(5.0))
        assert out.to_float() == 7.0
        assert state.arg_reg.to_float() == 2.0

    def test_iter_op_updates_argreg(self):
        state = CurryAluState(arg_reg=bf(2.0), iter_arg=ONE, iter_op='add', iter_round=1)
        state, _ = alu_apply(state, 'add', bf(5.0), iter_tag=True)
        assert state.arg_reg.to_float() == 3.0
        assert state.iter_round == 0

    def test_iter_tagged_passes_when_exhausted(self):
        state = CurryAluState(arg_reg=bf(2.0), iter_round=0)
        new, out = alu_apply(state, 'mul', bf(5.0), iter_tag=True)
        assert new == state
        assert out.to_float() == 5.0

    @given(st.floats(min_value=-1e6, max_value=1e6))
    def test_mul_by_one_identity(self, x):
        _, out = alu_apply(CurryAluState(arg_reg=ONE), '*=', bf(x))
        assert out == bf(x)

    def test_wr_reg_keeps_result(self):
        state, out = alu_apply(CurryAluState(arg_reg=bf(3.0)), 'mul', bf(2.0), wr_reg=True)
        assert state.arg_reg == out == bf(6.0)

    def test_configure(self):
        state = alu_configure(CurryAluState(), bf(4.0), wr_reg=True, iter_tag=False, opcode='add', iter_num=0)
        assert state.arg_reg == bf(4.0)
        state = alu_configure(state, bf(0.5), wr_reg=False, iter_tag=True, opcode='*=', iter_num=6)
        assert (state.iter_arg, state.iter_op, state.iter_round) == (bf(0.5), 'mul', 6)


class TestMesh:
    def test_mesh_geometry(self):
        mesh = Mesh(NocSpec())
        assert len(mesh.routers) == 64
        assert mesh.coord_of(5) == (1, 1)

    def test_one_cycle_per_hop(self):
        mesh = Mesh(NocSpec())
        near = mesh.inject(move_flit((0, 0), (1, 0)))
        far = mesh.inject(move_flit((0, 1), (2, 1)))
        mesh.run_until_drained()
        assert far.done_cycle - near.done_cycle == 1
        assert far.hops == 2

    def test_port_contention_delays_loser_one_cycle(self):
        alone = Mesh(NocSpec())
        solo = alone.inject(move_flit((0, 0), (2, 0)))
        alone.run_until_drained()

        mesh = Mesh(NocSpec())
        through = mesh.inject(move_flit((0, 0), (2, 0)))
        local = mesh.inject(move_flit((1, 0), (2, 0)), at_cycle=1)
        mesh.run_until_drained()
        assert through.done_cycle == solo.done_cycle + 1
        assert local.done_cycle < through.done_cycle

    def test_empty_step(self):
        mesh = Mesh(NocSpec())
        assert mesh.step() is False
        assert mesh.cycle == 1
        assert mesh.stats.to_dict()['injected'] == 0

    def test_write_then_compute(self):
        mesh = Mesh(NocSpec())
        mesh.inject(Flit(kind=WRITE, data=bf(2.0), steps=[Hop(1, 0, wr_reg=True)], src=(0, 0)))
        mesh.run_until_drained()
        assert mesh.alu((1, 0)).arg_reg == bf(2.0)
        flit = mesh.inject(Flit(kind=COMPUTE, data=bf(5.0), steps=[Hop(1, 0, op='add')], src=(0, 0)))
        mesh.run_until_drained()
        assert flit.data.to_float() == 7.0
        assert mesh.stats.consumed == 1
        assert mesh.stats.ejected == 1

    def test_iterated_path(self):
        mesh = Mesh(NocSpec())
        mesh.set_alu((0, 0), 0, CurryAluState(arg_reg=ONE))
        flit = mesh.inject(Flit(kind=COMPUTE, data=ONE, steps=[Hop(0, 0, op='add')], src=(0, 0), iter_num=3))
        mesh.run_until_drained()
        assert flit.data.to_float() == 4.0
        assert mesh.stats.alu_ops == 3

    def test_outside_mesh(self):
        mesh = Mesh(NocSpec())
        with pytest.raises(ValueError):
            mesh.inject(move_flit((4, 0), (0, 0)))
        with pytest.raises(ValueError):
            mesh.inject(move_flit((0, 0), (0, 16)))

    def test_watchdog(self):
        mesh = Mesh(NocSpec())
        mesh.inject(move_flit((0, 0), (3, 15)))
        with pytest.raises(DeadlockError):
            mesh.run_until_drained(max_cycles=3)

    def test_conservation(self):
        mesh = Mesh(NocSpec())
        for y in range(4):
            mesh.inject(move_flit((0, y), (3, 15 - y)))
        mesh.run_until_drained()
        mesh.check_conservation()
        mesh.stats.injected += 1
        with pytest.raises(FlitConservationError):
            mesh.check_conservation()

    def test_energy_counts_hops(self):
        mesh = Mesh(NocSpec())
        mesh.inject(move_flit((0, 0), (3, 0)))
        mesh.run_until_drained()
        assert mesh.energy_pj() == pytest.approx(3 * 72 * 0.10)

    def test_trace(self):
        mesh = Mesh(NocSpec(), trace=True)
        mesh.inject(move_flit((0, 0), (1, 0)))
        mesh.run_until_drained()
        assert [event for _, _, _, event in mesh.trace] == ['inject', 'arrive', 'eject']

    @settings(max_examples=15)
    @given(st.lists(st.tuples(st.integers(0, 63), st.integers(0, 63)), min_size=1, max_size=40))
    def test_random_traffic_drains(self, pairs):
        mesh = Mesh(NocSpec())
        for src, dst in pairs:
            mesh.inject(move_flit(mesh.coord_of(src), mesh.coord_of(dst)))
        mesh.run_until_drained()
        assert mesh.stats.ejected == len(pairs)


class TestCollectives:
    def test_helpers(self):
        assert banks_from_mask(0b1011) == [0, 1, 3]
        assert banks_from_mask([3, 1, 1]) == [1, 3]
        assert rotate([0, 1, 2, 3], 2) == [2, 3, 0, 1]
        assert tree_levels([0, 1, 2, 3]) == [[(0, 1), (2, 3)], [(0, 2)]]
        assert lane_coord(NocSpec(), 16, 1, 0) == (0, 1)
        assert element_batches(6, 4) == [[(0, 0), (1, 1), (2, 2), (3, 3)], [(0, 4), (1, 5)]]

    def test_reduce_16_banks(self):
        values = {b: [bf(0.1 * (b + 1))] for b in range(16)}
        result = collective_reduce(NocSpec(), 0xFFFF, 'add', 0, values)
        assert result.combines == 15
        assert result.values[0] == tree_reduce([values[b][0] for b in range(16)], 'add')

    def test_reduce_rotated_root(self):
        values = {b: [bf(1.5 ** b)] for b in range(8)}
        result = collective_reduce(NocSpec(), range(8), 'add', 3, values)
        order = rotate(range(8), 3)
        assert result.values[0] == tree_reduce([values[b][0] for b in order], 'add')

    def test_reduce_ones(self):
        result = collective_reduce(NocSpec(), range(8), 'add', 0, {b: [ONE, ONE] for b in range(8)})
        assert [v.to_float() for v in result.values] == [8.0, 8.0]
        assert result.combines == 14

    def test_single_bank_passthrough(self):
        result = collective_reduce(NocSpec(), [5], 'add', 5, {5: [bf(3.0)]})
        assert result.combines == 0
        assert result.values == [bf(3.0)]

    def test_reduce_errors(self):
        with pytest.raises(ValueError):
            collective_reduce(NocSpec(), 0, 'add', 0, {})
        with pytest.raises(ValueError):
            collective_reduce(NocSpec(), [1, 2], 'add', 0, {1: [ONE], 2: [ONE]})

    def test_broadcast_all(self):
        result = collective_broadcast(NocSpec(), 0, 0xFFFF, [bf(2.0), bf(-1.0)])
        assert all(v == [bf(2.0), bf(-1.0)] for v in result.values.values())
        assert len(result.values) == 16

    def test_broadcast_self(self):
        result = collective_broadcast(NocSpec(), 4, [4], [bf(1.0)])
        assert result.hops == 0
        assert result.values == {4: [bf(1.0)]}

    def test_broadcast_then_reduce(self):
        c = bf(1.5)
        spread = collective_broadcast(NocSpec(), 0, range(8), [c])
        result = collective_reduce(NocSpec(), range(8), 'add', 0, spread.values)
        assert result.values[0].to_float() == 12.0

    def test_row_store(self):
        store = RowStore()
        assert store.read((0, 0, 0)) == ZERO
        store.set_row(1, 2, [ONE, bf(2.0)], start=3)
        assert store.row(1, 2, 2, start=3) == [ONE, bf(2.0)]
        assert store.snapshot() == {(1, 2, 3): 0x3F80, (1, 2, 4): 0x4000}
