import pytest
from hypothesis import given, strategies as st

from config.hardware import DramPimSpec, HardwareConfig
from compair.isa import (
    AssemblyError, FusedScalar, NocExchange, NocReduce, NocScalar, Packet, PacketExecutor, PacketFieldError,
    PacketType, PathStep, RECORD_BYTES, RowAddr, RowInterpreter, TranslationError, assemble, decode_packet,
    co_schedule, disassemble, dump_schedule, encode_packet, exchange_partner, fuse_paths, load_schedule,
    translate,
)
from compair.noc import RowStore
from compair.numerics import Bf16, ONE

# eine Lane pro Bank in den Bänken 0..7
EIGHT_BANKS = sum(1 << (4 * b) for b in range(8))

FUSED_ROUNDS = 6


def bf(x):
    return Bf16.from_float(x)


def exp_like_chain(rounds=FUSED_ROUNDS):
    """*=X auf Lane 0, /=IterRound auf Lane 1, +=1 auf Lane 2 von Bank 0"""
    lines = []
    for r in range(rounds):
        src = '0x0' if r == 0 else '0x1'
        config = f'iter(1.0,-=,{rounds})' if r == 0 else 'iter'
        lines += [
            f'NoC_Scalar *=, {src}, 0x1, 0x1',
            f'NoC_Scalar /=, 0x1, 0x1, 0x2, {config}',
            'NoC_Scalar +=, 0x1, 0x1, 0x4',
        ]
    return '\n'.join(lines)


steps = st.builds(PathStep, x=st.integers(0, 15), y=st.integers(0, 15), wr_reg=st.booleans(),
                  iter_tag=st.booleans(), opcode=st.sampled_from(['add', 'sub', 'mul', 'div']))
packets = st.builds(Packet, type=st.sampled_from(list(PacketType)), data=st.integers(0, 0xFFFF).map(Bf16),
                    iter_num=st.integers(0, 15), path=st.tuples(steps, steps, steps, steps))


class TestAssembler:
    def test_exchange(self):
        [instr] = assemble('NoC_Exchange R-, 0x10, 0x12, 1, 2')
        assert instr == NocExchange('R-', RowAddr(0x10), RowAddr(0x12), 1, 2)

    def test_empty_program(self):
        assert assemble('') == []
        assert assemble('# nur Kommentar\n\n') == []

    def test_reduce_fields(self):
        [instr] = assemble('NoC_Reduce +=, 0x0, 0x1, 0xFFFF, 3')
        assert instr == NocReduce('add', RowAddr(0), RowAddr(1), 0xFFFF, 3)

    def test_scalar_with_iteration_config(self):
        [instr] = assemble('NoC_Scalar /=, 0x2:3, 0x2:3, 0x2, iter(1.0,-=,6), slot=1')
        assert instr.op == 'div'
        assert instr.src == RowAddr(2, 3)
        assert instr.config.init and instr.config.rounds == 6
        assert instr.config.op == 'sub'
        assert instr.slot == 1

    def test_disassemble_reassembles(self):
        program = assemble(exp_like_chain(2) + '\nNoC_Access Wr, -, -, 0xF, 1.5\nSRAM_Compute 0x3, 0x4, 512')
        assert assemble(disassemble(program)) == program

    def test_unknown_mnemonic_reports_line(self):
        with pytest.raises(AssemblyError) as exc:
            assemble('NoC_Scalar +=, 0x0, 0x1, 0x1\nNoC_Jump 0x4')
        assert exc.value.line_no == 2

    @pytest.mark.parametrize('text', [
        'NoC_Reduce +=, 0x0, 0x1, 0xFFFF',
        'NoC_Scalar +=, 0x0, 0x1, 0x10000000000000000',
        'NoC_Exchange R-, 0x0, 0x1, 2, 2',
        'NoC_Exchange X+, 0x0, 0x1, 1, 2',
        'NoC_Scalar +=, 0x0, 0x1, 0x1, iter(1.0,-=,16)',
        'NoC_Access Rd, 0x0, -, 0x1',
        'NoC_Scalar ^=, 0x0, 0x1, 0x1',
    ])
    def test_rejected(self, text):
        with pytest.raises(AssemblyError):
            assemble(text)


class TestPacket:
    def test_all_zero_packet(self):
        packet = decode_packet(0)
        assert packet.type == PacketType.NONE
        assert encode_packet(Packet()) == 0

    @given(packets)
    def test_round_trip(self, packet):
        word = encode_packet(packet)
        assert word < 1 << 72
        assert decode_packet(word) == packet

    def test_data_field_position(self):
        word = encode_packet(Packet.build(PacketType.SCALAR, [PathStep(1, 2)], ONE))
        assert (word >> 52) & 0xFFFF == 0x3F80
        assert word >> 68 == int(PacketType.SCALAR)

    def test_build_pads_with_empty_steps(self):
        packet = Packet.build(PacketType.SCALAR, [PathStep(1, 0), PathStep(2, 0)])
        assert len(packet.active_steps()) == 2

    def test_repeated_coordinate_is_not_representable(self):
        with pytest.raises(PacketFieldError):
            Packet.build(PacketType.SCALAR, [PathStep(1, 0), PathStep(1, 0, opcode='mul')])

    def test_field_out_of_range(self):
        with pytest.raises(PacketFieldError):
            encode_packet(Packet(PacketType.SCALAR, ONE, iter_num=16))
        with pytest.raises(PacketFieldError):
            decode_packet(1 << 72)
        with pytest.raises(PacketFieldError):
            decode_packet(0xF << 68)

    def test_dump_and_load(self):
        items = [Packet.build(PacketType.WRITE, [PathStep(3, 15, wr_reg=True)], bf(2.0)),
                 Packet.build(PacketType.READ, [PathStep(0, 1)])]
        blob = dump_schedule(items)
        assert len(blob) == 2 * RECORD_BYTES
        assert load_schedule(blob) == items
        with pytest.raises(PacketFieldError):
            load_schedule(blob[:-1])


class TestTranslate:
    def test_reduce_over_8_banks(self):
        schedule = translate(assemble(f'NoC_Reduce +=, 0x0, 0x1, {EIGHT_BANKS:#x}, 0'), HardwareConfig())
        assert schedule.count(PacketType.REDUCE) == 7
        assert len([p for p in schedule.phases if p.label == 'reduce']) == 6

    def test_reduce_root_outside_mask(self):
        with pytest.raises(TranslationError):
            translate(assemble(f'NoC_Reduce +=, 0x0, 0x1, {EIGHT_BANKS:#x}, 9'), HardwareConfig())

    def test_reduce_uneven_lanes(self):
        with pytest.raises(TranslationError):
            translate(assemble('NoC_Reduce +=, 0x0, 0x1, 0x31, 0'), HardwareConfig())

    def test_scalar_single_router(self):
        schedule = translate(assemble('NoC_Scalar +=, 0x0, 0x1, 0x1'), HardwareConfig())
        [sp] = schedule.packets()
        assert sp.packet.type == PacketType.SCALAR
        assert len(sp.packet.active_steps()) == 1
        assert sp.src == (0, 0, 0) and sp.dst == (0, 1, 0)

    def test_scalar_elements_follow_mask_order(self):
        schedule = translate(assemble('NoC_Scalar *=, 0x0:8, 0x1, 0xF0'), HardwareConfig())
        assert [(sp.bank, sp.src) for sp in schedule.packets()] == [(1, (1, 0, 8 + k)) for k in range(4)]

    def test_broadcast(self):
        schedule = translate(assemble(f'NoC_BCast 0x0, 0x1, {EIGHT_BANKS:#x}, 0'), HardwareConfig())
        assert schedule.count(PacketType.BROADCAST) == 1 + 7

    def test_exchange_packets(self):
        schedule = translate(assemble('NoC_Exchange R-, 0x10, 0x12, 1, 2, 4'), HardwareConfig())
        assert schedule.count(PacketType.EXCHANGE) == 16 * 4
        assert schedule.count(PacketType.WRITE) == 16 * 4 * 2

    def test_exchange_group_must_divide_span(self):
        with pytest.raises(TranslationError):
            translate(assemble('NoC_Exchange R+, 0x0, 0x1, 1, 3, 4'), HardwareConfig())

    def test_exchange_partner(self):
        assert [exchange_partner(p, 1, 2) for p in range(4)] == [1, 0, 3, 2]
        assert [exchange_partner(p, 2, 4) for p in range(8)] == [2, 3, 0, 1, 6, 7, 4, 5]

    def test_per_bank_dump(self):
        schedule = translate(assemble('NoC_Scalar +=, 0x0, 0x1, 0xFF'), HardwareConfig())
        assert len(schedule.dump(1)) == 4 * RECORD_BYTES
        assert schedule.dump(7) == b''


class TestFusion:
    def test_iterated_chain_becomes_one_packet(self):
        fused = fuse_paths(assemble(exp_like_chain()))
        assert len(fused) == 1
        assert fused[0].iter_num == FUSED_ROUNDS
        schedule = translate(fused, HardwareConfig())
        [sp] = [sp for sp in schedule.packets() if sp.packet.type == PacketType.SCALAR]
        assert len(sp.packet.active_steps()) == 3
        assert sp.packet.iter_num == FUSED_ROUNDS
        # IterRound-Initialisierung als eigenes Write-Paket
        assert schedule.count(PacketType.WRITE) == 1

    def test_unrelated_scalars_not_fused(self):
        program = assemble('NoC_Scalar +=, 0x0, 0x1, 0x1\nNoC_Scalar *=, 0x5, 0x6, 0x1')
        assert fuse_paths(program) == program

    def test_five_step_chain_splits(self):
        program = assemble('\n'.join([
            'NoC_Scalar *=, 0x0, 0x1, 0x1',
            'NoC_Scalar +=, 0x1, 0x1, 0x2',
            'NoC_Scalar -=, 0x1, 0x1, 0x4',
            'NoC_Scalar /=, 0x1, 0x1, 0x8',
            'NoC_Scalar +=, 0x1, 0x1, 0x1',
        ]))
        fused = fuse_paths(program)
        assert len(fused) == 2
        assert isinstance(fused[0], FusedScalar) and len(fused[0].body) == 4
        assert isinstance(fused[1], NocScalar)

    def test_fused_matches_unfused(self):
        hw = HardwareConfig()
        setup = 'NoC_Access Wr, -, -, 0x1, 0.5\nNoC_Access Wr, -, -, 0x2, 6.0\nNoC_Access Wr, -, -, 0x4, 1.0\n'
        program = assemble(setup + exp_like_chain())
        results = []
        for prog in (program, fuse_paths(program)):
            store = RowStore()
            store.write((0, 0, 0), bf(0.75))
            cycles = PacketExecutor(hw, store).run(translate(prog, hw)).cycles
            results.append((store.read((0, 1, 0)), cycles))
        (unfused, unfused_cycles), (fused, fused_cycles) = results
        assert fused == unfused
        assert fused_cycles < unfused_cycles

    def test_geometry_decides_mask_compatibility(self):
        # 0x10: bei 4 Routern pro Bank Bank 1, bei 8 Routern pro Bank Lane 4 von Bank 0
        program = assemble('NoC_Scalar *=, 0x0, 0x1, 0x1\nNoC_Scalar +=, 0x1, 0x1, 0x10')
        assert fuse_paths(program) == program
        eight = HardwareConfig(dram=DramPimSpec(banks_per_channel=8))
        fused = fuse_paths(program, eight)
        assert len(fused) == 1 and isinstance(fused[0], FusedScalar)


class TestCoSchedule:
    def flow(self, slot, mask, row):
        tail = f', slot={slot}' if slot else ''
        text = (f'NoC_Access Wr, -, -, {mask:#x}, 2.0{tail}\n'
                f'NoC_Scalar *=, {row:#x}, {row:#x}, {mask:#x}, -{tail}\n')
        return translate(assemble(text), HardwareConfig())

    def test_phases_are_stacked(self):
        a, b = self.flow(0, EIGHT_BANKS, 0), self.flow(1, EIGHT_BANKS << 3, 1)
        merged = co_schedule([a, b])
        assert len(merged.phases) == len(a.phases) == len(b.phases)
        assert len(merged.packets()) == len(a.packets()) + len(b.packets())

    def test_stacked_flows_share_the_mesh(self):
        hw = HardwareConfig()
        a, b = self.flow(0, EIGHT_BANKS, 0), self.flow(1, EIGHT_BANKS << 3, 1)
        store = RowStore({(0, 0, 0): bf(1.5), (0, 1, 0): bf(0.25)})
        single = PacketExecutor(hw, RowStore(dict(store.cells))).run(a).cycles
        both = PacketExecutor(hw, store).run(co_schedule([a, b])).cycles
        assert both < 2 * single
        assert store.read((0, 0, 0)) == bf(3.0)
        assert store.read((0, 1, 0)) == bf(0.5)

    def test_shared_slot_rejected(self):
        a = self.flow(0, EIGHT_BANKS, 0)
        with pytest.raises(TranslationError):
            co_schedule([a, self.flow(0, EIGHT_BANKS, 1)])


class TestExecution:
    def run_both(self, text, cells):
        hw = HardwareConfig()
        program = assemble(text)
        ref = RowInterpreter(hw, RowStore(dict(cells))).run(program)
        mesh_store = RowStore(dict(cells))
        result = PacketExecutor(hw, mesh_store).run(translate(program, hw))
        return ref, mesh_store, result

    def test_reduce_agrees_with_interpreter(self):
        cells = {(b, 0, 0): bf(0.5 * b + 0.25) for b in range(8)}
        ref, mesh, result = self.run_both(f'NoC_Reduce +=, 0x0, 0x1, {EIGHT_BANKS:#x}, 0', cells)
        assert mesh.snapshot() == ref.snapshot()
        assert mesh.read((0, 1, 0)).to_float() == sum(0.5 * b + 0.25 for b in range(8))
        assert result.cycles > 0

    def test_scalar_after_write_agrees(self):
        cells = {(0, 0, k): bf(k + 1.0) for k in range(4)}
        ref, mesh, _ = self.run_both('NoC_Access Wr, -, -, 0xF, 2.0\nNoC_Scalar +=, 0x0, 0x1, 0xF', cells)
        assert mesh.snapshot() == ref.snapshot()
        assert mesh.row(0, 1, 4) == [bf(3.0), bf(4.0), bf(5.0), bf(6.0)]

    def test_exchange_swaps_and_negates(self):
        cells = {(0, 0x10, k): bf(k + 1.0) for k in range(4)}
        ref, mesh, _ = self.run_both('NoC_Exchange R-, 0x10, 0x12, 1, 2, 4', cells)
        assert mesh.row(0, 0x12, 4) == [bf(-2.0), bf(1.0), bf(-4.0), bf(3.0)]
        assert mesh.snapshot() == ref.snapshot()

    def test_phase_cycles_add_up(self):
        _, _, result = self.run_both(f'NoC_BCast 0x0, 0x1, {EIGHT_BANKS:#x}, 0', {(0, 0, 0): ONE})
        assert sum(c for _, c in result.phase_cycles) == result.cycles
