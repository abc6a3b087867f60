"""
Paketebene: 72-Bit-Drahtformat eines Flits

Feldreihenfolge vom höchstwertigen Bit an:
    Type(4) | Data(16) | IterNum(4) | Path[0](12) | Path[1](12) | Path[2](12) | Path[3](12)
Ein Pfadschritt: X(4) | Y(4) | WrReg(1) | IterTag(1) | Opcode(2)

Leere Pfadschritte werden als 12 Nullbits kodiert. Ein Schritt ab Index 1
ist inaktiv, wenn er nur aus Nullen besteht oder dieselben (X, Y) wie sein
Vorgänger hat; alle folgenden Schritte sind dann ebenfalls inaktiv.
"""

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, List, Tuple

from compair.numerics import Bf16, ZERO

PACKET_BITS = 72
PATH_STEPS = 4
STEP_BITS = 12
RECORD_BYTES = 12

OPCODES = ('add', 'sub', 'mul', 'div')


class PacketFieldError(ValueError):
    pass


class PacketType(IntEnum):
    NONE = 0
    SCALAR = 1
    REDUCE = 2
    EXCHANGE = 3
    BROADCAST = 4
    READ = 5
    WRITE = 6


# (Name, Breite, Shift) vom höchstwertigen Feld an
PACKET_FIELDS = (
    ('type', 4, 68),
    ('data', 16, 52),
    ('iter_num', 4, 48),
    ('path0', STEP_BITS, 36),
    ('path1', STEP_BITS, 24),
    ('path2', STEP_BITS, 12),
    ('path3', STEP_BITS, 0),
)
STEP_FIELDS = (
    ('x', 4, 8),
    ('y', 4, 4),
    ('wr_reg', 1, 3),
    ('iter_tag', 1, 2),
    ('opcode', 2, 0),
)

assert sum(width for _, width, _ in PACKET_FIELDS) == PACKET_BITS


def _check(name: str, value: int, width: int) -> int:
    if not 0 <= value < (1 << width):
        raise PacketFieldError(f"Feld {name}={value} passt nicht in {width} Bit")
    return value


@dataclass(frozen=True)
class PathStep:
    x: int = 0
    y: int = 0
    wr_reg: bool = False
    iter_tag: bool = False
    opcode: str = 'add'

    def encode(self) -> int:
        if self.opcode not in OPCODES:
            raise PacketFieldError(f"Unbekannter Opcode: {self.opcode}")
        values = {'x': self.x, 'y': self.y, 'wr_reg': int(self.wr_reg),
                  'iter_tag': int(self.iter_tag), 'opcode': OPCODES.index(self.opcode)}
        word = 0
        for name, width, shift in STEP_FIELDS:
            word |= _check(name, values[name], width) << shift
        return word

    @classmethod
    def decode(cls, word: int) -> 'PathStep':
        f = {name: (word >> shift) & ((1 << width) - 1) for name, width, shift in STEP_FIELDS}
        return cls(x=f['x'], y=f['y'], wr_reg=bool(f['wr_reg']), iter_tag=bool(f['iter_tag']),
                   opcode=OPCODES[f['opcode']])

    @property
    def coord(self) -> Tuple[int, int]:
        return self.x, self.y


NONE_STEP = PathStep()


@dataclass(frozen=True)
class Packet:
    type: PacketType = PacketType.NONE
    data: Bf16 = ZERO
    iter_num: int = 0
    path: Tuple[PathStep, ...] = field(default_factory=lambda: (NONE_STEP,) * PATH_STEPS)

    def __post_init__(self):
        if len(self.path) != PATH_STEPS:
            raise PacketFieldError(f"Pfad braucht genau {PATH_STEPS} Schritte, nicht {len(self.path)}")

    @classmethod
    def build(cls, ptype: PacketType, steps: Iterable[PathStep], data: Bf16 = ZERO,
              iter_num: int = 0) -> 'Packet':
        """Füllt den Pfad mit leeren Schritten auf und prüft die Darstellbarkeit"""
        steps = list(steps)
        if not 1 <= len(steps) <= PATH_STEPS:
            raise PacketFieldError(f"{len(steps)} Pfadschritte, erlaubt sind 1..{PATH_STEPS}")
        packet = cls(ptype, data, iter_num, tuple(steps) + (NONE_STEP,) * (PATH_STEPS - len(steps)))
        if len(packet.active_steps()) != len(steps):
            raise PacketFieldError("Pfadschritt wäre als leerer Schritt nicht unterscheidbar")
        return packet

    def active_steps(self) -> List[PathStep]:
        steps = [self.path[0]]
        for step in self.path[1:]:
            if step.encode() == 0 or step.coord == steps[-1].coord:
                break
            steps.append(step)
        return steps


def encode_packet(p: Packet) -> int:
    """Packt ein Paket in ein 72-Bit-Wort"""
    values = {
        'type': int(p.type),
        'data': p.data.bits,
        'iter_num': p.iter_num,
    }
    for i, step in enumerate(p.path):
        values[f'path{i}'] = step.encode()
    word = 0
    for name, width, shift in PACKET_FIELDS:
        word |= _check(name, values[name], width) << shift
    return word


def decode_packet(word: int) -> Packet:
    if not 0 <= word < (1 << PACKET_BITS):
        raise PacketFieldError(f"Wort breiter als {PACKET_BITS} Bit")
    f = {name: (word >> shift) & ((1 << width) - 1) for name, width, shift in PACKET_FIELDS}
    try:
        ptype = PacketType(f['type'])
    except ValueError as e:
        raise PacketFieldError(f"Unbekannter Pakettyp {f['type']}") from e
    path = tuple(PathStep.decode(f[f'path{i}']) for i in range(PATH_STEPS))
    return Packet(ptype, Bf16(f['data']), f['iter_num'], path)


def dump_schedule(packets: Iterable[Packet]) -> bytes:
    """Binärer Dump: je Paket 72 Bit little-endian, auf 96 Bit (12 Byte) aufgefüllt"""
    return b''.join(encode_packet(p).to_bytes(RECORD_BYTES, 'little') for p in packets)


def load_schedule(blob: bytes) -> List[Packet]:
    if len(blob) % RECORD_BYTES:
        raise PacketFieldError(f"Dump-Länge {len(blob)} ist kein Vielfaches von {RECORD_BYTES}")
    packets = []
    for offset in range(0, len(blob), RECORD_BYTES):
        word = int.from_bytes(blob[offset:offset + RECORD_BYTES], 'little')
        packets.append(decode_packet(word))
    return packets
