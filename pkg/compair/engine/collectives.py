"""
Analytisches Modell der CXL-Kollektive zwischen Geräten (flach über den Switch)
"""

from config.hardware import InterconnectSpec

COLLECTIVE_KINDS = ('broadcast', 'reduce', 'p2p')


def cxl_collective(nbytes: int, kind: str, devices: int, spec: InterconnectSpec = None) -> float:
    """
    Latenz (ns) eines Kollektivs: bytes / bandwidth(kind) + link_latency

    reduce/broadcast laufen einstufig über den Switch, die Geräteanzahl
    ändert die Latenz nicht (nur die Link-Energie).
    """
    spec = spec or InterconnectSpec()
    if devices < 1:
        raise ValueError("Kollektiv braucht mindestens ein Gerät")
    if kind not in COLLECTIVE_KINDS:
        raise ValueError(f"Unbekanntes Kollektiv: {kind}")
    bandwidth = spec.p2p_bandwidth if kind == 'p2p' else spec.collective_bandwidth
    return nbytes / bandwidth * 1e9 + spec.link_latency


def link_energy_pj(nbytes: int, kind: str, devices: int, spec: InterconnectSpec) -> float:
    """Jedes beteiligte Gerät außer dem Ziel bzw. der Quelle bewegt die Nutzlast einmal"""
    hops = 1 if kind == 'p2p' else max(devices - 1, 1)
    return nbytes * 8 * hops * spec.energy_pj_per_bit
