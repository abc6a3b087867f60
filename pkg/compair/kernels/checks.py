"""
Kernel gegen binary64-Referenz: maximaler Fehler und Zyklen
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.hardware import HardwareConfig
from . import reference as R
from .runner import KernelResult, exp_kernel, rmsnorm_kernel, rope_kernel, silu_kernel, softmax_kernel, sqrt_kernel

logger = logging.getLogger(__name__)

ROPE_CYCLE_BOUND = 41


@dataclass
class KernelCheck:
    name: str
    max_rel_err: float
    tolerance: float
    cycles: int
    cycle_bound: Optional[int] = None
    # Zyklen der Mesh-Phasen; die Grenze gilt nur für diese
    noc_cycles: int = 0
    rows: List[Tuple[float, float, float]] = field(default_factory=list)
    # Eingabebereich, auf dem die Toleranz gilt; max_rel_err deckt das ganze Gitter ab
    gate: Optional[Tuple[float, float]] = None
    gated_rel_err: Optional[float] = None

    @property
    def passed(self) -> bool:
        err = self.max_rel_err if self.gated_rel_err is None else self.gated_rel_err
        if err > self.tolerance:
            return False
        return self.cycle_bound is None or self.noc_cycles <= self.cycle_bound

    def to_dict(self) -> Dict:
        return {
            'name': self.name, 'max_rel_err': self.max_rel_err, 'tolerance': self.tolerance,
            'cycles': self.cycles, 'noc_cycles': self.noc_cycles, 'cycle_bound': self.cycle_bound,
            'gate': list(self.gate) if self.gate else None, 'gated_rel_err': self.gated_rel_err,
            'passed': self.passed,
        }


def rel_error(got: Sequence[float], ref: Sequence[float], normalize: bool = False) -> float:
    """
    Maximaler relativer Fehler

    normalize: auf max|ref| statt elementweise beziehen (Vektoren mit Nulldurchgängen)
    """
    got_a = np.asarray(got, dtype=np.float64)
    ref_a = np.asarray(ref, dtype=np.float64)
    if normalize:
        scale = np.max(np.abs(ref_a)) or 1.0
        return float(np.max(np.abs(got_a - ref_a)) / scale)
    denom = np.where(ref_a == 0.0, 1.0, np.abs(ref_a))
    return float(np.max(np.abs(got_a - ref_a) / denom))


def _exp(hw, rng) -> Tuple[KernelResult, List[float], List[float]]:
    xs = [float(x) for x in np.linspace(-4.0, 4.0, 33)]
    return exp_kernel(xs, hw), xs, [R.exp_reference(x) for x in xs]


def _rope(hw, rng):
    head = 128
    x = rng.uniform(-1.0, 1.0, head)
    theta = rng.uniform(0.0, math.pi, head // 2).repeat(2)
    sin, cos = np.sin(theta), np.cos(theta)
    res = rope_kernel(list(x), list(sin), list(cos), hw)
    return res, list(x), R.rope_reference(list(x), list(sin), list(cos))


def _softmax(hw, rng):
    scores = list(rng.uniform(-2.0, 2.0, 64))
    return softmax_kernel(scores, hw), scores, R.softmax_reference(scores)


def _sqrt(hw, rng):
    xs = [0.25, 1.0, 2.0, 3.0, 10.0, 16.0]
    results = [sqrt_kernel(x, hw) for x in xs]
    merged = KernelResult([r.values[0] for r in results], max(r.cycles for r in results))
    return merged, xs, [R.sqrt_reference(x) for x in xs]


def _rmsnorm(hw, rng):
    x = list(rng.uniform(-2.0, 2.0, 64))
    return rmsnorm_kernel(x, hw), x, R.rmsnorm_reference(x)


def _silu(hw, rng):
    x = list(rng.uniform(-2.0, 2.0, 64))
    return silu_kernel(x, hw), x, R.silu_reference(x)


# name -> (Lauf, Toleranz, normiert, Zyklusgrenze, Toleranzbereich der Eingaben)
KERNEL_CHECKS: Dict[str, Tuple[Callable, float, bool, Optional[int], Optional[Tuple[float, float]]]] = {
    # Taylor-Horner verliert für negative Argumente; die Toleranz gilt auf [0, 4]
    'exp': (_exp, 2 ** -5, False, None, (0.0, 4.0)),
    'rope': (_rope, 2 ** -6, True, ROPE_CYCLE_BOUND, None),
    'softmax': (_softmax, 2 ** -5, True, None, None),
    'sqrt': (_sqrt, 2 ** -6, False, None, None),
    'rmsnorm': (_rmsnorm, 2 ** -5, True, None, None),
    'silu': (_silu, 2 ** -5, True, None, None),
}


def check_kernel(name: str, hw: Optional[HardwareConfig] = None, seed: int = 0) -> KernelCheck:
    """
    Raises:
        KeyError: unbekannter Kernel
    """
    if name not in KERNEL_CHECKS:
        raise KeyError(f"Unbekannter Kernel '{name}'. Verfügbar: {', '.join(sorted(KERNEL_CHECKS))}")
    runner, tol, normalize, bound, gate = KERNEL_CHECKS[name]
    hw = hw or HardwareConfig()
    rng = np.random.RandomState(seed)
    result, inputs, ref = runner(hw, rng)
    got = result.floats()
    err = rel_error(got, ref, normalize)
    rows = [(float(i), g, r) for i, g, r in zip(inputs, got, ref)]
    gated = None
    if gate is not None:
        inside = [(g, r) for i, g, r in rows if gate[0] <= i <= gate[1]]
        gated = rel_error([g for g, _ in inside], [r for _, r in inside], normalize)
    check = KernelCheck(name, err, tol, result.cycles, bound, result.noc_cycles, rows, gate, gated)
    logger.info(f"{'✅' if check.passed else '❌'} Kernel {name}: max. Fehler {err:.3e}, {result.cycles} Zyklen")
    return check
