"""
binary64-Referenzen der Nichtlinear-Kernels mit derselben Näherungsstruktur
"""

import math
from typing import List, Optional, Sequence

from compair.numerics import newton_sqrt_reference, taylor_exp_reference

TAYLOR_ORDER = 6


def exp_reference(x: float, order: int = TAYLOR_ORDER) -> float:
    return taylor_exp_reference(x, order)


def rope_reference(x: Sequence[float], sin: Sequence[float], cos: Sequence[float]) -> List[float]:
    """Paarweise Drehung: (a, b) -> (a cos - b sin, b cos + a sin)"""
    if len(x) % 2:
        raise ValueError("RoPE braucht eine gerade Länge")
    out = []
    for i in range(0, len(x), 2):
        a, b = x[i], x[i + 1]
        out.append(a * cos[i] - b * sin[i])
        out.append(b * cos[i + 1] + a * sin[i + 1])
    return out


def softmax_reference(scores: Sequence[float], order: int = TAYLOR_ORDER) -> List[float]:
    if not scores:
        raise ValueError("Softmax über leeren Vektor")
    m = max(scores)
    e = [taylor_exp_reference(s - m, order) for s in scores]
    total = math.fsum(e)
    return [v / total for v in e]


def rmsnorm_reference(x: Sequence[float], eps: float = 0.0,
                      weight: Optional[Sequence[float]] = None) -> List[float]:
    if not x:
        raise ValueError("RMSNorm über leeren Vektor")
    rms = math.sqrt(math.fsum(v * v for v in x) / len(x) + eps)
    out = [v / rms for v in x]
    if weight is not None:
        out = [v * w for v, w in zip(out, weight)]
    return out


def silu_reference(x: Sequence[float], order: int = TAYLOR_ORDER) -> List[float]:
    """x * sigmoid(x) = x / (1 + exp(-x)) mit Taylor-Exponent"""
    if not x:
        raise ValueError("SiLU über leeren Vektor")
    return [v / (1.0 + taylor_exp_reference(-v, order)) for v in x]


def sqrt_reference(x: float, rounds: int = 4) -> float:
    return newton_sqrt_reference(x, rounds)
