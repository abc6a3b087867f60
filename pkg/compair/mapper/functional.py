"""
Funktionale GeMV über die Kachelung eines Plans (BF16-Ergebnisse pro Bank)
"""

from typing import List

import numpy as np

from compair.numerics import bits_to_f32, binop_bits, f32_to_bits
from .planner import INPUT_SPLIT_FACTOR


def _bank_gemv(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """binary32-Akkumulation in Zeilenreihenfolge, Ergebnis als BF16-Bits"""
    acc = np.zeros(w.shape[1], dtype=np.float32)
    for i in range(w.shape[0]):
        acc = (acc + np.float32(x[i]) * w[i]).astype(np.float32)
    return f32_to_bits(acc)


def _tree_add(partials: List[np.ndarray]) -> np.ndarray:
    vals = list(partials)
    stride = 1
    while stride < len(vals):
        for i in range(0, len(vals), 2 * stride):
            if i + stride < len(vals):
                vals[i] = binop_bits('add', vals[i], vals[i + stride])
        stride *= 2
    return vals[0]


def simulate_gemv(weights: np.ndarray, x: np.ndarray, banks: int, split: str,
                  factor: int = INPUT_SPLIT_FACTOR) -> np.ndarray:
    """
    y = x · W mit derselben Aufteilung wie ``split_weight``

    Output-Split: jede Bank rechnet einen Spaltenblock vollständig.
    Input-Split: Teilsummen über Zeilenblöcke, Reduktion als Baum in BF16.

    Returns:
        np.ndarray: BF16-Ergebnis als float32
    """
    w = bits_to_f32(f32_to_bits(np.asarray(weights, dtype=np.float32)))
    xv = bits_to_f32(f32_to_bits(np.asarray(x, dtype=np.float32)))
    rows, cols = w.shape
    out = np.zeros(cols, dtype=np.uint16)
    if split == 'output_split':
        for block in np.array_split(np.arange(cols), min(banks, cols)):
            if block.size:
                out[block] = _bank_gemv(xv, w[:, block])
        return bits_to_f32(out)
    if split != 'input_split':
        raise ValueError(f"Unbekannter Split: {split}")
    group = max(1, min(factor, banks))
    row_blocks = np.array_split(np.arange(rows), group)
    for block in np.array_split(np.arange(cols), max(1, min(banks // group, cols))):
        if not block.size:
            continue
        partials = [_bank_gemv(xv[rb], w[rb][:, block]) for rb in row_blocks if rb.size]
        out[block] = _tree_add(partials)
    return bits_to_f32(out)


def reference_gemv(weights: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Einzelbank-Referenz"""
    return simulate_gemv(weights, x, 1, 'output_split')
