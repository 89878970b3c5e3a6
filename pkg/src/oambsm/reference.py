"""Regression data: the reference target basis and the Bell-state expansions in it."""

from __future__ import annotations

import math

import numpy as np

from .bell import BellLabel
from .states import mode_index

_R = 1 / math.sqrt(2)


def _ket(*terms: tuple[complex, int, str]) -> np.ndarray:
    v = np.zeros(4, dtype=complex)
    for amp, oam, pol in terms:
        v[mode_index(oam, pol)] += amp
    return v


# rows: B^t_1 .. B^t_4 written out in |oam>|pol> kets
TARGET_BASIS = np.array([
    _ket((_R, -1, "H"), (_R, +1, "V")),
    _ket((_R, -1, "H"), (-_R, +1, "V")),
    _ket((_R, -1, "V"), (_R, +1, "H")),
    _ket((_R, -1, "V"), (-_R, +1, "H")),
])

# (k, l) -> coefficient of |B^t_k>_A |B^t_l>_B, 1-based
TARGET_EXPANSIONS: dict[BellLabel, dict[tuple[int, int], float]] = {
    BellLabel.PsiPlus: {(1, 1): 0.5, (2, 2): -0.5, (3, 3): 0.5, (4, 4): -0.5},
    BellLabel.PsiMinus: {(2, 1): 0.5, (1, 2): -0.5, (4, 3): 0.5, (3, 4): -0.5},
    BellLabel.PhiPlus: {(3, 1): 0.5, (4, 2): 0.5, (1, 3): 0.5, (2, 4): 0.5},
    BellLabel.PhiMinus: {(4, 1): -0.5, (3, 2): -0.5, (2, 3): -0.5, (1, 4): -0.5},
}


def expansion_matrix(label: BellLabel) -> np.ndarray:
    c = np.zeros((4, 4), dtype=complex)
    for (k, l), v in TARGET_EXPANSIONS[BellLabel(label)].items():
        c[k - 1, l - 1] = v
    return c


# experimental signal-to-noise ratios per Bell state, m = 1
REPORTED_SNR = {BellLabel.PsiPlus: 6.78, BellLabel.PsiMinus: 4.6,
                BellLabel.PhiPlus: 5.09, BellLabel.PhiMinus: 3.12}
REPORTED_SUCCESS = 0.82
