"""Hyperentangled source, OAM Bell states and Alice's Dove-prism encoders."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .states import StateError, TwoPhotonState, apply_local, MODE_LABELS

SQRT1_2 = 1 / math.sqrt(2)


class BellLabel(str, Enum):
    PsiPlus = "PsiPlus"
    PsiMinus = "PsiMinus"
    PhiPlus = "PhiPlus"
    PhiMinus = "PhiMinus"


LABELS: tuple[BellLabel, ...] = tuple(BellLabel)

DEFAULT_CODEBOOK: dict[str, BellLabel] = {
    "00": BellLabel.PsiPlus,
    "01": BellLabel.PsiMinus,
    "10": BellLabel.PhiPlus,
    "11": BellLabel.PhiMinus,
}

MESSAGES = ("00", "01", "10", "11")


def pol_bell_psi_plus() -> np.ndarray:
    """(|H>_A|V>_B + |V>_A|H>_B)/sqrt2 as a 2x2 array indexed [pol_A, pol_B], H=0, V=1."""
    return np.array([[0, SQRT1_2], [SQRT1_2, 0]], dtype=complex)


def _oam_bell(label: BellLabel) -> np.ndarray:
    # indexed [oam_A, oam_B] with 0 <-> -m, 1 <-> +m
    a = np.zeros((2, 2), dtype=complex)
    if label is BellLabel.PsiPlus:
        a[1, 0] = a[0, 1] = SQRT1_2
    elif label is BellLabel.PsiMinus:
        # (|-m>|+m> - |+m>|-m>)/sqrt2: the overall sign that makes the target-basis
        # expansion come out as +1/2 (B2 B1 - B1 B2 + B4 B3 - B3 B4)
        a[0, 1] = SQRT1_2
        a[1, 0] = -SQRT1_2
    else:
        a[1, 1] = SQRT1_2
        a[0, 0] = SQRT1_2 if label is BellLabel.PhiPlus else -SQRT1_2
    return a


def hyper_bell(label: BellLabel | str, m: int = 1) -> TwoPhotonState:
    """OAM Bell state in subspace ``m`` tensored with the polarization state Psi^{s+}."""
    if m < 1:
        raise StateError("OAM subspace m must be >= 1")
    oam = _oam_bell(BellLabel(label))
    pol = pol_bell_psi_plus()
    amps = np.zeros((4, 4), dtype=complex)
    for i, (la, pa) in enumerate(MODE_LABELS):
        for j, (lb, pb) in enumerate(MODE_LABELS):
            amps[i, j] = oam[(la + 1) // 2, (lb + 1) // 2] * pol["HV".index(pa), "HV".index(pb)]
    return TwoPhotonState(amps, m)


@dataclass(frozen=True)
class SourceSpectrum:
    """Subspace weights ``c_m`` of the down-converted pair."""

    weights: tuple[tuple[int, complex], ...] = ((1, 1.0 + 0j),)

    def __post_init__(self):
        ws = tuple((int(m), complex(c)) for m, c in self.weights)
        if not ws:
            raise StateError("source spectrum is empty")
        ms = [m for m, _ in ws]
        if len(set(ms)) != len(ms):
            raise StateError("duplicate subspace in source spectrum")
        if min(ms) < 1:
            raise StateError("source subspaces must have m >= 1")
        total = sum(abs(c) ** 2 for _, c in ws)
        if abs(total - 1) > 1e-9:
            raise StateError(f"source weights are not normalized (sum |c_m|^2 = {total})")
        object.__setattr__(self, "weights", ws)

    @classmethod
    def from_config(cls, rows: Sequence[Sequence[float]]) -> "SourceSpectrum":
        """Rows of ``[m, re, im]``."""
        return cls(tuple((int(r[0]), complex(r[1], r[2] if len(r) > 2 else 0.0)) for r in rows))


def hyper_source(spec: SourceSpectrum) -> list[tuple[int, float, TwoPhotonState]]:
    """Subspace-resolved source: one ``(m, |c_m|^2, state)`` entry per subspace."""
    if not spec.weights:
        raise StateError("source spectrum is empty")
    return [(m, abs(c) ** 2, hyper_bell(BellLabel.PsiPlus, m)) for m, c in spec.weights]


def validate_codebook(codebook: Mapping[str, BellLabel | str]) -> dict[str, BellLabel]:
    book = {str(k): BellLabel(v) for k, v in codebook.items()}
    if sorted(book) != list(MESSAGES) or len(set(book.values())) != 4:
        raise StateError("codebook must map 00, 01, 10, 11 bijectively onto the four Bell labels")
    return book


def encoder_unitaries(label: BellLabel | str, m: int = 1):
    """Element unitaries (in application order) Alice applies to reach ``label``."""
    from .elements import dove_pair, dove_single

    label = BellLabel(label)
    if label is BellLabel.PsiPlus:
        return []
    if label is BellLabel.PsiMinus:
        return [dove_pair(m)]
    if label is BellLabel.PhiPlus:
        return [dove_single(0.0, m)]
    return [dove_single(0.0, m), dove_pair(m)]


def encode(message: str, s: TwoPhotonState, codebook: Mapping[str, BellLabel | str] | None = None) -> TwoPhotonState:
    """Act on photon A only with Dove-prism unitaries to imprint a 2-bit message."""
    book = validate_codebook(codebook or DEFAULT_CODEBOOK)
    if message not in book:
        raise StateError(f"message must be one of {MESSAGES}, got {message!r}")
    for u in encoder_unitaries(book[message], s.subspace_m):
        s = apply_local(u, "A", s)
    return s
