"""Coincidence tables, support patterns, SNR, parametric noise and count sampling."""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .states import ALGEBRA_TOL, TwoPhotonState, decompose

FIRE_EPS = 1e-6
RELATIVE_FIRE = 0.05
ALL_COMBOS = frozenset((k, l) for k in range(1, 5) for l in range(1, 5))


class TableError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CoincidenceTable:
    """4x4 table over (photon-A detector, photon-B detector)."""

    values: np.ndarray
    kind: str = "probability"
    duration_s: float | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (4, 4):
            raise TableError(f"coincidence table must be 4x4, got {v.shape}")
        if np.any(v < 0):
            raise TableError("coincidence table has negative entries")
        if self.kind == "probability":
            if abs(v.sum() - 1) > 1e-9:
                raise TableError(f"probability table sums to {v.sum()}, not 1")
        elif self.kind == "counts":
            if np.any(v != np.round(v)):
                raise TableError("counts table must hold integers")
        else:
            raise TableError(f"unknown table kind {self.kind!r}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def total(self) -> float:
        return float(self.values.sum())

    def normalized(self) -> "CoincidenceTable":
        if self.kind == "probability":
            return self
        if self.total() == 0:
            raise TableError("cannot normalize an empty table")
        return CoincidenceTable(self.values / self.total())

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "values": self.values.tolist()}
        if self.duration_s is not None:
            d["duration_s"] = self.duration_s
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CoincidenceTable":
        return cls(np.array(d["values"], dtype=float), d.get("kind", "probability"), d.get("duration_s"))

    def to_csv(self) -> str:
        buf = io.StringIO()
        header = f"kind={self.kind}"
        if self.duration_s is not None:
            header += f" duration_s={self.duration_s}"
        fmt = "%d" if self.kind == "counts" else "%.12g"
        np.savetxt(buf, self.values, delimiter=",", fmt=fmt, header=header)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "CoincidenceTable":
        kind, duration = "probability", None
        for line in text.splitlines():
            if line.startswith("#"):
                for tok in line[1:].split():
                    key, _, val = tok.partition("=")
                    if key == "kind":
                        kind = val
                    elif key == "duration_s":
                        duration = float(val)
        values = np.loadtxt(io.StringIO(text), delimiter=",", comments="#", ndmin=2)
        return cls(values, kind, duration)


def read_table(path: str | Path) -> CoincidenceTable:
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        return CoincidenceTable.from_dict(json.loads(text))
    return CoincidenceTable.from_csv(text)


def write_table(t: CoincidenceTable, path: str | Path) -> None:
    path = Path(path)
    if path.suffix == ".json":
        path.write_text(json.dumps(t.to_dict(), indent=2))
    else:
        path.write_text(t.to_csv())


@dataclass(frozen=True)
class SupportPattern:
    combos: frozenset[tuple[int, int]]

    def __post_init__(self):
        combos = frozenset((int(k), int(l)) for k, l in self.combos)
        if not combos <= ALL_COMBOS:
            raise TableError("support pattern combos must lie in 1..4 x 1..4")
        object.__setattr__(self, "combos", combos)

    def __len__(self) -> int:
        return len(self.combos)

    def __contains__(self, combo) -> bool:
        return tuple(combo) in self.combos

    def sorted(self) -> list[list[int]]:
        return [list(c) for c in sorted(self.combos)]

    def mask(self) -> np.ndarray:
        m = np.zeros((4, 4), dtype=bool)
        for k, l in self.combos:
            m[k - 1, l - 1] = True
        return m

    def isdisjoint(self, other: "SupportPattern") -> bool:
        return self.combos.isdisjoint(other.combos)


def coincidence_table(s: TwoPhotonState, basis_a, basis_b=None) -> CoincidenceTable:
    amps = decompose(s, basis_a, basis_b)
    # amplitudes below the algebra tolerance are round-off, not signal
    probs = np.where(np.abs(amps) < ALGEBRA_TOL, 0.0, np.abs(amps) ** 2)
    return CoincidenceTable(probs / probs.sum())


def support_pattern(t: CoincidenceTable, eps_fire: float | None = None,
                    relative: float | None = None) -> SupportPattern:
    """Combinations that "fire".

    Probability tables use an absolute threshold ``eps_fire`` (default 1e-6);
    counts tables default to a relative threshold of 5% of the largest cell.
    """
    v = t.values
    if relative is None and eps_fire is None and t.kind == "counts":
        relative = RELATIVE_FIRE
    if relative is not None:
        thresh = relative * v.max()
        fired = v > thresh if v.max() > 0 else np.zeros_like(v, dtype=bool)
    else:
        fired = v > (FIRE_EPS if eps_fire is None else eps_fire)
    return SupportPattern(frozenset((k + 1, l + 1) for k, l in zip(*np.nonzero(fired))))


def snr(t: CoincidenceTable, expected: SupportPattern) -> float:
    """Mass on the expected four combinations over mass on the other twelve."""
    if len(expected) != 4:
        raise TableError("SNR needs an expected pattern of exactly 4 combinations")
    if t.total() == 0:
        raise TableError("SNR of an empty table is undefined")
    mask = expected.mask()
    signal = float(t.values[mask].sum())
    noise = float(t.values[~mask].sum())
    return math.inf if noise == 0 else signal / noise


@dataclass(frozen=True)
class NoiseModel:
    """Mixing with the uniform table: ``(1 - strength) * t + strength / 16``."""

    strength: float = 0.0
    kind: str = "crosstalk"

    def __post_init__(self):
        if self.kind not in ("crosstalk", "uniform_background"):
            raise TableError(f"unknown noise kind {self.kind!r}")
        if not 0.0 <= self.strength <= 1.0:
            raise TableError("noise strength must lie in [0, 1]")


def apply_noise(t: CoincidenceTable, n: NoiseModel) -> CoincidenceTable:
    if t.kind != "probability":
        raise TableError("noise acts on probability tables")
    mixed = (1 - n.strength) * t.values + n.strength / 16
    return CoincidenceTable(mixed / mixed.sum())


def simulate_counts(t: CoincidenceTable, total: int, seed, duration_s: float | None = None) -> CoincidenceTable:
    """Multinomial draw of ``total`` coincidences; a private generator per call."""
    if total < 0:
        raise TableError("total must be non-negative")
    rng = np.random.default_rng(seed)
    p = t.normalized().values.ravel()
    counts = rng.multinomial(int(total), p / p.sum()).reshape(4, 4)
    return CoincidenceTable(counts, "counts", duration_s)


def patterns_partition(patterns: Iterable[SupportPattern]) -> bool:
    """True when the patterns are pairwise disjoint and jointly cover all 16 combos."""
    pats = list(patterns)
    union = frozenset().union(*(p.combos for p in pats))
    return sum(len(p) for p in pats) == len(union) and union == ALL_COMBOS
