"""Search for U(4) transforms whose target basis separates all four Bell states.

A candidate passes when the four coincidence support patterns, computed in the
candidate's target basis, are pairwise disjoint. Candidates are random products of
a small toolbox of linear-optics generators acting on the 4-dim mode space.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .bell import LABELS, BellLabel, hyper_bell
from .measurement import FIRE_EPS, SupportPattern
from .states import ModeUnitary, NotUnitaryError, SinglePhotonState, unitarity_residual, UNITARY_TOL

REFERENCE_U4 = ModeUnitary(np.array([[1, 1, 0, 0],
                                 [1, -1, 0, 0],
                                 [0, 0, 1, 1],
                                 [0, 0, 1, -1]]) / math.sqrt(2))

KEY_DECIMALS = 8
CHUNK = 1000


def _matrix(u) -> np.ndarray:
    if isinstance(u, ModeUnitary):
        return u.matrix
    u = np.asarray(u, dtype=complex)
    if u.shape != (4, 4) or unitarity_residual(u) >= UNITARY_TOL:
        raise NotUnitaryError("target basis requires a 4x4 unitary")
    return u


def target_basis(u) -> list[SinglePhotonState]:
    """Row ``k`` of ``u`` gives the expansion of ``B^t_k`` over the initial basis."""
    return [SinglePhotonState(row) for row in _matrix(u)]


def _bell_stack(m: int) -> np.ndarray:
    return np.stack([hyper_bell(lab, m).amplitudes for lab in LABELS])


_STACK_CACHE: dict[int, np.ndarray] = {}


def _coefficients(u: np.ndarray, m: int = 1) -> np.ndarray:
    """Target-basis coefficients of all four Bell states, shape (label, k, l)."""
    if m not in _STACK_CACHE:
        _STACK_CACHE[m] = _bell_stack(m)
    uc = u.conj()
    return uc @ _STACK_CACHE[m] @ uc.T


@dataclass
class CriterionResult:
    passed: bool
    patterns: dict[BellLabel, SupportPattern]
    weights: dict[BellLabel, list[float]]


def _patterns_from_probs(probs: np.ndarray, eps_fire: float):
    patterns, weights = {}, {}
    for lab, p in zip(LABELS, probs):
        fired = sorted((int(k) + 1, int(l) + 1) for k, l in zip(*np.nonzero(p > eps_fire)))
        patterns[lab] = SupportPattern(frozenset(fired))
        weights[lab] = [float(p[k - 1, l - 1]) for k, l in fired]
    return patterns, weights


def criterion_check(u, eps_fire: float = FIRE_EPS, m: int = 1) -> CriterionResult:
    probs = np.abs(_coefficients(_matrix(u), m)) ** 2
    fired = probs > eps_fire
    passed = bool(np.all(fired.sum(axis=0) <= 1))
    patterns, weights = _patterns_from_probs(probs, eps_fire)
    return CriterionResult(passed, patterns, weights)


def _passes(u: np.ndarray, eps_fire: float, m: int) -> bool:
    fired = np.abs(_coefficients(u, m)) ** 2 > eps_fire
    return bool(np.all(fired.sum(axis=0) <= 1))


def canonicalize(u) -> str:
    """Key invariant under per-row phases and row permutations."""
    mat = np.array(_matrix(u), dtype=complex)
    tol = 10.0 ** -KEY_DECIMALS
    rows = []
    for row in mat:
        lead = row[np.argmax(np.abs(row) > tol)]
        row = row * (abs(lead) / lead)
        re = np.round(row.real, KEY_DECIMALS) + 0.0
        im = np.round(row.imag, KEY_DECIMALS) + 0.0
        rows.append(tuple(x for pair in zip(re, im) for x in pair))
    rows.sort()
    return ";".join(",".join(f"{x:.{KEY_DECIMALS}f}" for x in r) for r in rows)


@dataclass
class SolutionRecord:
    U: ModeUnitary
    patterns: dict[BellLabel, SupportPattern]
    canonical_key: str
    provenance: str
    found_at: int
    weights: dict[BellLabel, list[float]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "canonical_key": self.canonical_key,
            "U": [[[float(z.real), float(z.imag)] for z in row] for row in self.U.matrix],
            "patterns": {lab.value: pat.sorted() for lab, pat in self.patterns.items()},
            "weights": {lab.value: w for lab, w in self.weights.items()},
            "provenance": self.provenance,
            "found_at": self.found_at,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SolutionRecord":
        arr = np.array(d["U"], dtype=float)
        return cls(
            U=ModeUnitary(arr[..., 0] + 1j * arr[..., 1]),
            patterns={BellLabel(k): SupportPattern(frozenset(map(tuple, v))) for k, v in d["patterns"].items()},
            canonical_key=d["canonical_key"],
            provenance=d["provenance"],
            found_at=int(d["found_at"]),
            weights={BellLabel(k): list(v) for k, v in d.get("weights", {}).items()},
        )


def default_toolbox() -> list[tuple[str, ModeUnitary]]:
    """Hadamards on either mode pair, a block swap and quarter-wave phase gates."""
    h = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
    i2 = np.eye(2)
    z2 = np.zeros((2, 2))
    tools = [
        ("H+I", np.block([[h, z2], [z2, i2]])),
        ("I+H", np.block([[i2, z2], [z2, h]])),
        ("swap", np.block([[z2, i2], [i2, z2]])),
    ]
    for k in range(4):
        d = np.ones(4, dtype=complex)
        d[k] = 1j
        tools.append((f"S{k}", np.diag(d)))
    return [(name, ModeUnitary(u)) for name, u in tools]


def _run_chunk(args):
    mats, names, seed, chunk, start, stop, max_len, eps_fire, m = args
    rng = np.random.default_rng([seed, chunk])
    hits = []
    for idx in range(start, stop):
        length = int(rng.integers(1, max_len + 1))
        seq = rng.integers(0, len(mats), size=length)
        u = np.eye(4, dtype=complex)
        for g in seq:
            u = mats[g] @ u
        if _passes(u, eps_fire, m):
            hits.append((idx, u, " * ".join(names[g] for g in seq[::-1])))
    return hits


def _existing_keys(store: Path | None) -> set[str]:
    if store is None or not store.exists():
        return set()
    return {json.loads(line)["canonical_key"] for line in store.read_text().splitlines() if line.strip()}


def search(toolbox: Sequence[tuple[str, ModeUnitary]] | None = None, budget: int = 100_000, seed: int = 0,
           store: str | Path | None = None, max_len: int = 8, eps_fire: float = FIRE_EPS,
           m: int = 1, workers: int = 1) -> list[SolutionRecord]:
    """Random toolbox products, criterion-checked and deduplicated by canonical key.

    Candidate ``i`` always comes from chunk ``i // 1000`` seeded with ``[seed, chunk]``,
    so the result does not depend on ``workers``.
    """
    toolbox = list(toolbox or default_toolbox())
    names = [name for name, _ in toolbox]
    mats = [u.matrix for _, u in toolbox]
    jobs = [(mats, names, seed, c, c * CHUNK, min((c + 1) * CHUNK, budget), max_len, eps_fire, m)
            for c in range(math.ceil(budget / CHUNK))] if budget > 0 else []
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_chunk, jobs))
    else:
        results = [_run_chunk(job) for job in jobs]

    seen: set[str] = set()
    solutions = []
    for hits in results:
        for idx, u, prov in hits:
            key = canonicalize(u)
            if key in seen:
                continue
            seen.add(key)
            res = criterion_check(u, eps_fire, m)
            solutions.append(SolutionRecord(ModeUnitary(u), res.patterns, key, f"toolbox: {prov}",
                                            idx, res.weights))

    if store is not None:
        store = Path(store)
        known = _existing_keys(store)
        with store.open("a") as fh:
            for sol in solutions:
                if sol.canonical_key not in known:
                    fh.write(json.dumps(sol.to_dict()) + "\n")
    return solutions


def load_store(path: str | Path) -> list[SolutionRecord]:
    return [SolutionRecord.from_dict(json.loads(line))
            for line in Path(path).read_text().splitlines() if line.strip()]
