"""Superdense coding over the Bell-state analyzer and its channel capacity."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .bell import DEFAULT_CODEBOOK, LABELS, BellLabel, encode, hyper_bell, validate_codebook
from .measurement import (CoincidenceTable, NoiseModel, SupportPattern, TableError, apply_noise,
                          coincidence_table, patterns_partition)
from .search import REFERENCE_U4, criterion_check, target_basis

SIMPLEX_TOL = 1e-9
MAX_ITER = 100_000


class ConvergenceError(RuntimeError):
    pass


def _check_confusion(W) -> np.ndarray:
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise TableError(f"confusion matrix must be square, got shape {W.shape}")
    if np.any(W < -SIMPLEX_TOL) or np.any(W > 1 + SIMPLEX_TOL):
        raise TableError("confusion matrix entries must lie in [0, 1]")
    if np.max(np.abs(W.sum(axis=1) - 1)) > SIMPLEX_TOL:
        raise TableError("confusion matrix rows must sum to 1")
    return np.clip(W, 0.0, 1.0)


def _check_simplex(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if np.any(p < -SIMPLEX_TOL) or abs(p.sum() - 1) > SIMPLEX_TOL:
        raise TableError("input distribution must lie on the probability simplex")
    return np.clip(p, 0.0, None)


def ideal_patterns(u=REFERENCE_U4, m: int = 1) -> dict[BellLabel, SupportPattern]:
    return criterion_check(u, m=m).patterns


def decode(t: CoincidenceTable, patterns: Mapping[BellLabel, SupportPattern] | None = None) -> BellLabel:
    """Label whose pattern carries the most coincidence mass (ties go to the earlier label)."""
    patterns = patterns or ideal_patterns()
    if t.total() == 0:
        raise TableError("cannot decode an empty table")
    masses = [t.values[patterns[lab].mask()].sum() for lab in LABELS]
    return LABELS[int(np.argmax(masses))]


def _noisy_tables(noise: NoiseModel, u=REFERENCE_U4, m: int = 1) -> list[CoincidenceTable]:
    basis = target_basis(u)
    return [apply_noise(coincidence_table(hyper_bell(lab, m), basis), noise) for lab in LABELS]


def _cell_labels(patterns: Mapping[BellLabel, SupportPattern]) -> np.ndarray:
    """Decoded label index for a single coincidence in each of the 16 cells."""
    if not patterns_partition(patterns[lab] for lab in LABELS):
        raise TableError("decoding patterns must partition the 16 combinations")
    cells = np.empty(16, dtype=int)
    for y, lab in enumerate(LABELS):
        cells[patterns[lab].mask().ravel()] = y
    return cells


def confusion_matrix(noise: NoiseModel, mode: str = "analytic", n: int = 0, seed=None,
                     u=REFERENCE_U4, m: int = 1) -> np.ndarray:
    """``W[x, y] = p(y | x)`` for single-coincidence decoding.

    ``mode="sampled"`` draws ``n`` events per sent label from a generator seeded with ``seed``.
    """
    patterns = ideal_patterns(u, m)
    cells = _cell_labels(patterns)
    tables = _noisy_tables(noise, u, m)
    W = np.zeros((4, 4))
    if mode == "analytic":
        for x, t in enumerate(tables):
            W[x] = np.bincount(cells, weights=t.values.ravel(), minlength=4)
    elif mode == "sampled":
        if n <= 0 or seed is None:
            raise ValueError("sampled mode needs n > 0 and an explicit seed")
        rng = np.random.default_rng(seed)
        for x, t in enumerate(tables):
            counts = rng.multinomial(n, t.values.ravel())
            W[x] = np.bincount(cells, weights=counts, minlength=4) / n
    else:
        raise ValueError(f"unknown confusion mode {mode!r}")
    return W


def mutual_information(p, W) -> float:
    """I(X;Y) in bits for input distribution ``p`` and channel ``W[x, y]``."""
    p = _check_simplex(p)
    W = _check_confusion(W)
    q = p @ W
    joint = p[:, None] * W
    mask = joint > 0
    ratio = np.where(mask, W, 1.0) / np.where(mask, q[None, :], 1.0)
    return float(np.sum(joint[mask] * np.log2(ratio[mask])))


def _divergences(p: np.ndarray, W: np.ndarray) -> np.ndarray:
    q = p @ W
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(W > 0, W * np.log2(W / q[None, :]), 0.0)
    return terms.sum(axis=1)


@dataclass
class CapacityResult:
    capacity: float
    p_star: np.ndarray
    iterations: int
    history: list[float] = field(default_factory=list)


def capacity(W, tol: float = 1e-9, max_iter: int = MAX_ITER) -> CapacityResult:
    """Blahut-Arimoto from the uniform input, stopped when the capacity bracket closes.

    Each step reweights ``p(x)`` by ``2**(step * D(W[x] || q))``; the bracket is
    ``log2 sum_x p(x) 2**D_x <= C <= max_x D_x``. ``step = 1`` is the classic update and
    never decreases the mutual information; larger steps are tried by doubling and kept
    only while they improve on it, which rescues nearly flat objectives.
    """
    W = _check_confusion(W)
    n = W.shape[0]
    p = np.full(n, 1.0 / n)
    history = []
    for it in range(1, max_iter + 1):
        d = _divergences(p, W)
        current = float(p @ d)
        history.append(current)
        z = p * np.exp2(d)
        lower = float(np.log2(z.sum()))
        upper = float(np.max(d))
        if upper - lower < tol:
            return CapacityResult(mutual_information(p, W), p, it, history)
        best_p = z / z.sum()
        best = float(best_p @ _divergences(best_p, W))
        step = 2.0
        while step <= 2.0 ** 30:
            logw = np.log2(np.where(p > 0, p, 1.0)) + step * d
            trial = np.where(p > 0, np.exp2(logw - logw[p > 0].max()), 0.0)
            trial /= trial.sum()
            value = float(trial @ _divergences(trial, W))
            if value <= best:
                break
            best_p, best = trial, value
            step *= 2
        p = best_p
    raise ConvergenceError(f"Blahut-Arimoto did not converge in {max_iter} iterations")


def calibrate_noise(target_success: float, tol: float = 1e-10) -> float:
    """Crosstalk strength whose analytic mean diagonal success equals ``target_success``."""
    if not 0.25 < target_success <= 1.0:
        raise ValueError("target success must lie in (0.25, 1]")

    def success(eps: float) -> float:
        return float(np.mean(np.diag(confusion_matrix(NoiseModel(eps)))))

    lo, hi = 0.0, 1.0
    if success(lo) - target_success <= tol:
        return lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if success(mid) > target_success:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass
class SuperdenseResult:
    transcript: list[tuple[str, str]]
    success_rate: float


def superdense_run(messages: Sequence[str], noise: NoiseModel, seed,
                   codebook: Mapping[str, BellLabel | str] | None = None,
                   shots: int = 1, m: int = 1) -> SuperdenseResult:
    """Encode each message on photon A, analyze, draw ``shots`` coincidences and decode.

    ``shots=1`` is single-shot superdense coding; larger values decode by majority mass.
    """
    book = validate_codebook(codebook or DEFAULT_CODEBOOK)
    inverse = {lab: msg for msg, lab in book.items()}
    basis = target_basis(REFERENCE_U4)
    cells = _cell_labels(ideal_patterns(REFERENCE_U4, m))
    source = hyper_bell(BellLabel.PsiPlus, m)

    cdfs = {}
    for msg in book:
        table = apply_noise(coincidence_table(encode(msg, source, book), basis), noise)
        cdf = np.cumsum(table.values.ravel())
        cdf[-1] = 1.0
        cdfs[msg] = cdf

    messages = list(messages)
    unknown = set(messages) - set(book)
    if unknown:
        raise ValueError(f"messages must be 2-bit strings, got {sorted(unknown)}")
    if not messages:
        return SuperdenseResult([], float("nan"))
    rng = np.random.default_rng(seed)
    draws = rng.random((len(messages), shots))
    tallies = np.zeros((len(messages), 4), dtype=int)
    for msg, cdf in cdfs.items():
        rows = np.array([i for i, x in enumerate(messages) if x == msg], dtype=int)
        if rows.size == 0:
            continue
        hit = cells[np.searchsorted(cdf, draws[rows], side="right").clip(max=15)]
        np.add.at(tallies, (np.repeat(rows, shots), hit.ravel()), 1)
    decoded = [inverse[LABELS[y]] for y in np.argmax(tallies, axis=1)]
    transcript = list(zip(messages, decoded))
    rate = sum(a == b for a, b in transcript) / len(transcript)
    return SuperdenseResult(transcript, rate)


def random_messages(n: int, seed) -> list[str]:
    rng = np.random.default_rng(seed)
    return [f"{int(k):02b}" for k in rng.integers(0, 4, size=n)]
