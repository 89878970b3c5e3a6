"""Linear-optical elements as mode unitaries, and the path-extended analyzer chain.

Conventions
-----------
* Dove prism at angle ``alpha``: ``|+-m> -> exp(-+ 2i m alpha) |-+m>``, polarization untouched.
* Beam splitter: transmitted amplitude ``1/sqrt2``, reflected ``i/sqrt2``.
* PBS: H transmits (path kept), V reflects (path toggled).
* Path-extended index is ``path * 4 + mode``; path 0 is the top port.
* Operators compose right to left: the first element in a chain is the rightmost factor.

After ``qplate_qwp`` the four per-port slots are reinterpreted as
``(|0,H>, |0,V>, residual, residual)``: only the two Gaussian slots couple to the
single-mode fiber, so residual slots are never detected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .states import MODE_LABELS, DimTag, ModeUnitary, StateError

N_PATHS = 2
PATH_DIM = 4 * N_PATHS
ROUTING_TOL = 1e-9

# (path, slot) of each detector bin, in order
DETECTOR_SLOTS: tuple[tuple[int, int], ...] = ((0, 0), (0, 1), (1, 0), (1, 1))
DETECTOR_INDICES = tuple(p * 4 + s for p, s in DETECTOR_SLOTS)


class TuningError(RuntimeError):
    pass


def _oam(k: int) -> int:
    return MODE_LABELS[k][0]


def dove_single(alpha: float, m: int = 1) -> ModeUnitary:
    """A single Dove prism: flips the OAM sign with an orientation-dependent phase."""
    u = np.zeros((4, 4), dtype=complex)
    for k, (sign, pol) in enumerate(MODE_LABELS):
        target = MODE_LABELS.index((-sign, pol))
        u[target, k] = np.exp(-1j * sign * 2 * m * alpha)
    return ModeUnitary(u)


def dove_pair(m: int = 1) -> ModeUnitary:
    """Two Dove prisms at relative angle pi/(4m): ``|+-m> -> +-i |+-m>``."""
    return ModeUnitary(np.diag([1j * _oam(k) for k in range(4)]))


def pbs() -> ModeUnitary:
    u = np.zeros((PATH_DIM, PATH_DIM), dtype=complex)
    for path in range(N_PATHS):
        for k, (_, pol) in enumerate(MODE_LABELS):
            out = path if pol == "H" else 1 - path
            u[out * 4 + k, path * 4 + k] = 1.0
    return ModeUnitary(u, DimTag.PATH_EXTENDED)


def bs() -> ModeUnitary:
    b = np.array([[1, 1j], [1j, 1]], dtype=complex) / math.sqrt(2)
    return ModeUnitary(np.kron(b, np.eye(4)), DimTag.PATH_EXTENDED)


def phase_plate(phi: float, arm: int) -> ModeUnitary:
    d = np.ones(PATH_DIM, dtype=complex)
    d[arm * 4:(arm + 1) * 4] = np.exp(1j * phi)
    return ModeUnitary(np.diag(d), DimTag.PATH_EXTENDED)


def in_arm(u: ModeUnitary, arm: int | None) -> ModeUnitary:
    """Lift a 4x4 mode unitary into one path (or all paths when ``arm`` is None)."""
    blocks = [u.matrix if arm is None or arm == p else np.eye(4) for p in range(N_PATHS)]
    big = np.zeros((PATH_DIM, PATH_DIM), dtype=complex)
    for p, blk in enumerate(blocks):
        big[p * 4:(p + 1) * 4, p * 4:(p + 1) * 4] = blk
    return ModeUnitary(big, DimTag.PATH_EXTENDED)


def qplate_qwp() -> ModeUnitary:
    """Net U(2) of the QWP / q-plate / QWP sandwich on each output port.

    Top port: ``|-m,H> -> |0,H>``, ``|+m,V> -> |0,V>``.
    Bottom port: ``|-m,V> -> |0,H>``, ``|+m,H> -> |0,V>``.
    """
    top = np.eye(4)
    bottom = np.zeros((4, 4))
    for src, slot in ((2, 0), (3, 1), (0, 2), (1, 3)):
        bottom[slot, src] = 1.0
    big = np.zeros((PATH_DIM, PATH_DIM), dtype=complex)
    big[:4, :4] = top
    big[4:, 4:] = bottom
    return ModeUnitary(big, DimTag.PATH_EXTENDED)


def pbs45() -> ModeUnitary:
    """Separates diagonal (slot 0) from antidiagonal (slot 1) in the Gaussian slots."""
    blk = np.eye(4, dtype=complex)
    blk[:2, :2] = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
    return ModeUnitary(np.kron(np.eye(N_PATHS), blk), DimTag.PATH_EXTENDED)


_KINDS = ("dove_single", "dove_pair", "pbs", "bs", "phase_plate", "qplate_qwp", "pbs45")


@dataclass(frozen=True)
class ElementSpec:
    kind: str
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise StateError(f"unknown element kind {self.kind!r}")
        params = dict(self.params)
        for key in ("alpha", "phi"):
            if key in params:
                params[key] = float(params[key]) % (2 * math.pi)
        object.__setattr__(self, "params", params)

    def unitary(self, path_extended: bool = True) -> ModeUnitary:
        p = self.params
        m = int(p.get("m", 1))
        if self.kind in ("dove_single", "dove_pair"):
            u = dove_single(p.get("alpha", 0.0), m) if self.kind == "dove_single" else dove_pair(m)
            return in_arm(u, p.get("arm")) if path_extended else u
        if not path_extended:
            raise StateError(f"{self.kind} only exists on the path-extended space")
        if self.kind == "phase_plate":
            return phase_plate(p["phi"], int(p.get("arm", 1)))
        return {"pbs": pbs, "bs": bs, "qplate_qwp": qplate_qwp, "pbs45": pbs45}[self.kind]()

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d: dict) -> "ElementSpec":
        return cls(d["kind"], dict(d.get("params", {})))


def compose(chain: Sequence[ElementSpec]) -> ModeUnitary:
    """Product of a chain listed in the order light meets it."""
    u = np.eye(PATH_DIM, dtype=complex)
    for el in chain:
        u = el.unitary().matrix @ u
    return ModeUnitary(u, DimTag.PATH_EXTENDED)


def analyzer_elements(mzi_phase: float, input_phase: float = math.pi / 2, m: int = 1) -> list[ElementSpec]:
    """PBS, input glass plate, MZI (Dove pair in arm 0, glass plate in arm 1), U(2), PBS@45."""
    return [
        ElementSpec("pbs"),
        ElementSpec("phase_plate", {"phi": input_phase, "arm": 1}),
        ElementSpec("bs"),
        ElementSpec("dove_pair", {"m": m, "arm": 0}),
        ElementSpec("phase_plate", {"phi": mzi_phase, "arm": 1}),
        ElementSpec("bs"),
        ElementSpec("qplate_qwp"),
        ElementSpec("pbs45"),
    ]


@dataclass(frozen=True)
class DetectorMap:
    """Routing of target-basis labels (1..4) to detector bins (0..3)."""

    routing: dict[int, int]
    chain: tuple[ElementSpec, ...]
    composite: ModeUnitary
    min_fidelity: float
    valid: bool

    def __post_init__(self):
        if sorted(self.routing) != [1, 2, 3, 4] or sorted(self.routing.values()) != [0, 1, 2, 3]:
            raise StateError("detector routing must be a bijection between 1..4 and 0..3")

    def measurement_rows(self) -> np.ndarray:
        """``M[d, k]``: amplitude to fire detector bin ``d`` from input mode ``k`` in path 0."""
        return measurement_rows(self.composite)

    def routing_table(self, basis_rows: np.ndarray) -> np.ndarray:
        """``P[k, d]``: probability that ``basis_rows[k]`` fires detector ``d``."""
        return np.abs(basis_rows @ self.measurement_rows().T) ** 2

    def to_dict(self) -> dict:
        return {
            "routing": {f"B{k}": d for k, d in self.routing.items()},
            "chain": [el.to_dict() for el in self.chain],
            "min_fidelity": self.min_fidelity,
            "valid": self.valid,
        }


def measurement_rows(composite: ModeUnitary) -> np.ndarray:
    return composite.matrix[list(DETECTOR_INDICES), :4]


def _default_basis() -> np.ndarray:
    from .search import REFERENCE_U4, target_basis

    return np.array([v.amplitudes for v in target_basis(REFERENCE_U4)])


IDENTITY_ROUTING = {1: 0, 2: 1, 3: 2, 4: 3}


def analyzer_chain(mzi_phase: float, m: int = 1, input_phase: float = math.pi / 2,
                   basis_rows: np.ndarray | None = None) -> DetectorMap:
    chain = tuple(analyzer_elements(mzi_phase, input_phase, m))
    composite = compose(chain)
    rows = _default_basis() if basis_rows is None else basis_rows
    probs = np.abs(rows @ measurement_rows(composite).T) ** 2
    fid = float(min(probs[k - 1, d] for k, d in IDENTITY_ROUTING.items()))
    return DetectorMap(dict(IDENTITY_ROUTING), chain, composite, fid, fid >= 1 - ROUTING_TOL)


@dataclass(frozen=True)
class Tuning:
    mzi_phase: float
    input_phase: float
    min_fidelity: float


def _fidelity_grid(phases: np.ndarray, m: int, rows: np.ndarray) -> np.ndarray:
    """Min routing fidelity for every (input_phase, mzi_phase) pair on the grid."""
    # the chain is affine in exp(i*input_phase) and exp(i*mzi_phase) separately:
    # U = X (D0 + e^{i mzi} D1) (P0 + e^{i in} P1) with D*, P* the per-arm pieces
    u_pbs, u_bs = pbs().matrix, bs().matrix
    post = pbs45().matrix @ qplate_qwp().matrix @ u_bs
    arm0 = np.zeros((PATH_DIM, PATH_DIM), dtype=complex)
    arm0[:4, :4] = dove_pair(m).matrix
    arm1 = np.zeros((PATH_DIM, PATH_DIM), dtype=complex)
    arm1[4:, 4:] = np.eye(4)
    proj0 = np.diag([1.0] * 4 + [0.0] * 4)
    pre0 = u_bs @ proj0 @ u_pbs
    pre1 = u_bs @ (np.eye(PATH_DIM) - proj0) @ u_pbs
    det = list(DETECTOR_INDICES)
    amp = {}
    for a, mid in (("0", arm0), ("1", arm1)):
        for b, pre in (("0", pre0), ("1", pre1)):
            meas = (post @ mid @ pre)[det, :4]
            # amplitude of B^t_k on its own detector
            amp[a + b] = np.einsum("kj,kj->k", meas, rows)
    z = np.exp(1j * phases)
    zin = z[:, None, None]
    zmzi = z[None, :, None]
    total = amp["00"] + zin * amp["01"] + zmzi * amp["10"] + zin * zmzi * amp["11"]
    return np.min(np.abs(total) ** 2, axis=-1)


def tune_analyzer(m: int = 1, step: float = math.pi / 180, basis_rows: np.ndarray | None = None) -> Tuning:
    """Grid-scan both glass-plate phases and keep the pair with the best worst-case routing."""
    n = int(round(2 * math.pi / step))
    phases = np.arange(n) * (2 * math.pi / n)
    rows = _default_basis() if basis_rows is None else basis_rows
    grid = _fidelity_grid(phases, m, rows)
    i, j = np.unravel_index(int(np.argmax(grid)), grid.shape)
    best = float(grid[i, j])
    if best <= 0.999:
        raise TuningError(f"no glass-plate setting routes the target basis (best fidelity {best:.4f})")
    return Tuning(mzi_phase=float(phases[j]), input_phase=float(phases[i]), min_fidelity=best)


def chain_statistics(s, detector_map_a: DetectorMap, detector_map_b: DetectorMap | None = None) -> np.ndarray:
    """Joint detector probabilities ``P[dA, dB]`` with each photon sent through its own chain."""
    ma = detector_map_a.measurement_rows()
    mb = ma if detector_map_b is None else detector_map_b.measurement_rows()
    return np.abs(ma @ s.amplitudes @ mb.T) ** 2
