"""Single- and two-photon states over the OAM x polarization modes of one subspace.

Mode order (fixed, not lexicographic)::

    0 <-> |-m>|H>    1 <-> |+m>|V>    2 <-> |-m>|V>    3 <-> |+m>|H>
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

ALGEBRA_TOL = 1e-12
UNITARY_TOL = 1e-10

# (oam sign, polarization) for each mode index
MODE_LABELS: tuple[tuple[int, str], ...] = ((-1, "H"), (+1, "V"), (-1, "V"), (+1, "H"))


def mode_index(oam_sign: int, pol: str) -> int:
    """Return the mode index of ``|oam_sign*m>|pol>``."""
    return MODE_LABELS.index((int(np.sign(oam_sign)), pol.upper()))


class StateError(ValueError):
    pass


class NotUnitaryError(ValueError):
    pass


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SinglePhotonState:
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _freeze(self.amplitudes)
        if amps.shape != (4,):
            raise StateError(f"single-photon state needs 4 amplitudes, got shape {amps.shape}")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def basis(cls, k: int) -> "SinglePhotonState":
        v = np.zeros(4, dtype=complex)
        v[k] = 1.0
        return cls(v)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalize(self) -> "SinglePhotonState":
        n = self.norm()
        if n == 0:
            raise StateError("cannot normalize the zero vector")
        return SinglePhotonState(self.amplitudes / n)


@dataclass(frozen=True, eq=False)
class TwoPhotonState:
    """Amplitude matrix with rows indexing photon A's mode, columns photon B's."""

    amplitudes: np.ndarray
    subspace_m: int = 1

    def __post_init__(self):
        amps = _freeze(self.amplitudes)
        if amps.shape != (4, 4):
            raise StateError(f"two-photon state needs a 4x4 amplitude matrix, got {amps.shape}")
        if int(self.subspace_m) < 1:
            raise StateError("subspace_m must be >= 1 (m = 0 is excluded)")
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "subspace_m", int(self.subspace_m))

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalize(self) -> "TwoPhotonState":
        n = self.norm()
        if n == 0:
            raise StateError("cannot normalize the zero state")
        return TwoPhotonState(self.amplitudes / n, self.subspace_m)

    def __mul__(self, scalar: complex) -> "TwoPhotonState":
        return TwoPhotonState(self.amplitudes * scalar, self.subspace_m)

    __rmul__ = __mul__

    def to_dict(self) -> dict:
        return {
            "subspace_m": self.subspace_m,
            "amplitudes": [[[float(z.real), float(z.imag)] for z in row] for row in self.amplitudes],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TwoPhotonState":
        amps = np.array(data["amplitudes"], dtype=float)
        return cls(amps[..., 0] + 1j * amps[..., 1], data["subspace_m"])


class DimTag(str, Enum):
    MODE4 = "mode4"
    PATH_EXTENDED = "path_extended"


@dataclass(frozen=True, eq=False)
class ModeUnitary:
    """A unitary on one photon's mode space; raises NotUnitaryError otherwise."""

    matrix: np.ndarray
    dim_tag: DimTag = DimTag.MODE4

    def __post_init__(self):
        u = _freeze(self.matrix)
        if u.ndim != 2 or u.shape[0] != u.shape[1]:
            raise NotUnitaryError(f"unitary must be square, got shape {u.shape}")
        tag = DimTag(self.dim_tag)
        if tag is DimTag.MODE4 and u.shape != (4, 4):
            raise NotUnitaryError(f"mode4 unitary must be 4x4, got {u.shape}")
        resid = unitarity_residual(u)
        if resid >= UNITARY_TOL:
            raise NotUnitaryError(f"matrix is not unitary (max |UU^dag - I| = {resid:.3g})")
        object.__setattr__(self, "matrix", u)
        object.__setattr__(self, "dim_tag", tag)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, other: "ModeUnitary") -> "ModeUnitary":
        if self.dim_tag is not other.dim_tag or self.dim != other.dim:
            raise StateError("cannot compose unitaries acting on different spaces")
        return ModeUnitary(self.matrix @ other.matrix, self.dim_tag)

    def dagger(self) -> "ModeUnitary":
        return ModeUnitary(self.matrix.conj().T, self.dim_tag)


def unitarity_residual(u: np.ndarray) -> float:
    u = np.asarray(u, dtype=complex)
    return float(np.max(np.abs(u @ u.conj().T - np.eye(u.shape[0]))))


def tensor(a: SinglePhotonState, b: SinglePhotonState, subspace_m: int = 1) -> TwoPhotonState:
    return TwoPhotonState(np.outer(a.amplitudes, b.amplitudes), subspace_m).normalize()


def inner(x: TwoPhotonState, y: TwoPhotonState) -> complex:
    """<x|y>, conjugate-linear in ``x``."""
    if x.subspace_m != y.subspace_m:
        raise StateError(f"subspace mismatch: m={x.subspace_m} vs m={y.subspace_m}")
    return complex(np.vdot(x.amplitudes, y.amplitudes))


def apply_local(u: ModeUnitary, which: str, s: TwoPhotonState) -> TwoPhotonState:
    """Apply ``u`` to photon ``"A"`` (rows) or ``"B"`` (columns)."""
    if u.dim_tag is not DimTag.MODE4 or u.dim != 4:
        raise StateError("apply_local needs a 4x4 mode unitary")
    which = which.upper()
    if which == "A":
        amps = u.matrix @ s.amplitudes
    elif which == "B":
        amps = s.amplitudes @ u.matrix.T
    else:
        raise StateError(f"photon must be 'A' or 'B', got {which!r}")
    return TwoPhotonState(amps, s.subspace_m)


def global_phase_equal(x: TwoPhotonState, y: TwoPhotonState, tol: float = 1e-10) -> bool:
    return abs(inner(x, y)) >= 1 - tol


def as_basis(vectors: Sequence[SinglePhotonState] | np.ndarray, tol: float = UNITARY_TOL) -> np.ndarray:
    """Stack basis vectors as rows and check orthonormality."""
    if isinstance(vectors, np.ndarray):
        rows = np.asarray(vectors, dtype=complex)
    else:
        rows = np.array([v.amplitudes if isinstance(v, SinglePhotonState) else v for v in vectors],
                        dtype=complex)
    if rows.shape != (4, 4):
        raise StateError(f"basis must contain 4 vectors of dimension 4, got {rows.shape}")
    gram = rows.conj() @ rows.T
    if np.max(np.abs(gram - np.eye(4))) >= tol:
        raise StateError("basis is not orthonormal")
    return rows


def decompose(s: TwoPhotonState, basis_a, basis_b=None) -> np.ndarray:
    """Coefficients ``c[k, l] = <B_k (x) B_l | s>``."""
    ra = as_basis(basis_a)
    rb = ra if basis_b is None else as_basis(basis_b)
    return ra.conj() @ s.amplitudes @ rb.conj().T


def reconstruct(coeffs: np.ndarray, basis_a, basis_b=None, subspace_m: int = 1) -> TwoPhotonState:
    ra = as_basis(basis_a)
    rb = ra if basis_b is None else as_basis(basis_b)
    return TwoPhotonState(ra.T @ np.asarray(coeffs) @ rb, subspace_m)


INITIAL_BASIS = tuple(SinglePhotonState.basis(k) for k in range(4))
