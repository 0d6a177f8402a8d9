"""Truncated Fock-space states and the linear algebra everything else runs on.

Single-mode states live on the photon-number ladder |0>..|dim-1|.  The joint
Alice/Bob space is the tensor product with A-major index ordering: the basis
vector |n_A, n_B> sits at flat index ``n_A * dim_b + n_B``.  Storage is
complex throughout, because phase-rotated coherences are complex even when
the states being split and measured are real.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

HERMITICITY_TOL = 1e-12
PSD_TOL = 1e-10
TRACE_TOL = 1e-10

#: Default Fock truncation: one guard level above the two-photon content of
#: the heralded source, so loss channels and conditioning never silently clip.
DEFAULT_DIM = 4


def _validated_matrix(matrix, what: str) -> np.ndarray:
    m = np.array(matrix, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{what} must be square, got shape {m.shape}")
    herm = float(np.abs(m - m.conj().T).max())
    if herm > HERMITICITY_TOL:
        raise ValueError(f"{what} is not Hermitian (max |M - M^H| = {herm:.3e})")
    lowest = float(np.linalg.eigvalsh(m).min())
    if lowest < -PSD_TOL:
        raise ValueError(f"{what} is not positive semidefinite (min eigenvalue {lowest:.3e})")
    m.setflags(write=False)
    return m


@dataclass(frozen=True)
class DensityMatrix:
    """Single-mode state on a truncated Fock ladder.

    ``normalized=False`` marks unnormalized instances (e.g. post-projection
    operators) that are still Hermitian and PSD but carry trace != 1.
    Instances are immutable; the wrapped array is read-only.
    """

    matrix: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        m = _validated_matrix(self.matrix, "density matrix")
        if m.shape[0] < 2:
            raise ValueError("density matrix needs dim >= 2")
        if self.normalized:
            tr = float(np.trace(m).real)
            if abs(tr - 1.0) > TRACE_TOL:
                raise ValueError(f"normalized state must have unit trace, got {tr!r}")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def purity(self) -> float:
        return float(np.trace(self.matrix @ self.matrix).real)

    def to_json_dict(self) -> dict:
        """Serialize as ``{"dim": n, "re": [[..]], "im": [[..]]}`` (row-major)."""
        return {
            "dim": self.dim,
            "re": self.matrix.real.tolist(),
            "im": self.matrix.imag.tolist(),
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "DensityMatrix":
        dim = int(payload["dim"])
        m = np.array(payload["re"], dtype=float) + 1j * np.array(payload["im"], dtype=float)
        if m.shape != (dim, dim):
            raise ValueError(f"state payload claims dim {dim} but matrix is {m.shape}")
        normalized = abs(float(np.trace(m).real) - 1.0) <= 1e-8
        return cls(m, normalized=normalized)


@dataclass(frozen=True)
class TwoModeState:
    """Joint Alice-Bob density operator, A-major ordering |n_A, n_B>."""

    matrix: np.ndarray
    dim_a: int
    dim_b: int

    def __post_init__(self):
        m = _validated_matrix(self.matrix, "two-mode state")
        if m.shape[0] != self.dim_a * self.dim_b:
            raise ValueError(
                f"matrix side {m.shape[0]} != dim_a*dim_b = {self.dim_a * self.dim_b}"
            )
        tr = float(np.trace(m).real)
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"two-mode state must have unit trace, got {tr!r}")
        object.__setattr__(self, "matrix", m)

    def reshaped(self) -> np.ndarray:
        """View with indices [n_A, n_B, m_A, m_B]."""
        return self.matrix.reshape(self.dim_a, self.dim_b, self.dim_a, self.dim_b)


@dataclass(frozen=True)
class SourceParams:
    """Occupation probabilities of the heralded photon source.

    ``p_h`` is the residual higher-order weight; it is recorded but never
    propagated into states (the source renormalizes over p0, p1, p2).
    """

    p0: float
    p1: float
    p2: float
    p_h: float = 0.0

    def __post_init__(self):
        for name in ("p0", "p1", "p2", "p_h"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if not (1.0 - self.p_h - 1e-9) <= self.total <= (1.0 + 1e-9):
            raise ValueError(
                f"p0+p1+p2 = {self.total} incompatible with p_h = {self.p_h}"
            )

    @property
    def total(self) -> float:
        return self.p0 + self.p1 + self.p2

    def normalized(self) -> "SourceParams":
        """Rescale so p0+p1+p2 = 1 exactly (drops the recorded p_h)."""
        t = self.total
        return SourceParams(self.p0 / t, self.p1 / t, self.p2 / t, p_h=0.0)


#: Reference source occupations for the modeled heralded single-photon setup.
DEFAULT_SOURCE = SourceParams(p0=0.120, p1=0.857, p2=0.02, p_h=0.004)

#: Pure single-photon source (the idealized limit).
IDEAL_SOURCE = SourceParams(p0=0.0, p1=1.0, p2=0.0)


def source_state(params: SourceParams, dim: int = DEFAULT_DIM) -> DensityMatrix:
    """Heralded-source state: diag(p0, p1, p2, 0, ..) renormalized to trace 1.

    The p_h deficit is not redistributed; the stated weights are divided by
    their own sum.
    """
    if dim < 3:
        raise ValueError("source_state needs dim >= 3 for the two-photon term")
    diag = np.zeros(dim, dtype=np.complex128)
    diag[:3] = (params.p0, params.p1, params.p2)
    diag /= params.total
    return DensityMatrix(np.diag(diag))


def _beamsplit_isometry(dim: int, reflectivity: float) -> np.ndarray:
    """Isometry |n> -> sum_k (-1)^(n-k) sqrt(C(n,k) R^k (1-R)^(n-k)) |n-k, k>.

    Mode A (first factor) is the transmitted port, mode B the reflected one;
    the minus sign on the transmitted amplitude is the single phase
    convention from which every downstream coherence sign follows.
    """
    R = reflectivity
    v = np.zeros((dim * dim, dim), dtype=np.complex128)
    for n in range(dim):
        for k in range(n + 1):
            amp = (-1.0) ** (n - k) * np.sqrt(comb(n, k) * R**k * (1.0 - R) ** (n - k))
            v[(n - k) * dim + k, n] = amp
    return v


def beamsplit(state: DensityMatrix, reflectivity: float) -> TwoModeState:
    """Split a single-mode state on a beam splitter with a vacuum second port.

    Returns the joint state with Alice on the transmitted mode and Bob on the
    reflected one; the map is a unitary dilation, so trace and purity are
    preserved exactly.
    """
    if not 0.0 <= reflectivity <= 1.0:
        raise ValueError(f"reflectivity must be in [0, 1], got {reflectivity}")
    if state.dim < 3:
        raise ValueError("beamsplit input needs dim >= 3")
    v = _beamsplit_isometry(state.dim, reflectivity)
    joint = v @ state.matrix @ v.conj().T
    return TwoModeState(joint, dim_a=state.dim, dim_b=state.dim)


def partial_trace(state: TwoModeState, keep: str) -> DensityMatrix:
    """Reduced state of one party; ``keep`` is "A" or "B"."""
    t = state.reshaped()
    if keep == "A":
        reduced = np.einsum("ibjb->ij", t)
    elif keep == "B":
        reduced = np.einsum("aiaj->ij", t)
    else:
        raise ValueError(f"keep must be 'A' or 'B', got {keep!r}")
    return DensityMatrix(0.5 * (reduced + reduced.conj().T))


def restrict_qubit(rho: DensityMatrix, renorm: float) -> DensityMatrix:
    """Keep the {|0>, |1>} block and divide by ``renorm``.

    With ``renorm`` equal to the retained-block trace the result is a
    unit-trace state; other renormalization factors leave the trace off by
    the corresponding discarded-mass mismatch, and the result is flagged
    unnormalized.
    """
    if renorm <= 0:
        raise ValueError(f"renorm must be positive, got {renorm}")
    block = rho.matrix[:2, :2] / renorm
    tr = float(np.trace(block).real)
    return DensityMatrix(block, normalized=abs(tr - 1.0) <= TRACE_TOL)


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def fidelity(a: DensityMatrix, b: DensityMatrix) -> float:
    """Uhlmann fidelity (squared trace-norm convention), in [0, 1]."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    ra = _psd_sqrt(a.matrix)
    inner = ra @ b.matrix @ ra
    w = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    f = float(np.sum(np.sqrt(np.clip(w, 0.0, None))) ** 2)
    return min(f, 1.0)
