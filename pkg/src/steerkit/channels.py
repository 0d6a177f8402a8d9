"""Photon-loss Kraus channels and Gaussian local-oscillator phase jitter.

Loss with efficiency ``eta`` is the binomial damping channel: losing k of n
photons carries amplitude sqrt(C(n,k) eta^(n-k) (1-eta)^k).  Phase jitter is
modeled as an i.i.d. Gaussian perturbation of the lock point per sample; its
density-level counterpart is a Gaussian average over the lock phase, which
damps e^{+-i*theta} coherences by exp(-sigma^2/2).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb
from typing import Callable

import numpy as np

from .fock import DensityMatrix, TwoModeState, TRACE_TOL

#: Default detection efficiency assumed for Bob's photoreceiver (same
#: hardware class as Alice's); a pure simulation/compensation knob.
DEFAULT_ETA_B = 0.96


@dataclass(frozen=True)
class NoiseParams:
    """Alice-side loss and phase-noise budget, plus Bob's detector knob.

    ``eta_h`` is Alice's homodyne efficiency, ``l_a`` her extra apparatus
    loss; the combined efficiency is ``eta_a = eta_h * (1 - l_a)``.
    ``delta_theta`` is the RMS phase-lock jitter in radians.
    """

    eta_h: float
    l_a: float = 0.0
    delta_theta: float = 0.0
    eta_b: float = DEFAULT_ETA_B

    def __post_init__(self):
        for name in ("eta_h", "l_a", "eta_b"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.delta_theta < 0:
            raise ValueError(f"delta_theta must be >= 0, got {self.delta_theta}")

    @property
    def eta_a(self) -> float:
        return self.eta_h * (1.0 - self.l_a)

    @classmethod
    def ideal(cls) -> "NoiseParams":
        return cls(eta_h=1.0, l_a=0.0, delta_theta=0.0, eta_b=1.0)


#: Reference noise budget of the modeled setup (3.9 degrees RMS jitter).
DEFAULT_NOISE = NoiseParams(
    eta_h=0.96, l_a=0.025, delta_theta=np.deg2rad(3.9), eta_b=DEFAULT_ETA_B
)


@lru_cache(maxsize=64)
def _loss_kraus_cached(eta: float, max_n: int) -> tuple:
    dim = max_n + 1
    ops = []
    for k in range(dim):
        m = np.zeros((dim, dim), dtype=np.complex128)
        for n in range(k, dim):
            m[n - k, n] = np.sqrt(comb(n, k) * eta ** (n - k) * (1.0 - eta) ** k)
        m.setflags(write=False)
        ops.append(m)
    return tuple(ops)


def loss_kraus(eta: float, max_n: int) -> list[np.ndarray]:
    """Kraus operators K_0..K_max_n of the loss channel on levels 0..max_n.

    K_k removes k photons; completeness sum(K^H K) = I holds exactly on the
    retained ladder because the binomial weights sum to 1.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must be in [0, 1], got {eta}")
    if max_n < 1:
        raise ValueError(f"max_n must be >= 1, got {max_n}")
    return [k.copy() for k in _loss_kraus_cached(float(eta), int(max_n))]


def _apply_loss_raw(matrix: np.ndarray, eta: float) -> np.ndarray:
    dim = matrix.shape[-1]
    out = np.zeros_like(matrix)
    for k in _loss_kraus_cached(float(eta), dim - 1):
        out += k @ matrix @ k.conj().T
    return out


def apply_loss_single(rho: DensityMatrix, eta: float) -> DensityMatrix:
    """Send a single-mode state through the loss channel of efficiency eta."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must be in [0, 1], got {eta}")
    if eta == 1.0:
        return rho
    return DensityMatrix(_apply_loss_raw(rho.matrix, eta), normalized=rho.normalized)


def apply_loss_batch(matrices: np.ndarray, eta: float) -> np.ndarray:
    """Loss channel applied to a stack of raw state matrices (N, d, d)."""
    if eta == 1.0:
        return matrices
    dim = matrices.shape[-1]
    out = np.zeros_like(matrices)
    for k in _loss_kraus_cached(float(eta), dim - 1):
        out += k @ matrices @ k.conj().T
    return out


def apply_loss_mode_a(state: TwoModeState, eta: float) -> TwoModeState:
    """Loss on Alice's mode only: sum_k (K_k x I) rho (K_k x I)^H."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must be in [0, 1], got {eta}")
    if eta == 1.0:
        return state
    eye_b = np.eye(state.dim_b)
    out = np.zeros_like(state.matrix)
    for k in _loss_kraus_cached(float(eta), state.dim_a - 1):
        kk = np.kron(k, eye_b)
        out += kk @ state.matrix @ kk.conj().T
    return TwoModeState(out, dim_a=state.dim_a, dim_b=state.dim_b)


def phase_jitter_average(
    statefn: Callable[[float], DensityMatrix],
    theta: float,
    delta_theta: float,
    min_nodes: int = 21,
    max_nodes: int = 672,
) -> DensityMatrix:
    """Average ``statefn`` over a Gaussian-distributed lock phase.

    Computes integral of N(theta_tilde; theta, delta_theta^2) *
    statefn(theta_tilde) by Gauss-Hermite quadrature, doubling the node count
    until doubling moves the result by <= 1e-9 (non-convergence at
    ``max_nodes`` raises).  For coherences varying as e^{+-i*theta_tilde} the
    result equals damping by exp(-delta_theta^2 / 2).
    """
    if delta_theta < 0:
        raise ValueError(f"delta_theta must be >= 0, got {delta_theta}")
    if delta_theta == 0.0:
        return statefn(theta)

    def average(n_nodes: int) -> np.ndarray:
        nodes, weights = np.polynomial.hermite.hermgauss(n_nodes)
        acc = None
        for t, w in zip(nodes, weights):
            m = statefn(theta + np.sqrt(2.0) * delta_theta * t).matrix
            acc = w * m if acc is None else acc + w * m
        return acc / np.sqrt(np.pi)

    n = min_nodes
    coarse = average(n)
    while True:
        fine = average(2 * n)
        drift = float(np.abs(fine - coarse).max())
        if drift <= 1e-9:
            break
        n *= 2
        coarse = fine
        if 2 * n > max_nodes:
            raise RuntimeError(
                f"phase-jitter quadrature did not converge (node doubling still "
                f"moves the result by {drift:.3e} > 1e-9 at {n} nodes)"
            )
    tr = float(np.trace(fine).real)
    return DensityMatrix(fine, normalized=abs(tr - 1.0) <= TRACE_TOL)
