"""State reconstruction from phase-scanned homodyne records.

The reconstruction is the standard iterative maximum-likelihood fixed point
rho <- N[R(rho) rho R(rho)] with R(rho) = sum_cells f_cell Pi_cell /
Tr[Pi_cell rho], run on (phase bin, quadrature bin) histograms; see
Lvovsky, J. Opt. B 6, S556 (2004).  Detector inefficiency is compensated by
building the cell operators for the lossy measurement, which is equivalent
to reconstructing the pre-loss state.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache
from math import factorial
from typing import Optional

import numpy as np
from scipy.special import eval_genlaguerre

from .fock import DEFAULT_DIM, DensityMatrix, restrict_qubit
from .channels import DEFAULT_ETA_B, _loss_kraus_cached
from .homodyne import hermite_functions
from .steering import (
    SteeringSettings,
    sigma_theta_expectation,
    steering_lhs_states,
    steering_rhs_state,
)


@dataclass(frozen=True)
class TomographySetup:
    """Binning and iteration knobs for the maximum-likelihood reconstruction."""

    dim: int = DEFAULT_DIM
    eta_b: float = DEFAULT_ETA_B
    phase_bins: int = 30
    x_bins: int = 141
    x_max: float = 7.0
    max_iter: int = 2000
    tol: float = 1e-10

    def __post_init__(self):
        if not 0.0 < self.eta_b <= 1.0:
            raise ValueError(f"eta_b must be in (0, 1], got {self.eta_b}")
        if self.dim < 2 or self.phase_bins < 2 or self.x_bins < 2:
            raise ValueError("degenerate tomography setup")

    def x_centers(self) -> np.ndarray:
        edges = np.linspace(-self.x_max, self.x_max, self.x_bins + 1)
        return 0.5 * (edges[:-1] + edges[1:])

    def phase_centers(self) -> np.ndarray:
        edges = np.linspace(0.0, 2.0 * np.pi, self.phase_bins + 1)
        return 0.5 * (edges[:-1] + edges[1:])


@dataclass(frozen=True)
class HomodyneDataset:
    """Bob-side homodyne records: local-oscillator phases and outcomes."""

    phases: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        ph = np.asarray(self.phases, dtype=float)
        xs = np.asarray(self.values, dtype=float)
        if ph.size == 0 or ph.shape != xs.shape:
            raise ValueError("dataset needs equal-length, nonempty phase/value arrays")
        object.__setattr__(self, "phases", ph)
        object.__setattr__(self, "values", xs)

    def __len__(self) -> int:
        return self.phases.size

    def phase_coverage(self, bins: int = 30) -> float:
        """Fraction of [0, 2*pi) phase bins that hold at least one record."""
        hist, _ = np.histogram(np.mod(self.phases, 2.0 * np.pi), bins=bins, range=(0.0, 2.0 * np.pi))
        return float(np.count_nonzero(hist)) / bins


def povm_element(x: float, phi: float, eta: float, dim: int) -> np.ndarray:
    """Measurement operator for outcome x at phase phi through loss eta.

    Defined by the identity Tr[Pi_eta(x, phi) rho] = Tr[Pi_1(x, phi)
    L_eta(rho)] for every rho, where L_eta is the loss channel; for eta = 1
    it is the rank-one projector onto the rotated quadrature eigenstate.
    """
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta must be in (0, 1], got {eta}")
    v = hermite_functions(dim, x)[:, 0] * np.exp(1j * phi * np.arange(dim))
    proj = np.outer(v, v.conj())
    if eta == 1.0:
        return proj
    out = np.zeros_like(proj)
    for k in _loss_kraus_cached(float(eta), dim - 1):
        out += k.conj().T @ proj @ k
    return out


@lru_cache(maxsize=8)
def _povm_stack(dim, eta, phase_bins, x_bins, x_max):
    """Flattened cell operators, shape (phase_bins * x_bins, dim * dim).

    Cells are weighted by dx / phase_bins so the whole stack sums to
    (approximately) the identity and Tr[Pi rho] is a joint probability.
    """
    setup = TomographySetup(dim=dim, eta_b=eta, phase_bins=phase_bins, x_bins=x_bins, x_max=x_max)
    xc = setup.x_centers()
    pc = setup.phase_centers()
    dx = xc[1] - xc[0]
    psi = hermite_functions(dim, xc)  # (d, Nx)
    phases = np.exp(1j * np.outer(pc, np.arange(dim)))  # (Nphi, d)
    # projector stack (Nphi, Nx, d, d) built as outer products of v = psi * phase
    v = phases[:, None, :] * psi.T[None, :, :]
    proj = v[..., :, None] * v.conj()[..., None, :]
    if eta < 1.0:
        lossy = np.zeros_like(proj)
        for k in _loss_kraus_cached(float(eta), dim - 1):
            lossy += np.einsum("nA,...AB,Bm->...nm", k.conj().T, proj, k)
        proj = lossy
    proj *= dx / phase_bins
    flat = proj.reshape(phase_bins * x_bins, dim * dim)
    flat.setflags(write=False)
    return flat


def bin_dataset(dataset: HomodyneDataset, setup: TomographySetup):
    """Histogram records into (phase bin, x bin) counts; out-of-range x dropped."""
    phis = np.mod(dataset.phases, 2.0 * np.pi)
    keep = np.abs(dataset.values) <= setup.x_max
    counts, _, _ = np.histogram2d(
        phis[keep],
        dataset.values[keep],
        bins=(setup.phase_bins, setup.x_bins),
        range=((0.0, 2.0 * np.pi), (-setup.x_max, setup.x_max)),
    )
    return counts.astype(np.int64), int(np.count_nonzero(~keep))


@dataclass(frozen=True)
class MLEResult:
    state: DensityMatrix
    iterations: int
    converged: bool
    log_likelihood: float
    n_records: int
    n_dropped: int = 0
    ll_trace: tuple = ()

    def to_json_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "log_likelihood": self.log_likelihood,
            "n_records": self.n_records,
            "n_dropped": self.n_dropped,
        }


def mle_from_counts(
    counts: np.ndarray,
    setup: TomographySetup,
    initial: Optional[np.ndarray] = None,
    n_dropped: int = 0,
) -> MLEResult:
    """Iterative maximum-likelihood fit on a binned histogram.

    The per-sample log-likelihood is nondecreasing along the iteration; a
    decrease beyond roundoff (-1e-9) aborts, since it signals a broken
    operator set.  Stops when the gain drops below ``setup.tol`` (per
    sample) or at ``setup.max_iter`` (returning the last iterate, flagged
    unconverged).
    """
    flat_counts = counts.reshape(-1).astype(float)
    total = flat_counts.sum()
    if total <= 0:
        raise ValueError("no records fall inside the tomography bins")
    nonzero = np.nonzero(flat_counts)[0]
    freqs = flat_counts[nonzero] / total
    stack = _povm_stack(setup.dim, setup.eta_b, setup.phase_bins, setup.x_bins, setup.x_max)
    stack = stack[nonzero]

    dim = setup.dim
    rho = np.eye(dim, dtype=np.complex128) / dim if initial is None else initial.astype(np.complex128)

    def loglik(r):
        probs = np.maximum(np.real(stack @ r.T.reshape(-1)), 1e-300)
        return float(freqs @ np.log(probs)), probs

    ll, probs = loglik(rho)
    trace = [ll]
    converged = False
    iterations = 0
    for iterations in range(1, setup.max_iter + 1):
        r_op = ((freqs / probs) @ stack).reshape(dim, dim)
        new = r_op @ rho @ r_op
        new = 0.5 * (new + new.conj().T)
        new /= np.trace(new).real
        new_ll, new_probs = loglik(new)
        gain = new_ll - ll
        if gain < -1e-9:
            raise ArithmeticError(
                f"log-likelihood decreased by {-gain:.3e} at iteration {iterations}"
            )
        rho, ll, probs = new, new_ll, new_probs
        trace.append(ll)
        if gain < setup.tol:
            converged = True
            break

    return MLEResult(
        state=DensityMatrix(rho),
        iterations=iterations,
        converged=converged,
        log_likelihood=ll,
        n_records=int(total),
        n_dropped=n_dropped,
        ll_trace=tuple(trace),
    )


def mle_reconstruct(
    dataset: HomodyneDataset,
    setup: TomographySetup = TomographySetup(),
    initial: Optional[np.ndarray] = None,
) -> MLEResult:
    """Reconstruct a state from records, with phase-coverage sanity checks."""
    coverage = dataset.phase_coverage(setup.phase_bins)
    if coverage < 0.5:
        raise ValueError(
            f"phase scan covers only {coverage:.0%} of [0, 2*pi); reconstruction is ill-posed"
        )
    if coverage < 0.9:
        warnings.warn(
            f"phase scan covers {coverage:.0%} of [0, 2*pi); reconstruction may be biased",
            stacklevel=2,
        )
    counts, dropped = bin_dataset(dataset, setup)
    return mle_from_counts(counts, setup, initial=initial, n_dropped=dropped)


# ---------------------------------------------------------------------------
# Wigner functions
# ---------------------------------------------------------------------------


@lru_cache(maxsize=64)
def _laguerre_norm(m: int, n: int) -> float:
    return np.sqrt(2.0 ** (m - n) * factorial(n) / factorial(m))


def _wigner_kernel(m: int, n: int, q: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Fock-basis Wigner kernel W_mn(q, p), Laguerre form, hbar = 1.

    Normalized so the vacuum kernel is exp(-q^2-p^2)/pi (unit integral,
    1/pi at the origin); see Leonhardt, "Measuring the Quantum State of
    Light", Sec. 5.2.6.
    """
    if m < n:
        return np.conj(_wigner_kernel(n, m, q, p))
    r2 = q * q + p * p
    base = np.exp(-r2) / np.pi * (-1.0) ** n * _laguerre_norm(m, n)
    return base * (q - 1j * p) ** (m - n) * eval_genlaguerre(n, m - n, 2.0 * r2)


def wigner_values(rho: DensityMatrix, q: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Wigner function evaluated at arbitrary (q, p) arrays (same shape)."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    w = np.zeros(np.broadcast(q, p).shape, dtype=np.complex128)
    for m in range(rho.dim):
        for n in range(rho.dim):
            coeff = rho.matrix[m, n]
            if coeff != 0:
                w = w + coeff * _wigner_kernel(m, n, q, p)
    return w.real


@dataclass(frozen=True)
class WignerGrid:
    q_axis: np.ndarray
    p_axis: np.ndarray
    values: np.ndarray  # values[i, j] = W(q_i, p_j)

    def integral(self) -> float:
        inner = np.trapezoid(self.values, self.p_axis, axis=1)
        return float(np.trapezoid(inner, self.q_axis))

    def min(self) -> float:
        return float(self.values.min())

    def long_rows(self):
        """(q, p, w) rows in row-major order, for delimited output."""
        for i, qv in enumerate(self.q_axis):
            for j, pv in enumerate(self.p_axis):
                yield float(qv), float(pv), float(self.values[i, j])


def wigner(rho: DensityMatrix, points: int = 101, extent: float = 5.0) -> WignerGrid:
    """Wigner function on a square grid spanning [-extent, extent]^2."""
    axis = np.linspace(-extent, extent, points)
    qg, pg = np.meshgrid(axis, axis, indexing="ij")
    return WignerGrid(q_axis=axis, p_axis=axis.copy(), values=wigner_values(rho, qg, pg))


# ---------------------------------------------------------------------------
# Steering analysis on binned cells, and its bootstrap
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CellAnalysis:
    """Empirical steering numbers derived from per-cell reconstructions."""

    lhs: float
    rhs: float
    per_setting: tuple
    conditioned: dict  # (j, s) -> qubit DensityMatrix or None for empty cells
    conditioned_full: dict  # (j, s) -> full-dimension DensityMatrix or None
    unconditioned: DensityMatrix  # full reconstruction dimension
    mle_info: dict  # cell tag -> MLEResult metadata dict

    @property
    def violation(self) -> float:
        return self.lhs - self.rhs


def _restrict(state: DensityMatrix) -> DensityMatrix:
    block_trace = float(np.real(state.matrix[0, 0] + state.matrix[1, 1]))
    return restrict_qubit(state, block_trace)


def steering_from_binned(
    cell_counts: dict,
    sign_probs: dict,
    settings: SteeringSettings,
    setup: TomographySetup,
    initial: Optional[dict] = None,
) -> CellAnalysis:
    """Reconstruct each (setting, sign) cell plus the pooled state and
    evaluate the steering functional.

    ``cell_counts`` maps (j, s) to a binned histogram; ``sign_probs`` maps
    (j, s) to the announced-label relative frequency (fixed by Alice's
    counts, not by Bob's records).  ``initial`` optionally provides warm-
    start matrices keyed like the cells, plus "pooled".
    """
    initial = initial or {}
    conditioned = {}
    conditioned_full = {}
    lhs_map = {}
    info = {}
    pooled = None
    for j in range(settings.n):
        for s in (+1, -1):
            counts = cell_counts[(j, s)]
            pooled = counts.astype(np.int64) if pooled is None else pooled + counts
            prob = sign_probs[(j, s)]
            if counts.sum() == 0 or prob == 0.0:
                conditioned[(j, s)] = None
                conditioned_full[(j, s)] = None
                lhs_map[(j, s)] = (prob, None)
                continue
            fit = mle_from_counts(counts, setup, initial=initial.get((j, s)))
            qubit = _restrict(fit.state)
            conditioned[(j, s)] = qubit
            conditioned_full[(j, s)] = fit.state
            lhs_map[(j, s)] = (prob, qubit)
            info[f"conditioned_{j}_{s:+d}"] = fit.to_json_dict()
    pooled_fit = mle_from_counts(pooled, setup, initial=initial.get("pooled"))
    info["unconditioned"] = pooled_fit.to_json_dict()

    lhs = steering_lhs_states(lhs_map, settings)
    per_setting = []
    for j, theta in enumerate(settings.thetas):
        term = 0.0
        for s in (+1, -1):
            prob, rho = lhs_map[(j, s)]
            if rho is not None and prob > 0:
                term += prob * s * sigma_theta_expectation(rho, theta)
        per_setting.append(term)
    rhs = steering_rhs_state(_restrict(pooled_fit.state), settings)
    return CellAnalysis(
        lhs=lhs,
        rhs=rhs,
        per_setting=tuple(per_setting),
        conditioned=conditioned,
        conditioned_full=conditioned_full,
        unconditioned=pooled_fit.state,
        mle_info=info,
    )


@dataclass(frozen=True)
class BootstrapResult:
    """Resampling spread of the empirical steering quantities."""

    mean: float
    std: float
    violations: np.ndarray
    lhs_values: np.ndarray
    rhs_values: np.ndarray

    @property
    def lhs_std(self) -> float:
        return float(self.lhs_values.std(ddof=1)) if self.lhs_values.size > 1 else 0.0

    @property
    def rhs_std(self) -> float:
        return float(self.rhs_values.std(ddof=1)) if self.rhs_values.size > 1 else 0.0


def bootstrap_violation(
    cell_counts: dict,
    sign_probs: dict,
    settings: SteeringSettings,
    setup: TomographySetup,
    rng: np.random.Generator,
    resamples: int = 200,
    warm: Optional[CellAnalysis] = None,
) -> BootstrapResult:
    """Bootstrap spread of the empirical violation.

    Records are resampled with replacement within each (setting, sign) cell
    (multinomial redraw of the binned counts, which is equivalent), and the
    full tomography + steering analysis is rerun per resample.
    """
    if resamples < 1:
        raise ValueError("resamples must be >= 1")
    for cell, counts in cell_counts.items():
        if 0 < counts.sum() < 100:
            warnings.warn(
                f"cell {cell} holds only {int(counts.sum())} records; bootstrap "
                "spread will be unreliable",
                stacklevel=2,
            )
    if warm is None:
        warm = steering_from_binned(cell_counts, sign_probs, settings, setup)
    initial = {
        cell: rho.matrix
        for cell, rho in warm.conditioned_full.items()
        if rho is not None
    }
    initial["pooled"] = warm.unconditioned.matrix

    violations = np.empty(resamples)
    lhs_values = np.empty(resamples)
    rhs_values = np.empty(resamples)
    for b in range(resamples):
        resampled = {}
        for cell, counts in cell_counts.items():
            flat = counts.reshape(-1)
            total = int(flat.sum())
            if total == 0:
                resampled[cell] = counts
                continue
            redraw = rng.multinomial(total, flat / total)
            resampled[cell] = redraw.reshape(counts.shape)
        analysis = steering_from_binned(
            resampled, sign_probs, settings, setup, initial=initial
        )
        violations[b] = analysis.violation
        lhs_values[b] = analysis.lhs
        rhs_values[b] = analysis.rhs
    std = float(violations.std(ddof=1)) if resamples > 1 else 0.0
    return BootstrapResult(
        mean=float(violations.mean()),
        std=std,
        violations=violations,
        lhs_values=lhs_values,
        rhs_values=rhs_values,
    )
