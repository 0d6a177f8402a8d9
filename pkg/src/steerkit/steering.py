"""Multi-setting steering functional: empirical and closed-form sides.

The test statistic correlates the sign label Alice announces with the
coherence of Bob's reconstructed conditioned qubit states; an average over n
equally spaced analysis phases is compared against a bound that depends only
on Bob's unconditioned state.  A positive gap (violation) certifies that
Bob's local state cannot pre-exist independently of Alice's setting choice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .fock import DensityMatrix, SourceParams
from .channels import NoiseParams
from .util import bisect_zero, golden_section_max

#: Tabulated bound constants for the settings counts this package supports
#: out of the box.  Other n need an explicit user-supplied value; the general
#: formula is Eq. (4.15) of S. J. Jones and H. M. Wiseman, Phys. Rev. A 84,
#: 012110 (2011).
F_TABLE = {6: 0.6440, math.inf: 2.0 / math.pi}

#: Announced-label orientation: the analysis treats a recorded quadrature
#: sign s as the announcement ANNOUNCED_SIGN_OF_X * s.  With the transmitted-
#: port minus sign in the beam-splitter convention, this is the labeling for
#: which s * <sigma_theta> is setting-independent and positive when Alice
#: measures honestly; it is a fixed relabeling, so it has no physical content.
ANNOUNCED_SIGN_OF_X = -1


def announced_sign(x: float) -> int:
    """Label an honest outcome x announces under the fixed orientation."""
    return ANNOUNCED_SIGN_OF_X * (1 if x >= 0 else -1)


def f_factor(n, override: Optional[float] = None) -> float:
    """Bound constant f(n); tabulated n only, unless ``override`` is given."""
    if override is not None:
        if override <= 0:
            raise ValueError(f"f value must be positive, got {override}")
        return float(override)
    if n in F_TABLE:
        return F_TABLE[n]
    raise ValueError(
        f"f({n}) is not tabulated here; pass an explicit value computed from "
        "Eq. (4.15) of Jones & Wiseman, Phys. Rev. A 84, 012110 (2011)"
    )


@dataclass(frozen=True)
class SteeringSettings:
    """Alice's analysis settings: count n, phases (canonicalized mod pi), f(n)."""

    n: int
    thetas: tuple
    f_value: float

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"need at least 2 settings, got {self.n}")
        if len(self.thetas) != self.n:
            raise ValueError("thetas length must equal n")
        if self.f_value <= 0:
            raise ValueError(f"f value must be positive, got {self.f_value}")
        object.__setattr__(
            self, "thetas", tuple(float(t) % math.pi for t in self.thetas)
        )

    @classmethod
    def default(cls, n: int = 6, f_value: Optional[float] = None) -> "SteeringSettings":
        """Equally spaced phases theta_j = pi * j / n (mod pi), j = 1..n."""
        thetas = tuple(sorted((math.pi * j / n) % math.pi for j in range(1, n + 1)))
        return cls(n=n, thetas=thetas, f_value=f_factor(n, override=f_value))


def sigma_theta(theta: float) -> np.ndarray:
    """Coherence observable at analysis phase theta (qubit basis |0>, |1>)."""
    return np.array(
        [[0.0, np.exp(-1j * theta)], [np.exp(1j * theta), 0.0]], dtype=np.complex128
    )


def sigma_theta_expectation(rho: DensityMatrix, theta: float) -> float:
    """<sigma_theta> = 2 Re(e^{-i theta} rho_10); bounded by 1 on unit-trace states."""
    if rho.dim != 2:
        raise ValueError(f"expected a qubit state, got dim {rho.dim}")
    return float(2.0 * np.real(np.exp(-1j * theta) * rho.matrix[1, 0]))


def steering_lhs_states(
    conditioned: Mapping[tuple, tuple], settings: SteeringSettings
) -> float:
    """Empirical left side from conditioned states keyed by (setting index, label).

    ``conditioned[(j, s)]`` is ``(P(s | setting j), qubit state)``; states for
    zero-probability cells may be None.  All 2n cells must be present.
    """
    total = 0.0
    for j, theta in enumerate(settings.thetas):
        for s in (+1, -1):
            if (j, s) not in conditioned:
                raise KeyError(f"missing conditioned cell (setting {j}, sign {s:+d})")
            prob, rho = conditioned[(j, s)]
            if prob < 0:
                raise ValueError(f"negative probability in cell ({j}, {s:+d})")
            if prob == 0.0:
                continue
            total += prob * s * sigma_theta_expectation(rho, theta)
    return total / settings.n


def steering_rhs_state(rho_uncond: DensityMatrix, settings: SteeringSettings) -> float:
    """Right side f(n) sqrt(1 - (rho_11 - rho_00)^2) from the unconditioned state."""
    if rho_uncond.dim != 2:
        raise ValueError(f"expected a qubit state, got dim {rho_uncond.dim}")
    z = float(np.real(rho_uncond.matrix[1, 1] - rho_uncond.matrix[0, 0]))
    return settings.f_value * math.sqrt(max(1.0 - z * z, 0.0))


def steering_lhs_analytic(source: SourceParams, noise: NoiseParams, reflectivity: float) -> float:
    """Closed-form left side; setting-independent for equally spaced phases.

    Evaluates the stated occupation weights as-is (exact when they sum to 1).
    """
    R = reflectivity
    return (
        2.0
        * math.exp(-0.5 * noise.delta_theta**2)
        * math.sqrt(noise.eta_a * R * (1.0 - R) * 2.0 / math.pi)
        * (source.p1 + source.p2 * (1.0 - R) * (2.0 - noise.eta_a))
        / (1.0 - source.p2 * R**2)
    )


def steering_rhs_analytic(
    source: SourceParams,
    noise: NoiseParams,
    reflectivity: float,
    settings: SteeringSettings,
) -> float:
    """Closed-form right side for the qubit-restricted unconditioned state."""
    R = reflectivity
    z = (
        source.p0 + source.p1 * (1.0 - 2.0 * R) + source.p2 * (1.0 - R) * (1.0 - 3.0 * R)
    ) / (1.0 - source.p2 * R**2)
    return settings.f_value * math.sqrt(max(1.0 - z * z, 0.0))


def violation(
    source: SourceParams,
    noise: NoiseParams,
    reflectivity: float,
    settings: SteeringSettings,
) -> float:
    """Closed-form violation (left minus right side) at one reflectivity."""
    return steering_lhs_analytic(source, noise, reflectivity) - steering_rhs_analytic(
        source, noise, reflectivity, settings
    )


@dataclass(frozen=True)
class SweepResult:
    """Violation curve over reflectivity with its landmarks.

    ``r_max`` is the largest zero crossing of the violation (None when the
    sign never changes on the grid); ``r_opt`` is the argmax, whose value may
    be negative when nothing violates.
    """

    reflectivities: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    violation: np.ndarray
    r_opt: float
    violation_opt: float
    r_max: Optional[float]


def sweep_reflectivity(
    source: SourceParams,
    noise: NoiseParams,
    settings: SteeringSettings,
    grid,
) -> SweepResult:
    """Evaluate the closed-form curve on ``grid`` and refine its landmarks.

    The optimum is refined by golden-section search and the crossing by
    bisection, both to 1e-4 in R.
    """
    rs = np.asarray(list(grid), dtype=float)
    if rs.size < 3:
        raise ValueError("sweep grid needs at least 3 points")
    if rs.min() < 0.0 or rs.max() > 1.0:
        raise ValueError("sweep grid must lie in [0, 1]")
    lhs = np.array([steering_lhs_analytic(source, noise, r) for r in rs])
    rhs = np.array([steering_rhs_analytic(source, noise, r, settings) for r in rs])
    viol = lhs - rhs

    def v(r):
        return violation(source, noise, r, settings)

    k = int(np.argmax(viol))
    lo = rs[max(k - 1, 0)]
    hi = rs[min(k + 1, rs.size - 1)]
    r_opt = golden_section_max(v, lo, hi, tol=1e-4)

    r_max = None
    signs = np.sign(viol)
    crossings = np.nonzero(signs[:-1] * signs[1:] < 0)[0]
    if crossings.size:
        i = int(crossings[-1])
        r_max = bisect_zero(v, rs[i], rs[i + 1], tol=1e-4)

    return SweepResult(
        reflectivities=rs,
        lhs=lhs,
        rhs=rhs,
        violation=viol,
        r_opt=float(r_opt),
        violation_opt=float(v(r_opt)),
        r_max=None if r_max is None else float(r_max),
    )


@dataclass(frozen=True)
class SteeringReport:
    """Outcome of one steering analysis, empirical or analytic."""

    lhs: float
    rhs: float
    violation: float
    per_setting_terms: tuple
    bootstrap_mean: float
    bootstrap_std: float
    counts: dict = field(default_factory=dict)
    n: int = 6
    f_value: float = F_TABLE[6]

    def __post_init__(self):
        if self.bootstrap_std < 0:
            raise ValueError("bootstrap_std must be >= 0")
        if abs(self.violation - (self.lhs - self.rhs)) > 1e-12:
            raise ValueError("violation must equal lhs - rhs")

    def to_json_dict(self) -> dict:
        return {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "violation": self.violation,
            "bootstrap_mean": self.bootstrap_mean,
            "bootstrap_std": self.bootstrap_std,
            "n": self.n,
            "f": self.f_value,
            "per_setting": list(self.per_setting_terms),
            "counts": {f"{j}:{s:+d}": c for (j, s), c in sorted(self.counts.items())},
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "SteeringReport":
        counts = {}
        for key, c in payload.get("counts", {}).items():
            j, s = key.split(":")
            counts[(int(j), int(s))] = int(c)
        return cls(
            lhs=float(payload["lhs"]),
            rhs=float(payload["rhs"]),
            violation=float(payload["violation"]),
            per_setting_terms=tuple(payload.get("per_setting", ())),
            bootstrap_mean=float(payload.get("bootstrap_mean", 0.0)),
            bootstrap_std=float(payload.get("bootstrap_std", 0.0)),
            counts=counts,
            n=int(payload.get("n", 6)),
            f_value=float(payload.get("f", F_TABLE[6])),
        )
