"""Full protocol runs: state preparation, paired homodyne records, analysis.

A run simulates, per analysis setting, a batch of trials in which Alice's
outcome collapses Bob's mode, Bob measures at a scanned phase, and both
sides' records are kept.  The analysis path (shared by fresh runs and by
re-analysis of persisted records) reconstructs Bob's conditioned and
unconditioned states by maximum likelihood and evaluates the steering
functional with bootstrap errors.
"""

from __future__ import annotations

import dataclasses
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .channels import NoiseParams, apply_loss_batch, apply_loss_mode_a
from .fock import (
    DEFAULT_DIM,
    DensityMatrix,
    SourceParams,
    TwoModeState,
    beamsplit,
    partial_trace,
    source_state,
)
from .homodyne import QuadratureRecord, _cdf_table, collapse_batch, sample_pdf_batch
from .steering import (
    ANNOUNCED_SIGN_OF_X,
    SteeringReport,
    SteeringSettings,
    sigma_theta_expectation,
)
from .tomography import (
    CellAnalysis,
    TomographySetup,
    bin_dataset,
    HomodyneDataset,
    bootstrap_violation,
    steering_from_binned,
)
from .util import canonical_float, canonical_floats, thread_count

ADVERSARY_STRATEGIES = ("separable_honest", "sign_random", "best_deterministic")

#: Trials are simulated in fixed-size blocks; the block size is part of the
#: reproducibility contract (it determines the RNG consumption order).
TRIAL_CHUNK = 2048

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one run needs; two runs with equal configs are bit-identical."""

    reflectivity: float
    source: SourceParams
    noise: NoiseParams
    settings: SteeringSettings
    samples_per_setting: int = 20_000
    bob_phase_plan: str = "uniform_scan"
    bob_phases: Optional[tuple] = None
    bob_phase_jitter: float = 0.0
    seed: int = 0
    adversary: Optional[str] = None
    dim: int = DEFAULT_DIM
    bootstrap_resamples: int = 200

    def __post_init__(self):
        if not 0.0 <= self.reflectivity <= 1.0:
            raise ValueError(f"reflectivity must be in [0, 1], got {self.reflectivity}")
        if self.samples_per_setting < 1:
            raise ValueError("samples_per_setting must be >= 1")
        if self.samples_per_setting < 1000:
            warnings.warn(
                "fewer than 1000 samples per setting is too little for any "
                "steering claim",
                stacklevel=2,
            )
        if self.bob_phase_plan not in ("uniform_scan", "fixed_list"):
            raise ValueError(f"unknown bob_phase_plan {self.bob_phase_plan!r}")
        if self.bob_phase_plan == "fixed_list" and not self.bob_phases:
            raise ValueError("fixed_list phase plan needs bob_phases")
        if self.adversary is not None and self.adversary not in ADVERSARY_STRATEGIES:
            raise ValueError(
                f"unknown adversary {self.adversary!r}; expected one of {ADVERSARY_STRATEGIES}"
            )
        if self.bob_phase_jitter < 0:
            raise ValueError("bob_phase_jitter must be >= 0")
        if self.dim < 3:
            raise ValueError("dim must be >= 3")

    def to_json_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "R": self.reflectivity,
            "p0": self.source.p0,
            "p1": self.source.p1,
            "p2": self.source.p2,
            "p_h": self.source.p_h,
            "eta_h": self.noise.eta_h,
            "l_A": self.noise.l_a,
            "delta_theta": self.noise.delta_theta,
            "eta_B": self.noise.eta_b,
            "n_settings": self.settings.n,
            "f_value": self.settings.f_value,
            "thetas": list(self.settings.thetas),
            "samples_per_setting": self.samples_per_setting,
            "bob_phase_plan": self.bob_phase_plan,
            "bob_phases": list(self.bob_phases) if self.bob_phases else None,
            "bob_phase_jitter": self.bob_phase_jitter,
            "seed": self.seed,
            "adversary": self.adversary,
            "dim": self.dim,
            "bootstrap_resamples": self.bootstrap_resamples,
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "ExperimentConfig":
        version = payload.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported config schema version {version}")
        if "delta_theta_deg" in payload:
            delta_theta = np.deg2rad(float(payload["delta_theta_deg"]))
        else:
            delta_theta = float(payload.get("delta_theta", 0.0))
        source = SourceParams(
            p0=float(payload["p0"]),
            p1=float(payload["p1"]),
            p2=float(payload["p2"]),
            p_h=float(payload.get("p_h", 0.0)),
        )
        noise = NoiseParams(
            eta_h=float(payload.get("eta_h", 1.0)),
            l_a=float(payload.get("l_A", 0.0)),
            delta_theta=delta_theta,
            eta_b=float(payload.get("eta_B", 0.96)),
        )
        n = int(payload.get("n_settings", 6))
        if "thetas" in payload and payload["thetas"] is not None:
            settings = SteeringSettings(
                n=n,
                thetas=tuple(payload["thetas"]),
                f_value=float(payload["f_value"]),
            )
        else:
            settings = SteeringSettings.default(n, f_value=payload.get("f_value"))
        phases = payload.get("bob_phases")
        return cls(
            reflectivity=float(payload["R"]),
            source=source,
            noise=noise,
            settings=settings,
            samples_per_setting=int(payload.get("samples_per_setting", 20_000)),
            bob_phase_plan=payload.get("bob_phase_plan", "uniform_scan"),
            bob_phases=tuple(phases) if phases else None,
            bob_phase_jitter=float(payload.get("bob_phase_jitter", 0.0)),
            seed=int(payload.get("seed", 0)),
            adversary=payload.get("adversary"),
            dim=int(payload.get("dim", DEFAULT_DIM)),
            bootstrap_resamples=int(payload.get("bootstrap_resamples", 200)),
        )


@dataclass(frozen=True)
class RecordSet:
    """Column-oriented homodyne records for one party."""

    party: str
    setting_index: np.ndarray
    lo_phase: np.ndarray
    x: np.ndarray
    s: np.ndarray
    trial_id: np.ndarray

    def __post_init__(self):
        n = self.setting_index.size
        for name in ("lo_phase", "x", "s", "trial_id"):
            if getattr(self, name).size != n:
                raise ValueError("record columns must have equal length")

    def __len__(self) -> int:
        return self.setting_index.size

    def records(self):
        for i in range(len(self)):
            yield QuadratureRecord(
                party=self.party,
                setting_index=int(self.setting_index[i]),
                lo_phase=float(self.lo_phase[i]),
                x=float(self.x[i]),
                s=int(self.s[i]),
                trial_id=int(self.trial_id[i]),
            )


@dataclass(frozen=True)
class RunArtifacts:
    """Everything a completed run produced."""

    config: ExperimentConfig
    alice: RecordSet
    bob: RecordSet
    reconstructed_states: dict  # (j, announced sign) -> qubit DensityMatrix or None
    unconditioned_state: DensityMatrix
    report: SteeringReport
    tomography_info: dict
    provenance: dict = field(default_factory=dict)


def _prepared_state(config: ExperimentConfig, strategy: Optional[str]) -> TwoModeState:
    """Lossy joint state entering the measurement stage."""
    d = config.dim
    R = config.reflectivity
    if strategy == "separable_honest":
        m = np.zeros((d * d, d * d), dtype=np.complex128)
        m[0 * d + 1, 0 * d + 1] = R  # |0,1><0,1|
        m[1 * d + 0, 1 * d + 0] = 1.0 - R  # |1,0><1,0|
        joint = TwoModeState(m, dim_a=d, dim_b=d)
    else:
        joint = beamsplit(source_state(config.source, d), R)
    return apply_loss_mode_a(joint, config.noise.eta_a)


def _bob_phase_batch(config: ExperimentConfig, rng: np.random.Generator, n: int) -> np.ndarray:
    if config.bob_phase_plan == "uniform_scan":
        return (np.arange(n) + rng.random(n)) * (2.0 * np.pi / n)
    phases = np.asarray(config.bob_phases, dtype=float) % (2.0 * np.pi)
    return np.resize(phases, n)


def _deterministic_pattern(config: ExperimentConfig, state: TwoModeState) -> list:
    """Recorded-sign pattern that maximizes the announced-label correlator
    against the model unconditioned state (ties broken toward +1)."""
    reduced = partial_trace(state, "B")
    block = reduced.matrix[:2, :2]
    qubit = DensityMatrix(block / np.trace(block).real)
    pattern = []
    for theta in config.settings.thetas:
        expect = sigma_theta_expectation(qubit, theta)
        pattern.append(-1 if expect > 0 else +1)
    return pattern


def _generate(config: ExperimentConfig, strategy: Optional[str]):
    """Simulate all settings; returns (alice RecordSet, bob RecordSet)."""
    state = _prepared_state(config, strategy)
    n_per = config.samples_per_setting
    seq = np.random.SeedSequence(config.seed)
    children = seq.spawn(config.settings.n + 1)

    marginal = partial_trace(state, "A")
    offdiag = np.abs(marginal.matrix - np.diag(np.diag(marginal.matrix))).max()
    if offdiag > 1e-12:
        raise ValueError(
            "Alice's reduced state is not phase-insensitive; the shared "
            "outcome table would be setting-dependent"
        )
    grid, cdf = _cdf_table(marginal.matrix, 0.0)

    pattern = None
    if strategy == "best_deterministic":
        pattern = _deterministic_pattern(config, state)

    a_cols = {k: [] for k in ("setting", "phase", "x", "s", "trial")}
    b_cols = {k: [] for k in ("setting", "phase", "x", "s", "trial")}

    for j, theta_j in enumerate(config.settings.thetas):
        rng = np.random.default_rng(children[j])
        thetas = theta_j + config.noise.delta_theta * rng.standard_normal(n_per)
        x_a = np.interp(rng.random(n_per), cdf, grid)
        phis = _bob_phase_batch(config, rng, n_per)
        if config.bob_phase_jitter > 0:
            phi_actual = phis + config.bob_phase_jitter * rng.standard_normal(n_per)
        else:
            phi_actual = phis

        x_b = np.empty(n_per)
        for start in range(0, n_per, TRIAL_CHUNK):
            stop = min(start + TRIAL_CHUNK, n_per)
            mats, dens = collapse_batch(state, thetas[start:stop], x_a[start:stop])
            bob_states = mats / dens[:, None, None]
            bob_lossy = apply_loss_batch(bob_states, config.noise.eta_b)
            x_b[start:stop] = sample_pdf_batch(bob_lossy, phi_actual[start:stop], rng)

        s_a = np.where(x_a >= 0, 1, -1).astype(np.int64)
        if strategy == "sign_random":
            s_a = (rng.integers(0, 2, n_per) * 2 - 1).astype(np.int64)
        elif strategy == "best_deterministic":
            s_a = np.full(n_per, pattern[j], dtype=np.int64)

        trial = np.arange(n_per, dtype=np.int64)
        a_cols["setting"].append(np.full(n_per, j, dtype=np.int64))
        a_cols["phase"].append(np.full(n_per, canonical_float(theta_j)))
        a_cols["x"].append(canonical_floats(x_a))
        a_cols["s"].append(s_a)
        a_cols["trial"].append(trial)
        b_cols["setting"].append(np.full(n_per, j, dtype=np.int64))
        b_cols["phase"].append(canonical_floats(phis))
        b_cols["x"].append(canonical_floats(x_b))
        b_cols["s"].append(np.where(x_b >= 0, 1, -1).astype(np.int64))
        b_cols["trial"].append(trial)

    def pack(party, cols):
        return RecordSet(
            party=party,
            setting_index=np.concatenate(cols["setting"]),
            lo_phase=np.concatenate(cols["phase"]),
            x=np.concatenate(cols["x"]),
            s=np.concatenate(cols["s"]).astype(np.int64),
            trial_id=np.concatenate(cols["trial"]),
        )

    return pack("A", a_cols), pack("B", b_cols)


def analyze_records(
    config: ExperimentConfig,
    alice: RecordSet,
    bob: RecordSet,
    eta_b: Optional[float] = None,
    bootstrap_resamples: Optional[int] = None,
):
    """Tomography + steering analysis of a record pair.

    Bob's records are grouped by Alice's announced label (the recorded sign
    through the fixed orientation); announced-label frequencies come from
    Alice's side only.  Returns (SteeringReport, CellAnalysis).
    """
    settings = config.settings
    setup = TomographySetup(
        dim=config.dim, eta_b=config.noise.eta_b if eta_b is None else eta_b
    )
    cell_counts = {}
    sign_probs = {}
    counts = {}
    for j in range(settings.n):
        a_mask = alice.setting_index == j
        if not np.any(a_mask):
            raise ValueError(f"no records for setting {j}")
        announced = ANNOUNCED_SIGN_OF_X * alice.s[a_mask]
        by_trial = np.zeros(int(alice.trial_id[a_mask].max()) + 1, dtype=np.int64)
        by_trial[alice.trial_id[a_mask]] = announced
        b_mask = bob.setting_index == j
        bob_ann = by_trial[bob.trial_id[b_mask]]
        n_total = int(np.count_nonzero(a_mask))
        for s in (+1, -1):
            n_cell = int(np.count_nonzero(announced == s))
            counts[(j, s)] = n_cell
            sign_probs[(j, s)] = n_cell / n_total
            sel = bob_ann == s
            if np.count_nonzero(sel) == 0:
                if config.adversary is None:
                    raise ValueError(
                        f"empty conditioned cell (setting {j}, sign {s:+d}) in an honest run"
                    )
                cell_counts[(j, s)] = np.zeros((setup.phase_bins, setup.x_bins), dtype=np.int64)
                continue
            ds = HomodyneDataset(bob.lo_phase[b_mask][sel], bob.x[b_mask][sel])
            cell_counts[(j, s)], _ = bin_dataset(ds, setup)

    analysis = steering_from_binned(cell_counts, sign_probs, settings, setup)

    resamples = (
        config.bootstrap_resamples if bootstrap_resamples is None else bootstrap_resamples
    )
    boot_rng = np.random.default_rng(np.random.SeedSequence(config.seed).spawn(settings.n + 1)[-1])
    boot = bootstrap_violation(
        cell_counts, sign_probs, settings, setup, boot_rng, resamples=resamples, warm=analysis
    )
    analysis.mle_info["bootstrap"] = {
        "resamples": resamples,
        "lhs_std": boot.lhs_std,
        "rhs_std": boot.rhs_std,
    }
    report = SteeringReport(
        lhs=analysis.lhs,
        rhs=analysis.rhs,
        violation=analysis.violation,
        per_setting_terms=analysis.per_setting,
        bootstrap_mean=boot.mean,
        bootstrap_std=boot.std,
        counts=counts,
        n=settings.n,
        f_value=settings.f_value,
    )
    return report, analysis


def _provenance(config: ExperimentConfig) -> dict:
    return {
        "package": "steerkit",
        "version": __version__,
        "seed": config.seed,
        "adversary": config.adversary,
    }


def _run(config: ExperimentConfig, strategy: Optional[str]) -> RunArtifacts:
    alice, bob = _generate(config, strategy)
    report, analysis = analyze_records(config, alice, bob)
    return RunArtifacts(
        config=config,
        alice=alice,
        bob=bob,
        reconstructed_states=analysis.conditioned,
        unconditioned_state=analysis.unconditioned,
        report=report,
        tomography_info=analysis.mle_info,
        provenance=_provenance(config),
    )


def run_honest(config: ExperimentConfig) -> RunArtifacts:
    """Simulate and analyze one honest run of the full protocol."""
    if config.adversary is not None:
        raise ValueError("config requests an adversary; use run_adversary")
    return _run(config, None)


def run_adversary(config: ExperimentConfig, strategy: Optional[str] = None) -> RunArtifacts:
    """Run with a dishonest Alice.

    Strategies: ``separable_honest`` (classical mixture source, honest
    reporting), ``sign_random`` (labels are coin flips), and
    ``best_deterministic`` (fixed per-setting labels optimized against the
    model unconditioned state).
    """
    strategy = strategy or config.adversary
    if strategy not in ADVERSARY_STRATEGIES:
        raise ValueError(
            f"unknown adversary {strategy!r}; expected one of {ADVERSARY_STRATEGIES}"
        )
    config = dataclasses.replace(config, adversary=strategy)
    return _run(config, strategy)


def run(config: ExperimentConfig) -> RunArtifacts:
    """Dispatch on the config's adversary field."""
    if config.adversary is None:
        return run_honest(config)
    return run_adversary(config)


def replicate(config: ExperimentConfig, k: int) -> list:
    """k independent runs with seeds seed + 0 .. seed + k - 1."""
    if k < 1:
        raise ValueError("k must be >= 1")
    configs = [dataclasses.replace(config, seed=config.seed + i) for i in range(k)]
    workers = thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run, configs))
    return [run(c) for c in configs]
