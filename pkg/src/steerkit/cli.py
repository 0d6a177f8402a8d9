"""Command-line frontend: simulate, analyze, steer, sweep, wigner, adversary.

Data goes to files or stdout as CSV/JSON; terse human summaries go to
stderr when stdout carries data.  Exit codes: 0 success, 2 validation
error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .channels import NoiseParams
from .experiment import (
    ADVERSARY_STRATEGIES,
    ExperimentConfig,
    analyze_records,
    run_adversary,
    run_honest,
)
from .fock import DEFAULT_DIM, DensityMatrix, SourceParams
from .steering import (
    SteeringSettings,
    steering_lhs_analytic,
    steering_rhs_analytic,
    sweep_reflectivity,
)
from .tomography import wigner
from . import runio


class CliError(Exception):
    """Input validation failure; mapped to exit code 2."""


def _param_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("physical parameters")
    g.add_argument("--p0", type=float, default=0.120, help="vacuum weight of the source")
    g.add_argument("--p1", type=float, default=0.857, help="single-photon weight")
    g.add_argument("--p2", type=float, default=0.02, help="two-photon weight")
    g.add_argument("--p-h", type=float, default=0.004, help="recorded higher-order weight")
    g.add_argument("--eta-h", type=float, default=0.96, help="Alice homodyne efficiency")
    g.add_argument("--l-A", type=float, default=0.025, help="Alice extra loss")
    g.add_argument(
        "--delta-theta-deg", type=float, default=3.9, help="RMS phase jitter (degrees)"
    )
    g.add_argument("--eta-B", type=float, default=0.96, help="Bob detection efficiency")
    g.add_argument("--n-settings", type=int, default=6, help="number of analysis settings")
    g.add_argument(
        "--f-value",
        type=float,
        default=None,
        help="bound constant f(n); required for untabulated n",
    )
    g.add_argument(
        "--ideal",
        action="store_true",
        help="pure single photon, no loss, no jitter (overrides the knobs above)",
    )
    return p


def _source_noise(args):
    if args.ideal:
        return SourceParams(0.0, 1.0, 0.0), NoiseParams.ideal()
    source = SourceParams(args.p0, args.p1, args.p2, p_h=args.p_h)
    noise = NoiseParams(
        eta_h=args.eta_h,
        l_a=args.l_A,
        delta_theta=float(np.deg2rad(args.delta_theta_deg)),
        eta_b=args.eta_B,
    )
    return source, noise


def _settings(args) -> SteeringSettings:
    return SteeringSettings.default(args.n_settings, f_value=args.f_value)


def _sim_config(args) -> ExperimentConfig:
    if args.config:
        payload = json.loads(Path(args.config).read_text())
        config = ExperimentConfig.from_json_dict(payload)
        overrides = {}
        if args.R is not None:
            overrides["reflectivity"] = args.R
        if args.samples is not None:
            overrides["samples_per_setting"] = args.samples
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.bootstrap is not None:
            overrides["bootstrap_resamples"] = args.bootstrap
        if overrides:
            import dataclasses

            config = dataclasses.replace(config, **overrides)
        return config
    if args.R is None:
        raise CliError("either --config or --R is required")
    source, noise = _source_noise(args)
    samples = args.samples if args.samples is not None else 20_000
    if args.paper_scale:
        samples = 200_000
    return ExperimentConfig(
        reflectivity=args.R,
        source=source,
        noise=noise,
        settings=_settings(args),
        samples_per_setting=samples,
        seed=args.seed if args.seed is not None else 0,
        dim=args.dim,
        bootstrap_resamples=args.bootstrap if args.bootstrap is not None else 200,
        bob_phase_plan=args.phase_plan,
    )


def _print_report(report, seed, stream=sys.stdout):
    print(
        f"lhs={report.lhs:.6f} rhs={report.rhs:.6f} "
        f"violation={report.violation:+.6f} +/- {report.bootstrap_std:.6f} (bootstrap) "
        f"seed={seed}",
        file=stream,
    )


def _cmd_simulate(args) -> int:
    try:
        config = _sim_config(args)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    out = Path(args.out)
    artifacts = run_honest(config)
    runio.persist(artifacts, out)
    if args.plot:
        from .plots import save_run_figures

        save_run_figures(artifacts, out)
    _print_report(artifacts.report, config.seed)
    print(f"run directory: {out}")
    return 0


def _cmd_adversary(args) -> int:
    try:
        config = _sim_config(args)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    artifacts = run_adversary(config, args.strategy)
    if args.out:
        runio.persist(artifacts, Path(args.out))
        if args.plot:
            from .plots import save_run_figures

            save_run_figures(artifacts, Path(args.out))
    print(f"adversary strategy: {args.strategy}")
    _print_report(artifacts.report, config.seed)
    return 0


def _cmd_analyze(args) -> int:
    run_dir = Path(args.run_dir)
    config = runio.read_config(run_dir)
    alice = runio.read_records(run_dir / "alice.csv")
    bob = runio.read_records(run_dir / "bob.csv")
    report, analysis = analyze_records(
        config,
        alice,
        bob,
        eta_b=args.eta_B,
        bootstrap_resamples=args.bootstrap,
    )
    provenance = {
        "package": "steerkit",
        "seed": config.seed,
        "adversary": config.adversary,
        "reanalysis": True,
    }
    if args.eta_B is not None:
        provenance["eta_B_override"] = args.eta_B
        print(f"note: reconstruction compensates eta_B={args.eta_B} (override)")
    runio._dump_json(
        run_dir / "report.json",
        {
            **report.to_json_dict(),
            "tomography": analysis.mle_info,
            "provenance": provenance,
        },
    )
    states_dir = run_dir / "states"
    states_dir.mkdir(exist_ok=True)
    for (j, s), state in sorted(analysis.conditioned.items()):
        if state is not None:
            runio.write_state(states_dir / runio._cell_filename(j, s), state)
    runio.write_state(states_dir / "unconditioned.json", analysis.unconditioned)
    if args.plot:
        from .plots import save_report_figure

        save_report_figure(report, run_dir / "report.png")
    _print_report(report, config.seed)
    return 0


def _parse_sweep_spec(spec: str) -> np.ndarray:
    try:
        lo, hi, step = (float(tok) for tok in spec.split(":"))
    except ValueError as exc:
        raise CliError(f"bad sweep spec {spec!r}; expected start:stop:step") from exc
    if step <= 0 or hi <= lo:
        raise CliError(f"bad sweep spec {spec!r}; need stop > start and step > 0")
    return np.arange(lo, hi + 0.5 * step, step)


def _steer_rows(source, noise, settings, rs):
    for r in rs:
        lhs = steering_lhs_analytic(source, noise, r)
        rhs = steering_rhs_analytic(source, noise, r, settings)
        yield r, lhs, rhs, lhs - rhs


def _write_curve(rows, out_path):
    lines = ["R,lhs,rhs,violation"]
    lines += [f"{r:.9g},{lhs:.9g},{rhs:.9g},{v:.9g}" for r, lhs, rhs, v in rows]
    text = "\n".join(lines) + "\n"
    if out_path:
        Path(out_path).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_steer(args) -> int:
    try:
        source, noise = _source_noise(args)
        settings = _settings(args)
        if (args.R is None) == (args.R_sweep is None):
            raise CliError("exactly one of --R or --R-sweep is required")
        if args.R is not None and not 0.0 <= args.R <= 1.0:
            raise CliError(f"--R must be in [0, 1], got {args.R}")
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    rs = [args.R] if args.R is not None else _parse_sweep_spec(args.R_sweep)
    rows = list(_steer_rows(source, noise, settings, rs))
    _write_curve(rows, args.out)
    if args.R is not None:
        r, lhs, rhs, v = rows[0]
        print(f"violation at R={r:g}: {v:+.6f}", file=sys.stderr)
    return 0


def _cmd_sweep(args) -> int:
    try:
        source, noise = _source_noise(args)
        settings = _settings(args)
        grid = _parse_sweep_spec(args.grid)
        result = sweep_reflectivity(source, noise, settings, grid)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    rows = zip(result.reflectivities, result.lhs, result.rhs, result.violation)
    _write_curve(rows, args.out)
    summary = f"R_opt={result.r_opt:.4f} violation_opt={result.violation_opt:+.6f}"
    if result.r_max is not None:
        summary += f" R_max={result.r_max:.4f}"
    else:
        summary += " R_max=none"
    print(summary, file=sys.stderr)
    if args.plot:
        from .plots import save_sweep_figure

        out = Path(args.out).with_suffix(".png") if args.out else Path("sweep.png")
        save_sweep_figure(result, out)
    return 0


def _cmd_wigner(args) -> int:
    if args.points < 2 or args.extent <= 0:
        raise CliError("--grid must be >= 2 and --range positive")
    state = DensityMatrix.from_json_dict(json.loads(Path(args.state).read_text()))
    grid = wigner(state, points=args.points, extent=args.extent)
    lines = ["q,p,w"]
    lines += [f"{q:.9g},{p:.9g},{w:.12g}" for q, p, w in grid.long_rows()]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    print(
        f"min W = {grid.min():.6f}, grid integral = {grid.integral():.6f}",
        file=sys.stderr,
    )
    if args.plot:
        from .plots import save_wigner_figure

        out = Path(args.out).with_suffix(".png") if args.out else Path("wigner.png")
        save_wigner_figure(grid, out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="steerkit",
        description="Simulate and analyze a split-single-photon homodyne steering test.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    params = _param_parent()

    sim = sub.add_parser("simulate", parents=[params], help="run the honest protocol")
    sim.add_argument("--config", help="flat JSON config file")
    sim.add_argument("--R", type=float, default=None, help="beam splitter reflectivity")
    sim.add_argument("--samples", type=int, default=None, help="samples per setting")
    sim.add_argument("--paper-scale", action="store_true", help="use 200,000 samples per setting")
    sim.add_argument("--seed", type=int, default=None, help="master seed")
    sim.add_argument("--bootstrap", type=int, default=None, help="bootstrap resamples")
    sim.add_argument("--dim", type=int, default=DEFAULT_DIM, help="Fock truncation")
    sim.add_argument(
        "--phase-plan",
        choices=("uniform_scan", "fixed_list"),
        default="uniform_scan",
        help="Bob's phase scan plan",
    )
    sim.add_argument("--out", required=True, help="run directory to create")
    sim.add_argument("--plot", action=argparse.BooleanOptionalAction, default=True)
    sim.set_defaults(func=_cmd_simulate)

    adv = sub.add_parser("adversary", parents=[params], help="run a dishonest-Alice strategy")
    adv.add_argument("--strategy", required=True, choices=ADVERSARY_STRATEGIES)
    for flag, kw in (
        ("--config", {}),
        ("--R", {"type": float, "default": None}),
        ("--samples", {"type": int, "default": None}),
        ("--seed", {"type": int, "default": None}),
        ("--bootstrap", {"type": int, "default": None}),
    ):
        adv.add_argument(flag, **kw)
    adv.add_argument("--paper-scale", action="store_true")
    adv.add_argument("--dim", type=int, default=DEFAULT_DIM)
    adv.add_argument("--phase-plan", choices=("uniform_scan", "fixed_list"), default="uniform_scan")
    adv.add_argument("--out", default=None, help="optional run directory")
    adv.add_argument("--plot", action=argparse.BooleanOptionalAction, default=True)
    adv.set_defaults(func=_cmd_adversary)

    ana = sub.add_parser("analyze", help="re-run tomography + steering on a run directory")
    ana.add_argument("--in", dest="run_dir", required=True, help="run directory")
    ana.add_argument("--eta-B", type=float, default=None, help="override compensation efficiency")
    ana.add_argument("--bootstrap", type=int, default=None, help="override bootstrap resamples")
    ana.add_argument("--plot", action=argparse.BooleanOptionalAction, default=True)
    ana.set_defaults(func=_cmd_analyze)

    steer = sub.add_parser("steer", parents=[params], help="closed-form inequality sides")
    steer.add_argument("--analytic", action="store_true", default=True, help="(always on)")
    steer.add_argument("--R", type=float, default=None)
    steer.add_argument("--R-sweep", default=None, metavar="A:B:STEP")
    steer.add_argument("--out", default=None, help="write CSV here instead of stdout")
    steer.set_defaults(func=_cmd_steer)

    swp = sub.add_parser("sweep", parents=[params], help="violation curve + landmarks")
    swp.add_argument("--grid", default="0.01:0.99:0.01", metavar="A:B:STEP")
    swp.add_argument("--out", default=None, help="write CSV here instead of stdout")
    swp.add_argument("--plot", action=argparse.BooleanOptionalAction, default=True)
    swp.set_defaults(func=_cmd_sweep)

    wig = sub.add_parser("wigner", help="phase-space map of a stored state")
    wig.add_argument("--state", required=True, help="state JSON file")
    wig.add_argument("--grid", dest="points", type=int, default=101, help="grid points per axis")
    wig.add_argument("--range", dest="extent", type=float, default=5.0, help="axis half-width")
    wig.add_argument("--out", default=None, help="write CSV here instead of stdout")
    wig.add_argument("--plot", action=argparse.BooleanOptionalAction, default=False)
    wig.set_defaults(func=_cmd_wigner)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BrokenPipeError:
        return 1
    except Exception as exc:  # runtime failure: bad files, non-convergence, ...
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
