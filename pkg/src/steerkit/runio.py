"""Run-directory persistence: delimited records, state and report JSON.

Layout of a run directory:

    config.json   flat run configuration (schema-versioned)
    alice.csv     QuadratureRecord columns for party A
    bob.csv       QuadratureRecord columns for party B
    states/       reconstructed states as {"dim", "re", "im"} JSON
    report.json   steering report + tomography metadata + provenance

Record floats are written with 9 significant digits; the in-memory arrays
are canonicalized to the same decimals at generation time, so reading a run
back reproduces every derived number exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pandas as pd

from .experiment import ExperimentConfig, RecordSet, RunArtifacts
from .fock import DensityMatrix
from .steering import SteeringReport

RECORD_COLUMNS = ["party", "setting_index", "lo_phase_rad", "x", "s", "trial_id"]


def write_records(path, records: RecordSet) -> None:
    df = pd.DataFrame(
        {
            "party": np.repeat(records.party, len(records)),
            "setting_index": records.setting_index,
            "lo_phase_rad": records.lo_phase,
            "x": records.x,
            "s": records.s,
            "trial_id": records.trial_id,
        }
    )
    df.to_csv(path, index=False, float_format="%.9g")


def read_records(path) -> RecordSet:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"missing record file {path}")
    df = pd.read_csv(path)
    if list(df.columns) != RECORD_COLUMNS:
        raise ValueError(
            f"{path} has columns {list(df.columns)}, expected {RECORD_COLUMNS}"
        )
    if df.isna().any().any():
        raise ValueError(f"{path} is truncated or malformed (missing values)")
    parties = df["party"].unique()
    if len(parties) != 1:
        raise ValueError(f"{path} mixes parties {list(parties)}")
    return RecordSet(
        party=str(parties[0]),
        setting_index=df["setting_index"].to_numpy(np.int64),
        lo_phase=df["lo_phase_rad"].to_numpy(float),
        x=df["x"].to_numpy(float),
        s=df["s"].to_numpy(np.int64),
        trial_id=df["trial_id"].to_numpy(np.int64),
    )


def _dump_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _load_json(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"missing file {path}")
    return json.loads(path.read_text())


def write_state(path, state: DensityMatrix) -> None:
    _dump_json(path, state.to_json_dict())


def read_state(path) -> DensityMatrix:
    return DensityMatrix.from_json_dict(_load_json(path))


def _cell_filename(j: int, s: int) -> str:
    return f"conditioned_{j}_{'plus' if s > 0 else 'minus'}.json"


def persist(artifacts: RunArtifacts, run_dir) -> Path:
    """Write a complete run directory; returns its path."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    _dump_json(run_dir / "config.json", artifacts.config.to_json_dict())
    write_records(run_dir / "alice.csv", artifacts.alice)
    write_records(run_dir / "bob.csv", artifacts.bob)
    states_dir = run_dir / "states"
    states_dir.mkdir(exist_ok=True)
    for (j, s), state in sorted(artifacts.reconstructed_states.items()):
        if state is not None:
            write_state(states_dir / _cell_filename(j, s), state)
    write_state(states_dir / "unconditioned.json", artifacts.unconditioned_state)
    _dump_json(
        run_dir / "report.json",
        {
            **artifacts.report.to_json_dict(),
            "tomography": artifacts.tomography_info,
            "provenance": artifacts.provenance,
        },
    )
    return run_dir


def read_config(run_dir) -> ExperimentConfig:
    return ExperimentConfig.from_json_dict(_load_json(Path(run_dir) / "config.json"))


def load(run_dir) -> RunArtifacts:
    """Read a run directory back into RunArtifacts (stored values, no recompute)."""
    run_dir = Path(run_dir)
    config = read_config(run_dir)
    alice = read_records(run_dir / "alice.csv")
    bob = read_records(run_dir / "bob.csv")
    report_payload = _load_json(run_dir / "report.json")
    report = SteeringReport.from_json_dict(report_payload)
    states = {}
    for j in range(config.settings.n):
        for s in (+1, -1):
            path = run_dir / "states" / _cell_filename(j, s)
            states[(j, s)] = read_state(path) if path.exists() else None
    unconditioned = read_state(run_dir / "states" / "unconditioned.json")
    return RunArtifacts(
        config=config,
        alice=alice,
        bob=bob,
        reconstructed_states=states,
        unconditioned_state=unconditioned,
        report=report,
        tomography_info=report_payload.get("tomography", {}),
        provenance=report_payload.get("provenance", {}),
    )
