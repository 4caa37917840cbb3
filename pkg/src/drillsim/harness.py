"""Batch experiment runner: arms, profiles, seeding, and result files.

Arms toggle the two estimator features. Profiles bundle the world and
sensor parameters for the two study settings. Trial i of every arm uses
seed base_seed + i expanded into three independent streams (surface,
image, force), so arms are paired: same trial index, same world.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .control import ControlConfig, RunOutcome, TrialConfig, run_trial
from .sensors import ForceSensorConfig, ImageSensorConfig
from .shell import SurfaceConfig, dump_surface_csv
from .spline import TrajectoryState

ARMS = ("baseline", "force", "plane", "full")

# (use_plane_fit, use_force) per arm
_ARM_FLAGS = {
    "baseline": (False, False),
    "force": (False, True),
    "plane": (True, False),
    "full": (True, True),
}

PROFILES = ("egg", "mouse")

_PROFILE_IMAGE = {
    "egg": {"target_mape": 15.05},
    "mouse": {"target_mape": 24.32},
}
_PROFILE_FORCE = {
    "egg": {"a": -7.94, "b": 81.43},
    "mouse": {"a": -7.07, "b": 74.01},
}
_PROFILE_SURFACE = {
    "egg": {"tau_nominal": 350e-6, "tau_variation": 0.12},
    "mouse": {"tau_nominal": 300e-6, "tau_variation": 0.30},
}


class ConfigError(ValueError):
    """Raised for malformed or unknown configuration input."""


@dataclass(frozen=True)
class ExperimentConfig:
    """One batch: which arm, which world profile, how many trials."""

    arm: str = "full"
    profile: str = "egg"
    trials: int = 10
    seed: int = 0
    out_dir: str = "results"
    ablation: bool = False
    dump_surface: bool = False
    dump_traces: bool = False
    trial: TrialConfig = TrialConfig()

    def validate(self) -> None:
        if self.arm not in ARMS:
            raise ConfigError(f"unknown arm {self.arm!r}; expected one of {ARMS}")
        if self.profile not in PROFILES:
            raise ConfigError(
                f"unknown profile {self.profile!r}; expected one of {PROFILES}"
            )
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")


def trial_config_for(base: TrialConfig, arm: str, profile: str) -> TrialConfig:
    """Apply arm feature flags and profile parameters to a base config."""
    if arm not in _ARM_FLAGS:
        raise ConfigError(f"unknown arm {arm!r}; expected one of {ARMS}")
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}; expected one of {PROFILES}")
    use_plane, use_force = _ARM_FLAGS[arm]
    return TrialConfig(
        control=replace(base.control, use_plane_fit=use_plane, use_force=use_force),
        surface=replace(base.surface, **_PROFILE_SURFACE[profile]),
        image=replace(base.image, **_PROFILE_IMAGE[profile]),
        force=replace(base.force, **_PROFILE_FORCE[profile]),
    )


def trial_seeds(base_seed: int, index: int) -> tuple:
    """Three child seeds (surface, image, force) for one trial index."""
    surface_ss, image_ss, force_ss = np.random.SeedSequence(
        base_seed + index
    ).spawn(3)
    return surface_ss, image_ss, force_ss


@dataclass
class TrialRecord:
    trial: int
    arm: str
    classification: str
    time_min: float
    seed: int
    outcome: RunOutcome


@dataclass
class BatchSummary:
    arm: str
    profile: str
    trials: int
    seed: int
    counts: dict
    rates_percent: dict
    mean_time_successful_min: float | None

    def to_dict(self) -> dict:
        return {
            "arm": self.arm,
            "profile": self.profile,
            "trials": self.trials,
            "seed": self.seed,
            "counts": self.counts,
            "rates_percent": self.rates_percent,
            "mean_time_successful_min": self.mean_time_successful_min,
        }


def summarize(records: Sequence[TrialRecord], arm: str, profile: str, seed: int) -> BatchSummary:
    from .control import CLASSIFICATIONS

    counts = {name: 0 for name in CLASSIFICATIONS}
    for rec in records:
        counts[rec.classification] += 1
    total = len(records)
    rates = {name: 100.0 * counts[name] / total for name in counts}
    success_times = [
        rec.time_min for rec in records if rec.classification == "Success"
    ]
    mean_time = (
        float(np.mean(success_times)) if success_times else None
    )
    return BatchSummary(
        arm=arm,
        profile=profile,
        trials=total,
        seed=seed,
        counts=counts,
        rates_percent=rates,
        mean_time_successful_min=mean_time,
    )


def run_batch(config: ExperimentConfig, arm: str | None = None) -> list[TrialRecord]:
    """Run all trials of one arm sequentially. Deterministic in the seed."""
    config.validate()
    arm = config.arm if arm is None else arm
    trial_cfg = trial_config_for(config.trial, arm, config.profile)
    records = []
    for i in range(config.trials):
        surface_ss, image_ss, force_ss = trial_seeds(config.seed, i)
        outcome = run_trial(trial_cfg, surface_ss, image_ss, force_ss)
        records.append(
            TrialRecord(
                trial=i,
                arm=arm,
                classification=outcome.classification,
                time_min=outcome.drilling_time_min,
                seed=config.seed + i,
                outcome=outcome,
            )
        )
    return records


def run_ablation(config: ExperimentConfig) -> dict[str, list[TrialRecord]]:
    """All four arms on the same per-trial worlds and sensor streams."""
    return {arm: run_batch(config, arm=arm) for arm in ARMS}


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_trials_csv(path: str, records: Iterable[TrialRecord]) -> None:
    lines = ["trial,arm,classification,time_min,seed\n"]
    for rec in records:
        lines.append(
            f"{rec.trial},{rec.arm},{rec.classification},"
            f"{rec.time_min:.6f},{rec.seed}\n"
        )
    _atomic_write(path, "".join(lines))


def write_summary_json(path: str, summaries: Sequence[BatchSummary]) -> None:
    payload = {summ.arm: summ.to_dict() for summ in summaries}
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def run_experiment(config: ExperimentConfig) -> dict:
    """Run the configured experiment and write result files under out_dir.

    Returns a dict with the records per arm and the paths written.
    """
    config.validate()
    os.makedirs(config.out_dir, exist_ok=True)

    if config.ablation:
        per_arm = run_ablation(config)
    else:
        per_arm = {config.arm: run_batch(config)}

    all_records: list[TrialRecord] = []
    summaries: list[BatchSummary] = []
    for arm in (ARMS if config.ablation else (config.arm,)):
        records = per_arm[arm]
        all_records.extend(records)
        summaries.append(summarize(records, arm, config.profile, config.seed))

    trials_path = os.path.join(config.out_dir, "trials.csv")
    summary_path = os.path.join(config.out_dir, "summary.json")
    write_trials_csv(trials_path, all_records)
    write_summary_json(summary_path, summaries)

    written = [trials_path, summary_path]
    if config.dump_traces:
        for rec in all_records:
            trace_path = os.path.join(
                config.out_dir, f"trace_{rec.arm}_{rec.trial:04d}.csv"
            )
            rec.outcome.trace.to_csv(trace_path)
            written.append(trace_path)
    if config.dump_surface:
        n = config.trial.control.n
        d = config.trial.control.d
        trajectory = TrajectoryState.circle(n, d, 0.0)
        seen = set()
        for rec in all_records:
            if rec.trial in seen:
                continue
            seen.add(rec.trial)
            surf_path = os.path.join(
                config.out_dir, f"surface_{rec.trial:04d}.csv"
            )
            dump_surface_csv(rec.outcome.surface, trajectory, surf_path)
            written.append(surf_path)

    return {"records": per_arm, "summaries": summaries, "paths": written}


_CONFIG_KEYS = {
    "arm",
    "profile",
    "trials",
    "seed",
    "out_dir",
    "ablation",
    "dump_surface",
    "dump_traces",
    "control",
    "surface",
    "image",
    "force",
}


def _build_section(cls, data: dict, section: str):
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"bad {section} section: {exc}") from None


def load_config(path: str | None, overrides: dict | None = None) -> ExperimentConfig:
    """Build an ExperimentConfig from an optional JSON file plus overrides.

    Unknown keys anywhere in the file are an error so typos fail loudly.
    Overrides (from the command line) win over file values.
    """
    data: dict = {}
    if path is not None:
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"invalid JSON in {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    control = _build_section(ControlConfig, data.get("control", {}), "control")
    surface = _build_section(SurfaceConfig, data.get("surface", {}), "surface")
    image = _build_section(ImageSensorConfig, data.get("image", {}), "image")
    force = _build_section(ForceSensorConfig, data.get("force", {}), "force")
    surface_cfg = surface
    surface_cfg.validate()
    image.validate()
    force.validate()

    kwargs = {
        key: data[key]
        for key in (
            "arm",
            "profile",
            "trials",
            "seed",
            "out_dir",
            "ablation",
            "dump_surface",
            "dump_traces",
        )
        if key in data
    }
    if overrides:
        kwargs.update({k: v for k, v in overrides.items() if v is not None})
    config = ExperimentConfig(
        trial=TrialConfig(
            control=control, surface=surface_cfg, image=image, force=force
        ),
        **kwargs,
    )
    config.validate()
    return config
