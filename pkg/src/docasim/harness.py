"""Sweep execution behind the command line: manifests, presets, report rows."""

from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .config import CONFIG_KEYS, config_from_dict, fingerprint, parse_config
from .model import ConfigError, ScenarioConfig, SpeedModel
from .reservation import reservation_sweep
from .sim import INDICATORS, run_scenario

REPORT_VERSION = "docasim-report/1"

# reservation axis aliases -> canonical name
RESERVE_AXES = {
    "l": "l", "doca_length_m": "l",
    "gamma": "gamma", "vehicle_density_per_m": "gamma",
    "rel_target": "rel_target", "target_reliability": "rel_target",
    "d": "d", "interference_range_m": "d",
    "lambda_adhoc": "lambda_adhoc", "adhoc_rate_per_vehicle_per_m": "lambda_adhoc",
}
DEFAULT_GAMMAS = (0.02, 0.05, 0.1, 0.2)
DEFAULT_TARGETS = (0.9, 0.99, 0.999)


@dataclass
class RunManifest:
    config_path: Optional[str] = None
    seeds: Optional[list] = None
    axes: dict = field(default_factory=dict)
    out_dir: str = "."
    fmt: str = "csv"
    layout: str = "wide"
    jobs: int = 1

    def __post_init__(self):
        if self.seeds is not None and len(self.seeds) == 0:
            raise ConfigError("seeds", "seed list must not be empty")
        for key, values in self.axes.items():
            if len(values) == 0:
                raise ConfigError(key, "empty sweep axis")
        if self.fmt not in ("csv", "json"):
            raise ConfigError("format", f"unknown format {self.fmt!r}")
        if self.layout not in ("wide", "long"):
            raise ConfigError("layout", f"unknown layout {self.layout!r}")


def parse_seeds(text: str) -> list[int]:
    """``"1-20"``, ``"3,5,7"`` or a mix such as ``"1-3,10"``."""
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        lo, sep, hi = part.partition("-")
        try:
            if sep:
                seeds.extend(range(int(lo), int(hi) + 1))
            else:
                seeds.append(int(part))
        except ValueError:
            raise ConfigError("seeds", f"cannot parse {part!r}") from None
    if not seeds:
        raise ConfigError("seeds", "seed list must not be empty")
    return seeds


def parse_sweep(items: Sequence[str]) -> dict:
    axes: dict = {}
    for item in items:
        key, sep, values = item.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError("sweep", f"expected KEY=V1,V2,..., got {item!r}")
        vals = [v.strip() for v in values.split(",") if v.strip()]
        if not vals:
            raise ConfigError(key, "empty sweep axis")
        axes[key] = vals
    return axes


def _label(value):
    if isinstance(value, SpeedModel):
        return value.label()
    return value


# ---------------------------------------------------------------------------
# reservation tables

def reservation_rows(manifest: RunManifest, base: Optional[ScenarioConfig] = None) -> list[dict]:
    base = base or parse_config(manifest.config_path)
    axes: dict = {}
    for key, values in manifest.axes.items():
        if key not in RESERVE_AXES:
            raise ConfigError(key, "not a reservation axis (use l, gamma, rel_target, d, lambda_adhoc)")
        try:
            axes[RESERVE_AXES[key]] = [float(v) for v in values]
        except ValueError as exc:
            raise ConfigError(key, str(exc)) from None
    l_values = axes.get("l", [base.doca_length_m])
    gammas = axes.get("gamma", list(DEFAULT_GAMMAS))
    targets = axes.get("rel_target", list(DEFAULT_TARGETS))
    for t in targets:
        if not 0 < t < 1:
            raise ConfigError("rel_target", f"must lie in (0, 1), got {t}")
    rows = []
    for d in axes.get("d", [base.interference_range_m]):
        for lam_adhoc in axes.get("lambda_adhoc", [base.adhoc_rate_per_vehicle_per_m]):
            rows.extend(r.as_dict() for r in reservation_sweep(l_values, gammas, targets, d, lam_adhoc))
    return rows


# ---------------------------------------------------------------------------
# scenario sweeps

def expand_configs(base: ScenarioConfig, axes: dict) -> list[tuple[dict, ScenarioConfig]]:
    """Cartesian product of the sweep axes over ``base``, in input order."""
    for key in axes:
        if key not in CONFIG_KEYS:
            raise ConfigError(key, "unknown sweep key")
        if key == "message_period_choices":
            raise ConfigError(key, "list-valued field cannot be swept")
    keys = list(axes)
    out = []
    for combo in itertools.product(*(axes[k] for k in keys)):
        cfg = config_from_dict(dict(zip(keys, combo)), base)
        labels = {k: _label(getattr(cfg, k)) for k in keys}
        out.append((labels, cfg))
    return out


def _run_one(args):
    cfg, seed = args
    return run_scenario(cfg, seed)


def simulation_rows(manifest: RunManifest, base: Optional[ScenarioConfig] = None) -> list[dict]:
    base = base or parse_config(manifest.config_path)
    grid = expand_configs(base, manifest.axes)
    seeds = manifest.seeds or [base.rng_seed]
    tasks = [(cfg, seed) for _, cfg in grid for seed in seeds]
    if manifest.jobs > 1:
        with ProcessPoolExecutor(max_workers=manifest.jobs) as pool:
            results = list(pool.map(_run_one, tasks))
    else:
        results = [_run_one(t) for t in tasks]
    rows = []
    it = iter(results)
    for labels, cfg in grid:
        fp = fingerprint(cfg)
        for seed in seeds:
            main, twin = next(it)
            head = {"fingerprint": fp, "seed": seed, **labels}
            if manifest.layout == "wide":
                row = dict(head)
                row.update(main.as_dict())
                row.update({f"twin_{k}": v for k, v in twin.as_dict().items()})
                rows.append(row)
            else:
                for run, report in (("main", main), ("twin", twin)):
                    values = report.indicators()
                    for name in INDICATORS:
                        rows.append({**head, "run": run, "indicator": name, "value": values[name]})
    return rows


# ---------------------------------------------------------------------------
# figure presets

FIG3_AXES = {
    "l": [str(50 * i) for i in range(1, 21)],
    "gamma": ["0.02", "0.05", "0.1", "0.15", "0.2"],
    "rel_target": ["0.9", "0.99", "0.999", "0.99999"],
}
FIG4_AXES = {
    "actual_speed_model": ["constant:30"],
    "predicted_speed_model": ["constant:5", "constant:15", "constant:30", "constant:35", "constant:45",
                              "uniform:5-15", "uniform:15-25", "uniform:25-35", "uniform:35-45",
                              "uniform:45-55"],
}
FIG5_AXES = {
    "actual_speed_model": ["uniform:20-30"],
    "predicted_speed_model": ["constant:5", "constant:15", "constant:25", "constant:35", "constant:45",
                              "uniform:5-15", "uniform:20-30", "uniform:25-35", "uniform:35-45",
                              "uniform:45-55"],
}
FIGURES = {"fig3": FIG3_AXES, "fig4": FIG4_AXES, "fig5": FIG5_AXES}
DEFAULT_FIGURE_SEEDS = list(range(1, 21))


def figure_manifest(name: str, manifest: RunManifest) -> RunManifest:
    """The preset grid for ``name`` layered over the user's config, seeds and output options."""
    if name not in FIGURES:
        raise ConfigError("figure", f"unknown figure {name!r} (choose from {', '.join(FIGURES)})")
    return RunManifest(
        config_path=manifest.config_path,
        seeds=manifest.seeds or list(DEFAULT_FIGURE_SEEDS),
        axes={k: list(v) for k, v in FIGURES[name].items()},
        out_dir=manifest.out_dir,
        fmt=manifest.fmt,
        layout="long",
        jobs=manifest.jobs,
    )


def figure_rows(name: str, manifest: RunManifest) -> list[dict]:
    preset = figure_manifest(name, manifest)
    if name == "fig3":
        return reservation_rows(preset)
    return simulation_rows(preset)


def output_path(manifest: RunManifest, stem: str) -> Path:
    return Path(manifest.out_dir) / f"{stem}.{manifest.fmt}"
