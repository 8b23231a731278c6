"""Benchmark suites: episodes per seed, per-episode records and aggregates."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ParseError
from ..ppotrain import ObsConfig, run_episodes
from .config import BenchmarkPreset
from .metrics import EpisodeMetrics, EpisodeResult

PRESET_COLUMNS = ["preset", "town", "density", "behavior", "obs_noise"]
EPISODE_COLUMNS = PRESET_COLUMNS + ["seed", "episode", "termination"] + EpisodeMetrics.field_names()
INT_FIELDS = {"end_reach", "success", "lights_met", "lights_passed", "route_deviations", "seed", "episode", "seeds", "episodes"}


@dataclass
class EpisodeRow:
    preset: BenchmarkPreset
    seed: int
    episode: int
    result: EpisodeResult

    def as_record(self) -> dict:
        p = self.preset
        rec = {
            "preset": p.name,
            "town": p.town,
            "density": p.density,
            "behavior": p.behavior,
            "obs_noise": float(p.obs_noise),
            "seed": self.seed,
            "episode": self.episode,
            "termination": self.result.termination,
        }
        rec.update(self.result.metrics.as_dict())
        return rec


@dataclass
class SuiteResult:
    preset: BenchmarkPreset
    rows: list
    aggregate: dict


def _mean(values) -> float:
    values = list(values)
    return math.fsum(values) / len(values) if values else 0.0


def aggregate_records(records: list) -> dict:
    """Means over all episodes and the std of per-seed means, per metric.

    Exactly rounded sums make the result independent of episode order.
    """
    if not records:
        raise ValueError("cannot aggregate an empty suite")
    first = records[0]
    out = {c: first[c] for c in PRESET_COLUMNS}
    seeds = sorted({r["seed"] for r in records})
    out["seeds"] = len(seeds)
    out["episodes"] = len(records)
    for f in EpisodeMetrics.field_names():
        out[f"{f}_mean"] = _mean(float(r[f]) for r in records)
        per_seed = [_mean(float(r[f]) for r in records if r["seed"] == s) for s in seeds]
        mu = _mean(per_seed)
        out[f"{f}_std"] = math.sqrt(_mean((x - mu) ** 2 for x in per_seed))
    return out


def run_suite(driver, preset: BenchmarkPreset, obs: ObsConfig, predictor=None, multipliers=None, parallel: int = 8) -> SuiteResult:
    """Evaluate ``driver`` (Policy or world -> command callable) on every seed of a preset."""
    preset.validate()
    rows = []
    for seed in preset.seeds:
        results = run_episodes(
            driver, preset.episode_config(seed), obs, predictor, preset.episodes, seed=seed, parallel=parallel, multipliers=multipliers
        )
        rows.extend(EpisodeRow(preset, int(seed), k, r) for k, r in enumerate(results))
    return SuiteResult(preset, rows, aggregate_records([r.as_record() for r in rows]))


def _fmt(name, value, ints=INT_FIELDS) -> str:
    if name in ints:
        return str(int(value))
    if isinstance(value, str):
        return value
    return f"{float(value):.6f}"


def write_episode_csv(path, records: list) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(EPISODE_COLUMNS)
        for r in records:
            w.writerow([_fmt(c, r[c]) for c in EPISODE_COLUMNS])


def write_table(path, rows: list, columns: list, ints=frozenset({"seeds", "episodes"})) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(c, r[c], ints) if c in r else "" for c in columns])


def aggregate_columns() -> list:
    cols = PRESET_COLUMNS + ["seeds", "episodes"]
    for f in EpisodeMetrics.field_names():
        cols += [f"{f}_mean", f"{f}_std"]
    return cols


def read_episode_csv(path) -> list:
    """Parse a per-episode metrics file; malformed content raises ParseError with its line."""
    path = Path(path)
    records = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty metrics file", path, 1) from None
        if header != EPISODE_COLUMNS:
            raise ParseError(f"unexpected header; expected {','.join(EPISODE_COLUMNS)}", path, 1)
        for line, row in enumerate(reader, start=2):
            if len(row) != len(EPISODE_COLUMNS):
                raise ParseError(f"expected {len(EPISODE_COLUMNS)} fields, got {len(row)}", path, line)
            rec = {}
            for c, v in zip(EPISODE_COLUMNS, row):
                if c in ("preset", "town", "density", "behavior", "termination"):
                    rec[c] = v
                    continue
                try:
                    rec[c] = int(v) if c in INT_FIELDS else float(v)
                except ValueError:
                    raise ParseError(f"column {c!r}: cannot parse {v!r} as a number", path, line) from None
                if c not in INT_FIELDS and not np.isfinite(rec[c]):
                    raise ParseError(f"column {c!r}: non-finite value {v!r}", path, line)
            records.append(rec)
    return records
