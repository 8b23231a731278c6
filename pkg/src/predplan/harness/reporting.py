"""Summaries of per-episode metrics files."""

from __future__ import annotations

from pathlib import Path

from .metrics import EpisodeMetrics
from .suite import PRESET_COLUMNS, _mean, read_episode_csv, write_episode_csv, write_table

SUMMARY_COLUMNS = PRESET_COLUMNS + ["episodes"] + EpisodeMetrics.field_names()


def summarize_records(records: list) -> list:
    """One row per preset (sorted by identifiers) with per-field means."""
    groups = {}
    for r in records:
        groups.setdefault(tuple(r[c] for c in PRESET_COLUMNS), []).append(r)
    rows = []
    for key in sorted(groups, key=lambda k: tuple(str(x) for x in k)):
        recs = groups[key]
        row = dict(zip(PRESET_COLUMNS, key))
        row["episodes"] = len(recs)
        for f in EpisodeMetrics.field_names():
            row[f] = _mean(float(r[f]) for r in recs)
        rows.append(row)
    return rows


def report(inputs, out_dir) -> tuple:
    """Read per-episode files, write ``summary.csv`` and ``episodes.csv``; returns their paths.

    Running the report on its own ``episodes.csv`` reproduces the same summary.
    """
    inputs = list(inputs)
    if not inputs:
        raise ValueError("report needs at least one metrics file")
    records = []
    for path in inputs:
        records.extend(read_episode_csv(path))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = out / "summary.csv"
    episodes = out / "episodes.csv"
    write_table(summary, summarize_records(records), SUMMARY_COLUMNS)
    write_episode_csv(episodes, records)
    return summary, episodes
