"""Benchmarking the scripted autopilot across traffic densities, then summarizing.

Run: python demos/04_benchmark_report.py [out_dir]
Uses the CLI entry point the same way a shell script would.
"""
# %%
import csv
import sys
from pathlib import Path

from predplan.harness import main

out = Path(sys.argv[1] if len(sys.argv) > 1 else "benchmark_demo")

# %% A small config: one seed, two episodes per preset keeps this to a few minutes.
cfg = out / "small.yaml"
out.mkdir(parents=True, exist_ok=True)
cfg.write_text(
    "presets:\n"
    "  small-empty: {town: urban, density: empty, episodes: 2, seeds: [0]}\n"
    "  small-regular: {town: urban, density: regular, episodes: 2, seeds: [0]}\n"
    "  small-noise: {town: urban, density: regular, obs_noise: 0.5, episodes: 2, seeds: [0]}\n"
)

runs = []
for preset in ("small-empty", "small-regular", "small-noise"):
    d = out / preset
    code = main(["eval", "--policy", "autopilot", "--preset", preset, "--config", str(cfg), "--out", str(d)])
    assert code == 0, f"eval failed with exit code {code}"
    runs.append(str(d / "episodes.csv"))

# %% The report step merges per-episode files and groups them by preset.
main(["report", "--in", *runs, "--out", str(out / "report")])
with open(out / "report" / "summary.csv") as fh:
    rows = list(csv.DictReader(fh))
cols = ["preset", "episodes", "success", "route_completion", "driving_score", "vehicle_crash_per_km"]
print(" ".join(f"{c[:14]:>14s}" for c in cols))
for r in rows:
    print(" ".join(f"{r.get(c, '-')[:14]:>14s}" for c in cols))
