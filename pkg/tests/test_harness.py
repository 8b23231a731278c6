import csv
import itertools

import numpy as np
import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from predplan.agentnet import NetConfig
from predplan.errors import ConfigError, ParseError
from predplan.harness import (
    BUILTIN_PRESETS,
    DEFAULT_PENALTIES,
    BenchmarkPreset,
    EpisodeMetrics,
    aggregate_records,
    collect_dataset,
    config_from_dict,
    driving_score,
    load_config,
    penalty_factor,
    read_episode_csv,
    report,
    run_suite,
    write_episode_csv,
)
from predplan.harness.cli import main
from predplan.harness.config import CollectConfig, config_to_dict
from predplan.harness.pipeline import run_eval
from predplan.harness.suite import EPISODE_COLUMNS
from predplan.ppotrain import ObsConfig, Policy
from predplan.simworld import roaming_policy
from predplan.stgraph.corpus import read_records

OBS = ObsConfig(raster=16, resolution=1.5, use_prediction=False)
NET = NetConfig(raster=16, channels=(21, 3, 4, 4, 4, 4, 6), feature=12)
INFRACTIONS = list(DEFAULT_PENALTIES)

counts = st.dictionaries(st.sampled_from(INFRACTIONS), st.integers(0, 4))


# -- score arithmetic ---------------------------------------------------------


def test_penalty_examples():
    assert penalty_factor({}) == 1.0
    assert penalty_factor({"walker_crash": 1}) == 0.5
    assert penalty_factor({"vehicle_crash": 1, "red_light": 1}) == pytest.approx(0.42, abs=1e-15)


def test_penalty_rejects_negative_counts():
    with pytest.raises(ValueError):
        penalty_factor({"red_light": -1})


def test_driving_score_examples():
    assert driving_score(1.0, 0.976) == 0.976
    assert abs(driving_score(0.984, 0.992) - 0.976) <= 2e-3
    assert driving_score(0.0, 0.3) == 0.0
    assert driving_score(1.5, -0.2) == 0.0


@given(counts, counts)
def test_penalty_multiplicative(a, b):
    merged = {k: a.get(k, 0) + b.get(k, 0) for k in INFRACTIONS}
    assert penalty_factor(merged) == pytest.approx(penalty_factor(a) * penalty_factor(b), rel=1e-12)


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_driving_score_monotone(r, p, dx):
    assert driving_score(min(r + dx, 1.0), p) >= driving_score(r, p)
    assert driving_score(r, min(p + dx, 1.0)) >= driving_score(r, p)


def test_metrics_invariants():
    base = dict(
        end_reach=0, success=0, route_completion=0.5, penalty_factor=1.0, driving_score=0.5,
        layout_crash_per_km=0.0, walker_crash_per_km=0.0, vehicle_crash_per_km=0.0,
        vehicle_halt_per_km=0.0, lights_met=2, lights_passed=1,
    )
    EpisodeMetrics(**base)
    with pytest.raises(ValueError):
        EpisodeMetrics(**{**base, "success": 1})
    with pytest.raises(ValueError):
        EpisodeMetrics(**{**base, "lights_passed": 3})


# -- presets and configuration --------------------------------------------------


def test_presets_validate():
    for p in BUILTIN_PRESETS.values():
        p.validate()
    with pytest.raises(ConfigError):
        BenchmarkPreset("x", episodes=0).validate()
    with pytest.raises(ConfigError):
        BenchmarkPreset("x", seeds=(1, 1)).validate()
    with pytest.raises(ConfigError):
        BenchmarkPreset("x", density="packed").validate()


def test_config_round_trip(tmp_path):
    cfg = load_config(None)
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump(config_to_dict(cfg)))
    assert config_to_dict(load_config(path)) == config_to_dict(cfg)


def test_config_rejects_unknown_keys(tmp_path):
    with pytest.raises(ConfigError):
        config_from_dict({"ppo": {"clip_eps": 0.3}})
    with pytest.raises(ConfigError):
        config_from_dict({"sed": 1})
    with pytest.raises(ConfigError):
        config_from_dict({"penalties": {"speeding": 0.9}})
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")


def test_config_network_follows_observation_raster():
    cfg = config_from_dict({"observation": {"raster": 32}})
    assert cfg.network.raster == 32
    with pytest.raises(ConfigError):
        config_from_dict({"observation": {"raster": 32}, "network": {"raster": 16}})


# -- suites ------------------------------------------------------------------------

TINY = BenchmarkPreset("tiny", town="straight", density="empty", episodes=3, seeds=(0, 1), max_steps=150)


@pytest.fixture(scope="module")
def autopilot_suite():
    return run_suite(roaming_policy, TINY, OBS)


def test_suite_counts(autopilot_suite):
    assert len(autopilot_suite.rows) == 6
    assert autopilot_suite.aggregate["episodes"] == 6
    assert autopilot_suite.aggregate["seeds"] == 2


def test_autopilot_solves_empty_preset():
    preset = BenchmarkPreset("empty", town="straight", density="empty", episodes=4, seeds=(3, 4), max_steps=600)
    res = run_suite(roaming_policy, preset, OBS)
    assert res.aggregate["success_mean"] == 1.0


def test_suite_deterministic(autopilot_suite):
    again = run_suite(roaming_policy, TINY, OBS)
    assert again.aggregate == autopilot_suite.aggregate


def test_every_episode_has_one_termination(autopilot_suite):
    for r in autopilot_suite.rows:
        assert isinstance(r.result.termination, str) and r.result.termination


def _records(n, seed):
    rng = np.random.default_rng(seed)
    out = []
    for k in range(n):
        rec = {c: 0.0 for c in EPISODE_COLUMNS}
        rec.update(preset="p", town="urban", density="regular", behavior="normal", obs_noise=0.0, termination="max-steps")
        rec.update(seed=int(k % 3), episode=k)
        for f in ("route_completion", "penalty_factor", "vehicle_crash_per_km", "episode_return"):
            rec[f] = float(rng.uniform(0, 1) * 10.0 ** rng.integers(-8, 4))
        rec["success"] = int(rng.integers(2))
        out.append(rec)
    return out


@settings(max_examples=30)
@given(st.integers(0, 10_000), st.randoms(use_true_random=False))
def test_aggregation_permutation_invariant(seed, rnd):
    recs = _records(12, seed)
    shuffled = list(recs)
    rnd.shuffle(shuffled)
    assert aggregate_records(shuffled) == aggregate_records(recs)


def test_checkpoint_layout_mismatch_is_config_error(tmp_path):
    pol = Policy.create(NET, OBS, np.random.default_rng(0))
    pol.save(tmp_path / "p.ckpt", 0)
    cfg = config_from_dict(
        {
            "observation": {"raster": 16, "resolution": 1.0, "use_prediction": False},
            "network": {"channels": [21, 3, 4, 4, 4, 4, 6], "feature": 12},
            "presets": {"tiny": {"town": "straight", "density": "empty", "episodes": 1, "seeds": [0]}},
        }
    )
    with pytest.raises(ConfigError):
        run_eval(cfg, str(tmp_path / "p.ckpt"), None, "tiny", tmp_path / "out", use_prediction=False)


# -- dataset ------------------------------------------------------------------------


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("ds")
    cfg = CollectConfig(vehicles=2, pedestrians=3, max_steps=400, sensor_range=1e9)
    return collect_dataset("intersection", 1, 0, out, cfg)


def test_dataset_counts(dataset):
    rows = read_records(dataset["vehicle"])
    ticks = sorted({r[1] for r in rows})
    assert len(rows) == 2 * len(ticks)
    assert ticks == list(range(0, 4 * len(ticks), 4))


def test_dataset_partition(dataset):
    assert all(r[3] == "vehicle" for r in read_records(dataset["vehicle"]))
    peds = read_records(dataset["pedestrian"])
    assert peds and all(r[3] == "pedestrian" for r in peds)


def test_dataset_sample_spacing(dataset):
    rows = read_records(dataset["vehicle"]) + read_records(dataset["pedestrian"])
    by_agent = {}
    for _, t, aid, *_ in rows:
        by_agent.setdefault(aid, []).append(t)
    for ts in by_agent.values():
        assert all(b - a == 4 for a, b in zip(ts, ts[1:]))


def test_dataset_excludes_ego(dataset):
    ids = {r[2] for r in read_records(dataset["vehicle"])}
    assert 0 not in ids


def test_dataset_write_failure_cleans_up(tmp_path, monkeypatch):
    import predplan.harness.dataset as ds

    def broken(path, rows, append=False):
        raise OSError("disk full")

    monkeypatch.setattr(ds, "write_records", broken)
    with pytest.raises(OSError):
        collect_dataset("straight", 1, 0, tmp_path, CollectConfig(vehicles=0, pedestrians=0, max_steps=8))
    assert list(tmp_path.iterdir()) == []


# -- report ---------------------------------------------------------------------------


def _write(path, recs):
    write_episode_csv(path, recs)
    return path


def test_report_one_episode(tmp_path):
    summary, _ = report([_write(tmp_path / "a.csv", _records(1, 0))], tmp_path / "out")
    assert len(summary.read_text().splitlines()) == 2


def test_report_success_rate(tmp_path):
    recs = _records(4, 0)
    for r, s in zip(recs, (1, 0, 1, 1)):
        r["success"] = s
        r["end_reach"] = s
    summary, _ = report([_write(tmp_path / "a.csv", recs)], tmp_path / "out")
    row = next(csv.DictReader(open(summary)))
    assert row["success"] == "0.750000"
    assert row["episodes"] == "4"


def test_report_idempotent(tmp_path):
    s1, e1 = report([_write(tmp_path / "a.csv", _records(7, 1)), _write(tmp_path / "b.csv", _records(5, 2))], tmp_path / "o1")
    s2, e2 = report([e1], tmp_path / "o2")
    assert s1.read_bytes() == s2.read_bytes()
    assert e1.read_bytes() == e2.read_bytes()


def test_report_columns(tmp_path):
    summary, _ = report([_write(tmp_path / "a.csv", _records(2, 0))], tmp_path / "out")
    header = summary.read_text().splitlines()[0].split(",")
    assert header[5:] == ["episodes"] + EpisodeMetrics.field_names()


def test_report_parse_error_line(tmp_path):
    path = _write(tmp_path / "a.csv", _records(3, 0))
    lines = path.read_text().splitlines()
    lines[2] = lines[2].replace("max-steps,", "max-steps,oops,", 1).rsplit(",", 1)[0]
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ParseError) as e:
        read_episode_csv(path)
    assert e.value.line == 3


def test_report_rejects_bad_header(tmp_path):
    path = tmp_path / "a.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ParseError) as e:
        read_episode_csv(path)
    assert e.value.line == 1


# -- command line ----------------------------------------------------------------------


def test_cli_exit_codes(tmp_path):
    assert main(["eval", "--policy", "autopilot", "--preset", "nope", "--out", str(tmp_path / "e")]) == 2
    assert main(["report", "--in", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "r")]) == 3
    bad = tmp_path / "bad.csv"
    bad.write_text("x\n")
    assert main(["report", "--in", str(bad), "--out", str(tmp_path / "r")]) == 3
    cfg = tmp_path / "c.yaml"
    cfg.write_text("ppo: {clip: -1}\n")
    assert main(["train-policy", "--config", str(cfg), "--no-prediction", "--out", str(tmp_path / "t")]) == 2


def test_cli_collect_and_report_deterministic(tmp_path):
    for k in (1, 2):
        assert main(["collect", "--town", "straight", "--episodes", "1", "--seed", "4", "--out", str(tmp_path / f"c{k}")]) == 0
    for name in ("vehicles.csv", "pedestrians.csv"):
        assert (tmp_path / "c1" / name).read_bytes() == (tmp_path / "c2" / name).read_bytes()


def test_cli_eval_writes_resolved_config(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(
        yaml.safe_dump(
            {
                "observation": {"raster": 16, "resolution": 1.5, "use_prediction": False},
                "presets": {"tiny": {"town": "straight", "density": "empty", "episodes": 2, "seeds": [0], "max_steps": 100}},
            }
        )
    )
    out = tmp_path / "e"
    assert main(["eval", "--policy", "autopilot", "--preset", "tiny", "--config", str(cfg), "--out", str(out)]) == 0
    assert load_config(out / "resolved_config.yaml").preset("tiny").episodes == 2
    assert len(read_episode_csv(out / "episodes.csv")) == 2
    assert main(["report", "--in", str(out / "episodes.csv"), "--out", str(tmp_path / "r")]) == 0


def test_penalty_permutations_agree():
    infr = {"vehicle_crash": 2, "walker_crash": 1, "stop_sign": 3}
    vals = {penalty_factor(dict(p)) for p in itertools.permutations(infr.items())}
    assert len(vals) == 1
