import warnings

import numpy as np
import pytest

from predplan.errors import ContractError, StateError
from predplan.simworld import EpisodeConfig, World, roaming_policy
from predplan.stgraph import (
    AgentHistory,
    Predictor,
    PredictorConfig,
    build_scene_graph,
    corpus_arrays,
    encode,
    evaluate_mse,
    histories_from_snapshots,
    integrate,
    make_batch,
    scenes_from_records,
    synthetic_corpus,
)
from predplan.stgraph.corpus import read_records, write_records
from predplan.stgraph.graph import node_features
from predplan.stgraph.model import kl_categorical


def _hist(i, x, y, vx=0.0, vy=0.0, cls="vehicle"):
    t = (np.arange(8) - 7) * 0.4
    pos = np.stack([x + vx * t, y + vy * t], axis=1)
    return AgentHistory.from_positions(i, cls, pos)


@pytest.fixture(scope="module")
def model():
    return Predictor().init(np.random.default_rng(0))


# -- histories ---------------------------------------------------------------


def test_history_finite_differences_from_simulator():
    w = World(EpisodeConfig(seed=2, town="urban", vehicles=6))
    for _ in range(40):
        w.step(roaming_policy(w))
    hist = histories_from_snapshots(w.history)
    assert len(hist) == len(w.agent_states())
    for h in hist:
        p = h.positions
        central = (p[2:] - p[:-2]) / 0.8
        assert np.allclose(h.velocities[1:-1], central, atol=1e-6)
        assert np.allclose(h.velocities[-1], (p[-1] - p[-2]) / 0.4, atol=1e-6)


def test_history_requires_eight_samples():
    with pytest.raises(ValueError):
        AgentHistory.from_positions(0, "vehicle", np.zeros((7, 2)))


# -- graph -------------------------------------------------------------------


def test_edge_radius_boundary():
    g44 = build_scene_graph([_hist(0, 0, 0), _hist(1, 44, 0)])
    g46 = build_scene_graph([_hist(0, 0, 0), _hist(1, 46, 0)])
    assert g44.edges == {(0, 1), (1, 0)}
    assert g46.edges == set()


def test_single_agent_has_no_edges():
    assert build_scene_graph([_hist(0, 3, 4)]).edges == set()


def test_pedestrian_radius():
    g = build_scene_graph([_hist(0, 0, 0), _hist(1, 9.5, 0, cls="pedestrian"), _hist(2, 20, 0, cls="pedestrian")])
    assert (0, 1) in g.edges and (0, 2) not in g.edges


def test_random_pairs_match_radius():
    rng = np.random.default_rng(0)
    for _ in range(2000):
        p = rng.uniform(-60, 60, size=2)
        g = build_scene_graph([_hist(0, 0, 0), _hist(1, *p)])
        assert ((0, 1) in g.edges) == (np.hypot(*p) <= 45.0)


def test_lifecycle_ramp_is_continuous():
    rng = np.random.default_rng(1)
    prev = None
    last = {}
    for step in range(60):
        x = 30.0 + 25.0 * np.sin(step / 5.0) + rng.normal(0, 2)
        g = build_scene_graph([_hist(0, 0, 0), _hist(1, x, 0)], prev=prev)
        w = g.weights.get((0, 1), 0.0)
        assert 0.0 <= w <= 1.0
        if prev is not None:
            assert abs(w - last["w"]) <= 1.0 / g.ramp + 1e-12
            present = (0, 1) in g.edges
            assert (w >= last["w"]) if present else (w <= last["w"])
        last["w"] = w
        prev = g


# -- encoding ----------------------------------------------------------------


def test_no_neighbors_zero_sum():
    g = build_scene_graph([_hist(0, 0, 0, vx=3)])
    _, edge, scale, _, _ = node_features(g, 0)
    assert np.all(edge[:, 6:] == 0.0) and scale == 0.0


def test_two_identical_neighbors_sum_doubles():
    g1 = build_scene_graph([_hist(0, 0, 0, vx=1), _hist(1, 5, 2, vx=1)])
    g2 = build_scene_graph([_hist(0, 0, 0, vx=1), _hist(1, 5, 2, vx=1), _hist(2, 5, 2, vx=1)])
    e1 = node_features(g1, 0)[1][:, 6:]
    e2 = node_features(g2, 0)[1][:, 6:]
    assert np.allclose(e2, 2 * e1, rtol=0, atol=1e-15)


def test_encoding_permutation_and_relabel_invariance(model):
    rng = np.random.default_rng(3)
    for _ in range(10):
        n = int(rng.integers(2, 6))
        hs = [_hist(i, *rng.uniform(-20, 20, 2), *rng.uniform(-5, 5, 2)) for i in range(n)]
        base = encode(model, build_scene_graph(hs))
        perm = rng.permutation(n)
        shuffled = encode(model, build_scene_graph([hs[k] for k in perm]))
        for i in range(n):
            assert np.allclose(base[i], shuffled[i], rtol=0, atol=1e-12)
        relabeled = [AgentHistory(h.id + 100, h.cls, h.positions, h.velocities, h.accelerations) for h in hs]
        enc_r = encode(model, build_scene_graph(relabeled))
        for i in range(n):
            assert np.allclose(base[i], enc_r[i + 100], rtol=0, atol=1e-12)


# -- CVAE --------------------------------------------------------------------


def test_kl_identity_is_zero():
    logits = np.random.default_rng(0).normal(size=16)
    log_p = logits - np.log(np.exp(logits).sum())
    assert kl_categorical(log_p, log_p) == 0.0


def test_loss_deterministic(model):
    batch, _, _ = corpus_arrays(synthetic_corpus(8, seed=5))
    a, _ = model.loss(batch)
    b, _ = model.loss(batch)
    assert float(a.data) == float(b.data)


def test_empty_batch_rejected(model):
    batch, _, _ = corpus_arrays(synthetic_corpus(2, seed=5))
    with pytest.raises(ContractError):
        model.loss(batch.subset(np.arange(0)))


def test_training_reduces_loss():
    scenes = synthetic_corpus(32, seed=7)
    batch, _, _ = corpus_arrays(scenes)
    m = Predictor().init(np.random.default_rng(1))
    rng = np.random.default_rng(2)
    first = float(m.loss(batch)[0].data)
    for _ in range(200):
        idx = np.sort(rng.choice(len(batch), size=min(64, len(batch)), replace=False))
        m.train_step(batch.subset(idx))
    assert float(m.loss(batch)[0].data) < first


def test_predict_requires_parameters():
    g = build_scene_graph([_hist(0, 0, 0)])
    with pytest.raises(StateError):
        Predictor().predict(g)


def test_forced_prior_selects_category():
    m = Predictor().init(np.random.default_rng(0))
    m.params.set("p_z.W", np.zeros_like(m.params["p_z.W"]))
    b = np.full(16, -50.0)
    b[11] = 50.0
    m.params.set("p_z.b", b)
    out = m.predict(build_scene_graph([_hist(0, 0, 0, vx=4), _hist(1, 10, 0, vx=4)]))
    assert all(p.latent == 11 for p in out.values())


def test_prediction_output_contract(model):
    g = build_scene_graph([_hist(0, 0, 0, vx=4), _hist(1, 10, 3, vy=2), _hist(2, -5, 0, cls="pedestrian")])
    out = model.predict(g)
    assert set(out) == {0, 1}
    for p in out.values():
        assert len(p.gmms) == 7 and p.positions.shape == (7, 2)
        for gmm in p.gmms:
            assert abs(gmm.weights.sum() - 1.0) <= 1e-9
            assert np.all(gmm.stds > 0)
        assert np.all(p.sigma >= model.config.sigma_floor)
        assert np.all(np.diff(p.sigma) >= 0)


def test_argmax_component_selection():
    from predplan.diffcore import GMMParams

    g = GMMParams([0.7, 0.3], [[1.0, 2.0], [-3.0, 0.0]], np.zeros((2, 2)))
    assert g.top_component() == 0
    assert np.array_equal(g.means[g.top_component()], [1.0, 2.0])


def test_predictor_checkpoint_round_trip(tmp_path, model):
    path = tmp_path / "pred.ckpt"
    model.save(path)
    loaded = Predictor.load(path)
    g = build_scene_graph([_hist(0, 0, 0, vx=4), _hist(1, 10, 0, vx=3)])
    a, b = model.predict(g), loaded.predict(g)
    for k in a:
        assert np.array_equal(a[k].positions, b[k].positions)
    with pytest.raises(ContractError):
        Predictor.load(path, PredictorConfig(components=8))


@pytest.mark.slow
def test_constant_velocity_world_is_learned():
    from predplan.stgraph.corpus import Scene, _constant

    rng = np.random.default_rng(0)
    scenes = [Scene({0: _constant(rng, rng.uniform(-20, 20, 2))}, {0: "vehicle"}) for _ in range(400)]
    batch, truth, _ = corpus_arrays(scenes)
    m = Predictor(PredictorConfig(lr_decay=0.9995)).init(np.random.default_rng(1))
    for _ in range(600):
        m.train_step(batch.subset(np.sort(rng.choice(len(batch), 64, replace=False))))
    q = _hist(0, 3.0, -2.0, vx=6.0, vy=-2.0)
    out = m.predict(build_scene_graph([q]))[0]
    truth = q.last + np.array([6.0, -2.0]) * 2.8
    assert np.hypot(*(out.positions[-1] - truth)) < 0.5


# -- integration and metrics -------------------------------------------------


def test_integrate_examples():
    pos = integrate([0.0, 0.0], np.tile([1.0, 2.0], (7, 1)), 0.1)
    assert np.allclose(pos[0], [0.1, 0.2])
    assert np.array_equal(integrate([3.0, -1.0], np.zeros((7, 2))), np.tile([3.0, -1.0], (7, 1)))
    alt = np.array([[1.0, 0.0], [-1.0, 0.0]] * 3 + [[1.0, 0.0]])
    out = integrate([0.0, 0.0], alt, 0.4)
    assert np.allclose(out[0::2], [0.4, 0.0]) and np.allclose(out[1::2], [0.0, 0.0])


def test_integrate_rejects_bad_step():
    with pytest.raises(ValueError):
        integrate([0, 0], np.zeros((7, 2)), 0.0)


def test_mse_examples():
    a = np.random.default_rng(0).normal(size=(5, 7, 2))
    assert evaluate_mse(a, a) == 0.0
    assert evaluate_mse(a + np.array([3.0, 4.0]), a) == pytest.approx(25.0)
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        assert evaluate_mse(np.zeros((0, 7, 2)), np.zeros((0, 7, 2))) == 0.0
    assert rec
    with pytest.raises(ContractError):
        evaluate_mse(np.zeros((2, 7, 2)), np.zeros((2, 6, 2)))


# -- dataset files -----------------------------------------------------------


def test_dataset_records_to_scenes(tmp_path):
    w = World(EpisodeConfig(seed=1, town="urban", vehicles=5, max_steps=200))
    rows = []
    while not w.done:
        w.step(roaming_policy(w))
        rows.extend(w.trajectory_records(episode_id=3))
    path = tmp_path / "vehicles.csv"
    write_records(path, rows)
    back = read_records(path)
    assert back == [(r[0], r[1], r[2], r[3], float(r[4]), float(r[5])) for r in rows]
    scenes = scenes_from_records(back)
    assert scenes and all(tr.shape == (15, 2) for sc in scenes for tr in sc.tracks.values())
    batch = make_batch(build_scene_graph([AgentHistory.from_positions(i, "vehicle", tr[:8]) for i, tr in scenes[0].tracks.items()]))
    assert len(batch) == len(scenes[0].tracks)
