import hashlib
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from predplan.bevmask import (
    DEFAULT_LAYOUT,
    Layout,
    RasterSpec,
    dump_raster,
    export_pgm,
    gaussian_patch,
    load_raster,
    read_raster,
    render_context,
    render_future,
    render_past,
    save_raster,
    stack,
    world_to_pixel,
)
from predplan.bevmask.masks import active_stop_lines
from predplan.errors import ContractError, ParseError
from predplan.simworld import AgentState, EpisodeConfig, World, roaming_policy
from predplan.simworld.world import Snapshot
from predplan.simworld.town import GREEN, RED, build_town

SPEC = RasterSpec()


def _pred(positions, sigma=1.0):
    positions = np.asarray(positions, dtype=np.float64)
    return SimpleNamespace(positions=positions, sigma=np.full(len(positions), sigma))


# -- coordinates ---------------------------------------------------------------


def test_ego_maps_to_anchor():
    px, inside = world_to_pixel([12.0, -3.0], (12.0, -3.0, 0.7), 0.25, 192)
    assert np.allclose(px, [96, 96]) and inside


def test_ten_meters_ahead():
    px, _ = world_to_pixel([10.0, 0.0], (0.0, 0.0, 0.0), 0.25, 192)
    assert np.allclose(px, [96, 56])
    px, _ = world_to_pixel([0.0, 10.0], (0.0, 0.0, np.pi / 2), 0.25, 192)
    assert np.allclose(px, [96, 56])


def test_rotation_about_anchor():
    p = np.array([4.0, 7.0])
    a, _ = world_to_pixel(p, (0.0, 0.0, 0.0), 0.25, 192)
    b, _ = world_to_pixel(p, (0.0, 0.0, np.pi / 2), 0.25, 192)
    da, db = a - 96, b - 96
    # (-28, -16) becomes (16, -28): a quarter turn about the anchor
    assert np.allclose(db, [-da[1], da[0]], atol=1e-12)


def test_out_of_frame_flagged():
    _, inside = world_to_pixel([[30.0, 0.0], [-23.8, 0.0], [0.0, 24.5]], (0.0, 0.0, 0.0), 0.25, 192)
    assert inside.tolist() == [False, True, False]


def test_bad_resolution():
    with pytest.raises(ValueError):
        world_to_pixel([0, 0], (0, 0, 0), 0.0, 192)


# -- context -------------------------------------------------------------------


def test_context_binary_and_route():
    g = build_town("urban", 0)
    w = World(EpisodeConfig(seed=0, town="urban"))
    pose = (w.ego.x, w.ego.y, w.ego.heading)
    ctx = render_context(g, w.route_pts, pose)
    assert ctx.shape == (3, 192, 192)
    assert set(np.unique(ctx)) <= {0.0, 1.0}
    assert ctx[0].sum() > 0 and ctx[1].sum() > 0
    # the route corridor lies on the road
    assert np.all(ctx[0][ctx[1] > 0] == 1.0)
    empty = render_context(g, np.zeros((0, 2)), pose)
    assert empty[1].sum() == 0 and np.array_equal(empty[0], ctx[0])


def test_straight_road_symmetric():
    g = build_town("straight", 0)
    ctx = render_context(g, np.zeros((0, 2)), (80.0, 0.0, 0.0))
    road = ctx[0]
    assert road.sum() > 0
    # column 96 + k mirrors column 96 - k
    assert np.array_equal(road[:, 1:], road[:, 1:][:, ::-1])
    assert np.array_equal(ctx[2][:, 1:], ctx[2][:, 1:][:, ::-1])


# -- past ------------------------------------------------------------------------


def _vehicle(i, x, y, h=0.0):
    return AgentState(i, "vehicle", x, y, h, 0.0, 4.6, 2.0)


def test_past_empty():
    g = build_town("straight", 0)
    out = render_past(g, [Snapshot(k, {}) for k in range(13)], (80.0, -1.75, 0.0), 0.1)
    assert out.shape == (12, 192, 192) and not out.any()
    assert not render_past(g, [], (80.0, -1.75, 0.0), 0.1).any()


def test_vehicle_behind_ego_is_below_anchor():
    g = build_town("straight", 0)
    snap = Snapshot(0, {0: _vehicle(0, 80.0, -1.75), 5: _vehicle(5, 70.0, -1.75)})
    out = render_past(g, [snap], (80.0, -1.75, 0.0), 0.1)
    rows, cols = np.nonzero(out[0])
    assert len(rows) > 0 and rows.min() > 96
    assert abs(rows.mean() - 136) < 1 and abs(cols.mean() - 96) < 1
    # the ego itself is not drawn
    assert out[0, 96, 96] == 0


def test_past_snapshot_spacing():
    g = build_town("straight", 0)
    snaps = [Snapshot(k, {7: _vehicle(7, 80.0 + k, -1.75)}) for k in range(13)]
    out = render_past(g, snaps, (80.0, -1.75, 0.0), 0.1)
    centers = [np.nonzero(out[3 * k])[0].mean() for k in range(4)]
    # newest first, 4 m per 4 steps -> 16 px apart
    assert np.allclose(np.diff(centers), 16.0, atol=0.5)


def test_green_light_not_drawn():
    g = build_town("intersection", 0)
    light = g.lights[0]
    t = np.arange(0, 120, 0.1)
    states = [light.state(x, g.light_timing) for x in t]
    t_green = t[states.index(GREEN)]
    t_red = t[states.index(RED)]
    p = g.xy[light.waypoint]
    pose = (p[0], p[1], g.heading[light.waypoint])
    tc = lambda tt: render_past(g, [Snapshot(int(round(tt / 0.1)), {})], pose, 0.1)[2]
    near = (slice(92, 101), slice(85, 108))
    others = [x for x in active_stop_lines(g, t_green) if np.hypot(*(x.mean(axis=0) - p)) < 3]
    assert not others
    assert tc(t_green)[near].sum() == 0
    assert tc(t_red)[near].sum() > 0


# -- future ----------------------------------------------------------------------


def test_gaussian_patch_values():
    ch = np.zeros((64, 64))
    gaussian_patch(ch, (30, 20), 4.0)
    assert ch[20, 30] == 1.0 and ch.max() == 1.0
    assert abs(ch[20, 34] - np.exp(-0.5)) <= 1e-12
    assert abs(ch[24, 30] - np.exp(-0.5)) <= 1e-12
    with pytest.raises(ValueError):
        gaussian_patch(ch, (0, 0), 0.0)


def test_future_peak_and_max_combination():
    pose = (0.0, 0.0, 0.0)
    steps = np.stack([np.arange(1, 8) * 1.0, np.zeros(7)], axis=1)
    out = render_future([_pred(steps), _pred(steps)], pose)
    assert out.shape == (6, 192, 192)
    assert np.all(out.max(axis=(1, 2)) == 1.0)
    single = render_future([_pred(steps)], pose)
    assert np.array_equal(out, single)
    assert not render_future([], pose).any()


def test_future_sigma_in_pixels():
    out = render_future([_pred(np.zeros((7, 2)), sigma=1.0)], (0.0, 0.0, 0.0))
    # sigma 1 m = 4 px at 0.25 m/px
    assert abs(out[0, 96, 100] - np.exp(-0.5)) <= 1e-12


@settings(max_examples=50, deadline=None)
@given(st.integers(-30, 30), st.integers(-30, 30))
def test_future_translation_equivariance(dc, dr):
    pose = (0.0, 0.0, 0.0)
    base = np.array([[2.0, 1.0]] * 7)
    # +col is ego-right (-y), +row is backward (-x)
    shifted = base + np.array([-dr * 0.25, -dc * 0.25])
    a = render_future([_pred(base)], pose)[0]
    b = render_future([_pred(shifted)], pose)[0]
    ra, ca = np.unravel_index(a.argmax(), a.shape)
    rb, cb = np.unravel_index(b.argmax(), b.shape)
    assert (rb - ra, cb - ca) == (dr, dc)


# -- stacking and serialization ---------------------------------------------------


def _world_stack(seed=3):
    w = World(EpisodeConfig(seed=seed, town="urban", vehicles=8, pedestrians=6))
    for _ in range(30):
        w.step(roaming_policy(w))
    pose = (w.ego.x, w.ego.y, w.ego.heading)
    ctx = render_context(w.graph, w.route_pts, pose)
    past = render_past(w.graph, w.history, pose, w.dt)
    preds = [
        _pred(a.xy + np.outer(np.arange(1, 8) * 0.4, [np.cos(a.heading), np.sin(a.heading)]) * a.speed, 1.0 + 0.1 * a.id)
        for a in w.agent_states(include_ego=False)
        if a.cls == "vehicle"
    ]
    return stack(ctx, past, render_future(preds, pose))


def test_stack_contract():
    ms = _world_stack()
    assert ms.data.shape == (21, 192, 192) and DEFAULT_LAYOUT.n_channels == 21
    assert ms.data.min() >= 0.0 and ms.data.max() <= 1.0
    assert set(np.unique(ms.data[:15])) <= {0.0, 1.0}
    assert ms.channel("future/step1").shape == (192, 192)
    assert Layout.from_config(DEFAULT_LAYOUT.to_config()) == DEFAULT_LAYOUT


def test_stack_rejects_bad_input():
    ctx, past, fut = np.zeros((3, 8, 8)), np.zeros((12, 8, 8)), np.zeros((6, 8, 8))
    assert stack(ctx, past, fut).data.shape == (21, 8, 8)
    with pytest.raises(ContractError, match="past"):
        stack(ctx, np.zeros((11, 8, 8)), fut)
    bad = fut.copy()
    bad[2, 3, 3] = 1.0001
    with pytest.raises(ContractError, match="future"):
        stack(ctx, past, bad)
    with pytest.raises(ContractError, match="spatial shape"):
        stack(np.zeros((3, 8, 9)), past, fut)


def test_dump_round_trip(tmp_path):
    ms = _world_stack()
    blob = dump_raster(ms)
    back = load_raster(blob)
    assert back.data.tobytes() == ms.data.tobytes() and back.resolution == ms.resolution
    save_raster(tmp_path / "r.bin", ms)
    assert read_raster(tmp_path / "r.bin").data.tobytes() == ms.data.tobytes()
    with pytest.raises(ParseError):
        load_raster(blob[:-8])
    paths = export_pgm(ms, tmp_path / "pgm")
    assert len(paths) == 21 and paths[0].read_bytes().startswith(b"P5\n192 192\n255\n")


def test_golden_raster_deterministic():
    a = hashlib.sha256(dump_raster(_world_stack(5))).hexdigest()
    b = hashlib.sha256(dump_raster(_world_stack(5))).hexdigest()
    assert a == b
