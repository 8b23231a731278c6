"""Driving environment: simulator plus the mask-and-odometry observation."""

from __future__ import annotations

from collections import deque
from dataclasses import asdict, dataclass, replace

import numpy as np

from ..agentnet import Odometry
from ..bevmask import DEFAULT_LAYOUT, RasterSpec, render_context, render_future, render_past, stack
from ..errors import ConfigError
from ..simworld import ActionCommand, EpisodeConfig, World
from ..simworld.world import Snapshot
from ..stgraph import build_scene_graph, histories_from_snapshots

PREDICT_EVERY = 4  # sim steps between predictor refreshes (one history sample)
PREDICT_MARGIN = 20.0  # m beyond the raster edge for agents worth predicting


@dataclass
class ObsConfig:
    raster: int = 192
    resolution: float = 0.25
    use_prediction: bool = True
    predict_every: int = PREDICT_EVERY

    @property
    def spec(self) -> RasterSpec:
        return RasterSpec(self.raster, self.resolution)

    def to_dict(self) -> dict:
        return asdict(self)


class ObservationBuilder:
    """Keeps the observed history and renders the 21-channel stack plus odometry."""

    def __init__(self, config: ObsConfig, predictor=None):
        if config.use_prediction and predictor is None:
            raise ConfigError("prediction channels requested but no predictor was given")
        self.config = config
        self.spec = config.spec
        self.predictor = predictor if config.use_prediction else None
        self.reset()

    def reset(self):
        self.history = deque(maxlen=64)
        self.graph = None
        self.predictions = []

    def _observe_agents(self, world: World):
        agents = {0: world.ego.state()}
        for a in world.observed_agents():
            agents[a.id] = a
        self.history.append(Snapshot(world.step_count, agents))

    def _refresh_predictions(self, world: World):
        ego = np.array([world.ego.x, world.ego.y])
        reach = self.spec.half_extent + PREDICT_MARGIN
        snap = self.history[-1].agents
        near = {i for i, a in snap.items() if np.hypot(a.x - ego[0], a.y - ego[1]) <= reach + 45.0}
        hist = [h for h in histories_from_snapshots(self.history) if h.id in near]
        self.graph = build_scene_graph(hist, prev=self.graph)
        ids = [
            n.id
            for n in self.graph.nodes
            if n.cls == "vehicle" and n.id != 0 and np.hypot(*(n.positions[-1] - ego)) <= reach
        ]
        self.predictions = list(self.predictor.predict(self.graph, ids).values()) if ids else []

    def observe(self, world: World):
        """(masks float32 (21, H, W), odometry (5,)) for the current world state."""
        self._observe_agents(world)
        pose = (world.ego.x, world.ego.y, world.ego.heading)
        ctx = render_context(world.graph, world.route_pts, pose, self.spec)
        past = render_past(world.graph, self.history, pose, world.dt, self.spec)
        if self.predictor is not None:
            if world.step_count % self.config.predict_every == 0 or self.graph is None:
                self._refresh_predictions(world)
            future = render_future(self.predictions, pose, self.spec)
        else:
            future = np.zeros((DEFAULT_LAYOUT.future_steps, self.spec.size, self.spec.size))
        masks = stack(ctx, past, future, self.spec.resolution).data.astype(np.float32)
        return masks, odometry_of(world)


def odometry_of(world: World) -> np.ndarray:
    ego = world.ego
    vx, vy = ego.velocity_body()
    return Odometry(ego.throttle, ego.brake, ego.steer, float(vx), float(vy)).as_vector()


@dataclass
class EpisodeEnd:
    world: World
    env_index: int
    episode: int


class DrivingEnv:
    """One simulated world that restarts with a new mission route when an episode ends.

    Episode k of an environment seeded with ``seed`` uses a traffic/route
    seed drawn from that environment's own generator, so runs are
    reproducible independently of how many environments run beside it.
    """

    def __init__(self, template: EpisodeConfig, obs: ObsConfig, predictor=None, seed: int = 0, index: int = 0):
        self.template = template
        self.builder = ObservationBuilder(obs, predictor)
        self.seeds = np.random.default_rng([int(seed), 7, int(index)])
        self.action_rng = np.random.default_rng([int(seed), 11, int(index)])
        self.index = index
        self.episode = -1
        self.world = None
        self.obs = None

    def reset(self):
        self.episode += 1
        town_seed = self.template.town_seed if self.template.town_seed is not None else self.template.seed
        cfg = replace(self.template, seed=int(self.seeds.integers(2**31 - 1)), town_seed=town_seed)
        self.world = World(cfg)
        self.builder.reset()
        self.obs = self.builder.observe(self.world)
        return self.obs

    def step(self, action):
        """Apply a policy action; returns (reward, done, finished episode or None)."""
        if self.world is None:
            self.reset()
        a = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)
        res = self.world.step(ActionCommand(float(a[0]), float(a[1])))
        end = None
        if res.done:
            end = EpisodeEnd(self.world, self.index, self.episode)
            self.reset()
        else:
            self.obs = self.builder.observe(self.world)
        return res.reward.total, res.done, end
