"""Discrete-latent CVAE trajectory predictor with LSTM encoders and a GMM decoder."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..diffcore import (
    AdamState,
    GMMParams,
    ParamStore,
    adam_step,
    backward,
    init_linear,
    init_lstm,
    linear,
    lstm_step,
    mixture_log_prob,
    run_lstm,
)
from ..diffcore import tensor as T
from ..diffcore.checkpoint import config_digest, load_checkpoint, save_checkpoint
from ..errors import ContractError, StateError
from .graph import FEATURE_SCALE, SceneGraph, node_features
from .history import DELTA, FUTURE, PAST
from .kinematics import integrate

VEL_SCALE = 5.0  # decoder works in velocities divided by this


@dataclass
class PredictorConfig:
    agent_class: str = "vehicle"
    node_hidden: int = 32
    edge_hidden: int = 8
    future_hidden: int = 32
    latent: int = 16
    decoder_hidden: int = 128
    components: int = 16
    full_covariance: bool = False
    kl_weight: float = 1.0
    lr: float = 1e-3
    lr_decay: float = 0.9999
    lr_floor: float = 1e-5
    batch_size: int = 64
    sigma_floor: float = 1.0  # half the vehicle width, m

    @property
    def enc_dim(self) -> int:
        return self.node_hidden + self.edge_hidden

    def lr_at(self, step: int) -> float:
        return max(self.lr * self.lr_decay**step, self.lr_floor)


@dataclass
class Batch:
    """Stacked model inputs for B target agents (agent frame, scaled)."""

    node: np.ndarray  # (B, 8, 6)
    edge: np.ndarray  # (B, 8, 12)
    edge_scale: np.ndarray  # (B,)
    origin: np.ndarray  # (B, 2) world position at the last sample
    theta: np.ndarray  # (B,) frame rotation
    future: np.ndarray | None = None  # (B, 7, 2) scaled agent-frame velocities
    ids: list = field(default_factory=list)

    def __len__(self):
        return self.node.shape[0]

    @property
    def last_velocity(self) -> np.ndarray:
        """Scaled agent-frame velocity at the last observed sample."""
        return self.node[:, -1, 2:4] * FEATURE_SCALE[2] / VEL_SCALE

    def subset(self, idx) -> "Batch":
        idx = np.asarray(idx)
        return Batch(
            self.node[idx],
            self.edge[idx],
            self.edge_scale[idx],
            self.origin[idx],
            self.theta[idx],
            None if self.future is None else self.future[idx],
            [self.ids[i] for i in idx] if self.ids else [],
        )


def _rot(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)  # local -> world


def to_local_velocity(v_world, theta) -> np.ndarray:
    R = _rot(theta)
    return np.einsum("...ji,...tj->...ti", R, v_world)


def to_world_velocity(v_local, theta) -> np.ndarray:
    R = _rot(theta)
    return np.einsum("...ij,...tj->...ti", R, v_local)


def make_batch(graph: SceneGraph, agent_ids=None, futures=None) -> Batch:
    """Inputs for ``agent_ids`` (default: every node) of a scene graph.

    ``futures`` optionally maps id to (7, 2) world-frame future velocities.
    """
    ids = [n.id for n in graph.nodes] if agent_ids is None else list(agent_ids)
    rows = [node_features(graph, i) for i in ids]
    if not rows:
        z = np.zeros((0, PAST, 6))
        return Batch(z, np.zeros((0, PAST, 12)), np.zeros(0), np.zeros((0, 2)), np.zeros(0), None, [])
    node = np.stack([r[0] for r in rows])
    edge = np.stack([r[1] for r in rows])
    scale = np.array([r[2] for r in rows])
    origin = np.stack([r[3] for r in rows])
    theta = np.array([r[4] for r in rows])
    fut = None
    if futures is not None:
        fut = np.stack([to_local_velocity(np.asarray(futures[i]), t) for i, t in zip(ids, theta)]) / VEL_SCALE
    return Batch(node, edge, scale, origin, theta, fut, ids)


def concat_batches(batches) -> Batch:
    batches = [b for b in batches if len(b)]
    fut = None if any(b.future is None for b in batches) else np.concatenate([b.future for b in batches])
    return Batch(
        np.concatenate([b.node for b in batches]),
        np.concatenate([b.edge for b in batches]),
        np.concatenate([b.edge_scale for b in batches]),
        np.concatenate([b.origin for b in batches]),
        np.concatenate([b.theta for b in batches]),
        fut,
        [i for b in batches for i in b.ids],
    )


@dataclass
class PredictionOutput:
    """Per-agent decoded mixtures, most probable positions and uncertainty."""

    agent_id: int
    gmms: list  # 7 GMMParams over world-frame velocity (m/s)
    positions: np.ndarray  # (7, 2) m
    sigma: np.ndarray  # (7,) m
    latent: int


class Predictor:
    """Parameters plus forward passes; ``params`` is None until initialized or loaded."""

    def __init__(self, config: PredictorConfig | None = None, params: ParamStore | None = None):
        self.config = config or PredictorConfig()
        self.params = params
        self.step = 0
        self.opt: AdamState | None = None

    # -- parameters -------------------------------------------------------------
    def init(self, rng: np.random.Generator) -> "Predictor":
        c = self.config
        p = ParamStore()
        init_lstm(p.sub("node_lstm"), 6, c.node_hidden, rng)
        init_lstm(p.sub("edge_lstm"), 12, c.edge_hidden, rng)
        init_lstm(p.sub("future_lstm"), 2, c.future_hidden, rng)
        init_linear(p.sub("p_z"), c.enc_dim, c.latent, rng)
        init_linear(p.sub("q_z"), c.enc_dim + c.future_hidden, c.latent, rng)
        init_linear(p.sub("dec_init"), c.latent + c.enc_dim, c.decoder_hidden, rng)
        init_lstm(p.sub("dec_lstm"), c.latent + c.enc_dim + 2, c.decoder_hidden, rng)
        per = 6 if c.full_covariance else 5
        init_linear(p.sub("dec_out"), c.decoder_hidden, c.components * per, rng)
        self.params = p
        self.opt = AdamState.for_params(p)
        self.step = 0
        return self

    def _require(self):
        if self.params is None:
            raise StateError("predictor parameters are not initialized or loaded")

    def digest(self) -> bytes:
        return config_digest(asdict(self.config))

    def save(self, path) -> None:
        self._require()
        save_checkpoint(path, self.params, self.step, self.digest())

    @classmethod
    def load(cls, path, config: PredictorConfig | None = None) -> "Predictor":
        store, header = load_checkpoint(path)
        model = cls(config, store)
        if header.digest != model.digest():
            raise ContractError(f"checkpoint {path} was written for a different predictor configuration")
        model.step = header.step
        model.opt = AdamState.for_params(store)
        return model

    # -- forward pieces ---------------------------------------------------------
    def encode_batch(self, batch: Batch) -> T.Tensor:
        """(B, node_hidden + edge_hidden) history-plus-interaction encoding."""
        self._require()
        c, p = self.config, self.params
        hs, _ = run_lstm(p.sub("node_lstm"), batch.node, c.node_hidden)
        he, _ = run_lstm(p.sub("edge_lstm"), batch.edge, c.edge_hidden)
        he = he[-1] * T.Tensor(batch.edge_scale[:, None])
        return T.concat([hs[-1], he], axis=-1)

    def log_prior(self, x_enc) -> T.Tensor:
        return T.log_softmax(linear(self.params.sub("p_z"), x_enc), axis=-1)

    def log_posterior(self, x_enc, future) -> T.Tensor:
        c = self.config
        hf, _ = run_lstm(self.params.sub("future_lstm"), future, c.future_hidden)
        return T.log_softmax(linear(self.params.sub("q_z"), T.concat([x_enc, hf[-1]], axis=-1)), axis=-1)

    def _split(self, out):
        c = self.config
        K = c.components
        n = out.shape[0]
        log_w = T.log_softmax(out[:, 0:K], axis=-1)
        means = T.reshape(out[:, K : 3 * K], (n, K, 2))
        log_stds = 3.0 * T.tanh(T.reshape(out[:, 3 * K : 5 * K], (n, K, 2)) * (1.0 / 3.0))
        corr = 0.95 * T.tanh(out[:, 5 * K : 6 * K]) if c.full_covariance else None
        return log_w, means, log_stds, corr

    def _decoder_start(self, z_onehot, x_enc):
        h0 = T.tanh(linear(self.params.sub("dec_init"), T.concat([z_onehot, x_enc], axis=-1)))
        c0 = T.Tensor(np.zeros(h0.shape))
        return h0, c0

    def decode_log_likelihood(self, x_enc, z_onehot, last_vel, future) -> T.Tensor:
        """Teacher-forced sum over steps of log p(y_k | x, z) for each row."""
        c = self.config
        h, cell = self._decoder_start(z_onehot, x_enc)
        prev = last_vel
        total = None
        for k in range(FUTURE):
            inp = T.concat([z_onehot, x_enc, T.Tensor(prev)], axis=-1)
            h, cell = lstm_step(self.params.sub("dec_lstm"), h, cell, inp)
            log_w, means, log_stds, corr = self._split(linear(self.params.sub("dec_out"), h))
            lp = mixture_log_prob(log_w, means, log_stds, corr, T.Tensor(future[:, k, :]))
            total = lp if total is None else total + lp
            prev = future[:, k, :]
        return total

    def loss(self, batch: Batch) -> tuple:
        """Negative evidence lower bound averaged over the batch.

        The reconstruction expectation over the discrete latent is computed
        exactly by decoding every category. Returns (loss tensor, stats).
        """
        self._require()
        if len(batch) == 0:
            raise ContractError("empty training batch")
        if batch.future is None:
            raise ContractError("training batch has no ground-truth futures")
        c = self.config
        B, Z = len(batch), c.latent
        x_enc = self.encode_batch(batch)
        log_p = self.log_prior(x_enc)
        log_q = self.log_posterior(x_enc, batch.future)
        rows = np.repeat(np.arange(B), Z)
        x_rep = x_enc[rows]
        z_onehot = np.tile(np.eye(Z), (B, 1))
        fut = np.repeat(batch.future, Z, axis=0)
        last = np.repeat(batch.last_velocity, Z, axis=0)
        ll = T.reshape(self.decode_log_likelihood(x_rep, T.Tensor(z_onehot), last, fut), (B, Z))
        q = T.exp(log_q)
        recon = T.tsum(q * ll, axis=-1)
        kl = T.tsum(q * (log_q - log_p), axis=-1)
        loss = T.mean(-1.0 * recon + c.kl_weight * kl)
        stats = {"recon": float(np.mean(recon.data)), "kl": float(np.mean(kl.data))}
        return loss, stats

    def train_step(self, batch: Batch) -> float:
        """One Adam update on the negative ELBO; returns the loss before the update."""
        loss, _ = self.loss(batch)
        self.params.zero_grad()
        backward(loss)
        if self.opt is None:
            self.opt = AdamState.for_params(self.params)
        adam_step(self.params, self.opt, self.config.lr_at(self.step))
        self.step += 1
        return float(loss.data)

    # -- inference --------------------------------------------------------------
    def predict_batch(self, batch: Batch):
        """Most-probable-latent rollout.

        Returns (positions (B, 7, 2) world m, sigma (B, 7) m, z* (B,), raw
        mixtures per step as (weights, means, log_stds, corr) in the scaled
        agent frame).
        """
        self._require()
        c = self.config
        B = len(batch)
        if B == 0:
            return np.zeros((0, FUTURE, 2)), np.zeros((0, FUTURE)), np.zeros(0, dtype=int), []
        x_enc = self.encode_batch(batch)
        z_star = np.argmax(self.log_prior(x_enc).data, axis=-1)
        z_onehot = T.Tensor(np.eye(c.latent)[z_star])
        h, cell = self._decoder_start(z_onehot, x_enc)
        prev = batch.last_velocity
        vel = np.zeros((B, FUTURE, 2))
        step_std = np.zeros((B, FUTURE))
        mixtures = []
        for k in range(FUTURE):
            inp = T.concat([z_onehot, x_enc, T.Tensor(prev)], axis=-1)
            h, cell = lstm_step(self.params.sub("dec_lstm"), h, cell, inp)
            log_w, means, log_stds, corr = self._split(linear(self.params.sub("dec_out"), h))
            w = np.exp(log_w.data)
            top = np.argmax(w, axis=-1)
            sel = means.data[np.arange(B), top]
            vel[:, k] = sel
            step_std[:, k] = np.exp(log_stds.data[np.arange(B), top].max(axis=-1)) * VEL_SCALE
            mixtures.append((w, means.data, log_stds.data, None if corr is None else corr.data))
            prev = sel
        v_world = to_world_velocity(vel * VEL_SCALE, batch.theta)
        positions = integrate(batch.origin, v_world, DELTA)
        sigma = np.maximum(DELTA * np.sqrt(np.cumsum(step_std**2, axis=-1)), c.sigma_floor)
        return positions, sigma, z_star, mixtures

    def predict(self, graph: SceneGraph, agent_ids=None) -> dict:
        """PredictionOutput per agent of the configured class (or ``agent_ids``)."""
        self._require()
        if agent_ids is None:
            agent_ids = [n.id for n in graph.nodes if n.cls == self.config.agent_class]
        batch = make_batch(graph, agent_ids)
        positions, sigma, z_star, mixtures = self.predict_batch(batch)
        out = {}
        for b, aid in enumerate(batch.ids):
            gmms = []
            for w, means, log_stds, corr in mixtures:
                g = GMMParams(w[b], means[b] * VEL_SCALE, log_stds[b] + np.log(VEL_SCALE), None if corr is None else corr[b])
                gmms.append(g.rotated(float(batch.theta[b])))
            out[aid] = PredictionOutput(aid, gmms, positions[b], sigma[b], int(z_star[b]))
        return out


def encode(model: Predictor, graph: SceneGraph) -> dict:
    """Per-node encoding vectors keyed by agent id."""
    batch = make_batch(graph)
    if len(batch) == 0:
        return {}
    enc = model.encode_batch(batch).data
    return {aid: enc[k] for k, aid in enumerate(batch.ids)}


def kl_categorical(log_q, log_p) -> float:
    q = np.exp(log_q)
    return float(np.sum(q * (log_q - log_p)))
