"""State encoder, Beta policy heads and value head."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..diffcore import ParamStore, conv2d, conv_output_size, init_conv, init_linear, linear
from ..diffcore import tensor as T
from ..diffcore.checkpoint import config_digest
from ..errors import ShapeError

CONV_CHANNELS = (21, 8, 16, 32, 64, 128, 256)
CONV_KERNELS = (5, 5, 5, 3, 3, 3)
ODO_DIM = 5
ODO_SCALE = np.array([1.0, 1.0, 1.0, 0.1, 0.1])  # velocities enter in units of 10 m/s
FEATURE = 256


@dataclass
class NetConfig:
    raster: int = 192
    stride: int = 2
    channels: tuple = CONV_CHANNELS
    kernels: tuple = CONV_KERNELS
    feature: int = FEATURE

    def spatial_sizes(self) -> list:
        sizes = [self.raster]
        for k in self.kernels:
            sizes.append(conv_output_size(sizes[-1], k, self.stride, (k - 1) // 2))
        return sizes

    def digest(self) -> bytes:
        d = asdict(self)
        d["channels"] = list(self.channels)
        d["kernels"] = list(self.kernels)
        return config_digest(d)


def init_agent(config: NetConfig, rng: np.random.Generator) -> ParamStore:
    p = ParamStore()
    enc = p.sub("enc")
    ch = config.channels
    for i, k in enumerate(config.kernels):
        init_conv(enc.sub(f"conv{i}"), ch[i], ch[i + 1], k, rng)
    final = config.spatial_sizes()[-1]
    F = config.feature
    init_linear(enc.sub("bev_fc"), ch[-1] * final * final, F, rng)
    init_linear(enc.sub("odo0"), ODO_DIM, F, rng)
    init_linear(enc.sub("odo1"), F, F, rng)
    init_linear(enc.sub("odo2"), F, F, rng)
    init_linear(enc.sub("fuse"), 2 * F, F, rng)
    init_linear(p.sub("pi.fc"), F, F, rng)
    init_linear(p.sub("pi.alpha"), F, 2, rng)
    init_linear(p.sub("pi.beta"), F, 2, rng)
    init_linear(p.sub("v.fc"), F, F, rng)
    init_linear(p.sub("v.out"), F, 1, rng)
    return p


def encode_state(params: ParamStore, masks, odometry, config: NetConfig) -> T.Tensor:
    """(B, 21, H, W) masks and (B, 5) odometry -> (B, 256) state features."""
    masks = T.as_tensor(masks)
    odometry = T.as_tensor(odometry)
    single = masks.ndim == 3
    if single:
        masks = T.reshape(masks, (1,) + masks.shape)
        odometry = T.reshape(odometry, (1, -1))
    if masks.ndim != 4 or masks.shape[1] != config.channels[0]:
        raise ShapeError(f"encode_state: expected (B, {config.channels[0]}, H, W) masks, got {masks.shape}")
    if masks.shape[2] != config.raster or masks.shape[3] != config.raster:
        raise ShapeError(f"encode_state: raster {masks.shape[2:]} does not match configured size {config.raster}")
    if odometry.shape != (masks.shape[0], ODO_DIM):
        raise ShapeError(f"encode_state: odometry shape {odometry.shape} != ({masks.shape[0]}, {ODO_DIM})")
    enc = params.sub("enc")
    h = masks
    for i, k in enumerate(config.kernels):
        h = T.elu(conv2d(enc.sub(f"conv{i}"), h, stride=config.stride, pad=(k - 1) // 2))
    h = T.reshape(h, (h.shape[0], -1))
    bev = T.elu(linear(enc.sub("bev_fc"), h))
    o = odometry * T.Tensor(ODO_SCALE)
    o = T.elu(linear(enc.sub("odo0"), o))
    o = T.elu(linear(enc.sub("odo1"), o))
    o = T.elu(linear(enc.sub("odo2"), o))
    s = T.elu(linear(enc.sub("fuse"), T.concat([bev, o], axis=-1)))
    return T.reshape(s, (s.shape[1],)) if single else s


def policy_forward(params: ParamStore, state) -> tuple:
    """Beta parameters (alpha, beta), each (B, 2) for [acceleration, steering], all > 1."""
    h = T.elu(linear(params.sub("pi.fc"), state))
    alpha = 1.0 + T.softplus(linear(params.sub("pi.alpha"), h))
    beta = 1.0 + T.softplus(linear(params.sub("pi.beta"), h))
    return alpha, beta


def value_forward(params: ParamStore, state) -> T.Tensor:
    h = T.elu(linear(params.sub("v.fc"), state))
    v = linear(params.sub("v.out"), h)
    return T.reshape(v, v.shape[:-1])


def forward(params: ParamStore, masks, odometry, config: NetConfig):
    """Shared encoder followed by both heads: (alpha, beta, value)."""
    s = encode_state(params, masks, odometry, config)
    alpha, beta = policy_forward(params, s)
    return alpha, beta, value_forward(params, s)
