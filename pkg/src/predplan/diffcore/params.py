"""Named parameter storage with matching gradient buffers."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from .tensor import Tensor


class ParamStore:
    """Mapping of dotted names to float64 arrays plus same-shaped gradients.

    ``sub("encoder")`` returns a view that shares storage and prefixes every
    name, so a layer can be written against its own slice of the store.
    """

    def __init__(self, params=None, grads=None, prefix=""):
        self.params = {} if params is None else params
        self.grads = {} if grads is None else grads
        self.prefix = prefix

    def sub(self, name: str) -> "ParamStore":
        return ParamStore(self.params, self.grads, self._key(name) + ".")

    def _key(self, name):
        return self.prefix + name

    def __contains__(self, name):
        return self._key(name) in self.params

    def __getitem__(self, name) -> np.ndarray:
        return self.params[self._key(name)]

    def keys(self):
        return [k for k in self.params if k.startswith(self.prefix)]

    def add(self, name: str, value) -> np.ndarray:
        key = self._key(name)
        value = np.array(value, dtype=np.float64)
        self.params[key] = value
        self.grads[key] = np.zeros_like(value)
        return value

    def set(self, name: str, value) -> None:
        key = self._key(name)
        value = np.asarray(value, dtype=np.float64)
        if value.shape != self.params[key].shape:
            raise ShapeError(f"{key}: shape {value.shape} != stored {self.params[key].shape}")
        self.params[key][...] = value

    def tensor(self, name: str) -> Tensor:
        """Leaf tensor over the parameter whose gradient lands in the store."""
        key = self._key(name)
        return Tensor(self.params[key], requires_grad=True, sink=self.grads[key])

    def zero_grad(self) -> None:
        for k in self.keys():
            self.grads[k][...] = 0.0

    def num_parameters(self) -> int:
        return int(sum(self.params[k].size for k in self.keys()))

    def copy(self) -> "ParamStore":
        """Deep copy restricted to this view's keys (prefix kept)."""
        keys = self.keys()
        return ParamStore(
            {k: self.params[k].copy() for k in keys},
            {k: np.zeros_like(self.params[k]) for k in keys},
            self.prefix,
        )

    def load_from(self, other: "ParamStore") -> None:
        for k in self.keys():
            if other.params[k].shape != self.params[k].shape:
                raise ShapeError(f"{k}: shape {other.params[k].shape} != {self.params[k].shape}")
            self.params[k][...] = other.params[k]

    def flat(self) -> np.ndarray:
        keys = sorted(self.keys())
        if not keys:
            return np.zeros(0)
        return np.concatenate([self.params[k].ravel() for k in keys])
