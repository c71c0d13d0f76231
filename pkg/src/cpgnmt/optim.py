"""AMSGrad without bias correction."""

from __future__ import annotations

import logging
from collections import OrderedDict
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .autodiff import Tensor

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AmsGradConfig:
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


def amsgrad_step(param, grad, m, v, vhat, cfg: AmsGradConfig = AmsGradConfig()):
    """Return updated ``(param, m, v, vhat)`` arrays for one step."""
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad * grad
    vhat = np.maximum(vhat, v)
    param = param - cfg.learning_rate * m / (np.sqrt(vhat) + cfg.epsilon)
    return param, m, v, vhat


class AmsGrad:
    """Stateful optimizer over a fixed, named set of tensors."""

    def __init__(self, params: Mapping[str, Tensor], config: AmsGradConfig = AmsGradConfig()):
        self.params = OrderedDict(params)
        self.config = config
        self.step_count = 0
        self.skipped = 0
        self.m = {n: np.zeros_like(p.data) for n, p in self.params.items()}
        self.v = {n: np.zeros_like(p.data) for n, p in self.params.items()}
        self.vhat = {n: np.zeros_like(p.data) for n, p in self.params.items()}

    def visible_size(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def step(self, grads: Mapping[Tensor, np.ndarray]) -> bool:
        """Apply one update; a non-finite gradient skips the whole step."""
        named = {}
        for name, p in self.params.items():
            g = grads.get(p)
            if g is None:
                g = np.zeros_like(p.data)
            elif not np.all(np.isfinite(g)):
                self.skipped += 1
                log.warning("non-finite gradient for %s at step %d; update skipped", name, self.step_count + 1)
                return False
            named[name] = g
        cfg = self.config
        for name, p in self.params.items():
            g = named[name].astype(p.dtype, copy=False)
            m, v, vhat = self.m[name], self.v[name], self.vhat[name]
            # in-place form of amsgrad_step
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * g * g
            np.maximum(vhat, v, out=vhat)
            p.data -= cfg.learning_rate * m / (np.sqrt(vhat) + cfg.epsilon)
        self.step_count += 1
        return True

    def state_tensors(self) -> OrderedDict[str, np.ndarray]:
        out = OrderedDict()
        for name in self.params:
            out[f"opt.m.{name}"] = self.m[name]
            out[f"opt.v.{name}"] = self.v[name]
            out[f"opt.vhat.{name}"] = self.vhat[name]
        return out

    def load_state(self, tensors: Mapping[str, np.ndarray], step_count: int) -> None:
        for name in self.params:
            for slot, store in (("m", self.m), ("v", self.v), ("vhat", self.vhat)):
                key = f"opt.{slot}.{name}"
                if key in tensors:
                    store[name] = np.array(tensors[key], dtype=self.params[name].dtype)
        self.step_count = step_count
