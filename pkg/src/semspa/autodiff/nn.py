"""Module containers and a few stock layers."""

from __future__ import annotations

from typing import Iterator

import numpy as np

from . import ops
from .tensor import Parameter, Tensor


class Module:
    """Owns parameters and submodules; names follow attribute paths."""

    training = True

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for key, value in vars(self).items():
            name = f"{prefix}{key}"
            if isinstance(value, Parameter):
                yield name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(name + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Parameter):
                        yield f"{name}.{i}", item
                    elif isinstance(item, Module):
                        yield from item.named_parameters(f"{name}.{i}.")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def modules(self) -> Iterator["Module"]:
        yield self
        for value in vars(self).values():
            if isinstance(value, Module):
                yield from value.modules()
            elif isinstance(value, (list, tuple)):
                for item in value:
                    if isinstance(item, Module):
                        yield from item.modules()

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def train(self, mode: bool = True) -> "Module":
        for m in self.modules():
            m.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def state_dict(self) -> dict[str, np.ndarray]:
        state = {name: p.data.copy() for name, p in self.named_parameters()}
        for m_name, m in self._named_modules():
            for key, buf in m.buffers().items():
                state[f"{m_name}{key}"] = buf.copy()
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        expected = dict(self.named_parameters())
        buffers = {f"{m_name}{key}": (m, key) for m_name, m in self._named_modules() for key in m.buffers()}
        missing = (set(expected) | set(buffers)) - set(state)
        extra = set(state) - set(expected) - set(buffers)
        if missing or extra:
            raise KeyError(f"state mismatch: missing={sorted(missing)} unexpected={sorted(extra)}")
        for name, p in expected.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.data.shape:
                raise ValueError(f"{name}: checkpoint shape {value.shape} != parameter shape {p.data.shape}")
            p.data[...] = value
        for name, (m, key) in buffers.items():
            m.set_buffer(key, np.asarray(state[name], dtype=np.float64))

    def buffers(self) -> dict[str, np.ndarray]:
        return {}

    def set_buffer(self, key: str, value: np.ndarray) -> None:
        raise KeyError(key)

    def _named_modules(self, prefix: str = "") -> Iterator[tuple[str, "Module"]]:
        yield prefix, self
        for key, value in vars(self).items():
            if isinstance(value, Module):
                yield from value._named_modules(f"{prefix}{key}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item._named_modules(f"{prefix}{key}.{i}.")

    def num_parameters(self) -> int:
        return int(sum(p.size for p in self.parameters()))

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError


def uniform_init(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape)


class Linear(Module):
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator, bias: bool = True):
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Parameter(uniform_init(rng, (in_features, out_features), in_features), "weight")
        self.bias = Parameter(uniform_init(rng, (out_features,), in_features), "bias") if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return ops.linear(x, self.weight, self.bias)


class RunningNorm(Module):
    """Per-channel normalization over all leading axes with running statistics.

    Batch statistics in training mode, running averages in eval mode.
    """

    def __init__(self, channels: int, momentum: float = 0.1, eps: float = 1e-5):
        self.channels = channels
        self.momentum = momentum
        self.eps = eps
        self.gain = Parameter(np.ones(channels), "gain")
        self.shift = Parameter(np.zeros(channels), "shift")
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)

    def buffers(self) -> dict[str, np.ndarray]:
        return {"running_mean": self.running_mean, "running_var": self.running_var}

    def set_buffer(self, key: str, value: np.ndarray) -> None:
        getattr(self, key)[...] = value

    def forward(self, x: Tensor) -> Tensor:
        axes = tuple(range(x.ndim - 1))
        if self.training:
            mu = ops.mean(x, axis=axes, keepdims=True)
            xc = ops.sub(x, mu)
            var = ops.mean(ops.mul(xc, xc), axis=axes, keepdims=True)
            m = self.momentum
            self.running_mean[...] = (1 - m) * self.running_mean + m * mu.data.reshape(-1)
            self.running_var[...] = (1 - m) * self.running_var + m * var.data.reshape(-1)
            y = ops.mul(xc, ops.power(ops.add(var, self.eps), -0.5))
        else:
            y = ops.mul(ops.sub(x, self.running_mean), 1.0 / np.sqrt(self.running_var + self.eps))
        return ops.add(ops.mul(y, self.gain), self.shift)
