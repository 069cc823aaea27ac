"""Multi-head attention, feed-forward and normalization primitives."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from unickit.exceptions.local_exceptions import (
    ConfigurationError,
    ShapeMismatchError,
)

if TYPE_CHECKING:
    from collections.abc import Iterator

    import numpy.typing as npt

    Array = npt.NDArray[np.float64]

LAYER_NORM_EPS = 1e-5


@dataclass(frozen=True)
class Linear:
    weight: Array  # d_in x d_out
    bias: Array

    def __call__(self, x: Array) -> Array:
        return x @ self.weight + self.bias

    def arrays(self) -> Iterator[Array]:
        yield self.weight
        yield self.bias


@dataclass(frozen=True)
class LayerNorm:
    gamma: Array
    beta: Array
    eps: float = LAYER_NORM_EPS

    def __call__(self, x: Array) -> Array:
        mean = x.mean(axis=-1, keepdims=True)
        var = x.var(axis=-1, keepdims=True)
        return (x - mean) / np.sqrt(var + self.eps) * self.gamma + self.beta

    def arrays(self) -> Iterator[Array]:
        yield self.gamma
        yield self.beta


@dataclass(frozen=True)
class AttentionWeights:
    query: Linear
    key: Linear
    value: Linear
    output: Linear

    def arrays(self) -> Iterator[Array]:
        for part in (self.query, self.key, self.value, self.output):
            yield from part.arrays()


@dataclass(frozen=True)
class FeedForward:
    hidden: Linear
    output: Linear

    def __call__(self, x: Array) -> Array:
        return self.output(np.maximum(self.hidden(x), 0.0))

    def arrays(self) -> Iterator[Array]:
        yield from self.hidden.arrays()
        yield from self.output.arrays()


@dataclass
class AttentionProbe:
    """Records every attention call: stage name, probabilities, kv length."""

    records: list[tuple[str, Array]] = field(default_factory=list)

    def record(self, stage: str, probs: Array) -> None:
        self.records.append((stage, probs))

    def memory_lengths(self, stage: str) -> list[int]:
        return [int(p.shape[-1]) for name, p in self.records if name == stage]


def softmax(x: Array) -> Array:
    shifted = x - x.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def _check_tokens(name: str, tokens: Array, d_model: int) -> None:
    rows_ok = tokens.ndim == 2 and tokens.shape[0] >= 1  # noqa: PLR2004
    if not rows_ok or tokens.shape[1] != d_model:
        msg = f"{name} must be L x {d_model} with L >= 1, got {tokens.shape}"
        raise ShapeMismatchError(msg)


def mha_forward(  # noqa: PLR0913
    q: Array,
    kv: Array,
    heads: int,
    weights: AttentionWeights,
    *,
    q_pos: Array | None = None,
    k_pos: Array | None = None,
    probe: AttentionProbe | None = None,
    stage: str = "attention",
) -> Array:
    """
    Scaled dot-product attention over `heads` heads.

    Positional embeddings are added to queries and keys only; values
    are projected from the raw key/value tokens.
    """
    d_model = weights.query.weight.shape[0]
    if heads < 1 or d_model % heads:
        msg = f"d_model {d_model} is not divisible into {heads} heads"
        raise ConfigurationError(msg)
    _check_tokens("queries", q, d_model)
    _check_tokens("keys/values", kv, d_model)
    head_dim = d_model // heads

    q_in = q if q_pos is None else q + q_pos
    k_in = kv if k_pos is None else kv + k_pos

    def split(x: Array) -> Array:
        return x.reshape(x.shape[0], heads, head_dim).transpose(1, 0, 2)

    queries = split(weights.query(q_in))
    keys = split(weights.key(k_in))
    values = split(weights.value(kv))
    scores = queries @ keys.transpose(0, 2, 1) / np.sqrt(head_dim)
    probs = softmax(scores)
    if probe is not None:
        probe.record(stage, probs)
    mixed = (probs @ values).transpose(1, 0, 2).reshape(q.shape[0], d_model)
    return weights.output(mixed)
