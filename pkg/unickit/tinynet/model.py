"""
Forward-only encoder / feature-extrapolation / decoder stack.

Shapes follow the full-size architecture (2048-channel backbone grid
reduced to d=256 tokens, six encoder blocks) with desk-scale defaults
for the parts whose size is a free choice. Weights are drawn from a
seed and never trained.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from unickit.exceptions.local_exceptions import (
    ConfigurationError,
    NumericError,
    ShapeMismatchError,
)
from unickit.geometry import CompBox
from unickit.tinynet.attention import (
    LAYER_NORM_EPS,
    AttentionProbe,
    AttentionWeights,
    FeedForward,
    LayerNorm,
    Linear,
    mha_forward,
)
from unickit.tinynet.features import (
    BACKBONE_CHANNELS,
    FeatureGrid,
    channel_reduce,
    sine_positional_embedding,
)
from unickit.views import PredictedView

if TYPE_CHECKING:
    from collections.abc import Iterator

    import numpy.typing as npt

    Array = npt.NDArray[np.float64]

# Keeps softplus sizes strictly positive after underflow.
MIN_BOX_SIZE = 1e-6
WEIGHT_STREAM = 1


@dataclass(frozen=True)
class TinyNetConfig:
    channels: int = BACKBONE_CHANNELS
    d_model: int = 256
    heads: int = 8
    ffn_dim: int = 512
    encoder_layers: int = 6
    fem_layers: int = 2
    decoder_layers: int = 2
    pad_tokens: int = 12
    queries: int = 16
    seed: int = 0
    ln_eps: float = LAYER_NORM_EPS

    def __post_init__(self) -> None:
        counts = {
            "channels": self.channels,
            "d_model": self.d_model,
            "heads": self.heads,
            "ffn_dim": self.ffn_dim,
            "pad_tokens": self.pad_tokens,
            "queries": self.queries,
        }
        for name, value in counts.items():
            if value < 1:
                msg = f"{name} must be >= 1, got {value}"
                raise ConfigurationError(msg)
        for name in ("encoder_layers", "fem_layers", "decoder_layers"):
            if getattr(self, name) < 0:
                msg = f"{name} must be >= 0"
                raise ConfigurationError(msg)
        if self.d_model % self.heads:
            msg = f"d_model {self.d_model} is not divisible by {self.heads}"
            raise ConfigurationError(msg)


@dataclass(frozen=True)
class EncoderBlock:
    self_attn: AttentionWeights
    norm1: LayerNorm
    ffn: FeedForward
    norm2: LayerNorm

    def arrays(self) -> Iterator[Array]:
        yield from self.self_attn.arrays()
        yield from self.norm1.arrays()
        yield from self.ffn.arrays()
        yield from self.norm2.arrays()


@dataclass(frozen=True)
class CrossBlock:
    """Self-attention, cross-attention, FFN; used by FEM and decoder."""

    self_attn: AttentionWeights
    norm1: LayerNorm
    cross_attn: AttentionWeights
    norm2: LayerNorm
    ffn: FeedForward
    norm3: LayerNorm

    def arrays(self) -> Iterator[Array]:
        yield from self.self_attn.arrays()
        yield from self.norm1.arrays()
        yield from self.cross_attn.arrays()
        yield from self.norm2.arrays()
        yield from self.ffn.arrays()
        yield from self.norm3.arrays()


@dataclass(frozen=True)
class ModelWeights:
    config: TinyNetConfig
    reduce: Linear
    encoder: tuple[EncoderBlock, ...]
    pad_query: Array  # M x d, the learnable query m
    fem: tuple[CrossBlock, ...]
    fem_output: FeedForward
    anchors: Array  # N x d
    decoder: tuple[CrossBlock, ...]
    box_head: Linear
    confidence_head: Linear

    def arrays(self) -> Iterator[Array]:
        """Every parameter array in a fixed order."""
        yield from self.reduce.arrays()
        for block in self.encoder:
            yield from block.arrays()
        yield self.pad_query
        for cross in self.fem:
            yield from cross.arrays()
        yield from self.fem_output.arrays()
        yield self.anchors
        for cross in self.decoder:
            yield from cross.arrays()
        yield from self.box_head.arrays()
        yield from self.confidence_head.arrays()


@dataclass(frozen=True)
class ForwardTrace:
    z_vis: Array
    z_pad: Array
    boxes: list[CompBox]
    confidences: list[float]
    probe: AttentionProbe


class _Initializer:
    def __init__(self, config: TinyNetConfig) -> None:
        self.config = config
        self.rng = np.random.default_rng([config.seed, WEIGHT_STREAM])

    def linear(self, d_in: int, d_out: int) -> Linear:
        weight = self.rng.standard_normal((d_in, d_out)) / np.sqrt(d_in)
        bias = self.rng.standard_normal(d_out) / np.sqrt(d_in)
        return Linear(weight, bias)

    def norm(self) -> LayerNorm:
        d = self.config.d_model
        return LayerNorm(np.ones(d), np.zeros(d), self.config.ln_eps)

    def attention(self) -> AttentionWeights:
        d = self.config.d_model
        return AttentionWeights(
            query=self.linear(d, d),
            key=self.linear(d, d),
            value=self.linear(d, d),
            output=self.linear(d, d),
        )

    def ffn(self) -> FeedForward:
        d = self.config.d_model
        return FeedForward(
            self.linear(d, self.config.ffn_dim),
            self.linear(self.config.ffn_dim, d),
        )

    def embedding(self, rows: int) -> Array:
        d = self.config.d_model
        return self.rng.standard_normal((rows, d)) / np.sqrt(d)

    def cross_block(self) -> CrossBlock:
        return CrossBlock(
            self_attn=self.attention(),
            norm1=self.norm(),
            cross_attn=self.attention(),
            norm2=self.norm(),
            ffn=self.ffn(),
            norm3=self.norm(),
        )


def init_weights(config: TinyNetConfig) -> ModelWeights:
    """Seeded Gaussian weights scaled by 1/sqrt(fan-in)."""
    init = _Initializer(config)
    d = config.d_model
    return ModelWeights(
        config=config,
        reduce=init.linear(config.channels, d),
        encoder=tuple(
            EncoderBlock(
                init.attention(),
                init.norm(),
                init.ffn(),
                init.norm(),
            )
            for _ in range(config.encoder_layers)
        ),
        pad_query=init.embedding(config.pad_tokens),
        fem=tuple(init.cross_block() for _ in range(config.fem_layers)),
        fem_output=init.ffn(),
        anchors=init.embedding(config.queries),
        decoder=tuple(
            init.cross_block() for _ in range(config.decoder_layers)
        ),
        box_head=init.linear(d, 4),
        confidence_head=init.linear(d, 1),
    )


def flatten_weights(weights: ModelWeights) -> Array:
    return np.concatenate([a.reshape(-1) for a in weights.arrays()])


def unflatten_weights(
    template: ModelWeights,
    values: npt.ArrayLike,
) -> ModelWeights:
    """Weights shaped like `template`, filled from a flat vector."""
    flat = np.asarray(values, dtype=np.float64).reshape(-1)
    expected = sum(a.size for a in template.arrays())
    if flat.size != expected:
        msg = f"expected {expected} parameters, got {flat.size}"
        raise ShapeMismatchError(msg)
    offset = 0

    def rebuild(node: object) -> object:
        nonlocal offset
        if isinstance(node, np.ndarray):
            chunk = flat[offset : offset + node.size].reshape(node.shape)
            offset += node.size
            return chunk.copy()
        if isinstance(node, tuple):
            return tuple(rebuild(item) for item in node)
        if isinstance(node, TinyNetConfig):
            return node
        if dataclasses.is_dataclass(node) and not isinstance(node, type):
            changes = {
                f.name: rebuild(getattr(node, f.name))
                for f in dataclasses.fields(node)
            }
            return dataclasses.replace(node, **changes)
        return node

    rebuilt = rebuild(template)
    if not isinstance(rebuilt, ModelWeights):  # pragma: no cover
        msg = "failed to rebuild model weights"
        raise ShapeMismatchError(msg)
    return rebuilt


def _check_finite(stage: str, x: Array) -> Array:
    if not np.all(np.isfinite(x)):
        msg = f"non-finite activations after {stage}"
        raise NumericError(msg)
    return x


def encoder_forward(
    z: Array,
    pos: Array | None,
    weights: ModelWeights,
    *,
    probe: AttentionProbe | None = None,
) -> Array:
    """Post-norm self-attention blocks; positions go into queries/keys."""
    if pos is not None and pos.shape != z.shape:
        msg = f"positions {pos.shape} do not match tokens {z.shape}"
        raise ShapeMismatchError(msg)
    heads = weights.config.heads
    for block in weights.encoder:
        attended = mha_forward(
            z,
            z,
            heads,
            block.self_attn,
            q_pos=pos,
            k_pos=pos,
            probe=probe,
            stage="encoder",
        )
        z = block.norm1(z + attended)
        z = block.norm2(z + block.ffn(z))
    return _check_finite("encoder", z)


def _cross_block_forward(  # noqa: PLR0913
    block: CrossBlock,
    x: Array,
    visible: Array,
    visible_pos: Array | None,
    heads: int,
    probe: AttentionProbe | None,
    stage: str,
    *,
    extend_with_self: bool,
) -> Array:
    attended = mha_forward(
        x,
        x,
        heads,
        block.self_attn,
        probe=probe,
        stage=stage,
    )
    x = block.norm1(x + attended)
    # FEM: memory = visible tokens + this layer's self-attention output
    memory = np.concatenate([visible, x]) if extend_with_self else visible
    memory_pos = None
    if visible_pos is not None:
        padding = np.zeros((memory.shape[0] - visible.shape[0], x.shape[1]))
        memory_pos = np.concatenate([visible_pos, padding])
    crossed = mha_forward(
        x,
        memory,
        heads,
        block.cross_attn,
        k_pos=memory_pos,
        probe=probe,
        stage=f"{stage}-cross",
    )
    x = block.norm2(x + crossed)
    return block.norm3(x + block.ffn(x))


def fem_forward(
    z_vis: Array,
    weights: ModelWeights,
    *,
    pos: Array | None = None,
    probe: AttentionProbe | None = None,
) -> Array:
    """Extrapolated tokens Z_pad (M x d) starting from the query m."""
    d = weights.config.d_model
    if z_vis.ndim != 2 or z_vis.shape[1] != d:  # noqa: PLR2004
        msg = f"visible tokens must be HW x {d}, got {z_vis.shape}"
        raise ShapeMismatchError(msg)
    x = weights.pad_query
    for block in weights.fem:
        x = _cross_block_forward(
            block,
            x,
            z_vis,
            pos,
            weights.config.heads,
            probe,
            "fem",
            extend_with_self=True,
        )
    return _check_finite("fem", weights.fem_output(x))


def _softplus(x: Array) -> Array:
    return np.logaddexp(0.0, x)


def _sigmoid(x: Array) -> Array:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def decoder_forward(
    z_vis: Array,
    z_pad: Array,
    weights: ModelWeights,
    *,
    pos: Array | None = None,
    probe: AttentionProbe | None = None,
) -> tuple[list[CompBox], list[float]]:
    """
    Anchors attend over memory = [Z_vis; Z_pad] and feed two heads.

    Centers are linear (unbounded, offset to the view center), sizes go
    through softplus and confidences through a sigmoid.
    """
    d = weights.config.d_model
    for name, tokens in (("z_vis", z_vis), ("z_pad", z_pad)):
        if tokens.ndim != 2 or tokens.shape[1] != d:  # noqa: PLR2004
            msg = f"{name} must be L x {d}, got {tokens.shape}"
            raise ShapeMismatchError(msg)
    memory = np.concatenate([z_vis, z_pad])
    memory_pos = None
    if pos is not None:
        memory_pos = np.concatenate([pos, np.zeros_like(z_pad)])
    x = weights.anchors
    for block in weights.decoder:
        x = _cross_block_forward(
            block,
            x,
            memory,
            memory_pos,
            weights.config.heads,
            probe,
            "decoder",
            extend_with_self=False,
        )
    _check_finite("decoder", x)
    raw_boxes = weights.box_head(x)
    centers = 0.5 + raw_boxes[:, :2]
    sizes = _softplus(raw_boxes[:, 2:]) + MIN_BOX_SIZE
    confidences = _sigmoid(weights.confidence_head(x)[:, 0])
    boxes = [
        CompBox(float(c[0]), float(c[1]), float(s[0]), float(s[1]))
        for c, s in zip(centers, sizes, strict=True)
    ]
    return boxes, [float(p) for p in confidences]


def run_pipeline(
    grid: FeatureGrid,
    weights: ModelWeights,
    *,
    use_positions: bool = True,
) -> ForwardTrace:
    """Feature grid -> tokens -> encoder -> FEM -> decoder heads."""
    probe = AttentionProbe()
    z = channel_reduce(grid, weights.reduce.weight, weights.reduce.bias)
    pos = None
    if use_positions:
        pos = sine_positional_embedding(
            grid.height,
            grid.width,
            weights.config.d_model,
        )
    z_vis = encoder_forward(z, pos, weights, probe=probe)
    z_pad = fem_forward(z_vis, weights, pos=pos, probe=probe)
    boxes, confidences = decoder_forward(
        z_vis,
        z_pad,
        weights,
        pos=pos,
        probe=probe,
    )
    return ForwardTrace(
        z_vis=z_vis,
        z_pad=z_pad,
        boxes=boxes,
        confidences=confidences,
        probe=probe,
    )


def to_predicted_views(trace: ForwardTrace) -> list[PredictedView]:
    return [
        PredictedView(box=box, confidence=conf)
        for box, conf in zip(trace.boxes, trace.confidences, strict=True)
    ]
