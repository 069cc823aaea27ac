"""Backbone feature grids, channel reduction and positional embeddings."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from unickit.exceptions.local_exceptions import (
    InvalidDimensionsError,
    NumericError,
    SchemaError,
    ShapeMismatchError,
)

if TYPE_CHECKING:
    import numpy.typing as npt

BACKBONE_STRIDE = 32
BACKBONE_CHANNELS = 2048
FEATURE_DTYPE = np.dtype("<f4")
SINE_TEMPERATURE = 10000.0


@dataclass(frozen=True)
class FeatureGrid:
    """Backbone output of shape C x H x W."""

    data: npt.NDArray[np.float64]

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3 or min(data.shape) < 1:  # noqa: PLR2004
            msg = f"feature grid must be C x H x W, got {data.shape}"
            raise ShapeMismatchError(msg)
        if not np.all(np.isfinite(data)):
            msg = "feature grid has non-finite entries"
            raise NumericError(msg)
        object.__setattr__(self, "data", data)

    @property
    def channels(self) -> int:
        return int(self.data.shape[0])

    @property
    def height(self) -> int:
        return int(self.data.shape[1])

    @property
    def width(self) -> int:
        return int(self.data.shape[2])


def grid_size(h0: int, w0: int) -> tuple[int, int]:
    """Feature-grid height and width for an h0 x w0 pixel image."""
    if (
        h0 < BACKBONE_STRIDE
        or w0 < BACKBONE_STRIDE
        or h0 % BACKBONE_STRIDE
        or w0 % BACKBONE_STRIDE
    ):
        raise InvalidDimensionsError(h0, w0, BACKBONE_STRIDE)
    return h0 // BACKBONE_STRIDE, w0 // BACKBONE_STRIDE


def synth_features(
    h0: int,
    w0: int,
    seed: int,
    channels: int = BACKBONE_CHANNELS,
) -> FeatureGrid:
    """Standard-normal stand-in for the backbone's last feature map."""
    height, width = grid_size(h0, w0)
    rng = np.random.default_rng(seed)
    return FeatureGrid(rng.standard_normal((channels, height, width)))


def channel_reduce(
    grid: FeatureGrid,
    weight: npt.NDArray[np.float64],
    bias: npt.NDArray[np.float64],
) -> npt.NDArray[np.float64]:
    """1x1 convolution C -> d, then row-major flattening to H*W tokens."""
    if weight.shape[0] != grid.channels:
        msg = (
            f"grid has {grid.channels} channels, reduction expects "
            f"{weight.shape[0]}"
        )
        raise ShapeMismatchError(msg)
    positions = grid.data.reshape(grid.channels, -1).T
    return positions @ weight + bias


def sine_positional_embedding(
    height: int,
    width: int,
    d_model: int,
) -> npt.NDArray[np.float64]:
    """
    Fixed 2-D sine/cosine embedding, one row per grid position.

    The first half of the channels encodes y, the second half x.
    """
    if d_model % 4:
        msg = f"d_model {d_model} must be divisible by 4 for 2-D embeddings"
        raise ShapeMismatchError(msg)
    quarter = d_model // 4
    freqs = SINE_TEMPERATURE ** (-np.arange(quarter) / quarter)
    ys = (np.arange(height, dtype=np.float64) + 0.5) / height
    xs = (np.arange(width, dtype=np.float64) + 0.5) / width
    y_phase = np.outer(ys * 2 * np.pi, freqs)
    x_phase = np.outer(xs * 2 * np.pi, freqs)
    y_embed = np.concatenate([np.sin(y_phase), np.cos(y_phase)], axis=1)
    x_embed = np.concatenate([np.sin(x_phase), np.cos(x_phase)], axis=1)
    rows = np.repeat(y_embed, width, axis=0)
    cols = np.tile(x_embed, (height, 1))
    return np.concatenate([rows, cols], axis=1)


def write_feature_file(path: str | Path, grid: FeatureGrid) -> None:
    header = f"{grid.channels} {grid.height} {grid.width}\n".encode("ascii")
    payload = grid.data.astype(FEATURE_DTYPE).tobytes(order="C")
    Path(path).write_bytes(header + payload)


def read_feature_file(path: str | Path) -> FeatureGrid:
    """Read `C H W\\n` followed by little-endian float32 values."""
    source = str(path)
    raw = Path(path).read_bytes()
    newline = raw.find(b"\n")
    if newline < 0:
        raise SchemaError(source, ["missing 'C H W' header line"])
    try:
        dims = [int(part) for part in raw[:newline].decode("ascii").split()]
    except (UnicodeDecodeError, ValueError):
        raise SchemaError(source, ["header must be 'C H W'"]) from None
    if len(dims) != 3 or min(dims) < 1:  # noqa: PLR2004
        raise SchemaError(source, [f"bad header dimensions {dims}"])
    channels, height, width = dims
    payload = raw[newline + 1 :]
    expected = channels * height * width * FEATURE_DTYPE.itemsize
    if len(payload) != expected:
        raise SchemaError(
            source,
            [f"payload has {len(payload)} bytes, header implies {expected}"],
        )
    values = np.frombuffer(payload, dtype=FEATURE_DTYPE)
    return FeatureGrid(
        values.reshape(channels, height, width).astype(np.float64),
    )
