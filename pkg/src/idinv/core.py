"""Numeric domain types shared by every module: images, latent codes, masks, RNG.

Pixel convention is [-1, 1] float everywhere inside the package; 8-bit I/O
happens only at the edges (PNG load/save). Latent codes are layer-wise
[L, d] arrays tagged with the space they live in (Z or W).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateMaskError, InvalidArgumentError

RANGE_SLACK = 1e-6


@dataclass
class Image:
    """A [C, H, W] float image with values in [-1, 1], C in {1, 3}."""

    pixels: np.ndarray

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float32)
        if self.pixels.ndim != 3:
            raise InvalidArgumentError(f"image must be [C, H, W], got shape {self.pixels.shape}")
        if self.pixels.shape[0] not in (1, 3):
            raise InvalidArgumentError(f"channel count must be 1 or 3, got {self.pixels.shape[0]}")
        if not np.all(np.isfinite(self.pixels)):
            raise InvalidArgumentError("image contains non-finite values")
        lo, hi = float(self.pixels.min()), float(self.pixels.max())
        if lo < -1.0 - RANGE_SLACK or hi > 1.0 + RANGE_SLACK:
            raise InvalidArgumentError(f"pixel values outside [-1, 1]: min={lo}, max={hi}")

    @property
    def channels(self) -> int:
        return self.pixels.shape[0]

    @property
    def resolution(self) -> int:
        return self.pixels.shape[1]

    def close_to(self, other: "Image", atol: float = 0.0) -> bool:
        return self.pixels.shape == other.pixels.shape and bool(
            np.allclose(self.pixels, other.pixels, rtol=0.0, atol=atol)
        )


@dataclass
class LatentCode:
    """A layer-wise latent code of shape [L, d], tagged with its space.

    Z-tagged codes are single-row ([1, d]) samples from the prior; W-tagged
    codes live in the mapped space and may carry one row per generator layer.
    """

    values: np.ndarray
    space: str = "W"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        if self.values.ndim == 1:
            self.values = self.values[None, :]
        if self.values.ndim != 2:
            raise InvalidArgumentError(f"latent code must be [L, d], got shape {self.values.shape}")
        if self.values.shape[0] < 1:
            raise InvalidArgumentError("latent code needs at least one layer row")
        if self.space not in ("Z", "W"):
            raise InvalidArgumentError(f"unknown latent space tag {self.space!r}")
        if self.space == "Z" and self.values.shape[0] != 1:
            raise InvalidArgumentError("Z-tagged codes must have a single row")
        if not np.all(np.isfinite(self.values)):
            raise InvalidArgumentError("latent code contains non-finite values")

    @property
    def layers(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def copy(self) -> "LatentCode":
        return LatentCode(self.values.copy(), self.space)


@dataclass
class Mask:
    """A [1, H, W] spatial weight map with values in [0, 1].

    Real-valued rather than boolean so diffusion masks may be feathered.
    """

    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float32)
        if self.weights.ndim == 2:
            self.weights = self.weights[None]
        if self.weights.ndim != 3 or self.weights.shape[0] != 1:
            raise InvalidArgumentError(f"mask must be [1, H, W], got shape {self.weights.shape}")
        if not np.all(np.isfinite(self.weights)):
            raise InvalidArgumentError("mask contains non-finite values")
        if self.weights.min() < 0.0 or self.weights.max() > 1.0:
            raise InvalidArgumentError("mask weights must lie in [0, 1]")

    def support(self) -> float:
        """Total mask weight."""
        return float(self.weights.sum())


_BIT_GENERATORS = {
    "pcg64": np.random.PCG64,
    "philox": np.random.Philox,
}


@dataclass
class SeededRng:
    """A named, replayable random stream.

    The bit-generator algorithm is pinned by name so that a (seed, algorithm)
    pair recorded in a checkpoint replays the identical draw sequence on any
    machine. Instances are single-owner: one draw sequence per logical thread.
    """

    seed: int
    algorithm: str = "pcg64"
    _gen: np.random.Generator | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.algorithm not in _BIT_GENERATORS:
            raise InvalidArgumentError(
                f"unknown rng algorithm {self.algorithm!r}; known: {sorted(_BIT_GENERATORS)}"
            )
        self.seed = int(self.seed)
        if not (-(2**63) <= self.seed < 2**64):
            raise InvalidArgumentError("seed must fit in 64 bits")

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            bitgen = _BIT_GENERATORS[self.algorithm]
            self._gen = np.random.Generator(bitgen(np.random.SeedSequence(self.seed & (2**64 - 1))))
        return self._gen

    def normal(self, shape) -> np.ndarray:
        return self.generator.standard_normal(shape, dtype=np.float64)

    def uniform(self, low: float, high: float, shape) -> np.ndarray:
        return self.generator.uniform(low, high, shape)

    def integers(self, low: int, high: int, shape=None) -> np.ndarray:
        return self.generator.integers(low, high, shape)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)

    def child(self, index: int) -> "SeededRng":
        """Derive an independent stream, deterministically, for sub-tasks."""
        root = np.random.SeedSequence(self.seed & (2**64 - 1))
        child_seed = int(root.spawn(index + 1)[index].generate_state(1, np.uint64)[0])
        return SeededRng(child_seed, self.algorithm)


def sample_latent(rng: SeededRng, n: int, d: int) -> list[LatentCode]:
    """Draw ``n`` i.i.d. standard-normal Z codes of width ``d``."""
    if d <= 0:
        raise InvalidArgumentError(f"latent width must be positive, got {d}")
    if n < 0:
        raise InvalidArgumentError(f"sample count must be non-negative, got {n}")
    if n == 0:
        return []
    draws = rng.normal((n, d)).astype(np.float32)
    return [LatentCode(draws[i : i + 1].copy(), space="Z") for i in range(n)]


def rescale_pixels(raw: np.ndarray) -> Image:
    """Map 8-bit levels [0, 255] affinely to a [-1, 1] float image.

    Accepts [H, W] or [C, H, W] integer arrays. ``unrescale_pixels`` is the
    exact inverse on the 256-level grid.
    """
    raw = np.asarray(raw)
    if not np.issubdtype(raw.dtype, np.integer):
        raise InvalidArgumentError(f"expected an integer array, got dtype {raw.dtype}")
    if raw.min() < 0 or raw.max() > 255:
        raise InvalidArgumentError("raw pixel values must lie in [0, 255]")
    if raw.ndim == 2:
        raw = raw[None]
    pixels = (raw.astype(np.float64) * (2.0 / 255.0) - 1.0).astype(np.float32)
    return Image(pixels)


def unrescale_pixels(image: Image) -> np.ndarray:
    """Invert :func:`rescale_pixels` back to uint8 levels."""
    levels = np.rint((image.pixels.astype(np.float64) + 1.0) * (255.0 / 2.0))
    return np.clip(levels, 0, 255).astype(np.uint8)


def masked_mse(a: Image, b: Image, m: Mask) -> float:
    """Mean squared error over the support of ``m``, averaged per channel."""
    if a.pixels.shape != b.pixels.shape:
        raise InvalidArgumentError(
            f"image shapes differ: {a.pixels.shape} vs {b.pixels.shape}"
        )
    if m.weights.shape[1:] != a.pixels.shape[1:]:
        raise InvalidArgumentError(
            f"mask spatial size {m.weights.shape[1:]} does not match image {a.pixels.shape[1:]}"
        )
    total = m.support()
    if total <= 0.0:
        raise DegenerateMaskError("mask has zero support")
    sq = (a.pixels.astype(np.float64) - b.pixels.astype(np.float64)) ** 2
    weighted = (sq * m.weights.astype(np.float64)).sum()
    return float(weighted / (total * a.channels))


def full_mask(resolution: int) -> Mask:
    """All-ones mask for a square image."""
    return Mask(np.ones((1, resolution, resolution), dtype=np.float32))
