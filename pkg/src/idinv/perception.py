"""Small convolutional feature extractor used for perceptual loss and FFD.

Stands in for a large pretrained perceptual network: a compact classifier is
trained on the synthetic attribute task, then frozen, and its mid-level
convolutional activations become the feature space. The tap layer is named so
checkpoints record exactly which activations the features come from.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from ._torchify import image_to_tensor, seeded_torch
from .core import Image, SeededRng
from .errors import InvalidArgumentError, TrainingFailure

TAPS = ("block1", "block2", "block3")


@dataclass
class FeatureConfig:
    resolution: int = 32
    channels: int = 3
    width: int = 24
    num_attributes: int = 4
    tap: str = "block2"

    def __post_init__(self):
        if self.tap not in TAPS:
            raise InvalidArgumentError(f"unknown tap {self.tap!r}; known: {TAPS}")
        if self.width < 4:
            raise InvalidArgumentError("width must be at least 4")


@dataclass
class FeatureMap:
    """Activations read at the extractor's tap layer."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        if not np.all(np.isfinite(self.values)):
            raise InvalidArgumentError("feature map contains non-finite values")

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)


class FeatureExtractor(nn.Module):
    """Three conv blocks plus an attribute head; features read at ``tap``."""

    kind = "feature_extractor"

    def __init__(self, config: FeatureConfig):
        super().__init__()
        self.config = config
        w = config.width
        self.block1 = nn.Sequential(
            nn.Conv2d(config.channels, w, 3, padding=1), nn.LeakyReLU(0.2),
            nn.Conv2d(w, w, 3, padding=1, stride=2), nn.LeakyReLU(0.2),
        )
        self.block2 = nn.Sequential(
            nn.Conv2d(w, 2 * w, 3, padding=1), nn.LeakyReLU(0.2),
            nn.Conv2d(2 * w, 2 * w, 3, padding=1, stride=2), nn.LeakyReLU(0.2),
        )
        self.block3 = nn.Sequential(
            nn.Conv2d(2 * w, 4 * w, 3, padding=1), nn.LeakyReLU(0.2),
            nn.Conv2d(4 * w, 4 * w, 3, padding=1, stride=2), nn.LeakyReLU(0.2),
        )
        self.head = nn.Linear(4 * w, config.num_attributes)
        self.frozen = False
        self.holdout_accuracy: float | None = None

    def freeze(self) -> "FeatureExtractor":
        self.frozen = True
        self.requires_grad_(False)
        self.eval()
        return self

    def features_batch(self, x: torch.Tensor) -> torch.Tensor:
        """Tap activations for a [B, C, H, W] batch."""
        if x.shape[-1] != self.config.resolution:
            raise InvalidArgumentError(
                f"extractor trained at {self.config.resolution}, got {x.shape[-1]}"
            )
        x = self.block1(x)
        if self.config.tap == "block1":
            return x
        x = self.block2(x)
        if self.config.tap == "block2":
            return x
        return self.block3(x)

    def logits_batch(self, x: torch.Tensor) -> torch.Tensor:
        x = self.block3(self.block2(self.block1(x)))
        return self.head(x.mean(dim=(2, 3)))

    def embed_batch(self, x: torch.Tensor) -> torch.Tensor:
        """Spatially pooled tap activations, the FFD embedding."""
        return self.features_batch(x).mean(dim=(2, 3))

    @property
    def feature_dim(self) -> int:
        r = self.config.resolution
        per_block = {"block1": (1, 2), "block2": (2, 4), "block3": (4, 8)}
        mult, down = per_block[self.config.tap]
        return mult * self.config.width * (r // down) ** 2


@dataclass
class FeatureTrainConfig:
    steps: int = 1200
    batch_size: int = 32
    lr: float = 2e-3
    seed: int = 0
    holdout_fraction: float = 0.1
    min_accuracy: float = 0.90
    width: int = 24
    tap: str = "block2"

    def __post_init__(self):
        if self.steps < 1 or self.batch_size < 1:
            raise InvalidArgumentError("steps and batch_size must be positive")
        if not 0.0 < self.holdout_fraction < 1.0:
            raise InvalidArgumentError("holdout_fraction must be in (0, 1)")


def train_feature_extractor(dataset, config: FeatureTrainConfig | None = None) -> FeatureExtractor:
    """Train the attribute classifier, check held-out accuracy, freeze it.

    ``dataset`` must carry binary attribute labels (the synthetic set does).
    Deterministic given the config seed.
    """
    config = config or FeatureTrainConfig()
    if len(dataset) == 0:
        raise InvalidArgumentError("cannot train a feature extractor on an empty dataset")
    if not dataset.labels:
        raise InvalidArgumentError("feature extractor training needs attribute labels")

    attrs = sorted(dataset.labels)
    labels = np.stack([dataset.labels[a] for a in attrs], axis=1).astype(np.float32)
    holdout = max(1, int(len(dataset) * config.holdout_fraction))
    order = SeededRng(config.seed).permutation(len(dataset))
    train_idx, hold_idx = order[holdout:], order[:holdout]

    images = torch.from_numpy(dataset.images)
    targets = torch.from_numpy(labels)
    fcfg = FeatureConfig(
        resolution=dataset.resolution,
        channels=dataset.images.shape[1],
        width=config.width,
        num_attributes=len(attrs),
        tap=config.tap,
    )
    with seeded_torch(config.seed):
        model = FeatureExtractor(fcfg)
    opt = torch.optim.Adam(model.parameters(), lr=config.lr)
    batch_rng = SeededRng(config.seed).child(1)

    for step in range(config.steps):
        idx = train_idx[batch_rng.integers(0, len(train_idx), config.batch_size)]
        logits = model.logits_batch(images[idx])
        loss = F.binary_cross_entropy_with_logits(logits, targets[idx])
        if not torch.isfinite(loss):
            raise TrainingFailure("feature extractor loss became non-finite", step=step)
        opt.zero_grad(set_to_none=True)
        loss.backward()
        opt.step()

    with torch.no_grad():
        preds = model.logits_batch(images[hold_idx]) > 0
        accuracy = float((preds == (targets[hold_idx] > 0.5)).float().mean())
    model.holdout_accuracy = accuracy
    if accuracy < config.min_accuracy:
        raise TrainingFailure(
            f"held-out attribute accuracy {accuracy:.3f} below required {config.min_accuracy}"
        )
    return model.freeze()


def predict_attributes(F_ext: FeatureExtractor, images) -> np.ndarray:
    """Binary attribute predictions for an [N, C, H, W] array or Image list."""
    if len(images) and isinstance(images[0], Image):
        images = np.stack([im.pixels for im in images])
    with torch.no_grad():
        logits = F_ext.logits_batch(torch.from_numpy(np.asarray(images, dtype=np.float32)))
    return logits.numpy() > 0


def extract_features(F_ext: FeatureExtractor, x: Image) -> FeatureMap:
    """Deterministic tap activations for one image."""
    with torch.no_grad():
        feats = F_ext.features_batch(image_to_tensor(x)[None])[0]
    return FeatureMap(feats.numpy())


def perceptual_distance(F_ext: FeatureExtractor, a: Image, b: Image) -> float:
    """L2 distance between tap features of two images."""
    if a.pixels.shape != b.pixels.shape:
        raise InvalidArgumentError("images must share a shape")
    fa, fb = extract_features(F_ext, a), extract_features(F_ext, b)
    return float(np.linalg.norm(fa.flat().astype(np.float64) - fb.flat().astype(np.float64)))
