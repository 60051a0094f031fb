"""Semantic probing and distribution metrics.

Boundary fitting follows the classic recipe: reduce each layer-wise code to a
single vector by row mean, fit a soft-margin linear SVM (C = 1.0), and keep
the unit normal plus rescaled bias so scores are signed distances to the
hyperplane. PR curves enumerate every distinct score threshold; the AUC is the
trapezoid over recall with an implicit start point at recall 0.

SWD compares sets of 7x7 patch descriptors through seeded random projections
using the exact sort-based 1-D Wasserstein-1 distance. FFD is the Fréchet
distance between Gaussian fits of pooled extractor features (the FID recipe
over the local feature extractor — renamed so nobody reads the numbers as
paper-scale FID values).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import torch
from sklearn import svm as sklearn_svm

from .core import Image, LatentCode, SeededRng
from .errors import InvalidArgumentError, MetricFailure
from .workspace import MetricConfig

_FFD_EPS = 1e-6


# ---------------------------------------------------------------------------
# semantic boundaries


@dataclass
class SemanticBoundary:
    """A latent hyperplane: unit normal, bias, and the attribute it separates."""

    attribute: str
    normal: np.ndarray
    bias: float
    train_accuracy: float = float("nan")

    def __post_init__(self):
        self.normal = np.asarray(self.normal, dtype=np.float64).reshape(-1)
        norm = np.linalg.norm(self.normal)
        if not np.isfinite(norm) or abs(norm - 1.0) > 1e-6:
            raise InvalidArgumentError("boundary normal must have unit length")
        self.bias = float(self.bias)

    @property
    def dim(self) -> int:
        return self.normal.size

    def to_dict(self) -> dict:
        return {"attribute": self.attribute, "normal": self.normal.tolist(),
                "bias": self.bias, "train_accuracy": self.train_accuracy}

    @classmethod
    def from_dict(cls, data: dict) -> "SemanticBoundary":
        return cls(attribute=data["attribute"], normal=np.asarray(data["normal"]),
                   bias=data["bias"], train_accuracy=data.get("train_accuracy", float("nan")))


def code_vector(code: LatentCode) -> np.ndarray:
    """Reduce a layer-wise code to one vector by row mean."""
    return code.values.astype(np.float64).mean(axis=0)


def _code_matrix(codes) -> np.ndarray:
    if isinstance(codes, np.ndarray):
        arr = codes.astype(np.float64)
        if arr.ndim == 3:
            arr = arr.mean(axis=1)
        if arr.ndim != 2:
            raise InvalidArgumentError("expected codes of shape [N, L, d] or [N, d]")
        return arr
    return np.stack([code_vector(c) for c in codes])


def fit_boundary(codes, labels, attribute: str = "") -> SemanticBoundary:
    """Fit a maximum-margin linear separator for one binary attribute."""
    X = _code_matrix(codes)
    y = np.asarray(labels).astype(bool)
    if len(X) != len(y):
        raise InvalidArgumentError("codes and labels must have equal length")
    if y.all() or not y.any():
        raise InvalidArgumentError("boundary fitting needs both classes present")
    clf = sklearn_svm.SVC(kernel="linear", C=1.0)
    clf.fit(X, y)
    w = clf.coef_[0].astype(np.float64)
    norm = np.linalg.norm(w)
    return SemanticBoundary(
        attribute=attribute, normal=w / norm, bias=float(clf.intercept_[0]) / norm,
        train_accuracy=float(clf.score(X, y)))


def classify_codes(boundary: SemanticBoundary, codes) -> np.ndarray:
    """Signed distances normal . vector + bias for each code."""
    X = _code_matrix(codes)
    if X.shape[1] != boundary.dim:
        raise InvalidArgumentError("code width does not match the boundary normal")
    return X @ boundary.normal + boundary.bias


# ---------------------------------------------------------------------------
# precision-recall


@dataclass
class PRCurve:
    """Precision/recall at each distinct score threshold, descending."""

    points: list  # (precision, recall, threshold)
    auc: float

    def __post_init__(self):
        for p, r, _ in self.points:
            if not (0.0 <= p <= 1.0 and 0.0 <= r <= 1.0):
                raise InvalidArgumentError("precision and recall must lie in [0, 1]")
        recalls = [r for _, r, _ in self.points]
        if any(b < a for a, b in zip(recalls, recalls[1:])):
            raise InvalidArgumentError("recalls must be non-decreasing")

    def to_dict(self) -> dict:
        return {"points": [{"precision": p, "recall": r, "threshold": t}
                           for p, r, t in self.points],
                "auc": self.auc}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def to_csv(self) -> str:
        lines = ["precision,recall,threshold"]
        lines += [f"{p:.10g},{r:.10g},{t:.10g}" for p, r, t in self.points]
        return "\n".join(lines) + "\n"


def pr_curve(scores, labels) -> PRCurve:
    """Precision-recall curve over all distinct thresholds, plus trapezoid AUC."""
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).astype(bool).reshape(-1)
    if scores.size != labels.size:
        raise InvalidArgumentError("scores and labels must have equal length")
    if scores.size == 0 or not labels.any():
        raise InvalidArgumentError("precision-recall needs at least one positive label")

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    tp = np.cumsum(labels[order])
    positives = int(labels.sum())
    ranks = np.arange(1, scores.size + 1)
    # keep only the last index of each run of equal scores: one point per
    # distinct threshold
    keep = np.r_[sorted_scores[1:] != sorted_scores[:-1], True]
    precision = tp[keep] / ranks[keep]
    recall = tp[keep] / positives
    thresholds = sorted_scores[keep]

    points = list(zip(precision.tolist(), recall.tolist(), thresholds.tolist()))
    r_path = np.r_[0.0, recall]
    p_path = np.r_[precision[0], precision]
    auc = float(np.trapezoid(p_path, r_path))
    return PRCurve(points=points, auc=auc)


# ---------------------------------------------------------------------------
# pixel / distribution metrics


def _image_array(images) -> np.ndarray:
    if isinstance(images, np.ndarray):
        arr = np.asarray(images, dtype=np.float64)
        if arr.ndim != 4:
            raise InvalidArgumentError("expected an [N, C, H, W] image array")
        return arr
    return np.stack([im.pixels.astype(np.float64) for im in images])


def mse_metric(set_a, set_b) -> float:
    """Mean over pairs of per-image pixel MSE."""
    a, b = _image_array(set_a), _image_array(set_b)
    if a.shape != b.shape:
        raise InvalidArgumentError("paired image sets must share a shape")
    if len(a) == 0:
        raise InvalidArgumentError("need at least one image pair")
    return float(np.mean((a - b) ** 2))


def _patch_descriptors(images: np.ndarray, config: MetricConfig) -> np.ndarray:
    """Seeded random patch descriptors, [N * patches_per_image, C * patch^2].

    The position stream restarts per set, so identical sets yield identical
    descriptors (and an SWD of exactly zero).
    """
    n, c, h, w = images.shape
    p = config.swd_patch
    if h < p or w < p:
        raise InvalidArgumentError(f"images smaller than the {p}x{p} patch size")
    rng = SeededRng(config.seed).child(0)
    tops = rng.integers(0, h - p + 1, (n, config.swd_patches_per_image))
    lefts = rng.integers(0, w - p + 1, (n, config.swd_patches_per_image))
    out = np.empty((n * config.swd_patches_per_image, c * p * p))
    k = 0
    for i in range(n):
        for j in range(config.swd_patches_per_image):
            t, l = tops[i, j], lefts[i, j]
            out[k] = images[i, :, t:t + p, l:l + p].reshape(-1)
            k += 1
    return out


def swd_from_descriptors(desc_a, desc_b, config: MetricConfig | None = None) -> float:
    """Sliced Wasserstein-1 between two descriptor sets.

    Projects both sets onto seeded random unit directions and averages the
    exact sort-based 1-D Wasserstein-1 distances. Unequal set sizes are
    deterministically subsampled to the smaller count.
    """
    config = config or MetricConfig()
    a = np.asarray(desc_a, dtype=np.float64)
    b = np.asarray(desc_b, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    if len(a) == 0 or len(b) == 0:
        raise InvalidArgumentError("descriptor sets must be non-empty")
    if a.shape[1] != b.shape[1]:
        raise InvalidArgumentError("descriptor widths must match")
    n = min(len(a), len(b))
    sub_rng = SeededRng(config.seed).child(1)
    if len(a) > n:
        a = a[np.sort(sub_rng.permutation(len(a))[:n])]
    if len(b) > n:
        b = b[np.sort(sub_rng.permutation(len(b))[:n])]

    proj_rng = SeededRng(config.seed).child(2)
    proj = proj_rng.normal((config.swd_projections, a.shape[1]))
    proj /= np.linalg.norm(proj, axis=1, keepdims=True)
    pa = np.sort(a @ proj.T, axis=0)
    pb = np.sort(b @ proj.T, axis=0)
    return float(np.mean(np.abs(pa - pb)))


def swd(set_a, set_b, config: MetricConfig | None = None) -> float:
    """Sliced Wasserstein distance between two image sets over 7x7 patches."""
    config = config or MetricConfig()
    a, b = _image_array(set_a), _image_array(set_b)
    if len(a) == 0 or len(b) == 0:
        raise InvalidArgumentError("image sets must be non-empty")
    return swd_from_descriptors(_patch_descriptors(a, config),
                                _patch_descriptors(b, config), config)


def ffd_from_features(features_a, features_b) -> float:
    """Fréchet distance between Gaussian fits of two feature sets."""
    fa = np.atleast_2d(np.asarray(features_a, dtype=np.float64))
    fb = np.atleast_2d(np.asarray(features_b, dtype=np.float64))
    if fa.shape[1] != fb.shape[1]:
        raise InvalidArgumentError("feature widths must match")
    if len(fa) < 2 or len(fb) < 2:
        raise InvalidArgumentError("need at least two samples per set")
    mu_a, mu_b = fa.mean(axis=0), fb.mean(axis=0)
    cov_a = np.atleast_2d(np.cov(fa, rowvar=False))
    cov_b = np.atleast_2d(np.cov(fb, rowvar=False))

    covmean, _ = scipy.linalg.sqrtm(cov_a @ cov_b, disp=False)
    if not np.isfinite(covmean).all():
        offset = np.eye(cov_a.shape[0]) * _FFD_EPS
        covmean, _ = scipy.linalg.sqrtm((cov_a + offset) @ (cov_b + offset), disp=False)
    if not np.isfinite(covmean).all():
        raise MetricFailure(
            "matrix square root failed: "
            f"cond(cov_a)={np.linalg.cond(cov_a):.3e}, "
            f"cond(cov_b)={np.linalg.cond(cov_b):.3e}")
    if np.iscomplexobj(covmean):
        if np.abs(covmean.imag).max() > 1e-3:
            raise MetricFailure(
                "matrix square root has a large imaginary component "
                f"({np.abs(covmean.imag).max():.3e})")
        covmean = covmean.real

    diff = mu_a - mu_b
    value = float(diff @ diff + np.trace(cov_a) + np.trace(cov_b) - 2.0 * np.trace(covmean))
    if -1e-6 < value < 0.0:
        value = 0.0  # numerical dust from the square root
    return value


def ffd(set_a, set_b, F_ext, batch_size: int = 256) -> float:
    """Fréchet feature distance between two image sets under the extractor."""
    a, b = _image_array(set_a), _image_array(set_b)
    if len(a) == 0 or len(b) == 0:
        raise InvalidArgumentError("image sets must be non-empty")

    def embed(arr):
        chunks = []
        with torch.no_grad():
            for i in range(0, len(arr), batch_size):
                batch = torch.from_numpy(arr[i:i + batch_size].astype(np.float32))
                chunks.append(F_ext.embed_batch(batch).numpy())
        return np.concatenate(chunks).astype(np.float64)

    fa, fb = embed(a), embed(b)
    dim = fa.shape[1]
    if min(len(fa), len(fb)) < dim:
        warnings.warn(
            f"sample counts ({len(fa)}, {len(fb)}) below feature dim {dim}; "
            "covariance estimates will be noisy", stacklevel=2)
    return ffd_from_features(fa, fb)


# ---------------------------------------------------------------------------
# reports


@dataclass
class MetricReport:
    mse: float
    swd: float
    ffd: float
    count_a: int
    count_b: int
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("mse", "swd", "ffd"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise InvalidArgumentError(f"{name} must be finite and non-negative")

    def to_dict(self) -> dict:
        return {"mse": self.mse, "swd": self.swd, "ffd": self.ffd,
                "count_a": self.count_a, "count_b": self.count_b,
                "config": self.config}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def metric_report(originals, reconstructions, F_ext,
                  config: MetricConfig | None = None) -> MetricReport:
    """Paired MSE plus set-level SWD and FFD between the two collections."""
    config = config or MetricConfig()
    from ._config import config_to_dict
    return MetricReport(
        mse=mse_metric(originals, reconstructions),
        swd=swd(originals, reconstructions, config),
        ffd=ffd(originals, reconstructions, F_ext),
        count_a=len(originals), count_b=len(reconstructions),
        config=config_to_dict(config))


# ---------------------------------------------------------------------------
# the probing experiment


@dataclass
class ProbeReport:
    """Boundaries from generator samples plus per-inverter PR curves."""

    boundaries: dict  # attribute -> SemanticBoundary
    curves: dict  # inverter name -> attribute -> PRCurve

    def auc_table(self) -> dict:
        return {name: {attr: curve.auc for attr, curve in by_attr.items()}
                for name, by_attr in self.curves.items()}


def semantic_probe_experiment(G, inverters: dict, dataset, F_ext,
                              boundary_samples: int = 512,
                              seed: int = 0, encoder=None) -> ProbeReport:
    """Fit boundaries on labeled generator samples, then score real inversions.

    Boundaries come from held-out generator samples labeled by the attribute
    classifier inside the feature extractor; each inverter (a callable
    Image -> LatentCode) then inverts the real dataset and its codes are
    scored against every boundary to produce PR curves against the dataset's
    ground-truth labels.

    When ``encoder`` is given, the boundary codes are the encoder's codes of
    the sampled images rather than the sampled codes themselves, so boundary
    and query codes share one geometry. That matters: the row mean of a
    layer-wise code lives in a different embedding than W itself, and a
    separator fit on broadcast samples scores near chance on inverted codes
    even when both are individually separable.
    """
    from .perception import predict_attributes

    if boundary_samples < 2:
        raise InvalidArgumentError("need at least two boundary samples")
    if not dataset.labels:
        raise InvalidArgumentError("probing needs a labeled dataset")

    rng = SeededRng(seed)
    z = torch.from_numpy(
        rng.normal((boundary_samples, G.config.mapper.d)).astype(np.float32))
    with torch.no_grad():
        w = G.map_batch(z)
        codes = w[:, None, :].expand(-1, G.config.num_layers, -1)
        samples = G.synthesize_batch(codes)
        boundary_codes = (encoder.encode_batch(samples) if encoder is not None
                          else codes).numpy()
        samples = samples.numpy()
    probe_labels = predict_attributes(F_ext, samples)

    attrs = sorted(dataset.labels)
    boundaries = {}
    for j, attr in enumerate(attrs):
        boundaries[attr] = fit_boundary(boundary_codes, probe_labels[:, j], attribute=attr)

    curves = {}
    for name, invert_fn in inverters.items():
        inverted = np.stack(
            [invert_fn(Image(dataset.images[i])).values for i in range(len(dataset))])
        curves[name] = {}
        for attr in attrs:
            scores = classify_codes(boundaries[attr], inverted)
            curves[name][attr] = pr_curve(scores, dataset.labels[attr])
    return ProbeReport(boundaries=boundaries, curves=curves)
