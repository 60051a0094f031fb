"""Dataset ingestion, checkpoint persistence and experiment configuration.

The synthetic dataset renders soft-edged ellipses whose four generative
parameters (size, shade, x-position, aspect) double as exact binary attribute
labels, standing in for externally-classified face attributes. Checkpoints
are directory bundles: a JSON manifest plus one raw little-endian float32
file per parameter tensor, so nothing framework-specific touches disk.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import struct
import tempfile
from dataclasses import dataclass, field

import numpy as np
from PIL import Image as PILImage

from ._config import config_from_dict, config_to_dict
from .core import Image, SeededRng, rescale_pixels, unrescale_pixels
from .errors import (
    CorruptionError,
    InvalidArgumentError,
    NotFoundError,
    UnsupportedVersionError,
)

ATTRIBUTES = ("size", "shade", "xpos", "aspect")

FORMAT_VERSION = 1
TENSOR_MAGIC = b"IDT1"
_DTYPE_CODES = {0: np.dtype("<f4")}

# fraction of each attribute range kept clear around the label threshold
THRESHOLD_GAP = 0.04


@dataclass
class DatasetSpec:
    """Where training/probing images come from: a synthetic render or a folder."""

    kind: str = "synthetic"
    resolution: int = 32
    count: int = 5000
    channels: int = 3
    seed: int = 0
    folder: str | None = None
    # attribute parameter ranges; labels threshold at each range midpoint
    size_range: tuple = (0.12, 0.30)
    shade_range: tuple = (0.25, 0.95)
    xpos_range: tuple = (0.35, 0.65)
    aspect_range: tuple = (-0.45, 0.45)

    def __post_init__(self):
        if self.kind not in ("synthetic", "folder"):
            raise InvalidArgumentError(f"unknown dataset kind {self.kind!r}")
        if self.kind == "synthetic":
            if self.count < 1:
                raise InvalidArgumentError("synthetic dataset count must be >= 1")
            if self.channels not in (1, 3):
                raise InvalidArgumentError("channels must be 1 or 3")
            for name in ATTRIBUTES:
                lo, hi = getattr(self, f"{name}_range")
                if not lo < hi:
                    raise InvalidArgumentError(f"empty range for attribute {name!r}")
        elif self.folder is None:
            raise InvalidArgumentError("folder datasets need a folder path")

    def threshold(self, attribute: str) -> float:
        lo, hi = getattr(self, f"{attribute}_range")
        return 0.5 * (lo + hi)


class Dataset:
    """In-memory image set with optional binary attribute labels."""

    def __init__(self, images: np.ndarray, labels=None, params=None, spec: DatasetSpec | None = None):
        self.images = np.asarray(images, dtype=np.float32)
        self.labels = {k: np.asarray(v, dtype=bool) for k, v in (labels or {}).items()}
        self.params = {k: np.asarray(v) for k, v in (params or {}).items()}
        self.spec = spec

    def __len__(self) -> int:
        return self.images.shape[0]

    @property
    def resolution(self) -> int:
        return self.images.shape[2]

    @property
    def attributes(self) -> list[str]:
        return list(self.labels)

    def image(self, index: int) -> Image:
        return Image(self.images[index])

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices)
        return Dataset(
            self.images[idx],
            {k: v[idx] for k, v in self.labels.items()},
            {k: v[idx] for k, v in self.params.items()},
            self.spec,
        )

    def split(self, holdout: int, seed: int = 0) -> tuple["Dataset", "Dataset"]:
        """Deterministic (train, holdout) split."""
        if not 0 < holdout < len(self):
            raise InvalidArgumentError(f"holdout size {holdout} out of range for {len(self)} images")
        order = SeededRng(seed).permutation(len(self))
        return self.subset(order[holdout:]), self.subset(order[:holdout])


def _render_blobs(spec: DatasetSpec, params: dict) -> np.ndarray:
    """Vectorized soft-ellipse renderer, quantized to the 8-bit grid."""
    res, n = spec.resolution, len(params["size"])
    yy, xx = np.mgrid[0:res, 0:res].astype(np.float64) + 0.5
    size = params["size"][:, None, None] * res
    aspect = np.exp(0.5 * params["aspect"])[:, None, None]
    rx, ry = size * aspect, size / aspect
    cx = params["xpos"][:, None, None] * res
    cy = params["ypos"][:, None, None] * res
    dist = np.sqrt(((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2)
    signed_px = (1.0 - dist) * np.minimum(rx, ry)
    alpha = np.clip(0.5 + signed_px / 1.5, 0.0, 1.0)[:, None, :, :]  # [N,1,H,W]

    tint = np.array([1.0, 0.85, 0.60][: spec.channels])[None, :, None, None]
    base = np.array([0.10, 0.12, 0.16][: spec.channels])[None, :, None, None]
    fg = params["shade"][:, None, None, None] * tint
    bg = base + params["bg"][:, None, None, None]
    img01 = bg * (1.0 - alpha) + fg * alpha
    return np.rint(np.clip(img01, 0.0, 1.0) * 255.0).astype(np.uint8)


def make_synthetic_dataset(spec: DatasetSpec, seed: int | None = None) -> Dataset:
    """Render a labeled synthetic set; deterministic given (spec, seed).

    Each attribute's labels are exactly balanced and its parameter is drawn
    uniformly from the labeled side of the threshold, with a small dead zone
    so no image sits on a boundary.
    """
    if spec.kind != "synthetic":
        raise InvalidArgumentError("make_synthetic_dataset needs a synthetic spec")
    rng = SeededRng(spec.seed if seed is None else seed)
    n = spec.count

    labels, params = {}, {}
    for name in ATTRIBUTES:
        lo, hi = getattr(spec, f"{name}_range")
        thr, gap = spec.threshold(name), THRESHOLD_GAP * (hi - lo)
        lab = np.zeros(n, dtype=bool)
        lab[: n // 2] = True
        lab = lab[rng.permutation(n)]
        u = rng.uniform(0.0, 1.0, n)
        low_side = lo + u * (thr - gap - lo)
        high_side = thr + gap + u * (hi - thr - gap)
        params[name] = np.where(lab, high_side, low_side)
        labels[name] = lab
    params["ypos"] = rng.uniform(0.45, 0.55, n)
    params["bg"] = rng.uniform(0.0, 0.06, n)

    raw = _render_blobs(spec, params)
    images = (raw.astype(np.float64) * (2.0 / 255.0) - 1.0).astype(np.float32)
    return Dataset(images, labels, params, spec)


def save_image(image: Image, path: str) -> None:
    arr = unrescale_pixels(image)
    arr = arr[0] if arr.shape[0] == 1 else arr.transpose(1, 2, 0)
    PILImage.fromarray(arr).save(path, format="PNG")


def load_image(path: str) -> Image:
    try:
        with PILImage.open(path) as img:
            arr = np.asarray(img.convert("RGB") if img.mode not in ("L", "RGB") else img)
    except FileNotFoundError:
        raise NotFoundError(f"no such image: {path}")
    except Exception as exc:
        raise InvalidArgumentError(f"failed to decode {path}: {exc}") from exc
    arr = arr[None] if arr.ndim == 2 else arr.transpose(2, 0, 1)
    return rescale_pixels(arr.astype(np.int32))


def save_images(images, directory: str, prefix: str = "") -> list:
    os.makedirs(directory, exist_ok=True)
    paths = []
    for i, image in enumerate(images):
        path = os.path.join(directory, f"{prefix}{i:06d}.png")
        save_image(image if isinstance(image, Image) else Image(image), path)
        paths.append(path)
    return paths


def load_image_folder(path: str) -> Dataset:
    """Load every PNG under ``path`` in lexicographic order."""
    if not os.path.isdir(path):
        raise NotFoundError(f"no such folder: {path}")
    names = sorted(f for f in os.listdir(path) if f.lower().endswith(".png"))
    if not names:
        raise NotFoundError(f"no PNG files in {path}")
    images = []
    for name in names:
        img = load_image(os.path.join(path, name))
        if images and img.pixels.shape != images[0].shape:
            raise InvalidArgumentError(
                f"mixed resolutions in {path}: {name} is {img.pixels.shape}, "
                f"expected {images[0].shape}"
            )
        images.append(img.pixels)
    return Dataset(np.stack(images))


def load_dataset(spec: DatasetSpec) -> Dataset:
    if spec.kind == "synthetic":
        return make_synthetic_dataset(spec)
    return load_image_folder(spec.folder)


def save_dataset(dataset: Dataset, path: str) -> None:
    """Write a dataset as an images/ folder plus labels and parameters JSON."""
    os.makedirs(path, exist_ok=True)
    save_images(dataset.images, os.path.join(path, "images"))
    meta = {
        "labels": {k: v.astype(int).tolist() for k, v in dataset.labels.items()},
        "params": {k: np.asarray(v, dtype=np.float64).tolist() for k, v in dataset.params.items()},
    }
    if dataset.spec is not None:
        meta["spec"] = config_to_dict(dataset.spec)
    with open(os.path.join(path, "dataset.json"), "w") as fh:
        json.dump(meta, fh, sort_keys=True)
        fh.write("\n")


def load_saved_dataset(path: str) -> Dataset:
    """Load a dataset written by ``save_dataset``, labels included."""
    meta_path = os.path.join(path, "dataset.json")
    if not os.path.exists(meta_path):
        raise NotFoundError(f"{path} has no dataset.json; not a saved dataset")
    with open(meta_path) as fh:
        meta = json.load(fh)
    base = load_image_folder(os.path.join(path, "images"))
    spec = config_from_dict(DatasetSpec, meta["spec"]) if "spec" in meta else None
    return Dataset(base.images, meta.get("labels"), meta.get("params"), spec)


# --- checkpoint bundle ------------------------------------------------------


def write_tensor(path: str, array: np.ndarray) -> None:
    array = np.asarray(array)
    if array.dtype != np.float32:
        raise InvalidArgumentError(f"checkpoint tensors must be float32, got {array.dtype}")
    if array.ndim > 4 or any(s > 0xFFFF for s in array.shape):
        raise InvalidArgumentError(f"tensor shape {array.shape} does not fit the header")
    dims = list(array.shape) + [1] * (4 - array.ndim)
    header = struct.pack("<4sHH4H", TENSOR_MAGIC, 0, array.ndim, *dims)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(array.astype("<f4").tobytes(order="C"))


def read_tensor(path: str) -> np.ndarray:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except FileNotFoundError:
        raise CorruptionError(f"manifest references missing tensor file {path}")
    if len(blob) < 16 or blob[:4] != TENSOR_MAGIC:
        raise CorruptionError(f"bad tensor header in {path}")
    _, dtype_code, rank, *dims = struct.unpack("<4sHH4H", blob[:16])
    if dtype_code not in _DTYPE_CODES:
        raise CorruptionError(f"unknown dtype code {dtype_code} in {path}")
    shape = tuple(dims[:rank])
    expected = int(np.prod(shape)) * 4 if rank else 4
    if len(blob) - 16 != expected:
        raise CorruptionError(
            f"tensor file {path} is truncated or oversized "
            f"({len(blob) - 16} data bytes, expected {expected})"
        )
    return np.frombuffer(blob[16:], dtype=_DTYPE_CODES[dtype_code]).reshape(shape).copy()


def _model_registry():
    # imported lazily: training/perception import this module for Dataset
    from .perception import FeatureConfig, FeatureExtractor
    from .synthesis import GeneratorConfig, GeneratorModel
    from .training import DiscriminatorConfig, DiscriminatorModel, EncoderConfig, EncoderModel

    return {
        "generator": (GeneratorConfig, GeneratorModel),
        "encoder": (EncoderConfig, EncoderModel),
        "discriminator": (DiscriminatorConfig, DiscriminatorModel),
        "feature_extractor": (FeatureConfig, FeatureExtractor),
    }


def save_checkpoint(models: dict, path: str, rng_algorithm: str = "pcg64") -> None:
    """Persist named models as a whole-bundle-atomic directory."""
    import shutil

    parent = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(parent, exist_ok=True)
    manifest = {"format_version": FORMAT_VERSION, "rng_algorithm": rng_algorithm, "models": {}}

    tmp = tempfile.mkdtemp(dir=parent, prefix=".ckpt-")
    try:
        for name, model in sorted(models.items()):
            entry = {
                "kind": model.kind,
                "frozen": bool(getattr(model, "frozen", False)),
                "config": config_to_dict(model.config),
                "tensors": {},
            }
            for pname, tensor in sorted(model.state_dict().items()):
                arr = tensor.detach().cpu().numpy()
                if arr.dtype != np.float32:
                    arr = arr.astype(np.float32)
                fname = f"{name}__{pname.replace('/', '_')}.bin"
                write_tensor(os.path.join(tmp, fname), arr)
                entry["tensors"][pname] = {
                    "file": fname,
                    "dims": list(arr.shape),
                    "sha256": hashlib.sha256(arr.astype("<f4").tobytes(order="C")).hexdigest(),
                }
            manifest["models"][name] = entry
        with open(os.path.join(tmp, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")

        if os.path.isdir(path):
            backup = path + ".old"
            os.rename(path, backup)
            os.rename(tmp, path)
            shutil.rmtree(backup)
        else:
            os.rename(tmp, path)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise


def load_checkpoint(path: str) -> dict:
    """Load a bundle back into model objects, verifying every tensor."""
    import torch

    manifest_path = os.path.join(path, "manifest.json")
    if not os.path.isdir(path) or not os.path.exists(manifest_path):
        raise NotFoundError(f"no checkpoint bundle at {path}")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"bundle format version {version!r} is not supported (expected {FORMAT_VERSION})"
        )
    registry = _model_registry()
    models = {}
    for name, entry in manifest["models"].items():
        if entry["kind"] not in registry:
            raise CorruptionError(f"manifest names unknown model kind {entry['kind']!r}")
        cfg_cls, model_cls = registry[entry["kind"]]
        model = model_cls(config_from_dict(cfg_cls, entry["config"]))
        state = {}
        for pname, meta in entry["tensors"].items():
            arr = read_tensor(os.path.join(path, meta["file"]))
            if list(arr.shape) != list(meta["dims"]):
                raise CorruptionError(
                    f"tensor {meta['file']} has dims {list(arr.shape)}, manifest says {meta['dims']}"
                )
            digest = hashlib.sha256(arr.astype("<f4").tobytes(order="C")).hexdigest()
            if digest != meta["sha256"]:
                raise CorruptionError(f"tensor {meta['file']} failed its hash check")
            state[pname] = torch.from_numpy(arr)
        model.load_state_dict(state, strict=True)
        if entry.get("frozen"):
            model.freeze()
        models[name] = model
    return models


# --- experiment configuration -----------------------------------------------


@dataclass
class MetricConfig:
    """Knobs for the distribution metrics."""

    swd_patch: int = 7
    swd_projections: int = 128
    swd_patches_per_image: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.swd_patch < 1 or self.swd_projections < 1 or self.swd_patches_per_image < 1:
            raise InvalidArgumentError("metric config values must be positive")


@dataclass
class ExperimentConfig:
    """One JSON document binding every stage of an experiment run."""

    dataset: "DatasetSpec" = field(default_factory=DatasetSpec)
    gan: dict = field(default_factory=dict)
    encoder: dict = field(default_factory=dict)
    inversion: dict = field(default_factory=dict)
    metrics: MetricConfig = field(default_factory=MetricConfig)
    checkpoint: str = "checkpoint"
    out_dir: str = "out"

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidArgumentError(f"experiment config is not valid JSON: {exc}") from exc
        cfg = config_from_dict(cls, data)
        # strict-validate nested training/inversion dicts against their configs
        from .inversion import InversionConfig
        from .training import TrainingConfig

        config_from_dict(TrainingConfig, cfg.gan)
        config_from_dict(TrainingConfig, cfg.encoder)
        config_from_dict(InversionConfig, cfg.inversion)
        return cfg

    def to_json(self) -> str:
        return json.dumps(config_to_dict(self), indent=2, sort_keys=True)

    def training_config(self, which: str):
        from .training import TrainingConfig

        return config_from_dict(TrainingConfig, getattr(self, which))

    def inversion_config(self):
        from .inversion import InversionConfig

        return config_from_dict(InversionConfig, self.inversion)
