"""Bridging helpers between the numpy-facing API and the torch internals."""

from __future__ import annotations

import contextlib

import numpy as np
import torch

from .core import Image, LatentCode

# CPU determinism: every op used here has a deterministic kernel; fail loudly
# if a future change introduces one that does not.
torch.use_deterministic_algorithms(True)


@contextlib.contextmanager
def seeded_torch(seed: int):
    """Run a block under a forked, seeded torch RNG without touching global state."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        yield


def image_to_tensor(image: Image, dtype=torch.float32) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(image.pixels)).to(dtype)


def images_to_tensor(images, dtype=torch.float32) -> torch.Tensor:
    return torch.stack([image_to_tensor(im, dtype) for im in images])


def tensor_to_image(t: torch.Tensor) -> Image:
    arr = t.detach().cpu().numpy().astype(np.float32)
    return Image(np.clip(arr, -1.0, 1.0))


def code_to_tensor(code: LatentCode, dtype=torch.float32) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(code.values)).to(dtype)


def tensor_to_code(t: torch.Tensor, space: str = "W") -> LatentCode:
    return LatentCode(t.detach().cpu().numpy().astype(np.float32), space=space)


def count_parameters(module: torch.nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())
