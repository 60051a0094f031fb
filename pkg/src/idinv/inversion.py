"""Latent optimization that inverts real images into the generator's domain.

The objective for a target image x and layer-wise code z is

    ||x - G(z)||_2  +  lambda_vgg * ||F(x) - F(G(z))||_2
                    +  lambda_dom * ||z - E(G(z))||_2

where every norm is a true L2 norm over the flattened array (sums of squares,
rooted — not means). The domain term pulls the trajectory toward codes the
encoder itself would produce, keeping reconstructions semantically
well-behaved instead of merely pixel-accurate. A mask, when set, gates only
the pixel term: sqrt(sum m * (x - G(z))^2).

Inversions are deterministic: the same call produces bit-identical results,
and the returned reconstruction is exactly ``generate(G, result.code)``.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np
import torch

from ._torchify import code_to_tensor, image_to_tensor, images_to_tensor, tensor_to_code
from .core import Image, LatentCode, Mask, SeededRng
from .errors import DegenerateMaskError, InvalidArgumentError, InversionFailure
from .synthesis import GeneratorModel, generate

INIT_MODES = ("encoder", "random", "given")

# keeps sqrt differentiable when a term hits exactly zero; distorts values by
# at most 1e-12, far below reporting tolerances
_SQRT_FLOOR = 1e-24


@dataclass
class InversionConfig:
    steps: int = 200
    step_size: float = 0.01
    lambda_dom: float = 2.0
    lambda_vgg: float = 5e-5
    init: str = "encoder"
    seed: int = 0
    mask: Mask | None = None

    def __post_init__(self):
        if self.steps < 0:
            raise InvalidArgumentError("steps must be non-negative")
        if self.step_size <= 0:
            raise InvalidArgumentError("step_size must be positive")
        if min(self.lambda_dom, self.lambda_vgg) < 0:
            raise InvalidArgumentError("loss weights must be non-negative")
        if self.init not in INIT_MODES:
            raise InvalidArgumentError(f"unknown init {self.init!r}; known: {INIT_MODES}")


@dataclass
class InversionResult:
    """Best code found, its exact re-synthesis, and the per-step objective trace."""

    code: LatentCode
    reconstruction: Image
    trace: list = field(default_factory=list)
    init_code: LatentCode | None = None
    steps_used: int = 0
    best_step: int = 0
    best_total: float = float("inf")


def _sqrt_sum(x: torch.Tensor, dims) -> torch.Tensor:
    return x.pow(2).sum(dim=dims).clamp_min(_SQRT_FLOOR).sqrt()


def _check_models(G, E, F_ext, config: InversionConfig):
    if not isinstance(G, GeneratorModel) or not G.frozen:
        raise InvalidArgumentError("inversion needs a frozen generator")
    if config.lambda_dom > 0 and E is None:
        raise InvalidArgumentError("lambda_dom > 0 requires an encoder")
    if config.init == "encoder" and E is None:
        raise InvalidArgumentError("encoder init requires an encoder")
    if config.lambda_vgg > 0 and F_ext is None:
        raise InvalidArgumentError("lambda_vgg > 0 requires a feature extractor")


def _mask_tensor(mask: Mask, resolution: int) -> torch.Tensor:
    if mask.weights.shape[1] != resolution:
        raise InvalidArgumentError("mask resolution does not match the image")
    if mask.support() == 0:
        raise DegenerateMaskError("mask has empty support")
    return torch.from_numpy(mask.weights)


def _objective_terms(G, E, F_ext, x: torch.Tensor, z: torch.Tensor,
                     config: InversionConfig, masks: torch.Tensor | None,
                     fx: torch.Tensor | None):
    """Per-sample objective terms for a [B, L, d] code batch; differentiable."""
    rec = G.synthesize_batch(z)
    diff = x - rec
    if masks is not None:
        pixel = _sqrt_sum(diff * masks.sqrt(), (1, 2, 3))
    else:
        pixel = _sqrt_sum(diff, (1, 2, 3))
    total = pixel
    perceptual = torch.zeros_like(pixel)
    if config.lambda_vgg > 0:
        if fx is None:
            fx = F_ext.features_batch(x)
        perceptual = _sqrt_sum(fx - F_ext.features_batch(rec), (1, 2, 3))
        total = total + config.lambda_vgg * perceptual
    domain = torch.zeros_like(pixel)
    if config.lambda_dom > 0:
        domain = _sqrt_sum(z - E.encode_batch(rec), (1, 2))
        total = total + config.lambda_dom * domain
    return pixel, perceptual, domain, total


def inversion_objective(G, E, F_ext, x: Image, code: LatentCode,
                        config: InversionConfig, mask: Mask | None = None):
    """Objective value at a fixed code; returns (total, term breakdown)."""
    _check_models(G, E, F_ext, config)
    if code.space != "W" or code.layers != G.config.num_layers:
        raise InvalidArgumentError("expected a layer-wise W-space code for this generator")
    if x.resolution != G.config.resolution:
        raise InvalidArgumentError("image resolution does not match the generator")
    mask = mask if mask is not None else config.mask
    masks = None if mask is None else _mask_tensor(mask, G.config.resolution)[None]
    with torch.no_grad():
        pixel, perceptual, domain, total = _objective_terms(
            G, E, F_ext, image_to_tensor(x)[None], code_to_tensor(code)[None],
            config, masks, None)
    return float(total[0]), {
        "pixel": float(pixel[0]),
        "perceptual": float(perceptual[0]),
        "domain": float(domain[0]),
        "total": float(total[0]),
    }


def _initial_codes(G, E, x: torch.Tensor, config: InversionConfig,
                   given) -> torch.Tensor:
    n = len(x)
    L = G.config.num_layers
    if config.init == "encoder":
        with torch.no_grad():
            return E.encode_batch(x)
    if config.init == "given":
        if given is None:
            raise InvalidArgumentError("init='given' requires initial codes")
        given = [given] if isinstance(given, LatentCode) else list(given)
        if len(given) != n:
            raise InvalidArgumentError("need one initial code per image")
        for code in given:
            if code.space != "W" or code.layers != L:
                raise InvalidArgumentError("initial codes must be layer-wise W codes")
        return torch.stack([code_to_tensor(code) for code in given])
    z = SeededRng(config.seed).normal((n, G.config.mapper.d)).astype(np.float32)
    with torch.no_grad():
        w = G.map_batch(torch.from_numpy(z))
    return w[:, None, :].expand(-1, L, -1).clone()


def invert_batch(G, E, F_ext, images, config: InversionConfig,
                 masks=None, given=None) -> list[InversionResult]:
    """Invert several images in one optimizer loop.

    Adam updates are element-wise and each image's objective only touches its
    own code, so batching changes throughput, not trajectories (up to conv
    kernel selection, which may differ across batch shapes at float epsilon).
    The trace has ``steps + 1`` entries: the objective is recorded before
    every update and once more at the final point. The returned code is the
    best recorded point, so the final total never exceeds the initial one.
    """
    images = list(images)
    if not images:
        raise InvalidArgumentError("need at least one image")
    _check_models(G, E, F_ext, config)
    x = images_to_tensor(images)
    if x.shape[-1] != G.config.resolution:
        raise InvalidArgumentError("image resolution does not match the generator")

    if masks is None and config.mask is not None:
        masks = [config.mask] * len(images)
    if masks is None:
        mask_t = None
    else:
        masks = list(masks)
        if len(masks) != len(images):
            raise InvalidArgumentError("need one mask per image")
        mask_t = torch.stack([_mask_tensor(m, G.config.resolution) for m in masks])

    z = _initial_codes(G, E, x, config, given).detach().clone().requires_grad_(True)
    init_codes = [tensor_to_code(row) for row in z.detach()]
    opt = torch.optim.Adam([z], lr=config.step_size)
    fx = None
    if config.lambda_vgg > 0:
        with torch.no_grad():
            fx = F_ext.features_batch(x)

    n = len(images)
    traces = [[] for _ in range(n)]
    best_total = np.full(n, np.inf)
    best_step = np.zeros(n, dtype=int)
    best_codes = [None] * n

    def record(step: int, pixel, perceptual, domain, total, codes):
        for i in range(n):
            t = float(total[i])
            if not np.isfinite(t):
                raise InversionFailure("objective became non-finite", step=step,
                                       trace=traces[i][-8:])
            traces[i].append({"step": step, "pixel": float(pixel[i]),
                              "perceptual": float(perceptual[i]),
                              "domain": float(domain[i]), "total": t})
            if t < best_total[i]:
                best_total[i], best_step[i] = t, step
                best_codes[i] = codes[i].copy()

    for step in range(config.steps):
        pixel, perceptual, domain, total = _objective_terms(
            G, E, F_ext, x, z, config, mask_t, fx)
        record(step, pixel.detach(), perceptual.detach(), domain.detach(),
               total.detach(), z.detach().numpy())
        opt.zero_grad(set_to_none=True)
        total.sum().backward()
        opt.step()
    with torch.no_grad():
        pixel, perceptual, domain, total = _objective_terms(
            G, E, F_ext, x, z, config, mask_t, fx)
    record(config.steps, pixel, perceptual, domain, total, z.detach().numpy())

    results = []
    for i in range(n):
        code = LatentCode(best_codes[i], space="W")
        results.append(InversionResult(
            code=code, reconstruction=generate(G, code), trace=traces[i],
            init_code=init_codes[i], steps_used=config.steps,
            best_step=int(best_step[i]), best_total=float(best_total[i])))
    return results


def invert(G, E, F_ext, x: Image, config: InversionConfig,
           mask: Mask | None = None, given: LatentCode | None = None) -> InversionResult:
    """Invert a single image; see ``invert_batch``."""
    return invert_batch(G, E, F_ext, [x], config,
                        masks=None if mask is None else [mask],
                        given=None if given is None else [given])[0]


def gradient_check(G, E, F_ext, x: Image, code: LatentCode,
                   config: InversionConfig, coords: int = 24,
                   h: float = 1e-5, seed: int = 0) -> float:
    """Compare autograd against central finite differences in float64.

    Samples ``coords`` coordinates of the code and returns the worst relative
    disagreement, for verifying the objective's gradient path end to end.
    """
    if coords < 1:
        raise InvalidArgumentError("coords must be positive")
    Gd = copy.deepcopy(G).double()
    Ed = None if E is None else copy.deepcopy(E).double()
    Fd = None if F_ext is None else copy.deepcopy(F_ext).double()
    xt = image_to_tensor(x, dtype=torch.float64)[None]
    z0 = code_to_tensor(code, dtype=torch.float64)[None]

    def total_at(zt):
        return _objective_terms(Gd, Ed, Fd, xt, zt, config, None, None)[3].sum()

    z = z0.clone().requires_grad_(True)
    total_at(z).backward()
    grad = z.grad[0].numpy()

    flat = grad.reshape(-1)
    picks = SeededRng(seed).permutation(flat.size)[:coords]
    worst = 0.0
    with torch.no_grad():
        for k in picks:
            step = np.zeros(flat.size)
            step[k] = h
            step = torch.from_numpy(step.reshape(1, *grad.shape))
            numeric = float((total_at(z0 + step) - total_at(z0 - step)) / (2 * h))
            analytic = float(flat[k])
            rel = abs(numeric - analytic) / max(abs(numeric), abs(analytic), 1e-8)
            worst = max(worst, rel)
    return worst
