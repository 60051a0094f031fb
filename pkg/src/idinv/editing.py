"""Editing operators over inverted codes.

Four operators, all pure functions of frozen models and codes:

* ``manipulate`` — shift a code along a semantic boundary normal and re-render.
* ``interpolate`` — render the linear blend of two codes.
* ``style_mix`` — replace a subset of layer rows (default: the last four) of a
  content code with rows from a style code.
* ``semantic_diffuse`` — paste a crop of a target image onto a context image,
  then invert the composite with the pixel loss gated to the pasted region so
  the surroundings are free to heal in-domain.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .core import Image, LatentCode, Mask
from .errors import DegenerateMaskError, InvalidArgumentError
from .inversion import InversionConfig, InversionResult, invert
from .synthesis import generate

DEFAULT_MIX_ROWS = 4


@dataclass
class EditSpec:
    """A boundary direction, a signed step, and the rows it applies to."""

    boundary: "SemanticBoundary"
    alpha: float
    layer_range: tuple | None = None

    def __post_init__(self):
        if self.layer_range is not None:
            rows = tuple(int(r) for r in self.layer_range)
            if any(r < 0 for r in rows):
                raise InvalidArgumentError("layer_range rows must be non-negative")
            self.layer_range = rows


@dataclass
class DiffusionSpec:
    """Crop-and-paste geometry plus the inversion settings for diffusion."""

    crop: tuple  # (top, left, height, width) on the target
    paste: tuple = (0, 0)  # (top, left) position on the context
    feather: int = 0  # linear ramp width, in pixels, inside the mask edge
    inversion: InversionConfig = field(default_factory=InversionConfig)

    def __post_init__(self):
        self.crop = tuple(int(v) for v in self.crop)
        self.paste = tuple(int(v) for v in self.paste)
        if len(self.crop) != 4 or len(self.paste) != 2:
            raise InvalidArgumentError("crop must be (top, left, height, width); paste (top, left)")
        top, left, height, width = self.crop
        if min(top, left, self.paste[0], self.paste[1]) < 0 or min(height, width) < 0:
            raise InvalidArgumentError("crop and paste coordinates must be non-negative")
        if height == 0 or width == 0:
            raise DegenerateMaskError("crop has empty area")
        if self.feather < 0:
            raise InvalidArgumentError("feather must be non-negative")


def _resolve_rows(layer_range, num_layers: int, default) -> tuple:
    if layer_range is None:
        rows = default
    else:
        rows = tuple(int(r) for r in layer_range)
    if any(r < 0 or r >= num_layers for r in rows):
        raise InvalidArgumentError(f"layer_range must lie within [0, {num_layers})")
    return rows


def edit_code(code: LatentCode, spec: EditSpec) -> LatentCode:
    """Code-space step: add alpha * normal to the selected rows."""
    normal = np.asarray(spec.boundary.normal, dtype=np.float32)
    if normal.shape != (code.dim,):
        raise InvalidArgumentError("boundary normal width does not match the code")
    rows = _resolve_rows(spec.layer_range, code.layers, tuple(range(code.layers)))
    values = code.values.copy()
    values[list(rows)] += np.float32(spec.alpha) * normal
    return LatentCode(values, space=code.space)


def manipulate(G, z_inv: LatentCode, spec: EditSpec) -> Image:
    """Render the code shifted along the boundary normal."""
    return generate(G, edit_code(z_inv, spec))


def interpolate_code(z_a: LatentCode, z_b: LatentCode, lam: float) -> LatentCode:
    """Linear blend (1 - lam) * z_a + lam * z_b."""
    if not 0.0 <= lam <= 1.0:
        raise InvalidArgumentError("interpolation weight must lie in [0, 1]")
    if z_a.values.shape != z_b.values.shape or z_a.space != z_b.space:
        raise InvalidArgumentError("codes must share shape and space")
    lam = np.float32(lam)
    return LatentCode((1 - lam) * z_a.values + lam * z_b.values, space=z_a.space)


def interpolate(G, z_a: LatentCode, z_b: LatentCode, lam: float) -> Image:
    """Render the linear blend of two codes."""
    return generate(G, interpolate_code(z_a, z_b, lam))


def mixed_code(content: LatentCode, style: LatentCode,
               layer_range=None) -> LatentCode:
    """Replace selected rows of the content code (default: last four) with style rows."""
    if content.values.shape != style.values.shape or content.space != style.space:
        raise InvalidArgumentError("codes must share shape and space")
    default = tuple(range(max(0, content.layers - DEFAULT_MIX_ROWS), content.layers))
    rows = _resolve_rows(layer_range, content.layers, default)
    values = content.values.copy()
    values[list(rows)] = style.values[list(rows)]
    return LatentCode(values, space=content.space)


def style_mix(G, content: LatentCode, style: LatentCode, layer_range=None) -> Image:
    """Render the content code with style rows swapped in."""
    return generate(G, mixed_code(content, style, layer_range))


def _crop_mask(resolution: int, spec: DiffusionSpec) -> Mask:
    top, left = spec.paste
    height, width = spec.crop[2], spec.crop[3]
    weights = np.zeros((1, resolution, resolution), dtype=np.float32)
    if spec.feather == 0:
        weights[0, top:top + height, left:left + width] = 1.0
    else:
        ii = np.arange(height)[:, None]
        jj = np.arange(width)[None, :]
        edge = np.minimum(np.minimum(ii, height - 1 - ii),
                          np.minimum(jj, width - 1 - jj)) + 1
        weights[0, top:top + height, left:left + width] = np.minimum(
            1.0, edge / float(spec.feather + 1)).astype(np.float32)
    return Mask(weights)


def stitch(target: Image, context: Image, spec: DiffusionSpec) -> tuple[Image, Mask]:
    """Paste the cropped target region onto the context; return composite and mask."""
    if target.pixels.shape != context.pixels.shape:
        raise InvalidArgumentError("target and context must share a shape")
    top, left, height, width = spec.crop
    res = target.resolution
    if top + height > res or left + width > res:
        raise InvalidArgumentError("crop exceeds the target bounds")
    if spec.paste[0] + height > res or spec.paste[1] + width > res:
        raise InvalidArgumentError("pasted region exceeds the context bounds")
    pixels = context.pixels.copy()
    pixels[:, spec.paste[0]:spec.paste[0] + height, spec.paste[1]:spec.paste[1] + width] = \
        target.pixels[:, top:top + height, left:left + width]
    return Image(pixels), _crop_mask(res, spec)


def semantic_diffuse(G, E, F_ext, target: Image, context: Image,
                     spec: DiffusionSpec) -> InversionResult:
    """Invert the stitched composite with the pixel term gated to the crop.

    The code is initialized by the encoder on the stitched image; the domain
    and perceptual terms stay global so the surroundings converge to something
    the generator considers natural rather than a literal copy of the context.
    """
    composite, mask = stitch(target, context, spec)
    config = dataclasses.replace(spec.inversion, init="encoder", mask=None)
    return invert(G, E, F_ext, composite, config, mask=mask)
