"""The frozen generator: Z-to-W mapping network and style-based image synthesis.

The generator is deliberately "style-based-lite": a learned 4x4 constant,
two style-modulated 3x3 convolutions per resolution block, nearest-neighbour
upsampling, and a plain 1x1 to-RGB head with a tanh output. Per-layer noise
injection is disabled entirely so that synthesis is a deterministic function
of the layer-wise code, which keeps inversion targets exact.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from ._torchify import code_to_tensor, seeded_torch, tensor_to_code, tensor_to_image
from .core import Image, LatentCode, SeededRng
from .errors import InvalidArgumentError

LRELU_SLOPE = 0.2
LRELU_GAIN = math.sqrt(2.0)


@dataclass
class MapperConfig:
    """Shape of the Z-to-W MLP."""

    depth: int = 4
    width: int = 64
    d: int = 64

    def __post_init__(self):
        if self.depth < 1:
            raise InvalidArgumentError("mapper depth must be >= 1")
        if self.width < self.d:
            raise InvalidArgumentError("mapper width must be >= latent width")


@dataclass
class GeneratorConfig:
    """Desk-scale generator shape; L is fixed at two style layers per block."""

    resolution: int = 32
    d: int = 64
    channels: int = 3
    fmap_base: int = 1024
    fmap_max: int = 96
    mapper: MapperConfig = field(default_factory=MapperConfig)

    def __post_init__(self):
        if self.resolution not in (8, 16, 32, 64):
            raise InvalidArgumentError(f"resolution must be one of 8/16/32/64, got {self.resolution}")
        if self.channels not in (1, 3):
            raise InvalidArgumentError("channels must be 1 or 3")
        if self.mapper.d != self.d:
            raise InvalidArgumentError("mapper latent width must match generator latent width")

    @property
    def num_layers(self) -> int:
        return 2 * int(math.log2(self.resolution)) - 2

    def features_at(self, res: int) -> int:
        return int(min(self.fmap_max, self.fmap_base // res))


class MappingNetwork(nn.Module):
    """MLP mapping normalized Z samples into the W space."""

    def __init__(self, cfg: MapperConfig):
        super().__init__()
        dims = [cfg.d] + [cfg.width] * (cfg.depth - 1) + [cfg.d]
        self.layers = nn.ModuleList(
            nn.Linear(dims[i], dims[i + 1]) for i in range(cfg.depth)
        )

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        x = z * torch.rsqrt(z.pow(2).mean(dim=1, keepdim=True) + 1e-8)
        for layer in self.layers:
            x = F.leaky_relu(layer(x), LRELU_SLOPE) * LRELU_GAIN
        return x


class ModulatedConv(nn.Module):
    """3x3 convolution whose weights are scaled per-sample by a style vector.

    Implemented as input-channel scaling + shared conv + output demodulation,
    which is arithmetically identical to building per-sample kernels but much
    cheaper on CPU.
    """

    def __init__(self, in_ch: int, out_ch: int, d: int):
        super().__init__()
        self.weight = nn.Parameter(torch.randn(out_ch, in_ch, 3, 3) / math.sqrt(in_ch * 9))
        self.bias = nn.Parameter(torch.zeros(out_ch))
        self.style = nn.Linear(d, in_ch)
        nn.init.normal_(self.style.weight, std=1.0 / math.sqrt(d))
        nn.init.ones_(self.style.bias)

    def forward(self, x: torch.Tensor, w_row: torch.Tensor) -> torch.Tensor:
        s = self.style(w_row)  # [B, in_ch]
        x = x * s[:, :, None, None]
        y = F.conv2d(x, self.weight, padding=1)
        # demodulation: per-sample inverse norm of the modulated kernel
        w_sq = self.weight.pow(2).sum(dim=(2, 3))  # [out_ch, in_ch]
        demod = torch.rsqrt(s.pow(2) @ w_sq.t() + 1e-8)  # [B, out_ch]
        y = y * demod[:, :, None, None] + self.bias[None, :, None, None]
        return F.leaky_relu(y, LRELU_SLOPE) * LRELU_GAIN


class SynthesisNetwork(nn.Module):
    """Stack of style-modulated layers from a learned 4x4 constant to RGB."""

    def __init__(self, cfg: GeneratorConfig):
        super().__init__()
        self.cfg = cfg
        self.const = nn.Parameter(torch.randn(cfg.features_at(4), 4, 4))
        convs = []
        res = 4
        in_ch = cfg.features_at(4)
        for layer in range(cfg.num_layers):
            if layer > 0 and layer % 2 == 0:
                res *= 2
            out_ch = cfg.features_at(res)
            convs.append(ModulatedConv(in_ch, out_ch, cfg.d))
            in_ch = out_ch
        self.convs = nn.ModuleList(convs)
        self.to_rgb = nn.Conv2d(in_ch, cfg.channels, kernel_size=1)

    def forward(self, w_rows: torch.Tensor) -> torch.Tensor:
        # w_rows: [B, L, d]
        x = self.const[None].expand(w_rows.shape[0], -1, -1, -1)
        for layer, conv in enumerate(self.convs):
            if layer > 0 and layer % 2 == 0:
                x = F.interpolate(x, scale_factor=2, mode="nearest")
            x = conv(x, w_rows[:, layer, :])
        return torch.tanh(self.to_rgb(x))


class GeneratorModel(nn.Module):
    """Mapping + synthesis pair with a freeze marker.

    Once frozen, the model is treated as immutable by every training loop and
    is safe to share across concurrent forward/backward passes.
    """

    kind = "generator"

    def __init__(self, config: GeneratorConfig):
        super().__init__()
        self.config = config
        self.mapping = MappingNetwork(config.mapper)
        self.synthesis = SynthesisNetwork(config)
        self.frozen = False

    def freeze(self) -> "GeneratorModel":
        self.frozen = True
        self.requires_grad_(False)
        self.eval()
        return self

    def map_batch(self, z: torch.Tensor) -> torch.Tensor:
        return self.mapping(z)

    def synthesize_batch(self, w_rows: torch.Tensor) -> torch.Tensor:
        if w_rows.ndim != 3 or w_rows.shape[1] != self.config.num_layers:
            raise InvalidArgumentError(
                f"expected codes of shape [B, {self.config.num_layers}, {self.config.d}], "
                f"got {tuple(w_rows.shape)}"
            )
        return self.synthesis(w_rows)

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        """Canonical sampling path: map, broadcast to all layers, synthesize."""
        w = self.map_batch(z)
        w_rows = w[:, None, :].expand(-1, self.config.num_layers, -1)
        return self.synthesize_batch(w_rows)


def build_generator(config: GeneratorConfig | None = None, seed: int = 0) -> GeneratorModel:
    """Construct a generator with seed-reproducible initial parameters."""
    config = config or GeneratorConfig()
    with seeded_torch(seed):
        return GeneratorModel(config)


def map_z_to_w(G: GeneratorModel, z: LatentCode) -> LatentCode:
    """Push a single Z sample through the mapping network."""
    if z.space != "Z":
        raise InvalidArgumentError(f"expected a Z-tagged code, got {z.space}")
    if z.dim != G.config.d:
        raise InvalidArgumentError(f"latent width {z.dim} does not match generator d={G.config.d}")
    with torch.no_grad():
        w = G.map_batch(code_to_tensor(z))
    return tensor_to_code(w, space="W")


def broadcast_w(w: LatentCode, num_layers: int) -> LatentCode:
    """Repeat a single-row W code once per generator layer."""
    if w.space != "W":
        raise InvalidArgumentError(f"expected a W-tagged code, got {w.space}")
    if w.layers != 1:
        raise InvalidArgumentError(f"can only broadcast single-row codes, got {w.layers} rows")
    if num_layers <= 0:
        raise InvalidArgumentError(f"layer count must be positive, got {num_layers}")
    return LatentCode(np.repeat(w.values, num_layers, axis=0), space="W")


def generate(G: GeneratorModel, code: LatentCode) -> Image:
    """Deterministic synthesis of a layer-wise W code."""
    if code.space != "W":
        raise InvalidArgumentError(f"expected a W-tagged code, got {code.space}")
    if code.layers != G.config.num_layers:
        raise InvalidArgumentError(
            f"code has {code.layers} rows but the generator expects {G.config.num_layers}"
        )
    if code.dim != G.config.d:
        raise InvalidArgumentError(f"latent width {code.dim} does not match generator d={G.config.d}")
    with torch.no_grad():
        img = G.synthesize_batch(code_to_tensor(code)[None])[0]
    return tensor_to_image(img)


def sample_w_code(G: GeneratorModel, z: LatentCode) -> LatentCode:
    """Map a Z sample and broadcast it to the generator's layer count."""
    return broadcast_w(map_z_to_w(G, z), G.config.num_layers)


def mean_w_code(G: GeneratorModel, samples: int = 1024, seed: int = 0) -> LatentCode:
    """Average mapped latent, broadcast to every synthesis layer."""
    if samples < 1:
        raise InvalidArgumentError("samples must be positive")
    z = SeededRng(seed).normal((samples, G.config.mapper.d)).astype(np.float32)
    with torch.no_grad():
        w = G.map_batch(torch.from_numpy(z)).mean(dim=0)
    return LatentCode(np.tile(w.numpy()[None], (G.config.num_layers, 1)), space="W")


def clone_double(model: nn.Module) -> nn.Module:
    """Deep-copied float64 twin, used for finite-difference gradient checks."""
    return copy.deepcopy(model).double()
