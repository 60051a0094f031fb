"""Encoder/discriminator models and the training loops.

Three trainings live here:

* ``train_gan`` — adversarial pretraining of the generator (non-saturating
  logistic loss with an R1 gradient penalty on real scores).
* ``train_domain_guided_encoder`` — the encoder is trained against *real*
  images with the frozen generator in the loop: reconstruction + perceptual
  feature distance − adversarial realism, while the discriminator keeps
  updating against the encoder's reconstructions.
* ``train_conventional_encoder`` — the baseline that regresses sampled codes
  from their own synthesized images and never sees a real photo.

All loops are deterministic for a fixed config seed and log per-step metrics
as line-delimited JSON when given a log path.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as torchfn
from torch import autograd, nn

from ._torchify import images_to_tensor, seeded_torch, tensor_to_code
from .core import Image, LatentCode, SeededRng
from .errors import InvalidArgumentError, TrainingFailure
from .synthesis import LRELU_SLOPE, GeneratorConfig, GeneratorModel, build_generator

ADAM_BETAS = (0.0, 0.99)


# ---------------------------------------------------------------------------
# models


@dataclass
class EncoderConfig:
    resolution: int = 32
    d: int = 64
    num_layers: int = 8
    channels: int = 3
    width: int = 32
    fc_width: int = 256

    def __post_init__(self):
        if self.resolution < 8 or self.resolution & (self.resolution - 1):
            raise InvalidArgumentError("resolution must be a power of two, at least 8")
        if min(self.d, self.num_layers, self.channels, self.width, self.fc_width) < 1:
            raise InvalidArgumentError("encoder sizes must be positive")


class _ConvTrunk(nn.Module):
    """Shared conv pyramid: 3x3 convs with leaky ReLU, halving resolution to 4x4."""

    def __init__(self, resolution, channels, width):
        super().__init__()
        pools = int(math.log2(resolution)) - 2
        chans = [min(width * 2 ** i, width * 4) for i in range(pools + 1)]
        layers = [nn.Conv2d(channels, chans[0], 3, padding=1), nn.LeakyReLU(LRELU_SLOPE)]
        for cin, cout in zip(chans, chans[1:]):
            layers += [
                nn.Conv2d(cin, cout, 3, padding=1),
                nn.LeakyReLU(LRELU_SLOPE),
                nn.AvgPool2d(2),
            ]
        self.net = nn.Sequential(*layers)
        self.out_features = chans[-1] * 16

    def forward(self, x):
        return self.net(x).flatten(1)


class EncoderModel(nn.Module):
    """Maps images to layer-wise latent codes [L, d]."""

    kind = "encoder"

    def __init__(self, config: EncoderConfig):
        super().__init__()
        self.config = config
        self.trunk = _ConvTrunk(config.resolution, config.channels, config.width)
        self.fc1 = nn.Linear(self.trunk.out_features, config.fc_width)
        self.fc2 = nn.Linear(config.fc_width, config.num_layers * config.d)
        self.frozen = False

    def freeze(self) -> "EncoderModel":
        self.frozen = True
        self.requires_grad_(False)
        self.eval()
        return self

    def encode_batch(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 4 or x.shape[-1] != self.config.resolution:
            raise InvalidArgumentError(
                f"expected [B, C, {self.config.resolution}, {self.config.resolution}] batch"
            )
        h = torchfn.leaky_relu(self.fc1(self.trunk(x)), LRELU_SLOPE)
        return self.fc2(h).view(-1, self.config.num_layers, self.config.d)

    forward = encode_batch


@dataclass
class DiscriminatorConfig:
    resolution: int = 32
    channels: int = 3
    width: int = 24
    fc_width: int = 128

    def __post_init__(self):
        if self.resolution < 8 or self.resolution & (self.resolution - 1):
            raise InvalidArgumentError("resolution must be a power of two, at least 8")
        if min(self.channels, self.width, self.fc_width) < 1:
            raise InvalidArgumentError("discriminator sizes must be positive")


class DiscriminatorModel(nn.Module):
    """Scores images; higher means more real."""

    kind = "discriminator"

    def __init__(self, config: DiscriminatorConfig):
        super().__init__()
        self.config = config
        self.trunk = _ConvTrunk(config.resolution, config.channels, config.width)
        self.fc1 = nn.Linear(self.trunk.out_features, config.fc_width)
        self.fc2 = nn.Linear(config.fc_width, 1)
        self.frozen = False

    def freeze(self) -> "DiscriminatorModel":
        self.frozen = True
        self.requires_grad_(False)
        self.eval()
        return self

    def score_batch(self, x: torch.Tensor) -> torch.Tensor:
        h = torchfn.leaky_relu(self.fc1(self.trunk(x)), LRELU_SLOPE)
        return self.fc2(h).squeeze(1)

    forward = score_batch


def build_encoder(config: EncoderConfig, seed: int = 0) -> EncoderModel:
    with seeded_torch(seed):
        return EncoderModel(config)


def build_discriminator(config: DiscriminatorConfig, seed: int = 0) -> DiscriminatorModel:
    with seeded_torch(seed):
        return DiscriminatorModel(config)


# ---------------------------------------------------------------------------
# losses


@dataclass
class TrainingConfig:
    lambda_vgg: float = 5e-5
    lambda_adv: float = 0.1
    gamma: float = 10.0
    lr_e: float = 1e-4
    lr_d: float = 1e-4
    batch_size: int = 16
    steps: int = 20000
    seed: int = 0

    def __post_init__(self):
        if min(self.lambda_vgg, self.lambda_adv, self.gamma) < 0:
            raise InvalidArgumentError("loss weights must be non-negative")
        if min(self.lr_e, self.lr_d) <= 0:
            raise InvalidArgumentError("learning rates must be positive")
        if self.batch_size < 1 or self.steps < 1:
            raise InvalidArgumentError("batch_size and steps must be positive")


def _batch_l2(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Per-sample L2 norm of the difference, averaged over the batch."""
    return (a - b).flatten(1).pow(2).sum(dim=1).sqrt().mean()


def _scores(D, x: torch.Tensor) -> torch.Tensor:
    return D(x).reshape(len(x))


def _r1_penalty(D, x_real: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """Real scores plus E[||grad_x D(x)||^2], differentiable wrt D."""
    x = x_real.detach().requires_grad_(True)
    scores = _scores(D, x)
    if scores.grad_fn is None:  # constant scorer: zero gradient everywhere
        return scores, torch.zeros(())
    (grad,) = autograd.grad(scores.sum(), x, create_graph=True, allow_unused=True)
    if grad is None:
        return scores, torch.zeros(())
    return scores, grad.flatten(1).pow(2).sum(dim=1).mean()


def _encoder_objective(E, G, D, F_ext, x: torch.Tensor, config: TrainingConfig):
    """Differentiable reconstruction + perceptual − adversarial objective."""
    rec = G.synthesize_batch(E.encode_batch(x))
    pixel = _batch_l2(x, rec)
    perceptual = _batch_l2(F_ext.features_batch(x), F_ext.features_batch(rec))
    adversarial = _scores(D, rec).mean()
    total = pixel + config.lambda_vgg * perceptual - config.lambda_adv * adversarial
    return total, {
        "pixel": float(pixel.detach()),
        "perceptual": float(perceptual.detach()),
        "adversarial": float(adversarial.detach()),
        "total": float(total.detach()),
    }


def _as_image_batch(x_real) -> torch.Tensor:
    if isinstance(x_real, Image):
        x_real = [x_real]
    return images_to_tensor(list(x_real))


def domain_guided_encoder_loss(E, G, D, F_ext, x_real, config: TrainingConfig):
    """Encoder objective on a real batch; returns (total, term breakdown)."""
    x = _as_image_batch(x_real)
    with torch.no_grad():
        total, breakdown = _encoder_objective(E, G, D, F_ext, x, config)
    return float(total), breakdown


def discriminator_loss(D, G, E, x_real, gamma: float = 10.0):
    """Adversarial discriminator objective with the R1 penalty on real scores.

    The generator and encoder are treated as constants: their composition only
    supplies the fake batch. Returns (total, term breakdown).
    """
    x = _as_image_batch(x_real)
    with torch.no_grad():
        fake = G.synthesize_batch(E.encode_batch(x))
        fake_score = _scores(D, fake).mean()
    real_scores, penalty = _r1_penalty(D, x)
    total = fake_score - real_scores.mean() + 0.5 * gamma * penalty
    if not torch.isfinite(penalty):
        raise TrainingFailure("gradient-penalty norm became non-finite")
    return float(total.detach()), {
        "fake_score": float(fake_score),
        "real_score": float(real_scores.detach().mean()),
        "penalty": float(penalty.detach()),
        "total": float(total.detach()),
    }


def conventional_encoder_loss(E, G, codes) -> float:
    """Baseline code-regression loss: ||w − E(G(w))||, averaged over the batch.

    ``codes`` may be a single layer-wise code or a sequence; Z-space codes are
    first pushed through the generator's mapper.
    """
    if isinstance(codes, LatentCode):
        codes = [codes]
    codes = list(codes)
    if not codes:
        raise InvalidArgumentError("need at least one code")
    rows = []
    for code in codes:
        if code.space == "Z":
            z = torch.from_numpy(code.values)
            w = G.map_batch(z)[0]
            rows.append(w[None].expand(G.config.num_layers, -1))
        else:
            rows.append(torch.from_numpy(code.values))
    w = torch.stack(rows)
    with torch.no_grad():
        return float(_batch_l2(w, E.encode_batch(G.synthesize_batch(w))))


# ---------------------------------------------------------------------------
# training loops


class _StepLog:
    """Line-delimited JSON metrics log, one object per training step."""

    def __init__(self, path):
        self._fh = open(path, "w") if path is not None else None

    def write(self, record: dict):
        if self._fh is not None:
            self._fh.write(json.dumps(record) + "\n")

    def close(self):
        if self._fh is not None:
            self._fh.close()


def _check_finite(value: float, what: str, step: int):
    if not math.isfinite(value):
        raise TrainingFailure(f"{what} became non-finite", step=step)


def train_gan(dataset, config: TrainingConfig,
              gen_config: GeneratorConfig | None = None,
              disc_config: DiscriminatorConfig | None = None,
              log_path=None) -> tuple[GeneratorModel, DiscriminatorModel]:
    """Adversarially pretrain a generator on the dataset.

    Non-saturating logistic loss for both players, R1 penalty (weight gamma/2)
    on real scores. Returns the frozen generator and the trained discriminator.
    """
    if len(dataset) == 0:
        raise InvalidArgumentError("cannot train on an empty dataset")
    gen_config = gen_config or GeneratorConfig(resolution=dataset.resolution,
                                               channels=dataset.images.shape[1])
    if gen_config.resolution != dataset.resolution:
        raise InvalidArgumentError("generator resolution does not match the dataset")
    disc_config = disc_config or DiscriminatorConfig(resolution=dataset.resolution,
                                                     channels=dataset.images.shape[1])

    G = build_generator(gen_config, seed=config.seed)
    D = build_discriminator(disc_config, seed=config.seed + 1)
    opt_g = torch.optim.Adam(G.parameters(), lr=config.lr_e, betas=ADAM_BETAS)
    opt_d = torch.optim.Adam(D.parameters(), lr=config.lr_d, betas=ADAM_BETAS)
    batch_rng = SeededRng(config.seed).child(1)
    z_rng = SeededRng(config.seed).child(2)
    images = torch.from_numpy(dataset.images)
    log = _StepLog(log_path)
    try:
        for step in range(config.steps):
            idx = batch_rng.integers(0, len(dataset), config.batch_size)
            x = images[torch.from_numpy(idx)]
            z = torch.from_numpy(
                z_rng.normal((2, config.batch_size, gen_config.mapper.d)).astype(np.float32))

            with torch.no_grad():
                fake = G(z[0])
            real_scores, penalty = _r1_penalty(D, x)
            d_loss = (torchfn.softplus(_scores(D, fake)).mean()
                      + torchfn.softplus(-real_scores).mean()
                      + 0.5 * config.gamma * penalty)
            opt_d.zero_grad(set_to_none=True)
            d_loss.backward()
            opt_d.step()

            g_loss = torchfn.softplus(-_scores(D, G(z[1]))).mean()
            opt_g.zero_grad(set_to_none=True)
            g_loss.backward()
            opt_g.step()

            d_val, g_val = float(d_loss.detach()), float(g_loss.detach())
            _check_finite(d_val + g_val, "gan loss", step)
            log.write({"step": step, "d_loss": d_val, "g_loss": g_val,
                       "penalty": float(penalty.detach())})
    finally:
        log.close()
    return G.freeze(), D


def train_domain_guided_encoder(G: GeneratorModel, D_init: DiscriminatorModel,
                                dataset, F_ext, config: TrainingConfig,
                                encoder_config: EncoderConfig | None = None,
                                log_path=None) -> tuple[EncoderModel, DiscriminatorModel]:
    """Train the encoder on real images with the frozen generator in the loop.

    Alternates an encoder step (reconstruction + perceptual − adversarial) with
    a discriminator step (score gap + R1 penalty) on the same batch. ``D_init``
    is copied, not mutated. Returns the frozen encoder and the updated
    discriminator.
    """
    if not G.frozen:
        raise InvalidArgumentError("generator must be frozen before encoder training")
    if not getattr(F_ext, "frozen", False):
        raise InvalidArgumentError("feature extractor must be frozen before encoder training")
    if len(dataset) == 0:
        raise InvalidArgumentError("cannot train on an empty dataset")
    if dataset.resolution != G.config.resolution:
        raise InvalidArgumentError("dataset resolution does not match the generator")

    encoder_config = encoder_config or EncoderConfig(
        resolution=G.config.resolution, d=G.config.mapper.d,
        num_layers=G.config.num_layers, channels=G.config.channels)
    E = build_encoder(encoder_config, seed=config.seed + 2)
    D = copy.deepcopy(D_init)
    opt_e = torch.optim.Adam(E.parameters(), lr=config.lr_e, betas=ADAM_BETAS)
    opt_d = torch.optim.Adam(D.parameters(), lr=config.lr_d, betas=ADAM_BETAS)
    batch_rng = SeededRng(config.seed).child(1)
    images = torch.from_numpy(dataset.images)
    log = _StepLog(log_path)
    try:
        for step in range(config.steps):
            idx = batch_rng.integers(0, len(dataset), config.batch_size)
            x = images[torch.from_numpy(idx)]

            e_loss, breakdown = _encoder_objective(E, G, D, F_ext, x, config)
            opt_e.zero_grad(set_to_none=True)
            e_loss.backward()
            opt_e.step()

            with torch.no_grad():
                fake = G.synthesize_batch(E.encode_batch(x))
            real_scores, penalty = _r1_penalty(D, x)
            d_loss = (_scores(D, fake).mean() - real_scores.mean()
                      + 0.5 * config.gamma * penalty)
            opt_d.zero_grad(set_to_none=True)
            d_loss.backward()
            opt_d.step()

            d_val = float(d_loss.detach())
            _check_finite(breakdown["total"] + d_val, "encoder training loss", step)
            log.write({"step": step, **{f"encoder_{k}": v for k, v in breakdown.items()},
                       "d_loss": d_val, "penalty": float(penalty.detach())})
    finally:
        log.close()
    return E.freeze(), D


def train_conventional_encoder(G: GeneratorModel, config: TrainingConfig,
                               encoder_config: EncoderConfig | None = None,
                               log_path=None) -> EncoderModel:
    """Train the baseline encoder purely on sampled (code, synthesis) pairs."""
    if not G.frozen:
        raise InvalidArgumentError("generator must be frozen before encoder training")
    encoder_config = encoder_config or EncoderConfig(
        resolution=G.config.resolution, d=G.config.mapper.d,
        num_layers=G.config.num_layers, channels=G.config.channels)
    E = build_encoder(encoder_config, seed=config.seed + 2)
    opt = torch.optim.Adam(E.parameters(), lr=config.lr_e, betas=ADAM_BETAS)
    z_rng = SeededRng(config.seed).child(3)
    log = _StepLog(log_path)
    try:
        for step in range(config.steps):
            z = torch.from_numpy(
                z_rng.normal((config.batch_size, G.config.mapper.d)).astype(np.float32))
            with torch.no_grad():
                w = G.map_batch(z)[:, None, :].expand(-1, G.config.num_layers, -1)
                x = G.synthesize_batch(w)
            loss = _batch_l2(w, E.encode_batch(x))
            opt.zero_grad(set_to_none=True)
            loss.backward()
            opt.step()
            loss_val = float(loss.detach())
            _check_finite(loss_val, "code regression loss", step)
            log.write({"step": step, "loss": loss_val})
    finally:
        log.close()
    return E.freeze()


def encode(E: EncoderModel, x: Image) -> LatentCode:
    """Encode one image to a layer-wise latent code."""
    with torch.no_grad():
        w = E.encode_batch(images_to_tensor([x]))[0]
    return tensor_to_code(w)
