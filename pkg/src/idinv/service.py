"""Synchronous HTTP service exposing inversion and editing to clients.

One checkpoint bundle is loaded at startup and shared read-only across
requests; each request owns its own optimization state, so responses are
byte-identical given (checkpoint, request, seed). Step budgets are capped by
the server's ``max_steps`` and the resolved parameters are echoed back.
"""

from __future__ import annotations

import base64
import io
import json
import os
import threading
import time

import numpy as np
from fastapi import FastAPI
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict

from .core import Image, LatentCode, Mask
from .editing import (DiffusionSpec, EditSpec, edit_code, interpolate_code,
                      mixed_code, semantic_diffuse, stitch)
from .errors import InvalidArgumentError, InversionFailure, NotFoundError
from .evaluation import SemanticBoundary
from .inversion import InversionConfig, invert
from .synthesis import generate
from .workspace import load_checkpoint, load_image, save_image

ALPHA_RANGE = (-5.0, 5.0)


# ---------------------------------------------------------------------------
# wire helpers


def _decode_image(b64: str, what: str = "image") -> Image:
    try:
        raw = base64.b64decode(b64, validate=True)
    except Exception as exc:
        raise InvalidArgumentError(f"{what} is not valid base64: {exc}") from exc
    return load_image(io.BytesIO(raw))


def _encode_image(image: Image) -> str:
    buf = io.BytesIO()
    save_image(image, buf)
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _decode_mask(b64: str) -> Mask:
    img = _decode_image(b64, "mask")
    return Mask(((img.pixels.mean(axis=0, keepdims=True) + 1.0) / 2.0).astype(np.float32))


def _code_to_wire(code: LatentCode) -> dict:
    layers, dim = code.values.shape
    return {"space": code.space, "layers": layers, "dim": dim,
            "values": [float(v) for v in code.values.reshape(-1)]}


def _code_from_wire(data: dict, what: str = "code") -> LatentCode:
    try:
        layers, dim = int(data["layers"]), int(data["dim"])
        values = np.asarray(data["values"], dtype=np.float32).reshape(layers, dim)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidArgumentError(f"malformed {what}: {exc}") from exc
    return LatentCode(values, space=data.get("space", "W"))


# ---------------------------------------------------------------------------
# request schemas (defaults mirror the library configs)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class InversionParams(_Strict):
    steps: int = 200
    step_size: float = 0.01
    lambda_dom: float = 2.0
    lambda_vgg: float = 5e-5
    init: str = "encoder"
    seed: int = 0


class InvertRequest(_Strict):
    image: str
    mask: str | None = None
    params: InversionParams = InversionParams()
    checkpoint: str | None = None


class EditRequest(_Strict):
    attribute: str
    alpha: float
    layers: list[int] | None = None
    code: dict | None = None
    image: str | None = None
    params: InversionParams = InversionParams()
    checkpoint: str | None = None


class InterpolateRequest(_Strict):
    code_a: dict
    code_b: dict
    lam: float
    checkpoint: str | None = None


class MixRequest(_Strict):
    content: dict
    style: dict
    layers: list[int] | None = None
    checkpoint: str | None = None


class DiffuseRequest(_Strict):
    target: str
    context: str
    crop: list[int]
    paste: list[int] = [0, 0]
    feather: int = 0
    params: InversionParams = InversionParams()
    checkpoint: str | None = None


# ---------------------------------------------------------------------------
# state


class _Bundle:
    def __init__(self, path: str):
        self.path = path
        self.id = os.path.basename(os.path.normpath(path)) or "default"
        models = load_checkpoint(path)
        if "generator" not in models:
            raise NotFoundError(f"checkpoint {path} has no 'generator' model")
        self.generator = models["generator"]
        self.encoder = models.get("encoder")
        self.extractor = models.get("feature_extractor")


class ServiceState:
    """Loaded models plus fitted boundaries; reload swaps under a lock."""

    def __init__(self, checkpoint_path: str, boundaries_path=None, max_steps: int = 200):
        self.max_steps = max_steps
        self._lock = threading.Lock()
        self._bundle = _Bundle(checkpoint_path)
        self.boundaries: dict[str, SemanticBoundary] = {}
        if boundaries_path is not None:
            with open(boundaries_path) as fh:
                for entry in json.load(fh):
                    b = SemanticBoundary.from_dict(entry)
                    self.boundaries[b.attribute] = b

    def bundle(self, checkpoint_id=None) -> _Bundle:
        with self._lock:
            bundle = self._bundle
        if checkpoint_id is not None and checkpoint_id != bundle.id:
            raise NotFoundError(f"unknown checkpoint {checkpoint_id!r}; "
                                f"loaded: {bundle.id!r}")
        return bundle

    def reload(self, checkpoint_path: str) -> None:
        with self._lock:
            self._bundle = _Bundle(checkpoint_path)

    def boundary(self, attribute: str) -> SemanticBoundary:
        if attribute not in self.boundaries:
            raise NotFoundError(f"unknown boundary {attribute!r}; "
                                f"known: {sorted(self.boundaries)}")
        return self.boundaries[attribute]

    def resolve(self, params: InversionParams) -> InversionConfig:
        return InversionConfig(steps=min(params.steps, self.max_steps),
                               step_size=params.step_size,
                               lambda_dom=params.lambda_dom,
                               lambda_vgg=params.lambda_vgg,
                               init=params.init, seed=params.seed)


def _resolved_params(config: InversionConfig) -> dict:
    return {"steps": config.steps, "step_size": config.step_size,
            "lambda_dom": config.lambda_dom, "lambda_vgg": config.lambda_vgg,
            "init": config.init, "seed": config.seed}


def _run_inversion(bundle: _Bundle, config: InversionConfig, image: Image,
                   mask=None) -> "InversionResult":
    if (config.lambda_dom > 0 or config.init == "encoder") and bundle.encoder is None:
        raise NotFoundError("loaded checkpoint has no encoder; "
                            "set lambda_dom=0 and init='random'")
    if config.lambda_vgg > 0 and bundle.extractor is None:
        raise NotFoundError("loaded checkpoint has no feature extractor; set lambda_vgg=0")
    return invert(bundle.generator, bundle.encoder, bundle.extractor,
                  image, config, mask=mask)


# ---------------------------------------------------------------------------
# app factory


def create_app(checkpoint_path: str, boundaries_path=None, max_steps: int = 200) -> FastAPI:
    state = ServiceState(checkpoint_path, boundaries_path, max_steps)
    app = FastAPI(title="idinv service")
    app.state.service = state

    @app.exception_handler(RequestValidationError)
    async def _on_schema(request, exc):
        detail = [{"loc": list(e.get("loc", ())), "msg": str(e.get("msg", "")),
                   "type": str(e.get("type", ""))} for e in exc.errors()]
        return JSONResponse(status_code=400,
                            content={"error": "schema violation", "detail": detail})

    @app.exception_handler(NotFoundError)
    async def _on_missing(request, exc):
        return JSONResponse(status_code=404, content={"error": str(exc)})

    @app.exception_handler(InvalidArgumentError)
    async def _on_degenerate(request, exc):
        return JSONResponse(status_code=422, content={"error": str(exc)})

    @app.exception_handler(InversionFailure)
    async def _on_diverged(request, exc):
        return JSONResponse(status_code=500,
                            content={"error": str(exc), "step": exc.step,
                                     "trace": exc.trace})

    @app.get("/health")
    def health():
        bundle = state.bundle()
        gconf = bundle.generator.config
        return {"status": "ok", "checkpoint": bundle.id,
                "resolution": gconf.resolution, "layers": gconf.num_layers,
                "dim": gconf.d, "max_steps": state.max_steps,
                "has_encoder": bundle.encoder is not None,
                "has_extractor": bundle.extractor is not None}

    @app.get("/boundaries")
    def boundaries():
        return {"alpha_range": list(ALPHA_RANGE),
                "boundaries": [{"attribute": b.attribute, "dim": b.dim,
                                "train_accuracy": b.train_accuracy}
                               for _, b in sorted(state.boundaries.items())]}

    @app.post("/invert")
    def invert_endpoint(req: InvertRequest):
        t0 = time.perf_counter()
        bundle = state.bundle(req.checkpoint)
        config = state.resolve(req.params)
        mask = _decode_mask(req.mask) if req.mask is not None else None
        result = _run_inversion(bundle, config, _decode_image(req.image), mask=mask)
        final = result.trace[result.best_step]
        return {"image": _encode_image(result.reconstruction),
                "code": _code_to_wire(result.code),
                "losses": {k: final[k] for k in ("pixel", "perceptual", "domain", "total")},
                "best_step": result.best_step,
                "resolved": dict(_resolved_params(config), checkpoint=bundle.id),
                "timing": {"seconds": time.perf_counter() - t0}}

    @app.post("/edit")
    def edit_endpoint(req: EditRequest):
        t0 = time.perf_counter()
        bundle = state.bundle(req.checkpoint)
        boundary = state.boundary(req.attribute)
        losses = None
        if req.code is not None:
            code = _code_from_wire(req.code)
        elif req.image is not None:
            config = state.resolve(req.params)
            result = _run_inversion(bundle, config, _decode_image(req.image))
            code = result.code
            final = result.trace[result.best_step]
            losses = {k: final[k] for k in ("pixel", "perceptual", "domain", "total")}
        else:
            raise InvalidArgumentError("edit needs either a code or an image")
        layers = None if req.layers is None else tuple(req.layers)
        edited = edit_code(code, EditSpec(boundary=boundary, alpha=req.alpha,
                                          layer_range=layers))
        return {"image": _encode_image(generate(bundle.generator, edited)),
                "code": _code_to_wire(edited),
                "losses": losses,
                "resolved": {"attribute": req.attribute, "alpha": req.alpha,
                             "layers": req.layers, "checkpoint": bundle.id},
                "timing": {"seconds": time.perf_counter() - t0}}

    @app.post("/interpolate")
    def interpolate_endpoint(req: InterpolateRequest):
        t0 = time.perf_counter()
        bundle = state.bundle(req.checkpoint)
        code = interpolate_code(_code_from_wire(req.code_a, "code_a"),
                                _code_from_wire(req.code_b, "code_b"), req.lam)
        return {"image": _encode_image(generate(bundle.generator, code)),
                "code": _code_to_wire(code),
                "resolved": {"lam": req.lam, "checkpoint": bundle.id},
                "timing": {"seconds": time.perf_counter() - t0}}

    @app.post("/mix")
    def mix_endpoint(req: MixRequest):
        t0 = time.perf_counter()
        bundle = state.bundle(req.checkpoint)
        layers = None if req.layers is None else tuple(req.layers)
        code = mixed_code(_code_from_wire(req.content, "content"),
                          _code_from_wire(req.style, "style"), layers)
        return {"image": _encode_image(generate(bundle.generator, code)),
                "code": _code_to_wire(code),
                "resolved": {"layers": req.layers, "checkpoint": bundle.id},
                "timing": {"seconds": time.perf_counter() - t0}}

    @app.post("/diffuse")
    def diffuse_endpoint(req: DiffuseRequest):
        t0 = time.perf_counter()
        bundle = state.bundle(req.checkpoint)
        if len(req.crop) != 4:
            raise InvalidArgumentError("crop must be [top, left, height, width]")
        if len(req.paste) != 2:
            raise InvalidArgumentError("paste must be [top, left]")
        config = state.resolve(req.params)
        spec = DiffusionSpec(crop=tuple(req.crop), paste=tuple(req.paste),
                             feather=req.feather, inversion=config)
        target = _decode_image(req.target, "target")
        context = _decode_image(req.context, "context")
        if bundle.encoder is None:
            raise NotFoundError("loaded checkpoint has no encoder; diffusion needs one")
        if config.lambda_vgg > 0 and bundle.extractor is None:
            raise NotFoundError("loaded checkpoint has no feature extractor; set lambda_vgg=0")
        stitched, _ = stitch(target, context, spec)
        result = semantic_diffuse(bundle.generator, bundle.encoder, bundle.extractor,
                                  target, context, spec)
        final = result.trace[result.best_step]
        return {"image": _encode_image(result.reconstruction),
                "stitched": _encode_image(stitched),
                "code": _code_to_wire(result.code),
                "losses": {k: final[k] for k in ("pixel", "perceptual", "domain", "total")},
                "resolved": dict(_resolved_params(config), crop=req.crop,
                                 paste=req.paste, feather=req.feather,
                                 checkpoint=bundle.id),
                "timing": {"seconds": time.perf_counter() - t0}}

    return app
