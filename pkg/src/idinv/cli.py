"""Command-line interface covering every pipeline stage.

Each subcommand writes machine-readable artifacts under ``--out`` and takes a
``--seed`` where randomness is involved. Exit codes: 0 on success, 1 on any
runtime failure (message on stderr), 2 on bad usage (argparse).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from .core import LatentCode, Mask, full_mask, masked_mse
from .errors import InvalidArgumentError, NotFoundError
from .inversion import InversionConfig, invert, invert_batch
from .synthesis import GeneratorConfig, MapperConfig, generate
from .workspace import (DatasetSpec, MetricConfig, load_checkpoint, load_image,
                        load_image_folder, load_saved_dataset, make_synthetic_dataset,
                        save_checkpoint, save_dataset, save_image)

DEFAULT_HOME = os.path.join(os.path.expanduser("~"), ".idinv")


def _home() -> str:
    return os.environ.get("IDINV_HOME", DEFAULT_HOME)


def _default_checkpoint() -> str:
    return os.path.join(_home(), "checkpoint")


def _default_boundaries() -> str:
    return os.path.join(_home(), "boundaries.json")


# ---------------------------------------------------------------------------
# small artifact helpers


def save_code(code: LatentCode, path: str) -> None:
    with open(path, "w") as fh:
        json.dump({"space": code.space, "values": code.values.tolist()}, fh)
        fh.write("\n")


def load_code(path: str) -> LatentCode:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise NotFoundError(f"no such code file: {path}")
    except json.JSONDecodeError as exc:
        raise InvalidArgumentError(f"failed to parse code file {path}: {exc}") from exc
    return LatentCode(np.asarray(data["values"], dtype=np.float32),
                      space=data.get("space", "W"))


def load_mask(path: str) -> Mask:
    """Read a mask from a grayscale (or RGB, averaged) PNG: white = keep."""
    img = load_image(path)
    return Mask(((img.pixels.mean(axis=0, keepdims=True) + 1.0) / 2.0).astype(np.float32))


def _load_any_dataset(path: str):
    if os.path.exists(os.path.join(path, "dataset.json")):
        return load_saved_dataset(path)
    return load_image_folder(path)


def _write_json(payload, path: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)) or ".", exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_trace(trace, path: str) -> None:
    with open(path, "w") as fh:
        for rec in trace:
            fh.write(json.dumps(rec) + "\n")


def _load_models(path: str, *needed: str) -> dict:
    models = load_checkpoint(path)
    for name in needed:
        if name not in models:
            raise NotFoundError(f"checkpoint {path} has no {name!r} model")
    return models


def _inversion_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--steps", type=int, default=200)
    parser.add_argument("--step-size", type=float, default=0.01)
    parser.add_argument("--lambda-dom", type=float, default=2.0)
    parser.add_argument("--lambda-vgg", type=float, default=5e-5)
    parser.add_argument("--init", choices=["encoder", "random", "given"], default="encoder")
    parser.add_argument("--seed", type=int, default=0)


def _inversion_config(args) -> InversionConfig:
    return InversionConfig(steps=args.steps, step_size=args.step_size,
                           lambda_dom=args.lambda_dom, lambda_vgg=args.lambda_vgg,
                           init=args.init, seed=args.seed)


def _parse_ints(text: str | None):
    if text is None:
        return None
    return tuple(int(v) for v in text.split(",") if v != "")


def _inversion_models(models: dict, config: InversionConfig):
    E = models.get("encoder")
    F = models.get("feature_extractor")
    if (config.lambda_dom > 0 or config.init == "encoder") and E is None:
        raise NotFoundError("checkpoint has no 'encoder' model; "
                            "use --lambda-dom 0 --init random for the MSE-only baseline")
    if config.lambda_vgg > 0 and F is None:
        raise NotFoundError("checkpoint has no 'feature_extractor' model; use --lambda-vgg 0")
    return E, F


# ---------------------------------------------------------------------------
# subcommands


def cmd_make_data(args) -> int:
    spec = DatasetSpec(kind="synthetic", resolution=args.resolution,
                       count=args.count, channels=args.channels, seed=args.seed)
    dataset = make_synthetic_dataset(spec)
    save_dataset(dataset, args.out)
    balance = {k: round(float(v.mean()), 4) for k, v in dataset.labels.items()}
    print(json.dumps({"count": len(dataset), "out": args.out, "balance": balance}))
    return 0


def cmd_train_gan(args) -> int:
    from .training import DiscriminatorConfig, TrainingConfig, train_gan

    dataset = _load_any_dataset(args.data)
    config = TrainingConfig(gamma=args.gamma, lr_e=args.lr, lr_d=args.lr,
                            batch_size=args.batch_size, steps=args.steps, seed=args.seed)
    gen_config = GeneratorConfig(
        resolution=dataset.resolution, d=args.d, channels=dataset.images.shape[1],
        fmap_base=args.fmap_base, fmap_max=args.fmap_max,
        mapper=MapperConfig(depth=args.mapper_depth, width=max(args.d, args.mapper_width), d=args.d))
    os.makedirs(args.out, exist_ok=True)
    log_path = os.path.join(args.out, "train_gan.ndjson")
    G, D = train_gan(dataset, config, gen_config=gen_config,
                     disc_config=DiscriminatorConfig(resolution=dataset.resolution,
                                                     channels=dataset.images.shape[1]),
                     log_path=log_path)
    save_checkpoint({"generator": G, "discriminator": D}, args.checkpoint)
    print(json.dumps({"checkpoint": args.checkpoint, "steps": config.steps, "log": log_path}))
    return 0


def cmd_train_encoder(args) -> int:
    from .perception import FeatureTrainConfig, train_feature_extractor
    from .training import (TrainingConfig, train_conventional_encoder,
                           train_domain_guided_encoder)

    models = _load_models(args.checkpoint, "generator")
    G = models["generator"]
    config = TrainingConfig(lambda_vgg=args.lambda_vgg, lambda_adv=args.lambda_adv,
                            gamma=args.gamma, lr_e=args.lr_e, lr_d=args.lr_d,
                            batch_size=args.batch_size, steps=args.steps, seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    log_path = os.path.join(args.out, f"train_encoder_{args.mode}.ndjson")

    if args.mode == "conventional":
        E = train_conventional_encoder(G, config, log_path=log_path)
        models["conventional_encoder"] = E
    else:
        if "discriminator" not in models:
            raise NotFoundError(f"checkpoint {args.checkpoint} has no 'discriminator' model")
        dataset = _load_any_dataset(args.data)
        if "feature_extractor" not in models:
            models["feature_extractor"] = train_feature_extractor(
                dataset, FeatureTrainConfig(seed=config.seed + 500))
        E, D = train_domain_guided_encoder(G, models["discriminator"], dataset,
                                           models["feature_extractor"], config,
                                           log_path=log_path)
        models["encoder"] = E
        models["discriminator"] = D
    save_checkpoint(models, args.checkpoint)
    print(json.dumps({"checkpoint": args.checkpoint, "mode": args.mode,
                      "steps": config.steps, "log": log_path}))
    return 0


def cmd_invert(args) -> int:
    models = _load_models(args.checkpoint, "generator")
    config = _inversion_config(args)
    E, F = _inversion_models(models, config)
    x = load_image(args.image)
    mask = load_mask(args.mask) if args.mask else None
    result = invert(models["generator"], E, F, x, config, mask=mask)
    os.makedirs(args.out, exist_ok=True)
    save_image(result.reconstruction, os.path.join(args.out, "reconstruction.png"))
    save_code(result.code, os.path.join(args.out, "code.json"))
    _write_trace(result.trace, os.path.join(args.out, "trace.ndjson"))
    summary = {"best_step": result.best_step, "best_total": result.best_total,
               "final": result.trace[-1],
               "pixel_mse": masked_mse(x, result.reconstruction, full_mask(x.resolution)),
               "config": {k: v for k, v in dataclasses.asdict(config).items() if k != "mask"}}
    _write_json(summary, os.path.join(args.out, "summary.json"))
    print(json.dumps(summary["final"]))
    return 0


def _boundary_by_name(path: str, attribute: str):
    from .evaluation import SemanticBoundary

    try:
        with open(path) as fh:
            entries = json.load(fh)
    except FileNotFoundError:
        raise NotFoundError(f"no boundaries file at {path}; run `idinv probe` first")
    for entry in entries:
        if entry["attribute"] == attribute:
            return SemanticBoundary.from_dict(entry)
    known = sorted(e["attribute"] for e in entries)
    raise NotFoundError(f"no boundary named {attribute!r}; known: {known}")


def cmd_edit(args) -> int:
    from .editing import EditSpec, edit_code

    models = _load_models(args.checkpoint, "generator")
    G = models["generator"]
    boundary = _boundary_by_name(args.boundaries, args.attribute)
    if args.code:
        code = load_code(args.code)
    elif args.image:
        config = _inversion_config(args)
        E, F = _inversion_models(models, config)
        code = invert(G, E, F, load_image(args.image), config).code
    else:
        raise InvalidArgumentError("edit needs either --code or --image")
    spec = EditSpec(boundary=boundary, alpha=args.alpha,
                    layer_range=_parse_ints(args.layers))
    edited = edit_code(code, spec)
    os.makedirs(args.out, exist_ok=True)
    save_image(generate(G, edited), os.path.join(args.out, "edited.png"))
    save_code(edited, os.path.join(args.out, "edited_code.json"))
    print(json.dumps({"attribute": args.attribute, "alpha": args.alpha, "out": args.out}))
    return 0


def cmd_interpolate(args) -> int:
    from .editing import interpolate_code

    models = _load_models(args.checkpoint, "generator")
    G = models["generator"]
    code_a, code_b = load_code(args.code_a), load_code(args.code_b)
    os.makedirs(args.out, exist_ok=True)
    if args.lam is not None:
        lams = [args.lam]
    else:
        lams = np.linspace(0.0, 1.0, args.frames).tolist()
    for i, lam in enumerate(lams):
        frame = generate(G, interpolate_code(code_a, code_b, lam))
        save_image(frame, os.path.join(args.out, f"frame_{i:04d}.png"))
    _write_json({"frames": len(lams), "lams": lams}, os.path.join(args.out, "frames.json"))
    print(json.dumps({"frames": len(lams), "out": args.out}))
    return 0


def cmd_mix(args) -> int:
    from .editing import mixed_code

    models = _load_models(args.checkpoint, "generator")
    G = models["generator"]
    mixed = mixed_code(load_code(args.content), load_code(args.style),
                       _parse_ints(args.layers))
    os.makedirs(args.out, exist_ok=True)
    save_image(generate(G, mixed), os.path.join(args.out, "mixed.png"))
    save_code(mixed, os.path.join(args.out, "mixed_code.json"))
    print(json.dumps({"layers": args.layers or "last-4", "out": args.out}))
    return 0


def cmd_diffuse(args) -> int:
    from .editing import DiffusionSpec, semantic_diffuse, stitch

    models = _load_models(args.checkpoint, "generator")
    config = _inversion_config(args)
    E, F = _inversion_models(models, config)
    crop = _parse_ints(args.crop)
    if crop is None or len(crop) != 4:
        raise InvalidArgumentError("--crop must be top,left,height,width")
    paste = _parse_ints(args.paste) or (0, 0)
    spec = DiffusionSpec(crop=crop, paste=paste, feather=args.feather, inversion=config)
    target, context = load_image(args.target), load_image(args.context)
    composite, _ = stitch(target, context, spec)
    result = semantic_diffuse(models["generator"], E, F, target, context, spec)
    os.makedirs(args.out, exist_ok=True)
    save_image(composite, os.path.join(args.out, "stitched.png"))
    save_image(result.reconstruction, os.path.join(args.out, "diffused.png"))
    save_code(result.code, os.path.join(args.out, "code.json"))
    _write_trace(result.trace, os.path.join(args.out, "trace.ndjson"))
    print(json.dumps({"out": args.out, "final": result.trace[-1]}))
    return 0


def cmd_probe(args) -> int:
    from .evaluation import semantic_probe_experiment

    models = _load_models(args.checkpoint, "generator", "feature_extractor")
    G, F = models["generator"], models["feature_extractor"]
    dataset = _load_any_dataset(args.data)
    if not dataset.labels:
        raise InvalidArgumentError("probing needs a dataset with attribute labels")
    if args.count < len(dataset):
        dataset = dataset.subset(range(args.count))

    inverters = {}
    for name in args.inverters.split(","):
        if name == "in-domain":
            config = dataclasses.replace(_inversion_config(args))
            E, F_ = _inversion_models(models, config)
            inverters[name] = ("batch", lambda imgs, c=config, E=E, F_=F_: invert_batch(
                G, E, F_, imgs, c))
        elif name == "mse-only":
            config = InversionConfig(steps=args.steps, step_size=args.step_size,
                                     lambda_dom=0.0, lambda_vgg=0.0, init="random",
                                     seed=args.seed)
            inverters[name] = ("batch", lambda imgs, c=config: invert_batch(
                G, None, None, imgs, c))
        elif name == "encoder-only":
            config = InversionConfig(steps=0, init="encoder", lambda_vgg=0.0,
                                     lambda_dom=0.0)
            E, _ = _inversion_models(models, dataclasses.replace(config, lambda_dom=2.0))
            inverters[name] = ("batch", lambda imgs, c=config, E=E: invert_batch(
                G, E, None, imgs, c))
        else:
            raise InvalidArgumentError(f"unknown inverter {name!r}; "
                                       "known: in-domain, mse-only, encoder-only")

    # invert in batches up front; the experiment then consumes codes in order
    images = [dataset.image(i) for i in range(len(dataset))]
    cache = {name: [r.code for r in run(images)] for name, (_, run) in inverters.items()}
    consumers = {name: iter(codes) for name, codes in cache.items()}
    report = semantic_probe_experiment(
        G, {name: (lambda img, it=it: next(it)) for name, it in consumers.items()},
        dataset, F, boundary_samples=args.samples, seed=args.seed,
        encoder=models.get("encoder"))

    os.makedirs(args.out, exist_ok=True)
    _write_json([b.to_dict() for b in report.boundaries.values()],
                os.path.join(args.out, "boundaries.json"))
    for name, by_attr in report.curves.items():
        for attr, curve in by_attr.items():
            with open(os.path.join(args.out, f"pr_{name}_{attr}.csv"), "w") as fh:
                fh.write(curve.to_csv())
    table = report.auc_table()
    _write_json({"auc": table, "samples": args.samples, "count": len(dataset)},
                os.path.join(args.out, "report.json"))
    print(json.dumps(table))
    return 0


def cmd_evaluate(args) -> int:
    from .evaluation import ffd, mse_metric, swd

    set_a = load_image_folder(args.a)
    set_b = load_image_folder(args.b)
    config = MetricConfig(seed=args.seed)
    values = {}
    if args.metric in ("mse", "all"):
        values["mse"] = mse_metric(set_a.images, set_b.images)
    if args.metric in ("swd", "all"):
        values["swd"] = swd(set_a.images, set_b.images, config)
    if args.metric in ("ffd", "all"):
        models = _load_models(args.checkpoint, "feature_extractor")
        values["ffd"] = ffd(set_a.images, set_b.images, models["feature_extractor"])
    if args.out:
        _write_json(values, args.out)
    print(json.dumps(values))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(args.checkpoint, boundaries_path=args.boundaries,
                     max_steps=args.max_steps)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="idinv",
        description="In-domain inversion lab: train, invert, edit, probe, serve.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-data", help="render the labeled synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=5000)
    p.add_argument("--resolution", type=int, default=32)
    p.add_argument("--channels", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_make_data)

    p = sub.add_parser("train-gan", help="adversarially pretrain the generator")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--out", required=True, help="directory for logs")
    p.add_argument("--steps", type=int, default=20000)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--gamma", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--d", type=int, default=64)
    p.add_argument("--fmap-base", type=int, default=256)
    p.add_argument("--fmap-max", type=int, default=48)
    p.add_argument("--mapper-depth", type=int, default=4)
    p.add_argument("--mapper-width", type=int, default=64)
    p.set_defaults(func=cmd_train_gan)

    p = sub.add_parser("train-encoder", help="train an encoder against a frozen generator")
    p.add_argument("--mode", choices=["domain-guided", "conventional"], default="domain-guided")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--data", default=None)
    p.add_argument("--out", required=True, help="directory for logs")
    p.add_argument("--steps", type=int, default=20000)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--lr-e", type=float, default=1e-4)
    p.add_argument("--lr-d", type=float, default=1e-4)
    p.add_argument("--lambda-vgg", type=float, default=5e-5)
    p.add_argument("--lambda-adv", type=float, default=0.1)
    p.add_argument("--gamma", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_encoder)

    p = sub.add_parser("invert", help="invert one image to a latent code")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--image", required=True)
    p.add_argument("--mask", default=None)
    p.add_argument("--out", required=True)
    _inversion_args(p)
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("edit", help="shift a code along a fitted boundary")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--boundaries", default=None)
    p.add_argument("--attribute", required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--layers", default=None, help="comma-separated rows (default: all)")
    p.add_argument("--code", default=None, help="code JSON from a prior invert")
    p.add_argument("--image", default=None, help="invert this image first")
    p.add_argument("--out", required=True)
    _inversion_args(p)
    p.set_defaults(func=cmd_edit)

    p = sub.add_parser("interpolate", help="render frames between two codes")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--code-a", required=True)
    p.add_argument("--code-b", required=True)
    p.add_argument("--frames", type=int, default=8)
    p.add_argument("--lam", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_interpolate)

    p = sub.add_parser("mix", help="swap style rows between two codes")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--content", required=True)
    p.add_argument("--style", required=True)
    p.add_argument("--layers", default=None, help="comma-separated rows (default: last 4)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("diffuse", help="paste a crop onto a context and invert with a mask")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--target", required=True)
    p.add_argument("--context", required=True)
    p.add_argument("--crop", required=True, help="top,left,height,width")
    p.add_argument("--paste", default=None, help="top,left (default 0,0)")
    p.add_argument("--feather", type=int, default=0)
    p.add_argument("--out", required=True)
    _inversion_args(p)
    p.set_defaults(func=cmd_diffuse)

    p = sub.add_parser("probe", help="fit boundaries and score inverters with PR curves")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--samples", type=int, default=512)
    p.add_argument("--count", type=int, default=48, help="real images to invert")
    p.add_argument("--inverters", default="in-domain,mse-only,encoder-only")
    _inversion_args(p)
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("evaluate", help="pixel/distribution metrics between two folders")
    p.add_argument("--metric", choices=["mse", "swd", "ffd", "all"], default="all")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("serve", help="run the HTTP editing service")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--boundaries", default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8321)
    p.add_argument("--max-steps", type=int, default=200)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "checkpoint", "") is None:
        args.checkpoint = _default_checkpoint()
    if getattr(args, "boundaries", "") is None:
        args.boundaries = _default_boundaries()
    try:
        return args.func(args) or 0
    except Exception as exc:  # runtime failure -> exit 1 with a message
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
