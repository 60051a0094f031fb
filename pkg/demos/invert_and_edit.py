"""Invert fresh images with the pre-trained 32x32 bundle and edit the codes.

Walks the whole editing surface: attribute manipulation at a few strengths,
interpolation between two inversions, style mixing, and semantic diffusion
of a crop into a different context. Saves PNG strips under demos/_out/edit/.

Needs the trained bundle the test suite caches under tests/_cache/ (run
`python3 -m pytest tests/test_acceptance.py -q` once to build it, ~hours),
or point --bundle at any checkpoint with generator/encoder/feature_extractor.
"""

import argparse
import glob
import os
import sys

import numpy as np

from idinv.core import SeededRng, sample_latent
from idinv.editing import (DiffusionSpec, EditSpec, interpolate, manipulate,
                           semantic_diffuse, stitch, style_mix)
from idinv.evaluation import fit_boundary
from idinv.inversion import InversionConfig, invert
from idinv.perception import predict_attributes
from idinv.synthesis import generate, sample_w_code
from idinv.workspace import DatasetSpec, load_checkpoint, make_synthetic_dataset, save_images

HERE = os.path.dirname(__file__)


def find_bundle():
    hits = sorted(glob.glob(os.path.join(HERE, "..", "tests", "_cache", "desk-*")))
    if not hits:
        sys.exit("no trained bundle found — run the acceptance tests once to "
                 "build it, or train your own with demos/train_small_pipeline.py "
                 "and pass --bundle")
    return hits[0]


def boundary_for(G, F, attribute, n=256, seed=31):
    # label generator samples with the classifier, then one linear SVM;
    # classifier columns follow sorted attribute order
    codes = [sample_w_code(G, z) for z in sample_latent(SeededRng(seed), n, G.config.mapper.d)]
    imgs = np.stack([generate(G, c).pixels for c in codes])
    labels = predict_attributes(F, imgs)[:, sorted(["size", "shade", "xpos", "aspect"]).index(attribute)]
    return fit_boundary(codes, labels, attribute)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--bundle", default=None, help="checkpoint dir (default: tests/_cache/desk-*)")
    ap.add_argument("--steps", type=int, default=150)
    ap.add_argument("--out", default=os.path.join(HERE, "_out", "edit"))
    args = ap.parse_args()

    models = load_checkpoint(args.bundle or find_bundle())
    G = models["generator"]
    E = models.get("encoder") or models["encoder_s0"]
    F = models["feature_extractor"]
    os.makedirs(args.out, exist_ok=True)

    # two images the models have never seen (different dataset seed)
    fresh = make_synthetic_dataset(DatasetSpec(resolution=G.config.resolution, count=2, seed=999))
    a, b = fresh.image(0), fresh.image(1)

    cfg = InversionConfig(steps=args.steps)
    run_a = invert(G, E, F, a, cfg)
    run_b = invert(G, E, F, b, cfg)
    for name, run in [("a", run_a), ("b", run_b)]:
        best = run.trace[run.best_step]
        print(f"inversion {name}: pixel {best['pixel']:.5f}  perceptual {best['perceptual']:.3f}"
              f"  domain {best['domain']:.4f}  (best step {run.best_step})")
    save_images([a, run_a.reconstruction, b, run_b.reconstruction], args.out, prefix="invert_")

    print("\nmanipulating 'size' over alpha in [-3, 3]:")
    bnd = boundary_for(G, F, "size")
    print(f"  boundary training accuracy {bnd.train_accuracy:.3f}")
    sweep = [manipulate(G, run_a.code, EditSpec(boundary=bnd, alpha=al))
             for al in (-3.0, -1.5, 0.0, 1.5, 3.0)]
    save_images(sweep, args.out, prefix="size_sweep_")

    frames = [interpolate(G, run_a.code, run_b.code, lam)
              for lam in np.linspace(0.0, 1.0, 6)]
    save_images(frames, args.out, prefix="interp_")

    # content rows from a, style rows (last layers) from b, and the reverse
    save_images([style_mix(G, run_a.code, run_b.code),
                 style_mix(G, run_b.code, run_a.code)], args.out, prefix="mix_")

    # drop the center crop of a into b's frame and let inversion blend the seam
    res = G.config.resolution
    q = res // 4
    spec = DiffusionSpec(crop=(q, q, 2 * q, 2 * q), paste=(q, q), feather=2,
                         inversion=InversionConfig(steps=args.steps))
    composite, _ = stitch(a, b, spec)
    diff = semantic_diffuse(G, E, F, a, b, spec)
    save_images([composite, diff.reconstruction], args.out, prefix="diffuse_")
    print(f"\ndiffusion: stitched seam vs blended result written, "
          f"best crop-pixel loss {diff.trace[diff.best_step]['pixel']:.5f}")
    print(f"all outputs in {args.out}")


if __name__ == "__main__":
    main()
