"""Score the pre-trained bundle: sample fidelity, reconstruction metrics,
and the semantic probing experiment.

The probe is the interesting one — it asks whether inverted codes land
somewhere semantically meaningful. Boundaries are fitted on labeled
generator samples, real images are inverted two ways (in-domain vs a plain
MSE optimizer with no encoder), and the codes are scored against the
ground-truth attributes. In-domain codes should win on AUC.

Uses the cached bundle from tests/_cache/ (see invert_and_edit.py).
"""

import glob
import os
import sys

import numpy as np
import torch

from idinv.core import Image, SeededRng
from idinv.evaluation import ffd, metric_report, semantic_probe_experiment, swd
from idinv.inversion import InversionConfig, invert
from idinv.workspace import DatasetSpec, load_checkpoint, make_synthetic_dataset

HERE = os.path.dirname(__file__)
PROBE_IMAGES = 16
STEPS = 60


def find_bundle():
    hits = sorted(glob.glob(os.path.join(HERE, "..", "tests", "_cache", "desk-*")))
    if not hits:
        sys.exit("no trained bundle found — run the acceptance tests once, or "
                 "see demos/train_small_pipeline.py")
    return hits[0]


def main():
    models = load_checkpoint(find_bundle())
    G, F = models["generator"], models["feature_extractor"]
    E = models.get("encoder") or models["encoder_s0"]
    res, d = G.config.resolution, G.config.mapper.d

    real = make_synthetic_dataset(DatasetSpec(resolution=res, count=128, seed=555))
    z = torch.from_numpy(SeededRng(6).normal((128, d)).astype(np.float32))
    with torch.no_grad():
        fake = G(z).numpy()
    noise = np.clip(SeededRng(7).normal(fake.shape).astype(np.float32), -1, 1)

    print("sample fidelity (lower is better, noise row is the sanity check):")
    print(f"  generator vs real: swd {swd(fake, real.images):.4f}  "
          f"ffd {ffd(fake, real.images, F):.3f}")
    print(f"  noise     vs real: swd {swd(noise, real.images):.4f}  "
          f"ffd {ffd(noise, real.images, F):.3f}")

    probe_set = real.subset(range(PROBE_IMAGES))
    cfg_in = InversionConfig(steps=STEPS)
    cfg_mse = InversionConfig(steps=STEPS, lambda_dom=0.0, lambda_vgg=0.0,
                              init="random", seed=3)
    recons = []

    def in_domain(x: Image):
        run = invert(G, E, F, x, cfg_in)
        recons.append(run.reconstruction)
        return run.code

    inverters = {
        "in-domain": in_domain,
        "mse-only": lambda x: invert(G, None, None, x, cfg_mse).code,
    }
    report = semantic_probe_experiment(G, inverters, probe_set, F,
                                       boundary_samples=512, seed=0, encoder=E)

    print(f"\nsemantic probe AUC ({PROBE_IMAGES} images, {STEPS} steps):")
    table = report.auc_table()
    attrs = sorted(next(iter(table.values())))
    print("  " + " ".join(f"{a:>8}" for a in ["inverter"] + attrs))
    for name, by_attr in table.items():
        print("  " + f"{name:>8} " + " ".join(f"{by_attr[a]:8.3f}" for a in attrs))

    metrics = metric_report(probe_set.images, recons, F)
    print(f"\nin-domain reconstruction: mse {metrics.mse:.5f}  "
          f"swd {metrics.swd:.4f}  ffd {metrics.ffd:.3f}")
    for attr, bnd in report.boundaries.items():
        print(f"boundary '{attr}': training accuracy {bnd.train_accuracy:.3f}")


if __name__ == "__main__":
    main()
