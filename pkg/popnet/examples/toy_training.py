# -*- coding: utf-8 -*-
""" This example trains a small PopNet on synthetic scenes with corrupted source-free depth, then scores the semantic
masks of held-out scenes and writes the popped-out depth and masks of one of them."""
import os
import numpy as np
import popnet as pn
import popnet.testing.utils as pn_tu


results_dir = os.path.join(os.path.dirname(os.path.realpath(__file__)), "toy_results")
train_dir = os.path.join(results_dir, "train")
held_out_dir = os.path.join(results_dir, "held_out")

# Synthetic data: noisy, blurred and warped depth, as a monocular estimator would give
noise = pn.NoiseModel(sigma=0.05, blur=2.0, warp=2.0)
pn.export_dataset(pn.random_scene_specs(200, 0, size=64, noise=noise), train_dir, seed=0, force=True)
pn.export_dataset(pn.random_scene_specs(50, 1, size=64, noise=noise), held_out_dir, seed=1, force=True)

# Training: half width networks, 2000 steps on the CPU
config = pn_tu.get_toy_acceptance_config()
ckpt = os.path.join(results_dir, "toy.pt")
pn.train(config, train_dir, ckpt, progress=True)

# Held-out evaluation
report = pn.evaluate(ckpt, held_out_dir, hard_separation_metrics=True)
report.write(os.path.join(results_dir, "toy_report.json"))
print(report.mean)

model, _, hyper = pn.load_model(ckpt)
ious = []
for stem in pn.dataset_stems(held_out_dir):
    sample = pn.read_sample(held_out_dir, stem)
    ious.append(pn_tu.iou(pn.predict(model, sample.rgb, sample.depth)["s_tilde"] > 0.5, sample.mask))
print("held-out mean IoU: %.3f" % float(np.mean(ious)))

# Single image inference
stem = pn.dataset_stems(held_out_dir)[0]
pn.infer(ckpt, pn.sample_path(held_out_dir, pn.IMAGES_DIR, stem), pn.sample_path(held_out_dir, pn.DEPTHS_DIR, stem),
         os.path.join(results_dir, "maps"))
