# -*- coding: utf-8 -*-
""" This example retrains the toy model with each ablatable loss alone, all of them and none of them, and plots the
held-out measures of every run side by side."""
import os
import popnet as pn
import popnet.testing.utils as pn_tu


results_dir = os.path.join(os.path.dirname(os.path.realpath(__file__)), "ablation_results")
train_dir = os.path.join(results_dir, "train")
held_out_dir = os.path.join(results_dir, "held_out")

noise = pn.NoiseModel(sigma=0.05, blur=2.0, warp=2.0)
pn.export_dataset(pn.random_scene_specs(200, 0, size=64, noise=noise), train_dir, seed=0, force=True)
pn.export_dataset(pn.random_scene_specs(50, 1, size=64, noise=noise), held_out_dir, seed=1, force=True)

ablatable = ["dep", "loc", "wtv", "sep"]
runs = {"none": pn.LossSwitches().without(ablatable), "all": pn.LossSwitches()}
for name in ablatable:
    runs[name] = pn.LossSwitches().without([other for other in ablatable if other != name])

reports = []
for name, switches in runs.items():
    config = pn_tu.get_toy_acceptance_config(losses=switches)
    ckpt = os.path.join(results_dir, "%s.pt" % name)
    pn.train(config, train_dir, ckpt)
    report = pn.evaluate(ckpt, held_out_dir)
    report.write(os.path.join(results_dir, "%s.json" % name))
    reports.append(report)
    print("%-5s Fm=%.3f M=%.3f" % (name, report.mean["Fm"], report.mean["M"]))

pn.plot_reports(reports, os.path.join(results_dir, "ablation.svg"), labels=list(runs))
