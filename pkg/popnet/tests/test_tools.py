# -*- coding: utf-8 -*-
import json
import os
import shutil
import unittest
from unittest import mock
import numpy as np
import pytest
import popnet as pn
import popnet.testing.utils as pn_tu


pn_tu.SEED = 70595


def _sample(size=32, seed=0):
    sample, _ = pn.make_scene(pn.random_scene_spec(seed, size=size), seed, stem="s%d" % seed)
    return sample


@pytest.mark.tools
class TestAugment(unittest.TestCase):

    def test_flip_is_an_involution(self):
        sample = _sample()
        twice = pn.flip_sample(pn.flip_sample(sample))
        for name in ("rgb", "depth", "mask", "surface"):
            self.assertTrue(np.array_equal(getattr(twice, name), getattr(sample, name)))
        self.assertTrue(np.array_equal(pn.flip_sample(sample).mask[:, 0], sample.mask[:, -1]))

    def test_rotation_and_clipping_keep_masks_binary(self):
        sample = _sample()
        rotated = pn.rotate_sample(sample, 12.0)
        pn_tu.assert_is_binary(rotated.mask)
        self.assertEqual(rotated.shape, sample.shape)
        clipped = pn.clip_sample_border(sample, (2, 1, 3, 0))
        pn_tu.assert_is_binary(clipped.mask)
        self.assertEqual(clipped.shape, sample.shape)
        clipped.validate()

    def test_augment_is_seeded(self):
        sample = _sample()
        policy = pn.AugmentationPolicy(flip_probability=1.0, rotation_probability=1.0, clip_probability=1.0)
        first, second = pn.augment(sample, policy, seed=5), pn.augment(sample, policy, seed=5)
        self.assertTrue(np.array_equal(first.depth, second.depth))
        self.assertTrue(np.array_equal(first.mask, second.mask))
        pn_tu.assert_is_binary(first.mask)
        self.assertIs(pn.augment(sample, pn.AugmentationPolicy.disabled(), seed=5), sample)


@pytest.mark.tools
class TestTraining(unittest.TestCase):

    def setUp(self):
        file_dir = os.path.dirname(__file__)
        self.results_dir = os.path.join(file_dir, "datasets/results_training/")
        if not os.path.exists(self.results_dir):
            os.mkdir(self.results_dir)
        self.data_dir = os.path.join(self.results_dir, "data")
        pn_tu.make_synthetic_dataset(self.data_dir, n=4, seed=0, size=64)

    def tearDown(self):
        shutil.rmtree(self.results_dir)

    def test_scene_folder(self):
        folder = pn.SceneFolder(self.data_dir, resolution=64)
        self.assertEqual(len(folder), 4)
        item = folder[1]
        self.assertEqual(tuple(item["rgb"].shape), (3, 64, 64))
        self.assertEqual(tuple(item["depth"].shape), (1, 64, 64))
        self.assertEqual(item["stem"], "scene_00001")

    def test_seeded_orders(self):
        self.assertEqual(pn.epoch_permutation(0, 3, 10), pn.epoch_permutation(0, 3, 10))
        self.assertEqual(sorted(pn.epoch_permutation(0, 3, 10)), list(range(10)))
        stems = ["s%d" % i for i in range(10)]
        subset = pn.select_stems(stems, 0.3, 1)
        self.assertEqual(len(subset), 3)
        self.assertEqual(subset, pn.select_stems(stems, 0.3, 1))
        self.assertEqual(pn.select_stems(stems, 1.0, 1), stems)

    def test_training_log_and_checkpoint(self):
        config = pn_tu.get_toy_train_config(epochs=2, max_steps=None)
        out = os.path.join(self.results_dir, "run.pt")
        entries = pn.train(config, self.data_dir, out)
        self.assertEqual(len(entries), 4)
        self.assertEqual([e["step"] for e in entries], [1, 2, 3, 4])
        with open(os.path.join(self.results_dir, "run.jsonl")) as f:
            lines = [json.loads(line) for line in f]
        self.assertEqual(lines, entries)
        for entry in entries:
            self.assertEqual(set(entry), set(pn.LOG_FIELDS))
            self.assertTrue(all(np.isfinite(entry[name]) for name in pn.LOG_FIELDS))
        manifest = pn.load_checkpoint(out, config.model)["manifest"]
        self.assertEqual(manifest["step"], 4)
        self.assertEqual(manifest["epoch"], 2)

    def test_semantic_loss_decreases(self):
        config = pn_tu.get_toy_train_config(epochs=100, max_steps=40)
        entries = pn.train(config, self.data_dir, os.path.join(self.results_dir, "fit.pt"))
        first = np.mean([e["sem"] for e in entries[:5]])
        last = np.mean([e["sem"] for e in entries[-5:]])
        self.assertLess(last, first)

    def test_disabled_losses_are_zero(self):
        config = pn_tu.get_toy_train_config(max_steps=1, losses=pn.LossSwitches().without(["dep", "wtv"]))
        entries = pn.train(config, self.data_dir, os.path.join(self.results_dir, "ablation.pt"))
        self.assertEqual(entries[0]["dep"], 0.0)
        self.assertEqual(entries[0]["wtv"], 0.0)
        self.assertGreater(entries[0]["sem"], 0.0)

    def test_determinism_and_resume(self):
        config = pn_tu.get_toy_train_config(epochs=2, max_steps=None, checkpoint_every=2)
        first = pn.train(config, self.data_dir, os.path.join(self.results_dir, "first.pt"))
        second = pn.train(config, self.data_dir, os.path.join(self.results_dir, "second.pt"))
        self.assertEqual(pn.checkpoint_hash(os.path.join(self.results_dir, "first.pt")),
                         pn.checkpoint_hash(os.path.join(self.results_dir, "second.pt")))
        self.assertEqual(first, second)
        intermediate = os.path.join(self.results_dir, "first_step2.pt")
        self.assertTrue(os.path.isfile(intermediate))
        resumed = pn.train(config, self.data_dir, os.path.join(self.results_dir, "resumed.pt"), resume=intermediate)
        self.assertEqual([e["step"] for e in resumed], [3, 4])
        for expected, entry in zip(first[2:], resumed):
            for name in pn.LOG_FIELDS:
                self.assertAlmostEqual(entry[name], expected[name], places=6)

    def test_resume_with_other_architecture(self):
        config = pn_tu.get_toy_train_config(max_steps=1)
        out = os.path.join(self.results_dir, "small.pt")
        pn.train(config, self.data_dir, out)
        other = pn_tu.get_toy_train_config(max_steps=2, model=pn.ModelConfig(width=0.5))
        with self.assertRaises(pn.ConfigMismatchError):
            pn.train(other, self.data_dir, os.path.join(self.results_dir, "other.pt"), resume=out)

    def test_non_finite_loss_is_reported(self):
        config = pn_tu.get_toy_train_config(max_steps=1)
        out = os.path.join(self.results_dir, "nan.pt")
        with mock.patch("popnet.tools.training.compute_losses", side_effect=pn.NumericError("not finite")):
            with self.assertRaises(pn.NumericError) as context:
                pn.train(config, self.data_dir, out)
        self.assertEqual(len(context.exception.stems), 2)
        self.assertTrue(os.path.isfile(context.exception.dump_path))

    def test_missing_modality(self):
        os.remove(pn.sample_path(self.data_dir, pn.MASKS_DIR, "scene_00002"))
        with self.assertRaises(pn.DataError):
            pn.train(pn_tu.get_toy_train_config(), self.data_dir, os.path.join(self.results_dir, "x.pt"))


@pytest.mark.tools
class TestEvaluation(unittest.TestCase):

    def setUp(self):
        file_dir = os.path.dirname(__file__)
        self.results_dir = os.path.join(file_dir, "datasets/results_evaluation/")
        if not os.path.exists(self.results_dir):
            os.mkdir(self.results_dir)
        self.data_dir = os.path.join(self.results_dir, "data")
        pn_tu.make_synthetic_dataset(self.data_dir, n=3, seed=2, size=64)
        self.config = pn_tu.get_toy_train_config(max_steps=1)
        self.ckpt = os.path.join(self.results_dir, "model.pt")
        pn.train(self.config, self.data_dir, self.ckpt)

    def tearDown(self):
        shutil.rmtree(self.results_dir)

    def test_evaluate(self):
        report = pn.evaluate(self.ckpt, self.data_dir, self.config.model, hard_separation_metrics=True)
        self.assertEqual([r["stem"] for r in report.per_image], ["scene_00000", "scene_00001", "scene_00002"])
        for record in report.per_image:
            for name in pn.METRIC_NAMES:
                self.assertGreaterEqual(record[name], 0.0)
                self.assertLessEqual(record[name], 1.0)
        self.assertIn("hard_separation", report.alongside)
        self.assertEqual(len(report.alongside["hard_separation"]["per_image"]), 3)

    def test_evaluation_uses_stored_sigma(self):
        config = pn_tu.get_toy_train_config(max_steps=1, hyper=pn.HyperParams(sigma=2.5))
        ckpt = os.path.join(self.results_dir, "soft.pt")
        pn.train(config, self.data_dir, ckpt)
        model, _, hyper = pn.load_model(ckpt)
        self.assertEqual(hyper.sigma, 2.5)
        sample = pn.read_sample(self.data_dir, "scene_00001")
        expected = pn.predict(model, sample.rgb, sample.depth, pn.HyperParams(sigma=2.5))
        self.assertFalse(np.array_equal(expected["s_s"], pn.predict(model, sample.rgb, sample.depth)["s_s"]))
        report = pn.evaluate(ckpt, self.data_dir, hard_separation_metrics=True)
        record = report.alongside["hard_separation"]["per_image"][1]
        self.assertEqual(record["stem"], "scene_00001")
        self.assertAlmostEqual(record["M"], pn.mae(expected["hard"], sample.mask), places=12)

    def test_evaluate_by_object_count(self):
        report = pn.evaluate(None, self.data_dir, identity=True, by_object_count=True)
        counts = pn.object_counts(pn.read_manifest(self.data_dir))
        single, multi = pn.OBJECT_COUNT_GROUPS
        self.assertEqual(sorted(r["stem"] for r in report.alongside[single]["per_image"]),
                         sorted(stem for stem, count in counts.items() if count == 1))
        self.assertEqual(sorted(r["stem"] for r in report.alongside[multi]["per_image"]),
                         sorted(stem for stem, count in counts.items() if count > 1))

    def test_identity_evaluation(self):
        report = pn.evaluate(None, self.data_dir, identity=True)
        self.assertEqual(report.mean["M"], 0.0)
        self.assertAlmostEqual(report.mean["Fm"], 1.0, places=9)
        self.assertAlmostEqual(report.mean["Em"], 1.0, places=9)

    def test_evaluate_with_other_architecture(self):
        with self.assertRaises(pn.ConfigMismatchError):
            pn.evaluate(self.ckpt, self.data_dir, pn.ModelConfig(width=0.5))

    def test_infer(self):
        sample = _sample(size=40, seed=9)
        image, depth = os.path.join(self.results_dir, "image.png"), os.path.join(self.results_dir, "depth.png")
        pn.write_rgb(image, sample.rgb)
        pn.write_depth(depth, sample.depth)
        out_dir = os.path.join(self.results_dir, "inference")
        paths = pn.infer(self.ckpt, image, depth, out_dir)
        self.assertEqual(set(paths), set(pn.INFERENCE_FILE_NAMES))
        for path in paths.values():
            self.assertTrue(os.path.isfile(path))
        self.assertEqual(pn.read_depth(paths["d_po"]).shape, (40, 40))
        pn_tu.assert_is_binary(pn.read_mask(paths["hard"]))

    def test_predict_outputs(self):
        model, manifest, hyper = pn.load_model(self.ckpt)
        self.assertEqual(manifest["step"], 1)
        self.assertEqual(hyper, self.config.hyper)
        sample = _sample(size=64, seed=3)
        maps = pn.predict(model, sample.rgb, sample.depth)
        for name in ("d_po", "d_c", "s_tilde", "s_s", "hard"):
            self.assertEqual(maps[name].shape, (64, 64))
            pn_tu.assert_in_unit_range(maps[name])
        pn_tu.assert_arrays_almost_equal(maps["hard"], (maps["s_s"] > 0.5).astype(np.float32), tol=0)


@pytest.mark.tools
class TestGradcheck(unittest.TestCase):

    def test_all_losses_in_double_precision(self):
        results = pn.run_gradcheck(precision="float64", instances=3, seed=0)
        self.assertEqual([r.loss for r in results], list(pn.GRADCHECK_LOSSES))
        for result in results:
            self.assertTrue(result.passed, "%s: %.3e" % (result.loss, result.max_relative_error))

    def test_single_precision(self):
        results = pn.run_gradcheck(precision="float32", instances=2)
        self.assertEqual([r.loss for r in results], list(pn.GRADCHECK_LOSSES))
        for result in results:
            self.assertTrue(result.passed, "%s: %.3e" % (result.loss, result.max_relative_error))

    def test_wrong_gradient_is_detected(self):
        point = np.linspace(0.1, 0.9, 16).reshape(4, 4)
        analytical = pn.analytical_gradient(lambda x: (x ** 2).sum(), point)
        numerical = pn.numerical_gradient(lambda x: (x ** 3).sum(), point)
        self.assertGreater(pn.relative_error(analytical, numerical), 1e-3)
        self.assertLess(pn.relative_error(analytical, pn.numerical_gradient(lambda x: (x ** 2).sum(), point)), 1e-8)

    def test_table_and_errors(self):
        table = pn.results_table([pn.GradcheckResult("dep", "float64", 1e-9, 1e-6)])
        self.assertEqual(list(table["passed"]), [True])
        with self.assertRaises(pn.ValidationError):
            pn.run_gradcheck(["unknown"], instances=1)
        with self.assertRaises(pn.ValidationError):
            pn.run_gradcheck(precision="float16")


@pytest.mark.tools
class TestPlot(unittest.TestCase):

    def setUp(self):
        file_dir = os.path.dirname(__file__)
        self.results_dir = os.path.join(file_dir, "datasets/results_plot/")
        if not os.path.exists(self.results_dir):
            os.mkdir(self.results_dir)

    def tearDown(self):
        shutil.rmtree(self.results_dir)

    def test_plot_is_reproducible(self):
        reports = [pn.MetricsReport.from_records([{"stem": "a", "M": 0.1, "Fm": 0.8, "Sm": 0.7, "Em": 0.9}]),
                   pn.MetricsReport.from_records([{"stem": "a", "M": 0.2, "Fm": 0.6, "Sm": 0.6, "Em": 0.8}])]
        first, second = os.path.join(self.results_dir, "a.svg"), os.path.join(self.results_dir, "b.svg")
        pn.plot_reports(reports, first, labels=["full", "baseline"])
        pn.plot_reports(reports, second, labels=["full", "baseline"])
        with open(first, "rb") as f1, open(second, "rb") as f2:
            self.assertEqual(f1.read(), f2.read())
        with self.assertRaises(pn.ValidationError):
            pn.plot_reports([], first)


@pytest.mark.slow
class TestToyAcceptance(unittest.TestCase):
    """Full toy runs on 200 corrupted 64x64 scenes, enabled with ``POPNET_RUN_SLOW=1``."""

    NB_TRAIN = 200
    NB_HELD_OUT = 50
    NB_STEPS = 2000

    def setUp(self):
        if not pn_tu.slow_tests_enabled():
            self.skipTest("slow tests are disabled")
        file_dir = os.path.dirname(__file__)
        self.results_dir = os.path.join(file_dir, "datasets/results_acceptance/")
        if not os.path.exists(self.results_dir):
            os.mkdir(self.results_dir)
        noise = pn.NoiseModel(sigma=0.05, blur=2.0, warp=2.0)
        self.train_dir = os.path.join(self.results_dir, "train")
        self.held_out_dir = os.path.join(self.results_dir, "held_out")
        pn_tu.make_synthetic_dataset(self.train_dir, n=self.NB_TRAIN, seed=0, size=64, noise=noise)
        pn_tu.make_synthetic_dataset(self.held_out_dir, n=self.NB_HELD_OUT, seed=1, size=64, noise=noise)

    def tearDown(self):
        shutil.rmtree(self.results_dir)

    def _config(self, **kwargs):
        return pn_tu.get_toy_acceptance_config(max_steps=self.NB_STEPS, **kwargs)

    def _held_out_iou(self, ckpt):
        model, _, _ = pn.load_model(ckpt)
        scores = []
        for stem in pn.dataset_stems(self.held_out_dir):
            sample = pn.read_sample(self.held_out_dir, stem)
            maps = pn.predict(model, sample.rgb, sample.depth)
            scores.append(pn_tu.iou(maps["s_tilde"] > 0.5, sample.mask))
        return float(np.mean(scores))

    def test_toy_end_to_end(self):
        ckpt = os.path.join(self.results_dir, "full.pt")
        pn.train(self._config(), self.train_dir, ckpt)
        self.assertGreaterEqual(self._held_out_iou(ckpt), 0.85)

    def test_loss_ablation_ordering(self):
        ablatable = ("dep", "loc", "wtv", "sep")
        runs = {"baseline": pn.LossSwitches().without(ablatable), "full": pn.LossSwitches()}
        for name in ablatable:
            runs[name] = pn.LossSwitches().without([other for other in ablatable if other != name])
        scores = {}
        for name, switches in runs.items():
            ckpt = os.path.join(self.results_dir, "%s.pt" % name)
            pn.train(self._config(losses=switches), self.train_dir, ckpt)
            scores[name] = pn.evaluate(ckpt, self.held_out_dir).mean["Fm"]
        for name in ablatable:
            self.assertGreater(scores[name], scores["baseline"], name)
        self.assertEqual(max(scores, key=scores.get), "full")

    def test_determinism_and_resume(self):
        config = self._config(checkpoint_every=self.NB_STEPS // 2)
        first = pn.train(config, self.train_dir, os.path.join(self.results_dir, "first.pt"))
        pn.train(config, self.train_dir, os.path.join(self.results_dir, "second.pt"))
        self.assertEqual(pn.checkpoint_hash(os.path.join(self.results_dir, "first.pt")),
                         pn.checkpoint_hash(os.path.join(self.results_dir, "second.pt")))
        resumed = pn.train(config, self.train_dir, os.path.join(self.results_dir, "resumed.pt"),
                           resume=os.path.join(self.results_dir, "first_step%d.pt" % (self.NB_STEPS // 2)))
        self.assertEqual(resumed, first[self.NB_STEPS // 2:])
