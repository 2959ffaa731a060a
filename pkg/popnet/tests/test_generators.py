# -*- coding: utf-8 -*-
import json
import os
import shutil
import unittest
import numpy as np
import pytest
import popnet as pn
import popnet.testing.utils as pn_tu


pn_tu.SEED = 70595


@pytest.mark.generators
class TestGenerators(unittest.TestCase):

    def setUp(self):
        file_dir = os.path.dirname(__file__)
        self.results_dir = os.path.join(file_dir, "datasets/results_generators/")
        if not os.path.exists(self.results_dir):
            os.mkdir(self.results_dir)

    def tearDown(self):
        shutil.rmtree(self.results_dir)

    def test_single_rectangle_scene(self):
        spec = pn.SceneSpec(height=32, width=32, plane=(0.0, 0.0, 0.3),
                            objects=(pn.ObjectSpec(center=(16, 16), size=(8, 10), delta=0.25),))
        sample, surface = pn.make_scene(spec, seed=0, stem="s")
        self.assertEqual(int(sample.mask.sum()), 80)
        pn_tu.assert_is_binary(sample.mask)
        pn_tu.assert_arrays_almost_equal(surface, np.full((32, 32), 0.3), tol=1e-7)
        pn_tu.assert_arrays_almost_equal(sample.depth[sample.mask > 0], np.full(80, 0.55), tol=1e-6)
        self.assertEqual(sample.validate().stem, "s")

    def test_ideal_depth_follows_pop_out_prior(self):
        for seed in range(10):
            with self.subTest(seed=seed):
                spec = pn.random_scene_spec(seed, size=48, max_objects=3)
                depth, mask, plane = pn.render_ideal_depth(spec)
                self.assertTrue(np.all(depth[mask > 0] > plane[mask > 0]))
                self.assertTrue(np.all(depth[mask == 0] == plane[mask == 0]))
                self.assertLessEqual(plane.max(), pn.PLANE_MAX)
                pn_tu.assert_in_unit_range(depth)
                self.assertGreater(mask.sum(), 0)

    def test_overlapping_objects_take_highest_delta(self):
        objects = (pn.ObjectSpec(center=(10, 10), size=(8, 8), delta=0.1),
                   pn.ObjectSpec(center=(12, 12), size=(8, 8), delta=0.3))
        depth, _, plane = pn.render_ideal_depth(pn.SceneSpec(height=24, width=24, objects=objects))
        self.assertAlmostEqual(depth[12, 12] - plane[12, 12], 0.3, places=12)
        self.assertAlmostEqual(depth[7, 7] - plane[7, 7], 0.1, places=12)

    def test_generation_is_deterministic(self):
        spec = pn.random_scene_spec(7, noise=pn.NoiseModel(sigma=0.05, blur=1.0, warp=2.0, dropout=0.2))
        first, _ = pn.make_scene(spec, seed=3)
        second, _ = pn.make_scene(spec, seed=3)
        third, _ = pn.make_scene(spec, seed=4)
        self.assertTrue(np.array_equal(first.depth, second.depth))
        self.assertTrue(np.array_equal(first.rgb, second.rgb))
        self.assertFalse(np.array_equal(first.depth, third.depth))
        self.assertEqual(pn.random_scene_specs(3, 5), pn.random_scene_specs(3, 5))

    def test_corruption(self):
        spec = pn.random_scene_spec(1)
        depth, _, _ = pn.render_ideal_depth(spec)
        identity = pn.corrupt_depth(depth, pn.NoiseModel(), seed=0)
        pn_tu.assert_arrays_almost_equal(identity, depth, tol=1e-7)
        corrupted = pn.corrupt_depth(depth, pn.NoiseModel(sigma=0.05, blur=2.0, warp=2.0, dropout=0.3), seed=0)
        pn_tu.assert_in_unit_range(corrupted)
        self.assertEqual(corrupted.shape, depth.shape)
        self.assertGreater(float(np.abs(corrupted - depth).mean()), 0.0)

    def test_gaussian_noise_level(self):
        corrupted = pn.corrupt_depth(np.full((64, 64), 0.5), pn.NoiseModel(sigma=0.05), seed=0)
        deviation = float(np.abs(corrupted - 0.5).mean())
        self.assertGreaterEqual(deviation, 0.03)
        self.assertLessEqual(deviation, 0.05)

    def test_square_object_pixel_count(self):
        spec = pn.SceneSpec(height=32, width=32, plane=(0.0, 0.0, 0.2),
                            objects=(pn.ObjectSpec(center=(16, 16), size=(10, 10), delta=0.2),))
        depth, mask, plane = pn.render_ideal_depth(spec)
        self.assertEqual(int(mask.sum()), 100)
        pn_tu.assert_arrays_almost_equal(depth[mask > 0] - plane[mask > 0], np.full(100, 0.2), tol=1e-12)

    def test_camouflage_blends_object_texture(self):
        objects = (pn.ObjectSpec(center=(16, 16), size=(12, 12), delta=0.2),)
        visible = pn.render_rgb(pn.SceneSpec(height=32, width=32, objects=objects, texture_seed=2))
        hidden = pn.render_rgb(pn.SceneSpec(height=32, width=32, objects=objects, texture_seed=2, camouflage=1.0))
        background = pn.render_rgb(pn.SceneSpec(height=32, width=32, texture_seed=2))
        pn_tu.assert_arrays_almost_equal(hidden, background, tol=1e-6)
        self.assertGreater(float(np.abs(visible - background).max()), 0.0)

    def test_invalid_specs(self):
        with self.assertRaises(pn.ValidationError):
            pn.ObjectSpec(shape="star")
        with self.assertRaises(pn.ValidationError):
            pn.ObjectSpec(delta=0.0)
        with self.assertRaises(pn.ValidationError):
            pn.SceneSpec(height=16, width=16, objects=(pn.ObjectSpec(center=(2, 2), size=(8, 8)),))
        with self.assertRaises(pn.ValidationError):
            pn.NoiseModel(sigma=-1.0)

    def test_spec_round_trip(self):
        spec = pn.random_scene_spec(11, noise=pn.NoiseModel(sigma=0.02))
        self.assertEqual(pn.SceneSpec.from_dict(spec.to_dict()), spec)

    def test_export_dataset(self):
        out_dir = os.path.join(self.results_dir, "scenes")
        manifest = pn_tu.make_synthetic_dataset(out_dir, n=3, seed=1, size=32)
        self.assertEqual(manifest["count"], 3)
        self.assertEqual(pn.dataset_stems(out_dir), ["scene_00000", "scene_00001", "scene_00002"])
        for subdir in (pn.IMAGES_DIR, pn.DEPTHS_DIR, pn.GT_DEPTHS_DIR, pn.MASKS_DIR, pn.SURFACES_DIR):
            self.assertEqual(len(os.listdir(os.path.join(out_dir, subdir))), 3)
        self.assertEqual(pn.read_manifest(out_dir), json.loads(json.dumps(manifest)))
        scene = manifest["scenes"][1]
        self.assertEqual(scene["checksums"][pn.MASKS_DIR],
                         pn.file_checksum(pn.sample_path(out_dir, pn.MASKS_DIR, "scene_00001")))
        ideal, _, _ = pn.render_ideal_depth(pn.SceneSpec.from_dict(scene["spec"]))
        read = pn.read_depth(pn.sample_path(out_dir, pn.GT_DEPTHS_DIR, "scene_00001"))
        pn_tu.assert_arrays_almost_equal(read, ideal, tol=1.0 / 65535)
        with self.assertRaises(pn.DataError):
            pn_tu.make_synthetic_dataset(out_dir, n=3, seed=1, size=32)

    def test_export_is_reproducible(self):
        first = pn_tu.make_synthetic_dataset(os.path.join(self.results_dir, "a"), n=2, seed=4, size=32)
        second = pn_tu.make_synthetic_dataset(os.path.join(self.results_dir, "b"), n=2, seed=4, size=32)
        self.assertEqual([s["checksums"] for s in first["scenes"]], [s["checksums"] for s in second["scenes"]])

    def test_export_overwrite_with_force(self):
        out_dir = os.path.join(self.results_dir, "forced")
        specs = pn.random_scene_specs(3, 9, size=32)
        parallel = pn.export_dataset(specs, out_dir, seed=9, workers=3)
        serial = pn.export_dataset(specs[:2], out_dir, seed=9, force=True, workers=1)
        self.assertEqual(serial["count"], 2)
        self.assertEqual(pn.dataset_stems(out_dir), ["scene_00000", "scene_00001"])
        self.assertEqual([s["checksums"] for s in parallel["scenes"][:2]], [s["checksums"] for s in serial["scenes"]])
