# -*- coding: utf-8 -*-
import importlib
import math
import os
import numpy as np
import torch
import popnet as pn


SEED = 70595
_EPS = np.spacing(1)


def assert_arrays_almost_equal(first, second, msg='', tol=1e-6):
    first = np.asarray(first.detach().cpu() if hasattr(first, "detach") else first, dtype=np.float64)
    second = np.asarray(second.detach().cpu() if hasattr(second, "detach") else second, dtype=np.float64)
    assert first.shape == second.shape, "%s shapes %s != %s" % (msg, str(first.shape), str(second.shape))
    difference = float(np.max(np.abs(first - second))) if first.size else 0.0
    assert difference <= tol, "%s max difference %.3e > %.1e" % (msg, difference, tol)


def assert_is_binary(array, msg=''):
    array = np.asarray(array.detach().cpu() if hasattr(array, "detach") else array)
    assert np.all((array == 0) | (array == 1)), msg or "array is not binary"


def assert_in_unit_range(array, msg=''):
    array = np.asarray(array.detach().cpu() if hasattr(array, "detach") else array, dtype=np.float64)
    assert np.all(np.isfinite(array)) and array.min() >= 0 and array.max() <= 1, msg or "values out of [0, 1]"


def iou(first, second) -> float:
    first, second = np.asarray(first) > 0.5, np.asarray(second) > 0.5
    union = np.count_nonzero(first | second)
    return 1.0 if union == 0 else np.count_nonzero(first & second) / float(union)


def get_rng():
    """Return a numpy generator seeded with ``SEED`` and advance ``SEED``."""
    global SEED
    rng = np.random.default_rng(SEED)
    SEED += 1
    return rng


def get_random_depth(size=16, low=0.0, high=1.0):
    return get_rng().uniform(low, high, (size, size))


def get_random_mask(size=16, min_side=3):
    """Random rectangle mask, never empty nor full."""
    rng = get_rng()
    height, width = rng.integers(min_side, size - 1, 2)
    top, left = rng.integers(0, size - height + 1), rng.integers(0, size - width + 1)
    mask = np.zeros((size, size))
    mask[top:top + height, left:left + width] = 1.0
    return mask


def get_random_metric_pair(size=16):
    """Random soft prediction and a ground truth with at least one foreground and one background pixel."""
    rng = get_rng()
    g = rng.random((size, size)) < rng.uniform(0.1, 0.6)
    g[0, 0], g[-1, -1] = True, False
    pred = np.clip(0.6 * g + rng.uniform(-0.4, 0.6, (size, size)), 0.0, 1.0)
    return pred, g.astype(np.float64)


def get_small_model_config():
    return pn.ModelConfig(width=0.25)


def get_toy_train_config(**kwargs):
    """Tiny CPU configuration: 64x64 samples, a few steps, quarter width networks."""
    values = dict(resolution=64, batch_size=2, epochs=1, max_steps=4, learning_rate=1e-3, seed=0, device="cpu",
                  model=get_small_model_config(), augment=pn.AugmentationPolicy.disabled())
    values.update(kwargs)
    return pn.TrainConfig(**values)


def get_toy_acceptance_config(**kwargs):
    """Toy end-to-end recipe on 64x64 scenes: half width networks, 2000 Adam steps at 1e-3 (divided by 10 after 60
    epochs of 25 steps) and random horizontal flips."""
    flips = pn.AugmentationPolicy(flip_probability=0.5, rotation_probability=0.0, rotation_degrees=0.0,
                                  clip_probability=0.0, clip_fraction=0.0)
    values = dict(batch_size=8, epochs=100, max_steps=2000, learning_rate=1e-3, model=pn.ModelConfig(width=0.5),
                  augment=flips)
    values.update(kwargs)
    return get_toy_train_config(**values)


def make_synthetic_dataset(out_dir, n=4, seed=0, size=64, noise=None):
    specs = pn.random_scene_specs(n, seed, size=size, noise=noise or pn.NoiseModel(sigma=0.02, blur=1.0))
    return pn.export_dataset(specs, out_dir, seed)


def check_optional_package_presence(pkg_name):
    """Returns true if the given package name is available, false otherwise."""
    try:
        importlib.import_module(pkg_name)
    except ImportError as e:
        if pkg_name in str(e):
            return False
    return True


def slow_tests_enabled():
    return os.environ.get("POPNET_RUN_SLOW", "") == "1"


# Pixel-loop reference transcriptions.

def sobel_reference(grid):
    grid = np.asarray(grid, dtype=np.float64)
    height, width = grid.shape
    gx, gy = np.zeros_like(grid), np.zeros_like(grid)
    for i in range(height):
        for j in range(width):
            for di in (-1, 0, 1):
                for dj in (-1, 0, 1):
                    value = grid[min(max(i + di, 0), height - 1), min(max(j + dj, 0), width - 1)]
                    gx[i, j] += pn.SOBEL_KERNEL_X[di + 1][dj + 1] * value
                    gy[i, j] += pn.SOBEL_KERNEL_Y[di + 1][dj + 1] * value
    return gx, gy


def ssim_reference(a, b, window=3, c1=0.01 ** 2, c2=0.03 ** 2):
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    height, width = a.shape
    out = np.zeros((height - window + 1, width - window + 1))
    for i in range(out.shape[0]):
        for j in range(out.shape[1]):
            x, y = a[i:i + window, j:j + window], b[i:i + window, j:j + window]
            mu_x, mu_y = x.mean(), y.mean()
            sigma_x, sigma_y = np.mean((x - mu_x) ** 2), np.mean((y - mu_y) ** 2)
            sigma_xy = np.mean((x - mu_x) * (y - mu_y))
            out[i, j] = ((2 * mu_x * mu_y + c1) * (2 * sigma_xy + c2)
                         / ((mu_x ** 2 + mu_y ** 2 + c1) * (sigma_x + sigma_y + c2)))
    return out


def _neighbors(i, j, height, width):
    for di, dj in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        if 0 <= i + di < height and 0 <= j + dj < width:
            yield i + di, j + dj


def _interior(g, i, j):
    height, width = g.shape
    if i == 0 or j == 0 or i == height - 1 or j == width - 1:
        return False
    return bool(np.all(g[i - 1:i + 2, j - 1:j + 2] == 1))


def local_smoothness_reference(d_po, g, eps=1e-8):
    d_po, g = np.asarray(d_po, dtype=np.float64), np.asarray(g, dtype=np.float64)
    height, width = g.shape
    gx, gy = sobel_reference(d_po * g)
    total, count = 0.0, 0
    for i in range(height):
        for j in range(width):
            if not _interior(g, i, j):
                continue
            n_p = np.array([-gx[i, j], -gy[i, j], 1.0])
            for k, l in _neighbors(i, j, height, width):
                if not _interior(g, k, l):
                    continue
                n_q = np.array([-gx[k, l], -gy[k, l], 1.0])
                cosine = np.dot(n_p, n_q) / max(np.linalg.norm(n_p) * np.linalg.norm(n_q), eps)
                total += max(1.0 - cosine, 0.0)
                count += 1
    return total / count if count else 0.0


def wtv_reference(d_po, g, gamma=0.5, power=1):
    d_po, g = np.asarray(d_po, dtype=np.float64), np.asarray(g, dtype=np.float64)
    height, width = g.shape
    gx, gy = sobel_reference(g)
    boundary = (gx ** 2 + gy ** 2) != 0
    w0 = np.count_nonzero(boundary) / float(height * width)
    total, count = 0.0, 0
    for i in range(height):
        for j in range(width):
            weight = w0 if boundary[i, j] else w0 + gamma
            for k, l in _neighbors(i, j, height, width):
                total += weight * abs(d_po[i, j] - d_po[k, l]) ** power
                count += 1
    return total / count


def f_measure_reference(pred, g, beta_squared=0.3):
    pred, g = np.asarray(pred, dtype=np.float64), np.asarray(g) > 0.5
    best = 0.0
    for k in range(256):
        binary = pred > k / 255.0
        tp = float(np.sum(binary & g))
        precision = tp / np.sum(binary) if np.sum(binary) else 0.0
        recall = tp / np.sum(g)
        if precision + recall > 0:
            best = max(best, (1 + beta_squared) * precision * recall / (beta_squared * precision + recall))
    return best


def e_measure_reference(pred, g):
    pred, g = np.asarray(pred, dtype=np.float64), (np.asarray(g) > 0.5).astype(np.float64)
    best = 0.0
    for k in range(256):
        binary = (pred > k / 255.0).astype(np.float64)
        if g.sum() == 0:
            score = np.mean(1 - binary)
        elif g.sum() == g.size:
            score = np.mean(binary)
        else:
            phi_p, phi_g = binary - binary.mean(), g - g.mean()
            enhanced = 0.0
            for a, b in zip(phi_p.ravel(), phi_g.ravel()):
                enhanced += (2 * a * b / (a * a + b * b + _EPS) + 1) ** 2 / 4
            score = enhanced / g.size
        best = max(best, score)
    return min(best, 1.0)


def _object_reference(values):
    if len(values) == 0:
        return 0.0
    mean = sum(values) / len(values)
    std = math.sqrt(sum((v - mean) ** 2 for v in values) / (len(values) - 1)) if len(values) > 1 else 0.0
    return 2 * mean / (mean ** 2 + 1 + std + _EPS)


def _block_reference(pred, g):
    n = pred.size
    if n == 0:
        return 0.0
    x, y = pred.mean(), g.mean()
    sigma_x = np.sum((pred - x) ** 2) / (n - 1) if n > 1 else 0.0
    sigma_y = np.sum((g - y) ** 2) / (n - 1) if n > 1 else 0.0
    sigma_xy = np.sum((pred - x) * (g - y)) / (n - 1) if n > 1 else 0.0
    alpha = 4 * x * y * sigma_xy
    beta = (x ** 2 + y ** 2) * (sigma_x + sigma_y)
    if alpha != 0:
        return alpha / (beta + _EPS)
    return 1.0 if beta == 0 else 0.0


def s_measure_reference(pred, g, alpha=0.5):
    pred, g = np.asarray(pred, dtype=np.float64), (np.asarray(g) > 0.5).astype(np.float64)
    height, width = g.shape
    ratio = g.mean()
    if ratio == 0:
        return float(np.clip(1 - pred.mean(), 0, 1))
    if ratio == 1:
        return float(np.clip(pred.mean(), 0, 1))
    foreground = [pred[i, j] for i in range(height) for j in range(width) if g[i, j] == 1]
    background = [1 - pred[i, j] for i in range(height) for j in range(width) if g[i, j] == 0]
    object_score = ratio * _object_reference(foreground) + (1 - ratio) * _object_reference(background)
    area = g.sum()
    x = int(np.round(np.sum(g.sum(axis=0) * np.arange(width)) / area)) + 1
    y = int(np.round(np.sum(g.sum(axis=1) * np.arange(height)) / area)) + 1
    x, y = min(x, width), min(y, height)
    total = float(height * width)
    w1, w2, w3 = x * y / total, y * (width - x) / total, (height - y) * x / total
    region_score = (w1 * _block_reference(pred[:y, :x], g[:y, :x])
                    + w2 * _block_reference(pred[:y, x:], g[:y, x:])
                    + w3 * _block_reference(pred[y:, :x], g[y:, :x])
                    + (1 - w1 - w2 - w3) * _block_reference(pred[y:, x:], g[y:, x:]))
    return float(np.clip(alpha * object_score + (1 - alpha) * region_score, 0, 1))


def torch_grid(array, dtype=torch.float64):
    return torch.as_tensor(np.asarray(array), dtype=dtype)
