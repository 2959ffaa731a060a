# -*- coding: utf-8 -*-
"""Joint geometric augmentation of scene samples."""
import numpy as np
from scipy import ndimage
from popnet.config import AugmentationPolicy
from popnet.grids import SceneSample
from popnet.readwrite import resize_sample


def _rotate(array, angle, order):
    return ndimage.rotate(array, angle, axes=(1, 0), reshape=False, order=order, mode="nearest")


def flip_sample(sample: SceneSample) -> SceneSample:
    """Mirror every modality of a sample horizontally."""
    return SceneSample(rgb=np.ascontiguousarray(sample.rgb[:, ::-1]),
                       depth=np.ascontiguousarray(sample.depth[:, ::-1]),
                       mask=np.ascontiguousarray(sample.mask[:, ::-1]),
                       surface=None if sample.surface is None else np.ascontiguousarray(sample.surface[:, ::-1]),
                       stem=sample.stem)


def rotate_sample(sample: SceneSample, angle: float) -> SceneSample:
    """Rotate every modality by ``angle`` degrees around the image center, keeping the canvas size and replicating
    border values. Image, depth and surface are interpolated bilinearly; the mask uses nearest neighbors and is
    re-binarized."""
    if angle == 0:
        return sample
    rgb = np.stack([_rotate(sample.rgb[:, :, k], angle, 1) for k in range(3)], axis=2)
    return SceneSample(rgb=np.clip(rgb, 0.0, 1.0),
                       depth=np.clip(_rotate(sample.depth, angle, 1), 0.0, 1.0),
                       mask=(_rotate(sample.mask, angle, 0) > 0.5).astype(sample.mask.dtype),
                       surface=None if sample.surface is None else np.clip(_rotate(sample.surface, angle, 1), 0.0, 1.0),
                       stem=sample.stem)


def clip_sample_border(sample: SceneSample, margins) -> SceneSample:
    """Crop ``(top, bottom, left, right)`` pixels from every modality and resize back to the original size."""
    top, bottom, left, right = (int(m) for m in margins)
    if top == bottom == left == right == 0:
        return sample
    height, width = sample.shape
    window = (slice(top, height - bottom), slice(left, width - right))
    cropped = SceneSample(rgb=np.ascontiguousarray(sample.rgb[window]),
                          depth=np.ascontiguousarray(sample.depth[window]),
                          mask=np.ascontiguousarray(sample.mask[window]),
                          surface=None if sample.surface is None else np.ascontiguousarray(sample.surface[window]),
                          stem=sample.stem)
    return resize_sample(cropped, height, width)


def augment(sample: SceneSample, policy=AugmentationPolicy(), seed=0) -> SceneSample:
    """Apply a random horizontal flip, rotation and border clipping, identically to every modality.

    All random numbers are drawn up front from ``seed``, so a given ``(policy, seed)`` always picks the same
    transform. Masks stay binary.

    Parameters
    ----------
    sample : SceneSample
        Sample to transform, not modified.
    policy : AugmentationPolicy
        Probabilities and ranges of the transforms.
    seed : int
        Seed of the transform.

    Returns
    -------
    SceneSample
        The transformed sample (``sample`` itself when no transform applies).
    """
    rng = np.random.default_rng(seed)
    draws = rng.random(3)
    angle = rng.uniform(-policy.rotation_degrees, policy.rotation_degrees)
    fractions = rng.uniform(0.0, policy.clip_fraction, 4)
    if draws[0] < policy.flip_probability:
        sample = flip_sample(sample)
    if draws[1] < policy.rotation_probability:
        sample = rotate_sample(sample, angle)
    if draws[2] < policy.clip_probability:
        height, width = sample.shape
        sizes = np.array([height, height, width, width])
        sample = clip_sample_border(sample, np.floor(fractions * sizes))
    return sample
