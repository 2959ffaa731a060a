# -*- coding: utf-8 -*-
"""PNG, dataset layout, manifest and checkpoint input/output.

A dataset root holds ``images/`` (8-bit RGB), ``depths/`` (16-bit gray source-free nearness), ``masks/`` (8-bit
gray), optionally ``gt_depths/`` and ``surfaces/`` (16-bit gray) and a ``manifest.json``; files of one sample share
their stem in every subdirectory.
"""
import json
import logging
import os
import cv2
import numpy as np
import torch
import popnet.settings as settings
from popnet.exceptions import DataError, ConfigMismatchError
from popnet.config import config_hash
from popnet.grids import SceneSample, normalize_depth
from popnet.utils import state_dict_hash


logger = logging.getLogger(__name__)


def _read_unchanged(path) -> np.ndarray:
    image = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if image is None:
        raise DataError("Cannot read image file '%s'" % str(path))
    return image


def _write(path, image: np.ndarray):
    os.makedirs(os.path.dirname(os.path.abspath(str(path))), exist_ok=True)
    if not cv2.imwrite(str(path), image):
        raise DataError("Cannot write image file '%s'" % str(path))


def _to_unit(image: np.ndarray) -> np.ndarray:
    if image.dtype == np.uint8:
        return image.astype(np.float32) / settings.RGB_SCALE
    if image.dtype == np.uint16:
        return image.astype(np.float32) / settings.DEPTH_SCALE
    return image.astype(np.float32)


def _single_channel(image: np.ndarray) -> np.ndarray:
    if image.ndim == 3:
        return image[:, :, 0]
    return image


def read_rgb(path) -> np.ndarray:
    """Read an 8 or 16-bit image as an ``H x W x 3`` float32 RGB array in [0, 1]. Gray images are replicated on the
    three channels and alpha channels are dropped."""
    image = _read_unchanged(path)
    if image.ndim == 2:
        image = np.repeat(image[:, :, None], 3, axis=2)
    elif image.shape[2] == 4:
        image = image[:, :, :3]
    return np.ascontiguousarray(_to_unit(image[:, :, ::-1]))


def read_depth(path, convention=None) -> np.ndarray:
    """Read a depth map as an ``H x W`` float32 nearness array.

    Parameters
    ----------
    path : str
        Image file, usually a 16-bit gray PNG.
    convention : str
        When None, the stored values are taken as nearness already scaled to the integer range. Otherwise the raw
        values are min-max rescaled with ``normalize_depth`` under that convention (``"nearness"`` or
        ``"metric-depth"``). (Default value = None)

    Returns
    -------
    np.ndarray
        Nearness in [0, 1].

    See Also
    --------
    popnet.normalize_depth
    """
    image = _single_channel(_read_unchanged(path))
    if convention is not None:
        return normalize_depth(image, convention).astype(np.float32)
    if image.dtype not in (np.uint8, np.uint16):
        raise DataError("Depth file '%s' stores %s values, a depth convention is needed" % (str(path), image.dtype))
    return _to_unit(image)


def read_mask(path) -> np.ndarray:
    """Read a gray mask and binarize it at half of the integer range (``> 127`` for 8-bit files)."""
    image = _single_channel(_read_unchanged(path))
    limit = np.iinfo(image.dtype).max // 2 if np.issubdtype(image.dtype, np.integer) else 0.5
    return (image > limit).astype(np.float32)


def read_soft_mask(path) -> np.ndarray:
    return _to_unit(_single_channel(_read_unchanged(path)))


def write_rgb(path, rgb):
    rgb = np.clip(np.asarray(rgb, dtype=np.float64), 0.0, 1.0)
    image = np.round(rgb * settings.RGB_SCALE).astype(np.uint8)
    _write(path, np.ascontiguousarray(image[:, :, ::-1]))


def write_depth(path, depth):
    """Write a nearness map as a 16-bit gray PNG (quantization step 1 / 65535)."""
    depth = np.clip(np.asarray(depth, dtype=np.float64), 0.0, 1.0)
    _write(path, np.round(depth * settings.DEPTH_SCALE).astype(np.uint16))


def write_mask(path, mask):
    _write(path, np.where(np.asarray(mask) > 0.5, 255, 0).astype(np.uint8))


def write_soft_mask(path, soft_mask):
    soft_mask = np.clip(np.asarray(soft_mask, dtype=np.float64), 0.0, 1.0)
    _write(path, np.round(soft_mask * settings.RGB_SCALE).astype(np.uint8))


def list_stems(directory) -> list:
    """Return the sorted stems of the PNG files of a directory.

    Raises
    ------
    DataError
        If the directory does not exist.
    """
    if not os.path.isdir(str(directory)):
        raise DataError("Directory '%s' does not exist" % str(directory))
    return sorted(os.path.splitext(name)[0] for name in os.listdir(str(directory))
                  if name.lower().endswith(settings.IMAGE_EXTENSION))


def sample_path(root, subdir, stem) -> str:
    return os.path.join(str(root), subdir, stem + settings.IMAGE_EXTENSION)


def dataset_stems(root, depth_subdir=settings.DEPTHS_DIR) -> list:
    """Check the layout of a dataset root and return the sorted stems of its samples.

    Every stem found in one of ``images/``, ``<depth_subdir>/`` or ``masks/`` must be present in the three of them.

    Raises
    ------
    DataError
        Listing the stems with a missing modality, or when the dataset is empty.
    """
    subdirs = (settings.IMAGES_DIR, depth_subdir, settings.MASKS_DIR)
    stems_per_subdir = {}
    for subdir in subdirs:
        path = os.path.join(str(root), subdir)
        stems_per_subdir[subdir] = set(list_stems(path)) if os.path.isdir(path) else set()
    all_stems = set.union(*stems_per_subdir.values())
    missing = {}
    for stem in sorted(all_stems):
        absent = [subdir for subdir in subdirs if stem not in stems_per_subdir[subdir]]
        if absent:
            missing[stem] = absent
    if missing:
        details = ", ".join("%s (missing %s)" % (stem, "/".join(absent)) for stem, absent in missing.items())
        raise DataError("Incomplete samples in '%s': %s" % (str(root), details))
    if not all_stems:
        raise DataError("No sample found in '%s'" % str(root))
    return sorted(all_stems)


def read_sample(root, stem, depth_subdir=settings.DEPTHS_DIR, depth_convention=None) -> SceneSample:
    """Read one sample of a dataset root, with its contact surface when ``surfaces/`` holds it."""
    surface_path = sample_path(root, settings.SURFACES_DIR, stem)
    surface = read_depth(surface_path) if os.path.isfile(surface_path) else None
    return SceneSample(rgb=read_rgb(sample_path(root, settings.IMAGES_DIR, stem)),
                       depth=read_depth(sample_path(root, depth_subdir, stem), depth_convention),
                       mask=read_mask(sample_path(root, settings.MASKS_DIR, stem)),
                       surface=surface,
                       stem=stem)


def resize_sample(sample: SceneSample, height: int, width: int) -> SceneSample:
    """Resize every modality: bilinear for image, depth and surface, nearest for the mask."""
    if sample.shape == (height, width):
        return sample

    def linear(array):
        return np.clip(cv2.resize(array, (width, height), interpolation=cv2.INTER_LINEAR), 0.0, 1.0)

    mask = cv2.resize(sample.mask, (width, height), interpolation=cv2.INTER_NEAREST)
    return SceneSample(rgb=linear(sample.rgb), depth=linear(sample.depth), mask=(mask > 0.5).astype(np.float32),
                       surface=None if sample.surface is None else linear(sample.surface), stem=sample.stem)


def write_sample(root, sample: SceneSample, gt_depth=None) -> dict:
    """Write a sample under a dataset root and return the written paths keyed by subdirectory."""
    paths = {settings.IMAGES_DIR: sample_path(root, settings.IMAGES_DIR, sample.stem),
             settings.DEPTHS_DIR: sample_path(root, settings.DEPTHS_DIR, sample.stem),
             settings.MASKS_DIR: sample_path(root, settings.MASKS_DIR, sample.stem)}
    write_rgb(paths[settings.IMAGES_DIR], sample.rgb)
    write_depth(paths[settings.DEPTHS_DIR], sample.depth)
    write_mask(paths[settings.MASKS_DIR], sample.mask)
    if gt_depth is not None:
        paths[settings.GT_DEPTHS_DIR] = sample_path(root, settings.GT_DEPTHS_DIR, sample.stem)
        write_depth(paths[settings.GT_DEPTHS_DIR], gt_depth)
    if sample.surface is not None:
        paths[settings.SURFACES_DIR] = sample_path(root, settings.SURFACES_DIR, sample.stem)
        write_depth(paths[settings.SURFACES_DIR], sample.surface)
    return paths


def write_json(obj, path):
    os.makedirs(os.path.dirname(os.path.abspath(str(path))), exist_ok=True)
    with open(str(path), "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def read_json(path):
    try:
        with open(str(path), "r") as f:
            return json.load(f)
    except (OSError, ValueError) as e:
        raise DataError("Cannot read JSON file '%s': %s" % (str(path), str(e)))


def read_manifest(root) -> dict:
    return read_json(os.path.join(str(root), settings.MANIFEST_FILE_NAME))


def save_checkpoint(path, model, optimizer=None, scheduler=None, step=0, epoch=0, seed=0, train_config=None):
    """Write a versioned checkpoint: model, optimizer and scheduler states plus a manifest holding the format
    version, the architecture configuration and its hash, the step and epoch counters and the seed.

    The payload is written to a temporary file that is then moved onto ``path``.
    """
    state = model.state_dict()
    manifest = {"format_version": settings.CHECKPOINT_FORMAT_VERSION,
                "config_hash": config_hash(model.config),
                "model_config": model.config.to_dict(),
                "step": int(step),
                "epoch": int(epoch),
                "seed": int(seed),
                "parameters_hash": state_dict_hash(state),
                "train_config": train_config.to_dict() if train_config is not None else None}
    payload = {"manifest": manifest,
               "model": state,
               "optimizer": optimizer.state_dict() if optimizer is not None else None,
               "scheduler": scheduler.state_dict() if scheduler is not None else None}
    path = str(path)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    temporary_path = path + ".tmp"
    torch.save(payload, temporary_path)
    os.replace(temporary_path, path)
    logger.debug("Checkpoint written to %s (step %d)", path, step)
    return manifest


def load_checkpoint(path, model_config=None, map_location="cpu") -> dict:
    """Load a checkpoint payload written by ``save_checkpoint``.

    Raises
    ------
    DataError
        If the file cannot be read.
    ConfigMismatchError
        If the format version is unknown or ``model_config`` hashes differently from the stored configuration.
    """
    if not os.path.isfile(str(path)):
        raise DataError("Checkpoint '%s' does not exist" % str(path))
    try:
        payload = torch.load(str(path), map_location=map_location, weights_only=True)
    except Exception as e:
        raise DataError("Cannot read checkpoint '%s': %s" % (str(path), str(e)))
    manifest = payload.get("manifest", {}) if isinstance(payload, dict) else {}
    if manifest.get("format_version") != settings.CHECKPOINT_FORMAT_VERSION:
        raise ConfigMismatchError("Checkpoint '%s' has format version %s, expected %d"
                                  % (str(path), str(manifest.get("format_version")),
                                     settings.CHECKPOINT_FORMAT_VERSION))
    if model_config is not None and config_hash(model_config) != manifest["config_hash"]:
        raise ConfigMismatchError("Checkpoint '%s' was trained with model configuration %s, not %s"
                                  % (str(path), str(manifest["model_config"]), str(model_config.to_dict())))
    return payload


def checkpoint_hash(path) -> str:
    """SHA-256 of the model parameters stored in a checkpoint."""
    return state_dict_hash(load_checkpoint(path)["model"])
