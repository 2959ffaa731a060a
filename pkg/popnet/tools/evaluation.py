# -*- coding: utf-8 -*-
"""Evaluation of trained checkpoints and single-image inference."""
import logging
import os
import cv2
import numpy as np
import torch
import popnet.settings as settings
from popnet.config import ModelConfig, HyperParams
from popnet.losses import pop_out_separation, hard_separation
from popnet.metrics import MetricsReport, evaluate_pairs, object_counts, add_object_count_split
from popnet.networks import PopNet
from popnet.readwrite import (load_checkpoint, dataset_stems, read_sample, read_rgb, read_depth, write_depth,
                              write_soft_mask, write_mask, read_manifest)
from popnet.utils import resolve_device


logger = logging.getLogger(__name__)


def stored_hyper_params(manifest: dict) -> HyperParams:
    """Return the training hyperparameters recorded in a checkpoint manifest, the defaults when it has none."""
    train_config = manifest.get("train_config") or {}
    return HyperParams(**train_config.get("hyper", {}))


def load_model(ckpt, model_config=None, device=None) -> tuple:
    """Rebuild the network stored in a checkpoint, in evaluation mode, along with the hyperparameters it was trained
    with.

    Parameters
    ----------
    ckpt : str
        Checkpoint path.
    model_config : ModelConfig
        Expected architecture; a different one raises ``ConfigMismatchError``. When None, the stored architecture is
        used. (Default value = None)
    device : str
        Torch device (Default value = None, automatic)

    Returns
    -------
    tuple
        ``(model, manifest, hyper)``
    """
    device = resolve_device(device)
    payload = load_checkpoint(ckpt, model_config, map_location=device)
    manifest = payload["manifest"]
    stored = manifest["model_config"]
    model = PopNet(model_config or ModelConfig(encoder=stored["encoder"], channels=tuple(stored["channels"]),
                                               width=stored["width"]))
    model.load_state_dict(payload["model"])
    return model.to(device).eval(), manifest, stored_hyper_params(manifest)


def _network_size(height: int, width: int) -> tuple:
    factor = settings.DOWNSAMPLING_FACTOR
    return max(factor, int(round(height / factor)) * factor), max(factor, int(round(width / factor)) * factor)


def predict(model: PopNet, rgb: np.ndarray, d_sf: np.ndarray, hyper=HyperParams()) -> dict:
    """Run a model on one ``H x W x 3`` image and its ``H x W`` depth.

    Inputs whose size is not a multiple of 32 are resized to the closest multiple for the forward pass and the
    outputs are resized back.

    Returns
    -------
    dict
        ``H x W`` float32 arrays keyed by ``d_po``, ``d_c``, ``s_tilde``, ``s_s`` (soft separation) and ``hard``
        (binarized separation).
    """
    height, width = d_sf.shape
    net_height, net_width = _network_size(height, width)
    if (net_height, net_width) != (height, width):
        rgb = cv2.resize(rgb, (net_width, net_height), interpolation=cv2.INTER_LINEAR)
        d_sf = cv2.resize(d_sf, (net_width, net_height), interpolation=cv2.INTER_LINEAR)
    parameter = next(model.parameters())
    rgb_batch = torch.from_numpy(np.ascontiguousarray(rgb.transpose(2, 0, 1), dtype=np.float32))[None].to(parameter)
    depth_batch = torch.from_numpy(np.ascontiguousarray(d_sf, dtype=np.float32))[None, None].to(parameter)
    with torch.no_grad():
        output = model(rgb_batch, depth_batch)
        s_s = pop_out_separation(output.d_po, output.d_c, hyper.separation_config())
        maps = {"d_po": output.d_po, "d_c": output.d_c, "s_tilde": output.s_tilde, "s_s": s_s,
                "hard": hard_separation(s_s)}
    maps = {name: value[0, 0].cpu().numpy().astype(np.float32) for name, value in maps.items()}
    if (net_height, net_width) != (height, width):
        for name, value in maps.items():
            interpolation = cv2.INTER_NEAREST if name == "hard" else cv2.INTER_LINEAR
            maps[name] = np.clip(cv2.resize(value, (width, height), interpolation=interpolation), 0.0, 1.0)
    return maps


def evaluate(ckpt, data_dir, model_config=None, hyper=None, hard_separation_metrics=False, identity=False,
             depth_subdir=settings.DEPTHS_DIR, normalize=True, device=None, by_object_count=False) -> MetricsReport:
    """Evaluate a checkpoint on a dataset root.

    The semantic predictions ``S_tilde`` are scored against the masks. With ``hard_separation_metrics``, the
    binarized separation masks are scored too and stored in ``report.alongside["hard_separation"]``. With
    ``identity``, the masks themselves are scored and no network runs (the checkpoint is not read). ``hyper``
    defaults to the hyperparameters stored in the checkpoint. With ``by_object_count``, the semantic report is split
    between single-object and multi-object scenes using the dataset manifest, in ``report.alongside``.
    """
    stems = dataset_stems(data_dir, depth_subdir)
    model = None
    if not identity:
        model, manifest, stored = load_model(ckpt, model_config, device)
        hyper = stored if hyper is None else hyper
        logger.info("Evaluating %s (step %d) on %d samples", str(ckpt), manifest["step"], len(stems))
    semantic_items, separation_items = [], []
    for stem in stems:
        sample = read_sample(data_dir, stem, depth_subdir)
        if identity:
            semantic_items.append((stem, sample.mask, sample.mask))
            separation_items.append((stem, sample.mask, sample.mask))
            continue
        maps = predict(model, sample.rgb, sample.depth, hyper)
        semantic_items.append((stem, maps["s_tilde"], sample.mask))
        separation_items.append((stem, maps["hard"], sample.mask))
    report = evaluate_pairs(semantic_items, normalize)
    if hard_separation_metrics:
        report.alongside["hard_separation"] = evaluate_pairs(separation_items, normalize).to_dict()
    if by_object_count:
        add_object_count_split(report, object_counts(read_manifest(data_dir)))
    return report


def infer(ckpt, image, depth, out_dir, model_config=None, hyper=None, depth_convention=None,
          device=None) -> dict:
    """Run a checkpoint on one image and depth file and write the five output maps as PNG files in ``out_dir``:
    popped-out depth and contact surface (16-bit), semantic and separation masks (8-bit soft) and the binarized
    separation mask. ``hyper`` defaults to the hyperparameters stored in the checkpoint.

    Returns
    -------
    dict
        Written paths keyed by ``d_po``, ``d_c``, ``s_tilde``, ``s_s`` and ``hard``.
    """
    model, _, stored = load_model(ckpt, model_config, device)
    hyper = stored if hyper is None else hyper
    rgb = read_rgb(image)
    d_sf = read_depth(depth, depth_convention)
    if rgb.shape[:2] != d_sf.shape:
        d_sf = np.clip(cv2.resize(d_sf, (rgb.shape[1], rgb.shape[0]), interpolation=cv2.INTER_LINEAR), 0.0, 1.0)
    maps = predict(model, rgb, d_sf, hyper)
    writers = {"d_po": write_depth, "d_c": write_depth, "s_tilde": write_soft_mask, "s_s": write_soft_mask,
               "hard": write_mask}
    paths = {}
    for name, writer in writers.items():
        paths[name] = os.path.join(str(out_dir), settings.INFERENCE_FILE_NAMES[name])
        writer(paths[name], maps[name])
    logger.info("Inference maps written to %s", str(out_dir))
    return paths
