# -*- coding: utf-8 -*-
"""End-to-end training of the popping and segmentation networks."""
import json
import logging
import math
import os
import numpy as np
import torch
from torch.utils.data import Dataset, DataLoader
from tqdm import tqdm
import popnet.settings as settings
from popnet.config import TrainConfig, HyperParams, LossSwitches
from popnet.exceptions import NumericError, ValidationError
from popnet.losses import (structure_loss, local_smoothness_loss, wtv_loss, pop_out_separation, separation_loss,
                           semantic_loss, total_loss)
from popnet.networks import PopNet
from popnet.readwrite import dataset_stems, read_sample, resize_sample, save_checkpoint, load_checkpoint
from popnet.tools.augment import augment
from popnet.utils import seed_everything, derive_seed, resolve_device


logger = logging.getLogger(__name__)

LOG_FIELDS = ("step", "epoch", "lr", "dep", "loc", "wtv", "pop", "sep", "sem", "total")


class SceneFolder(Dataset):
    """Samples of a dataset root as tensors, resized to ``resolution`` and augmented.

    Each item is a dictionary with ``rgb`` (``3 x H x W``), ``depth`` and ``mask`` (``1 x H x W``) float32 tensors,
    the sample ``stem`` and its ``index``. The augmentation of item ``i`` during epoch ``e`` is seeded with
    ``(seed, e, i)``, so it does not depend on loading order or worker count.
    """

    def __init__(self, root, stems=None, resolution=None, depth_subdir=settings.DEPTHS_DIR, policy=None, seed=0):
        self.root = str(root)
        self.stems = list(stems) if stems is not None else dataset_stems(root, depth_subdir)
        self.resolution = resolution
        self.depth_subdir = depth_subdir
        self.policy = policy
        self.seed = seed
        self.epoch = 0

    def set_epoch(self, epoch: int):
        self.epoch = int(epoch)

    def __len__(self):
        return len(self.stems)

    def load_sample(self, index: int):
        sample = read_sample(self.root, self.stems[index], self.depth_subdir)
        if self.resolution is not None:
            sample = resize_sample(sample, self.resolution, self.resolution)
        return sample

    def __getitem__(self, index: int) -> dict:
        sample = self.load_sample(index)
        if self.policy is not None:
            sample = augment(sample, self.policy, derive_seed(self.seed, self.epoch, index))
        return {"rgb": torch.from_numpy(np.ascontiguousarray(sample.rgb.transpose(2, 0, 1), dtype=np.float32)),
                "depth": torch.from_numpy(np.ascontiguousarray(sample.depth[None], dtype=np.float32)),
                "mask": torch.from_numpy(np.ascontiguousarray(sample.mask[None], dtype=np.float32)),
                "stem": sample.stem,
                "index": index}


def compute_losses(output, mask: torch.Tensor, d_sf: torch.Tensor, hyper=HyperParams(),
                   switches=LossSwitches()) -> dict:
    """Compute every loss term of a batch.

    Disabled terms are zero tensors. The local smoothing term is also zero for a batch without any foreground
    pixel.

    Returns
    -------
    dict
        Scalar tensors keyed by ``dep``, ``loc``, ``wtv``, ``pop``, ``sep``, ``sem`` and ``total``.
    """
    zero = output.d_po.sum() * 0.0
    losses = {"dep": structure_loss(output.d_po, d_sf, hyper.ssim_config()) if switches.dep else zero,
              "wtv": wtv_loss(output.d_po, mask, hyper.wtv_config()) if switches.wtv else zero}
    if switches.loc and bool((mask > 0).any()):
        losses["loc"] = local_smoothness_loss(output.d_po, mask)
    else:
        losses["loc"] = zero
    losses["pop"] = losses["dep"] + hyper.lambda1 * losses["loc"] + hyper.lambda2 * losses["wtv"]
    if switches.sep:
        s_s = pop_out_separation(output.d_po, output.d_c, hyper.separation_config())
        losses["sep"] = separation_loss(s_s, mask, hyper.separation_config())
    else:
        losses["sep"] = zero
    losses["sem"] = semantic_loss(output.s_tilde, mask, hyper.bce_eps)
    losses["total"] = total_loss(losses["pop"], losses["sep"], losses["sem"], hyper.total_weights())
    return losses


def epoch_permutation(seed: int, epoch: int, nb_samples: int) -> list:
    """Sample order of an epoch, a function of ``(seed, epoch)`` only."""
    generator = torch.Generator().manual_seed(derive_seed(seed, epoch))
    return torch.randperm(nb_samples, generator=generator).tolist()


def select_stems(stems: list, fraction: float, seed: int) -> list:
    """Seeded subset holding ``ceil(fraction * len(stems))`` of the stems, in sorted order."""
    if fraction >= 1:
        return list(stems)
    nb_kept = max(1, int(math.ceil(fraction * len(stems))))
    rng = np.random.default_rng(derive_seed(seed, len(stems)))
    return sorted(stems[i] for i in rng.choice(len(stems), size=nb_kept, replace=False))


def _dump_batch(path, step, epoch, stems, losses, reason) -> str:
    dump_path = os.path.splitext(str(path))[0] + "_nan_step%d.json" % step
    dump = {"step": step, "epoch": epoch, "stems": list(stems), "reason": reason,
            "losses": {k: float(v.detach()) for k, v in losses.items()}}
    with open(dump_path, "w") as f:
        json.dump(dump, f, indent=2, sort_keys=True)
    return dump_path


def _step_checkpoint_path(out_ckpt, step: int) -> str:
    stem, extension = os.path.splitext(str(out_ckpt))
    return "%s_step%d%s" % (stem, step, extension or settings.CHECKPOINT_EXTENSION)


def train(config: TrainConfig, data_dir, out_ckpt, resume=None, log_path=None, progress=False) -> list:
    """Train a ``PopNet`` on a dataset root and write its checkpoint.

    Each epoch visits the samples in a seeded order; a step optimizes the total loss of one batch with Adam, and the
    learning rate is divided by ``1 / lr_gamma`` every ``lr_step_epochs`` epochs. Every step appends a JSON line to
    the log (``<out_ckpt stem>.jsonl`` by default) with the step, epoch, learning rate and all loss terms. With a
    single worker, a run is a deterministic function of the configuration, and a run resumed from one of its
    checkpoints follows the uninterrupted run exactly.

    Parameters
    ----------
    config : TrainConfig
        Training configuration.
    data_dir : str
        Dataset root.
    out_ckpt : str
        Path of the final checkpoint; intermediate checkpoints get a ``_step<k>`` suffix.
    resume : str
        Checkpoint to resume from. (Default value = None)
    log_path : str
        JSON-lines log path. (Default value = None)
    progress : bool
        Display a progress bar. (Default value = False)

    Returns
    -------
    list
        The log entries written by this call.

    Raises
    ------
    DataError
        If a sample misses a modality.
    NumericError
        If the network output or a loss is not finite; a JSON dump naming the batch stems is written first.
    """
    device = resolve_device(config.device)
    seed_everything(config.seed)
    stems = select_stems(dataset_stems(data_dir, config.depth_subdir), config.train_fraction, config.seed)
    dataset = SceneFolder(data_dir, stems, config.resolution, config.depth_subdir, config.augment, config.seed)
    model = PopNet(config.model).to(device)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate, weight_decay=config.weight_decay)
    scheduler = torch.optim.lr_scheduler.StepLR(optimizer, step_size=config.lr_step_epochs, gamma=config.lr_gamma)
    step = 0
    if resume is not None:
        payload = load_checkpoint(resume, config.model, map_location=device)
        model.load_state_dict(payload["model"])
        if payload["optimizer"] is not None:
            optimizer.load_state_dict(payload["optimizer"])
        if payload["scheduler"] is not None:
            scheduler.load_state_dict(payload["scheduler"])
        step = payload["manifest"]["step"]
        logger.info("Resuming from %s at step %d", str(resume), step)
    steps_per_epoch = int(math.ceil(len(dataset) / float(config.batch_size)))
    total_steps = config.epochs * steps_per_epoch
    if config.max_steps is not None:
        total_steps = min(total_steps, config.max_steps)
    log_path = log_path or os.path.splitext(str(out_ckpt))[0] + ".jsonl"
    os.makedirs(os.path.dirname(os.path.abspath(str(out_ckpt))), exist_ok=True)
    logger.info("Training on %d samples for %d steps (%d per epoch), losses enabled: %s",
                len(dataset), total_steps, steps_per_epoch, ", ".join(config.losses.enabled() + ["sem"]))
    entries = []
    model.train()
    with open(log_path, "a" if resume is not None else "w") as log_file, \
            tqdm(total=total_steps, initial=step, disable=not progress) as bar:
        while step < total_steps:
            epoch, offset = divmod(step, steps_per_epoch)
            dataset.set_epoch(epoch)
            indices = epoch_permutation(config.seed, epoch, len(dataset))[offset * config.batch_size:]
            loader = DataLoader(dataset, batch_size=config.batch_size, sampler=indices, num_workers=config.workers)
            for batch in loader:
                rgb, d_sf, mask = batch["rgb"].to(device), batch["depth"].to(device), batch["mask"].to(device)
                output = model(rgb, d_sf)
                if not all(bool(torch.isfinite(t).all()) for t in output):
                    dump_path = _dump_batch(out_ckpt, step, epoch, batch["stem"], {}, "non-finite network output")
                    raise NumericError("Non-finite network output at step %d, batch %s (dump: %s)"
                                       % (step, str(list(batch["stem"])), dump_path), batch["stem"], dump_path)
                try:
                    losses = compute_losses(output, mask, d_sf, config.hyper, config.losses)
                except (NumericError, ValidationError) as e:
                    dump_path = _dump_batch(out_ckpt, step, epoch, batch["stem"], {}, str(e))
                    raise NumericError("Invalid loss at step %d, batch %s: %s (dump: %s)"
                                       % (step, str(list(batch["stem"])), str(e), dump_path), batch["stem"], dump_path)
                optimizer.zero_grad()
                losses["total"].backward()
                optimizer.step()
                step += 1
                entry = {"step": step, "epoch": epoch, "lr": optimizer.param_groups[0]["lr"]}
                entry.update({name: float(losses[name].detach()) for name in LOG_FIELDS[3:]})
                log_file.write(json.dumps(entry, sort_keys=True) + "\n")
                log_file.flush()
                entries.append(entry)
                bar.update(1)
                bar.set_postfix(total="%.4f" % entry["total"])
                if step % steps_per_epoch == 0:
                    scheduler.step()
                if config.checkpoint_every and step % config.checkpoint_every == 0 and step < total_steps:
                    save_checkpoint(_step_checkpoint_path(out_ckpt, step), model, optimizer, scheduler, step,
                                    step // steps_per_epoch, config.seed, config)
                if step >= total_steps:
                    break
    save_checkpoint(out_ckpt, model, optimizer, scheduler, step, step // steps_per_epoch, config.seed, config)
    logger.info("Training finished at step %d, checkpoint written to %s", step, str(out_ckpt))
    return entries
