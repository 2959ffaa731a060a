# -*- coding: utf-8 -*-
import hashlib
import json
import os
import random
import numpy as np
import torch
import popnet.settings as settings


def seed_everything(seed: int):
    """Seed python, numpy and torch random generators and ask torch for deterministic kernels."""
    random.seed(seed)
    np.random.seed(seed % (2 ** 32))
    torch.manual_seed(seed)
    torch.use_deterministic_algorithms(True, warn_only=True)


def derive_seed(*values) -> int:
    """Return a 32-bit seed mixing the given integers. Used to give every (epoch, sample) pair its own stream."""
    sequence = np.random.SeedSequence([int(v) % (2 ** 32) for v in values])
    return int(sequence.generate_state(1, dtype=np.uint32)[0])


def resolve_seed(seed: int) -> int:
    """Apply the ``POPNET_SEED`` environment override to a configured seed."""
    override = os.environ.get(settings.SEED_ENVIRONMENT_VARIABLE)
    if override is None or override.strip() == "":
        return seed
    return int(override)


def resolve_device(device=None) -> torch.device:
    if device is None or device == "auto":
        return torch.device("cuda" if torch.cuda.is_available() else "cpu")
    return torch.device(device)


def state_dict_hash(state_dict: dict) -> str:
    """SHA-256 of the tensors of a state dict, keys visited in sorted order."""
    digest = hashlib.sha256()
    for key in sorted(state_dict.keys()):
        value = state_dict[key]
        digest.update(key.encode("utf-8"))
        if isinstance(value, torch.Tensor):
            array = value.detach().cpu().contiguous().numpy()
            digest.update(str(array.dtype).encode("utf-8"))
            digest.update(str(array.shape).encode("utf-8"))
            digest.update(array.tobytes())
        else:
            digest.update(repr(value).encode("utf-8"))
    return digest.hexdigest()


def json_hash(obj) -> str:
    """SHA-256 of the canonical JSON form of ``obj``."""
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def file_checksum(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def count_parameters(module: torch.nn.Module, trainable_only=True) -> int:
    """Return the number of (trainable) scalar parameters of a module."""
    return sum(p.numel() for p in module.parameters() if p.requires_grad or not trainable_only)
