# -*- coding: utf-8 -*-
"""Supervision of the object popping network: structure preservation, local depth smoothing and depth edge
sharpening, and their weighted combination."""
from dataclasses import dataclass
import math
import torch
import torch.nn.functional as F
from torchmetrics.functional import structural_similarity_index_measure
import popnet.settings as settings
from popnet.exceptions import ValidationError
from popnet.grids import (as_grid_batch, restore_layout, check_same_shape, check_binary_mask, sobel_gradients,
                          boundary_map, interior_mask, Neighborhood)


@dataclass(frozen=True)
class SSIMConfig:
    """Local statistics of the structural similarity index: ``window x window`` mean pooling and the two
    stabilization constants (for data in [0, 1])."""
    window: int = settings.SSIM_WINDOW
    c1: float = settings.SSIM_C1
    c2: float = settings.SSIM_C2

    def __post_init__(self):
        if int(self.window) != self.window or self.window < 3 or self.window % 2 == 0:
            raise ValidationError("SSIM window must be an odd integer >= 3, got %s" % str(self.window))
        if not (self.c1 > 0 and self.c2 > 0):
            raise ValidationError("SSIM constants must be positive")


@dataclass(frozen=True)
class WTVConfig:
    """Edge-aware weights of the weighted total variation.

    ``w0`` is the fraction of boundary pixels of the mask; boundary pixels get ``w0`` and the others ``w0 + gamma``.
    ``power`` is 1 for absolute differences and 2 for the squared form.
    """
    gamma: float = settings.WTV_GAMMA
    w0_mode: str = "boundary-fraction"
    power: int = settings.WTV_POWER

    def __post_init__(self):
        if not self.gamma >= 0:
            raise ValidationError("gamma must be non-negative")
        if self.w0_mode != "boundary-fraction":
            raise ValidationError("Unknown w0 mode '%s'" % str(self.w0_mode))
        if self.power not in (1, 2):
            raise ValidationError("WTV power must be 1 or 2")


@dataclass(frozen=True)
class PopLossWeights:
    lambda1: float = settings.DEFAULT_LAMBDA1
    lambda2: float = settings.DEFAULT_LAMBDA2

    def __post_init__(self):
        for name in ("lambda1", "lambda2"):
            value = getattr(self, name)
            if not (value >= 0 and value != float("inf")):
                raise ValidationError("%s must be finite and non-negative, got %s" % (name, str(value)))


def _paired_grids(first, second, names):
    first_batch, ndim = as_grid_batch(first)
    second_batch, _ = as_grid_batch(second, dtype=first_batch.dtype)
    check_same_shape(first_batch, second_batch, names)
    return first_batch, second_batch.to(first_batch.device), ndim


def ssim_index(a, b, cfg=SSIMConfig()) -> torch.Tensor:
    """Return the per-window structural similarity of two grids.

    Local statistics use a uniform ``cfg.window`` kernel (torchmetrics SSIM map, data range 1). Only the windows
    lying inside the grid are kept, so an ``H x W`` input gives ``(H - window + 1) x (W - window + 1)`` values in
    [-1, 1].

    Raises
    ------
    ValidationError
        On shape mismatch or a grid smaller than the window.
    """
    x, y, ndim = _paired_grids(a, b, ("a", "b"))
    if min(x.shape[-2:]) < cfg.window:
        raise ValidationError("Grids must be at least %dx%d" % (cfg.window, cfg.window))
    # sigma only sets the reflection padding here: (window - 1) / 2 pixels per side
    _, full_map = structural_similarity_index_measure(x, y, gaussian_kernel=False, sigma=(cfg.window - 1) / 7.0,
                                                      kernel_size=cfg.window, data_range=1.0, k1=math.sqrt(cfg.c1),
                                                      k2=math.sqrt(cfg.c2), return_full_image=True, reduction="none")
    height, width = x.shape[-2:]
    top = (full_map.shape[-2] - height + cfg.window - 1) // 2
    left = (full_map.shape[-1] - width + cfg.window - 1) // 2
    valid = full_map[..., top:top + height - cfg.window + 1, left:left + width - cfg.window + 1]
    return restore_layout(valid, ndim)


def structure_loss(d_po, d_sf, cfg=SSIMConfig()) -> torch.Tensor:
    """Structure preserving loss ``L_dep``: mean over windows of ``(1 - SSIM) / 2`` (DSSIM), clamped to [0, 1]."""
    ssim = ssim_index(d_po, d_sf, cfg)
    return torch.clamp((1.0 - ssim) / 2.0, 0.0, 1.0).mean()


def normal_field(d_obj) -> torch.Tensor:
    """Return the unnormalized surface normals ``(-gx, -gy, 1)`` of a depth grid, stacked on a trailing axis of
    size 3."""
    gx, gy = sobel_gradients(d_obj)
    return torch.stack([-gx, -gy, torch.ones_like(gx)], dim=-1)


def local_smoothness_loss(d_po, g, eps=settings.COSINE_EPS, neighborhood=None) -> torch.Tensor:
    """Local depth smoothing loss ``L_loc``.

    The depth is masked by the object mask (``d_obj = d_po * g``) and turned into normals; the loss is the mean of
    ``1 - cos(n(p), n(q))`` over the four-connected pairs whose two pixels lie in ``interior_mask(g)``, where the
    Sobel stencil never sees the artificial cliff created by the masking. Pairs are pooled over the batch.

    Parameters
    ----------
    d_po :
        Popped-out depth.
    g :
        Binary object mask with the shape of ``d_po``.
    eps : float
        Denominator guard of the cosine similarity. (Default value = 1e-8)
    neighborhood : Neighborhood
        Pixel neighborhood (Default value = four-connected)

    Returns
    -------
    torch.Tensor
        Non-negative scalar; 0 when no valid pair exists.

    Raises
    ------
    ValidationError
        If shapes differ, ``g`` is not binary or has no foreground pixel.
    """
    depth, mask, _ = _paired_grids(d_po, g, ("d_po", "g"))
    check_binary_mask(mask, "g")
    if not bool((mask > 0).any()):
        raise ValidationError("The object mask has no foreground pixel")
    neighborhood = neighborhood or Neighborhood()
    batch_size, _, height, width = depth.shape
    normals = normal_field(depth * mask).reshape(batch_size, height * width, 3)
    interior = interior_mask(mask).reshape(batch_size, height * width)
    pairs = neighborhood.pair_tensor(height, width, device=depth.device)
    valid = interior[:, pairs[0]] * interior[:, pairs[1]]
    nb_valid = valid.sum()
    if nb_valid == 0:
        return depth.sum() * 0.0
    cosine = F.cosine_similarity(normals[:, pairs[0]], normals[:, pairs[1]], dim=-1, eps=eps)
    return (torch.clamp(1.0 - cosine, min=0.0) * valid).sum() / nb_valid


def edge_aware_weights(g, cfg=WTVConfig()) -> torch.Tensor:
    """Return the per-pixel weights ``w(p)`` of the weighted total variation: ``w0`` on the boundary of ``g`` and
    ``w0 + gamma`` elsewhere, with ``w0`` the number of boundary pixels divided by the image size (0 when the mask
    has no boundary)."""
    mask, ndim = as_grid_batch(g)
    boundary = boundary_map(mask)
    height, width = mask.shape[-2:]
    w0 = boundary.sum(dim=(1, 2, 3), keepdim=True) / float(height * width)
    return restore_layout(w0 + cfg.gamma * (1.0 - boundary), ndim)


def wtv_loss(d_po, g, cfg=WTVConfig(), neighborhood=None) -> torch.Tensor:
    """Depth edge sharpening loss ``L_wtv``: mean over the ordered four-connected pairs ``(p, q)`` of
    ``w(p) * |d_po(p) - d_po(q)|`` (squared difference when ``cfg.power`` is 2).

    See Also
    --------
    edge_aware_weights
    """
    depth, mask, _ = _paired_grids(d_po, g, ("d_po", "g"))
    check_binary_mask(mask, "g")
    neighborhood = neighborhood or Neighborhood()
    batch_size, _, height, width = depth.shape
    weights = edge_aware_weights(mask, cfg).reshape(batch_size, height * width)
    flat = depth.reshape(batch_size, height * width)
    pairs = neighborhood.pair_tensor(height, width, device=depth.device)
    differences = flat[:, pairs[0]] - flat[:, pairs[1]]
    if cfg.power == 2:
        penalties = differences ** 2
    else:
        penalties = torch.abs(differences)
    return (weights[:, pairs[0]] * penalties).mean()


def pop_loss_components(d_po, d_sf, g, ssim_cfg=SSIMConfig(), wtv_cfg=WTVConfig()) -> dict:
    """Return the three popping losses as a dictionary with keys ``"dep"``, ``"loc"`` and ``"wtv"``."""
    return {"dep": structure_loss(d_po, d_sf, ssim_cfg),
            "loc": local_smoothness_loss(d_po, g),
            "wtv": wtv_loss(d_po, g, wtv_cfg)}


def pop_loss(d_po, d_sf, g, weights=PopLossWeights(), ssim_cfg=SSIMConfig(), wtv_cfg=WTVConfig()) -> torch.Tensor:
    """Total popping loss ``L_pop = L_dep + lambda1 * L_loc + lambda2 * L_wtv``."""
    components = pop_loss_components(d_po, d_sf, g, ssim_cfg, wtv_cfg)
    return components["dep"] + weights.lambda1 * components["loc"] + weights.lambda2 * components["wtv"]
