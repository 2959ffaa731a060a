# -*- coding: utf-8 -*-
"""Semantic supervision and the joint training objective."""
from dataclasses import dataclass
import math
import torch
import popnet.settings as settings
from popnet.exceptions import ValidationError, NumericError
from popnet.grids import as_grid_batch, check_same_shape
from popnet.losses.separation import binary_cross_entropy


@dataclass(frozen=True)
class TotalLossWeights:
    alpha1: float = settings.DEFAULT_ALPHA1
    alpha2: float = settings.DEFAULT_ALPHA2

    def __post_init__(self):
        for name in ("alpha1", "alpha2"):
            value = getattr(self, name)
            if not (value >= 0 and math.isfinite(value)):
                raise ValidationError("%s must be finite and non-negative, got %s" % (name, str(value)))


def soft_iou(s, g) -> torch.Tensor:
    """Soft intersection over union ``sum(s * g) / sum(s + g - s * g)``, averaged over the batch."""
    s_batch, _ = as_grid_batch(s)
    g_batch, _ = as_grid_batch(g, dtype=s_batch.dtype)
    check_same_shape(s_batch, g_batch, ("s", "g"))
    g_batch = g_batch.to(s_batch.device)
    intersection = (s_batch * g_batch).sum(dim=(1, 2, 3))
    union = (s_batch + g_batch).sum(dim=(1, 2, 3)) - intersection
    return (intersection / union).mean()


def semantic_loss(s_tilde, g, eps=settings.BCE_EPS) -> torch.Tensor:
    """Semantic loss ``L_sem = BCE(S_tilde, G) + (1 - softIoU(S_tilde, G))``.

    Probabilities are clamped to ``[eps, 1 - eps]`` for both terms, which also keeps the soft union positive.

    Examples
    --------
    >>> import torch
    >>> import popnet as pn
    >>> g = torch.zeros(8, 8)
    >>> g[:, :4] = 1.0
    >>> round(float(pn.semantic_loss(torch.full((8, 8), 0.5), g)), 4)
    1.3598
    """
    s_tilde = torch.as_tensor(s_tilde)
    if not torch.is_floating_point(s_tilde):
        s_tilde = s_tilde.to(torch.get_default_dtype())
    clamped = torch.clamp(s_tilde, eps, 1.0 - eps)
    return binary_cross_entropy(clamped, g, eps) + torch.clamp(1.0 - soft_iou(clamped, g), min=0.0)


def total_loss(l_pop, l_sep, l_sem, weights=TotalLossWeights()) -> torch.Tensor:
    """Joint objective ``L = L_pop + alpha1 * L_sep + alpha2 * L_sem``.

    Raises
    ------
    ValidationError
        If a component is negative.
    NumericError
        If a component is not finite.
    """
    components = {"pop": l_pop, "sep": l_sep, "sem": l_sem}
    for name, value in components.items():
        scalar = float(torch.as_tensor(value).detach())
        if not math.isfinite(scalar):
            raise NumericError("Loss component '%s' is not finite (%s)" % (name, str(scalar)))
        if scalar < 0:
            raise ValidationError("Loss component '%s' is negative (%s)" % (name, str(scalar)))
    return l_pop + weights.alpha1 * l_sep + weights.alpha2 * l_sem
