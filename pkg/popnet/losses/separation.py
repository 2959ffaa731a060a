# -*- coding: utf-8 -*-
"""Pop-out prior: soft separation of the popped-out depth against the learned contact surface."""
from dataclasses import dataclass
import math
import torch
import popnet.settings as settings
from popnet.exceptions import ValidationError


@dataclass(frozen=True)
class SeparationConfig:
    """``sigma`` is the slope of the soft separation sigmoid and ``eps`` the clamp applied to probabilities before
    taking logarithms in the binary cross-entropy."""
    sigma: float = settings.SEPARATION_SIGMA
    eps: float = settings.BCE_EPS

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValidationError("sigma must be positive and finite, got %s" % str(self.sigma))
        if not 0 < self.eps < 0.5:
            raise ValidationError("eps must lie in (0, 0.5), got %s" % str(self.eps))


def _as_tensor_pair(first, second, names):
    first = torch.as_tensor(first)
    if not torch.is_floating_point(first):
        first = first.to(torch.get_default_dtype())
    second = torch.as_tensor(second, dtype=first.dtype, device=first.device)
    if tuple(first.shape) != tuple(second.shape):
        raise ValidationError("Shape mismatch between %s %s and %s %s"
                              % (names[0], str(tuple(first.shape)), names[1], str(tuple(second.shape))))
    return first, second


def binary_cross_entropy(s, g, eps=settings.BCE_EPS) -> torch.Tensor:
    """Mean binary cross-entropy of probabilities ``s`` against targets ``g``, with ``s`` clamped to
    ``[eps, 1 - eps]``."""
    s, g = _as_tensor_pair(s, g, ("s", "g"))
    s = torch.clamp(s, eps, 1.0 - eps)
    return -(g * torch.log(s) + (1.0 - g) * torch.log(1.0 - s)).mean()


def pop_out_separation(d_po, d_c, cfg=SeparationConfig()) -> torch.Tensor:
    """Soft separation mask ``S_s = sigmoid(sigma * (d_po - d_c))``.

    Pixels popped out above the contact surface tend to 1, pixels below it to 0 and pixels on it get 0.5. The map
    is differentiable with respect to both inputs.

    Examples
    --------
    >>> import torch
    >>> import popnet as pn
    >>> float(pn.pop_out_separation(torch.full((4, 4), 0.3), torch.full((4, 4), 0.3))[0, 0])
    0.5
    """
    d_po, d_c = _as_tensor_pair(d_po, d_c, ("d_po", "d_c"))
    return torch.sigmoid(cfg.sigma * (d_po - d_c))


def separation_loss(s_s, g, cfg=SeparationConfig()) -> torch.Tensor:
    """Separation loss ``L_sep``: binary cross-entropy of the soft separation mask against the object mask."""
    return binary_cross_entropy(s_s, g, cfg.eps)


def hard_separation(s_s, threshold=settings.BINARIZATION_THRESHOLD) -> torch.Tensor:
    """Binarize a separation mask with a strict ``>`` comparison, so a value equal to the threshold maps to 0.

    Raises
    ------
    ValidationError
        If ``threshold`` is not in the open interval (0, 1).
    """
    if not 0 < threshold < 1:
        raise ValidationError("Threshold must lie in (0, 1), got %s" % str(threshold))
    s_s = torch.as_tensor(s_s)
    dtype = s_s.dtype if torch.is_floating_point(s_s) else torch.get_default_dtype()
    return (s_s > threshold).to(dtype)
