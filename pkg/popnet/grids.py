# -*- coding: utf-8 -*-
"""Grid primitives shared by every popnet module.

Grids are ``torch`` tensors (or anything ``torch.as_tensor`` accepts) with one of the layouts ``H x W``,
``B x H x W`` or ``B x 1 x H x W``. Operations return their result with the layout of their input. Depth maps and
contact surfaces are stored as nearness in ``[0, 1]`` (larger is closer to the camera).
"""
import functools
from dataclasses import dataclass
from collections import namedtuple
import numpy as np
import networkx as nx
import torch
import torch.nn.functional as F
import popnet.settings as settings
from popnet.exceptions import ValidationError, DegenerateInputError


GradientField = namedtuple("GradientField", ["gx", "gy"])


def as_grid_batch(grid, dtype=None) -> tuple:
    """Return ``grid`` as a ``B x 1 x H x W`` floating tensor together with the number of dimensions of the input,
    so that results can be given back with the input layout (see ``restore_layout``)."""
    tensor = torch.as_tensor(grid)
    if dtype is not None:
        tensor = tensor.to(dtype)
    elif not torch.is_floating_point(tensor):
        tensor = tensor.to(torch.get_default_dtype())
    ndim = tensor.dim()
    if ndim == 2:
        return tensor[None, None], ndim
    if ndim == 3:
        return tensor[:, None], ndim
    if ndim == 4 and tensor.shape[1] == 1:
        return tensor, ndim
    raise ValidationError("Grid must have layout HxW, BxHxW or Bx1xHxW, got shape %s" % str(tuple(tensor.shape)))


def restore_layout(batch: torch.Tensor, ndim: int) -> torch.Tensor:
    """Inverse of ``as_grid_batch``."""
    if ndim == 2:
        return batch[0, 0]
    if ndim == 3:
        return batch[:, 0]
    return batch


def check_finite(grid: torch.Tensor, name="grid"):
    if not bool(torch.isfinite(grid).all()):
        raise ValidationError("Non-finite values found in %s" % name)


def check_same_shape(first: torch.Tensor, second: torch.Tensor, names=("first", "second")):
    if tuple(first.shape) != tuple(second.shape):
        raise ValidationError("Shape mismatch between %s %s and %s %s"
                              % (names[0], str(tuple(first.shape)), names[1], str(tuple(second.shape))))


def check_unit_range(grid: torch.Tensor, name="grid"):
    """Check that all values are finite and in [0, 1]."""
    check_finite(grid, name)
    if grid.numel() and (bool((grid < 0).any()) or bool((grid > 1).any())):
        raise ValidationError("Values of %s must lie in [0, 1]" % name)


def check_minimum_size(grid: torch.Tensor, minimum=settings.MIN_GRID_SIZE, name="grid"):
    height, width = grid.shape[-2:]
    if height < minimum or width < minimum:
        raise ValidationError("%s must be at least %dx%d, got %dx%d" % (name, minimum, minimum, height, width))


def check_depth_map(depth, name="depth map"):
    """Validate a nearness map (``DepthMap`` or ``ContactSurface``): finite values in [0, 1]."""
    check_unit_range(torch.as_tensor(depth), name)


def check_soft_mask(mask, name="soft mask"):
    check_unit_range(torch.as_tensor(mask), name)


def check_binary_mask(mask, name="binary mask"):
    """Validate that every entry of ``mask`` is exactly 0 or 1."""
    tensor = torch.as_tensor(mask)
    if tensor.dtype == torch.bool:
        return
    if not bool(((tensor == 0) | (tensor == 1)).all()):
        raise ValidationError("Every entry of %s must be exactly 0 or 1" % name)


def check_rgb_image(image, name="RGB image"):
    """Validate an image with a channel axis of size 3 (``H x W x 3``, ``3 x H x W`` or ``B x 3 x H x W``)."""
    tensor = torch.as_tensor(image)
    if tensor.dim() == 3 and tensor.shape[-1] == 3:
        spatial = tensor.shape[:2]
    elif tensor.dim() in (3, 4) and tensor.shape[-3] == 3:
        spatial = tensor.shape[-2:]
    else:
        raise ValidationError("%s must have 3 channels, got shape %s" % (name, str(tuple(tensor.shape))))
    if min(spatial) < settings.MIN_GRID_SIZE:
        raise ValidationError("%s must be at least %dx%d" % (name, settings.MIN_GRID_SIZE, settings.MIN_GRID_SIZE))
    check_unit_range(tensor, name)


def sobel_gradients(grid) -> GradientField:
    """Return the horizontal and vertical Sobel responses of a grid.

    The classical unnormalized 3x3 kernels are correlated with the grid after replicate padding, so the output has
    the input shape. The operation is linear and differentiable with respect to ``grid``.

    Parameters
    ----------
    grid :
        Real grid with layout ``H x W``, ``B x H x W`` or ``B x 1 x H x W``, ``H, W >= 3``.

    Returns
    -------
    GradientField
        Named tuple ``(gx, gy)`` with the layout of ``grid``.

    Raises
    ------
    ValidationError
        If the grid holds non-finite values or is smaller than 3x3.

    Examples
    --------
    >>> import torch
    >>> import popnet as pn
    >>> ramp = torch.tensor([[0.0, 0.5, 1.0]] * 3)
    >>> float(pn.sobel_gradients(ramp).gx[1, 1])
    4.0
    """
    batch, ndim = as_grid_batch(grid)
    if batch.shape[-1] < 3 or batch.shape[-2] < 3:
        raise ValidationError("Sobel gradients need a grid of at least 3x3")
    check_finite(batch)
    kernels = torch.tensor([settings.SOBEL_KERNEL_X, settings.SOBEL_KERNEL_Y],
                           dtype=batch.dtype, device=batch.device)[:, None]
    padded = F.pad(batch, (1, 1, 1, 1), mode="replicate")
    responses = F.conv2d(padded, kernels)
    return GradientField(restore_layout(responses[:, 0:1], ndim), restore_layout(responses[:, 1:2], ndim))


def boundary_map(mask):
    """Return the semantic boundary of a binary mask: 1 exactly where the squared Sobel gradient magnitude of the mask
    is nonzero, 0 elsewhere.

    See Also
    --------
    sobel_gradients, interior_mask
    """
    batch, ndim = as_grid_batch(mask)
    check_binary_mask(batch)
    gx, gy = sobel_gradients(batch)
    boundary = ((gx ** 2 + gy ** 2) != 0).to(batch.dtype)
    return restore_layout(boundary, ndim)


def interior_mask(mask):
    """Return the pixels of ``mask`` whose full 3x3 stencil lies inside the foreground.

    Pixels on the image border never qualify: outside the image counts as background, so an all-one ``8 x 8`` mask
    has the inner ``6 x 6`` block as interior.
    """
    batch, ndim = as_grid_batch(mask)
    check_binary_mask(batch)
    padded = F.pad(batch, (1, 1, 1, 1), mode="constant", value=0.0)
    eroded = -F.max_pool2d(-padded, kernel_size=3, stride=1)
    return restore_layout(eroded, ndim)


def normalize_depth(raw, convention=settings.NEARNESS) -> np.ndarray:
    """Rescale a raw depth-like array to a nearness map in [0, 1].

    Parameters
    ----------
    raw : array-like
        Finite raw values (any scale).
    convention : str
        ``"nearness"`` when larger raw values are closer to the camera (relative inverse depth, the output of most
        monocular depth models), ``"metric-depth"`` when larger values are farther. (Default value = "nearness")

    Returns
    -------
    np.ndarray
        Min-max rescaled values, flipped for ``"metric-depth"``, so that the result is always nearness and attains both
        0 and 1.

    Raises
    ------
    DegenerateInputError
        If ``raw`` is constant.
    ValidationError
        If ``raw`` holds non-finite values or the convention is unknown.
    """
    if convention not in settings.DEPTH_CONVENTIONS:
        raise ValidationError("Unknown depth convention '%s', expected one of %s"
                              % (str(convention), str(settings.DEPTH_CONVENTIONS)))
    values = np.asarray(raw, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise ValidationError("Non-finite values found in raw depth")
    low, high = values.min(), values.max()
    if not high > low:
        raise DegenerateInputError("Raw depth is constant, it cannot be rescaled")
    nearness = (values - low) / (high - low)
    if convention == settings.METRIC_DEPTH:
        nearness = 1.0 - nearness
    return nearness


@functools.lru_cache(maxsize=16)
def _four_connected_pairs(height: int, width: int) -> np.ndarray:
    grid_graph = nx.grid_2d_graph(height, width)
    edges = np.array([(u[0] * width + u[1], v[0] * width + v[1]) for u, v in grid_graph.edges()],
                     dtype=np.int64).reshape(-1, 2)
    pairs = np.concatenate([edges, edges[:, ::-1]], axis=0)
    pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
    pairs.setflags(write=False)
    return pairs


class Neighborhood:
    """Pixel neighborhood ``N(p)`` on an ``H x W`` grid.

    Pairs are ordered ``(p, q)`` with flat indices ``p = row * W + col``; every pair is listed in both directions and
    no pixel is paired with itself, so the pair list visits each ``p`` and every ``q`` in ``N(p)``. Only the
    four-connected neighborhood is available.
    """

    def __init__(self, kind=settings.FOUR_CONNECTED):
        if kind != settings.FOUR_CONNECTED:
            raise ValidationError("Unknown neighborhood kind '%s'" % str(kind))
        self.kind = kind

    def pairs(self, height: int, width: int) -> np.ndarray:
        """Return a read-only ``P x 2`` array of ordered flat index pairs, sorted lexicographically."""
        return _four_connected_pairs(int(height), int(width))

    def pair_tensor(self, height: int, width: int, device=None) -> torch.Tensor:
        """Return the pairs as a ``2 x P`` long tensor (first row ``p``, second row ``q``)."""
        return torch.as_tensor(np.ascontiguousarray(self.pairs(height, width).T), device=device)

    def __repr__(self):
        return "Neighborhood(kind='%s')" % self.kind


@dataclass
class SceneSample:
    """One RGB-D record: an ``H x W x 3`` image, the ``H x W`` source-free depth, the ``H x W`` binary object mask and,
    for synthetic scenes, the true contact surface. Arrays are ``float32`` numpy arrays with values in [0, 1]."""
    rgb: np.ndarray
    depth: np.ndarray
    mask: np.ndarray
    surface: np.ndarray = None
    stem: str = ""

    @property
    def shape(self) -> tuple:
        return tuple(self.depth.shape)

    def validate(self):
        """Check ranges, binarity and that all modalities share the spatial shape.

        Raises
        ------
        ValidationError
            If an invariant of the record does not hold.
        """
        check_rgb_image(self.rgb, "RGB image of '%s'" % self.stem)
        check_depth_map(self.depth, "depth of '%s'" % self.stem)
        check_binary_mask(self.mask, "mask of '%s'" % self.stem)
        shapes = [tuple(self.rgb.shape[:2]), tuple(self.depth.shape), tuple(self.mask.shape)]
        if self.surface is not None:
            check_depth_map(self.surface, "surface of '%s'" % self.stem)
            shapes.append(tuple(self.surface.shape))
        if len(set(shapes)) != 1 or len(self.rgb.shape) != 3:
            raise ValidationError("Modalities of '%s' have inconsistent shapes %s" % (self.stem, str(shapes)))
        return self
