import numpy as np


def get_centered_block_mask():
    """8x8 mask with a centered 2x2 foreground block."""
    mask = np.zeros((8, 8))
    mask[3:5, 3:5] = 1.0
    return mask


def get_horizontal_ramp(size=8, low=0.0, high=1.0):
    """Depth increasing linearly along columns."""
    return np.tile(np.linspace(low, high, size), (size, 1))


def get_planar_depth(size=16, a=0.02, b=-0.01, c=0.4):
    rows, cols = np.mgrid[0:size, 0:size]
    return a * cols + b * rows + c


def get_half_plane_mask(size=8):
    """Left half foreground."""
    mask = np.zeros((size, size))
    mask[:, :size // 2] = 1.0
    return mask


def get_square_mask(size=16, top=4, side=8):
    mask = np.zeros((size, size))
    mask[top:top + side, top:top + side] = 1.0
    return mask
