# -*- coding: utf-8 -*-
"""Object popping network: refines the source-free depth into popped-out depth."""
import torch
import torch.nn as nn
from popnet.config import ModelConfig
from popnet.grids import as_grid_batch, restore_layout
from popnet.networks.blocks import Encoder, Decoder, check_network_inputs
from popnet.exceptions import ValidationError


class PoppingNetwork(nn.Module):
    """Encoder-decoder taking the concatenation of an RGB image and its source-free depth (4 channels) and
    returning the popped-out depth in [0, 1] at the input resolution.

    Parameters
    ----------
    config : ModelConfig
        Encoder family and channel plan.
    """

    def __init__(self, config=ModelConfig()):
        super(PoppingNetwork, self).__init__()
        self.config = config
        channels = config.scaled_channels
        self.encoder = Encoder(4, channels, config.encoder)
        self.decoder = Decoder(channels)
        self.head = nn.Conv2d(channels[0], 1, kernel_size=1)

    def forward(self, rgb: torch.Tensor, d_sf: torch.Tensor) -> torch.Tensor:
        check_network_inputs(rgb, d_sf, "d_sf")
        features = self.encoder(torch.cat([rgb, d_sf.to(rgb.dtype)], dim=1))
        return torch.sigmoid(self.head(self.decoder(features)))


def as_rgb_batch(rgb) -> tuple:
    """Return an image as a ``B x 3 x H x W`` tensor along with a flag telling whether a batch axis was added.
    ``H x W x 3`` images are moved to channel-first layout."""
    tensor = torch.as_tensor(rgb)
    if not torch.is_floating_point(tensor):
        tensor = tensor.to(torch.get_default_dtype())
    if tensor.dim() == 4:
        return tensor, False
    if tensor.dim() == 3 and tensor.shape[0] == 3:
        return tensor[None], True
    if tensor.dim() == 3 and tensor.shape[-1] == 3:
        return tensor.permute(2, 0, 1)[None], True
    raise ValidationError("Cannot interpret an image of shape %s" % str(tuple(tensor.shape)))


def popping_forward(net: PoppingNetwork, rgb, d_sf) -> torch.Tensor:
    """Run the popping network on an image and its source-free depth.

    ``rgb`` is ``H x W x 3``, ``3 x H x W`` or ``B x 3 x H x W``; the popped-out depth is returned with the layout of
    ``d_sf``. The spatial size must be divisible by 32.
    """
    parameter = next(net.parameters())
    rgb_batch, _ = as_rgb_batch(rgb)
    depth_batch, ndim = as_grid_batch(d_sf)
    d_po = net(rgb_batch.to(parameter), depth_batch.to(parameter))
    return restore_layout(d_po, ndim)
