# -*- coding: utf-8 -*-
"""Three-stream segmentation network with a semantic head and a contact surface head, and the full model."""
from collections import namedtuple
import torch
import torch.nn as nn
from popnet.config import ModelConfig
from popnet.grids import as_grid_batch, restore_layout
from popnet.networks.blocks import ConvLayer, Encoder, Decoder, check_network_inputs
from popnet.networks.popping import PoppingNetwork, as_rgb_batch


SegmentationOutput = namedtuple("SegmentationOutput", ["s_tilde", "d_c", "s_logits"])
PopNetOutput = namedtuple("PopNetOutput", ["d_po", "s_tilde", "d_c", "s_logits"])


class SegmentationNetwork(nn.Module):
    """RGB-D segmentation network fed with the popped-out depth.

    An RGB stream and a depth stream are encoded separately; the fusion stream starts as the sum of their first
    features and, at every following scale, downsamples its previous feature and adds both stream features of that
    scale. A decoder with additive skips on the fusion features feeds two independent heads: the semantic head
    (logits of ``S_tilde``) and the surface head (convolution block and 1x1 convolution) giving the contact surface
    ``D_c``. Both outputs go through a logistic.
    """

    def __init__(self, config=ModelConfig()):
        super(SegmentationNetwork, self).__init__()
        self.config = config
        channels = config.scaled_channels
        self.rgb_encoder = Encoder(3, channels, config.encoder)
        self.depth_encoder = Encoder(1, channels, config.encoder)
        self.fusion_stages = nn.ModuleList([ConvLayer(channels[k - 1], channels[k], stride=2) for k in range(1, 5)])
        self.decoder = Decoder(channels)
        self.semantic_head = nn.Conv2d(channels[0], 1, kernel_size=1)
        self.surface_head = nn.Sequential(ConvLayer(channels[0], channels[0]), nn.Conv2d(channels[0], 1, kernel_size=1))

    def forward(self, rgb: torch.Tensor, d_po: torch.Tensor) -> SegmentationOutput:
        check_network_inputs(rgb, d_po, "d_po")
        rgb_features = self.rgb_encoder(rgb)
        depth_features = self.depth_encoder(d_po.to(rgb.dtype))
        fused = [rgb_features[0] + depth_features[0]]
        for stage, rgb_feature, depth_feature in zip(self.fusion_stages, rgb_features[1:], depth_features[1:]):
            fused.append(stage(fused[-1]) + rgb_feature + depth_feature)
        decoded = self.decoder(fused)
        logits = self.semantic_head(decoded)
        return SegmentationOutput(torch.sigmoid(logits), torch.sigmoid(self.surface_head(decoded)), logits)


def segmentation_forward(net: SegmentationNetwork, rgb, d_po) -> tuple:
    """Run the segmentation network and return ``(S_tilde, D_c)`` with the layout of ``d_po``."""
    parameter = next(net.parameters())
    rgb_batch, _ = as_rgb_batch(rgb)
    depth_batch, ndim = as_grid_batch(d_po)
    output = net(rgb_batch.to(parameter), depth_batch.to(parameter))
    return restore_layout(output.s_tilde, ndim), restore_layout(output.d_c, ndim)


class PopNet(nn.Module):
    """Popping network chained with the segmentation network, trained end-to-end.

    Examples
    --------
    >>> import torch
    >>> import popnet as pn
    >>> net = pn.PopNet(pn.ModelConfig(width=0.25)).eval()
    >>> out = net(torch.rand(1, 3, 64, 64), torch.rand(1, 1, 64, 64))
    >>> tuple(out.d_po.shape), tuple(out.d_c.shape)
    ((1, 1, 64, 64), (1, 1, 64, 64))
    """

    def __init__(self, config=ModelConfig()):
        super(PopNet, self).__init__()
        self.config = config
        self.popping = PoppingNetwork(config)
        self.segmentation = SegmentationNetwork(config)

    def forward(self, rgb: torch.Tensor, d_sf: torch.Tensor) -> PopNetOutput:
        d_po = self.popping(rgb, d_sf)
        output = self.segmentation(rgb, d_po)
        return PopNetOutput(d_po, output.s_tilde, output.d_c, output.s_logits)
