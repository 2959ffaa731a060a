# -*- coding: utf-8 -*-
"""Building blocks shared by the popping and segmentation networks."""
import torch
import torch.nn as nn
import popnet.settings as settings
from popnet.exceptions import ValidationError


class ConvLayer(nn.Sequential):
    """Convolution, batch normalization and rectifier."""

    def __init__(self, in_channels, out_channels, kernel_size=3, stride=1):
        super(ConvLayer, self).__init__(
            nn.Conv2d(in_channels, out_channels, kernel_size, stride=stride, padding=kernel_size // 2, bias=False),
            nn.BatchNorm2d(out_channels),
            nn.ReLU(inplace=True))


class ResidualBlock(nn.Module):
    """Basic residual block: two 3x3 convolutions and an identity (or 1x1 projection) shortcut."""

    def __init__(self, in_channels, out_channels, stride=1):
        super(ResidualBlock, self).__init__()
        self.conv1 = nn.Conv2d(in_channels, out_channels, 3, stride=stride, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(out_channels)
        self.conv2 = nn.Conv2d(out_channels, out_channels, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(out_channels)
        self.relu = nn.ReLU(inplace=True)
        if stride != 1 or in_channels != out_channels:
            self.shortcut = nn.Sequential(nn.Conv2d(in_channels, out_channels, 1, stride=stride, bias=False),
                                          nn.BatchNorm2d(out_channels))
        else:
            self.shortcut = nn.Identity()

    def forward(self, x):
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return self.relu(out + self.shortcut(x))


class Encoder(nn.Module):
    """Five-scale encoder returning features at 1/2, 1/4, 1/8, 1/16 and 1/32 of the input resolution.

    ``"plain"`` stacks stride-2 convolution stages; ``"residual"`` follows the residual layout with a stride-2 stem,
    a max-pooling and two basic blocks per stage.
    """

    def __init__(self, in_channels: int, channels: tuple, family="plain"):
        super(Encoder, self).__init__()
        self.family = family
        if family == "plain":
            stages = [nn.Sequential(ConvLayer(in_channels, channels[0], stride=2), ConvLayer(channels[0], channels[0]))]
            for k in range(1, 5):
                stages.append(nn.Sequential(ConvLayer(channels[k - 1], channels[k], stride=2),
                                            ConvLayer(channels[k], channels[k])))
        elif family == "residual":
            stages = [ConvLayer(in_channels, channels[0], kernel_size=7, stride=2),
                      nn.Sequential(nn.MaxPool2d(3, stride=2, padding=1),
                                    ResidualBlock(channels[0], channels[1]),
                                    ResidualBlock(channels[1], channels[1]))]
            for k in range(2, 5):
                stages.append(nn.Sequential(ResidualBlock(channels[k - 1], channels[k], stride=2),
                                            ResidualBlock(channels[k], channels[k])))
        else:
            raise ValidationError("Unknown encoder family '%s'" % str(family))
        self.stages = nn.ModuleList(stages)

    def forward(self, x) -> list:
        features = []
        for stage in self.stages:
            x = stage(x)
            features.append(x)
        return features


class DecoderStage(nn.Sequential):
    """Convolution block followed by a 2x bilinear upsampling."""

    def __init__(self, in_channels, out_channels):
        super(DecoderStage, self).__init__(
            ConvLayer(in_channels, out_channels),
            nn.Upsample(scale_factor=2, mode="bilinear", align_corners=False))


class Decoder(nn.Module):
    """Decoder climbing back from 1/32 to the input resolution, adding the encoder feature of each scale it
    reaches (additive skip connections)."""

    def __init__(self, channels: tuple):
        super(Decoder, self).__init__()
        self.stages = nn.ModuleList([DecoderStage(channels[k], channels[k - 1]) for k in range(4, 0, -1)])
        self.last_stage = DecoderStage(channels[0], channels[0])

    def forward(self, features: list) -> torch.Tensor:
        x = features[-1]
        for stage, skip in zip(self.stages, reversed(features[:-1])):
            x = stage(x) + skip
        return self.last_stage(x)


def check_network_inputs(rgb: torch.Tensor, depth: torch.Tensor, depth_name="depth"):
    """Check the ``B x 3 x H x W`` / ``B x 1 x H x W`` batches fed to the networks."""
    if rgb.dim() != 4 or rgb.shape[1] != 3:
        raise ValidationError("RGB batch must be Bx3xHxW, got %s" % str(tuple(rgb.shape)))
    if depth.dim() != 4 or depth.shape[1] != 1:
        raise ValidationError("%s batch must be Bx1xHxW, got %s" % (depth_name, str(tuple(depth.shape))))
    if rgb.shape[0] != depth.shape[0] or rgb.shape[-2:] != depth.shape[-2:]:
        raise ValidationError("RGB %s and %s %s do not match"
                              % (str(tuple(rgb.shape)), depth_name, str(tuple(depth.shape))))
    height, width = rgb.shape[-2:]
    if height % settings.DOWNSAMPLING_FACTOR or width % settings.DOWNSAMPLING_FACTOR:
        raise ValidationError("Spatial size %dx%d is not divisible by %d"
                              % (height, width, settings.DOWNSAMPLING_FACTOR))
