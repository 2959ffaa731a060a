# -*- coding: utf-8 -*-
from .blocks import ConvLayer, ResidualBlock, Encoder, Decoder, DecoderStage
from .popping import PoppingNetwork, popping_forward
from .segmentation import SegmentationNetwork, SegmentationOutput, PopNet, PopNetOutput, segmentation_forward
