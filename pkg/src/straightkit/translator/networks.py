"""
U-shape generator and patch-wise discriminator

The generator is the pix2pix-style encoder/decoder with mirror-level skip
connections; its only noise source is decoder dropout. The discriminator
sees the backbone and the chromosome concatenated on channels and emits
raw (unsquashed) patch scores for the least-squares loss.
"""

import torch
import torch.nn as nn

from straightkit.utils import config
from straightkit.utils.errors import InvalidArgumentError


def _norm_layer(norm, channels):
    if norm == "batch":
        return nn.BatchNorm2d(channels)
    if norm == "instance":
        return nn.InstanceNorm2d(channels, affine=True)
    if norm == "none":
        return nn.Identity()
    raise InvalidArgumentError(f"unknown norm layer '{norm}'")


class UNetGenerator(nn.Module):
    """U-Net generator (the generator part of pix2pix)"""

    def __init__(self, in_channels=1, out_channels=1, depth=config.UNET_DEPTH,
                 base_channels=config.BASE_CHANNELS, dropout=config.DROPOUT_RATE,
                 dropout_levels=2, norm="batch"):
        super().__init__()
        if depth < 1:
            raise InvalidArgumentError(f"generator depth must be >= 1, got {depth}")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.depth = depth
        self.architecture = dict(
            in_channels=in_channels,
            out_channels=out_channels,
            depth=depth,
            base_channels=base_channels,
            dropout=dropout,
            dropout_levels=dropout_levels,
            norm=norm,
        )

        channels = [base_channels * 2 ** i for i in range(depth)]

        self.down = nn.ModuleList()
        prev = in_channels
        for i, ch in enumerate(channels):
            layers = [nn.Conv2d(prev, ch, kernel_size=4, stride=2, padding=1)]
            if i > 0:
                layers.append(_norm_layer(norm, ch))
            layers.append(nn.LeakyReLU(0.2))
            self.down.append(nn.Sequential(*layers))
            prev = ch

        # up[i] mirrors down[i]; up[depth - 1] is the innermost level
        self.up = nn.ModuleList()
        for i in range(depth):
            in_ch = channels[i] if i == depth - 1 else 2 * channels[i]
            if i == 0:
                layers = [nn.ConvTranspose2d(in_ch, out_channels, kernel_size=4, stride=2, padding=1), nn.Tanh()]
            else:
                layers = [
                    nn.ConvTranspose2d(in_ch, channels[i - 1], kernel_size=4, stride=2, padding=1),
                    _norm_layer(norm, channels[i - 1]),
                    nn.ReLU(),
                ]
                if dropout > 0 and i >= depth - dropout_levels:
                    layers.append(nn.Dropout(dropout))
            self.up.append(nn.Sequential(*layers))

    def check_input(self, x):
        if x.dim() != 4:
            raise InvalidArgumentError(f"expected (batch, channels, height, width), got {tuple(x.shape)}")
        if x.shape[1] != self.in_channels:
            raise InvalidArgumentError(f"generator expects {self.in_channels} channel(s), got {x.shape[1]}")
        factor = 2 ** self.depth
        if x.shape[2] % factor or x.shape[3] % factor:
            raise InvalidArgumentError(
                f"height and width must be divisible by {factor}, got {x.shape[2]}x{x.shape[3]}"
            )

    def forward(self, x):
        self.check_input(x)
        skips = []
        h = x
        for block in self.down:
            h = block(h)
            skips.append(h)

        h = self.up[-1](skips[-1])
        for i in range(self.depth - 2, -1, -1):
            h = self.up[i](torch.cat([h, skips[i]], dim=1))
        return h


class PatchDiscriminator(nn.Module):
    """Patch-wise discriminator on (backbone, chromosome) pairs"""

    def __init__(self, in_channels=2, base_channels=config.BASE_CHANNELS,
                 strided_layers=config.DISC_STRIDED_LAYERS, flat_layers=config.DISC_FLAT_LAYERS,
                 norm="batch"):
        super().__init__()
        self.in_channels = in_channels
        layers = []
        prev = in_channels
        ch = base_channels
        for i in range(strided_layers):
            layers.append(nn.Conv2d(prev, ch, kernel_size=4, stride=2, padding=1))
            if i > 0:
                layers.append(_norm_layer(norm, ch))
            layers.append(nn.LeakyReLU(0.2))
            prev, ch = ch, ch * 2
        for _ in range(flat_layers - 1):
            layers.extend([
                nn.Conv2d(prev, ch, kernel_size=4, stride=1, padding=1),
                _norm_layer(norm, ch),
                nn.LeakyReLU(0.2),
            ])
            prev, ch = ch, ch * 2
        if flat_layers > 0:
            layers.append(nn.Conv2d(prev, 1, kernel_size=4, stride=1, padding=1))
        else:
            layers.append(nn.Conv2d(prev, 1, kernel_size=1))
        self.model = nn.Sequential(*layers)

    def forward(self, x, y):
        if x.shape != y.shape:
            raise InvalidArgumentError(f"condition {tuple(x.shape)} and image {tuple(y.shape)} differ")
        pair = torch.cat([x, y], dim=1)
        if pair.shape[1] != self.in_channels:
            raise InvalidArgumentError(f"discriminator expects {self.in_channels} channels, got {pair.shape[1]}")
        return self.model(pair)


def init_weights(module, std=config.INIT_STD, seed=0):
    """Normal(0, std) conv weights, zero biases, Normal(1, std) norm scales"""
    gen = torch.Generator().manual_seed(int(seed))
    with torch.no_grad():
        for m in module.modules():
            if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)):
                m.weight.normal_(0.0, std, generator=gen)
                if m.bias is not None:
                    m.bias.zero_()
            elif isinstance(m, (nn.BatchNorm2d, nn.InstanceNorm2d)) and m.weight is not None:
                m.weight.normal_(1.0, std, generator=gen)
                m.bias.zero_()
    return module


def patch_map_size(size, strided_layers=config.DISC_STRIDED_LAYERS, flat_layers=config.DISC_FLAT_LAYERS):
    """Spatial size of the patch score map: s' = floor((s + 2p - k) / stride) + 1 per layer"""
    for _ in range(strided_layers):
        size = (size + 2 - 4) // 2 + 1
    for _ in range(flat_layers):
        size = (size + 2 - 4) // 1 + 1
    return size


def generator_forward(generator, x, training):
    """Run the generator; dropout (the noise z) is active only when training"""
    generator.train(training)
    return generator(x)


def discriminator_forward(discriminator, x, y):
    return discriminator(x, y)
