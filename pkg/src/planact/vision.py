"""Patch-based visual encoder for single images and stacked video frames.

Images are cut into non-overlapping patches, linearly embedded, position-tagged
and passed through self-attention blocks.  Output tokens are read one block
early: the final block exists in the parameter set but is bypassed, so features
come from the second-to-last block.  Video frames are encoded independently and
concatenated frame-major with a per-frame temporal embedding added.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DimensionError
from .nn import Linear, Mask, Module, TransformerBlock, learned_embedding, sinusoidal_embedding
from .tensor import Tensor, as_tensor, concat


@dataclass
class VisionConfig:
    channels: int = 3
    image_size: int = 32
    patch_size: int = 8
    dim: int = 64
    blocks: int = 3
    heads: int = 4
    ff_mult: int = 4
    max_frames: int = 8
    positional: str = "learned"  # or "sinusoidal_2d": fixed row/column codes


def sinusoidal_grid_embedding(side: int, dim: int) -> Tensor:
    """Fixed 2-D position table: half the width encodes the row, half the column."""
    if dim % 2 != 0:
        raise ContractError(f"2-d positional table needs an even dim, got {dim}")
    axis = sinusoidal_embedding(side, dim // 2).data
    rows = np.repeat(axis, side, axis=0)
    cols = np.tile(axis, (side, 1))
    return Tensor(np.concatenate([rows, cols], axis=1))


@dataclass
class VisualTokens:
    tokens: Tensor
    frame_count: int
    patches_per_frame: int

    def __post_init__(self):
        if self.tokens.shape[0] != self.frame_count * self.patches_per_frame:
            raise DimensionError(
                f"{self.tokens.shape[0]} tokens inconsistent with "
                f"{self.frame_count} frames of {self.patches_per_frame} patches"
            )


class VisualEncoder(Module):
    def __init__(self, rng: np.random.Generator, config: VisionConfig):
        if config.image_size % config.patch_size != 0:
            raise ContractError(
                f"image size {config.image_size} not divisible by patch {config.patch_size}"
            )
        self.config = config
        side = config.image_size // config.patch_size
        self.patches_per_frame = side * side
        patch_dim = config.channels * config.patch_size**2
        self.patch_embed = Linear(rng, patch_dim, config.dim)
        self.temporal = learned_embedding(rng, config.max_frames, config.dim)
        if config.positional == "sinusoidal_2d":
            self.pos = sinusoidal_grid_embedding(side, config.dim)
        else:
            self.pos = learned_embedding(rng, self.patches_per_frame, config.dim)
        self.blocks = [
            TransformerBlock(rng, config.dim, config.heads, ff_mult=config.ff_mult)
            for _ in range(config.blocks)
        ]
        self.positional_enabled = True

    def _patchify(self, image: Tensor) -> Tensor:
        c, h, w = image.shape
        p = self.config.patch_size
        if c != self.config.channels:
            raise DimensionError(f"expected {self.config.channels} channels, got {c}")
        if h % p != 0 or w % p != 0:
            raise DimensionError(f"spatial extents {h}x{w} not divisible by patch {p}")
        gh, gw = h // p, w // p
        patches = (
            image.reshape(c, gh, p, gw, p)
            .transpose(1, 3, 0, 2, 4)
            .reshape(gh * gw, c * p * p)
        )
        return patches

    def _encode_tokens(self, image: Tensor) -> Tensor:
        x = self.patch_embed(self._patchify(as_tensor(image)))
        if self.positional_enabled:
            x = x + self.pos
        # features are read after the second-to-last block; the final block is unused
        for block in self.blocks[:-1]:
            x = block(x, Mask.full())
        return x

    def encode_image(self, image) -> VisualTokens:
        tokens = self._encode_tokens(image)
        return VisualTokens(tokens, frame_count=1, patches_per_frame=self.patches_per_frame)

    def encode_frames(self, frames: list) -> VisualTokens:
        n = len(frames)
        if not 1 <= n <= self.config.max_frames:
            raise ContractError(
                f"frame count {n} outside [1, {self.config.max_frames}]"
            )
        per_frame = []
        for f, frame in enumerate(frames):
            tokens = self._encode_tokens(frame)
            if self.positional_enabled:
                tokens = tokens + self.temporal[f : f + 1, :]
            per_frame.append(tokens)
        return VisualTokens(
            concat(per_frame, axis=0), frame_count=n, patches_per_frame=self.patches_per_frame
        )
