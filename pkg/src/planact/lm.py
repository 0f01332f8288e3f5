"""Decoder-only micro language model with soft prompt rows and per-block prefix adapters.

The input sequence is laid out as [soft prompt rows][text embeddings].  Text
positions attend causally among themselves and fully to the soft prompt rows
(a prefix mask over the sequence).  Each block additionally owns P trainable
key/value rows that every position may attend to; these adapter rows are the
only LM-interior trainables when the base model is frozen.  Logits are emitted
for text positions only, and text positions are numbered independently of the
soft prompt so prompt rows never shift positional slots.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DimensionError
from .nn import LayerNorm, Linear, Mask, Module, TransformerBlock
from .tensor import Tensor, concat, parameter, take_rows


@dataclass
class LmConfig:
    vocab_size: int
    dim: int = 64
    blocks: int = 4
    heads: int = 4
    context: int = 256
    prefix_len: int = 4
    ff_mult: int = 4


class MicroLm(Module):
    def __init__(self, rng: np.random.Generator, config: LmConfig):
        self.config = config
        self.embed = parameter(rng, (config.vocab_size, config.dim), scale=0.1)
        self.pos = parameter(rng, (config.context, config.dim), scale=0.02)
        self.blocks = [
            TransformerBlock(rng, config.dim, config.heads, ff_mult=config.ff_mult)
            for _ in range(config.blocks)
        ]
        # one (P, 2, dim) tensor of key/value prefix rows per block
        self.adapters = [
            parameter(rng, (config.prefix_len, 2, config.dim), scale=0.02)
            for _ in range(config.blocks)
        ]
        self.ln_f = LayerNorm(config.dim)
        self.out = Linear(rng, config.dim, config.vocab_size)

    def forward(
        self,
        ids: list[int],
        soft_prompt: Tensor | None = None,
        use_adapters: bool = True,
    ) -> Tensor:
        n = len(ids)
        if n == 0:
            raise ContractError("lm forward requires at least one token")
        n_soft = 0 if soft_prompt is None else soft_prompt.shape[0]
        prefix = self.config.prefix_len if use_adapters else 0
        if n + n_soft + prefix > self.config.context:
            raise ContractError(
                f"sequence of {n} tokens + {n_soft} prompt rows + {prefix} adapter rows "
                f"exceeds context {self.config.context}"
            )
        if soft_prompt is not None and soft_prompt.shape[1] != self.config.dim:
            raise DimensionError(
                f"soft prompt width {soft_prompt.shape[1]} does not match model dim "
                f"{self.config.dim}"
            )
        x = take_rows(self.embed, ids) + self.pos[:n, :]
        if soft_prompt is not None:
            x = concat([soft_prompt, x], axis=0)
        mask = Mask.prefix_mask(n_soft) if n_soft else Mask.causal()
        for block, adapter in zip(self.blocks, self.adapters):
            kv = (adapter[:, 0, :], adapter[:, 1, :]) if use_adapters else None
            x = block(x, mask, self_prefix_kv=kv)
        h = self.ln_f(x)
        if n_soft:
            h = h[n_soft:, :]
        return self.out(h)
