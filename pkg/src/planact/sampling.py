"""Temperature / nucleus sampling over the micro language model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .lm import MicroLm
from .tensor import Tensor
from .vocab import EOS, Vocabulary, detokenize


@dataclass
class GenerationConfig:
    temperature: float = 0.9
    top_p: float = 0.95
    max_new_tokens: int = 48
    samples_per_prompt: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.temperature < 0.0:
            raise ContractError(f"temperature must be non-negative, got {self.temperature}")
        if not 0.0 < self.top_p <= 1.0:
            raise ContractError(f"top_p must lie in (0, 1], got {self.top_p}")
        if self.samples_per_prompt < 1:
            raise ContractError("samples_per_prompt must be at least 1")


def sample_token(
    logits: np.ndarray, temperature: float, top_p: float, rng: np.random.Generator
) -> int:
    """Nucleus sampling: keep the smallest top set with cumulative mass >= top_p."""
    if temperature == 0.0:
        return int(np.argmax(logits))
    scaled = logits / temperature
    scaled = scaled - scaled.max()
    probs = np.exp(scaled)
    probs /= probs.sum()
    order = np.argsort(-probs, kind="stable")
    cum = np.cumsum(probs[order])
    cutoff = int(np.searchsorted(cum, top_p))
    cutoff = min(cutoff, len(order) - 1)
    kept = order[: cutoff + 1]
    kept_probs = probs[kept]
    kept_probs /= kept_probs.sum()
    return int(rng.choice(kept, p=kept_probs))


def generate(
    model: MicroLm,
    prompt_ids: list[int],
    soft_prompt: Tensor | None,
    cfg: GenerationConfig,
    use_adapters: bool = True,
    vocab: Vocabulary | None = None,
) -> list[list[int]] | list[str]:
    """Draw ``samples_per_prompt`` continuations; returns texts when a vocabulary is given.

    Each sample is drawn sequentially from one seeded stream, stopping at EOS
    or after ``max_new_tokens`` new tokens.
    """
    rng = np.random.default_rng(cfg.seed)
    results = []
    for _ in range(cfg.samples_per_prompt):
        ids = list(prompt_ids)
        new: list[int] = []
        for _ in range(cfg.max_new_tokens):
            logits = model.forward(ids, soft_prompt, use_adapters=use_adapters)
            token = sample_token(logits.data[-1], cfg.temperature, cfg.top_p, rng)
            new.append(token)
            ids.append(token)
            if token == EOS:
                break
        results.append(new)
    if vocab is not None:
        return [detokenize(sample, vocab) for sample in results]
    return results
