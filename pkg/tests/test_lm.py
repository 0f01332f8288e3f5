import numpy as np
import pytest

from planact.errors import ContractError
from planact.lm import LmConfig, MicroLm
from planact.nn import set_trainable
from planact.sampling import GenerationConfig, generate, sample_token
from planact.tensor import Tensor, cross_entropy
from planact.vocab import EOS, Vocabulary, tokenize_prefix

VOCAB = Vocabulary.build(["go to the red block", "open the drawer now", "a b c d e"])


@pytest.fixture
def model(rng):
    cfg = LmConfig(vocab_size=len(VOCAB), dim=16, blocks=2, heads=2, context=64, prefix_len=3)
    return MicroLm(rng, cfg)


class TestLmForward:
    def test_plain_causal_logits(self, model):
        ids = tokenize_prefix("go to the red block", VOCAB)
        logits = model.forward(ids, soft_prompt=None, use_adapters=False)
        assert logits.shape == (len(ids), len(VOCAB))

    def test_text_logit_rows_unchanged_by_soft_prompt(self, model, rng):
        ids = tokenize_prefix("open the drawer", VOCAB)
        plain = model.forward(ids)
        prompted = model.forward(ids, soft_prompt=Tensor(np.zeros((4, 16))))
        assert plain.shape == prompted.shape == (len(ids), len(VOCAB))
        # zero prompt rows still act through attention, so values may differ
        assert not np.allclose(plain.data, prompted.data)

    def test_causality_bitwise(self, model, rng):
        prompt = Tensor(rng.standard_normal((2, 16)))
        la = model.forward([1, 4, 5, 6, 7], soft_prompt=prompt)
        lb = model.forward([1, 4, 5, 9, 8], soft_prompt=prompt)
        assert la.data[:3].tobytes() == lb.data[:3].tobytes()

    def test_context_overflow(self, model):
        with pytest.raises(ContractError):
            model.forward(list(range(4)) * 16, soft_prompt=Tensor(np.zeros((4, 16))))

    def test_empty_sequence_rejected(self, model):
        with pytest.raises(ContractError):
            model.forward([])

    def test_every_position_sees_adapters(self, model):
        # gradient from the first position's logits must reach every block's adapter
        logits = model.forward([4, 5, 6], use_adapters=True)
        loss = cross_entropy(logits[0:1, :], [1])
        loss.backward()
        for adapter in model.adapters:
            assert adapter.grad is not None
            assert np.any(adapter.grad != 0.0)

    def test_adapter_only_training(self, model, rng):
        params = model.named_parameters()
        set_trainable(params, False)
        set_trainable({k: v for k, v in params.items() if "adapters" in k}, True)
        logits = model.forward([4, 5, 6, 7])
        cross_entropy(logits, [5, 6, 7, EOS]).backward()
        for name, p in params.items():
            if "adapters" in name:
                assert p.grad is not None, name
            else:
                assert p.grad is None, name

    def test_soft_prompt_gradient_flows_upstream(self, model):
        prompt = Tensor(np.zeros((3, 16)), requires_grad=True)
        logits = model.forward([4, 5], soft_prompt=prompt)
        cross_entropy(logits, [5, EOS]).backward()
        assert prompt.grad is not None and np.any(prompt.grad != 0.0)


class TestSampler:
    def test_greedy_deterministic(self, model):
        ids = tokenize_prefix("go to the", VOCAB)
        cfg = GenerationConfig(temperature=0.0, samples_per_prompt=2, max_new_tokens=8, seed=3)
        outs = generate(model, ids, None, cfg)
        assert outs[0] == outs[1]

    def test_exactly_five_candidates(self, model):
        cfg = GenerationConfig(samples_per_prompt=5, max_new_tokens=4, seed=1)
        outs = generate(model, [4, 5], None, cfg)
        assert len(outs) == 5

    def test_stops_at_eos(self, model):
        cfg = GenerationConfig(temperature=0.0, samples_per_prompt=1, max_new_tokens=30)
        (out,) = generate(model, [4, 5, 6], None, cfg)
        assert len(out) <= 30
        if EOS in out:
            assert out[-1] == EOS

    def test_tiny_top_p_equals_greedy(self):
        rng = np.random.default_rng(0)
        logits = rng.standard_normal(6) * 2.0
        greedy = int(np.argmax(logits))
        for seed in range(20):
            assert sample_token(logits, 1.0, 1e-9, np.random.default_rng(seed)) == greedy

    def test_full_distribution_statistics(self):
        # 4-token vocabulary, temperature 1, top_p 1: the top token's frequency
        # over 10k draws stays within 3 sigma of its exact softmax probability
        logits = np.array([1.0, 0.3, -0.5, -1.2])
        e = np.exp(logits - logits.max())
        probs = e / e.sum()
        p_top = probs.max()
        top = int(np.argmax(probs))
        rng = np.random.default_rng(42)
        n = 10_000
        hits = sum(sample_token(logits, 1.0, 1.0, rng) == top for _ in range(n))
        sigma = np.sqrt(p_top * (1 - p_top) / n)
        assert abs(hits / n - p_top) <= 3 * sigma

    def test_nucleus_restricts_support(self):
        # top_p just above the top probability keeps exactly the two best tokens
        probs = np.array([0.6, 0.3, 0.08, 0.02])
        logits = np.log(probs)
        rng = np.random.default_rng(5)
        seen = {sample_token(logits, 1.0, 0.65, rng) for _ in range(300)}
        assert seen == {0, 1}

    def test_invalid_config_rejected(self):
        with pytest.raises(ContractError):
            GenerationConfig(temperature=-0.1)
        with pytest.raises(ContractError):
            GenerationConfig(top_p=0.0)
        with pytest.raises(ContractError):
            GenerationConfig(top_p=1.2)
