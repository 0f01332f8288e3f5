import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from planact.errors import ContractError, DimensionError, NumericError
from planact.gradcheck import check_gradients
from planact.tensor import (
    Tensor,
    concat,
    cross_entropy,
    gelu,
    layer_norm,
    masked_fill,
    softmax,
    take_rows,
    unfold_windows,
)


class TestMatmul:
    def test_identity(self):
        b = Tensor(np.arange(6.0).reshape(3, 2))
        out = Tensor(np.eye(3)) @ b
        np.testing.assert_array_equal(out.data, b.data)

    def test_hand_product(self):
        # [[1,2],[3,4]] @ [[0],[1]] = [[2],[4]]
        out = Tensor([[1.0, 2.0], [3.0, 4.0]]) @ Tensor([[0.0], [1.0]])
        np.testing.assert_array_equal(out.data, [[2.0], [4.0]])

    def test_shape_mismatch_names_both_shapes(self):
        with pytest.raises(DimensionError, match=r"\(2, 3\).*\(2, 3\)"):
            Tensor(np.zeros((2, 3))) @ Tensor(np.zeros((2, 3)))

    def test_gradient(self, rng):
        a = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
        b = Tensor(rng.standard_normal((4, 2)), requires_grad=True)
        check_gradients(lambda inp: (inp[0] @ inp[1]).sum(), [a, b])


class TestSoftmax:
    def test_uniform_from_equal_logits(self):
        out = softmax(Tensor(np.zeros((1, 4))), axis=-1)
        np.testing.assert_allclose(out.data, 0.25)

    def test_hand_ratio(self):
        # exp(0) : exp(ln 3) = 1 : 3
        out = softmax(Tensor([[0.0, np.log(3.0)]]), axis=-1)
        np.testing.assert_allclose(out.data, [[0.25, 0.75]], atol=1e-12)

    def test_saturation(self):
        out = softmax(Tensor([[0.0, 1e6, 0.0]]), axis=-1)
        np.testing.assert_allclose(out.data, [[0.0, 1.0, 0.0]], atol=1e-12)

    def test_nan_rejected(self):
        with pytest.raises(NumericError):
            softmax(Tensor([[np.nan, 0.0]]), axis=-1)

    @given(st.integers(2, 6), st.integers(1, 4))
    def test_rows_sum_to_one_and_shift_invariant(self, cols, rows):
        rng = np.random.default_rng(cols * 17 + rows)
        x = rng.standard_normal((rows, cols)) * 3.0
        out = softmax(Tensor(x), axis=-1)
        np.testing.assert_allclose(out.data.sum(axis=-1), 1.0, atol=1e-12)
        shifted = softmax(Tensor(x + 7.3), axis=-1)
        np.testing.assert_allclose(out.data, shifted.data, atol=1e-10)

    def test_gradient(self, rng):
        x = Tensor(rng.standard_normal((2, 5)), requires_grad=True)
        w = Tensor(rng.standard_normal((2, 5)))
        check_gradients(lambda inp: (softmax(inp[0], axis=-1) * w).sum(), [x])


class TestLayerNorm:
    def test_constant_row_zeroed_by_eps(self):
        x = Tensor(np.full((1, 4), 3.0))
        out = layer_norm(x, Tensor(np.ones(4)), Tensor(np.zeros(4)), eps=1e-5)
        np.testing.assert_allclose(out.data, 0.0, atol=1e-9)

    def test_two_point_row(self):
        # mean 2, population std 1 -> [-1, 1] as eps -> 0
        out = layer_norm(
            Tensor([[1.0, 3.0]]), Tensor(np.ones(2)), Tensor(np.zeros(2)), eps=1e-12
        )
        np.testing.assert_allclose(out.data, [[-1.0, 1.0]], atol=1e-6)

    def test_affine_dominates(self):
        out = layer_norm(
            Tensor([[1.0, 9.0, 4.0]]),
            Tensor(np.zeros(3)),
            Tensor(np.full(3, 5.0)),
        )
        np.testing.assert_allclose(out.data, 5.0)

    def test_dim_mismatch(self):
        with pytest.raises(DimensionError):
            layer_norm(Tensor(np.zeros((2, 3))), Tensor(np.ones(4)), Tensor(np.zeros(4)))

    @given(st.integers(3, 8))
    def test_normalisation_statistics(self, d):
        rng = np.random.default_rng(d)
        x = rng.standard_normal((3, d)) * 5.0 + 2.0
        out = layer_norm(Tensor(x), Tensor(np.ones(d)), Tensor(np.zeros(d)), eps=1e-12)
        assert np.all(np.abs(out.data.mean(axis=-1)) <= 1e-10)
        assert np.all(np.abs(out.data.var(axis=-1) - 1.0) <= 1e-6)

    def test_gradient(self, rng):
        x = Tensor(rng.standard_normal((2, 4)), requires_grad=True)
        g = Tensor(rng.standard_normal(4), requires_grad=True)
        b = Tensor(rng.standard_normal(4), requires_grad=True)
        check_gradients(
            lambda inp: (layer_norm(inp[0], inp[1], inp[2]) * 0.7).sum(), [x, g, b]
        )


class TestCrossEntropy:
    def test_uniform_logits_closed_form(self):
        loss = cross_entropy(Tensor(np.zeros((3, 4))), [0, 1, 2])
        np.testing.assert_allclose(loss.item(), np.log(4.0), atol=1e-12)

    def test_confident_correct_prediction(self):
        logits = np.zeros((1, 5))
        logits[0, 2] = 1e6
        assert cross_entropy(Tensor(logits), [2]).item() < 1e-9

    def test_empty_batch_rejected(self):
        with pytest.raises(ContractError):
            cross_entropy(Tensor(np.zeros((0, 4))), [])

    def test_target_out_of_range(self):
        with pytest.raises(IndexError):
            cross_entropy(Tensor(np.zeros((2, 3))), [0, 3])

    def test_gradient(self, rng):
        x = Tensor(rng.standard_normal((4, 5)), requires_grad=True)
        check_gradients(lambda inp: cross_entropy(inp[0], [1, 0, 4, 2]), [x])


class TestBackward:
    def test_sum_gives_ones(self, rng):
        x = Tensor(rng.standard_normal((3, 2)), requires_grad=True)
        x.sum().backward()
        np.testing.assert_array_equal(x.grad, np.ones((3, 2)))

    def test_polynomial_derivative(self):
        x = Tensor(3.0, requires_grad=True)
        (x * x).backward()
        np.testing.assert_allclose(x.grad, 6.0)

    def test_non_scalar_loss_rejected(self):
        x = Tensor(np.zeros(3), requires_grad=True)
        with pytest.raises(ContractError):
            (x * 2.0).backward()

    def test_loss_without_grad_rejected(self):
        with pytest.raises(ContractError):
            Tensor(1.0).sum().backward()

    def test_grad_accumulates_on_reuse(self):
        x = Tensor([2.0], requires_grad=True)
        (x + x).sum().backward()
        np.testing.assert_allclose(x.grad, [2.0])

    def test_frozen_leaf_receives_no_grad(self, rng):
        frozen = Tensor(rng.standard_normal((2, 2)), requires_grad=False)
        live = Tensor(rng.standard_normal((2, 2)), requires_grad=True)
        (frozen @ live).sum().backward()
        assert frozen.grad is None
        assert live.grad is not None

    def test_each_node_visited_once(self, rng):
        # Diamond graph: y = a*b + a*c reuses a; its grad must be b+c exactly.
        a = Tensor(2.0, requires_grad=True)
        b, c = Tensor(3.0), Tensor(5.0)
        (a * b + a * c).backward()
        np.testing.assert_allclose(a.grad, 8.0)

    def test_composite_graph_matches_finite_differences(self, rng):
        a = Tensor(rng.standard_normal((3, 3)), requires_grad=True)
        b = Tensor(rng.standard_normal((3, 2)), requires_grad=True)
        c = Tensor(rng.standard_normal((2,)), requires_grad=True)

        def fn(inp):
            h = gelu(inp[0] @ inp[1]) + inp[2]
            return (softmax(h, axis=-1) * h.tanh()).mean()

        check_gradients(fn, [a, b, c])

    def test_determinism_bitwise(self, rng):
        data = rng.standard_normal((4, 4))

        def run():
            x = Tensor(data.copy(), requires_grad=True)
            loss = (softmax(x @ x, axis=-1)).sum()
            loss.backward()
            return loss.data.tobytes(), x.grad.tobytes()

        assert run() == run()


class TestShapeOps:
    def test_reshape_transpose_roundtrip_gradient(self, rng):
        x = Tensor(rng.standard_normal((2, 3, 4)), requires_grad=True)
        check_gradients(
            lambda inp: (inp[0].transpose(2, 0, 1).reshape(4, 6).tanh()).sum(), [x]
        )

    def test_getitem_gradient(self, rng):
        x = Tensor(rng.standard_normal((4, 5)), requires_grad=True)
        check_gradients(lambda inp: (inp[0][1:3, ::2] * 2.0).sum(), [x])

    def test_concat_gradient(self, rng):
        a = Tensor(rng.standard_normal((2, 3)), requires_grad=True)
        b = Tensor(rng.standard_normal((1, 3)), requires_grad=True)
        check_gradients(lambda inp: concat([inp[0], inp[1]], axis=0).sum(), [a, b])

    def test_take_rows_gradient(self, rng):
        table = Tensor(rng.standard_normal((6, 3)), requires_grad=True)
        check_gradients(lambda inp: take_rows(inp[0], [1, 1, 4]).sum(), [table])

    def test_take_rows_out_of_range(self):
        with pytest.raises(IndexError):
            take_rows(Tensor(np.zeros((2, 2))), [3])

    def test_masked_fill_gradient(self, rng):
        x = Tensor(rng.standard_normal((3, 3)), requires_grad=True)
        keep = np.eye(3, dtype=bool)
        check_gradients(lambda inp: masked_fill(inp[0], keep, -5.0).tanh().sum(), [x])

    def test_unfold_windows_gradient(self, rng):
        x = Tensor(rng.standard_normal((2, 4, 5)), requires_grad=True)
        check_gradients(lambda inp: (unfold_windows(inp[0], 3) * 0.3).tanh().sum(), [x])

    def test_unfold_windows_shape(self, rng):
        out = unfold_windows(Tensor(rng.standard_normal((3, 6, 6))), 3)
        assert out.shape == (16, 27)


class TestRandomGraphGradients:
    """Random compositions of primitives checked against finite differences."""

    @pytest.mark.parametrize("seed", range(6))
    def test_random_composition(self, seed):
        rng = np.random.default_rng(seed)
        a = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
        b = Tensor(rng.standard_normal((4, 3)), requires_grad=True)
        c = Tensor(rng.standard_normal((3, 3)), requires_grad=True)

        def fn(inp):
            x, y, z = inp
            h = x @ y
            h = h + z.tanh()
            h = softmax(h, axis=-1) @ (z * 0.5)
            h = layer_norm(h, Tensor(np.ones(3)), Tensor(np.zeros(3)))
            return (gelu(h)).mean() + (x * x).sum() * 0.01

        check_gradients(fn, [a, b, c])
