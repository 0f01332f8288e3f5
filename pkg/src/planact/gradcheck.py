"""Central finite-difference gradient checking.

The checker re-evaluates a scalar-valued function under symmetric perturbations
of every input entry, entirely outside the autodiff machinery, so it serves as
an independent oracle for ``backward``.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor

DEFAULT_STEP = 1e-5
DEFAULT_TOL = 1e-4


def finite_difference(
    fn: Callable[[Sequence[Tensor]], Tensor],
    inputs: Sequence[Tensor],
    step: float = DEFAULT_STEP,
) -> list[np.ndarray]:
    """Central-difference gradient of ``fn`` w.r.t. every input, one entry at a time."""
    grads = []
    for i, inp in enumerate(inputs):
        g = np.zeros_like(inp.data)
        flat = inp.data.reshape(-1)
        gflat = g.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + step
            hi = fn(inputs).item()
            flat[j] = orig - step
            lo = fn(inputs).item()
            flat[j] = orig
            gflat[j] = (hi - lo) / (2.0 * step)
        grads.append(g)
    return grads


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.maximum(np.abs(analytic) + np.abs(numeric), 1.0)
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0


def check_gradients(
    fn: Callable[[Sequence[Tensor]], Tensor],
    inputs: Sequence[Tensor],
    step: float = DEFAULT_STEP,
    tol: float = DEFAULT_TOL,
) -> float:
    """Assert analytic gradients match finite differences; returns the worst relative error."""
    for inp in inputs:
        inp.grad = None
        inp.requires_grad = True
    loss = fn(inputs)
    loss.backward()
    numeric = finite_difference(fn, inputs, step=step)
    worst = 0.0
    for inp, num in zip(inputs, numeric):
        analytic = inp.grad if inp.grad is not None else np.zeros_like(inp.data)
        err = max_relative_error(analytic, num)
        worst = max(worst, err)
        if err > tol:
            raise AssertionError(
                f"gradient mismatch: relative error {err:.3e} exceeds {tol:.1e}"
            )
    return worst
