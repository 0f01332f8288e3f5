"""Desk-scale vision-language planning with a closed loop down to gridworld control."""

__version__ = "0.1.0"

from .tensor import Tensor  # noqa: F401
