"""Numerically stable log-space primitives used across the package."""

from __future__ import annotations

import numpy as np


def logsumexp(x: np.ndarray) -> float:
    """log(sum(exp(x))) with max-subtraction; finite for any finite x.

    Non-finite inputs propagate to a non-finite result without warning;
    callers that must reject them check beforehand.
    """
    x = np.asarray(x, dtype=float)
    m = np.max(x)
    with np.errstate(invalid="ignore"):
        return float(m + np.log(np.sum(np.exp(x - m))))


def log_softmax(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x - logsumexp(x)


def softmax(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    with np.errstate(invalid="ignore"):
        e = np.exp(x - np.max(x))
        return e / e.sum()


def sigmoid(x: float) -> float:
    # branch on sign so exp never overflows
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return float(e / (1.0 + e))


def log_sigmoid(x: float) -> float:
    """log(sigmoid(x)) = -log(1 + exp(-x)), computed without overflow."""
    return float(-np.logaddexp(0.0, -x))
