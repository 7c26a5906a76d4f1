"""Elementary differentiable building blocks and the finite-difference oracle.

All functions are pure and operate on 1-D float64 arrays ("vectors") or
2-D arrays of stacked frames. Reductions accumulate in a fixed
left-to-right order so results are bit-reproducible regardless of how
callers parallelise.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

__all__ = [
    "mean_pool",
    "l2_normalize",
    "sigmoid",
    "relu",
    "softmax",
    "finite_diff_grad",
]

# One ulp below 1.0; sigmoid outputs are clamped to the open interval
# (0, 1) at float64 resolution.
_ONE_MINUS = np.nextafter(1.0, 0.0)
_ZERO_PLUS = np.nextafter(0.0, 1.0)


def mean_pool(frames) -> np.ndarray:
    """Arithmetic mean over a sequence of equal-length frames.

    Accumulates frame by frame, left to right, in the order given.
    """
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2:
        raise ValueError(f"expected a 2-D frame stack, got shape {frames.shape}")
    if frames.shape[0] == 0:
        raise ValueError("empty sequence")
    acc = np.zeros(frames.shape[1], dtype=np.float64)
    for frame in frames:
        acc += frame
    return acc / frames.shape[0]


def l2_normalize(v) -> np.ndarray:
    """Scale ``v`` to unit Euclidean norm.

    The zero vector is returned unchanged. When the squared norm risks
    under- or overflow the input is first rescaled by its max magnitude.
    """
    v = np.asarray(v, dtype=np.float64)
    ss = float(np.dot(v, v)) if v.size else 0.0
    if 1e-140 < ss < 1e140:
        return v / np.sqrt(ss)
    peak = np.max(np.abs(v)) if v.size else 0.0
    if peak == 0.0:
        return v.copy()
    w = v / peak
    return w / np.sqrt(np.dot(w, w))


def sigmoid(x) -> np.ndarray:
    """Elementwise logistic function, overflow-safe.

    Negative inputs use exp(x)/(1+exp(x)) so exp never overflows.
    Outputs are clamped into the open interval (0, 1) at float64
    resolution; sigmoid(0) is exactly 0.5.
    """
    x = np.asarray(x, dtype=np.float64)
    z = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0, z) / (1.0 + z)
    return np.minimum(np.maximum(out, _ZERO_PLUS), _ONE_MINUS)


def relu(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0)


def softmax(x) -> np.ndarray:
    """Stable softmax: shift by the max before exponentiating."""
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(x - x.max())
    return e / e.sum()


def finite_diff_grad(
    f: Callable[[np.ndarray], float],
    theta: Sequence[float] | np.ndarray,
    h: float = 1e-5,
) -> np.ndarray:
    """Central-difference gradient of a scalar function of a flat vector.

    Coordinate j is (f(theta + h e_j) - f(theta - h e_j)) / (2h), with the
    difference quotient taken in the widest float precision available
    (long double on this platform).
    """
    if h <= 0:
        raise ValueError("step size h must be positive")
    theta = np.asarray(theta, dtype=np.float64)
    grad = np.empty(theta.shape[0], dtype=np.float64)
    two_h = np.longdouble(2.0) * np.longdouble(h)
    for j in range(theta.shape[0]):
        bumped = theta.copy()
        bumped[j] = theta[j] + h
        f_plus = f(bumped)
        bumped[j] = theta[j] - h
        f_minus = f(bumped)
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise FloatingPointError(
                f"non-finite function value while perturbing coordinate {j}"
            )
        grad[j] = float((np.longdouble(f_plus) - np.longdouble(f_minus)) / two_h)
    return grad
