"""Dense float64 kernels used by both the forward ops and the autodiff tape.

All functions operate on the last axis so the same code serves single
vectors and batched activations. Forward math lives here once; the graph
ops in `autodiff` call these kernels and add the adjoints.
"""

import numpy as np
from scipy.special import erf

from .errors import NumericError

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def softmax(x: np.ndarray) -> np.ndarray:
    """Stable softmax over the last axis (max-subtracted)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] == 0:
        raise NumericError("softmax of an empty vector")
    shifted = x - np.max(x, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def gelu(x: np.ndarray) -> np.ndarray:
    """Exact Gaussian-CDF GELU: x * Phi(x)."""
    x = np.asarray(x, dtype=np.float64)
    return x * 0.5 * (1.0 + erf(x * _INV_SQRT2))


def gelu_grad(x: np.ndarray) -> np.ndarray:
    """d/dx of x * Phi(x) = Phi(x) + x * phi(x)."""
    x = np.asarray(x, dtype=np.float64)
    phi = np.exp(-0.5 * x * x) * _INV_SQRT_2PI
    return 0.5 * (1.0 + erf(x * _INV_SQRT2)) + x * phi


def layer_norm(
    x: np.ndarray, gain: np.ndarray, bias: np.ndarray, eps: float = 1e-8
) -> np.ndarray:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    x = np.asarray(x, dtype=np.float64)
    gain = np.asarray(gain, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    if gain.shape != (x.shape[-1],) or bias.shape != (x.shape[-1],):
        raise NumericError(
            f"layer_norm length mismatch: x last axis {x.shape[-1]}, "
            f"gain {gain.shape}, bias {bias.shape}"
        )
    if eps <= 0:
        raise NumericError("layer_norm eps must be positive")
    mu = np.mean(x, axis=-1, keepdims=True)
    var = np.mean((x - mu) ** 2, axis=-1, keepdims=True)
    xhat = (x - mu) / np.sqrt(var + eps)
    return gain * xhat + bias


def l2_normalize(v: np.ndarray, axis: int = -1) -> np.ndarray:
    """Scale vectors along `axis` to unit L2 norm; degenerate norm is an error."""
    v = np.asarray(v, dtype=np.float64)
    norm = np.sqrt(np.sum(v * v, axis=axis, keepdims=True))
    if np.any(norm <= 1e-12):
        raise NumericError("l2_normalize: vector norm below 1e-12")
    return v / norm


def check_finite(a: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise NumericError(f"non-finite values in {what}")
    return a
