"""Exact 1D total-variation proximal operator.

``tv_prox_1d`` returns the exact minimizer of

    0.5 * ||x - v||^2 + w * sum_i |x[i+1] - x[i]|

using Condat's direct non-iterative algorithm (L. Condat, "A direct
algorithm for 1-D total variation denoising", IEEE SPL 2013).  The
batched form runs the same kernel over every 1D fibre of an array along
a chosen axis; complex arrays are denoised on their real and imaginary
parts separately, which is the prox of the separable real/imaginary TV
surrogate.

When numba is installed the kernels are jit-compiled; the fallback is
the identical pure-Python code, so results never depend on numba.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidConfig, InvalidInput

try:
    import numba
except ImportError:
    numba = None

__all__ = ["tv_prox_1d", "tv_denoise_axis"]


def _condat_kernel(y, lam, x):
    # Direct taut-string pass: maintain lower/upper string candidates
    # (vmin/vmax with running slacks umin/umax) and emit a constant
    # segment whenever one of them is forced to break.
    n = y.shape[0]
    k = 0
    k0 = 0
    km = 0
    kp = 0
    vmin = y[0] - lam
    vmax = y[0] + lam
    umin = lam
    umax = -lam
    while True:
        if k == n - 1:
            x[n - 1] = vmin + umin
            return
        while k < n - 1:
            if y[k + 1] + umin < vmin - lam:
                # lower string breaks: freeze segment at vmin
                x[k0 : km + 1] = vmin
                k = km + 1
                k0 = k
                km = k
                kp = k
                vmin = y[k]
                vmax = y[k] + 2.0 * lam
                umin = lam
                umax = -lam
            elif y[k + 1] + umax > vmax + lam:
                # upper string breaks: freeze segment at vmax
                x[k0 : kp + 1] = vmax
                k = kp + 1
                k0 = k
                km = k
                kp = k
                vmin = y[k] - 2.0 * lam
                vmax = y[k]
                umin = lam
                umax = -lam
            else:
                k += 1
                umin += y[k] - vmin
                umax += y[k] - vmax
                if umin >= lam:
                    vmin += (umin - lam) / (k - k0 + 1)
                    umin = lam
                    km = k
                if umax <= -lam:
                    vmax += (umax + lam) / (k - k0 + 1)
                    umax = -lam
                    kp = k
        # end of signal reached: resolve the trailing segment
        if umin < 0.0:
            x[k0 : km + 1] = vmin
            k = km + 1
            k0 = k
            km = k
            vmin = y[k]
            umin = lam
            umax = y[k] + lam - vmax
        elif umax > 0.0:
            x[k0 : kp + 1] = vmax
            k = kp + 1
            k0 = k
            kp = k
            vmax = y[k]
            umax = -lam
            umin = y[k] - lam - vmin
        else:
            x[k0:n] = vmin + umin / (k - k0 + 1)
            return
        if k == n - 1:
            x[n - 1] = vmin + umin
            return


def _make_batch(kernel):
    def batch(flat, lam, out):
        for i in range(flat.shape[0]):
            kernel(flat[i], lam, out[i])

    return batch


if numba is not None:
    _condat = numba.njit(_condat_kernel)
    _tv_batch = numba.njit(_make_batch(_condat))
else:
    _condat = _condat_kernel
    _tv_batch = _make_batch(_condat)


def _check_weight(weight) -> float:
    w = float(weight)
    if not np.isfinite(w) or w < 0:
        raise InvalidConfig(f"tv weight must be finite and >= 0, got {weight!r}")
    return w


def tv_prox_1d(values, weight) -> np.ndarray:
    """Exact TV prox of a real 1D sequence."""
    w = _check_weight(weight)
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise InvalidInput(f"expected a 1D sequence, got shape {v.shape}")
    if v.size < 1:
        raise InvalidInput("sequence must have length >= 1")
    if not np.all(np.isfinite(v)):
        raise InvalidInput("sequence contains non-finite values")
    if v.size == 1 or w == 0.0:
        return v.copy()
    out = np.empty_like(v)
    _condat(v, w, out)
    return out


def tv_denoise_axis(arr, weight, axis: int = -1) -> np.ndarray:
    """TV prox applied independently to every 1D fibre along ``axis``.

    Complex input is handled as two real problems (real and imaginary
    parts), matching the separable surrogate used by the solvers.
    """
    w = _check_weight(weight)
    a = np.asarray(arr)
    if np.iscomplexobj(a):
        return tv_denoise_axis(a.real, w, axis) + 1j * tv_denoise_axis(a.imag, w, axis)
    a = a.astype(np.float64, copy=True)
    if a.shape[axis] <= 1 or w == 0.0:
        return a
    moved = np.moveaxis(a, axis, -1)
    flat = np.ascontiguousarray(moved.reshape(-1, moved.shape[-1]))
    out = np.empty_like(flat)
    _tv_batch(flat, w, out)
    return np.moveaxis(out.reshape(moved.shape), -1, axis)
