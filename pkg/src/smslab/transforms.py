"""Array conventions and the Fourier algebra of dynamic SMS volumes.

Volumes are plain numpy arrays with a fixed axis order:

* single volume              ``(a, b, t)``      complex, image or k-space
* slice stack / band stack   ``(M, a, b, t)``
* multi-coil stack           ``(C, M, a, b, t)``

``a`` indexes phase-encode rows, ``b`` frequency-encode columns, ``t``
time frames, ``M`` simultaneously excited slices (or, in k-space, the
slice-frequency bands), and ``C`` receive coils.  Index ``(0, 0)`` of
every k-space plane is the DC sample; nothing is ever fftshifted in
storage, centering is purely a display concern.

All transforms use orthonormal scaling, so each forward/inverse pair is
unitary: energy is preserved and the inverse is the exact adjoint.  The
slice-axis DFT uses the ``exp(-2j*pi*i*k/M)`` forward kernel, i.e. band
``k`` collects slice ``i`` with the same accumulating per-line phase a
phase-modulated SMS acquisition imprints.

Everything here is a pure function: inputs are never mutated and outputs
are freshly allocated, so concurrent calls are safe.
"""

from __future__ import annotations

from typing import Iterable, Tuple

import numpy as np
import scipy.fft

from .errors import InvalidInput
from .util import fft_workers

__all__ = [
    "fft2",
    "slice_dft",
    "fft3d",
    "acquire_sms_lines",
    "apply_csm",
    "rss_combine",
]

_SPATIAL_AXES = (-3, -2)
_SLICE_AXIS = -4


def _checked(data, min_ndim: int, name: str) -> np.ndarray:
    arr = np.asarray(data)
    if arr.ndim < min_ndim:
        raise InvalidInput(
            f"{name}: expected at least {min_ndim} axes (..., a, b, t), got shape {arr.shape}"
        )
    if arr.size == 0:
        raise InvalidInput(f"{name}: empty array, all dimensions must be >= 1")
    if not np.all(np.isfinite(arr)):
        raise InvalidInput(f"{name}: contains non-finite samples")
    return arr


def fft2(volume, inverse: bool = False) -> np.ndarray:
    """Orthonormal 2D DFT over the (a, b) axes, applied per frame.

    Accepts any array whose trailing axes are ``(a, b, t)``; leading axes
    (slices, coils) are carried through as batch dimensions.  Flips the
    volume between image space and k-space.
    """
    arr = _checked(volume, 3, "volume")
    fn = scipy.fft.ifftn if inverse else scipy.fft.fftn
    return fn(arr, axes=_SPATIAL_AXES, norm="ortho", workers=fft_workers())


def slice_dft(stack, inverse: bool = False) -> np.ndarray:
    """Orthonormal DFT along the slice axis of an ``(M, a, b, t)`` stack.

    Band ``k`` is ``sum_i x_i * exp(-2j*pi*i*k/M) / sqrt(M)``; a stack of
    one slice passes through unchanged.  The inverse uses the conjugate
    kernel with the same ``1/sqrt(M)`` scaling.
    """
    arr = _checked(stack, 4, "stack")
    fn = scipy.fft.ifft if inverse else scipy.fft.fft
    return fn(arr, axis=_SLICE_AXIS, norm="ortho", workers=fft_workers())


def fft3d(stack, inverse: bool = False) -> np.ndarray:
    """3D SMS transform: per-slice 2D DFT combined with the slice DFT.

    The two factors commute (the transform is separable); the inverse
    applies both conjugate factors and is the exact inverse and adjoint
    of the forward map.
    """
    if inverse:
        return fft2(slice_dft(stack, inverse=True), inverse=True)
    return slice_dft(fft2(stack))


def acquire_sms_lines(stack, acquired_rows: Iterable[Tuple[int, int]]) -> np.ndarray:
    """Simulate a phase-modulated SMS readout of selected k-space lines.

    Parameters
    ----------
    stack:
        Image stack ``(M, a, b, t)``.
    acquired_rows:
        Iterable of ``(ky, frame)`` pairs; each acquired row is read out
        fully along ``b``.

    Returns
    -------
    Composite k-space of shape ``(a, b, t)``, with no slice dimension:
    row ``ky`` holds ``sum_i exp(-2j*pi*i*ky/M) * F2D(x_i)[ky]`` and all
    unacquired rows are zero.  Line ``ky`` of slice ``i`` therefore
    carries the accumulated phase ``2*pi*i*ky/M`` of the modulated
    acquisition, which is what makes the composite signal a sampling of
    the 3D k-space on a helical band lattice.
    """
    arr = _checked(stack, 4, "stack")
    if arr.ndim != 4:
        raise InvalidInput(f"stack: expected exactly (M, a, b, t), got shape {arr.shape}")
    m, a, _, t = arr.shape
    per_slice = fft2(arr)
    out = np.zeros(arr.shape[1:], dtype=per_slice.dtype)
    slice_idx = np.arange(m)
    for ky, frame in acquired_rows:
        if not (0 <= ky < a):
            raise InvalidInput(f"row index {ky} out of range [0, {a})")
        if not (0 <= frame < t):
            raise InvalidInput(f"frame index {frame} out of range [0, {t})")
        phases = np.exp(-2j * np.pi * slice_idx * ky / m)
        out[ky, :, frame] = phases @ per_slice[:, ky, :, frame]
    return out


def apply_csm(stack, csm) -> np.ndarray:
    """Weight an image stack by per-coil sensitivity maps.

    ``stack`` is ``(M, a, b, t)``, ``csm`` is ``(C, M, a, b)``; the maps
    broadcast over time.  Returns ``(C, M, a, b, t)``.
    """
    arr = _checked(stack, 4, "stack")
    maps = _checked(csm, 4, "csm")
    if maps.shape[1:] != arr.shape[:3]:
        raise InvalidInput(
            f"csm shape {maps.shape} does not match stack shape {arr.shape}"
        )
    return maps[..., None] * arr[None, ...]


def rss_combine(coils) -> np.ndarray:
    """Root-sum-of-squares combination over the leading coil axis."""
    arr = _checked(coils, 1, "coils")
    return np.sqrt(np.sum(np.abs(arr) ** 2, axis=0))
