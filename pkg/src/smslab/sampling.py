"""Undersampling masks and their helical SMS embedding.

An in-plane pattern keeps every ``r_inplane``-th phase-encode row, with
the kept rows shifted by ``interleave_step`` per frame.  Embedding into
the 3D k-space grid places each acquired row ``ky`` into band
``ky mod M``, the band the phase-modulated acquisition actually samples,
so the mask lattice is a helix through the ``(band, ky)`` plane.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfig, InvalidInput

__all__ = ["MaskSpec", "make_inplane_rows", "embed_sms_mask", "apply_mask"]


@dataclass(frozen=True)
class MaskSpec:
    """Geometry of an undersampled dynamic SMS acquisition.

    ``acs_rows`` fully sampled rows are centered on the DC row (row 0,
    wrapping around the top of the grid), matching the unshifted k-space
    storage convention.
    """

    r_inplane: int
    m_slices: int
    a_rows: int
    b_cols: int
    t_frames: int
    interleave_step: int = 1
    acs_rows: int = 0

    def __post_init__(self):
        if self.r_inplane < 1:
            raise InvalidConfig(f"r_inplane must be >= 1, got {self.r_inplane}")
        if self.m_slices < 1:
            raise InvalidConfig(f"m_slices must be >= 1, got {self.m_slices}")
        if self.a_rows < 1 or self.b_cols < 1 or self.t_frames < 1:
            raise InvalidConfig(
                f"grid dims must be >= 1, got ({self.a_rows}, {self.b_cols}, {self.t_frames})"
            )
        if self.r_inplane > self.a_rows:
            raise InvalidConfig(
                f"r_inplane {self.r_inplane} exceeds a_rows {self.a_rows}"
            )
        if not 0 <= self.acs_rows <= self.a_rows:
            raise InvalidConfig(
                f"acs_rows must be in [0, {self.a_rows}], got {self.acs_rows}"
            )


def make_inplane_rows(spec: MaskSpec, frame: int) -> set:
    """Acquired ky rows for one frame.

    Row ``ky`` is kept iff ``(ky - frame * interleave_step) mod r_inplane``
    is zero; the ``acs_rows`` DC-centered rows are always added.  Each kept
    row is read out fully along ``b``.
    """
    if not 0 <= frame < spec.t_frames:
        raise InvalidInput(f"frame {frame} out of range [0, {spec.t_frames})")
    offset = frame * spec.interleave_step
    rows = {
        ky for ky in range(spec.a_rows) if (ky - offset) % spec.r_inplane == 0
    }
    half = spec.acs_rows // 2
    rows.update((ky - half) % spec.a_rows for ky in range(spec.acs_rows))
    return rows


def embed_sms_mask(spec: MaskSpec) -> np.ndarray:
    """Binary mask on the 3D k-space grid, shape ``(M, a, b, t)`` uint8.

    For every frame and every acquired row ``ky``, band ``ky mod M`` is
    set at row ``ky`` across the full readout; everything else is zero.
    With ``acs_rows == 0`` and ``r_inplane`` dividing ``a`` the acquired
    fraction is exactly ``1 / (r_inplane * M)``.
    """
    mask = np.zeros(
        (spec.m_slices, spec.a_rows, spec.b_cols, spec.t_frames), dtype=np.uint8
    )
    for frame in range(spec.t_frames):
        for ky in make_inplane_rows(spec, frame):
            mask[ky % spec.m_slices, ky, :, frame] = 1
    return mask


def apply_mask(kspace, mask) -> np.ndarray:
    """Elementwise product of k-space data with a binary mask.

    The mask must match the trailing ``(M, a, b, t)`` axes of the data;
    leading coil axes broadcast.  Idempotent for binary masks.
    """
    y = np.asarray(kspace)
    u = np.asarray(mask)
    if y.ndim < u.ndim or y.shape[y.ndim - u.ndim :] != u.shape:
        raise InvalidInput(
            f"mask shape {u.shape} does not match data shape {y.shape}"
        )
    if not np.all((u == 0) | (u == 1)):
        raise InvalidInput("mask values must be 0 or 1")
    return y * u
