"""Deterministic dynamic phantoms standing in for clinical cine and
first-pass perfusion magnitude data.

Each stack shares one smooth body ellipse across its slices (the common
anatomy every simultaneously excited slice sees) while the internal
structures, a bright ring with a central pool plus two small blobs, are
drawn per slice, so the slices of a stack are clearly different and
inter-slice ghosts are easy to spot.  Cine phantoms animate geometry:
the pool radius oscillates with a fixed frame period.  Perfusion
phantoms keep geometry fixed and animate intensity: the pool (chamber)
follows a gamma-variate enhancement curve and the ring (muscle) follows
a delayed, weaker copy.

All values are in [0, 1] and every generator is a pure function of its
spec: identical specs give bit-identical stacks on any machine.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfig
from .util import make_rng

__all__ = ["PhantomSpec", "bolus_curve", "gen_cine_phantom", "gen_fpp_phantom"]

_STREAM_CINE = 201
_STREAM_FPP = 202


@dataclass(frozen=True)
class PhantomSpec:
    mode: str  # "cine" | "fpp"
    m_slices: int
    a_rows: int
    b_cols: int
    t_frames: int
    seed: int = 0
    # cine
    motion_amplitude: float = 0.12  # fraction of the resting pool radius
    motion_period: int = 8  # frames per cycle
    # fpp (gamma-variate enhancement)
    bolus_t0: float = 1.0  # arrival frame
    bolus_alpha: float = 2.0
    bolus_beta: float = 1.5
    bolus_peak: float = 0.45
    myo_delay: float = 2.0  # frames the muscle lags the chamber

    def __post_init__(self):
        if self.mode not in ("cine", "fpp"):
            raise InvalidConfig(f"mode must be cine or fpp, got {self.mode!r}")
        if self.m_slices < 1 or self.a_rows < 1 or self.b_cols < 1:
            raise InvalidConfig(
                f"dims must be >= 1, got ({self.m_slices}, {self.a_rows}, {self.b_cols})"
            )
        if self.t_frames < 2:
            raise InvalidConfig(f"t_frames must be >= 2, got {self.t_frames}")
        if self.motion_amplitude < 0:
            raise InvalidConfig(f"motion_amplitude must be >= 0, got {self.motion_amplitude}")
        if self.motion_period < 1:
            raise InvalidConfig(f"motion_period must be >= 1, got {self.motion_period}")
        if not (self.bolus_alpha > 0 and self.bolus_beta > 0):
            raise InvalidConfig(
                f"bolus alpha/beta must be > 0, got ({self.bolus_alpha}, {self.bolus_beta})"
            )
        if self.bolus_peak < 0:
            raise InvalidConfig(f"bolus_peak must be >= 0, got {self.bolus_peak}")
        if self.myo_delay < 0:
            raise InvalidConfig(f"myo_delay must be >= 0, got {self.myo_delay}")


def bolus_curve(tau, t0: float, alpha: float, beta: float, peak: float) -> np.ndarray:
    """Gamma-variate enhancement, zero up to t0 and peaking at t0 + alpha*beta.

    Normalized so the continuous-time maximum equals ``peak``:
    ``peak * ((tau - t0) / (alpha * beta))**alpha * exp(alpha - (tau - t0)/beta)``.
    """
    tau = np.asarray(tau, dtype=np.float64)
    dt = tau - t0
    out = np.zeros_like(dt)
    rising = dt > 0
    out[rising] = peak * (dt[rising] / (alpha * beta)) ** alpha * np.exp(
        alpha - dt[rising] / beta
    )
    return out


def _soft_ellipse(a, b, center, semi_r, semi_c, theta=0.0, edge=1.0):
    """Anti-aliased ellipse mask in [0, 1] with an ``edge``-pixel ramp."""
    rows = np.arange(a, dtype=np.float64)[:, None] - center[0]
    cols = np.arange(b, dtype=np.float64)[None, :] - center[1]
    u = np.cos(theta) * rows + np.sin(theta) * cols
    v = -np.sin(theta) * rows + np.cos(theta) * cols
    rho = np.sqrt((u / semi_r) ** 2 + (v / semi_c) ** 2)
    scale = min(semi_r, semi_c) / edge
    return np.clip((1.0 - rho) * scale + 0.5, 0.0, 1.0)


def _paint(canvas, mask, intensity):
    return canvas * (1.0 - mask) + intensity * mask


def _body_geometry(rng, a, b):
    """One smooth bright body per stack, shared by all of its slices."""
    center = (
        (a - 1) / 2.0 + rng.uniform(-0.015, 0.015) * a,
        (b - 1) / 2.0 + rng.uniform(-0.015, 0.015) * b,
    )
    semi = (0.45 * a * rng.uniform(0.97, 1.03), 0.47 * b * rng.uniform(0.97, 1.03))
    return center, semi


def _slice_internals(rng, a, b, body_center):
    """Per-slice ring, pool, and blob layout."""
    ring_center = (
        body_center[0] + rng.uniform(-0.08, 0.08) * a,
        body_center[1] + rng.uniform(-0.08, 0.08) * b,
    )
    ring_outer = 0.13 * min(a, b) * rng.uniform(0.85, 1.15)
    blobs = []
    for _ in range(2):
        blobs.append(
            (
                (
                    body_center[0] + rng.uniform(-0.20, 0.20) * a,
                    body_center[1] + rng.uniform(-0.20, 0.20) * b,
                ),
                (0.045 * a * rng.uniform(0.7, 1.3), 0.045 * b * rng.uniform(0.7, 1.3)),
                rng.uniform(0.9, 1.1),
            )
        )
    return ring_center, ring_outer, blobs


def gen_cine_phantom(spec: PhantomSpec) -> np.ndarray:
    """Motion phantom, shape (M, a, b, t), values in [0, 1]."""
    if spec.mode != "cine":
        raise InvalidConfig(f"expected mode cine, got {spec.mode!r}")
    m, a, b, t = spec.m_slices, spec.a_rows, spec.b_cols, spec.t_frames
    out = np.zeros((m, a, b, t), dtype=np.float64)
    period = int(spec.motion_period)
    body_center, body_semi = _body_geometry(make_rng(_STREAM_CINE, spec.seed), a, b)
    body = _soft_ellipse(a, b, body_center, *body_semi, edge=3.0)
    for s in range(m):
        rng = make_rng(_STREAM_CINE, spec.seed, s)
        ring_center, ring_outer, blobs = _slice_internals(rng, a, b, body_center)
        ring = _soft_ellipse(a, b, ring_center, ring_outer, ring_outer)
        blob_masks = [
            (_soft_ellipse(a, b, c, *semi), 0.52 * gain) for c, semi, gain in blobs
        ]
        inner0 = 0.55 * ring_outer
        for k in range(t):
            # the (k mod period) argument makes frames one period apart
            # bit-identical and amplitude 0 an exactly static sequence
            phase = 2.0 * np.pi * ((k % period) / period)
            inner = inner0 * (1.0 + spec.motion_amplitude * np.sin(phase))
            inner = min(inner, 0.95 * ring_outer)
            pool = _soft_ellipse(a, b, ring_center, inner, inner)
            frame = _paint(np.zeros((a, b)), body, 0.60)
            for mask, intensity in blob_masks:
                frame = _paint(frame, mask, intensity)
            frame = _paint(frame, ring, 0.78)
            frame = _paint(frame, pool, 0.42)
            out[s, :, :, k] = frame
    return out


def gen_fpp_phantom(spec: PhantomSpec) -> np.ndarray:
    """Contrast-passage phantom, shape (M, a, b, t), values in [0, 1].

    Geometry is static; the pool (chamber) enhances first, the ring
    (muscle) follows after ``myo_delay`` frames with half the peak.
    """
    if spec.mode != "fpp":
        raise InvalidConfig(f"expected mode fpp, got {spec.mode!r}")
    m, a, b, t = spec.m_slices, spec.a_rows, spec.b_cols, spec.t_frames
    out = np.zeros((m, a, b, t), dtype=np.float64)
    frames = np.arange(t, dtype=np.float64)
    chamber_curve = bolus_curve(
        frames, spec.bolus_t0, spec.bolus_alpha, spec.bolus_beta, spec.bolus_peak
    )
    myo_curve = bolus_curve(
        frames,
        spec.bolus_t0 + spec.myo_delay,
        spec.bolus_alpha,
        spec.bolus_beta,
        0.5 * spec.bolus_peak,
    )
    body_center, body_semi = _body_geometry(make_rng(_STREAM_FPP, spec.seed), a, b)
    body = _soft_ellipse(a, b, body_center, *body_semi, edge=3.0)
    for s in range(m):
        rng = make_rng(_STREAM_FPP, spec.seed, s)
        ring_center, ring_outer, blobs = _slice_internals(rng, a, b, body_center)
        ring = _soft_ellipse(a, b, ring_center, ring_outer, ring_outer)
        pool = _soft_ellipse(a, b, ring_center, 0.55 * ring_outer, 0.55 * ring_outer)
        blob_masks = [
            (_soft_ellipse(a, b, c, *semi), 0.40 * gain) for c, semi, gain in blobs
        ]
        myo_base = 0.30
        pool_base = 0.15
        for k in range(t):
            frame = _paint(np.zeros((a, b)), body, 0.45)
            for mask, intensity in blob_masks:
                frame = _paint(frame, mask, intensity)
            frame = _paint(frame, ring, min(myo_base + myo_curve[k], 1.0))
            frame = _paint(frame, pool, min(pool_base + chamber_curve[k], 1.0))
            out[s, :, :, k] = frame
    return out
