"""MR-physics-guided synthesis of complex multi-coil SMS k-space from
magnitude-only dynamic volumes.

Magnitude data carries no phase and no coil structure, so both are
synthesized: per coil, a piecewise-constant phase that follows image
structure (intensity k-means regions get independent Gaussian phase
values, propagated across slices by majority vote over region overlap)
plus a smooth sinusoidal grating that is random per coil but constant
across time and slices; coil sensitivities come from either a circular
coil-ring falloff model or random anisotropic Gaussian blobs, normalized
so the root-sum-of-squares over coils is one at every pixel.

The composed complex multi-coil images R * exp(j*phi) * CSM_c are then
Fourier transformed per slice (the fully sampled reference) and through
the 3D SMS transform plus helical mask (the undersampled measurement).

Every function is deterministic for a fixed seed: random draws use
fixed per-purpose stream tags via :func:`smslab.util.make_rng`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import InvalidConfig, InvalidInput
from .sampling import MaskSpec, apply_mask, embed_sms_mask
from .transforms import fft2, fft3d
from .util import make_rng

__all__ = [
    "SynthConfig",
    "SynthResult",
    "kmeans3d",
    "lloyd_kmeans",
    "sample_cluster_phases",
    "propagate_majority",
    "grating_phase",
    "gaussian_blob",
    "csm_circular",
    "csm_gaussian",
    "synthesize_kspace",
]

# rng stream tags (first key of make_rng); never reuse across purposes
_STREAM_KMEANS = 101
_STREAM_PHASES = 102
_STREAM_GRATING = 103
_STREAM_CSM = 104


@dataclass(frozen=True)
class SynthConfig:
    """Knobs of the synthesis pipeline.

    ``sigma_phase`` defaults to pi/3 so that 99.7% of cluster phase draws
    fall inside [-pi, pi].  Grating amplitude/frequency ranges and the
    coil-model parameters have conventional defaults; ``ring_radius=None``
    places the coil ring at 0.55 * max(a, b) pixels from the FOV center.
    """

    coils: int = 4
    k_clusters: int = 8
    sigma_phase: float = np.pi / 3
    grating_amplitude: Tuple[float, float] = (np.pi / 4, np.pi / 2)
    grating_frequency: Tuple[float, float] = (0.5, 3.0)
    csm_kind: str = "circular"
    ring_radius: Optional[float] = None
    d_min: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.coils < 1:
            raise InvalidConfig(f"coils must be >= 1, got {self.coils}")
        if self.k_clusters < 1:
            raise InvalidConfig(f"k_clusters must be >= 1, got {self.k_clusters}")
        if not self.sigma_phase > 0:
            raise InvalidConfig(f"sigma_phase must be > 0, got {self.sigma_phase}")
        for name in ("grating_amplitude", "grating_frequency"):
            lo, hi = getattr(self, name)
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise InvalidConfig(f"{name} range must satisfy lo < hi, got ({lo}, {hi})")
        if self.csm_kind not in ("circular", "gaussian"):
            raise InvalidConfig(f"csm_kind must be circular or gaussian, got {self.csm_kind!r}")
        if not self.d_min > 0:
            raise InvalidConfig(f"d_min must be > 0, got {self.d_min}")


def _kmeans_pp_init(values: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = values.size
    centroids = np.empty(k, dtype=np.float64)
    centroids[0] = values[rng.integers(n)]
    d2 = (values - centroids[0]) ** 2
    for j in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)
        centroids[j] = values[idx]
        d2 = np.minimum(d2, (values - centroids[j]) ** 2)
    return centroids


def _reseed_empty(values, labels, centroids, d_own, counts):
    # each empty cluster steals the point currently farthest from its
    # centroid; repeats until no cluster is empty
    for _ in range(centroids.size):
        empty = np.flatnonzero(counts == 0)
        if empty.size == 0:
            return
        for cluster in empty:
            far = int(np.argmax(d_own))
            counts[labels[far]] -= 1
            centroids[cluster] = values[far]
            labels[far] = cluster
            counts[cluster] += 1
            d_own[far] = -1.0


def _hartigan_polish(values, labels, k: int, max_sweeps: int = 100):
    # single-point moves with the exact objective delta (Hartigan
    # criterion); Lloyd fixed points are not always single-move optimal
    counts = np.bincount(labels, minlength=k).astype(np.int64)
    sums = np.bincount(labels, weights=values, minlength=k)
    n = values.size
    for _ in range(max_sweeps):
        moved = False
        for i in range(n):
            a = labels[i]
            if counts[a] <= 1:
                continue
            x = values[i]
            mu_a = sums[a] / counts[a]
            gain = counts[a] / (counts[a] - 1.0) * (x - mu_a) ** 2
            best = -1
            best_cost = gain
            for b in range(k):
                if b == a:
                    continue
                mu_b = sums[b] / counts[b]
                cost = counts[b] / (counts[b] + 1.0) * (x - mu_b) ** 2
                if cost < best_cost:
                    best_cost = cost
                    best = b
            if best >= 0:
                sums[a] -= x
                counts[a] -= 1
                sums[best] += x
                counts[best] += 1
                labels[i] = best
                moved = True
        if not moved:
            break
    return labels, sums / counts


def lloyd_kmeans(values, k: int, seed, max_iter: int = 100, rel_tol: float = 1e-6):
    """Seeded 1D k-means: k-means++ init, Lloyd iterations with
    farthest-point reseeding of empty clusters, then a single-point-move
    polish so no single reassignment can decrease the objective.

    Returns ``(labels, centroids, objective_history)`` where the history
    holds the assignment objective of each Lloyd iteration.
    """
    vals = np.asarray(values, dtype=np.float64).ravel()
    if k < 1:
        raise InvalidConfig(f"k must be >= 1, got {k}")
    if k > vals.size:
        raise InvalidConfig(f"k={k} exceeds the number of samples {vals.size}")
    if not np.all(np.isfinite(vals)):
        raise InvalidInput("k-means input contains non-finite values")
    rng = np.random.default_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    centroids = _kmeans_pp_init(vals, k, rng)
    history = []
    prev_obj = np.inf
    labels = np.zeros(vals.size, dtype=np.int64)
    for _ in range(max_iter):
        d2 = (vals[:, None] - centroids[None, :]) ** 2
        labels = np.argmin(d2, axis=1)
        d_own = d2[np.arange(vals.size), labels]
        counts = np.bincount(labels, minlength=k)
        if np.any(counts == 0):
            _reseed_empty(vals, labels, centroids, d_own.copy(), counts)
            d_own = (vals - centroids[labels]) ** 2
        obj = float(d_own.sum())
        history.append(obj)
        sums = np.bincount(labels, weights=vals, minlength=k)
        counts = np.bincount(labels, minlength=k)
        centroids = sums / counts
        if prev_obj - obj <= rel_tol * max(prev_obj, 1e-30) and np.isfinite(prev_obj):
            break
        prev_obj = obj
    labels = np.argmin((vals[:, None] - centroids[None, :]) ** 2, axis=1)
    counts = np.bincount(labels, minlength=k)
    if np.any(counts == 0):
        d_own = (vals - centroids[labels]) ** 2
        _reseed_empty(vals, labels, centroids, d_own, counts)
    labels, centroids = _hartigan_polish(vals, labels, k)
    return labels, centroids, history


def kmeans3d(magnitude, n_clusters: int, seed):
    """Cluster a real (a, b, t) volume by voxel intensity.

    Each voxel is one scalar sample; the labels therefore follow
    structural boundaries in space and time without using coordinates.
    Deterministic for a fixed seed.  Returns ``(labels, centroids)`` with
    labels shaped like the input.
    """
    vol = np.asarray(magnitude, dtype=np.float64)
    if vol.ndim != 3:
        raise InvalidInput(f"expected an (a, b, t) volume, got shape {vol.shape}")
    labels, centroids, _ = lloyd_kmeans(vol.ravel(), n_clusters, seed)
    return labels.reshape(vol.shape), centroids


def sample_cluster_phases(n_clusters: int, coils: int, sigma: float, seed) -> np.ndarray:
    """Independent zero-mean Gaussian phase per (coil, cluster), radians."""
    if not sigma > 0:
        raise InvalidConfig(f"sigma must be > 0, got {sigma}")
    if n_clusters < 1 or coils < 1:
        raise InvalidConfig("n_clusters and coils must be >= 1")
    rng = np.random.default_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    return rng.normal(0.0, sigma, size=(coils, n_clusters))


def propagate_majority(labels_s, labels_0, phases_0) -> np.ndarray:
    """Carry reference-slice cluster phases to another slice's clusters.

    Each cluster of the target slice takes the phase of the reference
    cluster that occurs most often over its voxel footprint; ties go to
    the smallest reference cluster index.  ``phases_0`` may carry leading
    axes (e.g. coils); the cluster axis is last.
    """
    ls = np.asarray(labels_s)
    l0 = np.asarray(labels_0)
    if ls.shape != l0.shape:
        raise InvalidInput(f"label shapes differ: {ls.shape} vs {l0.shape}")
    phases = np.asarray(phases_0, dtype=np.float64)
    k0 = phases.shape[-1]
    if l0.max() >= k0:
        raise InvalidInput(
            f"reference labels reach {int(l0.max())} but only {k0} phases given"
        )
    n_target = int(ls.max()) + 1
    mapping = np.zeros(n_target, dtype=np.int64)
    for q in range(n_target):
        footprint = ls == q
        if not footprint.any():
            mapping[q] = 0
            continue
        counts = np.bincount(l0[footprint].ravel(), minlength=k0)
        mapping[q] = int(np.argmax(counts))
    return np.take(phases, mapping, axis=-1)


def grating_phase(a: int, b: int, coil: int, seed, ranges: Optional[SynthConfig] = None) -> np.ndarray:
    """Smooth sinusoidal phase grating, one fixed (a, b) map per coil.

    Amplitude, the two spatial frequencies (cycles per FOV), and the
    offset are drawn once per (coil, seed) pair; the same map is meant to
    be reused for every frame and every slice of that coil.
    """
    cfg = ranges if ranges is not None else SynthConfig()
    rng = make_rng(_STREAM_GRATING, seed, coil)
    amp = rng.uniform(*cfg.grating_amplitude)
    fx = rng.uniform(*cfg.grating_frequency)
    fy = rng.uniform(*cfg.grating_frequency)
    psi = rng.uniform(0.0, 2.0 * np.pi)
    rows = np.arange(a)[:, None]
    cols = np.arange(b)[None, :]
    return amp * np.sin(2.0 * np.pi * (fx * rows / a + fy * cols / b) + psi)


def _cos_turn(x: float) -> float:
    # exact values at quarter turns keep symmetric coil layouts exact
    frac = x % 1.0
    table = {0.0: 1.0, 0.25: 0.0, 0.5: -1.0, 0.75: 0.0}
    if frac in table:
        return table[frac]
    return float(np.cos(2.0 * np.pi * frac))


def _sin_turn(x: float) -> float:
    return _cos_turn(x - 0.25)


def _rss_normalize(maps: np.ndarray) -> np.ndarray:
    rss = np.sqrt(np.sum(maps**2, axis=0))
    return maps / rss


def csm_circular(coils: int, a: int, b: int,
                 ring_radius: Optional[float] = None, d_min: float = 2.0) -> np.ndarray:
    """Coil maps from a ring of coils around the FOV, shape (C, a, b).

    Coil centers sit equally spaced on a circle around the grid centroid;
    raw sensitivity is ``1 / max(d, d_min)^3`` with d the pixel-to-coil
    distance, then RSS-normalized per pixel.
    """
    if coils < 1:
        raise InvalidConfig(f"coils must be >= 1, got {coils}")
    if not d_min > 0:
        raise InvalidConfig(f"d_min must be > 0, got {d_min}")
    radius = 0.55 * max(a, b) if ring_radius is None else float(ring_radius)
    # offsets relative to the FOV center keep symmetric layouts exact:
    # pixels equidistant from two coils get bitwise-equal distances
    drows = np.arange(a, dtype=np.float64)[:, None] - (a - 1) / 2.0
    dcols = np.arange(b, dtype=np.float64)[None, :] - (b - 1) / 2.0
    maps = np.empty((coils, a, b), dtype=np.float64)
    for c in range(coils):
        turn = c / coils
        d = np.hypot(drows - radius * _cos_turn(turn), dcols - radius * _sin_turn(turn))
        maps[c] = 1.0 / np.maximum(d, d_min) ** 3
    return _rss_normalize(maps)


def gaussian_blob(a: int, b: int, center: Tuple[float, float],
                  sigma_major: float, sigma_minor: float, theta: float) -> np.ndarray:
    """Unnormalized anisotropic 2D Gaussian on the pixel grid."""
    rows = np.arange(a, dtype=np.float64)[:, None] - center[0]
    cols = np.arange(b, dtype=np.float64)[None, :] - center[1]
    u = np.cos(theta) * rows + np.sin(theta) * cols
    v = -np.sin(theta) * rows + np.cos(theta) * cols
    return np.exp(-0.5 * ((u / sigma_major) ** 2 + (v / sigma_minor) ** 2))


def csm_gaussian(coils: int, a: int, b: int, seed,
                 sigma_range: Tuple[float, float] = (0.3, 0.8),
                 ratio_range: Tuple[float, float] = (0.4, 1.0)) -> np.ndarray:
    """Coil maps from random anisotropic Gaussian blobs, shape (C, a, b).

    Per coil: center uniform in a 1.5x FOV box around the grid center,
    major standard deviation in ``sigma_range`` times the FOV, axis ratio
    in ``ratio_range``, rotation in [0, pi).  RSS-normalized per pixel.
    """
    if coils < 1:
        raise InvalidConfig(f"coils must be >= 1, got {coils}")
    rng = make_rng(_STREAM_CSM, seed)
    fov = float(max(a, b))
    center_r = (a - 1) / 2.0
    center_c = (b - 1) / 2.0
    maps = np.empty((coils, a, b), dtype=np.float64)
    for c in range(coils):
        cr = rng.uniform(center_r - 0.75 * a, center_r + 0.75 * a)
        cc = rng.uniform(center_c - 0.75 * b, center_c + 0.75 * b)
        s_major = rng.uniform(*sigma_range) * fov
        ratio = rng.uniform(*ratio_range)
        theta = rng.uniform(0.0, np.pi)
        maps[c] = gaussian_blob(a, b, (cr, cc), s_major, ratio * s_major, theta)
    return _rss_normalize(maps)


@dataclass(frozen=True)
class SynthResult:
    """Products of one synthesis run.

    ``kspace_full`` is the fully sampled per-slice (2D) multi-coil
    k-space used as the supervised reference; ``kspace_undersampled`` is
    the masked 3D-format SMS k-space.  ``phase`` always equals
    ``cluster_phase + grating`` broadcast over slices and frames, unless
    the caller overrode the phase, in which case the components are None.
    """

    kspace_undersampled: np.ndarray  # (C, M, a, b, t) complex
    kspace_full: np.ndarray  # (C, M, a, b, t) complex
    phase: np.ndarray  # (C, M, a, b, t) radians
    csm: np.ndarray  # (C, M, a, b)
    mask: np.ndarray  # (M, a, b, t) uint8
    cluster_phase: Optional[np.ndarray] = None  # (C, M, a, b, t)
    grating: Optional[np.ndarray] = None  # (C, a, b)
    labels: Optional[np.ndarray] = None  # (M, a, b, t) int


def synthesize_kspace(magnitudes, cfg: SynthConfig, mask_spec: MaskSpec,
                      phase: Optional[np.ndarray] = None,
                      csm: Optional[np.ndarray] = None) -> SynthResult:
    """Full synthesis pipeline from per-slice magnitude stacks.

    Steps: per-slice intensity clustering, Gaussian cluster phases for
    slice 0 (per coil), majority-vote propagation to the other slices,
    shared per-coil grating, coil weighting, per-slice 2D k-space (full
    reference) and masked 3D SMS k-space (measurement).  ``phase`` and
    ``csm`` can be injected to bypass the corresponding generators.
    """
    mags = np.asarray(magnitudes, dtype=np.float64)
    if mags.ndim != 4:
        raise InvalidInput(f"expected magnitudes (M, a, b, t), got shape {mags.shape}")
    if not np.all(np.isfinite(mags)):
        raise InvalidInput("magnitudes contain non-finite values")
    m, a, b, t = mags.shape
    if (mask_spec.m_slices, mask_spec.a_rows, mask_spec.b_cols, mask_spec.t_frames) != (m, a, b, t):
        raise InvalidInput(
            f"mask spec grid ({mask_spec.m_slices}, {mask_spec.a_rows}, "
            f"{mask_spec.b_cols}, {mask_spec.t_frames}) does not match data shape {mags.shape}"
        )
    coils = cfg.coils

    cluster_phase = None
    grating = None
    labels = None
    if phase is None:
        labels = np.empty((m, a, b, t), dtype=np.int64)
        for s in range(m):
            labels[s], _ = kmeans3d(mags[s], cfg.k_clusters, make_rng(_STREAM_KMEANS, cfg.seed, s))
        phases0 = sample_cluster_phases(
            cfg.k_clusters, coils, cfg.sigma_phase, make_rng(_STREAM_PHASES, cfg.seed)
        )
        cluster_phase = np.empty((coils, m, a, b, t), dtype=np.float64)
        for s in range(m):
            per_slice = phases0 if s == 0 else propagate_majority(labels[s], labels[0], phases0)
            cluster_phase[:, s] = per_slice[:, labels[s]]
        grating = np.stack(
            [grating_phase(a, b, c, cfg.seed, cfg) for c in range(coils)]
        )
        phase_full = cluster_phase + grating[:, None, :, :, None]
    else:
        phase_full = np.asarray(phase, dtype=np.float64)
        if phase_full.shape != (coils, m, a, b, t):
            raise InvalidInput(
                f"phase override shape {phase_full.shape} does not match "
                f"({coils}, {m}, {a}, {b}, {t})"
            )

    if csm is None:
        if cfg.csm_kind == "circular":
            base = csm_circular(coils, a, b, cfg.ring_radius, cfg.d_min)
        else:
            base = csm_gaussian(coils, a, b, cfg.seed)
        csm_full = np.broadcast_to(base[:, None], (coils, m, a, b)).copy()
    else:
        csm_full = np.asarray(csm, dtype=np.float64)
        if csm_full.shape == (coils, a, b):
            csm_full = np.broadcast_to(csm_full[:, None], (coils, m, a, b)).copy()
        if csm_full.shape != (coils, m, a, b):
            raise InvalidInput(
                f"csm override shape {np.asarray(csm).shape} does not match "
                f"({coils}, {m}, {a}, {b})"
            )

    complex_stack = mags[None] * np.exp(1j * phase_full)  # (C, M, a, b, t)
    coil_images = complex_stack * csm_full[..., None]
    kspace_full = fft2(coil_images)
    mask = embed_sms_mask(mask_spec)
    kspace_us = apply_mask(fft3d(coil_images), mask)
    return SynthResult(
        kspace_undersampled=kspace_us,
        kspace_full=kspace_full,
        phase=phase_full,
        csm=csm_full,
        mask=mask,
        cluster_phase=cluster_phase,
        grating=grating,
        labels=labels,
    )
