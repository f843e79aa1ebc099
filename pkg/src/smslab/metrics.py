"""Image-quality metrics, the composite evaluation loss, and the paired
significance test used by the batch reports.

All image metrics are computed on magnitudes: complex inputs are reduced
with ``abs`` first, real inputs are used as-is.  NMSE is reported both as
a raw ratio and, in CSV reports, scaled by 1e3; the failure flag trips
when the scaled value exceeds 1000, i.e. when the raw ratio exceeds 1.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
import scipy.signal
import scipy.special

from .errors import InvalidConfig, InvalidInput

__all__ = [
    "LossWeights",
    "SequenceMetrics",
    "TTestResult",
    "nmse",
    "psnr",
    "ssim",
    "temporal_tv",
    "loss_eval",
    "fail_flag",
    "paired_ttest",
    "evaluate_sequence",
    "write_report_csv",
    "summarize",
]

REPORT_COLUMNS = ("sequence_id", "nmse_x1e3", "psnr_db", "ssim", "fail")


@dataclass(frozen=True)
class LossWeights:
    """Weights of the composite loss; at least one must be nonzero."""

    w_mse: float
    w_ssim: float
    w_tv: float

    def __post_init__(self):
        for name in ("w_mse", "w_ssim", "w_tv"):
            w = getattr(self, name)
            if not np.isfinite(w) or w < 0:
                raise InvalidConfig(f"{name} must be finite and >= 0, got {w!r}")
        if self.w_mse == 0 and self.w_ssim == 0 and self.w_tv == 0:
            raise InvalidConfig("loss weights must not all be zero")


def _magnitude(arr) -> np.ndarray:
    a = np.asarray(arr)
    if not np.all(np.isfinite(a)):
        raise InvalidInput("input contains non-finite values")
    if np.iscomplexobj(a):
        return np.abs(a)
    return a.astype(np.float64, copy=False)


def _matched_magnitudes(x_hat, x_ref) -> Tuple[np.ndarray, np.ndarray]:
    h = _magnitude(x_hat)
    r = _magnitude(x_ref)
    if h.shape != r.shape:
        raise InvalidInput(f"shape mismatch: {h.shape} vs {r.shape}")
    return h, r


def nmse(x_hat, x_ref) -> float:
    """Normalized mean squared error ||h - r||^2 / ||r||^2."""
    h, r = _matched_magnitudes(x_hat, x_ref)
    denom = float(np.sum(r**2))
    if denom == 0:
        raise InvalidInput("reference has zero energy")
    return float(np.sum((h - r) ** 2)) / denom


def psnr(x_hat, x_ref) -> float:
    """Peak signal-to-noise ratio in dB, ``inf`` for identical inputs."""
    h, r = _matched_magnitudes(x_hat, x_ref)
    peak = float(np.max(np.abs(r)))
    if peak == 0:
        raise InvalidInput("reference has zero peak")
    mse = float(np.mean((h - r) ** 2))
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(peak**2 / mse)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords**2) / (2.0 * sigma**2))
    win = np.outer(g, g)
    return win / win.sum()


def _ssim_frame(img1, img2, data_range, k1, k2, window) -> float:
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    conv = lambda im: scipy.signal.convolve2d(im, window, mode="valid")
    mu1 = conv(img1)
    mu2 = conv(img2)
    mu1_sq = mu1 * mu1
    mu2_sq = mu2 * mu2
    mu12 = mu1 * mu2
    var1 = conv(img1 * img1) - mu1_sq
    var2 = conv(img2 * img2) - mu2_sq
    cov = conv(img1 * img2) - mu12
    num = (2.0 * mu12 + c1) * (2.0 * cov + c2)
    den = (mu1_sq + mu2_sq + c1) * (var1 + var2 + c2)
    return float(np.mean(num / den))


def _frames_2d(mag: np.ndarray):
    if mag.ndim == 2:
        yield mag
    elif mag.ndim == 3:
        for t in range(mag.shape[-1]):
            yield mag[:, :, t]
    elif mag.ndim == 4:
        for s in range(mag.shape[0]):
            for t in range(mag.shape[-1]):
                yield mag[s, :, :, t]
    else:
        raise InvalidInput(f"ssim expects 2D..4D input, got shape {mag.shape}")


def ssim(x_hat, x_ref, k1: float = 0.01, k2: float = 0.03,
         window_size: int = 11, sigma: float = 1.5) -> float:
    """Mean structural similarity over all (slice, frame) 2D images.

    Gaussian-weighted local statistics (default 11x11 window, sigma 1.5)
    over valid window positions; the dynamic range is the global peak
    magnitude of the reference.
    """
    h, r = _matched_magnitudes(x_hat, x_ref)
    if h.ndim == 2:
        a, b = h.shape
    elif h.ndim in (3, 4):
        a, b = h.shape[-3], h.shape[-2]
    else:
        raise InvalidInput(f"ssim expects 2D..4D input, got shape {h.shape}")
    if a < window_size or b < window_size:
        raise InvalidInput(
            f"image plane ({a}, {b}) smaller than the {window_size}x{window_size} ssim window"
        )
    data_range = float(np.max(np.abs(r)))
    if data_range == 0:
        data_range = 1.0
    window = _gaussian_window(window_size, sigma)
    scores = [
        _ssim_frame(f1, f2, data_range, k1, k2, window)
        for f1, f2 in zip(_frames_2d(h), _frames_2d(r))
    ]
    return float(np.mean(scores))


def temporal_tv(x) -> float:
    """Sum over voxels of absolute frame-to-frame differences (complex
    differences contribute their modulus)."""
    arr = np.asarray(x)
    if arr.ndim < 1 or arr.shape[-1] < 2:
        raise InvalidInput("temporal TV needs at least 2 frames on the last axis")
    if not np.all(np.isfinite(arr)):
        raise InvalidInput("input contains non-finite values")
    return float(np.sum(np.abs(np.diff(arr, axis=-1))))


def loss_eval(x_hat, x_ref, weights: LossWeights) -> float:
    """Composite loss: w_mse * MSE + w_ssim * (1 - SSIM) + w_tv * TV_t(x_hat).

    Terms with zero weight are skipped entirely, so e.g. small validation
    volumes never hit the SSIM window-size requirement when w_ssim is 0.
    """
    if not isinstance(weights, LossWeights):
        weights = LossWeights(*weights)
    total = 0.0
    if weights.w_mse > 0:
        h, r = _matched_magnitudes(x_hat, x_ref)
        total += weights.w_mse * float(np.mean((h - r) ** 2))
    if weights.w_ssim > 0:
        total += weights.w_ssim * (1.0 - ssim(x_hat, x_ref))
    if weights.w_tv > 0:
        total += weights.w_tv * temporal_tv(x_hat)
    return total


def fail_flag(nmse_ratio: float) -> bool:
    """True iff the NMSE ratio exceeds 1.0, i.e. 1000 in x1e3 units."""
    return bool(nmse_ratio > 1.0)


@dataclass(frozen=True)
class TTestResult:
    t: float
    p: float

    def __iter__(self):
        yield self.t
        yield self.p


def paired_ttest(samples_a, samples_b) -> TTestResult:
    """Two-sided paired Student t-test on matched samples.

    Uses the sample standard deviation (n-1 denominator) and the exact
    t distribution via the regularized incomplete beta function.  Zero
    variance differences degenerate to (t=0, p=1) when the mean is zero
    and to (t=+-inf, p=0) otherwise.
    """
    a = np.asarray(samples_a, dtype=np.float64).ravel()
    b = np.asarray(samples_b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise InvalidInput(f"sample lengths differ: {a.size} vs {b.size}")
    n = a.size
    if n < 2:
        raise InvalidInput(f"paired t-test needs n >= 2 samples, got {n}")
    d = a - b
    mean = float(np.mean(d))
    sd = float(np.std(d, ddof=1))
    if sd == 0:
        if mean == 0:
            return TTestResult(0.0, 1.0)
        return TTestResult(math.copysign(math.inf, mean), 0.0)
    t = mean / (sd / math.sqrt(n))
    nu = n - 1
    p = float(scipy.special.betainc(nu / 2.0, 0.5, nu / (nu + t * t)))
    return TTestResult(t, p)


@dataclass(frozen=True)
class SequenceMetrics:
    sequence_id: str
    nmse: float
    psnr_db: float
    ssim: float
    fail: bool


def evaluate_sequence(sequence_id: str, x_hat, x_ref) -> SequenceMetrics:
    """All metrics for one reconstructed sequence against its reference."""
    ratio = nmse(x_hat, x_ref)
    return SequenceMetrics(
        sequence_id=sequence_id,
        nmse=ratio,
        psnr_db=psnr(x_hat, x_ref),
        ssim=ssim(x_hat, x_ref),
        fail=fail_flag(ratio),
    )


def write_report_csv(path, rows: Sequence[SequenceMetrics]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    row.sequence_id,
                    repr(row.nmse * 1e3),
                    repr(row.psnr_db),
                    repr(row.ssim),
                    int(row.fail),
                ]
            )


def _mean_std(values) -> Tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    return float(np.mean(arr)), float(np.std(arr))


def summarize(rows: Sequence[SequenceMetrics]) -> str:
    """Aggregate mean +/- std text summary over sequences."""
    if not rows:
        raise InvalidInput("no sequences to summarize")
    nm, ns = _mean_std([r.nmse * 1e3 for r in rows])
    pm, ps = _mean_std([r.psnr_db for r in rows])
    sm, ss = _mean_std([r.ssim for r in rows])
    fails = sum(r.fail for r in rows)
    lines = [
        f"sequences: {len(rows)}",
        f"nmse_x1e3: {nm:.4g} +/- {ns:.4g}",
        f"psnr_db:   {pm:.4g} +/- {ps:.4g}",
        f"ssim:      {sm:.6g} +/- {ss:.4g}",
        f"fail:      {fails}/{len(rows)} ({100.0 * fails / len(rows):.1f}%)",
    ]
    return "\n".join(lines)
