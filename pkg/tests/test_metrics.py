import math

import numpy as np
import pytest
import scipy.stats

from smslab import (
    InvalidConfig,
    InvalidInput,
    LossWeights,
    fail_flag,
    loss_eval,
    nmse,
    paired_ttest,
    psnr,
    ssim,
    temporal_tv,
)
from smslab.metrics import (
    SequenceMetrics,
    evaluate_sequence,
    summarize,
    write_report_csv,
)


def _stack(seed=0, shape=(2, 16, 16, 3)):
    rng = np.random.default_rng(seed)
    return rng.uniform(0.0, 1.0, size=shape)


# -------------------------------------------------------------------- nmse


def test_nmse_identical_zero():
    x = _stack()
    assert nmse(x, x) == 0.0


def test_nmse_double_is_one():
    x = _stack(1)
    assert abs(nmse(2 * x, x) - 1.0) < 1e-12


def test_nmse_zero_estimate_is_one():
    x = _stack(2)
    assert abs(nmse(np.zeros_like(x), x) - 1.0) < 1e-12


def test_nmse_zero_reference_rejected():
    with pytest.raises(InvalidInput):
        nmse(_stack(3), np.zeros((2, 16, 16, 3)))


def test_nmse_complex_uses_magnitudes():
    x = _stack(4)
    phase = np.exp(1j * np.linspace(0, 1, x.size).reshape(x.shape))
    assert nmse(x * phase, x) < 1e-25


# -------------------------------------------------------------------- psnr


def test_psnr_identical_is_inf():
    x = _stack(5)
    assert psnr(x, x) == math.inf


def test_psnr_twenty_db_construction():
    x = _stack(6)
    peak = float(np.max(x))
    x_hat = x + peak / 10.0  # MSE = peak^2 / 100
    assert abs(psnr(x_hat, x) - 20.0) < 1e-12


def test_psnr_scale_invariant():
    x = _stack(7)
    y = _stack(8)
    assert abs(psnr(2 * y, 2 * x) - psnr(y, x)) < 1e-12


# -------------------------------------------------------------------- ssim


def test_ssim_identical_is_one():
    x = _stack(9)
    assert abs(ssim(x, x) - 1.0) < 1e-12


def test_ssim_constant_images_closed_form():
    mu1, mu2 = 0.4, 0.7
    a = np.full((16, 16), mu1)
    b = np.full((16, 16), mu2)
    c1 = (0.01 * mu2) ** 2  # data range is the reference peak
    expected = (2 * mu1 * mu2 + c1) / (mu1**2 + mu2**2 + c1)
    assert abs(ssim(a, b) - expected) < 1e-12


def test_ssim_negated_near_flat_image_is_negative():
    rows, cols = np.meshgrid(np.arange(16), np.arange(16), indexing="ij")
    img = 0.5 + 0.005 * np.sin(2 * np.pi * rows / 16) * np.cos(2 * np.pi * cols / 16)
    value = ssim(-img, img)
    assert value < 0
    # direct-formula oracle on the same sample
    half = 5
    coords = np.arange(11) - half
    g = np.exp(-(coords**2) / (2 * 1.5**2))
    win = np.outer(g, g)
    win /= win.sum()
    peak = np.max(np.abs(img))
    c1, c2 = (0.01 * peak) ** 2, (0.03 * peak) ** 2
    scores = []
    for i in range(half, 16 - half):
        for j in range(half, 16 - half):
            p1 = -img[i - half : i + half + 1, j - half : j + half + 1]
            p2 = img[i - half : i + half + 1, j - half : j + half + 1]
            mu1 = np.sum(win * p1)
            mu2 = np.sum(win * p2)
            v1 = np.sum(win * p1 * p1) - mu1**2
            v2 = np.sum(win * p2 * p2) - mu2**2
            cov = np.sum(win * p1 * p2) - mu1 * mu2
            scores.append(
                ((2 * mu1 * mu2 + c1) * (2 * cov + c2))
                / ((mu1**2 + mu2**2 + c1) * (v1 + v2 + c2))
            )
    assert abs(value - np.mean(scores)) < 1e-10


def test_ssim_window_size_guard():
    with pytest.raises(InvalidInput):
        ssim(np.ones((8, 8)), np.ones((8, 8)))


# -------------------------------------------------------------- temporal tv


def test_temporal_tv_static_zero():
    x = np.ones((2, 4, 4, 5))
    assert temporal_tv(x) == 0.0


def test_temporal_tv_by_hand():
    trace = np.array([0.0, 3.0, 1.0]).reshape(1, 1, 1, 3)
    assert temporal_tv(trace) == 5.0


def test_temporal_tv_homogeneous():
    x = _stack(10)
    assert abs(temporal_tv(2 * x) - 2 * temporal_tv(x)) < 1e-9


def test_temporal_tv_complex_modulus():
    x = np.array([1.0, 1.0j]).reshape(1, 1, 1, 2)
    assert abs(temporal_tv(x) - np.sqrt(2)) < 1e-12


def test_temporal_tv_needs_two_frames():
    with pytest.raises(InvalidInput):
        temporal_tv(np.ones((2, 4, 4, 1)))


# -------------------------------------------------------------------- loss


def test_loss_identical_no_tv_is_zero():
    x = _stack(11)
    assert loss_eval(x, x, LossWeights(1.0, 1.0, 0.0)) == 0.0


def test_loss_mse_only_equals_mse():
    x, y = _stack(12), _stack(13)
    expected = float(np.mean((x - y) ** 2))
    assert abs(loss_eval(x, y, LossWeights(1.0, 0.0, 0.0)) - expected) < 1e-15


def test_loss_ssim_only_identical_zero():
    x = _stack(14)
    assert loss_eval(x, x, LossWeights(0.0, 1.0, 0.0)) < 1e-12


def test_loss_all_zero_weights_rejected():
    with pytest.raises(InvalidConfig):
        LossWeights(0.0, 0.0, 0.0)


# -------------------------------------------------------------------- fail


def test_fail_flag_threshold():
    assert fail_flag(1.001) is True
    assert fail_flag(0.0019) is False  # well below the threshold ratio of 1
    assert fail_flag(1.0) is False  # strict inequality


# ------------------------------------------------------------------ t-test


def test_ttest_identical_samples():
    out = paired_ttest([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert out.t == 0.0 and out.p == 1.0


def test_ttest_hand_computation():
    a = np.array([2.0, 4.0, 6.0, 8.0, 10.0])
    b = a - np.array([1.0, 2.0, 3.0, 4.0, 5.0])  # d = (1, 2, 3, 4, 5)
    out = paired_ttest(a, b)
    assert abs(out.t - 3.0 / (math.sqrt(2.5) / math.sqrt(5))) < 1e-12
    assert abs(out.t - 4.242640687) < 1e-6
    assert abs(out.p - 0.0132) < 1e-3


def test_ttest_matches_scipy():
    rng = np.random.default_rng(15)
    a = rng.normal(size=12)
    b = a + rng.normal(0.3, 0.5, size=12)
    ours = paired_ttest(a, b)
    ref = scipy.stats.ttest_rel(a, b)
    assert abs(ours.t - ref.statistic) < 1e-10
    assert abs(ours.p - ref.pvalue) < 1e-10


def test_ttest_swap_negates_t():
    rng = np.random.default_rng(16)
    a = rng.normal(size=6)
    b = rng.normal(size=6)
    fwd = paired_ttest(a, b)
    rev = paired_ttest(b, a)
    assert abs(fwd.t + rev.t) < 1e-12
    assert abs(fwd.p - rev.p) < 1e-12


def test_ttest_degenerate_cases():
    same_shift = paired_ttest([2.0, 3.0], [1.0, 2.0])  # constant nonzero diff
    assert same_shift.p == 0.0 and math.isinf(same_shift.t)
    with pytest.raises(InvalidInput):
        paired_ttest([1.0], [2.0])
    with pytest.raises(InvalidInput):
        paired_ttest([1.0, 2.0], [1.0, 2.0, 3.0])


# ----------------------------------------------------------------- reports


def test_evaluate_and_report_csv(tmp_path):
    x = _stack(17)
    noisy = x + 0.01
    row = evaluate_sequence("seq0", noisy, x)
    assert isinstance(row, SequenceMetrics)
    assert row.fail is False
    path = tmp_path / "report.csv"
    write_report_csv(path, [row])
    text = path.read_text().splitlines()
    assert text[0] == "sequence_id,nmse_x1e3,psnr_db,ssim,fail"
    assert text[1].startswith("seq0,")
    summary = summarize([row, row])
    assert "sequences: 2" in summary and "psnr_db" in summary


def test_metrics_frame_permutation_consistency():
    x = _stack(18)
    y = _stack(19)
    perm = [2, 0, 1]
    assert abs(nmse(y, x) - nmse(y[..., perm], x[..., perm])) < 1e-12
    assert abs(psnr(y, x) - psnr(y[..., perm], x[..., perm])) < 1e-12
    assert abs(ssim(y, x) - ssim(y[..., perm], x[..., perm])) < 1e-12
