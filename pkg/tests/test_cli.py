import csv

import numpy as np
import pytest

from smslab import read_metadata, read_volume
from smslab.cli import main


def run(*argv):
    return main(list(argv))


def test_end_to_end_identity_nmse_zero(tmp_path, capsys):
    """Fully sampled single-slice pipeline: phantom, synth, zero-filled
    recon, eval; the reconstruction is the phantom up to file precision."""
    ph = tmp_path / "ph"
    sy = tmp_path / "sy"
    rc = tmp_path / "rc"
    ev = tmp_path / "ev"
    assert run("phantom", "--mode", "cine", "--slices", "1", "--rows", "16",
               "--cols", "16", "--frames", "3", "--seed", "3", "--out", str(ph)) == 0
    assert run("synth", "--magnitudes", str(ph / "phantom.cxv"), "--coils", "1",
               "--clusters", "3", "--r-inplane", "1", "--out", str(sy)) == 0
    assert run("recon", "--kspace", str(sy / "kspace_us.cxv"), "--mask",
               str(sy / "mask.cxv"), "--method", "zero_filled", "--png-every", "0",
               "--out", str(rc)) == 0
    assert run("eval", "--recon", str(rc / "recon.cxv"), "--reference",
               str(ph / "phantom.cxv"), "--out", str(ev)) == 0
    with open(ev / "report.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1
    assert float(rows[0]["nmse_x1e3"]) < 1e-7
    assert rows[0]["fail"] == "0"


def test_phantom_writes_expected_artifacts(tmp_path):
    out = tmp_path / "ph"
    assert run("phantom", "--mode", "fpp", "--slices", "2", "--rows", "12",
               "--cols", "12", "--frames", "4", "--out", str(out)) == 0
    vol = read_volume(out / "phantom.cxv")
    assert vol.shape == (2, 12, 12, 4)
    assert vol.dtype == np.float32
    meta = read_metadata(out / "phantom.meta")
    assert meta["mode"] == "fpp"
    assert (out / "config.txt").exists()


def test_mask_total_acceleration_recorded(tmp_path):
    out = tmp_path / "mk"
    assert run("mask", "--r-inplane", "2", "--sms", "2", "--rows", "8",
               "--cols", "4", "--frames", "2", "--out", str(out)) == 0
    meta = read_metadata(out / "mask.meta")
    assert meta["total_acceleration"] == "4"
    mask = read_volume(out / "mask.cxv")
    assert mask.dtype == np.uint8
    assert mask.sum() * 4 == mask.size


def test_recon_cascade_n_iter_flag(tmp_path):
    ph, sy, rc = tmp_path / "ph", tmp_path / "sy", tmp_path / "rc"
    run("phantom", "--slices", "2", "--rows", "12", "--cols", "12", "--frames", "3",
        "--out", str(ph))
    run("synth", "--magnitudes", str(ph / "phantom.cxv"), "--coils", "1",
        "--clusters", "3", "--r-inplane", "2", "--out", str(sy))
    assert run("recon", "--kspace", str(sy / "kspace_us.cxv"), "--mask",
               str(sy / "mask.cxv"), "--method", "cascade", "--n-iter", "5",
               "--png-every", "0", "--out", str(rc)) == 0
    assert read_metadata(rc / "recon.meta")["n_iter"] == "5"


def test_invalid_n_iter_exits_2_naming_key(tmp_path, capsys):
    ph, sy = tmp_path / "ph", tmp_path / "sy"
    run("phantom", "--slices", "1", "--rows", "12", "--cols", "12", "--frames", "2",
        "--out", str(ph))
    run("synth", "--magnitudes", str(ph / "phantom.cxv"), "--coils", "1",
        "--clusters", "2", "--r-inplane", "1", "--out", str(sy))
    code = run("recon", "--kspace", str(sy / "kspace_us.cxv"), "--mask",
               str(sy / "mask.cxv"), "--n-iter", "-1", "--out", str(tmp_path / "x"))
    captured = capsys.readouterr()
    assert code == 2
    assert "n_iter" in captured.err


def test_unknown_flag_exits_2(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run("recon", "--does-not-exist", "1", "--out", str(tmp_path / "x"))
    assert exc.value.code == 2


def test_missing_input_exits_1_with_path(tmp_path, capsys):
    code = run("recon", "--kspace", str(tmp_path / "nope.cxv"), "--mask",
               str(tmp_path / "nope2.cxv"), "--out", str(tmp_path / "x"))
    captured = capsys.readouterr()
    assert code == 1
    assert "nope.cxv" in captured.err


def test_shape_mismatch_exits_1_naming_both(tmp_path, capsys):
    ph, sy, mk = tmp_path / "ph", tmp_path / "sy", tmp_path / "mk"
    run("phantom", "--slices", "2", "--rows", "8", "--cols", "8", "--frames", "2",
        "--out", str(ph))
    run("synth", "--magnitudes", str(ph / "phantom.cxv"), "--coils", "1",
        "--clusters", "2", "--r-inplane", "2", "--out", str(sy))
    run("mask", "--r-inplane", "2", "--sms", "3", "--rows", "8", "--cols", "8",
        "--frames", "2", "--out", str(mk))
    code = run("recon", "--kspace", str(sy / "kspace_us.cxv"), "--mask",
               str(mk / "mask.cxv"), "--out", str(tmp_path / "x"))
    captured = capsys.readouterr()
    assert code == 1
    assert "(3, 8, 8, 2)" in captured.err and "(1, 2, 8, 8, 2)" in captured.err


def test_config_echo_reproduces_byte_identical(tmp_path):
    ph = tmp_path / "ph"
    run("phantom", "--slices", "2", "--rows", "12", "--cols", "12", "--frames", "3",
        "--seed", "9", "--out", str(ph))
    ph2 = tmp_path / "ph2"
    assert run("phantom", "--config", str(ph / "config.txt"), "--out", str(ph2)) == 0
    assert (ph / "phantom.cxv").read_bytes() == (ph2 / "phantom.cxv").read_bytes()


def test_synth_config_echo_reproduces_byte_identical(tmp_path):
    ph, sy, sy2 = tmp_path / "ph", tmp_path / "sy", tmp_path / "sy2"
    run("phantom", "--slices", "2", "--rows", "12", "--cols", "12", "--frames", "3",
        "--out", str(ph))
    assert run("synth", "--magnitudes", str(ph / "phantom.cxv"), "--coils", "2",
               "--clusters", "3", "--csm", "gaussian", "--r-inplane", "2",
               "--seed", "4", "--out", str(sy)) == 0
    assert run("synth", "--config", str(sy / "config.txt"), "--out", str(sy2)) == 0
    for name in ("kspace_us.cxv", "kspace_full.cxv", "phase.cxv", "csm.cxv", "mask.cxv"):
        assert (sy / name).read_bytes() == (sy2 / name).read_bytes()


def test_config_file_flags_override(tmp_path):
    cfg = tmp_path / "cfg.txt"
    cfg.write_text("rows = 12\ncols = 12\nframes = 3\nslices = 1\nseed = 4\n")
    out = tmp_path / "ph"
    assert run("phantom", "--config", str(cfg), "--seed", "5", "--out", str(out)) == 0
    assert read_metadata(out / "phantom.meta")["seed"] == "5"
    echoed = read_metadata(out / "config.txt")
    assert echoed["seed"] == "5"
    assert echoed["rows"] == "12"


def test_config_unknown_key_exits_2(tmp_path):
    cfg = tmp_path / "cfg.txt"
    cfg.write_text("rows = 12\nbogus_key = 3\n")
    with pytest.raises(SystemExit) as exc:
        run("phantom", "--config", str(cfg), "--out", str(tmp_path / "x"))
    assert exc.value.code == 2


def test_config_wrong_subcommand_exits_2(tmp_path):
    ph = tmp_path / "ph"
    run("phantom", "--slices", "1", "--rows", "12", "--cols", "12", "--frames", "2",
        "--out", str(ph))
    with pytest.raises(SystemExit) as exc:
        run("mask", "--config", str(ph / "config.txt"), "--out", str(tmp_path / "x"))
    assert exc.value.code == 2


def test_missing_required_out_exits_2():
    with pytest.raises(SystemExit) as exc:
        run("phantom", "--rows", "8")
    assert exc.value.code == 2


def test_threads_env_does_not_change_bytes(tmp_path, monkeypatch):
    ph, sy = tmp_path / "ph", tmp_path / "sy"
    run("phantom", "--slices", "2", "--rows", "16", "--cols", "16", "--frames", "4",
        "--out", str(ph))
    run("synth", "--magnitudes", str(ph / "phantom.cxv"), "--coils", "2",
        "--clusters", "3", "--r-inplane", "2", "--out", str(sy))
    outs = []
    for threads in ("1", "3"):
        monkeypatch.setenv("SMSLAB_THREADS", threads)
        rc = tmp_path / f"rc{threads}"
        assert run("recon", "--kspace", str(sy / "kspace_us.cxv"), "--mask",
                   str(sy / "mask.cxv"), "--method", "cascade", "--n-iter", "3",
                   "--png-every", "0", "--out", str(rc)) == 0
        outs.append((rc / "recon.cxv").read_bytes())
    assert outs[0] == outs[1]


def test_recon_pngs_and_error_maps(tmp_path):
    ph, sy, rc = tmp_path / "ph", tmp_path / "sy", tmp_path / "rc"
    run("phantom", "--slices", "2", "--rows", "16", "--cols", "16", "--frames", "2",
        "--out", str(ph))
    run("synth", "--magnitudes", str(ph / "phantom.cxv"), "--coils", "1",
        "--clusters", "3", "--r-inplane", "2", "--out", str(sy))
    assert run("recon", "--kspace", str(sy / "kspace_us.cxv"), "--mask",
               str(sy / "mask.cxv"), "--method", "zero_filled",
               "--reference", str(ph / "phantom.cxv"), "--err-scale", "4",
               "--out", str(rc)) == 0
    assert (rc / "mag_s00_t000.png").exists()
    assert (rc / "mag_s01_t001.png").exists()
    assert (rc / "err_s00_t000_x4.png").exists()


def test_eval_two_methods_ttest(tmp_path):
    ph, sy = tmp_path / "ph", tmp_path / "sy"
    recs_a, recs_b, refs = [], [], []
    for seed in range(3):
        phs = tmp_path / f"ph{seed}"
        sys_ = tmp_path / f"sy{seed}"
        rca = tmp_path / f"rca{seed}"
        rcb = tmp_path / f"rcb{seed}"
        run("phantom", "--slices", "2", "--rows", "16", "--cols", "16",
            "--frames", "4", "--seed", str(seed), "--out", str(phs))
        run("synth", "--magnitudes", str(phs / "phantom.cxv"), "--coils", "1",
            "--clusters", "3", "--r-inplane", "2", "--out", str(sys_))
        run("recon", "--kspace", str(sys_ / "kspace_us.cxv"), "--mask",
            str(sys_ / "mask.cxv"), "--method", "cascade", "--n-iter", "4",
            "--w-t", "0.1", "--png-every", "0", "--out", str(rca))
        run("recon", "--kspace", str(sys_ / "kspace_us.cxv"), "--mask",
            str(sys_ / "mask.cxv"), "--method", "zero_filled", "--png-every", "0",
            "--out", str(rcb))
        recs_a.append(str(rca / "recon.cxv"))
        recs_b.append(str(rcb / "recon.cxv"))
        refs.append(str(phs / "phantom.cxv"))
    ev = tmp_path / "ev"
    assert run("eval", "--recon", ",".join(recs_a), "--recon-b", ",".join(recs_b),
               "--reference", ",".join(refs), "--out", str(ev)) == 0
    assert (ev / "report.csv").exists()
    assert (ev / "report_b.csv").exists()
    text = (ev / "ttest.txt").read_text()
    assert "psnr_db" in text and "p = " in text


def test_gridsearch_writes_table_and_best(tmp_path):
    ph, sy, gs = tmp_path / "ph", tmp_path / "sy", tmp_path / "gs"
    run("phantom", "--slices", "2", "--rows", "12", "--cols", "12", "--frames", "3",
        "--out", str(ph))
    run("synth", "--magnitudes", str(ph / "phantom.cxv"), "--coils", "1",
        "--clusters", "3", "--r-inplane", "2", "--out", str(sy))
    assert run("gridsearch", "--kspace", str(sy / "kspace_us.cxv"), "--mask",
               str(sy / "mask.cxv"), "--reference", str(ph / "phantom.cxv"),
               "--lambdas", "1.0", "--w-ts", "0.0,0.05", "--n-outer", "4",
               "--out", str(gs)) == 0
    lines = (gs / "gridsearch.csv").read_text().splitlines()
    assert lines[0] == "lambda,w_t,score"
    assert len(lines) == 3
    assert (gs / "best.txt").read_text().startswith("lambda = ")


def test_no_arguments_prints_usage():
    assert main([]) == 2


def test_threads_env_contract(monkeypatch):
    from smslab.errors import InvalidConfig
    from smslab.util import fft_workers

    monkeypatch.setenv("SMSLAB_THREADS", "3")
    assert fft_workers() == 3
    monkeypatch.setenv("SMSLAB_THREADS", "0")
    assert fft_workers() == 1
    monkeypatch.delenv("SMSLAB_THREADS")
    assert fft_workers() >= 1
    monkeypatch.setenv("SMSLAB_THREADS", "many")
    with pytest.raises(InvalidConfig):
        fft_workers()
