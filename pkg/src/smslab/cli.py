"""Batch command-line front end.

Subcommands mirror the processing pipeline: ``phantom`` and ``mask``
generate inputs, ``synth`` turns magnitude stacks into synthetic
multi-coil SMS k-space, ``recon`` runs one of the reconstructors,
``eval`` scores reconstructions against references (optionally with a
paired significance test between two methods), and ``gridsearch`` scans
regularization weights.

Every run writes its fully resolved configuration to ``<out>/config.txt``
as ``key = value`` lines; re-running a subcommand with ``--config`` on
that file reproduces byte-identical volume outputs.  Flags always
override config-file values, unknown keys are rejected.  Exit codes:
0 success, 1 runtime failure (missing file, corrupt file, shape
mismatch), 2 configuration error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from . import metrics, recon, sampling, synth, transforms, volfile
from .errors import InvalidConfig, InvalidInput, SmsLabError
from .phantoms import PhantomSpec, gen_cine_phantom, gen_fpp_phantom

__all__ = ["main", "build_parser"]

_PRIVATE_DESTS = {"subparser", "handler", "config"}


def _float_list(text):
    try:
        return [float(tok) for tok in str(text).split(",") if tok.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated floats, got {text!r}")


def _path_list(text):
    return [tok for tok in str(text).split(",") if tok != ""]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smslab",
        description="simulate, synthesize, reconstruct, and evaluate dynamic SMS MRI data",
    )
    subs = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")

    def common(sub):
        sub.add_argument("--out", help="output directory (required)")
        sub.add_argument("--config", help="key = value config file; flags override it")
        sub.add_argument("--seed", type=int, default=0)

    p = subs.add_parser("phantom", help="generate a deterministic dynamic phantom")
    common(p)
    p.add_argument("--mode", choices=["cine", "fpp"], default="cine")
    p.add_argument("--slices", type=int, default=2)
    p.add_argument("--rows", type=int, default=64)
    p.add_argument("--cols", type=int, default=64)
    p.add_argument("--frames", type=int, default=8)
    p.add_argument("--motion-amplitude", type=float, default=0.15)
    p.add_argument("--motion-period", type=int, default=8)
    p.add_argument("--bolus-t0", type=float, default=1.0)
    p.add_argument("--bolus-alpha", type=float, default=2.0)
    p.add_argument("--bolus-beta", type=float, default=1.5)
    p.add_argument("--bolus-peak", type=float, default=0.55)
    p.add_argument("--myo-delay", type=float, default=2.0)
    p.set_defaults(handler=_run_phantom, required=("out",))

    p = subs.add_parser("mask", help="generate a helical SMS undersampling mask")
    common(p)
    p.add_argument("--r-inplane", type=int, default=2)
    p.add_argument("--sms", type=int, default=2, help="simultaneous slice factor M")
    p.add_argument("--rows", type=int, default=64)
    p.add_argument("--cols", type=int, default=64)
    p.add_argument("--frames", type=int, default=8)
    p.add_argument("--step", type=int, default=1, help="row offset increment per frame")
    p.add_argument("--acs", type=int, default=0, help="fully sampled DC-centered rows")
    p.set_defaults(handler=_run_mask, required=("out",))

    p = subs.add_parser("synth", help="synthesize multi-coil SMS k-space from magnitudes")
    common(p)
    p.add_argument("--magnitudes", help="CXV1 file with a real (M, a, b, t) stack")
    p.add_argument("--coils", type=int, default=4)
    p.add_argument("--clusters", type=int, default=8)
    p.add_argument("--sigma-phase", type=float, default=math.pi / 3)
    p.add_argument("--csm", choices=["circular", "gaussian"], default="circular")
    p.add_argument("--ring-radius", type=float, default=None)
    p.add_argument("--d-min", type=float, default=2.0)
    p.add_argument("--r-inplane", type=int, default=2)
    p.add_argument("--step", type=int, default=1)
    p.add_argument("--acs", type=int, default=0)
    p.set_defaults(handler=_run_synth, required=("out", "magnitudes"))

    p = subs.add_parser("recon", help="reconstruct undersampled SMS k-space")
    common(p)
    p.add_argument("--kspace", help="CXV1 k-space, (M,a,b,t) or (C,M,a,b,t)")
    p.add_argument("--mask", help="CXV1 uint8 mask, (M,a,b,t)")
    p.add_argument("--method", choices=["zero_filled", "cascade", "proxgrad"], default="cascade")
    p.add_argument("--n-iter", type=int, default=5)
    p.add_argument(
        "--denoiser",
        choices=["identity", "tv_temporal", "tv_spatiotemporal"],
        default="tv_temporal",
    )
    p.add_argument("--w-t", type=float, default=0.1)
    p.add_argument("--w-s", type=float, default=0.0)
    p.add_argument(
        "--slice-mode",
        choices=[m.value for m in recon.SliceMode],
        default=recon.SliceMode.SHARED_PER_SLICE.value,
    )
    p.add_argument("--lam", type=float, default=1.0, help="data-fidelity weight")
    p.add_argument("--n-outer", type=int, default=30, help="proxgrad outer iterations")
    p.add_argument("--reference", help="CXV1 reference for windowing and error maps")
    p.add_argument("--png-every", type=int, default=1, help="dump every Nth frame, 0 = none")
    p.add_argument("--err-scale", type=float, default=5.0)
    p.set_defaults(handler=_run_recon, required=("out", "kspace", "mask"))

    p = subs.add_parser("eval", help="score reconstructions against references")
    common(p)
    p.add_argument("--recon", type=_path_list, help="comma-separated CXV1 reconstructions")
    p.add_argument("--reference", type=_path_list, help="comma-separated CXV1 references")
    p.add_argument("--recon-b", type=_path_list, default=None,
                   help="second method for the paired t-test")
    p.set_defaults(handler=_run_eval, required=("out", "recon", "reference"))

    p = subs.add_parser("gridsearch", help="grid search over (lambda, w_t)")
    common(p)
    p.add_argument("--kspace", type=_path_list, help="comma-separated CXV1 k-space files")
    p.add_argument("--mask", type=_path_list, help="comma-separated CXV1 masks")
    p.add_argument("--reference", type=_path_list, help="comma-separated CXV1 references")
    p.add_argument("--lambdas", type=_float_list, default=[1.0])
    p.add_argument("--w-ts", type=_float_list, default=[0.0, 0.05, 0.1])
    p.add_argument("--n-outer", type=int, default=10)
    p.add_argument("--method", choices=["proxgrad", "cascade"], default="proxgrad")
    p.set_defaults(handler=_run_gridsearch, required=("out", "kspace", "mask", "reference"))

    return parser


# ---------------------------------------------------------------- config file


def _subparser_map(parser):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices
    return {}


def _extract_config_path(argv):
    for i, tok in enumerate(argv):
        if tok == "--config":
            if i + 1 < len(argv):
                return argv[i + 1]
        elif tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def _inject_config(parser, sub, subcommand, path):
    if not os.path.exists(path):
        parser.error(f"config file not found: {path}")
    entries = volfile.read_metadata(path)
    known = {}
    for action in sub._actions:
        if action.dest not in ("help",):
            known[action.dest] = action
    defaults = {}
    for key, value in entries.items():
        if key == "subcommand":
            if value != subcommand:
                parser.error(
                    f"config file is for subcommand {value!r}, not {subcommand!r}"
                )
            continue
        if key not in known or key in _PRIVATE_DESTS - {"config"}:
            parser.error(f"unknown key {key!r} in config file {path}")
        action = known[key]
        convert = action.type if action.type is not None else str
        try:
            defaults[key] = convert(value)
        except (ValueError, argparse.ArgumentTypeError) as exc:
            parser.error(f"invalid value for {key!r} in config file: {exc}")
    defaults.pop("config", None)
    sub.set_defaults(**defaults)


def _check_choices(sub, args):
    for action in sub._actions:
        if action.choices is None or action.dest == "subcommand":
            continue
        value = getattr(args, action.dest, None)
        if value is not None and value not in action.choices:
            sub.error(
                f"argument --{action.dest.replace('_', '-')}: invalid choice: {value!r}"
            )


def _echo_config(args, outdir: Path):
    entries = {"subcommand": args.subcommand}
    for key, value in sorted(vars(args).items()):
        if key in _PRIVATE_DESTS or key in ("required", "subcommand") or key.startswith("_"):
            continue
        if value is None:
            continue
        if isinstance(value, list):
            value = ",".join(str(v) for v in value)
        entries[key] = value
    volfile.write_metadata(outdir / "config.txt", entries)


# ------------------------------------------------------------------- loading


def _load_volume(path, upcast=True) -> np.ndarray:
    if not os.path.exists(path):
        raise FileNotFoundError(f"input file not found: {path}")
    arr = volfile.read_volume(path)
    if not upcast:
        return arr
    if np.issubdtype(arr.dtype, np.complexfloating):
        return arr.astype(np.complex128)
    if np.issubdtype(arr.dtype, np.floating):
        return arr.astype(np.float64)
    return arr


def _check_mask_shape(data: np.ndarray, mask: np.ndarray):
    if data.ndim < mask.ndim or data.shape[data.ndim - mask.ndim :] != mask.shape:
        raise InvalidInput(
            f"mask shape {mask.shape} does not match data shape {data.shape}"
        )


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_png(path, image2d, vmax: float):
    top = vmax if vmax > 0 else 1.0
    q = np.clip(np.asarray(image2d, dtype=np.float64) / top, 0.0, 1.0)
    Image.fromarray(np.rint(q * 255.0).astype(np.uint8), mode="L").save(path, format="PNG")


# ------------------------------------------------------------------ handlers


def _run_phantom(args) -> int:
    out = _outdir(args)
    spec = PhantomSpec(
        mode=args.mode,
        m_slices=args.slices,
        a_rows=args.rows,
        b_cols=args.cols,
        t_frames=args.frames,
        seed=args.seed,
        motion_amplitude=args.motion_amplitude,
        motion_period=args.motion_period,
        bolus_t0=args.bolus_t0,
        bolus_alpha=args.bolus_alpha,
        bolus_beta=args.bolus_beta,
        bolus_peak=args.bolus_peak,
        myo_delay=args.myo_delay,
    )
    stack = gen_cine_phantom(spec) if spec.mode == "cine" else gen_fpp_phantom(spec)
    volfile.write_volume(out / "phantom.cxv", stack.astype(np.float32))
    meta = {
        "mode": spec.mode,
        "seed": spec.seed,
        "dims": "x".join(map(str, stack.shape)),
        "motion_amplitude": spec.motion_amplitude,
        "motion_period": spec.motion_period,
        "bolus_t0": spec.bolus_t0,
        "bolus_alpha": spec.bolus_alpha,
        "bolus_beta": spec.bolus_beta,
        "bolus_peak": spec.bolus_peak,
        "myo_delay": spec.myo_delay,
    }
    volfile.write_metadata(out / "phantom.meta", meta)
    _echo_config(args, out)
    print(f"wrote {out / 'phantom.cxv'} shape {stack.shape}")
    return 0


def _mask_spec_from(args, m_slices, rows, cols, frames) -> sampling.MaskSpec:
    return sampling.MaskSpec(
        r_inplane=args.r_inplane,
        m_slices=m_slices,
        a_rows=rows,
        b_cols=cols,
        t_frames=frames,
        interleave_step=args.step,
        acs_rows=args.acs,
    )


def _run_mask(args) -> int:
    out = _outdir(args)
    spec = _mask_spec_from(args, args.sms, args.rows, args.cols, args.frames)
    mask = sampling.embed_sms_mask(spec)
    volfile.write_volume(out / "mask.cxv", mask)
    volfile.write_metadata(
        out / "mask.meta",
        {
            "r_inplane": spec.r_inplane,
            "sms": spec.m_slices,
            "total_acceleration": spec.r_inplane * spec.m_slices,
            "dims": "x".join(map(str, mask.shape)),
            "interleave_step": spec.interleave_step,
            "acs_rows": spec.acs_rows,
        },
    )
    _echo_config(args, out)
    print(f"wrote {out / 'mask.cxv'} shape {mask.shape}")
    return 0


def _run_synth(args) -> int:
    out = _outdir(args)
    mags = _load_volume(args.magnitudes)
    if mags.ndim != 4:
        raise InvalidInput(f"magnitudes must be (M, a, b, t), got shape {mags.shape}")
    m, a, b, t = mags.shape
    mask_spec = _mask_spec_from(args, m, a, b, t)
    cfg = synth.SynthConfig(
        coils=args.coils,
        k_clusters=args.clusters,
        sigma_phase=args.sigma_phase,
        csm_kind=args.csm,
        ring_radius=args.ring_radius,
        d_min=args.d_min,
        seed=args.seed,
    )
    result = synth.synthesize_kspace(mags, cfg, mask_spec)
    volfile.write_volume(out / "kspace_us.cxv", result.kspace_undersampled.astype(np.complex64))
    volfile.write_volume(out / "kspace_full.cxv", result.kspace_full.astype(np.complex64))
    volfile.write_volume(out / "phase.cxv", result.phase.astype(np.float32))
    volfile.write_volume(out / "csm.cxv", result.csm.astype(np.float32))
    volfile.write_volume(out / "mask.cxv", result.mask)
    volfile.write_metadata(
        out / "synth.meta",
        {
            "seed": cfg.seed,
            "coils": cfg.coils,
            "clusters": cfg.k_clusters,
            "sigma_phase": cfg.sigma_phase,
            "csm_kind": cfg.csm_kind,
            "dims": "x".join(map(str, result.kspace_undersampled.shape)),
            "r_inplane": mask_spec.r_inplane,
            "sms": mask_spec.m_slices,
            "total_acceleration": mask_spec.r_inplane * mask_spec.m_slices,
        },
    )
    _echo_config(args, out)
    print(f"wrote {out / 'kspace_us.cxv'} shape {result.kspace_undersampled.shape}")
    return 0


def _run_recon(args) -> int:
    out = _outdir(args)
    kspace = _load_volume(args.kspace)
    mask = _load_volume(args.mask, upcast=False)
    _check_mask_shape(kspace, mask)
    trace = None
    if args.method == "zero_filled":
        image = recon.zero_filled(kspace)
    elif args.method == "cascade":
        if args.denoiser == "identity":
            spec = recon.DenoiserSpec.identity()
        elif args.denoiser == "tv_temporal":
            spec = recon.DenoiserSpec.tv_temporal(args.w_t)
        else:
            spec = recon.DenoiserSpec.tv_spatiotemporal(args.w_s, args.w_t)
        cfg = recon.ReconConfig(
            n_iter=args.n_iter,
            lam=args.lam,
            denoiser=spec,
            mode=recon.SliceMode(args.slice_mode),
        )
        image = recon.cascade_recon(kspace, mask, cfg)
    else:
        image, trace = recon.prox_gradient_solve(
            kspace, mask, args.lam, args.w_t, args.n_outer
        )
    volfile.write_volume(out / "recon.cxv", image.astype(np.complex64))
    if image.ndim == 5:
        magnitude = transforms.rss_combine(image)
        volfile.write_volume(out / "recon_rss.cxv", magnitude.astype(np.float32))
    else:
        magnitude = np.abs(image)
    if trace is not None:
        (out / "objective.txt").write_text("".join(f"{v!r}\n" for v in trace))

    reference = None
    if args.reference is not None:
        reference = np.abs(_load_volume(args.reference))
        if reference.shape != magnitude.shape:
            raise InvalidInput(
                f"reference shape {reference.shape} does not match recon shape {magnitude.shape}"
            )
    if args.png_every > 0:
        window = float(np.max(reference if reference is not None else magnitude))
        for s in range(magnitude.shape[0]):
            for k in range(0, magnitude.shape[-1], args.png_every):
                _write_png(out / f"mag_s{s:02d}_t{k:03d}.png", magnitude[s, :, :, k], window)
                if reference is not None:
                    err = np.abs(magnitude[s, :, :, k] - reference[s, :, :, k]) * args.err_scale
                    _write_png(
                        out / f"err_s{s:02d}_t{k:03d}_x{args.err_scale:g}.png", err, window
                    )
    volfile.write_metadata(
        out / "recon.meta",
        {
            "method": args.method,
            "seed": args.seed,
            "dims": "x".join(map(str, image.shape)),
            "n_iter": args.n_iter,
            "denoiser": args.denoiser,
            "w_t": args.w_t,
            "w_s": args.w_s,
            "slice_mode": args.slice_mode,
            "lam": args.lam,
        },
    )
    _echo_config(args, out)
    print(f"wrote {out / 'recon.cxv'} shape {image.shape}")
    return 0


def _metric_rows(paths, ref_paths):
    rows = []
    for path, ref_path in zip(paths, ref_paths):
        x_hat = _load_volume(path)
        if x_hat.ndim == 5:
            x_hat = transforms.rss_combine(x_hat)
        x_ref = _load_volume(ref_path)
        rows.append(metrics.evaluate_sequence(Path(path).stem, x_hat, x_ref))
    return rows


def _run_eval(args) -> int:
    out = _outdir(args)
    if len(args.recon) != len(args.reference):
        raise InvalidConfig(
            f"recon and reference counts differ: {len(args.recon)} vs {len(args.reference)}"
        )
    rows_a = _metric_rows(args.recon, args.reference)
    metrics.write_report_csv(out / "report.csv", rows_a)
    summary = metrics.summarize(rows_a)
    if args.recon_b is not None:
        if len(args.recon_b) != len(args.reference):
            raise InvalidConfig(
                f"recon-b and reference counts differ: {len(args.recon_b)} vs {len(args.reference)}"
            )
        rows_b = _metric_rows(args.recon_b, args.reference)
        metrics.write_report_csv(out / "report_b.csv", rows_b)
        if len(rows_a) >= 2:
            lines = []
            for name, take in (
                ("psnr_db", lambda r: r.psnr_db),
                ("nmse", lambda r: r.nmse),
                ("ssim", lambda r: r.ssim),
            ):
                test = metrics.paired_ttest(
                    [take(r) for r in rows_a], [take(r) for r in rows_b]
                )
                lines.append(f"{name}: t = {test.t!r}, p = {test.p!r}")
        else:
            lines = ["t-test skipped: need at least 2 sequences"]
        (out / "ttest.txt").write_text("\n".join(lines) + "\n")
        summary += "\n" + "\n".join(lines)
    (out / "summary.txt").write_text(summary + "\n")
    _echo_config(args, out)
    print(summary)
    return 0


def _run_gridsearch(args) -> int:
    out = _outdir(args)
    if not (len(args.kspace) == len(args.mask) == len(args.reference)):
        raise InvalidConfig(
            "kspace, mask, and reference lists must have equal lengths, got "
            f"{len(args.kspace)}/{len(args.mask)}/{len(args.reference)}"
        )
    cases = [
        recon.ValidationCase(
            kspace_u=_load_volume(k),
            mask=_load_volume(u, upcast=False),
            reference=_load_volume(r),
        )
        for k, u, r in zip(args.kspace, args.mask, args.reference)
    ]
    candidates = [(lam, w_t) for lam in args.lambdas for w_t in args.w_ts]
    best, table = recon.grid_search_weights(
        candidates, cases, n_outer=args.n_outer, method=args.method
    )
    with open(out / "gridsearch.csv", "w") as fh:
        fh.write("lambda,w_t,score\n")
        for lam, w_t, score in table:
            fh.write(f"{lam!r},{w_t!r},{score!r}\n")
    (out / "best.txt").write_text(f"lambda = {best[0]!r}\nw_t = {best[1]!r}\n")
    _echo_config(args, out)
    print(f"best candidate: lambda = {best[0]}, w_t = {best[1]}")
    return 0


# ----------------------------------------------------------------------- main


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    subcommand = argv[0]
    subparsers = _subparser_map(parser)
    config_path = _extract_config_path(argv)
    if config_path is not None and subcommand in subparsers:
        _inject_config(parser, subparsers[subcommand], subcommand, config_path)
    args = parser.parse_args(argv)
    if args.subcommand is None:
        parser.error("a subcommand is required")
    sub = subparsers[args.subcommand]
    for dest in args.required:
        if getattr(args, dest, None) is None:
            sub.error(f"argument --{dest.replace('_', '-')} is required")
    _check_choices(sub, args)
    try:
        return args.handler(args)
    except InvalidConfig as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SmsLabError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
