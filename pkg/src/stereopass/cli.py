"""Command-line interface.

Subcommands: synthesize, render-dataset, evaluate, rig-analyze, bench,
fusion-selftest. Exit codes: 0 success, 1 runtime failure, 2 usage or
configuration error.
"""

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import fusion, fusion_reference, metrics, scenes
from .errors import ConfigError, StereopassError
from .imaging import ImagePlane, load_color, load_pfm, save_color, save_pfm
from .pipeline import PipelineConfig, run_pipeline, rig_from_dict
from .rig import SceneDepthPair, sweep_design_space, sweep_to_csv

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def _parse_resolution(text: str):
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError as exc:
        raise ConfigError(f"resolution must look like 1280x720, got {text!r}") from exc


def _load_config(path) -> PipelineConfig:
    return PipelineConfig.from_json(path)


def cmd_synthesize(args) -> int:
    config = _load_config(args.config)
    if config.rig is None:
        raise ConfigError("synthesize requires a 'rig' section in the config")
    rig = rig_from_dict(config.rig)
    left = load_color(args.left)
    right = load_color(args.right)
    gt = None
    if args.left_depth and args.right_depth:
        gt = (load_pfm(args.left_depth).data, load_pfm(args.right_depth).data)
    result = run_pipeline(left, right, rig, config, gt_inv_depth=gt, debug=args.dump_debug)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_color(result.eye_left, out / "eye_l.png")
    save_color(result.eye_right, out / "eye_r.png")
    (out / "timing.json").write_text(json.dumps(result.timing.to_dict(), indent=2))
    if args.dump_debug:
        for eye in ("eye_left", "eye_right"):
            fv = result.debug["filtered"][eye]
            tag = "l" if eye == "eye_left" else "r"
            save_pfm(fv.masks.m_full, out / f"m_full_{tag}.pfm")
            save_pfm(fv.masks.m_left, out / f"m_left_{tag}.pfm")
            save_pfm(fv.masks.m_right, out / f"m_right_{tag}.pfm")
    print(result.timing.format_report())
    return EXIT_OK


def cmd_render_dataset(args) -> int:
    w, h = _parse_resolution(args.res)
    manifest = scenes.generate_dataset(
        args.out,
        count=args.scenes,
        resolution=(w, h),
        seed=args.seed,
        baseline=args.baseline,
        hmd_thickness=args.thickness,
    )
    print(f"wrote {len(manifest['cases'])} cases to {args.out}")
    return EXIT_OK


def _case_metrics(output, reference, analytic_mask, pipeline_mask):
    plain_psnr = metrics.psnr(output, reference)
    plain_ssim = metrics.ssim_mean(output, reference)
    masked_psnr = metrics.psnr(output, reference, mask=analytic_mask.data)
    loss = metrics.masked_loss(output, reference, pipeline_mask)
    return {
        "psnr_db": plain_psnr,
        "ssim": plain_ssim,
        "psnr_db_unmasked_region": masked_psnr,
        "masked_loss": loss,
    }


def cmd_evaluate(args) -> int:
    config = _load_config(args.config)
    dataset = Path(args.dataset)
    manifest = json.loads((dataset / "manifest.json").read_text())
    inter_dir = Path(args.intermediates) if args.intermediates else None

    rows = []
    for case in manifest["cases"]:
        cdir = dataset / case["name"]
        rig = rig_from_dict(case["rig"])
        left = load_color(cdir / "input_l.png")
        right = load_color(cdir / "input_r.png")
        gt = None
        if config.depth.kind == "ground_truth":
            gt = (load_pfm(cdir / "input_l.pfm").data, load_pfm(cdir / "input_r.pfm").data)
        result = run_pipeline(left, right, rig, config, gt_inv_depth=gt)

        refs = {
            "eye_left": (load_color(cdir / "eye_l_gt.png"), load_pfm(cdir / "disocc_l.pfm")),
            "eye_right": (load_color(cdir / "eye_r_gt.png"), load_pfm(cdir / "disocc_r.pfm")),
        }
        row = {"name": case["name"]}
        for eye, out_img in (("eye_left", result.eye_left), ("eye_right", result.eye_right)):
            reference, analytic_mask = refs[eye]
            pipeline_mask = result.debug["filtered"][eye].masks.m_full
            row[eye] = _case_metrics(out_img, reference, analytic_mask, pipeline_mask)
        rows.append(row)

        if inter_dir is not None:
            for eye in ("eye_left", "eye_right"):
                fv = result.debug["filtered"][eye]
                edir = inter_dir / case["name"] / ("eye_l" if eye == "eye_left" else "eye_r")
                edir.mkdir(parents=True, exist_ok=True)
                save_pfm(fv.f_left, edir / "F_left.pfm")
                save_pfm(fv.f_right, edir / "F_right.pfm")
                save_pfm(fv.masks.m_full, edir / "M_full.pfm")
                save_color(fv.f_left, edir / "F_left.png")
                save_color(fv.f_right, edir / "F_right.png")

    def _mean(path_keys):
        vals = [row[eye][k] for row in rows for eye in ("eye_left", "eye_right") for k in [path_keys]]
        return float(np.mean(vals))

    report = {
        "config": str(args.config),
        "dataset": str(args.dataset),
        "cases": rows,
        "mean": {
            k: _mean(k)
            for k in ("psnr_db", "ssim", "psnr_db_unmasked_region", "masked_loss")
        },
    }
    Path(args.report).parent.mkdir(parents=True, exist_ok=True)
    Path(args.report).write_text(json.dumps(report, indent=2))
    m = report["mean"]
    print(
        f"mean PSNR {m['psnr_db']:.2f} dB (unmasked {m['psnr_db_unmasked_region']:.2f} dB), "
        f"SSIM {m['ssim']:.4f}, masked loss {m['masked_loss']:.4f}"
    )
    return EXIT_OK


def cmd_rig_analyze(args) -> int:
    spec = json.loads(Path(args.sweep).read_text())
    try:
        pairs = [SceneDepthPair(zn, zf) for zn, zf in spec["depth_pairs"]]
        rows = sweep_design_space(
            spec["t"], spec["x"], spec["e"], spec["phi"], pairs
        )
    except KeyError as exc:
        raise ConfigError(f"sweep file missing key {exc}") from exc
    Path(args.out).write_text(sweep_to_csv(rows))
    print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def cmd_bench(args) -> int:
    config = _load_config(args.config)
    w, h = _parse_resolution(args.res)
    rng = np.random.default_rng(args.seed)
    scene = scenes.random_scene(rng, focal_px=w / 2.0)
    ipd = 0.063
    baseline = 0.10
    rig_args = dict(
        hmd_thickness=0.093,
        camera_offset=(baseline - ipd) / 2,
        ipd=ipd,
        half_angle=2 * np.arctan2((baseline - ipd) / 2, 0.093),
        focal_px=w / 2.0,
        width=w,
        height=h,
    )
    from .rig import build_rig

    rig = build_rig(**rig_args)
    case = scenes.render_passthrough_case(scene, rig)
    gt = (case.input_left.inv_depth.data, case.input_right.inv_depth.data)

    # warm-up run compiles the jitted kernels before timing
    run_pipeline(case.input_left.color, case.input_right.color, rig, config,
                 gt_inv_depth=gt, debug=False)

    frames = []
    depth_cache = None
    for i in range(args.frames):
        reuse = args.depth_every > 1 and (i % args.depth_every) != 0
        result = run_pipeline(
            case.input_left.color,
            case.input_right.color,
            rig,
            config,
            gt_inv_depth=gt,
            precomputed_inv_depth=depth_cache if reuse else None,
            debug=False,
        )
        if not reuse:
            depth_cache = gt if config.depth.kind == "ground_truth" else None
        frames.append(result.timing)

    stats = {}
    for key in ("depth_ms", "sharpen_ms", "splat_ms", "disocclusion_ms", "fusion_ms", "total_ms"):
        vals = np.array([getattr(t, key) for t in frames])
        stats[key] = {"median": float(np.median(vals)), "p95": float(np.percentile(vals, 95))}
    non_depth = np.array(
        [t.sharpen_ms + t.splat_ms + t.disocclusion_ms + t.fusion_ms for t in frames]
    )
    stats["non_depth_ms"] = {
        "median": float(np.median(non_depth)),
        "p95": float(np.percentile(non_depth, 95)),
    }
    print(json.dumps({"resolution": f"{w}x{h}", "frames": args.frames, "stages": stats}, indent=2))
    med = {k: stats[k]["median"] for k in stats}
    print(
        f"medians: depth estimation at {med['depth_ms']:.1f}ms, RGB-D sharpening at "
        f"{med['sharpen_ms']:.1f}ms, forward splatting at {med['splat_ms']:.1f}ms, "
        f"disocclusion filtering at {med['disocclusion_ms']:.1f}ms, fusion at "
        f"{med['fusion_ms']:.1f}ms; total {med['total_ms']:.1f}ms per frame"
    )
    return EXIT_OK


def cmd_fusion_selftest(args) -> int:
    if args.weights:
        weights = fusion.load_weights(args.weights)
    else:
        weights = fusion.random_weights(seed=args.seed)
    w, h = _parse_resolution(args.size)
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    unsaturated = 1.0
    for _ in range(args.cases):
        f_l = ImagePlane(rng.random((h, w, 3), dtype=np.float64).astype(np.float32))
        f_r = ImagePlane(rng.random((h, w, 3), dtype=np.float64).astype(np.float32))
        engine = fusion.fuse(f_l, f_r, weights)
        reference = fusion_reference.naive_fuse(f_l, f_r, weights)
        worst = max(worst, float(np.abs(engine.data - reference.data).max()))
        unsaturated = min(
            unsaturated, float(((engine.data > 0.0) & (engine.data < 1.0)).mean())
        )
    params = weights.parameter_count()
    ok = worst < 1e-4 and params == fusion.total_parameter_count()
    print(
        json.dumps(
            {
                "cases": args.cases,
                "size": f"{w}x{h}",
                "max_abs_diff": worst,
                "min_unsaturated_fraction": unsaturated,
                "parameter_count": params,
                "expected_parameters": fusion.total_parameter_count(),
                "pass": bool(ok),
            },
            indent=2,
        )
    )
    return EXIT_OK if ok else EXIT_RUNTIME


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stereopass", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synthesize", help="synthesize eye views from a stereo pair")
    s.add_argument("--left", required=True)
    s.add_argument("--right", required=True)
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--left-depth", help="optional inverse-depth PFM for the left view")
    s.add_argument("--right-depth", help="optional inverse-depth PFM for the right view")
    s.add_argument("--dump-debug", action="store_true")
    s.set_defaults(func=cmd_synthesize)

    s = sub.add_parser("render-dataset", help="generate a synthetic evaluation dataset")
    s.add_argument("--scenes", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--res", default="512x512")
    s.add_argument("--out", required=True)
    s.add_argument("--baseline", type=float, default=0.10)
    s.add_argument("--thickness", type=float, default=0.093)
    s.set_defaults(func=cmd_render_dataset)

    s = sub.add_parser("evaluate", help="run the pipeline over a dataset and report metrics")
    s.add_argument("--dataset", required=True)
    s.add_argument("--config", required=True)
    s.add_argument("--report", required=True)
    s.add_argument("--intermediates", help="directory for filtered-view dumps (trainer input)")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("rig-analyze", help="disocclusion-width design sweep to CSV")
    s.add_argument("--sweep", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_rig_analyze)

    s = sub.add_parser("bench", help="per-stage timing statistics on synthetic frames")
    s.add_argument("--config", required=True)
    s.add_argument("--frames", type=int, default=10)
    s.add_argument("--res", default="1280x720")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--depth-every", type=int, default=1,
                   help="recompute depth every M frames, reusing it in between")
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("fusion-selftest", help="engine vs naive-reference equivalence check")
    s.add_argument("--weights", help="NPFW file; omitted = random weights")
    s.add_argument("--cases", type=int, default=5)
    s.add_argument("--size", default="24x16")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_fusion_selftest)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StereopassError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
