"""Command-line front end.

Subcommands: compare two images, train and evaluate metrics on 2AFC data,
verify gradients, generate synthetic datasets, and benchmark. Exit codes:
0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import resource
import sys
import time
from pathlib import Path

import numpy as np

from watsonsim.baselines import lp_distance, ssim_distance
from watsonsim.color import Colorspace, load_png
from watsonsim.color import to_grey, to_ycbcr
from watsonsim.errors import DataError, InputDomainError, NumericalError
from watsonsim.grad import (
    FD_STEP,
    GradientRequest,
    LossId,
    Wrt,
    run_gradient_checks,
    value_and_grad,
)
from watsonsim.synthetic import SyntheticConfig, generate_synthetic_dataset
from watsonsim.training import TrainerConfig, train_metric, training_report
from watsonsim.transforms import BlockGrid, sample_grid_offset
from watsonsim.twoafc import evaluate_metric, load_dataset
from watsonsim.watson import (
    color_forward,
    default_params,
    load_params,
    save_params,
    watson_distance,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

WATSON_METRICS = {"watson-dct": "dct", "watson-dft": "dft"}
BASELINE_P = {"l2": 2.0, "l1": 1.0}
METRICS = tuple(WATSON_METRICS) + ("ssim",) + tuple(BASELINE_P)

GRADCHECK_TOLERANCE = 1e-4
PARAMS_DIR_VAR = "WATSON_PARAMS_DIR"


class UsageError(Exception):
    """Bad flags or unusable invocation; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# shared helpers


def _resolve_params_path(raw: str) -> Path:
    path = Path(raw)
    if path.is_file():
        return path
    search_dir = os.environ.get(PARAMS_DIR_VAR)
    if not path.is_absolute() and search_dir:
        candidate = Path(search_dir) / raw
        if candidate.is_file():
            return candidate
    raise UsageError(
        f"parameter file not found: {raw}"
        + (f" (searched {search_dir} too)" if search_dir else "")
    )


def _load_metric_params(metric: str, params_arg: str | None, channels: str):
    variant = WATSON_METRICS[metric]
    if params_arg:
        params = load_params(_resolve_params_path(params_arg))
        if params.variant != variant:
            raise DataError(
                f"parameter file is for watson-{params.variant}, "
                f"metric is {metric}"
            )
        return params
    return default_params(variant, channels)


def _watson_array(image, params):
    if params.channels == "grey":
        return to_grey(image).pixels[:, :, 0]
    if image.colorspace is Colorspace.GREY:
        raise DataError("color watson parameters need color images")
    return to_ycbcr(image).pixels


def _distance_fn(metric: str, params, offset):
    if metric in WATSON_METRICS:
        grid = BlockGrid(params.block_size, offset)

        def watson_fn(a, b):
            return watson_distance(
                _watson_array(a, params), _watson_array(b, params), params, grid
            )

        return watson_fn
    if metric == "ssim":
        return lambda a, b: ssim_distance(a.pixels, b.pixels)
    p = BASELINE_P[metric]
    return lambda a, b: lp_distance(a.pixels, b.pixels, p)


def _pick_offset(args) -> tuple[int, int]:
    if getattr(args, "seed", None) is not None:
        return sample_grid_offset(np.random.default_rng(args.seed))
    dy, dx = args.offset
    return int(dy), int(dx)


def _infer_channels(records) -> str:
    grey = records[0].reference.colorspace is Colorspace.GREY
    return "grey" if grey else "ycbcr"


def _print_json(doc) -> None:
    print(json.dumps(doc, indent=2))


# ---------------------------------------------------------------------------
# subcommands


def cmd_compare(args) -> int:
    a = load_png(args.image_a)
    b = load_png(args.image_b)
    if a.pixels.shape != b.pixels.shape:
        raise DataError(
            f"image dimensions differ: {a.pixels.shape} vs {b.pixels.shape}"
        )
    offset = _pick_offset(args)
    doc = {"metric": args.metric, "offset": list(offset)}
    if args.metric in WATSON_METRICS:
        channels = "grey" if a.colorspace is Colorspace.GREY else "ycbcr"
        params = _load_metric_params(args.metric, args.params, channels)
        xa = _watson_array(a, params)
        xb = _watson_array(b, params)
        grid = BlockGrid(params.block_size, offset)
        if params.channels == "ycbcr":
            value, caches = color_forward(xa, xb, params, grid)
            doc["per_channel"] = {
                name: {
                    "distance": cache["value"],
                    "weight": float(lam),
                    "weighted": float(lam) * cache["value"],
                }
                for name, lam, cache in zip(("y", "cb", "cr"), params.lam, caches)
            }
        else:
            value = watson_distance(xa, xb, params, grid)
    else:
        value = _distance_fn(args.metric, None, offset)(a, b)
    doc["distance"] = float(value)
    if args.json:
        _print_json(doc)
    else:
        print(repr(float(value)))
    return EXIT_OK


def cmd_train(args) -> int:
    if args.metric not in WATSON_METRICS:
        raise UsageError(
            f"metric {args.metric!r} has no trainable parameters; "
            f"choose one of {', '.join(WATSON_METRICS)}"
        )
    records = load_dataset(args.data, strict=not args.skip_bad_records)
    if not records:
        raise DataError("training dataset is empty", str(args.data))
    params = _load_metric_params(args.metric, args.params,
                                 _infer_channels(records))
    config = TrainerConfig(
        learning_rate=args.learning_rate,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=args.seed,
        optimizer=args.optimizer,
        grid_randomization=not args.fixed_grid,
        threads=args.threads,
    )
    result = train_metric(params, records, config)
    out = Path(args.out)
    save_params(result.params, out)
    if args.eval_data:
        eval_records = load_dataset(args.eval_data,
                                    strict=not args.skip_bad_records)
        if not eval_records:
            raise DataError("evaluation dataset is empty", str(args.eval_data))
    else:
        eval_records = records
    evaluation = evaluate_metric(
        _distance_fn(args.metric, result.params, (0, 0)), eval_records
    )
    report = training_report(config, result, evaluation)
    report["metric"] = args.metric
    report["data"] = str(args.data)
    report["n_records"] = len(records)
    report["params_file"] = str(out)
    report_path = Path(args.report) if args.report else out.with_suffix(
        ".report.json"
    )
    report_path.write_text(json.dumps(report, indent=2) + "\n")
    _print_json(report)
    return EXIT_OK


def cmd_eval(args) -> int:
    records = load_dataset(args.data, strict=not args.skip_bad_records)
    if not records:
        raise DataError("evaluation dataset is empty", str(args.data))
    params = None
    if args.metric in WATSON_METRICS:
        params = _load_metric_params(args.metric, args.params,
                                     _infer_channels(records))
    report = evaluate_metric(_distance_fn(args.metric, params, (0, 0)), records)
    doc = {"metric": args.metric, "data": str(args.data), **report}
    _print_json(doc)
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    reports = run_gradient_checks(
        seed=args.seed, max_coords=args.max_coords, step=args.step
    )
    per_loss: dict[str, float] = {}
    checks = []
    for rep in reports:
        name = rep.loss_id.value
        per_loss[name] = max(per_loss.get(name, 0.0), rep.max_rel_err)
        checks.append(
            {
                "loss": name,
                "wrt": rep.wrt.value,
                "max_rel_err": rep.max_rel_err,
                "n_checked": rep.n_checked,
                "n_excluded": rep.n_excluded,
                "worst_coordinate": rep.worst_coordinate,
            }
        )
    ok = all(v < args.tolerance for v in per_loss.values())
    if args.json:
        _print_json(
            {
                "tolerance": args.tolerance,
                "ok": ok,
                "per_loss_max_rel_err": per_loss,
                "checks": checks,
            }
        )
    else:
        for name in sorted(per_loss):
            verdict = "ok" if per_loss[name] < args.tolerance else "FAIL"
            print(f"{name}: max_rel_err {per_loss[name]:.3e} {verdict}")
    return EXIT_OK if ok else EXIT_NUMERICAL


def cmd_make_synthetic(args) -> int:
    config = SyntheticConfig(
        n_records=args.n_records,
        out_dir=args.out,
        seed=args.seed,
        base_images=tuple(args.base_image or ()),
        patch_size=args.patch_size,
        color=not args.grey,
        n_textures=args.textures,
    )
    manifest = generate_synthetic_dataset(config)
    print(str(manifest))
    return EXIT_OK


def _bench_inputs(metric: str, args, rng):
    grey = args.grey
    if metric in WATSON_METRICS:
        shape = (args.size, args.size) if grey else (args.size, args.size, 3)
        params = default_params(WATSON_METRICS[metric],
                                "grey" if grey else "ycbcr")
        loss_id = (LossId.WATSON_DCT if metric == "watson-dct"
                   else LossId.WATSON_DFT)
    else:
        shape = (args.size, args.size, 1 if grey else 3)
        params = None
        loss_id = LossId.SSIM if metric == "ssim" else LossId.LP
    refs = rng.random((args.batch,) + shape)
    cands = np.clip(refs + 0.1 * rng.standard_normal(refs.shape), 0.0, 1.0)
    return refs, cands, params, loss_id


def cmd_bench(args) -> int:
    rng = np.random.default_rng(args.seed)
    refs, cands, params, loss_id = _bench_inputs(args.metric, args, rng)
    request = GradientRequest(
        loss_id, Wrt.SECOND_INPUT, lp_p=BASELINE_P.get(args.metric, 2.0)
    )
    before_kb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss

    def forward_only(i):
        if params is not None:
            return watson_distance(refs[i], cands[i], params)
        if args.metric == "ssim":
            return ssim_distance(refs[i], cands[i])
        return lp_distance(refs[i], cands[i], BASELINE_P[args.metric])

    start = time.perf_counter()
    for i in range(args.batch):
        forward_only(i)
    forward_ms = (time.perf_counter() - start) * 1000.0

    start = time.perf_counter()
    for i in range(args.batch):
        value_and_grad(request, refs[i], cands[i], params)
    grad_ms = (time.perf_counter() - start) * 1000.0

    after_kb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    doc = {
        "metric": args.metric,
        "batch_size": args.batch,
        "image_size": args.size,
        "channels": 1 if args.grey else 3,
        "forward_ms_per_batch": forward_ms,
        "forward_and_gradient_ms_per_batch": grad_ms,
        "peak_rss_delta_kb": max(0, int(after_kb - before_kb)),
    }
    if args.json:
        _print_json(doc)
    else:
        print(f"forward: {forward_ms:.1f} ms/batch")
        print(f"forward+gradient: {grad_ms:.1f} ms/batch")
        print(f"peak rss delta: {doc['peak_rss_delta_kb']} kB")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="watsonsim",
        description="Perceptual image distances with trainable masking.",
    )
    sub = parser.add_subparsers(dest="command", required=True,
                                metavar="command", parser_class=_Parser)

    pc = sub.add_parser("compare", help="distance between two images")
    pc.add_argument("image_a")
    pc.add_argument("image_b")
    pc.add_argument("--metric", choices=METRICS, default="watson-dft")
    pc.add_argument("--params", help="parameter JSON for watson metrics")
    pc.add_argument("--offset", nargs=2, type=int, default=(0, 0),
                    metavar=("DY", "DX"))
    pc.add_argument("--seed", type=int, help="draw a random grid offset")
    pc.add_argument("--json", action="store_true")
    pc.set_defaults(func=cmd_compare)

    pt = sub.add_parser("train-2afc", help="fit metric parameters to judgements")
    pt.add_argument("--metric", choices=tuple(WATSON_METRICS), required=True)
    pt.add_argument("--data", required=True,
                    help="CSV manifest or ref/p0/p1/judge directory")
    pt.add_argument("--out", required=True, help="output parameter JSON")
    pt.add_argument("--report", help="report JSON path (default: <out>.report.json)")
    pt.add_argument("--params", help="initial parameter JSON")
    pt.add_argument("--eval-data", help="held-out dataset for the report")
    pt.add_argument("--learning-rate", type=float, default=1e-3)
    pt.add_argument("--epochs", type=int, default=20)
    pt.add_argument("--batch-size", type=int, default=64)
    pt.add_argument("--seed", type=int, default=0)
    pt.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")
    pt.add_argument("--fixed-grid", action="store_true",
                    help="disable block-grid randomization")
    pt.add_argument("--threads", type=int, default=1)
    pt.add_argument("--skip-bad-records", action="store_true")
    pt.set_defaults(func=cmd_train)

    pe = sub.add_parser("eval-2afc", help="agreement of a metric on judgements")
    pe.add_argument("--metric", choices=METRICS, required=True)
    pe.add_argument("--data", required=True)
    pe.add_argument("--params")
    pe.add_argument("--skip-bad-records", action="store_true")
    pe.set_defaults(func=cmd_eval)

    pg = sub.add_parser("gradcheck", help="finite-difference gradient audit")
    pg.add_argument("--seed", type=int, default=0)
    pg.add_argument("--max-coords", type=int, default=512)
    pg.add_argument("--step", type=float, default=FD_STEP)
    pg.add_argument("--tolerance", type=float, default=GRADCHECK_TOLERANCE)
    pg.add_argument("--json", action="store_true")
    pg.set_defaults(func=cmd_gradcheck)

    pm = sub.add_parser("make-synthetic", help="generate a labeled 2AFC dataset")
    pm.add_argument("--out", required=True)
    pm.add_argument("--n-records", type=int, required=True)
    pm.add_argument("--seed", type=int, default=0)
    pm.add_argument("--patch-size", type=int, default=64)
    pm.add_argument("--grey", action="store_true")
    pm.add_argument("--textures", type=int, default=16)
    pm.add_argument("--base-image", action="append",
                    help="use this image as base material (repeatable)")
    pm.set_defaults(func=cmd_make_synthetic)

    pb = sub.add_parser("bench", help="time forward and gradient evaluation")
    pb.add_argument("--metric", choices=METRICS, default="watson-dft")
    pb.add_argument("--batch", type=int, default=128)
    pb.add_argument("--size", type=int, default=64)
    pb.add_argument("--grey", action="store_true")
    pb.add_argument("--seed", type=int, default=0)
    pb.add_argument("--json", action="store_true")
    pb.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputDomainError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
