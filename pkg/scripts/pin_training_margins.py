"""Measure the frozen regression margins for the synthetic training run.

Generates the pinned train/test 2AFC datasets, trains the color
Watson-DFT metric, and prints the numbers the regression suite freezes:
initial and final training loss plus test agreement for the trained
metric, the untrained defaults, and the L2 baseline.

Run once, copy the figures into tests/test_acceptance.py, and do not
touch the seeds afterwards.
"""

import argparse
import json
import time
from pathlib import Path

from watsonsim.baselines import lp_distance
from watsonsim.color import to_ycbcr
from watsonsim.synthetic import SyntheticConfig, generate_synthetic_dataset
from watsonsim.training import TrainerConfig, train_metric
from watsonsim.transforms import BlockGrid
from watsonsim.twoafc import evaluate_metric, load_dataset
from watsonsim.watson import default_params, watson_distance

TRAIN_SEED = 20
TEST_SEED = 21
HEAD_SEED = 0
PINNED_LEARNING_RATE = 1e-2


def watson_fn(params):
    grid = BlockGrid(params.block_size, (0, 0))

    def fn(a, b):
        return watson_distance(to_ycbcr(a).pixels, to_ycbcr(b).pixels,
                               params, grid)

    return fn


def l2_fn(a, b):
    return lp_distance(a.pixels, b.pixels, 2.0)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--work-dir", type=Path, default=Path("margin_work"))
    ap.add_argument("--epochs", type=int, default=20)
    ap.add_argument("--learning-rate", type=float, default=PINNED_LEARNING_RATE)
    ap.add_argument("--n-train", type=int, default=2000)
    ap.add_argument("--n-test", type=int, default=500)
    ap.add_argument("--reuse-data", action="store_true",
                    help="skip generation, read datasets already in work dir")
    args = ap.parse_args()

    t0 = time.perf_counter()
    if args.reuse_data:
        train_manifest = args.work_dir / "train" / "manifest.csv"
        test_manifest = args.work_dir / "test" / "manifest.csv"
    else:
        train_manifest = generate_synthetic_dataset(SyntheticConfig(
            n_records=args.n_train, out_dir=args.work_dir / "train",
            seed=TRAIN_SEED, patch_size=64, color=True))
        test_manifest = generate_synthetic_dataset(SyntheticConfig(
            n_records=args.n_test, out_dir=args.work_dir / "test",
            seed=TEST_SEED, patch_size=64, color=True))
    t_gen = time.perf_counter() - t0

    train_records = load_dataset(train_manifest)
    test_records = load_dataset(test_manifest)
    t_load = time.perf_counter() - t0 - t_gen

    untrained = default_params("dft", "ycbcr")
    baseline = evaluate_metric(l2_fn, test_records)["agreement"]
    before = evaluate_metric(watson_fn(untrained), test_records)["agreement"]
    t_eval0 = time.perf_counter() - t0 - t_gen - t_load

    config = TrainerConfig(learning_rate=args.learning_rate,
                           epochs=args.epochs, seed=HEAD_SEED)
    result = train_metric(untrained, train_records, config)
    t_train = time.perf_counter() - t0 - t_gen - t_load - t_eval0

    after = evaluate_metric(watson_fn(result.params), test_records)["agreement"]

    doc = {
        "n_train": len(train_records),
        "n_test": len(test_records),
        "epochs": args.epochs,
        "learning_rate": args.learning_rate,
        "initial_loss": result.loss_curve[0],
        "final_loss": result.loss_curve[-1],
        "loss_ratio": result.loss_curve[-1] / result.loss_curve[0],
        "gamma": result.head.gamma,
        "l2_agreement": baseline,
        "untrained_agreement": before,
        "trained_agreement": after,
        "seconds_generate": round(t_gen, 2),
        "seconds_load": round(t_load, 2),
        "seconds_train": round(t_train, 2),
        "seconds_total": round(time.perf_counter() - t0, 2),
    }
    print(json.dumps(doc, indent=2))


if __name__ == "__main__":
    main()
