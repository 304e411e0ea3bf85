"""Check that training washes out the sensitivity-table initialization.

Trains the color Watson-DFT metric twice on the pinned synthetic train
set: once from the documented default tables and once from all-ones
tables, everything else equal. Prints both loss curves' endpoints and
the relative gap between the final losses. Expects the datasets from
pin_training_margins.py to already sit in the work dir.
"""

import argparse
import json
from pathlib import Path

import numpy as np

from watsonsim.training import TrainerConfig, train_metric
from watsonsim.twoafc import load_dataset
from watsonsim.watson import default_params

PINNED_LEARNING_RATE = 1e-2


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--work-dir", type=Path, default=Path("margin_work"))
    ap.add_argument("--epochs", type=int, default=20)
    args = ap.parse_args()

    records = load_dataset(args.work_dir / "train" / "manifest.csv")
    config = TrainerConfig(learning_rate=PINNED_LEARNING_RATE,
                           epochs=args.epochs, seed=0)

    from_default = default_params("dft", "ycbcr")
    from_ones = default_params("dft", "ycbcr")
    from_ones.tables = np.ones_like(from_ones.tables)

    losses = {}
    for name, params in (("default", from_default), ("ones", from_ones)):
        result = train_metric(params, records, config)
        losses[name] = {
            "initial_loss": result.loss_curve[0],
            "final_loss": result.loss_curve[-1],
        }

    gap = abs(losses["default"]["final_loss"] - losses["ones"]["final_loss"])
    rel_gap = gap / losses["default"]["final_loss"]
    print(json.dumps({
        "epochs": args.epochs,
        "learning_rate": PINNED_LEARNING_RATE,
        **{f"{k}_{f}": v for k, d in losses.items() for f, v in d.items()},
        "final_loss_rel_gap": rel_gap,
    }, indent=2))


if __name__ == "__main__":
    main()
