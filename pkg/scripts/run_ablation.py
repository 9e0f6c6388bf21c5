"""Full ablation grid at study scale: tokenizer x lambda x weight decay.

Eight cells, each averaged over seeds; expect a few minutes per
(cell, seed) at the defaults below, roughly half an hour at --seeds 1.

Usage:
    python scripts/run_ablation.py --out runs/ablation [--seeds 1] [--epochs 40]
"""
import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from sercap.config import ExperimentConfig
from sercap.harness import run_ablation


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", required=True)
    parser.add_argument("--seeds", type=int, default=1)
    parser.add_argument("--epochs", type=int, default=40)
    args = parser.parse_args()

    base = ExperimentConfig()
    base.model.d_model = 96
    base.model.decoder_layers = 2
    base.model.heads = 4
    base.model.d_ff = 192
    base.model.d_sent = 128
    base.model.dropout = 0.0
    base.optim.epochs = args.epochs
    base.batch_size = 64

    run_ablation(base, args.out, n_seeds=args.seeds)
    print((Path(args.out) / "ablation.md").read_text())


if __name__ == "__main__":
    main()
