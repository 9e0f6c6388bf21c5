"""Optimization sanity: memorize 32 noise-free clips.

The run disables label smoothing, dropout, and the regression branch so
the reported train loss is the plain teacher-forced CE in nats/token; it
should fall below 0.1 well within 100 epochs (about half a minute).

Usage:
    python scripts/overfit_check.py --out runs/overfit
"""
import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from sercap.config import ExperimentConfig
from sercap.harness import train


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", required=True)
    parser.add_argument("--epochs", type=int, default=100)
    args = parser.parse_args()

    cfg = ExperimentConfig()
    cfg.model.d_model = 96
    cfg.model.decoder_layers = 2
    cfg.model.heads = 4
    cfg.model.d_ff = 192
    cfg.model.d_sent = 128
    cfg.model.dropout = 0.0
    cfg.corpus.n_train = 32
    cfg.corpus.n_val = 8
    cfg.corpus.n_test = 8
    cfg.corpus.noise_sigma = 0.0
    cfg.optim.epochs = args.epochs
    cfg.batch_size = 8
    cfg.loss.ser_weight = 0.0
    cfg.loss.label_smoothing = 0.0

    t0 = time.time()
    result = train(cfg, args.out)
    best = min(r.train_loss for r in result.curve)
    print(f"best train CE {best:.5f} nats/token in {time.time() - t0:.0f}s "
          f"({'OK' if best < 0.1 else 'NOT MEMORIZED'})")


if __name__ == "__main__":
    main()
