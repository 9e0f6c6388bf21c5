"""Four-run overfitting study: {small wd, large wd} x {regression loss off, on}.

Trains the reduced study model on the default synthetic split and renders
a 2x2 panel (validation CE and validation sentence cosine, one column per
weight decay).  Takes roughly 10 minutes per seed on a small CPU box.

Usage:
    python scripts/regularization_study.py --out runs/reg_study [--seed 0] [--epochs 40]
"""
import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from sercap.config import ExperimentConfig
from sercap.harness import train, write_curve


def study_config(ser_weight, weight_decay, seed, epochs):
    cfg = ExperimentConfig()
    cfg.model.d_model = 96
    cfg.model.decoder_layers = 2
    cfg.model.heads = 4
    cfg.model.d_ff = 192
    cfg.model.d_enc = 64
    cfg.model.d_sent = 128
    cfg.model.dropout = 0.0  # dropout hides the effect at this scale
    cfg.optim.epochs = epochs
    cfg.optim.weight_decay = weight_decay
    cfg.loss.ser_weight = ser_weight
    cfg.batch_size = 64
    cfg.seed = seed
    return cfg


RUNS = {
    "wd1e-6_base": (0.0, 1e-6),
    "wd1e-6_ser": (100.0, 1e-6),
    "wd2_base": (0.0, 2.0),
    "wd2_ser": (100.0, 2.0),
}


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", required=True)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--epochs", type=int, default=40)
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    curves = {}
    for label, (lam, wd) in RUNS.items():
        print(f"== {label} (lambda={lam:g}, wd={wd:g}) ==", flush=True)
        result = train(study_config(lam, wd, args.seed, args.epochs), out / label)
        curves[label] = result.curve
        rise = result.curve[-1].val_ce - min(r.val_ce for r in result.curve)
        print(f"   min val CE {min(r.val_ce for r in result.curve):.4f}  "
              f"final {result.curve[-1].val_ce:.4f}  rise {rise:.4f}")
        write_curve(result.curve, out / f"{label}.csv")

    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib unavailable; CSVs written, no figure")
        return

    fig, axes = plt.subplots(2, 2, figsize=(10, 7), sharex=True)
    panels = [
        ("val_ce", "wd1e-6", "validation CE, wd=1e-6"),
        ("val_ce", "wd2", "validation CE, wd=2"),
        ("val_sbert", "wd1e-6", "validation sentence cosine, wd=1e-6"),
        ("val_sbert", "wd2", "validation sentence cosine, wd=2"),
    ]
    for ax, (metric, wd_key, title) in zip(axes.reshape(-1), panels):
        for suffix, style in (("base", "-"), ("ser", "--")):
            rows = curves[f"{wd_key}_{suffix}"]
            ax.plot([r.epoch for r in rows],
                    [getattr(r, metric) for r in rows],
                    style, label=f"{suffix} (lambda={'0' if suffix == 'base' else '100'})")
        ax.set_title(title, fontsize=9)
        ax.set_xlabel("epoch")
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out / "study.png", dpi=130)
    print(f"figure written to {out / 'study.png'}")


if __name__ == "__main__":
    main()
