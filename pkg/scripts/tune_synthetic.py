"""Grid search on the planted-community data, tuning seeds only (100-102).

Prints median test Recall@20 per cell; the chosen cell is reused by every
variant in run_ablation.py and run_robustness.py.
"""
import argparse
import itertools

import numpy as np

from dcdsr.config import TrainConfig
from dcdsr.experiments import fit_and_score
from dcdsr.synthetic import planted_communities

BASE = dict(dim=50, batch_size=512, lr=0.005, max_epochs=100, patience=10)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--ablation", default="full")
    ap.add_argument("--seeds", type=int, nargs="+", default=[100, 101, 102])
    ap.add_argument("--beta-s", type=float, nargs="+", default=[0.5, 0.6, 0.7])
    ap.add_argument("--beta-r", type=float, nargs="+", default=[0.4, 0.45])
    ap.add_argument("--tau", type=float, nargs="+", default=[0.2, 0.5, 1.0])
    args = ap.parse_args()

    data = {s: planted_communities(seed=s).split for s in args.seeds}
    print("beta_s\tbeta_r\ttau\tmedian_recall@20\tper_seed")
    for bs, br, tau in itertools.product(args.beta_s, args.beta_r, args.tau):
        recalls = []
        for s in args.seeds:
            cfg = TrainConfig(**BASE, beta_s=bs, beta_r=br, tau=tau, ablation=args.ablation, seed=s)
            recalls.append(fit_and_score(data[s], cfg)[0].recall[20])
        print(f"{bs}\t{br}\t{tau}\t{np.median(recalls):.4f}\t{','.join(f'{r:.4f}' for r in recalls)}", flush=True)


if __name__ == "__main__":
    main()
