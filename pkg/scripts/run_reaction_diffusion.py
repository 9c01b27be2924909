#!/usr/bin/env python3
"""Desk-scale reaction-diffusion benchmark: train the surrogate, evaluate it.

Generates the two-fidelity training data (fine grid with true diffusion vs
coarse grid with corrupted diffusion), runs the offline stage, then scores
the surrogate against fresh high-fidelity references at 25 unseen parameter
values over twice the training horizon. Writes the model, the per-column
error CSV, and a text summary into --out-dir.

Takes roughly 10-20 minutes on a laptop; most of it is the high-fidelity
reference sweep and the timing loops.
"""

import argparse
import time
from pathlib import Path

import numpy as np

from mfpod import pipeline
from mfpod.presets import rd_desk
from mfpod.snapshots import write_snapshots
from mfpod.solvers import generate_dataset


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="results/reaction_diffusion")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--timing-reps", type=int, default=3)
    args = parser.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bundle = rd_desk(seed=args.seed)

    t0 = time.perf_counter()
    print("generating training data ...", flush=True)
    hf = generate_dataset(bundle.problem, bundle.hf_profile, bundle.train_params,
                          bundle.t_train)
    lf = generate_dataset(bundle.problem, bundle.lf_profile, bundle.train_params,
                          bundle.t_train)
    print(f"  HF {hf.data.shape}, LF {lf.data.shape}  [{time.perf_counter()-t0:.0f}s]",
          flush=True)

    print("offline stage (basis + network) ...", flush=True)
    model = pipeline.offline_train(
        hf, lf, bundle.pod_rule, bundle.train_cfg,
        spatial_mode=bundle.spatial_mode, problem=bundle.problem,
        hf_profile=bundle.hf_profile, lf_profile=bundle.lf_profile,
    )
    pipeline.save_model(model, out / "model.mfsurr")
    print(f"  basis modes: {model.basis.n_pod}  [{time.perf_counter()-t0:.0f}s]",
          flush=True)

    print("high-fidelity reference sweep ...", flush=True)
    reference = generate_dataset(bundle.problem, bundle.hf_profile,
                                 bundle.test_params, bundle.t_final)
    write_snapshots(reference, out / "reference.mfsnap")

    print("evaluation ...", flush=True)
    report = pipeline.evaluate(model, bundle.test_params, bundle.t_final,
                               reference, timing_reps=args.timing_reps)
    report.to_csv(out / "report.csv")
    (out / "summary.txt").write_text(report.summary() + "\n")
    print(report.summary())
    print(f"done in {time.perf_counter()-t0:.0f}s; artifacts in {out}")


if __name__ == "__main__":
    main()
