"""From a stable cycle to chaos as delta decreases.

Run ``python3 demos/delta_sweep.py [out_dir] [n_delta]``. The default grid
of 40 points takes about a minute on one core.
"""
import os
import sys

from btfold import experiments as ex
from btfold.plotting import emit_plot


def main(out="demo_out", n_delta=40):
    os.makedirs(out, exist_ok=True)
    recs = ex.run_delta_sweep({"n_delta": int(n_delta)})
    for r in recs:
        print(f"delta={r.delta:.4f}  {r.attractor_kind:18s} clusters={r.clusters:3d}"
              f"  lyapunov={r.lyapunov:+.5f} +- {r.lyapunov_error:.1e}")
    pts = [(r.delta, z) for r in recs for z in r.return_samples]
    emit_plot({"x": [p[0] for p in pts], "y": [p[1] for p in pts]}, "bifurcation",
              os.path.join(out, "bifurcation.svg"), xlabel="delta", ylabel="z", log_x=True)
    print("onset gap (grid steps):", ex.onset_gap(recs))


if __name__ == "__main__":
    main(*sys.argv[1:])
