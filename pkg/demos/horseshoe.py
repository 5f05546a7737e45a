"""Horseshoe test on a small rectangle around the slow manifold.

Run ``python3 demos/horseshoe.py [out_dir]``. Compares the periodic regime,
where the rectangle maps into itself, with the chaotic window, where its
folded image crosses it several times.
"""
import os
import sys

import numpy as np

from btfold import experiments as ex
from btfold.plotting import emit_plot


def main(out="demo_out"):
    os.makedirs(out, exist_ok=True)
    for delta, c2 in ((1.0, 0.2), (0.025, 0.0)):
        run = ex.run_horseshoe({"delta": delta, "c2": c2})
        rep = run.report
        print(f"delta={delta}  C1={run.c1:.3f}  C2={run.c2:.4g} (tuned {run.tuned_c2:.4g})")
        print(f"  contraction={rep.contraction} crossings={rep.crossing_components}"
              f" winding={rep.winding:.2f} certified={rep.certified}")
        print("  margins", np.round(rep.inequality_values, 3))
        for r in run.rotations:
            print(f"  C2={r['c2']:.4f} rotation {r['turns']:+.3f} turns")
        curves = [np.asarray(c)[np.all(np.isfinite(c), axis=1)] for c in rep.boundary_image]
        emit_plot({"curves": curves, "rect": rep.rectangle, "center": run.center}, "ring",
                  os.path.join(out, f"ring_delta{delta}.svg"), xlabel="x", ylabel="z")


if __name__ == "__main__":
    main(*sys.argv[1:])
