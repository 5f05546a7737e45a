"""Relaxation cycle of the example system and its Floquet multipliers.

Run ``python3 demos/relaxation_cycle.py [out_dir]``.
"""
import os
import sys

import numpy as np

from btfold import experiments as ex
from btfold.plotting import emit_plot


def main(out="demo_out"):
    os.makedirs(out, exist_ok=True)
    res = ex.run_periodic_orbit({"eps": 0.01, "delta": 1.0})
    po = res.orbit
    print(f"period          {po.period:.6f}")
    print(f"section point   {po.section_point}")
    print(f"Newton residual {po.residual:.2e} after {po.iterations} steps")
    # moduli this small only survive as logarithms
    for k, lg in enumerate(po.log_abs_multipliers):
        print(f"log|lambda_{k}|    {lg:.3f}  (half eps: {res.orbit_half_eps.log_abs_multipliers[k]:.3f})")
    print("distance to folds", res.fold_distances)
    print(f"symmetry error  {res.symmetry_error:.2e}")
    path = emit_plot({"x": res.samples[:, 1], "y": res.samples[:, 2]}, "line",
                     os.path.join(out, "cycle_yz.svg"), xlabel="y", ylabel="z",
                     title="relaxation cycle, eps = 0.01")
    print("wrote", path)
    return np.array(po.log_abs_multipliers)


if __name__ == "__main__":
    main(*sys.argv[1:])
