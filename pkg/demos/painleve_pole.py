"""First pole of the tritronquee solution of y'' = -z + y^2.

Run ``python3 demos/painleve_pole.py``. The pole is where the jump
through a fold lands after rescaling, so it fixes the transition constant.
"""
from btfold import experiments as ex
from btfold import painleve as pl


def main():
    omega, rows = pl.compute_omega()
    for r in rows:
        print(f"seed z={r['z_init']:5.1f}  pole {r['z0']:.10f}")
    print(f"extrapolated pole {omega:.8f}  (reference {pl.OMEGA_REFERENCE})")
    pole = pl.find_pole(pl.asymptotic_eval(pl.AsymptoticParams(order=1), 80.0))
    fit = pl.laurent_fit(pole)
    print(f"Laurent fit: order {fit['order']:.6f}, coefficient {fit['coefficient']:.6f},"
          f" s^2 term {fit['quadratic']:.6f} vs z0/10 = {fit['z0'] / 10:.6f}")
    # the same pole through the singular limit of the normal form
    lim = ex.run_omega_limit()
    print(f"Z_out / eps^(4/5) -> {lim.limit:.5f} (error {lim.relative_error:.2%})")


if __name__ == "__main__":
    main()
