"""Double-well problem with an affine datum: relaxed minimum versus fine laminates.

Prints, per grid, the relaxed minimum, the energy of the laminate built
around the relaxed minimizer and their relative gap.
"""
import argparse

from nlgrad.variational import double_well_envelope_error, relaxation_sweep


def main(points, slope: float, s: float):
    err, dA = double_well_envelope_error()
    print(f"envelope sup error {err:.2e} (table spacing {dA:.2e})")
    rep = relaxation_sweep(tuple(points), slope=slope, s=s)
    print(f"{'N':>6} {'period':>9} {'F_rel_min':>12} {'F_laminate':>12} {'F(u_rel)':>12} {'gap':>9}")
    for N, period, rel, lam, unrel, _, gap, _ in rep.rows:
        print(f"{N:6d} {period:9.4f} {rel:12.6f} {lam:12.6f} {unrel:12.6f} {gap:9.2%}")
    print("verdict:", "pass" if rep.verdict else "fail")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, nargs="+", default=[512, 1024, 2048])
    ap.add_argument("--slope", type=float, default=0.3)
    ap.add_argument("--s", type=float, default=0.5)
    a = ap.parse_args()
    main(a.points, a.slope, a.s)
