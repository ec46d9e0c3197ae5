"""Two-phase quadratic energies: cell-problem coefficient and convergence of minima in eps."""
import argparse

from nlgrad.variational import homogenization_sweep, homogenized_integrand, two_phase


def main(a, eps_list, s: float):
    harmonic = 2.0 / (1.0 / a[0] + 1.0 / a[1])
    for k in (1, 2, 4):
        val = homogenized_integrand(two_phase(tuple(a), 1.0), 1.0, k)
        print(f"f_hom(1) with {k} cell(s): {float(val):.6f}  (harmonic mean {harmonic:.6f})")
    rep = homogenization_sweep(tuple(a), tuple(eps_list), s=s, expected_f_hom=harmonic)
    print(f"{'eps':>8} {'min F_eps':>12} {'min F_hom':>12} {'gap':>10}")
    for eps, Fe, Fh, gap in rep.rows:
        print(f"{eps:8.4f} {Fe:12.6f} {Fh:12.6f} {gap:10.2e}")
    print("verdict:", "pass" if rep.verdict else "fail")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--a", type=float, nargs=2, default=[1.0, 4.0])
    ap.add_argument("--eps", type=float, nargs="+", default=[0.25, 0.125, 0.0625])
    ap.add_argument("--s", type=float, default=0.5)
    a = ap.parse_args()
    main(a.a, a.eps, a.s)
