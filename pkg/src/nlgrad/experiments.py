"""Numerical sweeps over the fractional order with machine-readable reports.

Each sweep returns a ``SweepReport`` whose verdict is recomputed from its
rows by a registered check, so a serialized report can be re-verified.
Thresholds are calibration choices and are echoed in the report.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .fields import gaussian, gaussian_bump, masked_random_field, moment_free_bump, random_bandlimited, smooth_window
from .grid import DomainMask, GridFunction, PeriodicGrid, build_masks, lp_norm, sup_norm
from .kernel import (
    CutoffProfile,
    KernelDomainError,
    KernelParams,
    q_hat_radial,
    q_kernel_eval,
    q_l1_norm,
    q_tail_mass,
    scaling_constant,
)
from .nlops import (
    classical_gradient,
    fractional_gradient,
    grad_r_convolution,
    nl_divergence,
    nl_gradient,
    nl_gradient_direct,
    p_translate,
    q_translate,
    ratio_multiplier_sup,
)

__all__ = [
    "SweepReport",
    "VERDICTS",
    "kernel_table",
    "identity_suite",
    "identity_case",
    "localization_sweep",
    "s_continuity_sweep",
    "poincare_sweep",
    "l1_limit_sweep",
    "decay_check_R",
    "multiplier_sweep",
    "parallel_map",
]

REPORT_VERSION = 1


def _clean(obj):
    """Make parameters JSON-safe and deterministic."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, PeriodicGrid):
        return obj.to_dict()
    return obj


@dataclass
class SweepReport:
    experiment_id: str
    parameters: dict
    columns: list
    rows: list
    verdict: bool = False
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        self.parameters = _clean(self.parameters)
        self.rows = [[_clean(v) for v in row] for row in self.rows]
        self.notes = _clean(self.notes)
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ValueError(f"row {row} does not match columns {self.columns}")

    def recompute_verdict(self) -> bool:
        return bool(VERDICTS[self.experiment_id](self.rows, self.parameters))

    def finalize(self) -> "SweepReport":
        self.verdict = self.recompute_verdict()
        return self

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [row[i] for row in self.rows]

    def to_dict(self) -> dict:
        return {
            "report_version": REPORT_VERSION,
            "experiment_id": self.experiment_id,
            "parameters": self.parameters,
            "columns": list(self.columns),
            "rows": self.rows,
            "verdict": "pass" if self.verdict else "fail",
            "notes": self.notes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SweepReport":
        d = json.loads(text)
        return cls(d["experiment_id"], d["parameters"], d["columns"], d["rows"],
                   d["verdict"] == "pass", d.get("notes", {}))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# experiment: {self.experiment_id}\n")
        buf.write(f"# columns: {', '.join(self.columns)}\n")
        for k, v in sorted(self.notes.items()):
            buf.write(f"# {k}: {v}\n")
        buf.write(f"# verdict: {'pass' if self.verdict else 'fail'}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
        return buf.getvalue()

    def write(self, out_dir, stamp: str) -> tuple:
        """Write ``<experiment_id>_<stamp>.json`` and ``.csv``."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        base = out / f"{self.experiment_id}_{stamp}"
        jp, cp = base.with_suffix(".json"), base.with_suffix(".csv")
        jp.write_text(self.to_json())
        cp.write_text(self.to_csv())
        return jp, cp


def parallel_map(fn: Callable, items: Sequence, jobs: int = 1) -> list:
    """Ordered map; threads when ``jobs > 1`` (numpy FFTs release the GIL)."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------------------
# verdict checks (rows, parameters) -> bool

def _strictly_decreasing(xs) -> bool:
    return all(b < a for a, b in zip(xs, xs[1:]))


def _non_increasing(xs) -> bool:
    return all(b <= a for a, b in zip(xs, xs[1:]))


def _tail(rows, s_min):
    return [r for r in sorted(rows, key=lambda r: r[0]) if r[0] >= s_min]


def _check_localization(rows, prm):
    tail = _tail(rows, prm["tail_start"])
    if not tail:
        return False
    errs = [r[1] for r in tail]
    scale = prm["gradient_sup"]
    if scale == 0:
        return all(e == 0 for e in errs)
    # duplicated s values give identical rows, which must not count as an increase
    uniq = [r for i, r in enumerate(tail) if i == 0 or r[0] != tail[i - 1][0]]
    return _strictly_decreasing([r[1] for r in uniq]) and errs[-1] <= prm["final_tol"] * scale


def _check_continuity(rows, prm):
    rows = sorted(rows, key=lambda r: -r[1])
    dist = [r[1] for r in rows]
    errs = [r[2] for r in rows]
    if all(e == 0 for e in errs):
        return True
    ok = True
    for (d0, e0), (d1, e1) in zip(zip(dist, errs), zip(dist[1:], errs[1:])):
        if d1 == 0:
            ok &= e1 == 0
            continue
        halvings = math.log2(d0 / d1)
        ok &= e1 * prm["min_ratio"] ** halvings <= e0
    return ok


def _check_poincare(rows, prm):
    maxima = [r[1] for r in rows]
    return all(math.isfinite(m) and m > 0 for m in maxima) and max(maxima) <= prm["band"] * min(maxima)


def _check_l1(rows, prm):
    tail = _tail(rows, prm["tail_start"])
    if not tail:
        return False
    gaps = [abs(r[1] - 1.0) for r in tail]
    masses = [r[2] for r in tail]
    return (_non_increasing(gaps) and _non_increasing(masses)
            and gaps[-1] <= prm["norm_tol"] and masses[-1] <= prm["tail_tol"])


def _check_decay(rows, prm):
    return all(math.isfinite(r[2]) and r[2] <= prm["bound"] for r in rows)


def _check_multiplier(rows, prm):
    sups = [r[2] for r in rows]
    changes = [r[4] for r in rows]
    mihlin = [r[5] for r in rows]
    return (max(sups) <= prm["sup_bound"] and max(changes) <= prm["resolution_tol"]
            and max(mihlin) <= prm["mihlin_bound"])


def _check_kernel(rows, prm):
    delta = prm["delta"]
    return all(math.isfinite(r[3]) and r[3] >= 0 and (r[2] < delta or r[3] == 0) for r in rows)


def _check_identities(rows, prm):
    tol = prm["tolerances"]
    keys = ["adjoint", "pq", "qp", "factor", "direct", "gap"]
    for r in rows:
        for k, v in zip(keys, r[4:]):
            if v is None:
                continue
            if not (math.isfinite(v) and v <= tol[k]):
                return False
    return True


VERDICTS = {
    "kernel": _check_kernel,
    "identities": _check_identities,
    "localization": _check_localization,
    "s_continuity": _check_continuity,
    "poincare": _check_poincare,
    "l1_limit": _check_l1,
    "decay_R": _check_decay,
    "multiplier": _check_multiplier,
}


# ---------------------------------------------------------------------------
# sweeps


def localization_sweep(phi: GridFunction = None, s_list=(0.9, 0.95, 0.99, 0.999), delta: float = 1.0,
                       *, grid: PeriodicGrid = None, p: float = 2.0, tail_start: float = 0.9,
                       final_tol: float = 1e-2, jobs: int = 1) -> SweepReport:
    """Distance between ``D^s_delta phi`` and ``grad phi`` as ``s`` increases to 1."""
    if phi is None:
        phi = gaussian_bump(grid or PeriodicGrid(1, 8.0, 256), 0.4)
    grad = classical_gradient(phi)

    def row(s):
        diff = nl_gradient(phi, s, delta) - grad
        return [float(s), sup_norm(diff), lp_norm(diff, p)]

    rows = parallel_map(row, list(s_list), jobs)
    prm = {"s_list": list(s_list), "delta": delta, "grid": phi.grid, "p": p,
           "tail_start": tail_start, "final_tol": final_tol, "gradient_sup": sup_norm(grad)}
    notes = {"criterion": f"sup error strictly decreasing for s >= {tail_start}, "
                          f"final sup error <= {final_tol} * sup|grad phi| (calibrated threshold)"}
    return SweepReport("localization", prm, ["s", "sup_error", f"L{p:g}_error"], rows, notes=notes).finalize()


def s_continuity_sweep(u: GridFunction = None, s_center: float = 0.5, s_list=(0.6, 0.55, 0.525),
                       delta: float = 1.0, *, p: float = 2.0, min_ratio: float = 2.0,
                       jobs: int = 1) -> SweepReport:
    """``||D^{s_j} u - D^{s_c} u||_p`` as ``s_j -> s_c``."""
    if not 0.0 <= s_center < 1.0:
        raise KernelDomainError("s_center must lie in [0, 1)")
    if u is None:
        u = gaussian_bump(PeriodicGrid(1, 8.0, 256), 0.4)
    base = nl_gradient(u, s_center, delta)

    def row(s):
        return [float(s), abs(float(s) - s_center), lp_norm(nl_gradient(u, s, delta) - base, p)]

    rows = parallel_map(row, list(s_list), jobs)
    prm = {"s_center": s_center, "s_list": list(s_list), "delta": delta, "grid": u.grid,
           "p": p, "min_ratio": min_ratio}
    notes = {"criterion": f"error shrinks by >= {min_ratio}x per halving of |s_j - s_center|"}
    return SweepReport("s_continuity", prm, ["s", "distance", f"L{p:g}_error"], rows, notes=notes).finalize()


def poincare_sweep(mask: DomainMask = None, s_list=(0.0, 0.25, 0.5, 0.75, 0.95, 1.0), samples: int = 64,
                   seed: int = 0, *, p: float = 2.0, kmax: float = 1.0, band: float = 10.0,
                   jobs: int = 1) -> SweepReport:
    """Monte-Carlo maxima of ``||u||_p / ||D^s u||_p`` over fields supported in ``Omega_{-delta}``.

    The same seeded samples are used for every ``s``.  The maximum is a lower
    bound for the Poincare constant, not an estimate of it.
    """
    if samples < 32:
        raise ValueError("poincare_sweep needs at least 32 samples")
    if mask is None:
        mask = build_masks({"shape": "interval", "bounds": [-2.0, 2.0]}, PeriodicGrid(1, 8.0, 256), 0.5)
    rng = np.random.default_rng(seed)
    window = smooth_window(mask)
    s_list = list(s_list)

    def ratios_for(u):
        du = np.array(parallel_map(lambda s: lp_norm(nl_gradient(u, s, mask.delta), p, mask.omega), s_list, jobs))
        return lp_norm(u, p, mask.omega) / du, du

    table = []
    rejected = 0
    while len(table) < samples:
        u = masked_random_field(mask, rng, kmax, window)
        ratios, du = ratios_for(u)
        # division guard: resample if any nonlocal gradient is numerically zero
        if du.min() < 1e-14:
            rejected += 1
            if rejected > 10 * samples:
                raise RuntimeError("random field sampler keeps producing degenerate fields")
            continue
        table.append(ratios)
    table = np.array(table)
    rows = [[float(s), float(table[:, i].max()), float(table[:, i].mean())] for i, s in enumerate(s_list)]
    prm = {"s_list": list(s_list), "samples": samples, "seed": seed, "p": p, "kmax": kmax,
           "band": band, "delta": mask.delta, "geometry": mask.spec, "grid": mask.grid}
    notes = {"criterion": f"max ratio varies by <= {band}x across s (calibrated threshold)",
             "interpretation": "Monte-Carlo maxima are lower bounds on the Poincare constant",
             "rejected_samples": rejected}
    return SweepReport("poincare", prm, ["s", "max_ratio", "mean_ratio"], rows, notes=notes).finalize()


def l1_limit_sweep(s_list=(0.0, 0.5, 0.9, 0.95, 0.99, 0.999), delta: float = 1.0, b0: float = 0.5,
                   eps: float = 0.25, *, dim: int = 1, tail_start: float = 0.9,
                   norm_tol: float = 0.05, tail_tol: float = 0.05) -> SweepReport:
    """``||Q^s||_{L^1}`` and its mass outside ``B(0, eps)`` as ``s -> 1``."""
    if not 0.0 < eps <= delta:
        raise ValueError("need 0 < eps <= delta")
    cut = CutoffProfile(delta, b0)
    rows = []
    for s in s_list:
        p = KernelParams(dim, float(s), cut)
        rows.append([float(s), q_l1_norm(p), q_tail_mass(p, eps)])
    prm = {"s_list": list(s_list), "delta": delta, "b0": b0, "eps": eps, "dim": dim,
           "tail_start": tail_start, "norm_tol": norm_tol, "tail_tol": tail_tol}
    notes = {"criterion": "|norm - 1| and tail mass non-increasing for s >= tail_start; "
                          f"final norm within {norm_tol} of 1, final tail <= {tail_tol}"}
    return SweepReport("l1_limit", prm, ["s", "l1_norm", "tail_mass"], rows, notes=notes).finalize()


def decay_check_R(s_list=(0.0, 0.25, 0.5, 0.75, 0.95, 0.999), freq_list=(1.0, 2.0, 4.0, 8.0, 16.0),
                  delta: float = 1.0, *, dim: int = 1, b0: float = 0.5, bound: float = 1.0) -> SweepReport:
    """``|xi| |Q-hat^s(xi) - |2 pi xi|^{s-1}|`` for ``|xi| >= 1``."""
    if min(freq_list) < 1.0:
        raise ValueError("decay check is stated for |xi| >= 1")
    cut = CutoffProfile(delta, b0)
    rows = []
    for s in s_list:
        p = KernelParams(dim, float(s), cut)
        xi = np.asarray(freq_list, dtype=float)
        rhat = q_hat_radial(xi, p) - (2 * math.pi * xi) ** (float(s) - 1.0)
        rows += [[float(s), float(x), float(x * abs(r))] for x, r in zip(xi, rhat)]
    prm = {"s_list": list(s_list), "freq_list": list(freq_list), "delta": delta, "dim": dim,
           "b0": b0, "bound": bound}
    notes = {"criterion": f"|xi| |R-hat| <= {bound} for all rows (one constant for every s)"}
    return SweepReport("decay_R", prm, ["s", "xi", "xi_times_Rhat"], rows, notes=notes).finalize()


def multiplier_sweep(orders=(0.0, 0.25, 0.5, 0.75, 0.95), grid: PeriodicGrid = None, delta: float = 1.0,
                     *, sup_bound: float = 2.0, resolution_tol: float = 0.05,
                     mihlin_bound: float = 2.0, jobs: int = 1) -> SweepReport:
    """Sup of ``Q-hat^s / Q-hat^t`` over ``s <= t``, at ``N`` and ``2N``.

    Rows carry the relative change of the sup under grid doubling and the
    first-order Mihlin product ``max |xi| |dm/dr|`` over ``|xi| >= 1``.
    """
    grid = grid or PeriodicGrid(1, 8.0, 128)
    fine = PeriodicGrid(grid.dim, grid.box_length, 2 * grid.points)
    pairs = [(s, t) for s in orders for t in orders if s <= t]

    def row(st):
        s, t = st
        a = ratio_multiplier_sup(s, t, grid, delta)
        b = ratio_multiplier_sup(s, t, fine, delta)
        change = abs(b["sup"] - a["sup"]) / a["sup"]
        return [float(s), float(t), a["sup"], b["sup"], change, max(a["mihlin"], b["mihlin"])]

    rows = parallel_map(row, pairs, jobs)
    prm = {"orders": list(orders), "grid": grid, "delta": delta, "sup_bound": sup_bound,
           "resolution_tol": resolution_tol, "mihlin_bound": mihlin_bound}
    notes = {"criterion": f"all sups <= {sup_bound}, change under N doubling <= {resolution_tol}, "
                          f"Mihlin product <= {mihlin_bound} (calibrated constants)"}
    cols = ["s", "t", "sup_N", "sup_2N", "relative_change", "mihlin"]
    return SweepReport("multiplier", prm, cols, rows, notes=notes).finalize()


def kernel_table(s_list=(0.0, 0.5, 0.9), radii=(0.05, 0.1, 0.25, 0.5, 0.75, 1.0, 1.5), delta: float = 1.0,
                 *, dim: int = 1, b0: float = 0.5) -> SweepReport:
    """``Q^s_delta(r)`` and ``c_{n,s}`` on a table of radii."""
    cut = CutoffProfile(delta, b0)
    rows = []
    for s in s_list:
        p = KernelParams(dim, float(s), cut)
        vals = q_kernel_eval(np.asarray(radii, dtype=float), p)
        c = scaling_constant(dim, float(s))
        rows += [[float(s), c, float(r), float(v)] for r, v in zip(radii, vals)]
    prm = {"s_list": list(s_list), "radii": list(radii), "delta": delta, "dim": dim, "b0": b0}
    notes = {"criterion": "Q finite and non-negative, zero for r >= delta"}
    return SweepReport("kernel", prm, ["s", "c_ns", "r", "Q"], rows, notes=notes).finalize()


IDENTITY_TOLERANCES = {"adjoint": 1e-11, "pq": 1e-10, "qp": 1e-10, "factor": 1e-12, "direct": 1e-6,
                       "gap": 1e-6}


def _relative(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def identity_case(n: int, s: float, delta: float, points: int, *, seed: int = 0, box: float = 8.0,
                  probes: int = 6, gap: bool = True) -> list:
    """One row ``(n, s, delta, N, adjoint, pq, qp, factor, direct, gap)`` of relative errors.

    * adjoint: ``|<D u, psi> + <u, div psi>|`` over ``||D u|| ||psi||`` for random fields;
    * pq, qp: ``P Q u`` and ``Q P u`` against ``u`` (random mean-zero field);
    * factor: ``D u`` against ``grad(Q u)``;
    * direct: spectral ``D u`` of a Gaussian against the principal-value quadrature
      of the analytic Gaussian at probe points, relative to ``max |D u|``;
    * gap: ``D^s_delta u - D^s u - grad R * u`` on a moment-free bump (``None`` when skipped).
    """
    grid = PeriodicGrid(n, box, points)
    grid.check_horizon(delta)
    rng = np.random.default_rng(seed)
    u = random_bandlimited(grid, rng)
    psi = random_bandlimited(grid, rng, components=n)
    h = grid.cell_volume
    Du = nl_gradient(u, s, delta)
    lhs = float(np.sum(Du.values * psi.values) * h)
    rhs = -float(np.sum(u.values * nl_divergence(psi, s, delta).values) * h)
    scale = math.sqrt(float(np.sum(Du.values ** 2) * h) * float(np.sum(psi.values ** 2) * h))
    adjoint = abs(lhs - rhs) / scale
    v = GridFunction(grid, u.values - u.values.mean())
    pq = _relative(p_translate(q_translate(v, s, delta), s, delta).values, v.values)
    qp = _relative(q_translate(p_translate(v, s, delta), s, delta).values, v.values)
    factor = _relative(classical_gradient(q_translate(u, s, delta)).values, Du.values)

    width, center = 0.4, np.full(n, 0.1)
    phi = gaussian_bump(grid, width, center)
    Dphi = nl_gradient(phi, s, delta).values
    idx = rng.choice(grid.points, size=(probes, n))
    pts = np.stack([grid.axis[idx[:, j]] for j in range(n)], axis=-1)
    direct_vals = nl_gradient_direct(gaussian(width, center), s, delta, pts, grid=grid)
    spectral_vals = np.stack([Dphi[(j,) + tuple(idx.T)] for j in range(n)], axis=-1)
    direct = float(np.abs(direct_vals - spectral_vals).max() / np.abs(Dphi).max())

    gap_err = None
    if gap:
        b = moment_free_bump(grid)
        Db = nl_gradient(b, s, delta)
        diff = Db.values - fractional_gradient(b, s).values - grad_r_convolution(b, s, delta).values
        gap_err = float(np.linalg.norm(diff) / np.linalg.norm(Db.values))
    return [n, float(s), float(delta), points, adjoint, pq, qp, factor, direct, gap_err]


def identity_suite(dims=(1, 2), s_list=(0.0, 0.25, 0.5, 0.75, 0.95), deltas=(0.5, 1.0), points=(128, 256),
                   *, seed: int = 0, gap: bool = True, tolerances: dict = None, jobs: int = 1) -> SweepReport:
    """Operator identities over the product of dimensions, orders, horizons and grid sizes."""
    tol = dict(IDENTITY_TOLERANCES, **(tolerances or {}))
    cases = [(n, s, d, N) for n in dims for s in s_list for d in deltas for N in points]
    rows = parallel_map(lambda c: identity_case(*c, seed=seed, gap=gap), cases, jobs)
    prm = {"dims": list(dims), "s_list": list(s_list), "deltas": list(deltas), "points": list(points),
           "seed": seed, "gap": gap, "tolerances": tol}
    notes = {"criterion": "every relative error below its tolerance: "
                          + ", ".join(f"{k} <= {v:g}" for k, v in tol.items())}
    cols = ["n", "s", "delta", "N", "adjoint", "pq", "qp", "factor", "direct", "gap"]
    return SweepReport("identities", prm, cols, rows, notes=notes).finalize()
