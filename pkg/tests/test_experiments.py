import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlgrad.experiments import (
    VERDICTS,
    SweepReport,
    decay_check_R,
    identity_case,
    identity_suite,
    kernel_table,
    l1_limit_sweep,
    localization_sweep,
    multiplier_sweep,
    parallel_map,
    poincare_sweep,
    s_continuity_sweep,
)
from nlgrad.grid import PeriodicGrid


def test_all_sweep_ids_have_verdicts():
    expected = {"kernel", "identities", "localization", "s_continuity", "poincare", "l1_limit", "decay_R",
                "multiplier", "gamma_s", "homogenization", "relaxation", "minimize"}
    assert expected <= set(VERDICTS)


@settings(max_examples=30, deadline=None)
@given(vals=st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1, max_size=6))
def test_report_json_round_trip(vals):
    rows = [[float(i), v, v / 3] for i, v in enumerate(vals)]
    rep = SweepReport("decay_R", {"bound": 1.0, "grid": PeriodicGrid(1, 8.0, 16)}, ["s", "xi", "xi_times_Rhat"],
                      rows).finalize()
    back = SweepReport.from_json(rep.to_json())
    assert back.rows == rep.rows and back.parameters == rep.parameters
    assert back.verdict == rep.verdict == back.recompute_verdict()
    assert back.to_json() == rep.to_json()


def test_report_csv_is_stable_and_commented(tmp_path):
    rep = decay_check_R(s_list=(0.5,), freq_list=(1.0, 2.0))
    text = rep.to_csv()
    assert text.startswith("# experiment: decay_R\n")
    assert "# verdict: pass" in text
    header = [line for line in text.splitlines() if not line.startswith("#")][0]
    assert header == "s,xi,xi_times_Rhat"
    jp, cp = rep.write(tmp_path, "x")
    assert cp.read_text() == text and json.loads(jp.read_text())["verdict"] == "pass"
    # floats are written with repr so the CSV reproduces them exactly
    data = [line.split(",") for line in text.splitlines()[-2:]]
    assert [float(v) for v in data[0]] == rep.rows[0]


def test_row_shape_is_checked():
    with pytest.raises(ValueError):
        SweepReport("decay_R", {}, ["a", "b"], [[1.0]])


def test_parallel_map_preserves_order():
    items = list(range(20))
    assert parallel_map(lambda x: x * x, items, jobs=4) == [x * x for x in items]


def test_kernel_table_is_positive_and_supported():
    rep = kernel_table()
    assert rep.verdict
    for s, c, r, Q in rep.rows:
        assert (Q > 0) == (r < 1.0)


def test_identity_case_small():
    row = identity_case(1, 0.5, 1.0, 128, probes=3)
    adj, pq, qp, factor, direct, gap = row[4:]
    assert adj <= 1e-11 and pq <= 1e-10 and qp <= 1e-10 and factor <= 1e-12
    assert direct <= 1e-6 and gap <= 1e-6


def test_identity_suite_without_gap_passes_fast():
    rep = identity_suite(dims=(1,), s_list=(0.0, 0.95), deltas=(0.5,), points=(128,), gap=False)
    assert rep.verdict
    assert all(r[-1] is None for r in rep.rows)


def test_identity_verdict_fails_on_large_error():
    rep = identity_suite(dims=(1,), s_list=(0.5,), deltas=(1.0,), points=(128,), gap=False)
    rep.rows[0][4] = 1e-3
    assert not rep.recompute_verdict()


def test_localization_default_passes():
    rep = localization_sweep()
    assert rep.verdict
    errs = rep.column("sup_error")
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_localization_fails_with_impossible_tolerance():
    assert not localization_sweep(final_tol=1e-9).verdict


def test_continuity_default_passes():
    assert s_continuity_sweep().verdict


def test_l1_limit_and_decay_defaults():
    rep = l1_limit_sweep()
    assert rep.verdict
    assert 0.95 <= rep.rows[-1][1] <= 1.05 and rep.rows[-1][2] <= 0.05
    assert decay_check_R().verdict


def test_decay_rejects_low_frequencies():
    with pytest.raises(ValueError):
        decay_check_R(freq_list=(0.5,))


def test_multiplier_sweep_small():
    rep = multiplier_sweep(orders=(0.0, 0.5, 0.95), grid=PeriodicGrid(1, 8.0, 64))
    assert rep.verdict
    for s, t, a, b, change, mihlin in rep.rows:
        if s == t:
            assert math.isclose(a, 1.0, rel_tol=1e-12)


def test_poincare_is_seeded_and_bounded():
    a = poincare_sweep(samples=32, seed=3)
    b = poincare_sweep(samples=32, seed=3, jobs=3)
    assert a.rows == b.rows and a.verdict
    with pytest.raises(ValueError):
        poincare_sweep(samples=8)
