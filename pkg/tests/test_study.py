import math

import numpy as np
import pytest

from ehldg.assembly import FormParams
from ehldg.study import (CSV_HEADER, ROUGH_1D, SMOOTH_1D, ManufacturedCase, RateRow, RateTable, estimate_rate,
                         obstacle_case, run_h_sweep, run_p_sweep, run_penalty_sweep, solve_manufactured)


def test_estimate_rate_examples():
    assert estimate_rate([0.1, 0.025], [0.1, 0.05]) == pytest.approx(2.0, abs=1e-14)
    assert estimate_rate([0.1, 0.05], [0.1, 0.05]) == pytest.approx(1.0, abs=1e-14)
    h = np.array([0.1, 0.05, 0.025])
    assert estimate_rate(3.0 * h**1.5, h) == pytest.approx(1.5, abs=1e-12)


@pytest.mark.parametrize("e,h", [([0.1, 0.0], [0.1, 0.05]), ([0.1, -1.0], [0.1, 0.05]), ([0.1], [0.1]),
                                 ([0.1, 0.2], [0.1, 0.1])])
def test_estimate_rate_rejects(e, h):
    with pytest.raises(ValueError):
        estimate_rate(e, h)


def test_manufactured_forcing_consistent():
    case = ManufacturedCase("t", "x**2", coefficient="nonlinear")
    # -(eps(u) u')' with eps = 1 + u^2, u = x^2:  -(2x + 2x^5)' = -2 - 10 x^4
    x = np.array([0.3, 0.7])
    np.testing.assert_allclose(case.forcing()(x), -2 - 10 * x**4, rtol=1e-14)


def test_smooth_rates_p1():
    t = run_h_sweep(SMOOTH_1D, (1,), 4)
    assert len(t.rows) == 4 and all(r.status == "ok" for r in t.rows)
    np.testing.assert_allclose(t.rates(1, "l2"), 2.0, atol=0.1)
    np.testing.assert_allclose(t.rates(1, "energy"), 1.0, atol=0.1)
    assert math.isnan(t.rows[0].rate_l2)


def test_polynomial_in_space_is_exact():
    case = ManufacturedCase("poly", "x*(1 - x)")
    u = solve_manufactured(case, 4, 2, FormParams(theta=1.0))
    from ehldg.dgspace import l2_error
    assert l2_error(u, case.exact()) < 1e-12


def test_p_sweep_monotone_and_rough_slower():
    smooth = run_p_sweep(SMOOTH_1D, cells=4, degrees=(1, 2, 3, 4))
    errs = [r.err_l2 for r in smooth.rows]
    assert all(a > b for a, b in zip(errs, errs[1:]))
    assert all(math.isnan(r.rate_l2) for r in smooth.rows)
    rough = run_p_sweep(ROUGH_1D, cells=4, degrees=(1, 2, 3, 4))
    re = [r.err_l2 for r in rough.rows]
    assert re[0] / re[-1] < errs[0] / errs[-1]


def test_csv_round_trip_and_schema():
    t = RateTable("x", "abc", [RateRow(0.5, 1, 0.0, 0.1, 0.2, 0.3), RateRow(0.25, 1, 0.0, 0.025, 0.1, 0.15),
                               RateRow(0.125, 1, 0.0, status="failed")]).finalize()
    text = t.to_csv()
    assert text.splitlines()[0] == ",".join(CSV_HEADER)
    assert text.splitlines()[-1].endswith(",failed")
    back = RateTable.from_csv(text)
    assert back.to_csv() == text
    assert back.rows[1].rate_l2 == pytest.approx(2.0)
    with pytest.raises(ValueError):
        RateTable.from_csv("a,b\n1,2\n")


def test_penalty_sweep_contact_case():
    case = obstacle_case("contact")
    rows = run_penalty_sweep(case, [None, 1e-2, 1e-3, 1e-3], cells=64)
    off = rows[0]
    assert off.min_u < 0 and math.isinf(off.eps_p)
    assert rows[2] == rows[3]
    assert rows[2].err_l2 < rows[1].err_l2
    for r in rows[1:]:
        assert r.min_u >= -10 * r.eps_p * case.max_abs_f


def test_flat_obstacle():
    case = obstacle_case("flat")
    rows = run_penalty_sweep(case, [None, 1e-4], cells=32)
    assert rows[0].min_u < 0
    assert rows[1].err_l2 < rows[0].err_l2
    with pytest.raises(ValueError):
        obstacle_case("bumpy")
