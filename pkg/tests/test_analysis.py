import io
import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.optimize import lsq_linear

from disputesim import analysis
from disputesim.errors import InsufficientSamples, InvalidParam

# (K, G, N) -> published worst-case rounds
PUBLISHED_DELAYS = {
    (16, 2, 2**4): 35,
    (27, 2, 2**8): 72,
    (36, 2, 2**12): 103,
    (45, 2, 2**16): 134,
    (12, 4, 2**4): 17,
    (29, 4, 2**8): 47,
    (31, 4, 2**12): 55,
    (7, 8, 2**4): 8,
    (21, 8, 2**8): 28,
    (25, 8, 2**12): 36,
    (21, 4, 2**4): 29,
    (21, 4, 2**8): 36,
    (21, 4, 2**12): 40,
    (21, 4, 2**16): 44,
    (21, 2, 2**4): 45,
    (21, 2, 2**8): 59,
}


def test_max_delay_rounds_reproduces_published_cells():
    for (k, g, n), rounds in PUBLISHED_DELAYS.items():
        assert analysis.max_delay_rounds(k, g, n) == rounds, (k, g, n)


def test_max_delay_rounds_edge_cases():
    assert analysis.max_delay_rounds(5, 2, 1) == 0
    assert analysis.max_delay_rounds(5, 2, 0) == 0
    assert analysis.max_delay_rounds(5, 2, 2) == 5  # lone Sybil demoted every round
    assert analysis.max_delay_rounds(1, 2, 8) == 3  # K=1: halve every round
    with pytest.raises(InvalidParam):
        analysis.max_delay_rounds(0, 2, 4)


def test_max_delay_rounds_monotonicity():
    for g in (2, 4):
        for k in (2, 5, 9):
            delays = [analysis.max_delay_rounds(k, g, n) for n in range(1, 120)]
            assert delays == sorted(delays)
    for n in (7, 64, 500):
        for g in (2, 4):
            delays = [analysis.max_delay_rounds(k, g, n) for k in range(1, 25)]
            assert delays == sorted(delays)
    for k in (4, 12):
        for n in (16, 256):
            delays = [analysis.max_delay_rounds(k, g, n) for g in (2, 3, 4, 6, 8)]
            assert delays == sorted(delays, reverse=True)


def test_next_larger_n_minimality():
    for k, g in ((4, 2), (7, 3), (21, 4)):
        n = 2
        for _ in range(6):
            n2 = analysis.next_larger_n(k, g, n)
            assert analysis.max_delay_rounds(k, g, n2) > analysis.max_delay_rounds(k, g, n2 - 1)
            assert analysis.max_delay_rounds(k, g, n2 - 1) == analysis.max_delay_rounds(k, g, n)
            assert n2 > n
            n = n2


def test_next_larger_n_against_dense_scan():
    k, g = 4, 2
    dense = [analysis.max_delay_rounds(k, g, n) for n in range(1, 2001)]
    breaks = [n for n in range(2, 2001) if dense[n - 1] > dense[n - 2]]
    chained = []
    n = 1
    while True:
        n = analysis.next_larger_n(k, g, n)
        if n > 2000:
            break
        chained.append(n)
    assert chained == breaks


def test_delay_breakpoints_cover_curve():
    points = analysis.delay_breakpoints(5, 2, 10_000)
    ns = [p.n_claims for p in points]
    assert ns[0] == 2 and ns == sorted(ns)
    rounds = [p.rounds for p in points]
    assert rounds == sorted(rounds) and len(set(rounds)) == len(rounds)


def test_fit_bound_recovers_exact_model():
    k, g = 12, 2
    alpha, beta, gamma = 2.5, 0.8, 1.1
    samples = []
    for n in (128, 512, 4096, 65536, 2**20):
        lg = math.log(n, g)
        rounds = alpha * k + beta * lg + gamma * math.sqrt(k * lg)
        samples.append(analysis.DelayPoint(k, g, n, rounds))
    fit = analysis.fit_bound(samples)
    assert abs(fit.alpha - alpha) < 1e-6
    assert abs(fit.beta - beta) < 1e-6
    assert abs(fit.gamma - gamma) < 1e-6
    assert fit.rms < 1e-6


def test_fit_bound_all_zero_delays():
    samples = [analysis.DelayPoint(5, 2, n, 0) for n in (200, 400, 800, 1600)]
    fit = analysis.fit_bound(samples)
    assert (fit.alpha, fit.beta, fit.gamma) == (0.0, 0.0, 0.0)


def test_fit_bound_requires_samples_above_cutoff():
    samples = [analysis.DelayPoint(5, 2, n, 10) for n in (50, 80, 100)]
    with pytest.raises(InsufficientSamples):
        analysis.fit_bound(samples)


def test_fit_bound_matches_scipy_box_constrained_solver():
    # real delay data; scipy's bounded least squares is the independent oracle
    for k, g in ((8, 2), (21, 4)):
        points = analysis.delay_breakpoints(k, g, 1 << 18)
        fit = analysis.fit_bound(points)
        data = [p for p in points if p.n_claims > 100]
        rows = np.array(
            [
                [k, math.log(p.n_claims, g), math.sqrt(k * math.log(p.n_claims, g))]
                for p in data
            ]
        )
        y = np.array([float(p.rounds) for p in data])
        ref = lsq_linear(rows, y, bounds=([0, 0, 0], [13, 1, 2]), tol=1e-12)
        ours = rows @ np.array([fit.alpha, fit.beta, fit.gamma]) - y
        assert np.sum(ours**2) <= np.sum(ref.fun**2) * (1 + 1e-6)


def test_numerical_bound_check():
    assert analysis.numerical_bound(16, 2, 16) == pytest.approx(2.66 * 16 + 4 + 16)
    assert analysis.check_numerical_bound(16, 2, 16)  # 35 < 62.56
    assert analysis.check_numerical_bound(5, 2, 1)  # 0 < bound
    for k in (2, 9, 21):
        for g in (2, 4, 8):
            for n in (2, 100, 2**16):
                assert analysis.check_numerical_bound(k, g, n), (k, g, n)


OPT_ROWS = {
    # (G, N): (T_g hours, dT days, K, R, dT' days) from the published schedule
    (2, 2**4): ("10.5", "33.54", 16, 35, "47.92"),
    (4, 2**8): ("5.8", "26.61", 29, 47, "42.46"),
    (8, 2**8): ("8.0", "21.00", 21, 28, "36.00"),
    (4, 2**4): ("14.0", "21.25", 12, 17, "35.00"),
    (8, 2**4): ("24.0", "16.67", 7, 8, "29.17"),
}


def test_optimize_grace_reproduces_published_rows():
    for (g, n), (tg_h, dt_d, k, rounds, dtp_d) in OPT_ROWS.items():
        row = analysis.optimize_grace(g, n)
        assert row.k_max == k, (g, n)
        assert row.rounds == rounds, (g, n)
        assert analysis.format_hours(row.t_g) == tg_h, (g, n)
        assert analysis.format_days(row.delta_t) == dt_d, (g, n)
        assert analysis.format_days(row.delta_t_prime) == dtp_d, (g, n)


def test_optimize_grace_single_claim():
    row = analysis.optimize_grace(2, 1)
    assert row.rounds == 0
    assert row.delta_t == 0


FIXED_ROWS_DISCRETE = {
    2**4: ("21.75", "36.75"),
    2**8: ("27.00", "42.00"),
    2**12: ("30.00", "45.00"),
    2**16: ("33.00", "48.00"),
    2**20: ("35.25", "50.25"),
}

CONTINUOUS_ROWS = {
    (4, 2**4): ("12.08", 29, "20.42"),
    (4, 2**8): ("15.00", 36, "23.33"),
    (2, 2**4): ("18.75", 45, "27.08"),
    (2, 2**8): ("24.58", 59, "32.92"),
}


def test_fixed_schedule_discrete_rows():
    for n, (dt, dtp) in FIXED_ROWS_DISCRETE.items():
        row = analysis.fixed_schedule(4, 21, n, mode="discrete")
        assert analysis.format_days(row.delta_t) == dt
        assert analysis.format_days(row.delta_t_prime) == dtp
        assert row.delta_t_prime == (row.rounds + 20) * (7200 + 2 * Fraction(604800, 21))


def test_fixed_schedule_continuous_rows():
    for (g, n), (dt, rounds, dtp) in CONTINUOUS_ROWS.items():
        row = analysis.fixed_schedule(g, 21, n, mode="continuous")
        assert row.rounds == rounds
        assert analysis.format_days(row.delta_t) == dt
        assert analysis.format_days(row.delta_t_prime) == dtp


def test_fixed_schedule_validates_divisibility():
    with pytest.raises(InvalidParam):
        analysis.fixed_schedule(4, 23, 16)


def test_economics_two_claims():
    row = analysis.economics(4, 21, 2)
    assert row.bond == 3  # 3.15 ether worst case, rounded to whole ether
    assert row.hero_expenses == Fraction(3, 20) * 21
    assert row.adversary_loss == 3


def test_economics_million_sybils():
    row = analysis.economics(4, 21, 2**20)
    assert 6.5 <= float(row.hero_expenses) <= 7.5
    assert row.adversary_loss == (2**20 - 1) * 3
    days = float(row.delay_seconds) / 86400
    assert 34 <= days <= 36  # about five weeks


def test_economics_requires_two_claims():
    with pytest.raises(InvalidParam):
        analysis.economics(4, 21, 1)


def test_format_precision():
    assert analysis.format_days(Fraction(2898000)) == "33.54"
    assert analysis.format_hours(Fraction(604800, 16)) == "10.5"
    assert analysis.format_hours(Fraction(604800, 29)) == "5.8"
    assert analysis.format_days(Fraction(86400) + Fraction(864)) == "1.01"
    assert analysis.format_days(Fraction(86400) + Fraction(432)) == "1.01"  # half up


def test_schedule_csv_schema():
    row = analysis.optimize_grace(2, 16)
    out = io.StringIO()
    analysis.write_schedule_csv(out, [row])
    lines = out.getvalue().strip().splitlines()
    assert lines[0] == "G,N,T_g_h,dT_days,K,R,dTp_days"
    assert lines[1] == "2,16,10.5,33.54,16,35,47.92"


def test_delay_curve_csv_schema():
    out = io.StringIO()
    analysis.write_delay_curve_csv(out, analysis.delay_breakpoints(3, 2, 100))
    lines = out.getvalue().strip().splitlines()
    assert lines[0] == "K,G,N,rounds"
    assert lines[1].startswith("3,2,2,")


def test_economics_csv_schema():
    out = io.StringIO()
    analysis.write_economics_csv(out, [analysis.economics(4, 21, 2**20)])
    lines = out.getvalue().strip().splitlines()
    assert lines[0] == "G,K,N,C_m,bond,expenses,adversary_loss,delay_days"
    assert lines[1].startswith("4,21,1048576,0.05,3,7.05,3145725.00,")
