"""Worst-case delay computation, schedule tables, curve fits, economics.

Everything here runs on the abstract round model: ``max_delay_rounds``
replays the maximum-delay strategy round by round in O(rounds * K), and
the table builders combine those delays with exact rational time
arithmetic (integer seconds; division only at print time).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Optional, Sequence, TextIO

from .adversary import greedy_round
from .errors import InsufficientSamples, InvalidParam

DEFAULT_T_C = 604800  # one week
DEFAULT_T_M = 7200  # two hours
DEFAULT_MATCH_COST_ETHER = Fraction(1, 20)


@dataclass(frozen=True)
class DelayPoint:
    k_max: int
    group_size: int
    n_claims: int
    rounds: int


@dataclass(frozen=True)
class FitResult:
    alpha: float
    beta: float
    gamma: float
    rms: float
    max_abs_err: float


@dataclass(frozen=True)
class ScheduleRow:
    """One table row; times are exact fractions of a second."""

    group_size: int
    n_claims: int
    t_g: Fraction
    k_max: int
    rounds: int
    delta_t: Fraction
    delta_t_prime: Fraction

    @property
    def t_g_hours(self) -> float:
        return float(self.t_g / 3600)

    @property
    def delta_t_days(self) -> float:
        return float(self.delta_t / 86400)

    @property
    def delta_t_prime_days(self) -> float:
        return float(self.delta_t_prime / 86400)


@dataclass(frozen=True)
class EconomicsRow:
    group_size: int
    k_max: int
    n_claims: int
    match_cost: Fraction
    bond: int
    hero_expenses: Fraction
    adversary_loss: Fraction
    delay_seconds: Fraction


@lru_cache(maxsize=1_000_000)
def max_delay_rounds(k_max: int, group_size: int, n_claims: int) -> int:
    """Rounds a dispute lasts under the maximum-delay strategy."""
    if k_max < 1 or group_size < 2 or n_claims < 0:
        raise InvalidParam("need K >= 1, G >= 2, N >= 0")
    d = (n_claims,) + (0,) * (k_max - 1)
    rounds = 0
    total = n_claims
    while total > 1:
        d, eliminated = greedy_round(d, group_size)
        total -= eliminated
        rounds += 1
    return rounds


def next_larger_n(k_max: int, group_size: int, n_claims: int) -> int:
    """Smallest N' > N whose delay strictly exceeds the delay at N.

    Exponential probe for an upper bracket, then binary search; relies
    on the delay being monotone non-decreasing in N.
    """
    if n_claims < 1:
        raise InvalidParam("N must be >= 1")
    base = max_delay_rounds(k_max, group_size, n_claims)
    hi = max(2, n_claims * 2)
    while max_delay_rounds(k_max, group_size, hi) <= base:
        hi *= 2
    lo = n_claims
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if max_delay_rounds(k_max, group_size, mid) > base:
            hi = mid
        else:
            lo = mid
    return hi


def delay_breakpoints(k_max: int, group_size: int, n_limit: int) -> list[DelayPoint]:
    """All points where the delay curve steps up, for N in [2, n_limit]."""
    points = [DelayPoint(k_max, group_size, 2, max_delay_rounds(k_max, group_size, 2))]
    n = 2
    while True:
        n = next_larger_n(k_max, group_size, n)
        if n > n_limit:
            return points
        points.append(DelayPoint(k_max, group_size, n, max_delay_rounds(k_max, group_size, n)))


def log_base(x: float, base: int) -> float:
    return math.log(x) / math.log(base)


def fit_bound(samples: Sequence[DelayPoint]) -> FitResult:
    """Box-constrained least squares of rounds against the three-term basis.

    Basis terms are K, log_G N, and sqrt(K log_G N) with coefficients
    confined to [0,13] x [0,1] x [0,2].  Solved by cyclic coordinate
    minimization of the normal equations with projection onto the box,
    run to 1e-9 stability on the coefficients.  Only samples with
    N > 100 participate, and at least three are required.
    """
    data = [s for s in samples if s.n_claims > 100]
    if len(data) < 3:
        raise InsufficientSamples(f"need >= 3 samples with N > 100, got {len(data)}")
    rows = []
    y = []
    for s in data:
        lg = log_base(s.n_claims, s.group_size)
        rows.append((float(s.k_max), lg, math.sqrt(s.k_max * lg)))
        y.append(float(s.rounds))
    lo = (0.0, 0.0, 0.0)
    hi = (13.0, 1.0, 2.0)

    # normal equations A^T A c = A^T y
    ata = [[sum(x[i] * x[j] for x in rows) for j in range(3)] for i in range(3)]
    aty = [sum(x[i] * t for x, t in zip(rows, y)) for i in range(3)]
    coef = _solve_3x3(ata, aty)
    if coef is None or any(not lo[j] <= coef[j] <= hi[j] for j in range(3)):
        # project and refine coordinate-wise until the objective settles
        start = [min(hi[j], max(lo[j], coef[j] if coef else 0.0)) for j in range(3)]
        coef = _box_refine(rows, y, start, lo, hi, tol=1e-9)
    residuals = [
        sum(x[m] * coef[m] for m in range(3)) - target for x, target in zip(rows, y)
    ]
    rms = math.sqrt(sum(r * r for r in residuals) / len(residuals))
    return FitResult(
        alpha=coef[0],
        beta=coef[1],
        gamma=coef[2],
        rms=rms,
        max_abs_err=max(abs(r) for r in residuals),
    )


def _solve_3x3(a, b) -> Optional[list[float]]:
    """Gaussian elimination with partial pivoting; None if singular."""
    m = [row[:] + [rhs] for row, rhs in zip(a, b)]
    for col in range(3):
        pivot = max(range(col, 3), key=lambda r: abs(m[r][col]))
        if abs(m[pivot][col]) < 1e-12:
            return None
        m[col], m[pivot] = m[pivot], m[col]
        for r in range(3):
            if r != col:
                f = m[r][col] / m[col][col]
                for c in range(col, 4):
                    m[r][c] -= f * m[col][c]
    return [m[i][3] / m[i][i] for i in range(3)]


def _box_refine(rows, y, coef, lo, hi, tol: float) -> list[float]:
    """Cyclic coordinate minimization of the squared error over the box."""

    def objective(c):
        return sum(
            (sum(x[m] * c[m] for m in range(3)) - t) ** 2 for x, t in zip(rows, y)
        )

    previous = objective(coef)
    for _ in range(200_000):
        for j in range(3):
            num = 0.0
            den = 0.0
            for x, target in zip(rows, y):
                partial = sum(x[m] * coef[m] for m in range(3) if m != j)
                num += x[j] * (target - partial)
                den += x[j] * x[j]
            v = num / den if den else 0.0
            coef[j] = min(hi[j], max(lo[j], v))
        current = objective(coef)
        if previous - current < tol:
            break
        previous = current
    return coef


def numerical_bound(k_max: int, group_size: int, n_claims: int) -> float:
    """The fitted delay ceiling 2.66 K + log_G N + 2 sqrt(K log_G N)."""
    lg = log_base(n_claims, group_size) if n_claims > 1 else 0.0
    return 2.66 * k_max + lg + 2.0 * math.sqrt(k_max * lg)


def check_numerical_bound(k_max: int, group_size: int, n_claims: int) -> bool:
    """True when the measured delay sits under the fitted ceiling."""
    return max_delay_rounds(k_max, group_size, n_claims) < numerical_bound(
        k_max, group_size, n_claims
    )


def _round_duration(k_max: int, t_c: int, t_m: int) -> Fraction:
    return 2 * Fraction(t_c, k_max) + t_m


def optimize_grace(
    group_size: int,
    n_claims: int,
    t_c: int = DEFAULT_T_C,
    t_m: int = DEFAULT_T_M,
) -> ScheduleRow:
    """Pick the demotion limit K that minimizes the no-censorship dispute time.

    Minimizes rounds(K) * (2 t_c / K + t_m) over integer K with the
    grace period at least one hour; ties break toward smaller K, whose
    longer grace period is better for security.
    """
    if t_c <= 0 or t_m <= 0:
        raise InvalidParam("t_c and t_m must be positive")
    best_k: Optional[int] = None
    best_dt: Optional[Fraction] = None
    for k in range(1, max(1, t_c // 3600) + 1):
        dt = max_delay_rounds(k, group_size, n_claims) * _round_duration(k, t_c, t_m)
        if best_dt is None or dt < best_dt:
            best_k, best_dt = k, dt
    assert best_k is not None and best_dt is not None
    rounds = max_delay_rounds(best_k, group_size, n_claims)
    t_r = _round_duration(best_k, t_c, t_m)
    return ScheduleRow(
        group_size=group_size,
        n_claims=n_claims,
        t_g=Fraction(t_c, best_k),
        k_max=best_k,
        rounds=rounds,
        delta_t=rounds * t_r,
        delta_t_prime=(rounds + best_k - 1) * t_r,
    )


def fixed_schedule(
    group_size: int,
    k_max: int,
    n_claims: int,
    t_c: int = DEFAULT_T_C,
    t_m: int = DEFAULT_T_M,
    mode: str = "discrete",
) -> ScheduleRow:
    """Dispute times for a fixed grace period t_g = t_c / K.

    Discrete rounds last t_m + 2 t_g; continuous rounds last t_m + t_g
    with the same round count (the continuous variant is conjectured to
    progress identically under the analogous strategy).  Either way the
    full-censorship time adds K - 1 rounds.
    """
    if t_c % k_max != 0:
        raise InvalidParam(f"K={k_max} must divide t_c={t_c} exactly")
    if mode not in ("discrete", "continuous"):
        raise InvalidParam(f"unknown mode {mode!r}")
    t_g = Fraction(t_c, k_max)
    t_r = t_m + (2 * t_g if mode == "discrete" else t_g)
    rounds = max_delay_rounds(k_max, group_size, n_claims)
    return ScheduleRow(
        group_size=group_size,
        n_claims=n_claims,
        t_g=t_g,
        k_max=k_max,
        rounds=rounds,
        delta_t=rounds * t_r,
        delta_t_prime=(rounds + k_max - 1) * t_r,
    )


def economics(
    group_size: int,
    k_max: int,
    n_claims: int,
    match_cost: Fraction = DEFAULT_MATCH_COST_ETHER,
    bond_policy: str = "round",
    t_c: int = DEFAULT_T_C,
    t_m: int = DEFAULT_T_M,
) -> EconomicsRow:
    """Hero expenses, bond sizing, and the adversary's loss.

    The hero plays at most G-1 matches per round, so a dispute costs it
    (G-1) * match_cost * rounds.  The bond covers the N=2 worst case
    (rounds = K) rounded to a whole ether; every losing claim forfeits
    one bond to the hero.
    """
    if n_claims < 2:
        raise InvalidParam("economics needs at least two claims")
    match_cost = Fraction(match_cost)
    rounds = max_delay_rounds(k_max, group_size, n_claims)
    worst_two_claim_expense = (group_size - 1) * match_cost * k_max
    if bond_policy == "round":
        # nearest whole ether, halves up (matches the published 3-ether choice)
        bond = int(
            Decimal(
                worst_two_claim_expense.numerator
            ) / Decimal(worst_two_claim_expense.denominator)
            + Decimal("0.5")
        )
    elif bond_policy == "exact":
        bond = math.ceil(worst_two_claim_expense)
    else:
        raise InvalidParam(f"unknown bond policy {bond_policy!r}")
    return EconomicsRow(
        group_size=group_size,
        k_max=k_max,
        n_claims=n_claims,
        match_cost=match_cost,
        bond=bond,
        hero_expenses=(group_size - 1) * match_cost * rounds,
        adversary_loss=(n_claims - 1) * bond,
        delay_seconds=rounds * _round_duration(k_max, t_c, t_m),
    )


# ---------------------------------------------------------------------------
# Printing and CSV emission at the published precision
# ---------------------------------------------------------------------------


def format_days(seconds: Fraction) -> str:
    """Seconds to days, two decimals, halves up."""
    value = Decimal(seconds.numerator) / Decimal(seconds.denominator) / 86400
    return str(value.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def format_hours(seconds: Fraction) -> str:
    """Seconds to hours, one decimal, halves up."""
    value = Decimal(seconds.numerator) / Decimal(seconds.denominator) / 3600
    return str(value.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def format_ether(amount: Fraction) -> str:
    value = Decimal(amount.numerator) / Decimal(amount.denominator)
    return str(value.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def write_schedule_csv(out: TextIO, rows: Iterable[ScheduleRow]) -> None:
    """Schema: G,N,T_g_h,dT_days,K,R,dTp_days."""
    writer = csv.writer(out)
    writer.writerow(["G", "N", "T_g_h", "dT_days", "K", "R", "dTp_days"])
    for row in rows:
        writer.writerow(
            [
                row.group_size,
                row.n_claims,
                format_hours(row.t_g),
                format_days(row.delta_t),
                row.k_max,
                row.rounds,
                format_days(row.delta_t_prime),
            ]
        )


def write_delay_curve_csv(out: TextIO, points: Iterable[DelayPoint]) -> None:
    """Schema: K,G,N,rounds (curve breakpoints)."""
    writer = csv.writer(out)
    writer.writerow(["K", "G", "N", "rounds"])
    for p in points:
        writer.writerow([p.k_max, p.group_size, p.n_claims, p.rounds])


def write_economics_csv(out: TextIO, rows: Iterable[EconomicsRow]) -> None:
    """Schema: G,K,N,C_m,bond,expenses,adversary_loss,delay_days."""
    writer = csv.writer(out)
    writer.writerow(
        ["G", "K", "N", "C_m", "bond", "expenses", "adversary_loss", "delay_days"]
    )
    for row in rows:
        writer.writerow(
            [
                row.group_size,
                row.k_max,
                row.n_claims,
                format_ether(row.match_cost),
                row.bond,
                format_ether(row.hero_expenses),
                format_ether(row.adversary_loss),
                format_days(row.delay_seconds),
            ]
        )
