"""Virtual time, per-claim chess clocks, and the censorship budget.

All times are integer seconds of virtual time; integer arithmetic keeps
event ordering exact.  A claim's clock only runs while that claim owes
an action, and it starts every round at half the match allowance plus
one grace period.  The adversary's censorship budget is global for the
whole dispute: spans are logged as they are spent and may never sum to
more than the budget.

An action that lands at the exact instant its clock reaches zero is on
time; timeout fires only when the owed time passes the remaining budget
with nothing landed.  This boundary choice is what makes forcing a
defended claim to time out cost strictly more than one grace period of
censorship, which in turn caps forced demotions strictly below the
elimination threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Union

from .errors import (
    BudgetExhausted,
    ClockNotRunning,
    ConfigError,
    InvalidParam,
    NonDivisibleGrace,
)

SECONDS_PER_HOUR = 3600
SECONDS_PER_DAY = 86400
SECONDS_PER_WEEK = 604800


@dataclass(frozen=True)
class TimeParams:
    """Fixed timing profile of a dispute.

    ``side_schedule`` lists the durations of one side's actions in a
    match (tree_height bisects plus the final step); both sides use the
    same schedule, so all action durations across a match sum to t_m.
    """

    t_c: int
    t_m: int
    t_g: int
    group_size: int
    tree_height: int
    k_max: int
    tau: int
    side_schedule: tuple[int, ...]

    @property
    def round_duration(self) -> int:
        """Discrete-mode round length: t_m + 2 t_g."""
        return self.t_m + 2 * self.t_g

    @property
    def round_duration_continuous(self) -> int:
        """Continuous-mode round length: t_m + t_g."""
        return self.t_m + self.t_g

    @property
    def match_budget(self) -> int:
        """Initial chess-clock budget per claim per match."""
        return self.t_m // 2 + self.t_g


def make_params(
    t_c: int, t_m: int, t_g: int, group_size: int, tree_height: int = 4
) -> TimeParams:
    """Validate and derive a timing profile.

    The grace period must divide the censorship budget exactly, which
    pins the demotion limit to k_max = t_c / t_g with no remainder.
    Per-action durations are near-uniform integers: each side gets
    tree_height + 1 actions summing to exactly t_m / 2.
    """
    if t_g <= 0 or t_c <= 0:
        raise InvalidParam("censorship budget and grace period must be positive")
    if t_c % t_g != 0:
        raise NonDivisibleGrace(f"t_g={t_g} does not divide t_c={t_c}")
    if t_m < 2 or t_m % 2 != 0:
        raise InvalidParam(f"t_m must be an even number of seconds >= 2, got {t_m}")
    if group_size < 2:
        raise InvalidParam(f"group size must be >= 2, got {group_size}")
    if not 1 <= tree_height <= 30:
        raise InvalidParam(f"tree height must be in 1..30, got {tree_height}")
    actions_per_side = tree_height + 1
    half = t_m // 2
    if half < actions_per_side:
        raise InvalidParam("t_m too small to give every action a positive duration")
    base, rem = divmod(half, actions_per_side)
    schedule = tuple(base + 1 if j < rem else base for j in range(actions_per_side))
    return TimeParams(
        t_c=t_c,
        t_m=t_m,
        t_g=t_g,
        group_size=group_size,
        tree_height=tree_height,
        k_max=t_c // t_g,
        tau=t_m // (2 * actions_per_side),
        side_schedule=schedule,
    )


_CONFIG_KEYS = {
    "t_c_seconds": "t_c",
    "t_m_seconds": "t_m",
    "t_g_seconds": "t_g",
    "group_size": "group_size",
    "tree_height": "tree_height",
}


def time_params_from_config(text: str) -> TimeParams:
    """Parse a key=value config block into a TimeParams.

    Keys: t_c_seconds, t_m_seconds, t_g_seconds, group_size,
    tree_height.  Unknown keys are errors.
    """
    values: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[_CONFIG_KEYS[key]] = int(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {value!r} is not an integer") from exc
    missing = {"t_c", "t_m", "t_g", "group_size"} - set(values)
    if missing:
        raise ConfigError(f"missing keys: {sorted(missing)}")
    return make_params(
        values["t_c"],
        values["t_m"],
        values["t_g"],
        values["group_size"],
        tree_height=values.get("tree_height", 4),
    )


@dataclass(frozen=True)
class ChessClock:
    remaining: int
    running: bool = True


@dataclass(frozen=True)
class TimeoutEvent:
    """Clock exhausted while running; ``elapsed`` is the time to the crossing."""

    elapsed: int


def new_clock(params: TimeParams) -> ChessClock:
    return ChessClock(remaining=params.match_budget)


def tick_clock(c: ChessClock, dt: int) -> Union[ChessClock, TimeoutEvent]:
    """Run the clock for dt seconds with no action landing.

    Reaching zero is a timeout; the event carries the exact crossing
    offset so callers can place the timeout on the virtual timeline.
    """
    if not c.running:
        raise ClockNotRunning("tick on a stopped clock")
    if dt < 0:
        raise InvalidParam("cannot tick backwards")
    if dt >= c.remaining:
        return TimeoutEvent(elapsed=c.remaining)
    return replace(c, remaining=c.remaining - dt)


@dataclass(frozen=True)
class CensorSpan:
    """Half-open span [start, start+duration) of censorship against one claim."""

    start: int
    duration: int
    target: str

    @property
    def end(self) -> int:
        return self.start + self.duration


@dataclass(frozen=True)
class CensorshipBudget:
    remaining: int
    spent_log: tuple[CensorSpan, ...] = ()


def new_budget(params: TimeParams) -> CensorshipBudget:
    return CensorshipBudget(remaining=params.t_c)


def spend_censorship(
    b: CensorshipBudget, start: int, duration: int, target: str
) -> CensorshipBudget:
    """Log one censorship span, debiting the global budget."""
    if duration <= 0:
        raise InvalidParam("censorship spans must have positive duration")
    if duration > b.remaining:
        raise BudgetExhausted(
            f"span of {duration}s exceeds remaining budget {b.remaining}s"
        )
    span = CensorSpan(start=start, duration=duration, target=target)
    return CensorshipBudget(
        remaining=b.remaining - duration, spent_log=b.spent_log + (span,)
    )


def delayed_landing(planned: int, side: str, spans: tuple[CensorSpan, ...]) -> int:
    """Earliest landing time for a transaction ready at ``planned``.

    A span covering the current landing instant pushes it to the span
    end; chained spans push repeatedly.  Only spans targeting ``side``
    apply.
    """
    t = planned
    moved = True
    while moved:
        moved = False
        for span in spans:
            if span.target == side and span.start <= t < span.end:
                t = span.end
                moved = True
    return t


def overlap_with_window(
    spans: tuple[CensorSpan, ...], start: int, end: int, target: Optional[str] = None
) -> int:
    """Total censored seconds intersecting [start, end), optionally per target."""
    total = 0
    for span in spans:
        if target is not None and span.target != target:
            continue
        total += max(0, min(end, span.end) - max(start, span.start))
    return total
