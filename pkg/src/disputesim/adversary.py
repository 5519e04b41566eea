"""Adversary models: round-level strategy search and simulation policies.

The abstract round model tracks only the demotion distribution d[0..K-1]
(claims per demotion count).  Matchmaking sorts claims by count and cuts
consecutive groups of G; each group keeps exactly one winner and demotes
the rest, eliminating anyone who reaches K.  Two facts pin the dynamics:

* the defended claim never loses a match, so it sits at the minimum
  demotion count forever and its group always preserves that count; as
  least-demoted claims are fungible, this means the first group always
  preserves its least-demoted member, and
* every other mixed group's winner is the adversary's free choice.

The maximum-delay strategy preserves the least-demoted claim of every
group.  ``exhaustive_max_delay`` explores all choice combinations and
confirms (at desk scale) that nothing beats it.

Simulation-side policies translate the round-level choices into concrete
Sybil behavior (cooperate or stall per match) and censorship spans.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Optional

from .clock import CensorSpan, TimeParams
from .errors import BudgetExhausted, InvalidParam, SearchSpaceTooLarge

# ---------------------------------------------------------------------------
# Abstract round model over demotion distributions
# ---------------------------------------------------------------------------

Distribution = tuple[int, ...]


@dataclass(frozen=True)
class MixedGroupChoice:
    """Adversary's pick of the winning demotion count in one mixed group."""

    group_index: int
    winner_count: int


def distribution_total(d: Distribution) -> int:
    return sum(d)


def distribution_mass(d: Distribution) -> int:
    """Total demotions carried by surviving claims; grows every round."""
    return sum(k * n for k, n in enumerate(d))


def groups_from_distribution(d: Distribution, group_size: int) -> list[list[int]]:
    """Sorted claims cut into consecutive groups of ``group_size``."""
    claims: list[int] = []
    for count, n in enumerate(d):
        claims.extend([count] * n)
    return [claims[i : i + group_size] for i in range(0, len(claims), group_size)]


def apply_round(
    d: Distribution, group_size: int, winners: list[int]
) -> tuple[Distribution, int]:
    """Resolve one round given each group's winning count.

    Returns the successor distribution and the number of eliminations.
    Winners keep their counts; every other claim is demoted once and
    drops out if it reaches len(d).
    """
    k_max = len(d)
    groups = groups_from_distribution(d, group_size)
    if len(winners) != len(groups):
        raise InvalidParam("one winner count required per group")
    nd = [0] * k_max
    eliminated = 0
    for g, w in zip(groups, winners):
        if w not in g:
            raise InvalidParam(f"winner count {w} not present in group {g}")
        if len(g) == 1:  # singleton last group auto-wins
            nd[g[0]] += 1
            continue
        nd[w] += 1
        kept = False
        for c in g:
            if c == w and not kept:
                kept = True
                continue
            if c + 1 < k_max:
                nd[c + 1] += 1
            else:
                eliminated += 1
    return tuple(nd), eliminated


def greedy_round(d: Distribution, group_size: int) -> tuple[Distribution, int]:
    """One round under the maximum-delay strategy, in O(K).

    Every group's winner is its first (least-demoted) claim, so the
    successor follows from counting how many groups start inside each
    demotion-count block.
    """
    k_max = len(d)
    heads = [0] * k_max  # groups whose first claim has this count
    prefix = 0
    for k in range(k_max):
        if d[k]:
            heads[k] = (prefix + d[k] - 1) // group_size - (prefix - 1) // group_size
            prefix += d[k]
    nd = [0] * k_max
    nd[0] = heads[0]
    for k in range(1, k_max):
        nd[k] = heads[k] + d[k - 1] - heads[k - 1]
    eliminated = d[k_max - 1] - heads[k_max - 1]
    return tuple(nd), eliminated


def greedy_trace(k_max: int, group_size: int, n_claims: int) -> list[Distribution]:
    """Distribution after every round of a maximum-delay dispute."""
    d: Distribution = (n_claims,) + (0,) * (k_max - 1)
    trace = [d]
    while distribution_total(d) > 1:
        d, _ = greedy_round(d, group_size)
        trace.append(d)
    return trace


def _winner_options(
    d: Distribution, group_size: int, groups: list[list[int]]
) -> list[tuple[int, ...]]:
    """Allowed winner counts per group.

    The first group is pinned to the minimum count present: either it is
    pure anyway, or it holds every least-demoted claim, one of which is
    the defended claim that cannot lose.
    """
    options: list[tuple[int, ...]] = []
    for gi, g in enumerate(groups):
        distinct = tuple(sorted(set(g)))
        if len(g) == 1 or len(distinct) == 1 or gi == 0:
            options.append((g[0],))
        else:
            options.append(distinct)
    return options


def successors(
    d: Distribution, group_size: int
) -> list[tuple[Distribution, tuple[MixedGroupChoice, ...]]]:
    """All distinct next-round distributions with a choice set for each.

    Pure groups resolve canonically; each mixed group (beyond the pinned
    first) branches over the distinct counts it contains.  Results are
    de-duplicated by distribution.
    """
    total = distribution_total(d)
    if total < 2:
        return []
    groups = groups_from_distribution(d, group_size)
    options = _winner_options(d, group_size, groups)
    mass = distribution_mass(d)
    seen: dict[Distribution, tuple[MixedGroupChoice, ...]] = {}
    for combo in itertools.product(*options):
        nd, _ = apply_round(d, group_size, list(combo))
        # rounds strictly progress, which is what makes the state graph a DAG
        assert distribution_total(nd) < total or (
            distribution_total(nd) == total and distribution_mass(nd) > mass
        ), "round did not make progress"
        if nd not in seen:
            seen[nd] = tuple(
                MixedGroupChoice(gi, w)
                for gi, w in enumerate(combo)
                if len(options[gi]) > 1
            )
    return list(seen.items())


def max_delay_choice(
    groups: list[list[int]], k_max: int
) -> list[MixedGroupChoice]:
    """Winner picks for the mixed groups under the maximum-delay strategy.

    Preserve the least-demoted claim of every mixed group, unless doing
    so ends the dispute while some other combination would not; in that
    case flip as few (and as late) groups as possible toward their
    most-demoted member.  Choices here ignore the defended claim; the
    round model separately pins the group that contains it.
    """

    def survivors(choice_by_group: dict[int, int]) -> int:
        alive = 0
        for gi, g in enumerate(groups):
            if len(g) == 1:
                alive += 1
                continue
            w = choice_by_group.get(gi, min(g))
            kept = False
            for c in g:
                if c == w and not kept:
                    kept = True
                    alive += 1
                elif c + 1 < k_max:
                    alive += 1
        return alive

    mixed = [gi for gi, g in enumerate(groups) if len(set(g)) > 1 and len(g) > 1]
    default = {gi: min(groups[gi]) for gi in mixed}
    if mixed and survivors(default) == 1:
        candidates = []
        for combo in itertools.product(*(sorted(set(groups[gi])) for gi in mixed)):
            pick = dict(zip(mixed, combo))
            if survivors(pick) < 2:
                continue
            flips = tuple(int(pick[gi] != default[gi]) for gi in mixed)
            # fewest flips, flipped as late as possible, highest counts kept
            key = (sum(flips), tuple(reversed(flips)), tuple(-c for c in combo))
            candidates.append((key, pick))
        if candidates:
            default = min(candidates)[1]
    return [MixedGroupChoice(gi, default[gi]) for gi in mixed]


def exhaustive_max_delay(
    k_max: int, group_size: int, n_claims: int
) -> tuple[int, list[dict]]:
    """Longest dispute over all adversary choice combinations.

    Depth-first longest-path search over the distribution DAG, memoized
    per distribution; re-visits stop at nodes whose recorded length can
    no longer improve.  Returns the length and one witness path of
    {distribution, choices} steps.
    """
    if k_max > 7 or n_claims > 64 or group_size > 3:
        raise SearchSpaceTooLarge(
            f"search box is K<=7, N<=64, G<=3; got K={k_max} N={n_claims} G={group_size}"
        )
    if k_max < 1 or group_size < 2 or n_claims < 1:
        raise InvalidParam("need K >= 1, G >= 2, N >= 1")

    root: Distribution = (n_claims,) + (0,) * (k_max - 1)
    # memo: distribution -> (length to a leaf, best successor, its choices)
    memo: dict[Distribution, tuple[int, Optional[Distribution], tuple]] = {}
    stack: list[Distribution] = [root]
    while stack:
        d = stack[-1]
        if d in memo:
            stack.pop()
            continue
        if distribution_total(d) <= 1:
            memo[d] = (0, None, ())
            stack.pop()
            continue
        succ = successors(d, group_size)
        unresolved = [s for s, _ in succ if s not in memo]
        if unresolved:
            stack.extend(unresolved)
            continue
        best = max(succ, key=lambda sc: memo[sc[0]][0])
        memo[d] = (memo[best[0]][0] + 1, best[0], best[1])
        stack.pop()

    path = []
    d: Optional[Distribution] = root
    while d is not None:
        length, nxt, choices = memo[d]
        path.append(
            {
                "distribution": list(d),
                "choices": [
                    {"group": c.group_index, "winner_count": c.winner_count}
                    for c in choices
                ],
            }
        )
        d = nxt
    return memo[root][0], path


# ---------------------------------------------------------------------------
# Simulation-side adversary policies
# ---------------------------------------------------------------------------

POLICIES = ("stall", "max-delay", "burst-censor", "all-at-once-censor")


@dataclass(frozen=True)
class AdversaryPolicy:
    """How the adversary drives Sybils and spends censorship in a dispute.

    ``cooperation`` picks which Sybils defend their claims in a round:
    "none" stalls everywhere, "group-leaders" defends only the designated
    winner of each group (the maximum-delay designation), "all" defends
    every claim.  ``censor`` names the censorship schedule.
    """

    name: str
    censor: str
    cooperation: str


def make_policy(name: str) -> AdversaryPolicy:
    if name == "stall":
        return AdversaryPolicy(name, censor="none", cooperation="none")
    if name == "max-delay":
        return AdversaryPolicy(name, censor="none", cooperation="group-leaders")
    if name == "burst-censor":
        return AdversaryPolicy(name, censor="burst", cooperation="all")
    if name == "all-at-once-censor":
        return AdversaryPolicy(name, censor="all-at-once", cooperation="all")
    raise InvalidParam(f"unknown adversary policy {name!r}")


def censorship_scheduler(
    policy: str, params: TimeParams, honest_id: str, mode: str = "discrete"
) -> tuple[CensorSpan, ...]:
    """Deterministic censorship spans for a whole dispute.

    "none" returns nothing.  "all-at-once" burns the entire budget in a
    single span from the first round.  "burst" places one span per round
    over the defended claim's first action window, sized one second past
    the grace period: that is the cheapest demotion-forcing span, so the
    budget caps the number of forced rounds strictly below K.
    """
    round_len = (
        params.round_duration if mode == "discrete" else params.round_duration_continuous
    )
    if policy == "none":
        return ()
    if policy == "all-at-once":
        return (CensorSpan(start=0, duration=params.t_c, target=honest_id),)
    if policy == "burst":
        burst = params.t_g + 1
        spans = []
        budget = params.t_c
        round_index = 0
        while budget >= burst and round_index < params.k_max - 1:
            start = round_index * round_len + params.side_schedule[0]
            spans.append(CensorSpan(start=start, duration=burst, target=honest_id))
            budget -= burst
            round_index += 1
        return tuple(spans)
    raise InvalidParam(f"unknown censorship policy {policy!r}")


def check_schedule_budget(spans: Iterable[CensorSpan], params: TimeParams) -> None:
    total = sum(span.duration for span in spans)
    if total > params.t_c:
        raise BudgetExhausted(f"schedule spends {total}s > budget {params.t_c}s")


def designated_cooperators(
    policy: AdversaryPolicy, groups: list[list[str]], honest_id: str
) -> set[str]:
    """Claims that actively defend this round (the honest one always does)."""
    active = {honest_id}
    if policy.cooperation == "all":
        for g in groups:
            active.update(g)
    elif policy.cooperation == "group-leaders":
        # matchmaking sorts by demotion count, so the first member is the
        # least-demoted claim: the one the max-delay strategy preserves
        for g in groups:
            active.add(g[0])
    return active
