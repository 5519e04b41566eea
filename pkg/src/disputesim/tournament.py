"""Full-dispute orchestration: matchmaking, rounds, demotions, survival.

Each round sorts the surviving claims by demotion count (or by
accumulated censored time in continuous mode), cuts consecutive groups
of at most G, and plays every pairwise match inside every group over
shared virtual time.  A claim preserves its count only by winning all
matches in its group; a singleton last group wins by default.  Claims
are eliminated at K demotions (discrete) or once their accumulated
censored time exceeds the censorship budget (continuous).

The ``honest`` flag on a claim is simulation metadata for assertions
and reports; no referee-side decision ever reads it.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Optional

from . import adversary as adv
from .clock import CensorSpan, TimeParams, delayed_landing, new_budget, overlap_with_window, spend_censorship
from .commitment import CommitmentTree, build_tree, reveal_children
from .errors import InvalidParam
from .match_engine import (
    MatchState,
    MatchStatus,
    StepWitness,
    advance_time,
    close_unfinished,
    open_match,
    submit_bisect,
    submit_step,
)
from .vm import (
    History,
    corrupt_history,
    initial_state,
    run_honest,
    state_at,
    state_hash,
    verify_step_witness,
)


@dataclass
class ClaimRecord:
    id: str
    root: bytes
    demotions: int = 0
    censored_time: int = 0
    eliminated: bool = False
    honest: bool = False


@dataclass(frozen=True)
class GroupPartition:
    """Groups in sorted order plus the per-count borrow bookkeeping.

    ``borrow_first[k]`` counts claims a count-k block's first group takes
    from lower counts; ``borrow_last[k]`` counts claims its last group
    takes from higher counts.
    """

    groups: tuple[tuple[str, ...], ...]
    borrow_first: dict[int, int]
    borrow_last: dict[int, int]


@dataclass
class Defender:
    """Plays one claim: reveals children on demand and steps when it can."""

    claim_id: str
    tree: CommitmentTree
    history: History
    responsive: bool = True

    def reveal(self, index: int, height: int):
        return reveal_children(self.tree, index, height)

    def witness(self, index: int) -> Optional[StepWitness]:
        """Step witness at the divergence leaf, or None if it cannot win.

        The agreed state is recomputed from the public seed; the
        defender only submits when its own leaf really is the successor.
        """
        agreed = state_at(self.history.seed, index)
        claimed = self.tree.node(index, 0)
        if not verify_step_witness(agreed, claimed):
            return None
        return StepWitness(agreed_state=agreed, claimed_next=claimed)


@dataclass
class DisputeSetup:
    params: TimeParams
    claims: list[ClaimRecord]
    defenders: dict[str, Defender]
    honest_id: str
    seed: bytes


@dataclass
class MatchOutcome:
    match_id: str
    group_index: int
    sides: tuple[str, str]
    status: str
    winner: Optional[str]
    ended_at: Optional[int]
    divergence_leaf: Optional[int]
    charged: dict[str, int]


@dataclass
class RoundReport:
    index: int
    partition: GroupPartition
    outcomes: list[MatchOutcome]
    group_winners: list[Optional[str]]
    demoted: list[str]
    eliminated: list[str]
    distribution_before: tuple[int, ...]
    distribution_after: tuple[int, ...]
    censored_overlap: int
    transcripts: list[dict] = field(default_factory=list)


@dataclass
class DisputeResult:
    winner: Optional[str]
    rounds: int
    elapsed_seconds: int
    honest_won: bool
    reports: list[RoundReport]

    def to_json(self) -> dict:
        return {
            "winner": self.winner,
            "rounds": self.rounds,
            "elapsed_seconds": self.elapsed_seconds,
            "honest_won": self.honest_won,
            "reports": [
                {
                    "round": r.index,
                    "groups": [list(g) for g in r.partition.groups],
                    "group_winners": r.group_winners,
                    "demoted": r.demoted,
                    "eliminated": r.eliminated,
                    "distribution_before": list(r.distribution_before),
                    "distribution_after": list(r.distribution_after),
                    "censored_overlap_seconds": r.censored_overlap,
                    "matches": [
                        {
                            "id": o.match_id,
                            "sides": list(o.sides),
                            "status": o.status,
                            "winner": o.winner,
                            "ended_at": o.ended_at,
                            "divergence_leaf": o.divergence_leaf,
                        }
                        for o in r.outcomes
                    ],
                }
                for r in self.reports
            ],
        }


def make_dispute(
    params: TimeParams,
    n_claims: int,
    seed: int = 0,
    divergences: Optional[list[int]] = None,
) -> DisputeSetup:
    """Build one honest claim plus n_claims - 1 distinct corrupted ones.

    Sybil divergence points come from ``divergences`` or are derived
    deterministically from the seed.  The honest claim id sorts before
    every Sybil id so matchmaking ties keep it at the front of its
    demotion class.
    """
    if n_claims < 1:
        raise InvalidParam("need at least one claim")
    seed_bytes = seed.to_bytes(8, "big") * 4
    honest_history = run_honest(seed_bytes, params.tree_height)
    leaves = 1 << params.tree_height
    claims: list[ClaimRecord] = []
    defenders: dict[str, Defender] = {}

    honest_tree = build_tree(honest_history)
    claims.append(ClaimRecord(id="h", root=honest_tree.root, honest=True))
    defenders["h"] = Defender("h", honest_tree, honest_history)

    for i in range(n_claims - 1):
        if divergences is not None:
            at = divergences[i]
        else:
            at = (seed * 2654435761 + i * 40503) % leaves
        history = corrupt_history(honest_history, at, rng_seed=seed * 100003 + i)
        tree = build_tree(history)
        cid = f"s{i:04d}"
        claims.append(ClaimRecord(id=cid, root=tree.root))
        defenders[cid] = Defender(cid, tree, history)
    return DisputeSetup(
        params=params,
        claims=claims,
        defenders=defenders,
        honest_id="h",
        seed=seed_bytes,
    )


def demotion_distribution(claims: list[ClaimRecord], k_max: int) -> tuple[int, ...]:
    d = [0] * k_max
    for c in claims:
        if not c.eliminated:
            d[c.demotions] += 1
    return tuple(d)


def matchmake(
    claims: list[ClaimRecord], group_size: int, mode: str = "discrete"
) -> GroupPartition:
    """Sort surviving claims and cut consecutive groups of ``group_size``."""
    alive = [c for c in claims if not c.eliminated]
    if not alive:
        raise InvalidParam("no surviving claims to partition")
    if mode == "continuous":
        alive.sort(key=lambda c: (c.censored_time, c.id))
    else:
        alive.sort(key=lambda c: (c.demotions, c.id))
    groups = tuple(
        tuple(c.id for c in alive[i : i + group_size])
        for i in range(0, len(alive), group_size)
    )
    total = len(alive)
    borrow_first: dict[int, int] = {}
    borrow_last: dict[int, int] = {}
    prefix = 0
    for count, block in itertools.groupby(alive, key=lambda c: c.demotions):
        size = sum(1 for _ in block)
        borrow_first[count] = prefix % group_size
        last_group_end = min(total, ((prefix + size - 1) // group_size + 1) * group_size)
        borrow_last[count] = last_group_end - (prefix + size)
        prefix += size
    return GroupPartition(groups=groups, borrow_first=borrow_first, borrow_last=borrow_last)


def _run_match(
    m: MatchState,
    defenders: dict[str, Defender],
    params: TimeParams,
    spans: tuple[CensorSpan, ...],
    honest_id: str,
    deadline: Optional[int] = None,
) -> MatchState:
    """Drive one match over absolute virtual time until it ends.

    Per node, both sides owe an action.  Each responsive side's landing
    is its owed-from time plus its action duration, pushed through any
    censorship spans that target it; a landing beyond the side's clock
    crossing never happens.  Events resolve chronologically with
    adversary submissions first on ties.  Events past ``deadline`` are
    left unplayed (continuous-mode rounds cut matches off).
    """
    while m.status is MatchStatus.RUNNING:
        position = (m.index, m.height)
        events = []
        for side in m.sides:
            since = m.owed_since[side]
            if since is None:
                continue
            crossing = since + m.remaining[side]
            defender = defenders[side]
            action = None
            if defender.responsive:
                if m.height > 0:
                    action = ("bisect", defender.reveal(m.index, m.height))
                else:
                    witness = defender.witness(m.index)
                    if witness is not None:
                        action = ("step", witness)
            landing = None
            if action is not None:
                duration = params.side_schedule[m.actions_done[side]]
                landing = delayed_landing(since + duration, side, spans)
                if landing > crossing:
                    landing = None  # censored past its own budget
            if landing is None:
                events.append((crossing, 1, side != honest_id, "cross", side, None))
            else:
                events.append((landing, 0, side != honest_id, "land", side, action))
        # same instant: landings before crossings, adversary before honest
        events.sort(key=lambda e: (e[0], e[1], not e[2]))
        hit_deadline = False
        for t, _, _, kind, side, action in events:
            if m.status is not MatchStatus.RUNNING:
                break
            if deadline is not None and t > deadline:
                hit_deadline = True
                break
            if kind == "cross":
                advance_time(m, t)
            elif action[0] == "bisect":
                submit_bisect(m, side, action[1], t)
            else:
                submit_step(m, side, action[1], t)
        if hit_deadline:
            break
        if m.status is MatchStatus.RUNNING and (m.index, m.height) == position:
            # nothing progressed (stray rejection): let the owing clocks expire
            crossings = [
                m.owed_since[s] + m.remaining[s]
                for s in m.sides
                if m.owed_since[s] is not None
            ]
            advance_time(m, max(crossings))
    return m


def play_round(
    setup: DisputeSetup,
    partition: GroupPartition,
    policy: adv.AdversaryPolicy,
    round_index: int,
    mode: str = "discrete",
    spans: tuple[CensorSpan, ...] = (),
    record_transcripts: bool = False,
) -> RoundReport:
    """Play all pairwise matches of every group over one shared round."""
    params = setup.params
    round_len = (
        params.round_duration if mode == "discrete" else params.round_duration_continuous
    )
    round_start = round_index * round_len
    round_end = round_start + round_len
    groups = [list(g) for g in partition.groups]
    active = adv.designated_cooperators(policy, groups, setup.honest_id)
    for cid, defender in setup.defenders.items():
        defender.responsive = cid in active

    claims_by_id = {c.id: c for c in setup.claims}
    initial_hash = state_hash(initial_state(setup.seed))
    outcomes: list[MatchOutcome] = []
    transcripts: list[dict] = []
    wins: dict[str, int] = {cid: 0 for g in groups for cid in g}
    group_winners: list[Optional[str]] = []

    for gi, group in enumerate(groups):
        for a, b in itertools.combinations(group, 2):
            m = open_match(
                claims_by_id[a].root,
                claims_by_id[b].root,
                params,
                claim_a=a,
                claim_b=b,
                now=round_start,
                match_id=f"r{round_index}g{gi}:{a}|{b}",
                initial_state_hash=initial_hash,
            )
            _run_match(
                m, setup.defenders, params, spans, setup.honest_id, deadline=round_end
            )
            if mode == "continuous":
                close_unfinished(m, round_end)
            assert m.status is not MatchStatus.RUNNING
            assert m.ended_at is not None and m.ended_at <= round_end, (
                "match outlived its round"
            )
            if m.winner is not None:
                wins[m.winner] += 1
            outcomes.append(
                MatchOutcome(
                    match_id=m.match_id,
                    group_index=gi,
                    sides=m.sides,
                    status=m.status.value,
                    winner=m.winner,
                    ended_at=m.ended_at,
                    divergence_leaf=m.index if m.height == 0 else None,
                    charged=dict(m.charged),
                )
            )
            if record_transcripts:
                transcripts.extend(m.transcript)
        if len(group) == 1:
            group_winners.append(group[0])  # alone in the last group: wins it
        else:
            winner = next((c for c in group if wins[c] == len(group) - 1), None)
            group_winners.append(winner)

    winners = {w for w in group_winners if w is not None}
    demoted = [cid for g in groups for cid in g if cid not in winners]
    k_max = params.k_max
    before = demotion_distribution(setup.claims, k_max)
    eliminated: list[str] = []
    if mode == "discrete":
        for cid in demoted:
            if claims_by_id[cid].demotions + 1 >= k_max:
                eliminated.append(cid)
    return RoundReport(
        index=round_index,
        partition=partition,
        outcomes=outcomes,
        group_winners=group_winners,
        demoted=demoted,
        eliminated=eliminated,
        distribution_before=before,
        distribution_after=(),
        censored_overlap=overlap_with_window(spans, round_start, round_end),
        transcripts=transcripts,
    )


def apply_outcomes(
    claims: list[ClaimRecord],
    report: RoundReport,
    mode: str,
    params: TimeParams,
) -> list[ClaimRecord]:
    """Update demotion counts (discrete) or censored time (continuous)."""
    claims_by_id = {c.id: c for c in claims}
    if mode == "discrete":
        for cid in report.demoted:
            claim = claims_by_id[cid]
            claim.demotions += 1
            if claim.demotions >= params.k_max:
                claim.eliminated = True
    else:
        worst: dict[str, int] = {}
        for outcome in report.outcomes:
            for cid, charge in outcome.charged.items():
                worst[cid] = max(worst.get(cid, 0), charge)
        for cid, t_a in worst.items():
            claim = claims_by_id[cid]
            claim.censored_time += max(0, t_a - params.t_m // 2)
            if claim.censored_time > params.t_c:
                claim.eliminated = True
    for claim in claims:
        if claim.honest:
            assert not claim.eliminated, "honest claim eliminated: threat model broken"
    report.distribution_after = demotion_distribution(claims, params.k_max)
    report.eliminated = [
        cid
        for cid in {c.id for c in claims if c.eliminated}
        if cid in {x for g in report.partition.groups for x in g}
    ]
    report.eliminated.sort()
    return claims


def run_dispute(
    setup: DisputeSetup,
    policy: adv.AdversaryPolicy,
    mode: str = "discrete",
    record_transcripts: bool = False,
) -> DisputeResult:
    """Iterate rounds until a single claim survives.

    The dispute cannot settle before the full censorship window has
    passed, so the elapsed time is floored at t_c even for tiny fields.
    """
    params = setup.params
    spans = adv.censorship_scheduler(policy.censor, params, setup.honest_id, mode)
    budget = new_budget(params)
    for span in spans:  # enforces the global censorship budget
        budget = spend_censorship(budget, span.start, span.duration, span.target)

    round_len = (
        params.round_duration if mode == "discrete" else params.round_duration_continuous
    )
    reports: list[RoundReport] = []
    rounds = 0
    while sum(1 for c in setup.claims if not c.eliminated) > 1:
        if rounds > params.k_max * len(setup.claims) + 8:
            raise RuntimeError("dispute failed to converge")
        partition = matchmake(setup.claims, params.group_size, mode)
        report = play_round(
            setup,
            partition,
            policy,
            rounds,
            mode=mode,
            spans=budget.spent_log,
            record_transcripts=record_transcripts,
        )
        apply_outcomes(setup.claims, report, mode, params)
        reports.append(report)
        rounds += 1

    survivors = [c for c in setup.claims if not c.eliminated]
    winner = survivors[0].id if survivors else None
    honest_won = winner == setup.honest_id
    assert honest_won, "honest claim lost under a threat-model-respecting adversary"
    return DisputeResult(
        winner=winner,
        rounds=rounds,
        elapsed_seconds=max(rounds * round_len, params.t_c),
        honest_won=honest_won,
        reports=reports,
    )


def result_json(result: DisputeResult) -> str:
    return json.dumps(result.to_json(), indent=2, sort_keys=True)


def transcripts_json_lines(result: DisputeResult) -> str:
    lines = []
    for report in result.reports:
        for entry in report.transcripts:
            lines.append(json.dumps(entry, sort_keys=True))
    return "\n".join(lines)
