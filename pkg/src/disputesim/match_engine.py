"""Referee state machine for one pairwise match between two claims.

A match walks the disagreement between two commitment roots from the
root (height B) down to the first diverging leaf (height 0), then waits
for a step action that re-executes the single disputed transition.  At
every node both sides owe a child reveal; the referee compares accepted
reveals and descends left when the left children differ, right
otherwise.  A side's chess clock runs exactly while that side owes an
action it has not landed yet.

Timing discipline: calls must arrive in non-decreasing virtual time.  A
valid action landing at the very instant its clock reaches zero is on
time; a timeout needs the owed time to pass the remaining budget with
nothing landed.  Submissions that fail verification are non-actions:
the referee rejects them and the submitter's clock just keeps running.
If both clocks expire at the same instant the match is a double
timeout and nobody wins it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .clock import TimeParams
from .commitment import ChildrenReveal, verify_children
from .errors import (
    IdenticalClaims,
    InvalidParam,
    NotAtLeaf,
    NotRunning,
    WitnessHashMismatch,
    WrongHeight,
)
from .vm import MachineState, state_hash, verify_step_witness


class MatchStatus(Enum):
    RUNNING = "running"
    WON_BY_STEP = "won-by-step"
    WON_BY_TIMEOUT = "won-by-timeout"
    DOUBLE_TIMEOUT = "double-timeout"
    UNFINISHED = "unfinished"  # continuous-mode round ended mid-match


@dataclass(frozen=True)
class StepWitness:
    """Full machine state at the last agreed point plus the claimed next hash."""

    agreed_state: MachineState
    claimed_next: bytes


@dataclass
class MatchState:
    sides: tuple[str, str]
    digest: dict[str, bytes]
    index: int
    height: int
    params: TimeParams
    match_id: str = "m"
    initial_state_hash: Optional[bytes] = None
    pending: dict[str, Optional[ChildrenReveal]] = field(default_factory=dict)
    remaining: dict[str, int] = field(default_factory=dict)
    owed_since: dict[str, Optional[int]] = field(default_factory=dict)
    charged: dict[str, int] = field(default_factory=dict)
    actions_done: dict[str, int] = field(default_factory=dict)
    agreed_leaf_digest: Optional[bytes] = None
    status: MatchStatus = MatchStatus.RUNNING
    winner: Optional[str] = None
    ended_at: Optional[int] = None
    now: int = 0
    transcript: list[dict] = field(default_factory=list)

    def other(self, side: str) -> str:
        a, b = self.sides
        return b if side == a else a

    def _log(self, t: int, side: Optional[str], action: str, **extra) -> None:
        entry = {
            "t": t,
            "match": self.match_id,
            "side": side,
            "action": action,
            "i": self.index,
            "b": self.height,
        }
        entry.update(extra)
        self.transcript.append(entry)


def open_match(
    root_a: bytes,
    root_b: bytes,
    params: TimeParams,
    *,
    claim_a: str = "a",
    claim_b: str = "b",
    now: int = 0,
    match_id: str = "m",
    initial_state_hash: Optional[bytes] = None,
) -> MatchState:
    """Start a match at the root disagreement with fresh chess clocks."""
    if root_a == root_b:
        raise IdenticalClaims("claims are unique; cannot match a root against itself")
    m = MatchState(
        sides=(claim_a, claim_b),
        digest={claim_a: root_a, claim_b: root_b},
        index=0,
        height=params.tree_height,
        params=params,
        match_id=match_id,
        initial_state_hash=initial_state_hash,
        now=now,
    )
    for side in m.sides:
        m.pending[side] = None
        m.remaining[side] = params.match_budget
        m.owed_since[side] = now
        m.charged[side] = 0
        m.actions_done[side] = 0
    m._log(now, None, "open")
    return m


def _check_time(m: MatchState, now: int) -> None:
    if now < m.now:
        raise InvalidParam(f"time went backwards: {now} < {m.now}")
    m.now = now


def _end(m: MatchState, t: int, status: MatchStatus, winner: Optional[str]) -> None:
    for side in m.sides:
        since = m.owed_since[side]
        if since is not None:
            burned = min(t - since, m.remaining[side])
            m.charged[side] += burned
            m.remaining[side] -= burned
            m.owed_since[side] = None
    m.status = status
    m.winner = winner
    m.ended_at = t
    m._log(t, winner, status.value)


def _settle_timeouts(m: MatchState, now: int, inclusive: bool) -> None:
    """Fire any clock crossings that happened before ``now``.

    ``inclusive`` counts a crossing exactly at ``now``; submissions call
    this exclusively so an action landing at the crossing instant wins
    the race against its own timeout.
    """
    if m.status is not MatchStatus.RUNNING:
        return
    crossings = {}
    for side in m.sides:
        since = m.owed_since[side]
        if since is None:
            continue
        crossing = since + m.remaining[side]
        if crossing < now or (inclusive and crossing == now):
            crossings[side] = crossing
    if not crossings:
        return
    first = min(crossings.values())
    losers = [s for s, t in crossings.items() if t == first]
    if len(losers) == 2:
        _end(m, first, MatchStatus.DOUBLE_TIMEOUT, None)
    else:
        loser = losers[0]
        m._log(first, loser, "timeout")
        _end(m, first, MatchStatus.WON_BY_TIMEOUT, m.other(loser))


def advance_time(m: MatchState, now: int) -> MatchState:
    """Let virtual time pass with no submissions; fires due timeouts."""
    if m.status is not MatchStatus.RUNNING:
        return m
    _check_time(m, now)
    _settle_timeouts(m, now, inclusive=True)
    return m


def _charge_action(m: MatchState, side: str, now: int) -> None:
    since = m.owed_since[side]
    assert since is not None
    elapsed = now - since
    m.charged[side] += elapsed
    m.remaining[side] -= elapsed
    m.owed_since[side] = None
    m.actions_done[side] += 1


def submit_bisect(
    m: MatchState, side: str, reveal: ChildrenReveal, now: int
) -> MatchState:
    """Record one side's child reveal; descend once both sides are in."""
    _check_time(m, now)
    _settle_timeouts(m, now, inclusive=False)
    if m.status is not MatchStatus.RUNNING:
        raise NotRunning(f"match already ended: {m.status.value}")
    if m.height < 1:
        raise WrongHeight("bisection is over; only a step action remains")
    if m.pending[side] is not None:
        return m  # already revealed at this node; redundant submission
    ok = (
        reveal.parent_index == m.index
        and reveal.parent_height == m.height
        and verify_children(m.digest[side], reveal)
    )
    if not ok:
        m._log(now, side, "bisect-rejected")
        return m
    m.pending[side] = reveal
    _charge_action(m, side, now)
    m._log(now, side, "bisect")

    other = m.other(side)
    if m.pending[other] is None:
        return m

    mine, theirs = m.pending[side], m.pending[other]
    assert mine is not None and theirs is not None
    if mine.left != theirs.left:
        m.index = 2 * m.index
        m.digest[side] = mine.left
        m.digest[other] = theirs.left
    else:
        assert mine.right != theirs.right, "digests differ but both children agree"
        if m.height == 1:
            m.agreed_leaf_digest = mine.left  # revealed leaf just before divergence
        m.index = 2 * m.index + 1
        m.digest[side] = mine.right
        m.digest[other] = theirs.right
    m.height -= 1
    for s in m.sides:
        m.pending[s] = None
        m.owed_since[s] = now
    m._log(now, None, "descend")
    return m


def submit_step(m: MatchState, side: str, witness: StepWitness, now: int) -> MatchState:
    """Try to win by re-executing the disputed transition.

    The witness must carry the machine state at the last agreed index.
    Its hash binding is enforced wherever the referee knows the agreed
    digest: at index 0 (the public initial state) and at odd indices
    (the sibling leaf revealed by the final descent).  Elsewhere the
    re-execution check alone decides; a forged witness would need a
    hash collision to pass it.
    """
    _check_time(m, now)
    _settle_timeouts(m, now, inclusive=False)
    if m.status is not MatchStatus.RUNNING:
        raise NotRunning(f"match already ended: {m.status.value}")
    if m.height != 0:
        raise NotAtLeaf(f"bisection still at height {m.height}")
    if witness.agreed_state.step_index != m.index:
        raise WitnessHashMismatch(
            f"witness is for step {witness.agreed_state.step_index}, "
            f"divergence is at leaf {m.index}"
        )
    if m.index == 0:
        if (
            m.initial_state_hash is not None
            and state_hash(witness.agreed_state) != m.initial_state_hash
        ):
            raise WitnessHashMismatch("witness does not match the agreed initial state")
    elif m.agreed_leaf_digest is not None:
        if state_hash(witness.agreed_state) != m.agreed_leaf_digest:
            raise WitnessHashMismatch("witness does not match the last agreed leaf")

    if witness.claimed_next == m.digest[side] and verify_step_witness(
        witness.agreed_state, witness.claimed_next
    ):
        _charge_action(m, side, now)
        m._log(now, side, "step")
        _end(m, now, MatchStatus.WON_BY_STEP, side)
    else:
        m._log(now, side, "step-rejected")
    return m


def close_unfinished(m: MatchState, at: int) -> MatchState:
    """End-of-round cutoff for continuous mode: no winner, charges settled."""
    if m.status is not MatchStatus.RUNNING:
        return m
    _check_time(m, at)
    _settle_timeouts(m, at, inclusive=True)
    if m.status is MatchStatus.RUNNING:
        _end(m, at, MatchStatus.UNFINISHED, None)
    return m


def transcript_json_lines(m: MatchState) -> str:
    """Transcript as JSON lines, one action per line."""
    return "\n".join(json.dumps(entry, sort_keys=True) for entry in m.transcript)
