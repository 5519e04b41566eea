"""Toy deterministic state machine whose histories get disputed.

The machine is a hash chain: each transition folds the step counter into
the running digest, so any two runs from the same seed are byte-identical
and any single corrupted entry changes every digest that depends on it.
One transition stands in for a "fat" batch of real instructions; the
referee-side verification of a transition is plain re-execution of that
one step (the stand-in for checking a validity proof).

All hashing is SHA-256.  Machine-state hashes carry a leaf tag byte so
they can never collide with interior commitment-tree nodes.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from typing import Optional

from .errors import HeightOutOfRange, IndexOutOfRange, StepPastEnd

HASH_NAME = "sha256"
DIGEST_SIZE = 32
MAX_HEIGHT = 30

_LEAF_TAG = b"\x00"


def _sha(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def _be8(value: int) -> bytes:
    return value.to_bytes(8, "big")


@dataclass(frozen=True)
class MachineState:
    """Opaque machine state: running digest plus transition count."""

    digest: bytes
    step_index: int


@dataclass(frozen=True)
class History:
    """State hashes after transitions 1..2^height from a given seed.

    ``divergence_index`` is simulation-only metadata: the first leaf at
    which this history stops agreeing with the honest run, or None for
    an honest history.  Referee-side code never reads it.
    """

    seed: bytes
    height: int
    state_hashes: tuple[bytes, ...]
    divergence_index: Optional[int] = None

    def __len__(self) -> int:
        return len(self.state_hashes)


def initial_state(seed: bytes) -> MachineState:
    """Agreed starting state: one hash application over the seed."""
    return MachineState(digest=_sha(seed), step_index=0)


def step(s: MachineState, height: int = MAX_HEIGHT) -> MachineState:
    """One deterministic transition; refuses to run past step 2^height."""
    if s.step_index >= 1 << height:
        raise StepPastEnd(f"state is already at final step {s.step_index}")
    return MachineState(
        digest=_sha(s.digest + _be8(s.step_index)),
        step_index=s.step_index + 1,
    )


def state_hash(s: MachineState) -> bytes:
    """Collision-resistant identifier of a machine state."""
    return _sha(_LEAF_TAG + s.digest + _be8(s.step_index))


def run_honest(seed: bytes, height: int) -> History:
    """Run the machine for 2^height transitions, recording every state hash."""
    if not 1 <= height <= MAX_HEIGHT:
        raise HeightOutOfRange(f"height must be in 1..{MAX_HEIGHT}, got {height}")
    s = initial_state(seed)
    hashes = []
    for _ in range(1 << height):
        s = step(s, height)
        hashes.append(state_hash(s))
    return History(seed=seed, height=height, state_hashes=tuple(hashes))


def corrupt_history(h: History, at: int, rng_seed: int) -> History:
    """Copy ``h`` with every leaf from ``at`` onward replaced by garbage.

    The garbage is pseudo-random from ``rng_seed`` so distinct Sybil
    claims built from the same honest run stay pairwise distinct.
    """
    n = len(h.state_hashes)
    if not 0 <= at < n:
        raise IndexOutOfRange(f"corruption index {at} outside 0..{n - 1}")
    if h.divergence_index is not None and h.divergence_index <= at:
        raise IndexOutOfRange(
            f"history already diverges at {h.divergence_index} <= {at}"
        )
    hashes = list(h.state_hashes)
    for i in range(at, n):
        garbage = _sha(b"corrupt" + _be8(rng_seed) + _be8(i))
        if garbage == hashes[i]:  # astronomically unlikely; keep leaves distinct
            garbage = _sha(garbage)
        hashes[i] = garbage
    return replace(h, state_hashes=tuple(hashes), divergence_index=at)


def verify_step_witness(agreed: MachineState, claimed_next: bytes) -> bool:
    """Re-execute one transition and compare against the claimed state hash.

    Stand-in for validity-proof verification: accepts exactly when the
    claimed hash is the true successor of the agreed state.
    """
    return state_hash(step(agreed)) == claimed_next


def state_at(seed: bytes, index: int) -> MachineState:
    """Recompute the machine state after ``index`` transitions from seed."""
    s = initial_state(seed)
    for _ in range(index):
        s = step(s)
    return s
