"""Dense commitment tree over a computation history.

A claim is the root of a complete binary Merkle tree whose 2^B leaves
are the machine-state hashes after transitions 1..2^B (the agreed
initial state is excluded).  ``node(t, i, b)`` addresses the i-th
subtree of height b, so ``node(t, i, 0)`` is leaf i and
``node(t, 0, B)`` is the claim root.

Interior nodes are SHA-256 over a tag byte plus the two children; the
tag keeps interior nodes from ever being confused with (leaf-tagged)
state hashes.  Encoding choices are local to this build and recorded in
output metadata; cross-implementation hash equality is not a goal.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .errors import IndexOutOfRange
from .vm import History

_INTERIOR_TAG = b"\x01"

ENCODING_NOTE = "sha256; leaf tag 0x00 inside state hashes; interior tag 0x01"


def interior_hash(left: bytes, right: bytes) -> bytes:
    """Hash of an interior node from its two children."""
    return hashlib.sha256(_INTERIOR_TAG + left + right).digest()


@dataclass(frozen=True)
class ChildrenReveal:
    """Both children of a committed node, offered as a bisection move."""

    left: bytes
    right: bytes
    parent_index: int
    parent_height: int


class CommitmentTree:
    """Fully materialized commitment tree (fine for desk-scale heights)."""

    def __init__(self, height: int, levels: list[list[bytes]]):
        self.height = height
        self._levels = levels  # _levels[b] has 2^(height-b) digests

    @property
    def root(self) -> bytes:
        return self._levels[self.height][0]

    def node(self, i: int, b: int) -> bytes:
        if not 0 <= b <= self.height:
            raise IndexOutOfRange(f"height {b} outside 0..{self.height}")
        if not 0 <= i < 1 << (self.height - b):
            raise IndexOutOfRange(
                f"index {i} outside subtrees of height {b} in a tree of height {self.height}"
            )
        return self._levels[b][i]


def build_tree(h: History) -> CommitmentTree:
    """Build the full tree over a history's 2^B state hashes."""
    level = list(h.state_hashes)
    levels = [level]
    while len(level) > 1:
        level = [
            interior_hash(level[2 * i], level[2 * i + 1])
            for i in range(len(level) // 2)
        ]
        levels.append(level)
    return CommitmentTree(height=h.height, levels=levels)


def node(t: CommitmentTree, i: int, b: int) -> bytes:
    return t.node(i, b)


def reveal_children(t: CommitmentTree, i: int, b: int) -> ChildrenReveal:
    """Reveal both children of node (i, b); only defined for b >= 1."""
    if b < 1:
        raise IndexOutOfRange("leaves have no children to reveal")
    t.node(i, b)  # validates the (i, b) range
    return ChildrenReveal(
        left=t.node(2 * i, b - 1),
        right=t.node(2 * i + 1, b - 1),
        parent_index=i,
        parent_height=b,
    )


def verify_children(parent: bytes, r: ChildrenReveal) -> bool:
    """Check a reveal against the committed parent digest."""
    return interior_hash(r.left, r.right) == parent


def first_divergence(a: CommitmentTree, b: CommitmentTree) -> int:
    """Descend both trees toward the first differing leaf.

    Mirrors the bisection rule: go left when the left children differ,
    otherwise right.  Roots must differ.
    """
    if a.root == b.root:
        raise IndexOutOfRange("trees agree at the root; nothing to find")
    i = 0
    for height in range(a.height, 0, -1):
        ra, rb = reveal_children(a, i, height), reveal_children(b, i, height)
        if ra.left != rb.left:
            i = 2 * i
        else:
            assert ra.right != rb.right, "parents differ but children agree"
            i = 2 * i + 1
    return i
