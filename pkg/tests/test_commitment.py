import random
from dataclasses import replace

import pytest

from disputesim import commitment, vm
from disputesim.errors import IndexOutOfRange


def small_history(height=4, seed=b"t" * 32):
    return vm.run_honest(seed, height)


def test_two_leaf_root():
    h = small_history(height=1)
    tree = commitment.build_tree(h)
    x, y = h.state_hashes
    assert tree.root == commitment.interior_hash(x, y)


def test_corruption_reaches_root():
    h = small_history()
    honest = commitment.build_tree(h)
    for k in (0, 7, 15):
        corrupt = commitment.build_tree(vm.corrupt_history(h, k, rng_seed=k))
        assert corrupt.root != honest.root


def test_rebuild_is_deterministic():
    h = small_history()
    assert commitment.build_tree(h).root == commitment.build_tree(h).root


def test_leaves_are_state_hashes():
    h = small_history()
    tree = commitment.build_tree(h)
    for i, leaf in enumerate(h.state_hashes):
        assert tree.node(i, 0) == leaf
    assert tree.node(0, tree.height) == tree.root


def test_random_nodes_hash_from_children():
    h = small_history(height=6)
    tree = commitment.build_tree(h)
    rng = random.Random(99)
    for _ in range(50):
        b = rng.randint(1, 6)
        i = rng.randrange(1 << (6 - b))
        expected = commitment.interior_hash(tree.node(2 * i, b - 1), tree.node(2 * i + 1, b - 1))
        assert tree.node(i, b) == expected


def test_node_bounds():
    tree = commitment.build_tree(small_history())
    with pytest.raises(IndexOutOfRange):
        tree.node(0, 5)
    with pytest.raises(IndexOutOfRange):
        tree.node(16, 0)
    with pytest.raises(IndexOutOfRange):
        tree.node(1, 4)


def test_reveal_verifies_and_tampering_fails():
    tree = commitment.build_tree(small_history())
    r = commitment.reveal_children(tree, 1, 2)
    parent = tree.node(1, 2)
    assert commitment.verify_children(parent, r)
    flipped = bytes([r.left[0] ^ 1]) + r.left[1:]
    assert not commitment.verify_children(parent, replace(r, left=flipped))
    assert not commitment.verify_children(parent, replace(r, left=r.right, right=r.left))


def test_reveal_from_other_tree_fails():
    h = small_history()
    honest = commitment.build_tree(h)
    corrupt = commitment.build_tree(vm.corrupt_history(h, 0, rng_seed=5))
    r = commitment.reveal_children(corrupt, 0, honest.height)
    assert not commitment.verify_children(honest.root, r)


def test_reveal_at_leaf_level_is_leaves():
    h = small_history()
    tree = commitment.build_tree(h)
    r = commitment.reveal_children(tree, 3, 1)
    assert r.left == h.state_hashes[6]
    assert r.right == h.state_hashes[7]


def test_reveal_bounds():
    tree = commitment.build_tree(small_history())
    with pytest.raises(IndexOutOfRange):
        commitment.reveal_children(tree, 0, 0)


def test_first_divergence_equals_scan_small_heights():
    # exhaustive over every corruption point for B <= 8
    for height in (1, 2, 3, 5, 8):
        h = vm.run_honest(b"d" * 32, height)
        honest = commitment.build_tree(h)
        for k in range(1 << height):
            corrupt = commitment.build_tree(vm.corrupt_history(h, k, rng_seed=k + 1))
            assert commitment.first_divergence(honest, corrupt) == k


def test_first_divergence_random_at_height_20():
    h = vm.run_honest(b"big" + b"\x00" * 29, 20)
    honest = commitment.build_tree(h)
    rng = random.Random(7)
    for _ in range(3):
        k = rng.randrange(1 << 20)
        corrupt = commitment.build_tree(vm.corrupt_history(h, k, rng_seed=k))
        assert commitment.first_divergence(honest, corrupt) == k


def test_reveal_chain_reproduces_nodes():
    # any accepted reveal chain from the root hands back committed node values
    h = small_history(height=5)
    tree = commitment.build_tree(h)
    i, b = 0, 5
    digest = tree.root
    rng = random.Random(3)
    while b > 0:
        r = commitment.reveal_children(tree, i, b)
        assert commitment.verify_children(digest, r)
        go_right = rng.random() < 0.5
        i = 2 * i + int(go_right)
        digest = r.right if go_right else r.left
        b -= 1
        assert digest == tree.node(i, b)
