import itertools

import numpy as np
import pytest

from selective_depth.errors import DimensionMismatch
from selective_depth.geometry import CameraIntrinsics, sample_planes
from selective_depth.matching import CostVolume
from selective_depth.sgm import (
    DIRECTIONS,
    INVALID_INDEX,
    DepthMap,
    PlaneIndexMap,
    SgmParams,
    aggregate,
    aggregate_direction,
    extract_depth,
    median_filter_3x3,
    winner_take_all,
)


def volume(cost, valid=None):
    cost = np.asarray(cost, dtype=np.float32)
    return CostVolume(cost, np.ones(cost.shape, bool) if valid is None else valid)


def path_energy_table(costs, mask, p1, p2):
    """Exhaustive minimum of the path energy ending at each position and label.

    ``costs`` is (n, D) along the path; transitions into position k pay p1
    for a unit label change and p2 (p1 where ``mask[k]``) for larger ones.
    Returns (n, D): min energy over all labelings of positions 0..k with label i at k.
    """
    n, D = costs.shape
    table = np.full((n, D), np.inf)
    for k in range(n):
        labels = np.array(list(itertools.product(range(D), repeat=k + 1)))
        e = costs[np.arange(k + 1), labels].sum(axis=1)
        if k > 0:
            jumps = np.abs(np.diff(labels, axis=1))
            big = np.where(mask[1:k + 1], p1, p2)
            e = e + (p1 * (jumps == 1) + big * (jumps > 1)).sum(axis=1)
        for i in range(D):
            table[k, i] = e[labels[:, -1] == i].min()
    return table


def path_pixels(h, w, dx, dy):
    """Pixel sequences traversed by direction (dx, dy), predecessor first."""
    paths = []
    for y in range(h):
        for x in range(w):
            if 0 <= x - dx < w and 0 <= y - dy < h:
                continue
            seq = []
            cx, cy = x, y
            while 0 <= cx < w and 0 <= cy < h:
                seq.append((cy, cx))
                cx, cy = cx + dx, cy + dy
            paths.append(seq)
    return paths


def check_against_oracle(cost, mask, params, direction):
    L = aggregate_direction(cost, mask, params, direction)
    for seq in path_pixels(cost.shape[0], cost.shape[1], *direction):
        ys, xs = zip(*seq)
        table = path_energy_table(cost[ys, xs].astype(np.float64), mask[ys, xs], params.p1, params.p2)
        got = L[ys, xs].astype(np.float64)
        # the recurrence subtracts the running minimum; compare up to that per-pixel offset
        np.testing.assert_array_equal(got - got.min(axis=1, keepdims=True), table - table.min(axis=1, keepdims=True))


def test_scanline_matches_exhaustive(rng):
    params = SgmParams(5, 50)
    for _ in range(20):
        cost = rng.integers(0, 63, (1, 8, 4)).astype(np.float32)
        check_against_oracle(cost, np.zeros((1, 8), bool), params, (1, 0))


@pytest.mark.parametrize("direction", DIRECTIONS)
def test_every_direction_on_2x8(rng, direction):
    for _ in range(5):
        cost = rng.integers(0, 63, (2, 8, 3)).astype(np.float32)
        mask = rng.random((2, 8)) < 0.3
        check_against_oracle(cost, mask, SgmParams(4, 30), direction)


def test_zero_penalties_sum_raw(rng):
    cost = rng.integers(0, 63, (6, 7, 5)).astype(np.float32)
    agg = aggregate(volume(cost), None, SgmParams(0, 0))
    np.testing.assert_array_equal(agg.cost, 8 * cost)
    np.testing.assert_array_equal(winner_take_all(agg).index, np.argmin(cost, axis=2))


def test_single_pixel(rng):
    cost = rng.integers(0, 63, (1, 1, 6)).astype(np.float32)
    agg = aggregate(volume(cost), None, SgmParams())
    np.testing.assert_array_equal(agg.cost, 8 * cost)
    assert winner_take_all(agg).index[0, 0] == np.argmin(cost)


def test_full_mask_equals_p2_of_p1(rng):
    cost = rng.integers(0, 63, (9, 11, 6)).astype(np.float32)
    a = aggregate(volume(cost), np.ones((9, 11), bool), SgmParams(5, 50))
    b = aggregate(volume(cost), None, SgmParams(5, 5))
    assert a.cost.tobytes() == b.cost.tobytes()


def test_mask_only_touches_transitions_into_masked_pixels(rng):
    cost = rng.integers(0, 63, (1, 10, 4)).astype(np.float32)
    params = SgmParams(5, 50)
    plain = aggregate_direction(cost, None, params, (1, 0))
    mask = np.zeros((1, 10), bool)
    mask[0, 6] = True
    masked = aggregate_direction(cost, mask, params, (1, 0))
    np.testing.assert_array_equal(masked[0, :6], plain[0, :6])
    # a mask on the first pixel of a path has no incoming transition
    first = np.zeros((1, 10), bool)
    first[0, 0] = True
    np.testing.assert_array_equal(aggregate_direction(cost, first, params, (1, 0)), plain)


def test_mask_dimension_mismatch(rng):
    with pytest.raises(DimensionMismatch):
        aggregate(volume(np.zeros((4, 5, 2))), np.zeros((5, 4), bool))


def row_discontinuities(index):
    return int((np.abs(np.diff(index, axis=1)) > 1).sum())


def test_larger_p2_smooths_more():
    low, high = [], []
    for seed in range(50):
        r = np.random.default_rng(seed)
        cost = r.integers(0, 63, (12, 16, 8)).astype(np.float32)
        low.append(row_discontinuities(winner_take_all(aggregate(volume(cost), None, SgmParams(5, 10))).index))
        high.append(row_discontinuities(winner_take_all(aggregate(volume(cost), None, SgmParams(5, 80))).index))
    assert np.median(high) <= np.median(low)


def test_uniform_shift_keeps_winners(rng):
    cost = rng.integers(0, 50, (10, 12, 6)).astype(np.float32)
    a = winner_take_all(aggregate(volume(cost), None, SgmParams()))
    b = winner_take_all(aggregate(volume(cost + 7), None, SgmParams()))
    np.testing.assert_array_equal(a.index, b.index)


def test_aggregate_workers_bit_identical(rng):
    cost = rng.integers(0, 63, (15, 17, 9)).astype(np.float32)
    mask = rng.random((15, 17)) < 0.2
    a = aggregate(volume(cost), mask, SgmParams(), workers=1)
    b = aggregate(volume(cost), mask, SgmParams(), workers=4)
    assert a.cost.tobytes() == b.cost.tobytes()


def test_params_validation():
    with pytest.raises(ValueError):
        SgmParams(10, 5)
    with pytest.raises(ValueError):
        SgmParams(5, 50, paths=16)


def test_wta_examples(rng):
    assert not winner_take_all(volume(rng.random((4, 5, 1)))).index.any()
    mono = np.broadcast_to(np.arange(6, dtype=np.float32), (4, 5, 6)).copy()
    assert not winner_take_all(volume(mono)).index.any()


def test_wta_naive_scan(rng):
    cost = rng.integers(0, 5, (8, 9, 7)).astype(np.float32)
    valid = rng.random(cost.shape) < 0.8
    valid[0, 0] = False
    got = winner_take_all(volume(cost, valid)).index
    for y in range(8):
        for x in range(9):
            best, arg = np.inf, INVALID_INDEX
            for i in range(7):
                if valid[y, x, i] and cost[y, x, i] < best:
                    best, arg = cost[y, x, i], i
            assert got[y, x] == arg


def test_extract_depth():
    stack = sample_planes(2.0, 40.0, 10)
    intr = CameraIntrinsics(50, 50, 10, 8)
    idx = np.zeros((16, 20), np.int32)
    assert np.all(extract_depth(PlaneIndexMap(idx), stack, intr).depth == 2.0)
    idx = np.random.default_rng(0).integers(0, 10, (16, 20)).astype(np.int32)
    idx[3, 4] = INVALID_INDEX
    d = extract_depth(PlaneIndexMap(idx), stack, intr)
    table = stack.distances.astype(np.float32)
    ok = idx >= 0
    np.testing.assert_array_equal(d.depth[ok], table[idx[ok]])
    assert not d.valid[3, 4]
    assert np.isinf(d.depth[3, 4])


def test_median_examples():
    const = DepthMap(np.full((5, 6), 3.0, np.float32))
    np.testing.assert_array_equal(median_filter_3x3(const).depth, const.depth)
    spike = const.depth.copy()
    spike[2, 3] = 40.0
    assert median_filter_3x3(DepthMap(spike)).depth[2, 3] == 3.0
    assert not median_filter_3x3(DepthMap.invalid(6, 5)).valid.any()


def test_median_ignores_invalid_and_truncates():
    d = np.full((3, 3), np.inf, np.float32)
    d[0, 0], d[0, 1], d[1, 1] = 1.0, 2.0, 10.0
    out = median_filter_3x3(DepthMap(d)).depth
    assert out[0, 0] == 2.0          # window {1, 2, 10}
    assert out[2, 2] == 10.0         # only (1,1) valid in its window
    assert out[2, 0] == 10.0
    assert out[1, 0] == 2.0
