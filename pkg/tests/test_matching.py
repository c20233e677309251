import numpy as np
import pytest

from selective_depth import synth
from selective_depth.errors import EmptyRoi, ImageTooSmall, NumericalDegeneracy
from selective_depth.geometry import CameraIntrinsics, CameraView, sample_planes
from selective_depth.matching import (
    CENSUS_BITS,
    ImageBundle,
    Roi,
    build_cost_volume,
    build_cost_volumes,
    census_transform,
    hamming_cost,
    warp_image,
)
from selective_depth.pipeline import select_bundle


def naive_census(patch):
    """Descriptor of the centre of a 7x9 patch by explicit comparison."""
    c = patch[3, 4]
    bits, k = 0, 0
    for y in range(7):
        for x in range(9):
            if (y, x) == (3, 4):
                continue
            if patch[y, x] < c:
                bits |= 1 << k
            k += 1
    return bits


def naive_popcount(v):
    n = 0
    while v:
        n += v & 1
        v >>= 1
    return n


def test_census_constant_image():
    desc, valid = census_transform(np.full((20, 30), 9.0))
    assert not desc.any()
    assert valid[3:-3, 4:-4].all() and not valid[:3].any() and not valid[:, :4].any()
    assert valid.sum() == (20 - 6) * (30 - 8)


def test_census_bright_center():
    img = np.zeros((7, 9))
    img[3, 4] = 1.0
    desc, valid = census_transform(img)
    assert valid[3, 4]
    assert int(desc[3, 4]) == (1 << 62) - 1


def test_census_matches_naive(rng):
    for _ in range(200):
        patch = rng.permutation(63).reshape(7, 9).astype(float)
        desc, _ = census_transform(patch)
        assert int(desc[3, 4]) == naive_census(patch)


def test_census_too_small():
    with pytest.raises(ImageTooSmall):
        census_transform(np.zeros((6, 9)))
    with pytest.raises(ImageTooSmall):
        census_transform(np.zeros((7, 8)))


def test_census_affine_invariance(rng):
    img = rng.permutation(40 * 50).reshape(40, 50).astype(np.float64)
    d0, _ = census_transform(img)
    d1, _ = census_transform(3.5 * img + 17.0)
    np.testing.assert_array_equal(d0, d1)


def test_hamming_examples(rng):
    full = (1 << CENSUS_BITS) - 1
    assert hamming_cost(full, full) == 0
    assert hamming_cost(0, full) == 62
    a = rng.integers(0, 1 << 62, 500, dtype=np.uint64)
    b = rng.integers(0, 1 << 62, 500, dtype=np.uint64)
    vec = hamming_cost(a, b)
    for x, y, h in zip(a, b, vec):
        assert hamming_cost(int(x), int(y)) == naive_popcount(int(x) ^ int(y)) == h


def test_warp_identity(rng):
    img = rng.integers(0, 256, (30, 40)).astype(np.float32)
    out, valid = warp_image(img, np.eye(3))
    np.testing.assert_array_equal(out, img)
    assert valid.all()


def test_warp_out_of_bounds(rng):
    img = rng.random((30, 40))
    H = np.array([[1, 0, 40.0], [0, 1, 0], [0, 0, 1]])
    _, valid = warp_image(img, H)
    assert not valid.any()


def test_warp_integer_shift(rng):
    img = rng.random((30, 40)).astype(np.float32)
    H = np.array([[1, 0, 3.0], [0, 1, 2.0], [0, 0, 1]])
    out, valid = warp_image(img, H)
    np.testing.assert_array_equal(out[:-2, :-3], img[2:, 3:])
    assert valid[:-2, :-3].all() and not valid[-2:].any() and not valid[:, -3:].any()


def test_warp_bilinear_midpoint():
    img = np.array([[0.0, 2.0], [4.0, 6.0]])
    H = np.array([[1, 0, 0.5], [0, 1, 0.5], [0, 0, 1]])
    out, valid = warp_image(img, H)
    assert out[0, 0] == pytest.approx(3.0) and valid[0, 0]
    assert not valid[0, 1] and not valid[1, 0]


def test_warp_singular():
    with pytest.raises(NumericalDegeneracy):
        warp_image(np.zeros((10, 10)), np.zeros((3, 3)))


def _identical_bundle(img):
    sc = synth.two_plane_scene(img.shape[1], img.shape[0])
    v = CameraView(sc.intrinsics, sc.poses[2], img)
    return ImageBundle(v, (v, v), (v, v))


def test_cost_volume_identical_views(rng):
    bundle = _identical_bundle(rng.integers(0, 256, (30, 40)).astype(np.uint8))
    vol = build_cost_volume(bundle, sample_planes(2, 20, 5))
    assert vol.valid[3:-3, 4:-4].all()
    assert not vol.cost[vol.valid].any()
    assert not vol.valid[:3].any()


def _plane_scene(depth, w=96, h=72):
    f = 0.9 * w
    patch = synth.Patch((0.0, 0.0, depth), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), seed=5, cell=2.5 * depth / f)
    return synth.SyntheticScene((patch,), synth.lateral_trajectory(5, 1.0), CameraIntrinsics(f, f, (w - 1) / 2, (h - 1) / 2), w, h)


def test_cost_minimum_at_true_plane():
    scene = _plane_scene(13.0)
    bundle = select_bundle(synth.views(scene), 2)
    stack = sample_planes(5, 50, 32)
    vol = build_cost_volume(bundle, stack)
    nearest = int(np.argmin(np.abs(1 / stack.distances - 1 / 13.0)))
    interior = vol.valid.all(axis=2)
    best = np.argmin(np.where(vol.valid, vol.cost, np.inf), axis=2)
    assert interior.sum() > 0.5 * interior.size
    assert (best[interior] == nearest).mean() >= 0.95


def test_one_side_occluded(small_scene):
    _, bundle, _ = small_scene
    black = [CameraView(v.intrinsics, v.pose, np.zeros_like(v.image)) for v in bundle.before]
    occluded = ImageBundle(bundle.reference, black, bundle.after)
    stack = sample_planes(5, 50, 16)
    both = build_cost_volume(occluded, stack)
    left = build_cost_volume(occluded, stack, subsets="left")
    right = build_cost_volume(occluded, stack, subsets="right")
    lc = np.where(left.valid, left.cost, np.inf)
    rc = np.where(right.valid, right.cost, np.inf)
    expect = np.minimum(lc, rc)
    np.testing.assert_array_equal(both.valid, np.isfinite(expect))
    np.testing.assert_array_equal(both.cost[both.valid], expect[both.valid])
    # where the matching side wins, the stored cost is exactly that subset alone
    wins = both.valid & (rc < lc)
    assert wins.mean() > 0.3
    np.testing.assert_array_equal(both.cost[wins], right.cost[wins])


def test_cost_range_and_subset_bound(small_scene):
    _, bundle, _ = small_scene
    stack = sample_planes(5, 50, 8)
    both = build_cost_volume(bundle, stack)
    left = build_cost_volume(bundle, stack, subsets="left")
    right = build_cost_volume(bundle, stack, subsets="right")
    c = both.cost[both.valid]
    assert c.min() >= 0 and c.max() <= 62
    assert np.all(both.cost[left.valid] <= left.cost[left.valid])
    assert np.all(both.cost[right.valid] <= right.cost[right.valid])


def test_selective_block_equals_full(small_scene):
    _, bundle, _ = small_scene
    stack = sample_planes(5, 50, 8)
    full = build_cost_volume(bundle, stack)
    rois = [Roi(10, 5, 40, 30), Roi(0, 0, 12, 9), Roi(60, 40, 96, 72)]
    for roi, vol in zip(rois, build_cost_volumes(bundle, stack, rois)):
        sub = full.crop(roi)
        np.testing.assert_array_equal(vol.cost, sub.cost)
        np.testing.assert_array_equal(vol.valid, sub.valid)
        assert vol.origin == (roi.x0, roi.y0)


def test_affine_intensity_change_of_one_view(rng):
    img = rng.permutation(40 * 50).reshape(40, 50).astype(np.float64)
    bundle = _identical_bundle(img)
    v = bundle.after[0]
    brighter = CameraView(v.intrinsics, v.pose, 0.5 * img + 3.0)
    changed = ImageBundle(bundle.reference, bundle.before, (brighter, bundle.after[1]))
    stack = sample_planes(5, 50, 4)
    a, b = build_cost_volume(bundle, stack), build_cost_volume(changed, stack)
    np.testing.assert_array_equal(a.cost, b.cost)


def test_determinism_across_workers(small_scene):
    _, bundle, _ = small_scene
    stack = sample_planes(5, 50, 12)
    a = build_cost_volume(bundle, stack, workers=1)
    b = build_cost_volume(bundle, stack, workers=4)
    assert a.cost.tobytes() == b.cost.tobytes()
    np.testing.assert_array_equal(a.valid, b.valid)


def test_empty_roi(small_scene):
    _, bundle, _ = small_scene
    with pytest.raises(EmptyRoi):
        build_cost_volume(bundle, sample_planes(5, 50, 4), Roi(5, 5, 5, 10))
