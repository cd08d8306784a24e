import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from textonloc.filtering import ArenaBounds
from textonloc.knn import TrainingSet
from textonloc.mapeval import (
    LossParams,
    cosine_similarity,
    global_loss,
    ideal_similarity,
    local_loss,
    local_losses,
    loss_map,
)

PARAMS = LossParams(1.0, 1.0)


def double_loop_loss(hists, positions, sx, sy):
    """Plain-Python evaluation of the pairwise loss."""
    n = len(hists)
    total = 0.0
    for i in range(n):
        for j in range(n):
            hi, hj = hists[i], hists[j]
            dot = sum(a * b for a, b in zip(hi, hj))
            cs = dot / (math.sqrt(sum(a * a for a in hi)) * math.sqrt(sum(b * b for b in hj)))
            dx = positions[i][0] - positions[j][0]
            dy = positions[i][1] - positions[j][1]
            de = math.exp(-dx * dx / (2 * sx * sx)) * math.exp(-dy * dy / (2 * sy * sy))
            total += cs - de
    return total / (n * n)


def random_dataset(rng, n, t=20):
    h = rng.random((n, t))
    return TrainingSet(h / h.sum(1, keepdims=True), rng.uniform(0, 5, (n, 2)))


# -- similarities ---------------------------------------------------------------

def test_cosine_examples():
    assert cosine_similarity((1, 0), (0, 1)) == 0.0
    assert cosine_similarity((0.3, 0.7), (0.3, 0.7)) == pytest.approx(1.0)
    expected = 0.56 / (math.sqrt(0.68) * math.sqrt(0.52))
    assert cosine_similarity((0.8, 0.2), (0.6, 0.4)) == pytest.approx(expected, abs=1e-15)
    assert cosine_similarity((0.8, 0.2), (0.6, 0.4)) == pytest.approx(0.9417, abs=5e-5)


def test_cosine_errors():
    with pytest.raises(ValueError):
        cosine_similarity((0, 0), (1, 0))
    with pytest.raises(ValueError):
        cosine_similarity((1, 0), (1, 0, 0))


@settings(max_examples=100, deadline=None)
@given(
    a=hnp.arrays(np.float64, 6, elements=st.floats(0, 1)).filter(lambda v: v.sum() > 1e-3),
    b=hnp.arrays(np.float64, 6, elements=st.floats(0, 1)).filter(lambda v: v.sum() > 1e-3),
    alpha=st.floats(1e-3, 1e3),
)
def test_cosine_properties(a, b, alpha):
    cs = cosine_similarity(a, b)
    assert -1e-12 <= cs <= 1 + 1e-12
    assert cs == pytest.approx(cosine_similarity(b, a), abs=1e-12)
    assert cs == pytest.approx(cosine_similarity(alpha * a, b), abs=1e-12)
    assert cosine_similarity(a, a) == pytest.approx(1.0, abs=1e-12)


def test_ideal_examples():
    p = LossParams(0.4, 0.7)
    assert ideal_similarity((1, 2), (1, 2), p) == 1.0
    assert ideal_similarity((1.4, 2), (1, 2), p) == pytest.approx(math.exp(-0.5))
    assert ideal_similarity((1.4, 2.7), (1, 2), p) == pytest.approx(math.exp(-1))


def test_loss_params_validation():
    for sx, sy in [(0, 1), (1, 0), (-1, 1)]:
        with pytest.raises(ValueError):
            LossParams(sx, sy)


@settings(max_examples=100, deadline=None)
@given(
    coords=st.lists(st.floats(-10, 10), min_size=4, max_size=4),
    sx=st.floats(0.05, 5), sy=st.floats(0.05, 5),
)
def test_ideal_properties(coords, sx, sy):
    p = LossParams(sx, sy)
    a, b = coords[:2], coords[2:]
    d = ideal_similarity(a, b, p)
    assert 0 <= d <= 1
    assert d == pytest.approx(ideal_similarity(b, a, p))
    # separable in the two axes
    assert d == pytest.approx(ideal_similarity((a[0], 0), (b[0], 0), p) * ideal_similarity((0, a[1]), (0, b[1]), p))
    # farther apart along x is never more similar
    far = (b[0] + np.sign(b[0] - a[0] or 1) * 0.5, b[1])
    assert ideal_similarity(a, far, p) <= d


# -- local and global loss ---------------------------------------------------------

def test_single_entry_loss_is_zero():
    ds = TrainingSet(np.array([[0.2, 0.8]]), np.array([[1.0, 1.0]]))
    assert local_loss(ds, 0, PARAMS) == 0.0
    assert global_loss(ds, PARAMS) == 0.0


def test_identical_entries_loss_is_zero():
    ds = TrainingSet(np.tile([0.5, 0.25, 0.25], (4, 1)), np.tile([2.0, 3.0], (4, 1)))
    assert global_loss(ds, PARAMS) == pytest.approx(0.0, abs=1e-15)


def test_identical_histograms_far_apart():
    ds = TrainingSet(np.array([[0.5, 0.5], [0.5, 0.5]]), np.array([[0.0, 0.0], [100.0, 0.0]]))
    expected = 0.25 * (2 * 0 + 2 * (1 - math.exp(-5000)))
    assert global_loss(ds, PARAMS) == pytest.approx(expected)
    assert global_loss(ds, PARAMS) == pytest.approx(0.5)


def test_orthogonal_histograms_coincident():
    ds = TrainingSet(np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([[1.0, 1.0], [1.0, 1.0]]))
    assert global_loss(ds, PARAMS) == pytest.approx(-0.5)


def test_three_entry_hand_built_dataset():
    hists = [[0.7, 0.2, 0.1], [0.1, 0.6, 0.3], [0.3, 0.3, 0.4]]
    pos = [[0.0, 0.0], [0.5, 0.2], [2.0, -1.0]]
    ds = TrainingSet(np.array(hists), np.array(pos))
    p = LossParams(0.8, 0.6)
    for i in range(3):
        # row i of the pairwise table, summed by hand
        row = sum(
            (sum(a * b for a, b in zip(hists[i], hists[j]))
             / math.sqrt(sum(a * a for a in hists[i]) * sum(b * b for b in hists[j])))
            - math.exp(-((pos[i][0] - pos[j][0]) ** 2) / (2 * 0.8**2))
            * math.exp(-((pos[i][1] - pos[j][1]) ** 2) / (2 * 0.6**2))
            for j in range(3)
        ) / 3
        assert local_loss(ds, i, p) == pytest.approx(row, abs=1e-14)
        assert local_losses(ds, p)[i] == pytest.approx(row, abs=1e-14)
    assert global_loss(ds, p) == pytest.approx(double_loop_loss(hists, pos, 0.8, 0.6), abs=1e-14)


def test_local_loss_index_errors(rng):
    ds = random_dataset(rng, 3)
    with pytest.raises(IndexError):
        local_loss(ds, 3, PARAMS)
    with pytest.raises(IndexError):
        local_loss(ds, -4, PARAMS)


def test_zero_histogram_rejected():
    ds = TrainingSet(np.array([[0.0, 0.0], [1.0, 0.0]]), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        global_loss(ds, PARAMS)


def test_global_loss_matches_double_loop_oracle():
    rng = np.random.default_rng(11)
    for _ in range(20):
        ds = random_dataset(rng, 20)
        p = LossParams(*rng.uniform(0.2, 2.0, 2))
        expected = double_loop_loss(ds.histograms.tolist(), ds.positions.tolist(), p.sigma_x, p.sigma_y)
        assert abs(global_loss(ds, p) - expected) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 25), t=st.integers(1, 12))
def test_loss_properties(seed, n, t):
    rng = np.random.default_rng(seed)
    h = rng.random((n, t)) + 1e-3
    ds = TrainingSet(h / h.sum(1, keepdims=True), rng.uniform(0, 5, (n, 2)))
    p = LossParams(*rng.uniform(0.1, 3.0, 2))
    g = global_loss(ds, p)
    locals_ = [local_loss(ds, i, p) for i in range(n)]
    assert g == pytest.approx(np.mean(locals_), abs=1e-12)
    assert all(-1 <= v <= 1 for v in locals_)
    assert -1 <= g <= 1
    perm = rng.permutation(n)
    shuffled = TrainingSet(ds.histograms[perm], ds.positions[perm])
    assert global_loss(shuffled, p) == pytest.approx(g, abs=1e-12)


# -- loss map ------------------------------------------------------------------------

BOUNDS = ArenaBounds(0.0, 4.0, 0.0, 2.0)


def test_loss_map_uniform_losses():
    # identical histograms with a vanishing ideal-similarity width: every local loss is (N - 1) / N
    rng = np.random.default_rng(0)
    pos = rng.uniform(0, [4, 2], (60, 2))
    ds = TrainingSet(np.tile([0.25, 0.75], (60, 1)), pos)
    uniform = loss_map(ds, BOUNDS, 0.1, LossParams(1e-6, 1e-6), smoothing_sigma=0.3)
    c = 59 / 60
    assert np.allclose(uniform.local_losses, c)
    covered = ~np.isnan(uniform.grid)
    assert covered.any()
    assert np.allclose(uniform.grid[covered], c)


def test_loss_map_shape_covers_bounds():
    ds = TrainingSet(np.array([[1.0, 0.0]]), np.array([[1.0, 1.0]]))
    field = loss_map(ds, BOUNDS, 0.3, PARAMS)
    ny, nx = field.grid.shape
    assert nx * 0.3 >= BOUNDS.width and ny * 0.3 >= BOUNDS.height
    assert (nx, ny) == (14, 7)
    assert field.smoothing_sigma == pytest.approx(0.6)
    xs, ys = field.cell_centers()
    assert xs[0] == pytest.approx(0.15) and ys[-1] == pytest.approx(1.95)


def test_loss_map_single_sample_kernel():
    ds = TrainingSet(np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([[1.05, 1.05], [1.05, 1.05]]))
    field = loss_map(ds, BOUNDS, 0.1, PARAMS, smoothing_sigma=0.2)
    # the cell holding the sample carries the most kernel mass, decaying outward
    peak = np.unravel_index(np.argmax(field.mass), field.mass.shape)
    assert peak == (10, 10)
    row = field.mass[10, 10:]
    assert np.all(np.diff(row[np.isfinite(row) & (row > 0)]) < 0)
    # cells beyond the kernel cut-off have no data
    assert np.isnan(field.grid[0, -1]) and field.mass[0, -1] == 0
    covered = ~np.isnan(field.grid)
    assert np.allclose(field.grid[covered], field.local_losses[0])


def test_loss_map_texture_poor_region_scores_higher():
    rng = np.random.default_rng(7)
    n = 80
    poor = np.column_stack([rng.uniform(0.0, 1.8, n), rng.uniform(0, 2, n)])
    rich = np.column_stack([rng.uniform(2.2, 4.0, n), rng.uniform(0, 2, n)])
    # left half: all one texture; right half: a different random texture per sample
    h_poor = np.tile(np.full(16, 1 / 16), (n, 1)) + rng.normal(0, 1e-4, (n, 16))
    h_rich = rng.dirichlet(np.full(16, 0.2), n)
    ds = TrainingSet(np.abs(np.vstack([h_poor, h_rich])), np.vstack([poor, rich]))
    field = loss_map(ds, BOUNDS, 0.1, LossParams(0.3, 0.3), smoothing_sigma=0.2)
    assert field.local_losses[:n].min() > field.local_losses[n:].max()
    left = field.grid[:, :18]
    right = field.grid[:, 22:]
    assert np.nanmin(left) > np.nanmax(right)
    assert field.value_at(0.9, 1.0) > field.value_at(3.1, 1.0)


def test_loss_map_errors(rng):
    ds = random_dataset(rng, 3)
    with pytest.raises(ValueError):
        loss_map(ds, BOUNDS, 0.0, PARAMS)
    with pytest.raises(ValueError):
        loss_map(ds, BOUNDS, 0.1, PARAMS, smoothing_sigma=0.0)


def test_loss_map_is_weighted_average_of_local_losses():
    rng = np.random.default_rng(3)
    ds = random_dataset(rng, 15)
    ds = TrainingSet(ds.histograms, ds.positions * [0.8, 0.4])
    field = loss_map(ds, BOUNDS, 0.25, PARAMS, smoothing_sigma=0.5, truncate=3.0)
    xs, ys = field.cell_centers()
    for r, c in itertools.product(range(0, len(ys), 3), range(0, len(xs), 4)):
        d2 = (ds.positions[:, 0] - xs[c]) ** 2 + (ds.positions[:, 1] - ys[r]) ** 2
        k = np.where(d2 <= 1.5**2, np.exp(-d2 / 0.5), 0.0)
        if k.sum() == 0:
            assert np.isnan(field.grid[r, c])
        else:
            assert field.grid[r, c] == pytest.approx(k @ field.local_losses / k.sum(), abs=1e-12)
