"""Optimal transport engines against frozen values and exhaustive oracles."""
import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from empirw import ot_engine as ot
from empirw.empirical_measures import EmpiricalMeasure
from empirw.rng import stream
from empirw.spectral_models import CapabilityError, conditioned_interval, su2_spectrum, wright_fisher

PI = math.pi


def _measure(atoms, weights=None, horizon=1.0):
    atoms = np.asarray(atoms, dtype=float)
    if weights is None:
        weights = np.full(atoms.shape[0], 1.0 / atoms.shape[0])
    return EmpiricalMeasure(atoms=atoms, weights=np.asarray(weights, dtype=float),
                            horizon=horizon)


# ---------------------------------------------------------------------------
# wp_interval
# ---------------------------------------------------------------------------

def test_point_mass_against_uniform():
    res = ot.wp_interval(_measure([0.5]), ot.uniform_target(0, 1), p=2)
    assert res.power == pytest.approx(1.0 / 12.0, rel=1e-14)  # int (u - 1/2)^2 du
    res1 = ot.wp_interval(_measure([0.0]), ot.DiscreteTarget(np.array([1.0]), np.array([1.0])), p=1)
    assert res1.value == pytest.approx(1.0)


def test_quantile_sampled_measure_is_close():
    m = 400
    atoms = (np.arange(m) + 0.5) / m  # uniform target sampled at its own quantiles
    res = ot.wp_interval(_measure(atoms), ot.uniform_target(0, 1), p=2)
    assert res.value < 2.0 / m


def test_order_validation():
    with pytest.raises(ValueError):
        ot.wp_interval(_measure([0.5]), ot.uniform_target(), p=0.5)
    with pytest.raises(TypeError):
        ot.wp_interval(_measure([0.5]), object(), p=2)


def test_monotone_coupling_equals_lp_on_discretized_targets():
    rng = stream(21, 0)
    for trial in range(6):
        na, nb = int(rng.integers(5, 120)), int(rng.integers(5, 120))
        xa, xb = rng.random(na), rng.random(nb)
        wa = rng.random(na)
        wa /= wa.sum()
        wb = rng.random(nb)
        wb /= wb.sum()
        for p in (1, 2):
            qv = ot.wp_interval(_measure(xa, wa), ot.DiscreteTarget(xb, wb), p=p)
            lp = ot.w2_discrete_exact(xa, wa, xb, wb,
                                      np.abs(xa[:, None] - xb[None, :]) ** p, p=p)
            assert abs(qv.value - lp.value) < 1e-6


def test_p1_exact_matches_certified_quadrature():
    rng = stream(21, 1)
    tgt = ot.invariant_target(conditioned_interval())
    meas = _measure(rng.random(25))
    exact = ot.wp_interval(meas, tgt, p=1)
    quad = ot.wp_interval(meas, ot.FunctionalTarget(quantile=tgt.quantile), p=1)
    assert exact.method == "quantile-exact" and quad.method == "quantile-midpoint"
    assert abs(exact.value - quad.value) <= quad.bound + 1e-12
    # p=2 certified quadrature against the closed form for the uniform target
    u2 = ot.wp_interval(meas, ot.FunctionalTarget(quantile=lambda u: np.asarray(u, float)), p=2)
    u2_exact = ot.wp_interval(meas, ot.uniform_target(0, 1), p=2)
    assert abs(u2.power - u2_exact.power) <= u2.bound + 1e-12


def test_w1_le_w2_on_evaluated_pairs():
    rng = stream(21, 2)
    for _ in range(5):
        meas = _measure(rng.random(30))
        w1 = ot.wp_interval(meas, ot.uniform_target(0, 1), p=1).value
        w2 = ot.wp_interval(meas, ot.uniform_target(0, 1), p=2).value
        assert w1 <= w2 + 1e-12


# ---------------------------------------------------------------------------
# wp_circle
# ---------------------------------------------------------------------------

def test_circle_point_mass():
    res = ot.wp_circle(_measure([0.0]), p=2)
    assert res.power == pytest.approx(PI**2 / 3.0, rel=1e-12)
    res1 = ot.wp_circle(_measure([0.0]), p=1)
    assert res1.value == pytest.approx(PI / 2.0, rel=1e-12)  # mean arc distance to uniform


def test_circle_uniform_atoms_quantile_bound():
    m = 64
    atoms = 2 * PI * np.arange(m) / m
    res = ot.wp_circle(_measure(atoms), p=2)
    assert res.value <= PI / m


def test_circle_rotation_invariance():
    rng = stream(22, 0)
    atoms = rng.random(50) * 2 * PI
    w = rng.random(50)
    w /= w.sum()
    base = ot.wp_circle(_measure(atoms, w), p=2).value
    for shift in (0.7, 2.9, 5.1):
        rot = ot.wp_circle(_measure((atoms + shift) % (2 * PI), w), p=2).value
        assert abs(rot - base) < 1e-10


@pytest.mark.parametrize("p", [1, 2])
def test_circle_scan_certifies_exact(p):
    rng = stream(22, 1)
    for trial in range(8):
        n = int(rng.integers(2, 120))
        atoms = rng.random(n) * 2 * PI
        w = rng.random(n)
        w /= w.sum()
        meas = _measure(atoms, w)
        a = ot.wp_circle(meas, p=p).value
        b = ot.wp_circle(meas, p=p, method="scan").value
        assert abs(a - b) < 1e-8


def test_circle_rejects_other_orders():
    with pytest.raises(CapabilityError):
        ot.wp_circle(_measure([0.0]), p=3)


def test_circle_w1_le_w2():
    rng = stream(22, 2)
    meas = _measure(rng.random(40) * 2 * PI)
    assert ot.wp_circle(meas, p=1).value <= ot.wp_circle(meas, p=2).value + 1e-12


# ---------------------------------------------------------------------------
# w2_discrete_exact
# ---------------------------------------------------------------------------

def test_identical_measures_zero():
    x = np.array([0.1, 0.4, 0.9])
    w = np.array([0.2, 0.3, 0.5])
    C = np.abs(x[:, None] - x[None, :]) ** 2
    assert ot.w2_discrete_exact(x, w, x, w, C).value == pytest.approx(0.0, abs=1e-12)


def test_two_by_two_against_coupling_family():
    # the 2x2 coupling is one-parameter: pi_11 = s in [max(0, a1+b1-1), min(a1, b1)],
    # cost linear in s, so the optimum sits at an endpoint -- enumerate both
    rng = stream(23, 0)
    for _ in range(20):
        a1, b1 = rng.random(), rng.random()
        a = np.array([a1, 1 - a1])
        b = np.array([b1, 1 - b1])
        C = rng.random((2, 2))
        lo, hi = max(0.0, a1 + b1 - 1.0), min(a1, b1)
        best = math.inf
        for s in (lo, hi):
            plan = np.array([[s, a1 - s], [b1 - s, 1 - a1 - b1 + s]])
            best = min(best, float((plan * C).sum()))
        res = ot.w2_discrete_exact(None, a, None, b, C, p=1)
        assert res.value == pytest.approx(best, abs=1e-10)


def test_six_by_six_uniform_against_permutations():
    rng = stream(23, 1)
    w = np.full(6, 1.0 / 6.0)
    for _ in range(5):
        C = rng.random((6, 6))
        res = ot.w2_discrete_exact(None, w, None, w, C, p=1)
        brute = min(sum(C[i, p[i]] for i in range(6)) / 6.0
                    for p in itertools.permutations(range(6)))
        assert abs(res.power - brute) < 1e-9


def test_rational_weights_against_hungarian_expansion():
    # weights k/N expand to an N-point assignment problem, solved exactly by
    # the Hungarian algorithm -- an independent exact oracle
    rng = stream(23, 2)
    N = 24
    for _ in range(4):
        ka = rng.multinomial(N, np.full(5, 0.2))
        kb = rng.multinomial(N, np.full(7, 1 / 7))
        C = rng.random((5, 7))
        expanded = np.repeat(np.repeat(C, ka, axis=0), kb, axis=1)
        rows, cols = linear_sum_assignment(expanded)
        brute = expanded[rows, cols].sum() / N
        res = ot.w2_discrete_exact(None, ka / N, None, kb / N, C, p=1)
        assert abs(res.power - brute) < 1e-9


def test_vertex_enumeration_three_by_three():
    # all basic feasible solutions of the 3x3 transportation polytope are
    # spanning-forest supported: enumerate 5-cell bases exhaustively
    rng = stream(23, 3)
    a = rng.random(3)
    a /= a.sum()
    b = rng.random(3)
    b /= b.sum()
    C = rng.random((3, 3))

    def solve_basis(cells):
        A = np.zeros((6, 5))
        rhs = np.concatenate([a, b])
        for j, (r, c) in enumerate(cells):
            A[r, j] = 1.0
            A[3 + c, j] = 1.0
        sol, res_, rank, _ = np.linalg.lstsq(A, rhs, rcond=None)
        if rank < 5 or np.max(np.abs(A @ sol - rhs)) > 1e-9 or np.min(sol) < -1e-12:
            return math.inf
        return float(sum(s * C[r, c] for s, (r, c) in zip(sol, cells)))

    brute = min(solve_basis(cells) for cells in itertools.combinations(
        [(r, c) for r in range(3) for c in range(3)], 5))
    res = ot.w2_discrete_exact(None, a, None, b, C, p=1)
    assert abs(res.power - brute) < 1e-9


def test_metric_axioms_on_random_instances():
    rng = stream(23, 4)
    pts = rng.random(8)
    w1 = rng.random(8)
    w1 /= w1.sum()
    w2 = rng.random(8)
    w2 /= w2.sum()
    w3 = rng.random(8)
    w3 /= w3.sum()
    C = np.abs(pts[:, None] - pts[None, :])

    def w(u, v):
        return ot.w2_discrete_exact(pts, u, pts, v, C, p=1).value

    d12, d21 = w(w1, w2), w(w2, w1)
    assert abs(d12 - d21) < 1e-9
    assert w(w1, w3) <= d12 + w(w2, w3) + 1e-9


def test_lp_plan_and_errors():
    x = np.array([0.0, 1.0])
    w = np.array([0.5, 0.5])
    C = np.abs(x[:, None] - x[None, :])
    res = ot.w2_discrete_exact(x, w, x, w, C, p=1, return_plan=True)
    np.testing.assert_allclose(res.plan, np.diag(w), atol=1e-12)
    with pytest.raises(ValueError):
        ot.w2_discrete_exact(x, w, x, np.array([0.5, 0.4]), C)
    with pytest.raises(ValueError):
        ot.w2_discrete_exact(x, w, x, w, C[:1])
    with pytest.raises(ValueError):
        ot.w2_discrete_exact(x, np.array([-0.2, 1.2]), x, w, C)


# ---------------------------------------------------------------------------
# sinkhorn on the torus grid
# ---------------------------------------------------------------------------

def _torus_lp(a_grid, n):
    L = 2 * PI
    centers = (np.arange(n) + 0.5) * L / n
    X, Y = np.meshgrid(centers, centers, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    d = np.abs(pts[:, None, :] - pts[None, :, :])
    d = np.minimum(d, L - d)
    C = (d**2).sum(-1)
    wa = a_grid.ravel()
    keep = wa > 0
    wb = np.full(n * n, 1.0 / (n * n))
    return ot.w2_discrete_exact(None, wa[keep], None, wb, C[keep], p=2)


def test_sinkhorn_single_cell_against_exact():
    n = 16
    a = np.zeros((n, n))
    a[2, 11] = 1.0
    res = ot.sinkhorn_grid_torus(a, eps_final=2e-3)
    exact = _torus_lp(a, n)
    assert abs(res.value - exact.value) / exact.value < 0.01


def test_sinkhorn_uniform_and_translation():
    n = 12
    u = np.full((n, n), 1.0 / (n * n))
    res = ot.sinkhorn_grid_torus(u, eps_final=2e-3)
    assert res.value <= 2 * PI / n  # within a cell diameter
    rng = stream(24, 0)
    a = rng.random((n, n))
    a /= a.sum()
    v1 = ot.sinkhorn_grid_torus(a, eps_final=5e-3).value
    v2 = ot.sinkhorn_grid_torus(np.roll(a, (3, 5), axis=(0, 1)), eps_final=5e-3).value
    assert abs(v1 - v2) < 1e-8


def test_sinkhorn_iteration_budget_error():
    n = 16
    rng = stream(24, 1)
    a = rng.random((n, n))
    a /= a.sum()
    with pytest.raises(ot.SinkhornError) as err:
        ot.sinkhorn_grid_torus(a, eps_final=1e-4, n_iter=1, tol=1e-14)
    assert err.value.residual > 0


def test_sinkhorn_input_validation():
    with pytest.raises(ValueError):
        ot.sinkhorn_grid_torus(np.full((4, 4), 1.0))
    with pytest.raises(CapabilityError):
        ot.sinkhorn_grid_torus(np.full((300, 300), 1.0 / 90000))


def test_binning():
    pts = np.array([[0.1, 0.1], [3.0, 3.0]])
    grid = ot.bin_torus(pts, np.array([0.25, 0.75]), 8)
    assert grid.sum() == pytest.approx(1.0)
    assert grid[0, 0] == pytest.approx(0.25)


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def test_dispatch_wright_fisher_uses_metric_transform():
    rng = stream(25, 0)
    model = wright_fisher(1, 1)
    meas = _measure(rng.random(50))
    res = ot.wasserstein_to_invariant(meas, model, p=2)
    assert res.value >= 0
    with pytest.raises(CapabilityError):
        ot.wasserstein_to_invariant(meas, su2_spectrum(), p=2)
