"""Model catalog: closed-form eigen-data against the finite-difference oracle,
metric and invariant-law checks."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from empirw import spectral_models as sm
from empirw.rng import stream

PI = math.pi


# ---------------------------------------------------------------------------
# eigen_data
# ---------------------------------------------------------------------------

def test_circle_first_four_modes():
    modes = sm.eigen_data(sm.circle(), 4)
    assert [m.lam for m in modes] == [1.0, 1.0, 4.0, 4.0]
    x = np.linspace(0, 2 * PI, 7)
    np.testing.assert_allclose(modes[0].evaluator(x), math.sqrt(2) * np.sin(x), atol=1e-14)
    np.testing.assert_allclose(modes[1].evaluator(x), math.sqrt(2) * np.cos(x), atol=1e-14)
    np.testing.assert_allclose(modes[2].evaluator(x), math.sqrt(2) * np.sin(2 * x), atol=1e-14)
    np.testing.assert_allclose(modes[3].evaluator(x), math.sqrt(2) * np.cos(2 * x), atol=1e-14)


def test_conditioned_lambda1_is_3pi2():
    # Dirichlet levels pi^2 (i+1)^2 shifted by the ground level, cross-checked
    # by the finite-difference oracle below
    modes = sm.eigen_data(sm.conditioned_interval(), 3)
    assert modes[0].lam == pytest.approx(3 * PI**2, rel=1e-15)
    assert modes[1].lam == pytest.approx(8 * PI**2, rel=1e-15)
    fd = sm.eigen_oracle_fd(sm.conditioned_interval(), 2000, 1)
    assert fd[0] == pytest.approx(3 * PI**2, rel=1e-4)


def test_conditioned_evaluator_safe_at_endpoints():
    modes = sm.eigen_data(sm.conditioned_interval(), 5)
    x = np.array([0.0, 1e-12, 0.5, 1 - 1e-12, 1.0])
    for md in modes:
        vals = md.evaluator(x)
        assert np.all(np.isfinite(vals))
        # sin((i+1) pi x)/sin(pi x) -> (i+1) * (+-1)^i at the endpoints
        assert abs(vals[0]) == pytest.approx(md.index + 1, abs=1e-9)


def test_su2_spectrum_only():
    model = sm.su2_spectrum()
    modes = sm.eigen_data(model, 4)
    assert modes[0].lam == 2.0  # lambda_1 = 2
    assert [m.lam for m in modes] == [2.0, 4.0, 6.0, 8.0]
    assert all(m.evaluator is None for m in modes)
    assert all(m.multiplicity == 1 for m in modes)
    assert sm.eigen_data(model, 2, su2_multiplicity=3)[0].multiplicity == 3


def test_wright_fisher_lambda_formula():
    # both candidate formulas agree at i=1; the FD oracle decides i=2 (A12)
    assert sm.wright_fisher_lambda(1, 1, 1) == 2.0
    assert sm.wright_fisher_lambda(2, 1, 1) == 5.0
    modes = sm.eigen_data(sm.wright_fisher(1, 1), 3)
    assert [m.lam for m in modes] == [2.0, 5.0, 9.0]


def test_eigen_data_validation_errors():
    with pytest.raises(ValueError):
        sm.eigen_data(sm.circle(), 0)
    with pytest.raises(sm.CapabilityError):
        sm.eigen_data(sm.torus(3), 4)
    with pytest.raises(sm.CapabilityError):
        sm.eigen_data(sm.wright_fisher(1, 1), 100)
    with pytest.raises(ValueError):
        sm.wright_fisher(0.25, 1.0)


# ---------------------------------------------------------------------------
# eigen_oracle_fd
# ---------------------------------------------------------------------------

def test_fd_neumann_classical_spectrum():
    vals = sm.eigen_oracle_fd(sm.interval_neumann(), 800, 2)
    np.testing.assert_allclose(vals, [PI**2, 4 * PI**2], rtol=1e-3)


def test_fd_wright_fisher_decides_lambda2():
    model = sm.wright_fisher(1, 1)
    fd = sm.eigen_oracle_fd(model, 1000, 2)
    assert fd[0] == pytest.approx(2.0, rel=1e-3)
    # the oracle decides between (a+b) i = 4 and i(i-1)/2 + (a+b) i = 5
    assert abs(fd[1] - 5.0) < 0.01
    assert abs(fd[1] - 4.0) > 0.9


def test_fd_requires_1d_model():
    with pytest.raises(sm.CapabilityError):
        sm.eigen_oracle_fd(sm.su2_spectrum(), 400, 2)
    with pytest.raises(ValueError):
        sm.eigen_oracle_fd(sm.circle(), 100, 2)


@pytest.mark.parametrize("factory", [sm.circle, sm.interval_neumann, sm.conditioned_interval,
                                     lambda: sm.wright_fisher(1, 1),
                                     lambda: sm.wright_fisher(0.75, 1.5)])
def test_fd_agrees_with_catalog_first_five(factory):
    model = factory()
    extr, _err = sm.richardson_eigenvalues(model, (300, 600, 1200), 5)
    cat = np.array([m.lam for m in sm.eigen_data(model, 5)])
    np.testing.assert_allclose(extr, cat, rtol=1e-3)


def test_richardson_needs_three_grids():
    with pytest.raises(ValueError):
        sm.richardson_eigenvalues(sm.circle(), (300, 600), 3)


# ---------------------------------------------------------------------------
# orthonormality and the eigen-relation
# ---------------------------------------------------------------------------

def _gram(model, n_modes, n_quad, density):
    xs = (np.arange(n_quad) + 0.5) / n_quad
    w = density(xs) / n_quad
    modes = sm.eigen_data(model, n_modes)
    vals = np.stack([m.evaluator(xs) for m in modes])
    return vals @ (w[:, None] * vals.T)


def test_orthonormality_circle():
    xs = (np.arange(20000) + 0.5) * 2 * PI / 20000
    modes = sm.eigen_data(sm.circle(), 10)
    vals = np.stack([m.evaluator(xs) for m in modes])
    G = vals @ vals.T / 20000
    assert np.abs(G - np.eye(10)).max() < 1e-6


def test_orthonormality_conditioned():
    G = _gram(sm.conditioned_interval(), 10, 20000, lambda x: 2 * np.sin(PI * x) ** 2)
    assert np.abs(G - np.eye(10)).max() < 1e-6


@pytest.mark.parametrize("a,b,tol", [(1.0, 1.0, 1e-4), (0.75, 1.25, 1e-4)])
def test_orthonormality_wright_fisher(a, b, tol):
    from scipy.special import gamma as G

    norm = G(2 * a + 2 * b) / (G(2 * a) * G(2 * b))
    dens = lambda x: norm * x ** (2 * a - 1) * (1 - x) ** (2 * b - 1)
    Gm = _gram(sm.wright_fisher(a, b), 10, 200000, dens)
    assert np.abs(Gm - np.eye(10)).max() < tol


@pytest.mark.parametrize("factory,gen", [
    (sm.interval_neumann, lambda x, f: None),
    (sm.conditioned_interval, None),
    (lambda: sm.wright_fisher(1, 1), None),
])
def test_eigen_relation_residual(factory, gen):
    """5-point finite differences: |L-hat phi_i + lambda_i phi_i| < 1e-3 lambda_i."""
    model = factory()
    h = 2e-5
    xs = np.linspace(0.1, 0.9, 401)
    stencil = np.array([-2, -1, 0, 1, 2]) * h
    for md in sm.eigen_data(model, 4):
        f = md.evaluator
        vals = np.stack([f(xs + s) for s in stencil])
        d1 = (vals[0] - 8 * vals[1] + 8 * vals[3] - vals[4]) / (12 * h)
        d2 = (-vals[0] + 16 * vals[1] - 30 * vals[2] + 16 * vals[3] - vals[4]) / (12 * h**2)
        if model.kind == "interval-neumann":
            lhat = d2
        elif model.kind == "interval-conditioned":
            lhat = d2 + 2 * PI / np.tan(PI * xs) * d1
        else:
            lhat = 0.5 * xs * (1 - xs) * d2 + (1 - 2 * xs) * d1
        resid = np.max(np.abs(lhat + md.lam * f(xs)))
        assert resid < 1e-3 * md.lam


@pytest.mark.parametrize("factory", [sm.circle, sm.conditioned_interval,
                                     lambda: sm.wright_fisher(1, 1)])
def test_eigenvalue_growth_condition(factory):
    """lambda_i >= c i^{2/d'} for a fitted c > 0 across the first 200 modes."""
    model = factory()
    n = 50 if model.kind == "wright-fisher" else 200
    lams = np.array([sm.eigenvalue(model, i) for i in range(1, n + 1)])
    ratios = lams / np.arange(1, n + 1) ** (2.0 / model.d_prime)
    assert ratios.min() > 0


# ---------------------------------------------------------------------------
# distance
# ---------------------------------------------------------------------------

def test_distance_circle_antipodal():
    assert sm.distance(sm.circle(), 0.0, PI) == pytest.approx(PI)
    assert sm.distance(sm.circle(), 0.1, 0.1) == 0.0


def test_distance_wright_fisher_closed_form():
    model = sm.wright_fisher(1, 1)
    # quadrature oracle for rho(x,y) = sqrt2 int {s(1-s)}^{-1/2} ds
    oracle, _ = quad(lambda s: math.sqrt(2.0) / math.sqrt(s * (1 - s)), 0.2, 0.9)
    assert sm.distance(model, 0.2, 0.9) == pytest.approx(oracle, rel=1e-10)
    assert sm.distance(model, 0.0, 1.0) == pytest.approx(PI * math.sqrt(2.0), rel=1e-12)


def test_distance_unavailable_for_su2():
    with pytest.raises(sm.CapabilityError):
        sm.distance(sm.su2_spectrum(), 0.0, 1.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 2 * PI - 1e-9), st.floats(0, 2 * PI - 1e-9), st.floats(0, 2 * PI - 1e-9))
def test_distance_metric_axioms_circle(x, y, z):
    model = sm.circle()
    dxy = float(sm.distance(model, x, y))
    assert dxy == pytest.approx(float(sm.distance(model, y, x)))
    assert dxy <= float(sm.distance(model, x, z)) + float(sm.distance(model, z, y)) + 1e-12


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_distance_metric_axioms_wright_fisher(x, y, z):
    model = sm.wright_fisher(0.5, 1.0)
    dxy = float(sm.distance(model, x, y))
    assert dxy == pytest.approx(float(sm.distance(model, y, x)))
    assert dxy <= float(sm.distance(model, x, z)) + float(sm.distance(model, z, y)) + 1e-12


# ---------------------------------------------------------------------------
# invariant law
# ---------------------------------------------------------------------------

def test_invariant_quantile_values():
    assert sm.invariant_quantile(sm.circle(), 0.5) == pytest.approx(PI)
    assert sm.invariant_quantile(sm.wright_fisher(0.5, 0.5), 0.25) == pytest.approx(0.25, abs=1e-12)
    assert sm.invariant_quantile(sm.conditioned_interval(), 0.5) == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(ValueError):
        sm.invariant_quantile(sm.circle(), 1.5)


def test_invariant_quantile_monotone_and_inverts_cdf():
    u = np.linspace(0.01, 0.99, 99)
    for model in (sm.conditioned_interval(), sm.wright_fisher(1, 1.5)):
        x = sm.invariant_quantile(model, u)
        assert np.all(np.diff(x) > 0)
        np.testing.assert_allclose(sm.invariant_cdf(model, x), u, atol=1e-9)


def test_sample_invariant_moments():
    rng = stream(42, 0)
    x = sm.sample_invariant(sm.wright_fisher(0.5, 0.5), rng, size=200_000)
    assert x.mean() == pytest.approx(0.5, abs=3 * x.std() / math.sqrt(len(x)))
    rng = stream(42, 1)
    th = sm.sample_invariant(sm.circle(), rng, size=200_000)
    c = np.cos(th)
    assert abs(c.mean()) < 3 * c.std() / math.sqrt(len(c))
    rng = stream(42, 2)
    a, b = 1.0, 2.0  # Beta(2a, 2b) variance
    y = sm.sample_invariant(sm.wright_fisher(a, b), rng, size=200_000)
    A, B = 2 * a, 2 * b
    var = A * B / ((A + B) ** 2 * (A + B + 1))
    assert y.var() == pytest.approx(var, rel=0.02)


def test_model_from_id_catalog():
    for model_id in ("circle", "torus2", "interval-neumann", "interval-conditioned",
                     "wright-fisher", "su2-spectrum"):
        model = sm.model_from_id(model_id, a=1.0, b=1.0, c=0.5, c1=0.1, c2=0.2)
        assert model.d >= model.d_prime >= 1
    assert sm.model_from_id("circle", c=2.0).drift == (2.0,)
    with pytest.raises(sm.CapabilityError):
        sm.model_from_id("klein-bottle")


def test_dimension_triples():
    assert (sm.circle().d, sm.circle().d_prime, sm.circle().d_dprime) == (1, 1, 1)
    assert (sm.torus(2).d, sm.torus(2).d_prime) == (2, 2)
    assert (sm.conditioned_interval().d, sm.conditioned_interval().d_prime) == (3, 1)
    wf = sm.wright_fisher(1.5, 1.0)
    assert (wf.d, wf.d_prime) == (6.0, 2)
    assert (sm.su2_spectrum().d, sm.su2_spectrum().d_prime) == (4, 3)
