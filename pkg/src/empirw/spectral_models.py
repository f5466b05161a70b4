"""Catalog of concrete diffusion models: eigen-data, invariant laws, metrics.

Each model carries a symmetric generator L-hat with discrete spectrum
0 = lambda_0 < lambda_1 <= lambda_2 <= ... and unitary eigenfunctions phi_i in
L2(mu), mu the invariant probability measure.  The catalog:

  circle                R/2piZ, L-hat = d2/dx2, mu uniform,
                        lambda_k = k^2 with multiplicity 2
                        (phi = sqrt2 sin kx, sqrt2 cos kx); optional constant
                        drift Z = c d/dx (divergence-free).
  torus2                product of two unit-speed circles, constant drift
                        (c1, c2); lambda = |k|^2 over k in Z^2.
  interval-neumann      [0,1], L-hat = d2/dx2 with Neumann ends, mu uniform,
                        lambda_i = pi^2 i^2, phi_i = sqrt2 cos(i pi x).
  interval-conditioned  (0,1), ground-state transform of the Dirichlet
                        problem for d2/dx2: L-hat = d2/dx2 + 2pi cot(pi x) d/dx,
                        mu = 2 sin^2(pi x) dx, lambda_i = pi^2 i (i+2),
                        phi_i(x) = sin((i+1)pi x)/sin(pi x) = U_i(cos pi x).
  wright-fisher         [0,1], L-hat = (1/2) x(1-x) d2/dx2 + (a-(a+b)x) d/dx,
                        mu = Beta(2a, 2b), a, b > 1/4; polynomial
                        eigenfunctions, lambda_i = i(i-1)/2 + (a+b) i
                        (the quadratic term is confirmed by the finite
                        difference oracle, see `eigen_oracle_fd`).
  su2-spectrum          spectrum-only: eigenvalues 4k(k+|n|+1) + 2|n| over
                        (k, n) in Z_{>=0} x Z; no evaluators.

Dimension triple (d, d', d''): d governs the heat-kernel bound
||P_t - mu||_{1->inf} <= c t^{-d/2} e^{-lt}, d' the eigenvalue growth
lambda_i >= c i^{2/d'}, d'' the volume growth of metric balls.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import betaincinv

TWO_PI = 2.0 * math.pi


class CapabilityError(ValueError):
    """Requested operation is outside a model's catalog capabilities."""


# ---------------------------------------------------------------------------
# Model specifications
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelSpec:
    """A concrete state space + generator with its dimension triple.

    ``drift`` is the divergence-free perturbation: the constant c on the
    circle, a pair (c1, c2) on the torus, necessarily 0 elsewhere.
    """

    kind: str
    d: float
    d_prime: float
    d_dprime: float
    drift: tuple[float, ...] = ()
    a: float = 0.0
    b: float = 0.0
    n: int = 1

    def __post_init__(self):
        if not (self.d >= self.d_prime >= 1.0):
            raise ValueError(f"dimension triple must satisfy d >= d' >= 1, got d={self.d}, d'={self.d_prime}")

    @property
    def drift_norm(self) -> float:
        return math.sqrt(sum(c * c for c in self.drift)) if self.drift else 0.0


def circle(c: float = 0.0) -> ModelSpec:
    return ModelSpec(kind="circle", d=1, d_prime=1, d_dprime=1, drift=(float(c),))


def torus(n: int = 2, drift: Sequence[float] | None = None) -> ModelSpec:
    if n < 1:
        raise ValueError(f"torus dimension must be >= 1, got {n}")
    dr = tuple(float(c) for c in (drift if drift is not None else (0.0,) * n))
    if len(dr) != n:
        raise ValueError(f"drift must have {n} components, got {len(dr)}")
    return ModelSpec(kind="torus", d=n, d_prime=n, d_dprime=n, drift=dr, n=n)


def interval_neumann() -> ModelSpec:
    return ModelSpec(kind="interval-neumann", d=1, d_prime=1, d_dprime=1)


def conditioned_interval() -> ModelSpec:
    # ground-state transform of a 1-D Dirichlet problem: d = n + 2 = 3, d' = d'' = 1
    return ModelSpec(kind="interval-conditioned", d=3, d_prime=1, d_dprime=1)


def wright_fisher(a: float, b: float) -> ModelSpec:
    if not (a > 0.25 and b > 0.25):
        raise ValueError(f"wright-fisher requires a, b > 1/4, got a={a}, b={b}")
    return ModelSpec(kind="wright-fisher", d=4.0 * max(a, b), d_prime=2, d_dprime=2, a=float(a), b=float(b))


def su2_spectrum() -> ModelSpec:
    return ModelSpec(kind="su2-spectrum", d=4, d_prime=3, d_dprime=4)


_FACTORIES = {
    "circle": lambda **kw: circle(c=kw.get("c", 0.0)),
    "torus2": lambda **kw: torus(2, drift=(kw.get("c1", 0.0), kw.get("c2", 0.0))),
    "interval-neumann": lambda **kw: interval_neumann(),
    "interval-conditioned": lambda **kw: conditioned_interval(),
    "wright-fisher": lambda **kw: wright_fisher(kw.get("a", 1.0), kw.get("b", 1.0)),
    "su2-spectrum": lambda **kw: su2_spectrum(),
}


def model_from_id(model_id: str, **params) -> ModelSpec:
    """Build a ModelSpec from its config string id ("circle", "torus2", ...)."""
    try:
        factory = _FACTORIES[model_id]
    except KeyError:
        raise CapabilityError(f"unknown model id {model_id!r}; known: {sorted(_FACTORIES)}") from None
    return factory(**params)


# ---------------------------------------------------------------------------
# Eigen-data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EigenMode:
    """One eigenmode of -L-hat: index i >= 1, eigenvalue, L2(mu)-unit evaluator.

    ``evaluator`` maps state arrays to values; None for spectrum-only models.
    Index 0 (the constant eigenfunction at lambda = 0) is implicit and never
    listed.
    """

    index: int
    lam: float
    multiplicity: int
    evaluator: Callable[[np.ndarray], np.ndarray] | None = field(compare=False)


def wright_fisher_lambda(i: int, a: float, b: float) -> float:
    """Eigenvalue of degree-i polynomial eigenfunctions: i(i-1)/2 + (a+b) i.

    The quadratic term comes from matching the x^i coefficient of
    (1/2) x(1-x) D^2 + (a-(a+b)x) D applied to a monic degree-i polynomial;
    `eigen_oracle_fd` confirms it numerically (lambda_2 = 5, not 4, at a=b=1).
    """
    return 0.5 * i * (i - 1) + (a + b) * i


def _circle_modes(n_modes: int) -> list[EigenMode]:
    modes = []
    for i in range(1, n_modes + 1):
        k = (i + 1) // 2
        if i % 2 == 1:
            ev = (lambda kk: lambda x: math.sqrt(2.0) * np.sin(kk * np.asarray(x)))(k)
        else:
            ev = (lambda kk: lambda x: math.sqrt(2.0) * np.cos(kk * np.asarray(x)))(k)
        modes.append(EigenMode(index=i, lam=float(k * k), multiplicity=1, evaluator=ev))
    return modes


def _interval_neumann_modes(n_modes: int) -> list[EigenMode]:
    modes = []
    for i in range(1, n_modes + 1):
        ev = (lambda ii: lambda x: math.sqrt(2.0) * np.cos(ii * math.pi * np.asarray(x)))(i)
        modes.append(EigenMode(index=i, lam=(math.pi * i) ** 2, multiplicity=1, evaluator=ev))
    return modes


def _dirichlet_kernel_ratio(i: int) -> Callable[[np.ndarray], np.ndarray]:
    """sin((i+1) pi x)/sin(pi x) evaluated as U_i(cos pi x), stable at x in {0,1}."""

    def ev(x: np.ndarray) -> np.ndarray:
        c = np.cos(math.pi * np.asarray(x, dtype=float))
        u_prev = np.ones_like(c)
        u = 2.0 * c
        if i == 0:
            return u_prev
        for _ in range(i - 1):
            u_prev, u = u, 2.0 * c * u - u_prev
        return u

    return ev


def _conditioned_modes(n_modes: int) -> list[EigenMode]:
    modes = []
    for i in range(1, n_modes + 1):
        lam = math.pi ** 2 * i * (i + 2)
        modes.append(EigenMode(index=i, lam=lam, multiplicity=1, evaluator=_dirichlet_kernel_ratio(i)))
    return modes


@lru_cache(maxsize=64)
def _wf_recurrence(a: float, b: float, n: int) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Monic three-term recurrence coefficients for the Beta(2a, 2b) weight.

    p_{k+1}(x) = (x - alpha_k) p_k(x) - beta_k p_{k-1}(x),  beta_0 := 1
    (the weight is the probability measure, so moment m_0 = 1).

    Built by the Chebyshev moment algorithm in high-precision arithmetic from
    the exact Beta moments m_j = prod_{i<j} (2a+i)/(2a+2b+i); the algorithm is
    ill-conditioned in double precision, hence mpmath.
    """
    import mpmath as mp

    with mp.workdps(40 + 5 * n):
        A, B = mp.mpf(2 * a), mp.mpf(2 * b)
        moments = [mp.mpf(1)]
        for j in range(2 * n + 1):
            moments.append(moments[-1] * (A + j) / (A + B + j))
        # sigma[k][l] = <p_k, x^l>; standard Chebyshev recursion
        sig_prev = [mp.mpf(0)] * (2 * n + 2)
        sig = list(moments)
        alphas = [moments[1] / moments[0]]
        betas = [moments[0]]
        for k in range(1, n + 1):
            sig_new = [mp.mpf(0)] * (2 * n + 2)
            for l in range(k, 2 * n - k + 1):
                sig_new[l] = sig[l + 1] - alphas[k - 1] * sig[l] - betas[k - 1] * sig_prev[l]
            alphas.append(sig_new[k + 1] / sig_new[k] - sig[k] / sig[k - 1])
            betas.append(sig_new[k] / sig[k - 1])
            sig_prev, sig = sig, sig_new
        return tuple(float(x) for x in alphas[:n]), tuple(float(x) for x in betas[: n + 1])


def _wf_modes(a: float, b: float, n_modes: int) -> list[EigenMode]:
    if n_modes > 60:
        raise CapabilityError("wright-fisher eigen catalog supports n_modes <= 60")
    alphas, betas = _wf_recurrence(a, b, n_modes + 1)

    def make_ev(i: int) -> Callable[[np.ndarray], np.ndarray]:
        norm2 = 1.0
        for k in range(1, i + 1):
            norm2 *= betas[k]

        def ev(x: np.ndarray) -> np.ndarray:
            x = np.asarray(x, dtype=float)
            p_prev = np.zeros_like(x)
            p = np.ones_like(x)
            for k in range(i):
                p_prev, p = p, (x - alphas[k]) * p - (betas[k] if k > 0 else 0.0) * p_prev
            return p / math.sqrt(norm2)

        return ev

    return [
        EigenMode(index=i, lam=wright_fisher_lambda(i, a, b), multiplicity=1, evaluator=make_ev(i))
        for i in range(1, n_modes + 1)
    ]


def _torus2_modes(drift: tuple[float, float], n_modes: int) -> list[EigenMode]:
    # enumerate k in Z^2 \ {0} up to a radius that certainly yields n_modes
    kmax = 1
    while (2 * kmax + 1) ** 2 - 1 < 2 * n_modes + 8:
        kmax += 1
    half: list[tuple[int, int]] = []
    for k1 in range(-kmax, kmax + 1):
        for k2 in range(-kmax, kmax + 1):
            if (k1, k2) == (0, 0):
                continue
            if k1 > 0 or (k1 == 0 and k2 > 0):  # one of each +-k pair
                half.append((k1, k2))
    half.sort(key=lambda k: (k[0] ** 2 + k[1] ** 2, k))
    modes: list[EigenMode] = []
    i = 1
    for k in half:
        lam = float(k[0] ** 2 + k[1] ** 2)
        for trig in (np.sin, np.cos):
            ev = (lambda kk, fn: lambda x: math.sqrt(2.0) * fn(kk[0] * np.asarray(x)[..., 0] + kk[1] * np.asarray(x)[..., 1]))(k, trig)
            modes.append(EigenMode(index=i, lam=lam, multiplicity=1, evaluator=ev))
            i += 1
            if i > n_modes:
                return modes
    return modes


def su2_eigenvalues(lam_max: float) -> list[tuple[float, int]]:
    """Distinct eigenvalues 4k(k+|n|+1) + 2|n| <= lam_max with catalog counts.

    The count records how many (k, |n|) lattice pairs produce the value
    (each |n| > 0 counted twice for the sign); true spectral multiplicities
    are a separate configuration input, see `eigen_data`.
    """
    counts: dict[float, int] = {}
    n_abs = 0
    while 2 * n_abs <= lam_max:
        k = 0
        while True:
            lam = 4 * k * (k + n_abs + 1) + 2 * n_abs
            if lam > lam_max:
                break
            weight = 1 if n_abs == 0 else 2
            counts[float(lam)] = counts.get(float(lam), 0) + weight
            k += 1
        n_abs += 1
    return sorted(counts.items())


def eigen_data(model: ModelSpec, n_modes: int, su2_multiplicity: int = 1) -> list[EigenMode]:
    """First ``n_modes`` non-constant eigenmodes of -L-hat, sorted by eigenvalue.

    Evaluators are orthonormal in L2(mu).  For 'su2-spectrum' only eigenvalues
    and multiplicities are available (no evaluators); the per-value
    multiplicity is the caller-supplied ``su2_multiplicity`` since the catalog
    does not determine it.
    """
    if n_modes < 1:
        raise ValueError(f"n_modes must be >= 1, got {n_modes}")
    if model.kind == "circle":
        return _circle_modes(n_modes)
    if model.kind == "torus":
        if model.n != 2:
            raise CapabilityError(f"torus eigen catalog implemented for n=2 only, got n={model.n}")
        return _torus2_modes(model.drift, n_modes)  # type: ignore[arg-type]
    if model.kind == "interval-neumann":
        return _interval_neumann_modes(n_modes)
    if model.kind == "interval-conditioned":
        return _conditioned_modes(n_modes)
    if model.kind == "wright-fisher":
        return _wf_modes(model.a, model.b, n_modes)
    if model.kind == "su2-spectrum":
        lam_max = 8.0
        while True:
            vals = [lv for lv in su2_eigenvalues(lam_max) if lv[0] > 0]
            if len(vals) >= n_modes:
                break
            lam_max *= 2
        return [
            EigenMode(index=i + 1, lam=lam, multiplicity=su2_multiplicity, evaluator=None)
            for i, (lam, _count) in enumerate(vals[:n_modes])
        ]
    raise CapabilityError(f"no eigen catalog for model kind {model.kind!r}")


def eigenvalue(model: ModelSpec, i: int) -> float:
    """Eigenvalue lambda_i without building evaluators (i >= 1)."""
    if model.kind == "circle":
        k = (i + 1) // 2
        return float(k * k)
    if model.kind == "interval-neumann":
        return (math.pi * i) ** 2
    if model.kind == "interval-conditioned":
        return math.pi ** 2 * i * (i + 2)
    if model.kind == "wright-fisher":
        return wright_fisher_lambda(i, model.a, model.b)
    return eigen_data(model, i)[-1].lam


# ---------------------------------------------------------------------------
# Finite-difference eigenvalue oracle (independent of the closed forms above)
# ---------------------------------------------------------------------------

def eigen_oracle_fd(model: ModelSpec, grid_size: int, n_modes: int) -> np.ndarray:
    """Eigenvalues of the mu-symmetric finite-difference discretization of -L-hat.

    Cell-centered conservative scheme for Sturm-Liouville operators
    L f = (1/(c w)) (p f')', with zero flux at the domain edges (p vanishes
    there for the degenerate models and Neumann ends otherwise); the circle
    uses the periodic second difference.  Second-order accurate, so values
    converge like O(grid_size^-2) and Richardson extrapolation applies.

    Returns the smallest ``n_modes`` nonzero eigenvalues, ascending.
    """
    if grid_size < 200:
        raise ValueError(f"grid_size must be >= 200, got {grid_size}")
    n = grid_size
    if model.kind == "circle":
        h = TWO_PI / n
        main = np.full(n, 2.0 / h**2)
        AD = np.diag(main) - np.diag(np.full(n - 1, 1.0 / h**2), 1) - np.diag(np.full(n - 1, 1.0 / h**2), -1)
        AD[0, -1] -= 1.0 / h**2
        AD[-1, 0] -= 1.0 / h**2
        vals = np.linalg.eigvalsh(AD)
        return np.sort(vals)[1 : n_modes + 1]

    if model.kind == "interval-neumann":
        w = lambda x: np.ones_like(x)
        p = lambda x: np.ones_like(x)
        c = 1.0
    elif model.kind == "interval-conditioned":
        w = lambda x: 2.0 * np.sin(math.pi * x) ** 2
        p = w
        c = 1.0
    elif model.kind == "wright-fisher":
        a, b = model.a, model.b
        w = lambda x: x ** (2 * a - 1) * (1 - x) ** (2 * b - 1)
        p = lambda x: x * (1 - x) * w(x)
        c = 2.0
    else:
        raise CapabilityError(f"finite-difference oracle needs a 1-D interval/circle model, got {model.kind!r}")

    h = 1.0 / n
    centers = (np.arange(n) + 0.5) * h
    edges = np.arange(1, n) * h
    wj = w(centers)
    pe = p(edges)  # interior edge conductances; boundary flux is zero
    # -L in the w-weighted inner product, symmetrized by D^{1/2}:
    off = -pe / (c * h**2 * np.sqrt(wj[:-1] * wj[1:]))
    diag = np.zeros(n)
    diag[:-1] += pe / (c * h**2 * wj[:-1])
    diag[1:] += pe / (c * h**2 * wj[1:])
    vals = eigh_tridiagonal(diag, off, eigvals_only=True, select="i", select_range=(0, n_modes))
    return np.asarray(vals[1 : n_modes + 1])


def richardson_eigenvalues(model: ModelSpec, grids: Sequence[int], n_modes: int) -> tuple[np.ndarray, np.ndarray]:
    """Richardson-extrapolated FD eigenvalues from a doubling grid sequence.

    Assumes lambda(h) = lambda + C h^2.  Returns (extrapolated values from the
    finest pair, error estimate = |finest-pair extrapolation - previous-pair
    extrapolation|); grids must at least double twice, e.g. (500, 1000, 2000).
    """
    if len(grids) < 3:
        raise ValueError("need at least three grid sizes for an extrapolation error estimate")
    lam = [eigen_oracle_fd(model, g, n_modes) for g in grids]
    extr = []
    for coarse, fine, gc, gf in zip(lam[:-1], lam[1:], grids[:-1], grids[1:]):
        r = (gf / gc) ** 2
        extr.append((r * fine - coarse) / (r - 1.0))
    return extr[-1], np.abs(extr[-1] - extr[-2])


# ---------------------------------------------------------------------------
# Metric, invariant measure
# ---------------------------------------------------------------------------

def distance(model: ModelSpec, x, y):
    """Intrinsic distance rho(x, y) of the model (vectorized)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if model.kind == "circle":
        d = np.abs(x - y) % TWO_PI
        return np.minimum(d, TWO_PI - d)
    if model.kind == "torus":
        d = np.abs(x - y) % TWO_PI
        d = np.minimum(d, TWO_PI - d)
        return np.sqrt((d**2).sum(axis=-1))
    if model.kind in ("interval-neumann", "interval-conditioned"):
        return np.abs(x - y)
    if model.kind == "wright-fisher":
        return np.abs(metric_transform(model)(y) - metric_transform(model)(x))
    raise CapabilityError(f"no distance available for model kind {model.kind!r}")


def metric_transform(model: ModelSpec) -> Callable[[np.ndarray], np.ndarray]:
    """Monotone g with rho(x, y) = |g(x) - g(y)| for the interval-type models.

    Wright-Fisher: g(x) = 2 sqrt2 arcsin(sqrt x), the antiderivative of
    sqrt2 {x(1-x)}^{-1/2}; identity elsewhere.
    """
    if model.kind == "wright-fisher":
        return lambda x: 2.0 * math.sqrt(2.0) * np.arcsin(np.sqrt(np.clip(np.asarray(x, dtype=float), 0.0, 1.0)))
    if model.kind in ("interval-neumann", "interval-conditioned"):
        return lambda x: np.asarray(x, dtype=float)
    raise CapabilityError(f"metric of {model.kind!r} is not a monotone reparametrization of the line")


def _conditioned_cdf(x: np.ndarray) -> np.ndarray:
    return x - np.sin(TWO_PI * x) / TWO_PI


def invariant_quantile(model: ModelSpec, u):
    """Quantile function of the invariant measure mu (vectorized in u)."""
    u = np.asarray(u, dtype=float)
    if np.any((u < 0) | (u > 1)):
        raise ValueError("quantile argument must lie in [0, 1]")
    if model.kind == "circle":
        return TWO_PI * u
    if model.kind == "torus":
        return TWO_PI * u  # per coordinate
    if model.kind == "interval-neumann":
        return u.copy()
    if model.kind == "interval-conditioned":
        lo = np.zeros_like(u)
        hi = np.ones_like(u)
        for _ in range(60):  # bisection on the exact CDF x - sin(2 pi x)/(2 pi)
            mid = 0.5 * (lo + hi)
            below = _conditioned_cdf(mid) < u
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)
    if model.kind == "wright-fisher":
        return betaincinv(2 * model.a, 2 * model.b, u)
    raise CapabilityError(f"no invariant quantile for model kind {model.kind!r}")


def invariant_cdf(model: ModelSpec, x):
    """CDF of mu for the 1-D models."""
    x = np.asarray(x, dtype=float)
    if model.kind == "circle":
        return x / TWO_PI
    if model.kind == "interval-neumann":
        return x.copy()
    if model.kind == "interval-conditioned":
        return _conditioned_cdf(x)
    if model.kind == "wright-fisher":
        from scipy.special import betainc

        return betainc(2 * model.a, 2 * model.b, np.clip(x, 0.0, 1.0))
    raise CapabilityError(f"no invariant cdf for model kind {model.kind!r}")


def sample_invariant(model: ModelSpec, rng: np.random.Generator, size=None):
    """Draw from mu by pushing uniforms through the quantile function."""
    if model.kind == "torus":
        shape = (model.n,) if size is None else (tuple(np.atleast_1d(size)) + (model.n,))
        return TWO_PI * rng.random(shape)
    return invariant_quantile(model, rng.random(size))


# ---------------------------------------------------------------------------
# Fast spectral sums on the circle
# ---------------------------------------------------------------------------

def circle_fourier_sums(states: np.ndarray, weights: np.ndarray, k_max: int) -> np.ndarray:
    """sum_j w_j e^{i k x_j} for k = 1..k_max via the power recurrence.

    One complex exponential per observation regardless of k_max; the workhorse
    behind spectral coefficients on the circle (both eigenfunctions at level k
    are sqrt2 Im / sqrt2 Re of these sums).
    """
    z = np.exp(1j * np.asarray(states, dtype=float))
    out = np.empty(k_max, dtype=complex)
    zk = np.ones_like(z)
    for k in range(k_max):
        zk = zk * z
        out[k] = np.dot(weights, zk)
    return out
