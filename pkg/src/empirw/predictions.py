"""Spectral limit constants and rate-regime classification.

Core objects, for eigenvalues lambda_i and the subordinated semigroup P_s^B:

    V_B(phi_i) = int_0^inf mu(phi_i P_s^B phi_i) ds        (asymptotic variance)
    eta        = sum_i 2 V_B(phi_i) e^{-2 lambda_i r} / lambda_i   (r >= 0)

For the symmetric part alone V_B(phi_i) = 1/B(lambda_i).  On the circle the
constant drift c rotates each frequency-k eigenspace, giving the stationary
autocovariance mu(phi P_s^B phi) = E[e^{-k^2 S_s} cos(k c S_s)], so with
B = identity V(phi) = 1/(k^2 + c^2); the identity

    V(phi_i) = 1/lambda_i - V(Z phi_i)/lambda_i^2

is the non-symmetric variance correction.  Rate classification uses

    q_alpha         = 2d / (2d + d' - 2 - 2 alpha)^+
    alpha(d, d')    = ( sqrt((2+d-d')^2 + 4d(d+d'-2)) + d' - d - 2 ) / 4
    gamma_{a,p,q}   = d'/2 + (d/2)(2 - 1/p - 1/q) - alpha - 1

with the W_2^2 menu t^{-1} (limit eta) / t^{-1} log t / t^{-2/(d'-2 alpha)}
switching at d' = 2(1+alpha), and the W_{2p}^{2q} menu t^{-1} / t^{-1} log t /
t^{-1/(1+gamma)} switching at gamma = 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import numpy as np

from .bernstein_subordinator import BernsteinFn, evaluate, sample_one_sided_stable
from .spectral_models import CapabilityError, ModelSpec, eigenvalue

V_B_METHODS = ("analytic", "green_kubo", "subordinator_mc")


# ---------------------------------------------------------------------------
# Asymptotic variances V_B(phi_i)
# ---------------------------------------------------------------------------

def _circle_level(model: ModelSpec, i: int) -> int:
    return (i + 1) // 2


def v_b(model: ModelSpec, B: BernsteinFn, i: int, method: str = "analytic",
        path_values: np.ndarray | None = None, grid_step: float | None = None,
        n_draws: int = 100_000, seed: int = 0):
    """Asymptotic variance V_B(phi_i) of the i-th eigenmode (i >= 1).

    analytic:        1/B(lambda_i) for drift-free models; 1/(k^2+c^2) for the
                     circle with drift c under the identity time change.
    subordinator_mc: circle with drift, general B -- Monte Carlo over
                     subordinator draws combined with quadrature in s;
                     returns (estimate, standard_error).
    green_kubo:      empirical autocovariance integration of a supplied
                     stationary series phi_i(X^B_j); returns
                     (estimate, standard_error, truncation_lag).
    """
    if i < 1:
        raise ValueError(f"mode index must be >= 1, got {i}")
    if method not in V_B_METHODS:
        raise ValueError(f"unknown method {method!r}; known: {V_B_METHODS}")
    lam = eigenvalue(model, i)

    if method == "analytic":
        if model.drift_norm == 0.0:
            return 1.0 / float(evaluate(B, lam))
        if model.kind == "circle" and B.kind == "identity":
            k = _circle_level(model, i)
            c = model.drift[0]
            return 1.0 / (k * k + c * c)
        raise CapabilityError(
            f"no analytic V_B for (model={model.kind}, drift={model.drift}, B={B.label()}); "
            "use method='subordinator_mc' or 'green_kubo'"
        )

    if method == "subordinator_mc":
        if model.kind != "circle":
            raise CapabilityError("subordinator_mc variance is implemented for the circle")
        return _v_b_subordinator_mc(model, B, i, n_draws=n_draws, seed=seed)

    if path_values is None or grid_step is None:
        raise ValueError("green_kubo needs path_values (phi_i along a stationary path) and grid_step")
    est, se, lag = green_kubo(path_values, grid_step)
    return est, se, lag


def _v_b_subordinator_mc(model: ModelSpec, B: BernsteinFn, i: int, n_draws: int, seed: int):
    """V_B = int_0^inf E[e^{-k^2 S_s} cos(k c S_s)] ds by MC over the marginal law.

    For the stable part S_s =(d)= b s + s^{1/alpha} A, one A-draw gives the
    whole s-profile; the s-integral is Gauss-Legendre on a decay-adapted
    range.  Identity B reduces to the closed form.
    """
    from .rng import stream

    k = _circle_level(model, i)
    c = model.drift[0]
    lam = float(k * k)
    if B.kind == "identity":
        return lam / (lam**2 + (k * c) ** 2), 0.0
    rng = stream(seed, 777, i)
    A = sample_one_sided_stable(B.alpha, rng, size=n_draws)
    # s-range: integrand decays once B(lam) s >> 1
    s_max = 60.0 / float(evaluate(B, lam))
    nodes, weights = np.polynomial.legendre.leggauss(200)
    s = 0.5 * s_max * (nodes + 1.0)
    ws = 0.5 * s_max * weights
    S = B.drift * s[None, :] + (s[None, :] ** (1.0 / B.alpha)) * A[:, None]
    vals = np.exp(-lam * S) * np.cos(k * c * S)
    per_draw = vals @ ws
    est = float(per_draw.mean())
    se = float(per_draw.std(ddof=1) / math.sqrt(n_draws))
    return est, se


def green_kubo(series: np.ndarray, dt: float, max_lag: int | None = None,
               noise_run: int = 5, n_batches: int = 20):
    """V-hat = integral of the empirical stationary autocovariance of ``series``.

    The lag integral stops at the first lag L where the autocovariance enters
    its noise floor (Bartlett scale) for ``noise_run`` consecutive lags and
    stays inside it over the doubled-lag lookahead window [L, 2L]; the window
    keeps a mere zero crossing of an oscillatory autocovariance from being
    mistaken for the terminal plateau.  The standard error comes from batch
    means over ``n_batches`` contiguous blocks.  Returns
    (estimate, stderr, truncation_lag_seconds).
    """
    x = np.asarray(series, dtype=float)
    n = x.shape[0]
    if n < 100:
        raise ValueError("green_kubo needs a long stationary series")
    if max_lag is None:
        max_lag = n // 10

    def integrate(y: np.ndarray) -> tuple[float, int]:
        y = y - y.mean()
        cap = min(max_lag, len(y) // 2 - 1)
        f = np.fft.rfft(y, n=2 * len(y))
        acov = np.fft.irfft(f * np.conj(f))[: cap + 1] / (len(y) - np.arange(cap + 1))
        noise = 3.0 * math.sqrt((acov[0] ** 2 + 2.0 * float(np.sum(acov[1: cap // 2] ** 2))) / len(y))
        below = np.abs(acov) < noise
        lag = cap
        run = 0
        for j in range(1, cap + 1):
            run = run + 1 if below[j] else 0
            if run >= noise_run:
                candidate = j - noise_run + 1
                window_end = min(2 * candidate + noise_run, cap + 1)
                if np.all(below[candidate:window_end]):
                    lag = candidate
                    break
                run = 0
        val = dt * (np.sum(acov[:lag]) + 0.5 * acov[lag]) - 0.5 * dt * acov[0]
        return float(val), lag

    est, lag = integrate(x)
    size = n // n_batches
    batch_vals = [integrate(x[j * size:(j + 1) * size])[0] for j in range(n_batches)]
    se = float(np.std(batch_vals, ddof=1) / math.sqrt(n_batches))
    return est, se, lag * dt


def v_zphi_rotation(k: int, c: float) -> float:
    """V(Z phi) for the circle level-k pair under drift c: c^2 k^2 / (k^2 + c^2).

    Z phi = -c k sqrt2 sin(kx) for phi = sqrt2 cos(kx), and the sin mode has
    the same asymptotic variance 1/(k^2+c^2), whence the value; feeding it to
    the correction 1/lambda - V(Z phi)/lambda^2 reproduces 1/(k^2+c^2).
    """
    return c * c * k * k / (k * k + c * c)


# ---------------------------------------------------------------------------
# The limit constant eta
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LimitConstant:
    """A truncated spectral series with a rigorous tail bound."""

    value: float
    truncation: int
    tail_bound: float
    provenance: str
    stderr: float = 0.0

    def acceptable(self) -> bool:
        return self.tail_bound < 1e-3 * self.value


def _eigen_levels(model: ModelSpec, n_levels: int):
    """(lambda, multiplicity) for grouped eigenspaces, lowest first."""
    if model.kind == "circle":
        return [(float(k * k), 2) for k in range(1, n_levels + 1)]
    if model.kind in ("interval-neumann", "interval-conditioned", "wright-fisher"):
        return [(eigenvalue(model, i), 1) for i in range(1, n_levels + 1)]
    if model.kind == "torus" and model.n == 2:
        levels: dict[float, int] = {}
        kmax = int(math.isqrt(4 * n_levels)) + 2
        for k1 in range(-kmax, kmax + 1):
            for k2 in range(-kmax, kmax + 1):
                if (k1, k2) != (0, 0):
                    lam = float(k1 * k1 + k2 * k2)
                    levels[lam] = levels.get(lam, 0) + 1
        return sorted(levels.items())[:n_levels]
    raise CapabilityError(f"no eigen-level enumeration for model kind {model.kind!r}")


def _level_variance(model: ModelSpec, B: BernsteinFn, lam: float, method: str, seed: int):
    """Per-eigenfunction V summed over one eigenspace is basis independent;
    returns (sum over the eigenspace of V)/multiplicity, stderr."""
    if model.drift_norm == 0.0:
        return 1.0 / float(evaluate(B, lam)), 0.0
    if model.kind == "circle":
        k = int(round(math.sqrt(lam)))
        c = model.drift[0]
        if B.kind == "identity":
            return 1.0 / (k * k + c * c), 0.0
        if method == "analytic":
            raise CapabilityError(
                f"no analytic V_B for drifted circle with B={B.label()}; request provenance='subordinator_mc'"
            )
        idx = 2 * k - 1  # first eigenfunction at level k
        est, se = _v_b_subordinator_mc(model, B, idx, n_draws=100_000, seed=seed)
        return est, se
    raise CapabilityError(f"no drifted variance rule for model kind {model.kind!r}")


def eta(model: ModelSpec, B: BernsteinFn, n_levels: int | None = None, r: float = 0.0,
        provenance: str = "analytic", seed: int = 0) -> LimitConstant:
    """eta = sum_i 2 e^{-2 lambda_i r} V_B(phi_i) / lambda_i, truncated with tail bound.

    Requires d' < 2(1 + alpha) (otherwise the series diverges and the decay
    is in the t^{-1} log t / polynomial regime -- a RegimeError).  The tail
    uses |V_B(phi_i)| <= 1/B(lambda_i), valid for every catalog model since
    |mu(phi P_s^B phi)| <= E[e^{-lambda_i S_s}].  With ``n_levels`` omitted,
    the truncation is grown until tail < 1e-4 * value.
    """
    alpha = B.alpha_lower
    if not model.d_prime < 2.0 * (1.0 + alpha):
        raise RegimeError(
            f"eta diverges: d'={model.d_prime} >= 2(1+alpha)={2 * (1 + alpha)}; "
            "the W_2^2 decay is in the critical/polynomial regime"
        )

    def tail_bound(lam_from: float) -> float:
        # sum of 2 e^{-2 lam r} / (lam B(lam)) over eigen-levels above lam_from:
        # enumerate far past the truncation, then close with an integral
        # remainder from lambda_i >= c i^{2/d'} (c fitted over the enumeration)
        total = 0.0
        levels = _eigen_levels(model, max(4 * (n_levels or 64), 512))
        count = 0
        growth_c = math.inf
        for lam, mult in levels:
            count += mult
            growth_c = min(growth_c, lam / count ** (2.0 / model.d_prime))
            if lam > lam_from:
                total += mult * 2.0 * math.exp(-2.0 * lam * r) / (lam * float(evaluate(B, lam)))
        # remainder: sum_{i > count} 2 / (c_B (c i^{2/d'})^{1+alpha}) using the
        # catalog lower bound B(lam) >= c_B lam^alpha for lam >= 1
        c_lower = B.drift if (B.kind == "drift_stable" and B.drift > 0) else 1.0
        expo = 2.0 * (1.0 + alpha) / model.d_prime
        total += (2.0 / c_lower) * growth_c ** (-(1.0 + alpha)) * count ** (1.0 - expo) / (expo - 1.0)
        return total

    def partial(nlev: int):
        vals, ses = 0.0, 0.0
        for lam, mult in _eigen_levels(model, nlev):
            v, se = _level_variance(model, B, lam, provenance, seed)
            vals += mult * 2.0 * math.exp(-2.0 * lam * r) * v / lam
            ses += (mult * 2.0 * math.exp(-2.0 * lam * r) * se / lam) ** 2
        return vals, math.sqrt(ses)

    if n_levels is None:
        nlev = 8
        while True:
            value, se = partial(nlev)
            tb = tail_bound(_eigen_levels(model, nlev)[-1][0])
            if tb < 1e-4 * value or nlev >= 4096:
                break
            nlev *= 2
    else:
        nlev = n_levels
        value, se = partial(nlev)
        tb = tail_bound(_eigen_levels(model, nlev)[-1][0])

    prov = provenance if model.drift_norm > 0 and B.kind != "identity" else "analytic"
    return LimitConstant(value=value, truncation=nlev, tail_bound=tb, provenance=prov, stderr=se)


class RegimeError(ValueError):
    """A limit constant was requested in a divergent-parameter regime."""


# ---------------------------------------------------------------------------
# Rate-regime classification
# ---------------------------------------------------------------------------

def _maybe_frac(x):
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    return x


@dataclass(frozen=True)
class RateRegime:
    """Predicted decay laws for W_2^2 and (E W_{2p}^{2q})^{1/q}.

    Laws are "t_inv" (C/t, with the limit eta for w2), "t_inv_log"
    (C log t / t), or "t_poly" with the stated exponent (decay t^{-exponent}).
    Exponents are exact Fractions whenever all inputs are rational.
    """

    w2_law: str
    w2_exponent: object
    moment_law: str
    moment_exponent: object
    q_alpha: object
    alpha_threshold: float
    gamma: object
    d: object
    d_prime: object
    alpha: object
    p: object
    q: object


def q_alpha_exponent(d, d_prime, alpha):
    """q_alpha = 2d / (2d + d' - 2 - 2 alpha)^+, +inf when the denominator is <= 0."""
    d, d_prime, alpha = map(_maybe_frac, (d, d_prime, alpha))
    den = 2 * d + d_prime - 2 - 2 * alpha
    if den <= 0:
        return math.inf
    return 2 * d / den


def alpha_threshold(d: float, d_prime: float) -> float:
    """alpha(d,d') = ( sqrt((2+d-d')^2 + 4d(d+d'-2)) + d' - d - 2 ) / 4."""
    return 0.25 * (math.sqrt((2.0 + d - d_prime) ** 2 + 4.0 * d * (d + d_prime - 2.0)) + d_prime - d - 2.0)


def gamma_exponent(d, d_prime, alpha, p, q):
    """gamma_{alpha,p,q} = d'/2 + (d/2)(2 - 1/p - 1/q) - alpha - 1."""
    d, d_prime, alpha, p, q = map(_maybe_frac, (d, d_prime, alpha, p, q))
    one = Fraction(1) if isinstance(d, Fraction) and isinstance(p, Fraction) and isinstance(q, Fraction) else 1.0
    return d_prime / 2 + (d / 2) * (2 - one / p - one / q) - alpha - 1


def regime(model_dims, alpha, p=1, q=1) -> RateRegime:
    """Classify the decay of E[W_2^2] and (E[W_{2p}^{2q}])^{1/q} in t.

    ``model_dims`` is a ModelSpec or a (d, d') pair.  alpha in (0, 1] is the
    lower stable index of the time change (1 for no subordination).
    """
    if isinstance(model_dims, ModelSpec):
        d, d_prime = model_dims.d, model_dims.d_prime
        if float(d) == int(d):
            d = int(d)
        if float(d_prime) == int(d_prime):
            d_prime = int(d_prime)
    else:
        d, d_prime = model_dims
    if not (0 < alpha <= 1):
        raise ValueError(f"alpha must lie in (0,1], got {alpha}")
    if p < 1 or q < 1:
        raise ValueError(f"moment orders must satisfy p, q >= 1, got p={p}, q={q}")
    df, dpf, af = map(_maybe_frac, (d, d_prime, alpha))

    crit = dpf - 2 * (1 + af)
    if crit < 0:
        w2_law, w2_exp = "t_inv", _maybe_frac(1)
    elif crit == 0:
        w2_law, w2_exp = "t_inv_log", _maybe_frac(1)
    else:
        w2_law, w2_exp = "t_poly", 2 / (dpf - 2 * af)

    g = gamma_exponent(d, d_prime, alpha, p, q)
    if g < 0:
        m_law, m_exp = "t_inv", _maybe_frac(1)
    elif g == 0:
        m_law, m_exp = "t_inv_log", _maybe_frac(1)
    else:
        m_law, m_exp = "t_poly", 1 / (1 + g)

    return RateRegime(
        w2_law=w2_law, w2_exponent=w2_exp, moment_law=m_law, moment_exponent=m_exp,
        q_alpha=q_alpha_exponent(d, d_prime, alpha),
        alpha_threshold=alpha_threshold(float(d), float(d_prime)),
        gamma=g, d=d, d_prime=d_prime, alpha=_maybe_frac(alpha), p=_maybe_frac(p), q=_maybe_frac(q),
    )


# ---------------------------------------------------------------------------
# CLT limits
# ---------------------------------------------------------------------------

def clt_limits(model: ModelSpec, i: int = 1, B: BernsteinFn | None = None) -> tuple[float, float]:
    """(V(phi_i), limit of sqrt t E|mu_t(phi_i)|) for the stationary CLT.

    sqrt t mu_t(phi_i) -> N(0, V) in law, so the absolute first moment tends
    to the half-normal mean sqrt(2 V / pi).
    """
    from .bernstein_subordinator import identity

    if B is None:
        B = identity()
    v = v_b(model, B, i, method="analytic")
    return v, math.sqrt(2.0 * v / math.pi)
