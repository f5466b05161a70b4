"""Bernstein functions B and exact sampling of the increasing process S_t^B.

The defining property is the Laplace transform

    E[exp(-r S_t^B)] = exp(-B(r) t),   t, r >= 0,

and it is the property the samplers are validated against.  Catalog:

    identity          B(r) = r           (S_t = t deterministically)
    stable(alpha)     B(r) = r^alpha,    alpha in (0,1)
    drift_stable      B(r) = b r + r^alpha, b >= 0

The one-sided alpha-stable variable A with E[exp(-rA)] = exp(-r^alpha) is
drawn by Kanter's representation: with U uniform on (0,1) and W standard
exponential,

    A = (a(U) / W)^{(1-alpha)/alpha},
    a(u) = sin(alpha pi u)^{alpha/(1-alpha)} sin((1-alpha) pi u)
           / sin(pi u)^{1/(1-alpha)},

computed in log space for stability.  Class indices: alpha_lower is the
largest a with liminf B(r) r^{-a} > 0, alpha_upper the smallest a' with
limsup B(r) r^{-a'} < infinity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

KINDS = ("identity", "stable", "drift_stable")


@dataclass(frozen=True)
class BernsteinFn:
    """Laplace exponent of a subordinator, with stable-class metadata."""

    kind: str
    alpha: float = 1.0
    drift: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown Bernstein kind {self.kind!r}; known: {KINDS}")
        if self.kind in ("stable", "drift_stable") and not (0.0 < self.alpha < 1.0):
            raise ValueError(f"stable index must lie in (0,1), got alpha={self.alpha}")
        if self.drift < 0.0:
            raise ValueError(f"drift must be >= 0, got {self.drift}")

    @property
    def alpha_lower(self) -> float:
        if self.kind == "identity":
            return 1.0
        if self.kind == "drift_stable" and self.drift > 0.0:
            return 1.0
        return self.alpha

    @property
    def alpha_upper(self) -> float:
        if self.kind == "identity":
            return 1.0
        if self.kind == "drift_stable" and self.drift > 0.0:
            return 1.0
        return self.alpha

    def label(self) -> str:
        if self.kind == "identity":
            return "identity"
        if self.kind == "stable":
            return f"stable({self.alpha:g})"
        return f"drift({self.drift:g})+stable({self.alpha:g})"


def identity() -> BernsteinFn:
    return BernsteinFn(kind="identity")


def stable(alpha: float) -> BernsteinFn:
    return BernsteinFn(kind="stable", alpha=alpha)


def drift_plus_stable(drift: float, alpha: float) -> BernsteinFn:
    return BernsteinFn(kind="drift_stable", alpha=alpha, drift=drift)


def bernstein_from_config(cfg: dict) -> BernsteinFn:
    kind = cfg.get("kind", "identity")
    if kind == "identity":
        return identity()
    if kind == "stable":
        return stable(float(cfg["alpha"]))
    if kind == "drift_stable":
        return drift_plus_stable(float(cfg.get("drift", 0.0)), float(cfg["alpha"]))
    raise ValueError(f"unknown bernstein.kind {kind!r}")


def evaluate(B: BernsteinFn, r):
    """B(r) for r >= 0 (vectorized); also accepts complex r with Re r > 0,
    where r^alpha is the principal branch (used by analytic variance formulas)."""
    r = np.asarray(r)
    if np.isrealobj(r) and np.any(r < 0):
        raise ValueError("Bernstein functions are evaluated on r >= 0")
    if B.kind == "identity":
        return r + 0.0
    if B.kind == "stable":
        return r**B.alpha
    return B.drift * r + r**B.alpha


def sample_one_sided_stable(alpha: float, rng: np.random.Generator, size=None) -> np.ndarray:
    """A > 0 with E[exp(-rA)] = exp(-r^alpha), by Kanter's representation."""
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"stable index must lie in (0,1), got {alpha}")
    # uniforms strictly inside (0,1): offset lattice keeps log(sin) finite
    u = (rng.integers(0, 2**53, size=size).astype(float) + 0.5) / 2**53
    w = rng.standard_exponential(size=size)
    log_a = (
        alpha * np.log(np.sin(alpha * math.pi * u))
        + (1.0 - alpha) * np.log(np.sin((1.0 - alpha) * math.pi * u))
        - np.log(np.sin(math.pi * u))
    ) / (1.0 - alpha)
    return np.exp(((1.0 - alpha) / alpha) * (log_a - np.log(w)))


def sample_increment(B: BernsteinFn, dt: float, rng: np.random.Generator, size=None):
    """A draw of S_{t+dt}^B - S_t^B, i.e. with Laplace transform exp(-B(r) dt).

    Stable part scales as dt^{1/alpha} A by self-similarity.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if B.kind == "identity":
        out = np.full(size, dt) if size is not None else dt
        return out
    out = dt ** (1.0 / B.alpha) * sample_one_sided_stable(B.alpha, rng, size=size)
    if B.kind == "drift_stable":
        out = out + B.drift * dt
    assert np.all(np.asarray(out) >= 0.0)
    return out


@dataclass(frozen=True)
class SubordinatorPath:
    """S_t^B along a grid: non-decreasing values over strictly increasing times."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("subordinator grid must be strictly increasing")
        if self.values[0] < 0 or np.any(np.diff(self.values) < 0):
            raise ValueError("subordinator values must start >= 0 and be non-decreasing")

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)


def sample_path(B: BernsteinFn, grid, rng: np.random.Generator, warm_start: float = 0.0) -> SubordinatorPath:
    """Independent-increment path of S^B on the grid, S_{t_0} = warm_start."""
    grid = np.asarray(grid, dtype=float)
    dts = np.diff(grid)
    if np.any(dts <= 0):
        raise ValueError("subordinator grid must be strictly increasing")
    if B.kind == "identity":
        incs = dts
    else:
        # increments over equal dt are iid; sample per distinct step size
        incs = np.empty_like(dts)
        # vectorized fast path for a uniform grid
        if np.allclose(dts, dts[0], rtol=1e-12, atol=0.0):
            incs = np.asarray(sample_increment(B, float(dts[0]), rng, size=dts.shape))
        else:
            for j, dt in enumerate(dts):
                incs[j] = sample_increment(B, float(dt), rng)
    values = np.concatenate(([warm_start], warm_start + np.cumsum(incs)))
    return SubordinatorPath(times=grid, values=values)
