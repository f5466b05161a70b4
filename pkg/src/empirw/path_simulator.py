"""Diffusion paths and the subordinated process X^B_t = X_{S_t^B}.

The circle (and torus) kernel is exact: over an elapsed generator-time s the
transition of L-hat = d2/dx2 + c d/dx is a wrapped Gaussian,

    X' = (X + c s + sqrt(2 s) G) mod 2pi,   G ~ N(0,1),

so rate measurements on the flagship model carry no time-discretization bias.
Wright-Fisher and the conditioned interval use Euler-Maruyama with substep
control; both are kept inside their state space by construction (clamping to
[0,1], respectively reflection at a guard band inside (0,1)).

All kernels broadcast over a trailing replica axis: ``x0`` may be a scalar or
an array of independent replicas advanced under shared step durations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bernstein_subordinator import BernsteinFn, sample_path
from .rng import substreams
from .spectral_models import ModelSpec, TWO_PI, eigenvalue, invariant_quantile, sample_invariant

# durations beyond this many relaxation times 1/lambda_1 are replaced by an
# exact draw from mu; the total-variation error is below e^{-50}
MIXING_CUTOFF_RELAXATIONS = 50.0


@dataclass(frozen=True)
class PathSample:
    """Observations of X^B on the uniform grid s_j = j * grid_step.

    ``states`` has shape (m+1,) (or (m+1, dim) on the torus); ``subordinator``
    holds S_{s_j}; ``seed_info`` records how the streams were keyed.
    """

    model: ModelSpec
    times: np.ndarray
    states: np.ndarray
    subordinator: np.ndarray
    seed_info: dict

    @property
    def horizon(self) -> float:
        return float(self.times[-1] - self.times[0])

    @property
    def grid_step(self) -> float:
        return float(self.times[1] - self.times[0])


def simulate_circle(c: float, durations, x0, rng: np.random.Generator) -> np.ndarray:
    """Exact sampling of dX = c dt + sqrt2 dB on R/2piZ over given durations.

    ``durations`` has shape (m,) shared across replicas, or (m,) + shape(x0)
    for per-replica clocks.  Returns states of shape (m+1,) + shape(x0)
    including x0.
    """
    durations = np.asarray(durations, dtype=float)
    if np.any(durations < 0):
        raise ValueError("durations must be >= 0")
    x0 = np.asarray(x0, dtype=float)
    d = durations if durations.ndim > 1 else durations.reshape(durations.shape + (1,) * x0.ndim)
    shape = np.broadcast_shapes(d.shape, (durations.shape[0],) + x0.shape)
    g = rng.standard_normal(shape)
    steps = c * d + np.sqrt(2.0 * d) * g
    out = np.empty((durations.shape[0] + 1,) + x0.shape)
    out[0] = x0 % TWO_PI
    np.cumsum(steps, axis=0, out=steps)
    out[1:] = (x0 + steps) % TWO_PI
    return out


def simulate_torus(drift, durations, x0, rng: np.random.Generator) -> np.ndarray:
    """Exact product-of-circles kernel with constant drift (c_1, ..., c_n)."""
    drift = np.asarray(drift, dtype=float)
    durations = np.asarray(durations, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape[-1] != drift.shape[0]:
        raise ValueError("state and drift dimensions differ")
    g = rng.standard_normal(durations.shape + x0.shape)
    d = durations.reshape(durations.shape + (1,) * x0.ndim)
    steps = drift * d + np.sqrt(2.0 * d) * g
    out = np.empty((durations.shape[0] + 1,) + x0.shape)
    out[0] = x0 % TWO_PI
    np.cumsum(steps, axis=0, out=steps)
    out[1:] = (x0 + steps) % TWO_PI
    return out


def _euler_step_wf(x, h, g, a, b):
    drift = a - (a + b) * x
    x_new = x + drift * h + np.sqrt(np.maximum(x * (1.0 - x), 0.0) * h) * g
    return np.clip(x_new, 0.0, 1.0)  # diffusion coefficient is evaluated at the clamped point next substep


def simulate_wright_fisher(a: float, b: float, durations, x0, rng: np.random.Generator,
                           h_max: float = 1e-3) -> np.ndarray:
    """Euler-Maruyama for dX = {a-(a+b)X} dt + sqrt(X(1-X)) dB on [0,1]."""
    if not (a > 0.25 and b > 0.25):
        raise ValueError(f"wright-fisher requires a, b > 1/4, got a={a}, b={b}")
    durations = np.asarray(durations, dtype=float)
    x = np.asarray(x0, dtype=float) * np.ones(np.shape(x0) or ())
    if np.any((x < 0) | (x > 1)):
        raise ValueError("x0 must lie in [0,1]")
    out = np.empty((durations.shape[0] + 1,) + x.shape)
    out[0] = x
    cap = MIXING_CUTOFF_RELAXATIONS / (a + b)
    for j, dur in enumerate(durations):
        if dur > cap:
            x = invariant_quantile_wf(a, b, rng.random(x.shape))
        else:
            remaining = dur
            while remaining > 0:
                h = min(h_max, remaining)
                x = _euler_step_wf(x, h, rng.standard_normal(x.shape), a, b)
                remaining -= h
        out[j + 1] = x
    assert np.all((out >= 0.0) & (out <= 1.0))
    return out


def invariant_quantile_wf(a: float, b: float, u):
    from scipy.special import betaincinv

    return betaincinv(2 * a, 2 * b, u)


def simulate_conditioned_interval(durations, x0, rng: np.random.Generator,
                                  h_max: float = 1e-3, h_scale: float = 0.1,
                                  guard: float = 1e-6) -> np.ndarray:
    """Euler-Maruyama for dX = 2pi cot(pi X) dt + sqrt2 dB on (0,1).

    Substeps shrink near the boundary, h <= h_scale (x(1-x))^2, and each
    substep reflects back into [guard, 1-guard]; the process never exits (0,1).
    """
    durations = np.asarray(durations, dtype=float)
    x = np.asarray(x0, dtype=float) * np.ones(np.shape(x0) or ())
    if np.any((x <= 0) | (x >= 1)):
        raise ValueError("x0 must lie in the open interval (0,1)")
    out = np.empty((durations.shape[0] + 1,) + x.shape)
    out[0] = x
    lam1 = eigenvalue(ModelSpec(kind="interval-conditioned", d=3, d_prime=1, d_dprime=1), 1)
    cap = MIXING_CUTOFF_RELAXATIONS / lam1
    for j, dur in enumerate(durations):
        if dur > cap:
            from .spectral_models import conditioned_interval, invariant_quantile

            x = invariant_quantile(conditioned_interval(), rng.random(x.shape))
        else:
            remaining = np.full(x.shape, float(dur))
            while True:
                h = np.minimum(np.minimum(h_max, h_scale * (x * (1.0 - x)) ** 2), remaining)
                active = remaining > 0
                if not np.any(active):
                    break
                g = rng.standard_normal(x.shape)
                x_new = x + 2.0 * math.pi / np.tan(math.pi * x) * h + np.sqrt(2.0 * h) * g
                # reflect into [guard, 1-guard]
                x_new = np.abs(x_new - guard) + guard
                x_new = 1.0 - guard - np.abs(1.0 - guard - x_new)
                x_new = np.clip(x_new, guard, 1.0 - guard)
                x = np.where(active, x_new, x)
                remaining = np.maximum(remaining - h, 0.0)
        out[j + 1] = x
    assert np.all((out > 0.0) & (out < 1.0))
    return out


def _advance(model: ModelSpec, durations, x0, rng: np.random.Generator, substep: float):
    if model.kind == "circle":
        return simulate_circle(model.drift[0], durations, x0, rng)
    if model.kind == "torus":
        return simulate_torus(model.drift, durations, x0, rng)
    if model.kind == "wright-fisher":
        return simulate_wright_fisher(model.a, model.b, durations, x0, rng, h_max=substep)
    if model.kind == "interval-conditioned":
        return simulate_conditioned_interval(durations, x0, rng, h_max=substep)
    raise ValueError(f"no simulation kernel for model kind {model.kind!r}")


def simulate_subordinated(model: ModelSpec, B: BernsteinFn, horizon: float, grid_step: float,
                          init, seed_seq: np.random.SeedSequence,
                          substep: float = 1e-3) -> PathSample:
    """Observe X^B_t = X_{S_t^B} on the grid {0, D, 2D, ..., horizon}.

    ``init`` is either the string "invariant" or a point (float / coordinate
    tuple).  The subordinator, the diffusion noise, and the initial draw use
    three separate child streams, enforcing independence of the two sources.
    """
    m = round(horizon / grid_step)
    if abs(m * grid_step - horizon) > 1e-9 * max(1.0, horizon) or m < 1:
        raise ValueError(f"grid_step {grid_step} must divide horizon {horizon}")
    rng_sub, rng_diff, rng_init = substreams(seed_seq, 3)
    times = grid_step * np.arange(m + 1)
    sub_path = sample_path(B, times, rng_sub)
    if isinstance(init, str) and init == "invariant":
        x0 = sample_invariant(model, rng_init)
    elif isinstance(init, str):
        raise ValueError(f"unknown init spec {init!r}")
    else:
        x0 = np.asarray(init, dtype=float)
    states = _advance(model, sub_path.increments, x0, rng_diff, substep)
    return PathSample(
        model=model,
        times=times,
        states=states,
        subordinator=sub_path.values,
        seed_info={"spawn_key": tuple(int(k) for k in seed_seq.spawn_key), "entropy": seed_seq.entropy},
    )
