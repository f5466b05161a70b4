"""Simulation and spectral prediction toolkit for Wasserstein convergence of
empirical measures of (possibly non-symmetric, subordinated) diffusions.

Subpackages follow the pipeline:

    spectral_models        -- model catalog: eigen-data, invariant laws, metrics
    bernstein_subordinator -- Bernstein functions B and exact sampling of S_t^B
    path_simulator         -- diffusion paths and the time-changed process X_{S_t^B}
    empirical_measures     -- occupation measures, spectral coefficients, smoothing
    ot_engine              -- exact 1-D / circular Wasserstein, discrete LP oracle
    predictions            -- limit constants (eta, V_B) and rate-regime classification
    harness                -- Monte-Carlo experiments, rate fits, CLI entry point
"""

__version__ = "0.1.0"
