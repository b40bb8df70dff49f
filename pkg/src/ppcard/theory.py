"""Closed-form analysis of the perturbation noise.

The squared Euclidean distance between a filter and its randomized-response
copy is the number of flipped bits, Binomial(ell, eta), approximated by a
Gaussian with mu = ell*eta and sigma^2 = ell*eta*(1-eta). The probability of
the pair landing within a distance threshold r is then
1/2 + 1/2*erf((r^2 - mu) / sqrt(2*sigma^2)).
"""

from __future__ import annotations

from dataclasses import dataclass

import math

import numpy as np
from scipy.special import erf
from scipy.stats import binom

from .ldp import flip_probability

# Below this expected flip count the Gaussian model collapses to a point
# mass at zero distance.
_DEGENERATE_MU = 1e-9


@dataclass
class TheoryPoint:
    """One (epsilon, r) grid cell of the same-cluster probability curve."""

    epsilon: float
    r: float
    r_frac: float
    ell: int
    p_closed: float
    mu: float
    sigma: float
    p_mc: float | None = None


def same_cluster_probability_r2(ell: int, epsilon: float, r2: float) -> float:
    """P(||bf - bf'||^2 <= r2) under the Gaussian approximation."""
    if ell < 1:
        raise ValueError("ell must be >= 1")
    eta = flip_probability(epsilon)
    mu = ell * eta
    if mu < _DEGENERATE_MU:
        return 1.0 if r2 >= 0 else 0.0
    sigma2 = ell * eta * (1.0 - eta)
    p = 0.5 + 0.5 * float(erf((r2 - mu) / math.sqrt(2.0 * sigma2)))
    return min(1.0, max(0.0, p))


def same_cluster_probability(ell: int, epsilon: float, r: float) -> float:
    """Probability that a filter and its perturbed copy fall within distance r."""
    if r < 0:
        raise ValueError("r must be >= 0")
    return same_cluster_probability_r2(ell, epsilon, r * r)


def exact_same_cluster_probability(ell: int, epsilon: float, r: float) -> float:
    """Exact Binomial CDF counterpart of :func:`same_cluster_probability`."""
    if r < 0:
        raise ValueError("r must be >= 0")
    eta = flip_probability(epsilon)
    # the small slack keeps e.g. sqrt(24)**2 == 23.999... counting as 24
    return float(binom.cdf(math.floor(r * r + 1e-9), ell, eta))


def monte_carlo_same_cluster(
    ell: int, epsilon: float, r: float, trials: int, seed: int = 0
) -> float:
    """Empirical fraction of perturbations within distance r of the original."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    eta = flip_probability(epsilon)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x7C]))
    # Squared distance equals the flip count, so a flat Bernoulli field over
    # (trials, ell) bit positions reproduces `trials` independent perturbations.
    flips = (rng.random((trials, ell)) < eta).sum(axis=1)
    # the small slack keeps e.g. sqrt(24)**2 == 23.999... counting as 24
    return float((flips <= r * r + 1e-9).mean())


def emit_curves(
    epsilons,
    rs=None,
    r_fracs=None,
    ell: int = 200,
    mc_trials: int = 0,
    seed: int = 0,
) -> list[TheoryPoint]:
    """Evaluate the same-cluster probability over an epsilon x r grid.

    Thresholds may be given in absolute Euclidean-distance units (``rs``) or
    as fractions of ell (``r_fracs``, r = r_frac * ell); both are reported.
    """
    epsilons = list(epsilons)
    if rs is None and r_fracs is None:
        raise ValueError("need rs or r_fracs")
    thresholds: list[float] = list(rs) if rs is not None else []
    if r_fracs is not None:
        thresholds.extend(f * ell for f in r_fracs)
    if not epsilons or not thresholds:
        raise ValueError("grids must be nonempty")
    points = []
    for eps in epsilons:
        eta = flip_probability(eps)
        mu = ell * eta
        sigma = math.sqrt(ell * eta * (1.0 - eta))
        for i, r in enumerate(thresholds):
            p_mc = None
            if mc_trials > 0:
                p_mc = monte_carlo_same_cluster(ell, eps, r, mc_trials, seed=seed + i)
            points.append(
                TheoryPoint(
                    epsilon=eps,
                    r=r,
                    r_frac=r / ell,
                    ell=ell,
                    p_closed=same_cluster_probability(ell, eps, r),
                    mu=mu,
                    sigma=sigma,
                    p_mc=p_mc,
                )
            )
    return points
