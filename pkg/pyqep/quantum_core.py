"""Closed-form algebra of partially entangled two-qubit links.

A link is the pure state sqrt(a0)|00> + sqrt(a1)|11> written by its Schmidt
pair (a0, a1) with a0 >= a1. Bell measurements are handled only through the
multiset of their four outcome probabilities (see `pyqep.measurement`).

All functions are pure. Functions taking probabilities accept floats or
numpy arrays and evaluate element-wise; scalar input gives a float back.

Usage example:

    link = make_link_state(0.3)
    singlet_conversion_prob(link)       # 0.6
    scp_xz(link)                        # 0.92019...
"""

from dataclasses import dataclass
import logging

import numpy as np


# Tolerance for precondition checks (probability ranges, bounds on p_m).
# Module-level so that a configuration file can override it at runtime.
TOLERANCE = 1e-9

# Normalisation of Schmidt pairs is an exact identity, checked tighter
NORMALIZATION_TOLERANCE = 1e-12


def _output(x):
    """Return a float for 0-d results, the array otherwise."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return float(x)
    return x


@dataclass(frozen=True)
class LinkState:
    """Two-qubit pure state given by its Schmidt coefficients.

    The coefficients are never swapped silently - constructing a LinkState
    with alpha1 > alpha0 is an error.
    """
    alpha0: float
    alpha1: float

    def __post_init__(self):
        if abs(self.alpha0 + self.alpha1 - 1) > NORMALIZATION_TOLERANCE:
            raise ValueError(
                f"Schmidt coefficients must sum to 1, got {self.alpha0} + "
                f"{self.alpha1}")
        if not (0 <= self.alpha1 <= 0.5 <= self.alpha0 <= 1):
            raise ValueError(
                f"Expected 0 <= alpha1 <= 1/2 <= alpha0 <= 1, got "
                f"({self.alpha0}, {self.alpha1}) - alpha1 must be the "
                "smaller coefficient")

    def __str__(self):
        return f"|alpha> = ({self.alpha0:.6g}, {self.alpha1:.6g})"


@dataclass(frozen=True)
class SwapOutcome:
    """One outcome of a Bell measurement on the middle qubits of a swap.

    `lam` is the smallest Schmidt coefficient of the post-measurement pair.
    """
    prob: float
    lam: float


@dataclass(frozen=True)
class ScpCurvePoint:
    alpha1: float
    scp: float


def make_link_state(alpha1):
    """Create the LinkState with smaller Schmidt coefficient `alpha1`.

    Args:
        alpha1: smaller Schmidt coefficient, in [0, 1/2]
    """
    alpha1 = float(alpha1)
    if alpha1 < -TOLERANCE or alpha1 > 0.5 + TOLERANCE:
        raise ValueError(
            f"alpha1 must be between 0 and 1/2 (the smaller Schmidt "
            f"coefficient), got {alpha1}")
    alpha1 = min(max(alpha1, 0.0), 0.5)
    return LinkState(1.0 - alpha1, alpha1)


def singlet_conversion_prob(link):
    """Optimal probability of converting a single link to a singlet."""
    return 2 * link.alpha1


def outcome_bounds(link):
    """Smallest and largest outcome probability of any Bell measurement.

    Returns:
        (p_min, p_max) = (a0*a1, 1/2 - a0*a1)
    """
    p_min = link.alpha0 * link.alpha1
    return p_min, 0.5 - p_min


def outcome_lambda(link, p_m):
    """Smallest Schmidt coefficient of the pair left by outcome `p_m`.

    lambda_m = (1 - sqrt(1 - a0^2 a1^2 / p_m^2)) / 2, with lambda = 1/2 at
    p_m = p_min exactly. An outcome of probability 0 (only possible for a
    separable link) is assigned lambda = 1/2, its limit value.

    Args:
        link: LinkState of both input pairs
        p_m: outcome probability (float or array) in [p_min, p_max]
    """
    p = np.asarray(p_m, dtype=float)
    p_min, p_max = outcome_bounds(link)
    if np.any(p < p_min - TOLERANCE) or np.any(p > p_max + TOLERANCE):
        raise ValueError(
            f"Outcome probability {p_m} outside [{p_min:.6g}, {p_max:.6g}] "
            f"for {link}")
    c = (link.alpha0 * link.alpha1) ** 2
    with np.errstate(invalid='ignore', divide='ignore'):
        ratio = np.where(p > 0, c / p ** 2, 1.0)
    radicand = np.clip(1 - ratio, 0, 1)
    radicand = np.where(p <= p_min, 0.0, radicand)
    return _output(0.5 * (1 - np.sqrt(radicand)))


def _distill_raw(beta1, gamma1):
    # Unclamped majorization bound; >= 1 means distillation is certain
    beta1 = np.asarray(beta1, dtype=float)
    gamma1 = np.asarray(gamma1, dtype=float)
    return 2 * (1 - (1 - beta1) * (1 - gamma1))


def distill_prob(beta1, gamma1):
    """Optimal probability of distilling a singlet from two pairs.

    Args:
        beta1: smallest Schmidt coefficient of the first pair
        gamma1: smallest Schmidt coefficient of the second pair
    """
    return _output(np.minimum(1.0, _distill_raw(beta1, gamma1)))


def swap_outcomes(link, meas):
    """List the SwapOutcomes of measurement `meas` applied to two links."""
    meas.check(link)
    probs = np.array(meas.probs)
    lams = np.atleast_1d(outcome_lambda(link, probs))
    return [SwapOutcome(float(p), float(lam)) for p, lam in zip(probs, lams)]


def full_swap_avg_scp(link, meas):
    """Average SCP of full entanglement swapping, 2 * sum_m p_m lambda_m."""
    meas.check(link)
    probs = np.array(meas.probs)
    lams = outcome_lambda(link, probs)
    return float(2 * np.sum(probs * lams))


def partial_swap_avg_scp(link, meas):
    """Average SCP of a partial swap followed by distillation with a link.

    Each outcome pair is distilled together with a fresh copy of `link`, so
    the result is sum_m p_m * distill_prob(a1, lambda_m).
    """
    meas.check(link)
    probs = np.array(meas.probs)
    lams = outcome_lambda(link, probs)
    return float(np.sum(probs * distill_prob(link.alpha1, lams)))


def saturation_margin(link, meas):
    """How far the worst outcome of a partial swap is from certain success.

    Returns the minimum, over outcomes with p_m > 0, of the unclamped
    distillation expression minus 1. The partial-swap SCP equals 1 exactly
    when the margin is >= 0.
    """
    meas.check(link)
    probs = np.array(meas.probs)
    probs = probs[probs > 0]
    lams = outcome_lambda(link, probs)
    return float(np.min(_distill_raw(link.alpha1, lams)) - 1)


def zz_saturation(link):
    """Unclamped distillation expression for the p_max outcomes of ZZ."""
    a0, a1 = link.alpha0, link.alpha1
    return 2 * (1 - a0 ** 3 / (a0 ** 2 + a1 ** 2))


def xz_saturation(link):
    """Unclamped distillation expression for the outcomes of XZ."""
    a0, a1 = link.alpha0, link.alpha1
    radicand = max(0.0, 1 - 16 * a0 ** 2 * a1 ** 2)
    return 2 - a0 * (1 + np.sqrt(radicand))


def scp_zz(link):
    """Average SCP of partial swapping in the ZZ basis.

    The two p_min outcomes are already singlets and together carry weight
    2*a0*a1; the two p_max outcomes are distilled with a fresh link.
    """
    a0, a1 = link.alpha0, link.alpha1
    singlets = 2 * a0 * a1
    return float(singlets + (1 - singlets) * min(1.0, zz_saturation(link)))


def scp_xz(link):
    """Average SCP of partial swapping in the XZ basis (all p_m = 1/4)."""
    return float(min(1.0, xz_saturation(link)))


def scp_curve(curve, alpha1_grid):
    """Evaluate `curve` (a function LinkState -> SCP) on a grid of alpha1.

    Returns:
        list of ScpCurvePoint
    """
    points = []
    for a1 in alpha1_grid:
        link = make_link_state(a1)
        points.append(ScpCurvePoint(float(link.alpha1), float(curve(link))))
    logging.debug(f"Evaluated SCP curve on {len(points)} points")
    return points
