"""Bell measurements on the middle qubits of an entanglement swap.

A Bell measurement is represented only by the orderless multiset of its four
outcome probabilities. Any multiset with sum 1 and every entry within
`quantum_core.outcome_bounds(link)` is realisable.

Usage example:

    link = make_link_state(0.3)
    meas, value = optimize_basis(link)
    meas.probs      # (0.23243, 0.23243, 0.26757, 0.26757)
"""

from dataclasses import dataclass
from enum import Enum
import logging

import numpy as np
from scipy import optimize

from pyqep import quantum_core
from pyqep.quantum_core import (
    distill_prob, full_swap_avg_scp, outcome_bounds, outcome_lambda,
    partial_swap_avg_scp)


# Coarse grid over p_small before golden-section refinement
GRID_POINTS = 1024

# Tolerance on p_small of the refinement step
REFINE_XTOL = 1e-12

# Points per free dimension in the four-outcome validation search
EXHAUSTIVE_POINTS = 50

# Grid values this close to 1 are already optimal
SATURATED = 1 - 1e-15


@dataclass(frozen=True)
class MeasurementSpec:
    """Orderless multiset of the four outcome probabilities p_m.

    Probabilities are stored sorted, so equality and hashing ignore the
    order in which outcomes were given.
    """
    probs: tuple

    def __post_init__(self):
        probs = tuple(sorted(float(p) for p in self.probs))
        if len(probs) != 4:
            raise ValueError(
                f"A Bell measurement has 4 outcomes, got {len(probs)}")
        if abs(sum(probs) - 1) > quantum_core.NORMALIZATION_TOLERANCE:
            raise ValueError(
                f"Outcome probabilities must sum to 1, got {sum(probs)}")
        object.__setattr__(self, 'probs', probs)

    @property
    def p_small(self):
        return self.probs[0]

    def is_valid_for(self, link):
        p_min, p_max = outcome_bounds(link)
        tol = quantum_core.TOLERANCE
        return all(p_min - tol <= p <= p_max + tol for p in self.probs)

    def check(self, link):
        """Raise ValueError unless every outcome is within link's bounds."""
        if not self.is_valid_for(link):
            p_min, p_max = outcome_bounds(link)
            raise ValueError(
                f"Measurement {self.probs} not valid for {link}: every "
                f"outcome must lie in [{p_min:.6g}, {p_max:.6g}]")

    def __str__(self):
        return "{" + ", ".join(f"{p:.6g}" for p in self.probs) + "}"


@dataclass(frozen=True)
class TwoValueBasis:
    """Measurements with outcomes (p, p, 1/2 - p, 1/2 - p)."""
    p_small: float

    def spec(self):
        p = self.p_small
        return MeasurementSpec((p, p, 0.5 - p, 0.5 - p))


class Basis(Enum):
    ZZ = 'zz'
    XZ = 'xz'
    OPTIMAL = 'optimal'


class Objective(Enum):
    PARTIAL_SWAP = 'partial'
    FULL_SWAP = 'full'


def zz_basis(link):
    """Two singlet outcomes at p_min and two at p_max."""
    p_min, p_max = outcome_bounds(link)
    return MeasurementSpec((p_min, p_min, p_max, p_max))


def xz_basis():
    return MeasurementSpec((0.25, 0.25, 0.25, 0.25))


def two_value_basis(link, p_small):
    """Member of the two-value family, for p_min <= p_small <= 1/4.

    The endpoints reproduce `zz_basis(link)` and `xz_basis()` exactly.
    """
    p_min, _ = outcome_bounds(link)
    tol = quantum_core.TOLERANCE
    if not p_min - tol <= p_small <= 0.25 + tol:
        raise ValueError(
            f"p_small must be between p_min = {p_min:.6g} and 1/4, got "
            f"{p_small}")
    if abs(p_small - p_min) <= tol:
        return zz_basis(link)
    if abs(p_small - 0.25) <= tol:
        return xz_basis()
    return TwoValueBasis(p_small).spec()


def optimal_p_small(link):
    """Closed-form p_small where the small-outcome distillation saturates.

    Returns a0^2 a1 / sqrt(1 - 2 a1) clamped to [p_min, 1/4], and 1/4 at
    alpha1 = 1/2 where the expression is singular.
    """
    p_min, _ = outcome_bounds(link)
    if link.alpha1 >= 0.5 - quantum_core.TOLERANCE:
        return 0.25
    p = link.alpha0 ** 2 * link.alpha1 / np.sqrt(1 - 2 * link.alpha1)
    return float(min(max(p, p_min), 0.25))


def _outcome_values(link, probs, objective):
    # Per-outcome contribution to the objective, element-wise over probs
    lams = outcome_lambda(link, probs)
    if objective is Objective.FULL_SWAP:
        return 2 * probs * lams
    return probs * distill_prob(link.alpha1, lams)


def family_value(link, p_small, objective=Objective.PARTIAL_SWAP):
    """Objective of the two-value family, vectorised over p_small."""
    p = np.asarray(p_small, dtype=float)
    value = 2 * (_outcome_values(link, p, objective)
                 + _outcome_values(link, 0.5 - p, objective))
    return quantum_core._output(value)


def evaluate(link, meas, objective=Objective.PARTIAL_SWAP):
    if objective is Objective.FULL_SWAP:
        return full_swap_avg_scp(link, meas)
    return partial_swap_avg_scp(link, meas)


def optimize_basis(link, objective=Objective.PARTIAL_SWAP):
    """Find the two-value measurement maximising `objective` for `link`.

    A GRID_POINTS grid over [p_min, 1/4] is refined by golden-section search
    around the best grid point, or by bounded search when the best point is
    an endpoint. The search is deterministic.

    Args:
        link: LinkState of both input pairs

    Kwargs:
        objective: Objective.PARTIAL_SWAP or Objective.FULL_SWAP

    Returns:
        (MeasurementSpec, value)
    """
    p_min, _ = outcome_bounds(link)
    if 0.25 - p_min <= quantum_core.TOLERANCE:
        meas = xz_basis()
        return meas, evaluate(link, meas, objective)

    grid = np.linspace(p_min, 0.25, GRID_POINTS)
    values = family_value(link, grid, objective)
    i = int(np.argmax(values))
    best_p, best_value = float(grid[i]), float(values[i])
    if best_value >= SATURATED:
        logging.debug(f"Objective saturated on grid at p_small = {best_p}")
        return two_value_basis(link, best_p), best_value

    def negative(p):
        return -float(family_value(link, min(max(p, p_min), 0.25),
                                   objective))

    interior = 0 < i < GRID_POINTS - 1
    if interior and values[i] > values[i - 1] and values[i] > values[i + 1]:
        res = optimize.minimize_scalar(
            negative, bracket=(grid[i - 1], grid[i], grid[i + 1]),
            method='golden', options={'xtol': REFINE_XTOL})
    else:
        res = optimize.minimize_scalar(
            negative, bounds=(p_min, 0.25), method='bounded',
            options={'xatol': REFINE_XTOL})
    refined_p = min(max(float(res.x), p_min), 0.25)
    refined_value = -negative(refined_p)
    logging.debug(
        f"optimize_basis({link}): grid {best_p:.8g} -> {best_value:.10g}, "
        f"refined {refined_p:.8g} -> {refined_value:.10g}")
    if refined_value > best_value:
        best_p, best_value = refined_p, refined_value
    return two_value_basis(link, best_p), best_value


def exhaustive_search(link, objective=Objective.PARTIAL_SWAP,
                      points=EXHAUSTIVE_POINTS):
    """Search all four-outcome measurements on a coarse grid.

    Three outcomes range over `points` values each in [p_min, p_max]; the
    fourth is fixed by normalisation and kept only when within bounds.

    Returns:
        (MeasurementSpec, value) of the best grid measurement
    """
    p_min, p_max = outcome_bounds(link)
    if p_max - p_min <= quantum_core.TOLERANCE:
        meas = xz_basis()
        return meas, evaluate(link, meas, objective)
    axis = np.linspace(p_min, p_max, points)
    p1, p2, p3 = (a.ravel() for a in np.meshgrid(axis, axis, axis,
                                                 indexing='ij'))
    p4 = 1 - p1 - p2 - p3
    tol = quantum_core.TOLERANCE
    keep = (p4 >= p_min - tol) & (p4 <= p_max + tol)
    probs = np.stack([p1[keep], p2[keep], p3[keep],
                      np.clip(p4[keep], p_min, p_max)], axis=1)
    values = _outcome_values(link, probs, objective).sum(axis=1)
    i = int(np.argmax(values))
    logging.debug(
        f"exhaustive_search({link}): {len(values)} measurements, best "
        f"{probs[i]} -> {values[i]:.10g}")
    row = probs[i]
    # Renormalise after clipping so MeasurementSpec accepts the row
    meas = MeasurementSpec(tuple(row / row.sum()))
    return meas, evaluate(link, meas, objective)


def resolve_basis(basis, link):
    """Turn a Basis name (or a MeasurementSpec) into a MeasurementSpec."""
    if isinstance(basis, MeasurementSpec):
        basis.check(link)
        return basis
    basis = Basis(basis)
    if basis is Basis.ZZ:
        return zz_basis(link)
    if basis is Basis.XZ:
        return xz_basis()
    meas, _ = optimize_basis(link)
    return meas