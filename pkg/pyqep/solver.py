"""Threshold computation for entanglement percolation protocols.

A protocol is described by its SCP curve, the probability S(alpha1) that a
bond of the final lattice becomes a singlet. Its lower threshold solves
S(alpha1) = p_c of the final lattice; its upper threshold is the smallest
alpha1 with S = 1, found on the unclamped saturation expression.

Usage example:

    for row in table2():
        print(row.protocol, row.lower.value, row.upper.value)
"""

from dataclasses import dataclass
from enum import Enum
import logging

import numpy as np
from scipy import optimize

from pyqep import quantum_core
from pyqep.lattice import LatticeKind, classical_pc
from pyqep.measurement import (
    Objective, optimal_p_small, optimize_basis, xz_basis)
from pyqep.quantum_core import (
    make_link_state, outcome_bounds, saturation_margin, scp_xz, scp_zz,
    xz_saturation, zz_saturation)


ROOT_XTOL = 1e-12

# Agreement expected with the four published digits
PUBLISHED_TOLERANCE = 5e-4

MONOTONE_POINTS = 1001
MONOTONE_TOLERANCE = 1e-9

# Disagreement in p_small flagged by verify_optimal_structure
STRUCTURE_TOLERANCE = 1e-6


class BracketError(ArithmeticError):
    """The defining function does not change sign over [0, 1/2]."""


class MonotonicityError(ArithmeticError):
    """An SCP curve decreases somewhere on the checked grid."""

    def __init__(self, message, offending):
        super().__init__(message)
        self.offending = offending


class ThresholdKind(Enum):
    LOWER = 'lower'
    UPPER = 'upper'
    CUBIC_ROOT = 'cubic-root'
    CLASSICAL_PC = 'classical-pc'


@dataclass(frozen=True)
class ThresholdEstimate:
    value: float
    kind: ThresholdKind
    method: str
    residual: float
    stderr: float = None
    bracket: tuple = None
    converged: bool = True


@dataclass(frozen=True)
class ScpCurve:
    """SCP of a protocol as a function of the link state.

    `margin(link)` is the unclamped saturation expression minus 1: the curve
    equals 1 exactly where the margin is >= 0.
    """
    name: str
    label: str
    value: object
    margin: object

    def __call__(self, link):
        return self.value(link)


def _optimal_value(link):
    return optimize_basis(link)[1]


def _optimal_margin(link):
    # Over the two-value family the worst outcome is best at p_small = 1/4
    return saturation_margin(link, xz_basis())


def _full_optimal_value(link):
    return optimize_basis(link, Objective.FULL_SWAP)[1]


def _conversion_margin(link):
    return 2 * link.alpha1 - 1


CURVES = {
    'cep': ScpCurve('cep', "CEP", quantum_core.singlet_conversion_prob,
                    _conversion_margin),
    'zz': ScpCurve('zz', "QEP ZZ", scp_zz,
                   lambda link: zz_saturation(link) - 1),
    'xz': ScpCurve('xz', "QEP XZ", scp_xz,
                   lambda link: xz_saturation(link) - 1),
    'optimal': ScpCurve('optimal', "QEP optimal", _optimal_value,
                        _optimal_margin),
    'full-optimal': ScpCurve('full-optimal', "QEP optimal, full swap",
                             _full_optimal_value, _conversion_margin),
}


def get_curve(curve):
    if isinstance(curve, ScpCurve):
        return curve
    try:
        return CURVES[curve]
    except KeyError as e:
        raise ValueError(f"Unknown SCP curve '{curve}', expected one of "
                         f"{', '.join(CURVES)}") from e


def check_monotone(curve, points=MONOTONE_POINTS):
    """Return the alpha1 grid values where the curve decreases."""
    curve = get_curve(curve)
    grid = np.linspace(0, 0.5, points)
    values = np.array([curve(make_link_state(a1)) for a1 in grid])
    drops = np.flatnonzero(np.diff(values) < -MONOTONE_TOLERANCE)
    offending = [float(grid[i + 1]) for i in drops]
    if offending:
        logging.warning(f"SCP curve {curve.name} decreases at alpha1 = "
                        f"{offending[:5]}")
    return offending


def lower_threshold(curve, target_pc, verify=True, strict=False):
    """Smallest alpha1 with S(alpha1) = target_pc, by bisection.

    Args:
        curve: ScpCurve or registry name
        target_pc: critical bond density of the final lattice

    Kwargs:
        verify: check monotonicity of the curve first
        strict: raise MonotonicityError instead of warning
    """
    curve = get_curve(curve)
    if verify:
        offending = check_monotone(curve)
        if offending and strict:
            raise MonotonicityError(
                f"SCP curve {curve.name} is not monotone; bisection would "
                f"be ambiguous (first drop at alpha1 = {offending[0]})",
                offending)

    def f(a1):
        return curve(make_link_state(a1)) - target_pc

    f0, f1 = f(0.0), f(0.5)
    if not f0 < 0 < f1:
        raise BracketError(
            f"p_c = {target_pc} not bracketed by {curve.name}: S(0) = "
            f"{f0 + target_pc}, S(1/2) = {f1 + target_pc}")
    root, res = optimize.bisect(f, 0.0, 0.5, xtol=ROOT_XTOL,
                                full_output=True)
    residual = abs(f(root))
    logging.debug(f"lower_threshold({curve.name}, {target_pc:.6f}) = "
                  f"{root:.10f} in {res.iterations} steps, residual "
                  f"{residual:.2e}")
    return ThresholdEstimate(root, ThresholdKind.LOWER,
                             f"bisection of S_{curve.name} = p_c", residual)


def upper_threshold(curve):
    """Smallest alpha1 where the curve saturates at 1.

    Curves that saturate only at alpha1 = 1/2 give exactly 1/2.
    """
    curve = get_curve(curve)

    def margin(a1):
        return curve.margin(make_link_state(a1))

    if margin(0.5) <= 0:
        return ThresholdEstimate(0.5, ThresholdKind.UPPER,
                                 f"S_{curve.name} < 1 below alpha1 = 1/2",
                                 0.0)
    m0 = margin(0.0)
    if m0 >= 0:
        raise BracketError(
            f"S_{curve.name} is saturated already at alpha1 = 0 "
            f"(margin {m0})")
    root, res = optimize.bisect(margin, 0.0, 0.5, xtol=ROOT_XTOL,
                                full_output=True)
    residual = abs(margin(root))
    logging.debug(f"upper_threshold({curve.name}) = {root:.10f} in "
                  f"{res.iterations} steps, residual {residual:.2e}")
    return ThresholdEstimate(root, ThresholdKind.UPPER,
                             f"bisection of saturation of S_{curve.name}",
                             residual)


def cubic_root_alpha0():
    """Real root of a0^3 - a0^2 + a0 - 1/2, where ZZ distillation saturates."""
    def f(a0):
        return a0 ** 3 - a0 ** 2 + a0 - 0.5

    root = optimize.bisect(f, 0.5, 1.0, xtol=ROOT_XTOL)
    return ThresholdEstimate(root, ThresholdKind.CUBIC_ROOT,
                             "bisection on [1/2, 1]", abs(f(root)))


def optimal_lower_threshold():
    """Lower threshold of the optimised two-value basis on the honeycomb."""
    return lower_threshold(CURVES['optimal'],
                           classical_pc(LatticeKind.HEXAGONAL), strict=True)


@dataclass(frozen=True)
class ThresholdRow:
    protocol: str
    curve: str
    lower: ThresholdEstimate
    upper: ThresholdEstimate


def table2():
    """Lower and upper thresholds of CEP and QEP on the triangular lattice.

    CEP percolates the triangular lattice itself; the QEP rows percolate the
    honeycomb obtained by partial swapping.
    """
    pc_tri = classical_pc(LatticeKind.TRIANGULAR)
    pc_hex = classical_pc(LatticeKind.HEXAGONAL)
    rows = [ThresholdRow("CEP", 'cep', lower_threshold('cep', pc_tri),
                         upper_threshold('cep'))]
    for name in ('zz', 'xz'):
        rows.append(ThresholdRow(CURVES[name].label, name,
                                 lower_threshold(name, pc_hex),
                                 upper_threshold(name)))
    rows.append(ThresholdRow("QEP optimal", 'optimal',
                             optimal_lower_threshold(),
                             upper_threshold('optimal')))
    logging.info("Threshold table computed")
    return rows


def is_robust(row, cep_row):
    """Whether a protocol lowers the CEP threshold or saturates below 1/2."""
    return (row.lower.value < cep_row.lower.value
            or row.upper.value < 0.5 - ROOT_XTOL)


def verify_optimal_structure(grid):
    """Compare the optimiser with the closed-form saturating p_small.

    Only alpha1 where the closed form is interior to [p_min, 1/4] and the
    optimum is below 1 are checked.

    Returns:
        list of alpha1 values where the two disagree
    """
    flagged = []
    for a1 in grid:
        link = make_link_state(a1)
        p_min, _ = outcome_bounds(link)
        closed = optimal_p_small(link)
        if not p_min < closed < 0.25:
            continue
        meas, value = optimize_basis(link)
        if value >= 1 - quantum_core.TOLERANCE:
            continue
        if abs(meas.p_small - closed) > STRUCTURE_TOLERANCE:
            flagged.append(float(a1))
    if flagged:
        logging.warning(f"Optimiser departs from the saturating p_small at "
                        f"alpha1 = {flagged}")
    else:
        logging.info(f"Optimiser matches the saturating p_small on "
                     f"{len(grid)} points")
    return flagged


def table_rows(table):
    """Flatten a threshold table into dict rows for CSV or JSON output."""
    cep = next(r for r in table if r.curve == 'cep')
    return [{
        'protocol': r.protocol,
        'alpha_c': r.lower.value,
        'alpha_c_star': r.upper.value,
        'residual_lower': r.lower.residual,
        'residual_upper': r.upper.residual,
        'method_lower': r.lower.method,
        'method_upper': r.upper.method,
        'robust': r is not cep and is_robust(r, cep),
    } for r in table]
