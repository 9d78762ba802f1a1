"""Classical and quantum entanglement percolation protocols.

Each protocol turns the links of a lattice into independent stochastic
bonds: a bond is open when the local operations leave a singlet on it.
Swapping along open bonds is deterministic, so a protocol succeeds exactly
when the open bonds connect the nodes of interest.

In PER_OUTCOME mode every swap samples its Bell measurement outcome and the
bond opens with the conditional success probability of that outcome. In
EFFECTIVE_RATE mode every bond opens with the averaged closed-form rate.
The two are equal in distribution; PER_OUTCOME is kept for auditing.
"""

from dataclasses import dataclass, replace
from enum import Enum
import logging
import math

import numpy as np

from pyqep.lattice import (
    Boundary, LatticeKind, Payload, build, transform_kagome_to_square,
    transform_tri_to_hex)
from pyqep.measurement import Basis, MeasurementSpec, resolve_basis
from pyqep.percolation import (
    DEFAULT_WORKERS, Observable, boundary_for, percolation_probability,
    run_trials)
from pyqep.quantum_core import (
    distill_prob, full_swap_avg_scp, make_link_state, outcome_lambda,
    partial_swap_avg_scp, singlet_conversion_prob)


# Allowed distance of the PER_OUTCOME bond rate from its closed form
RATE_SIGMAS = 5


class ProtocolName(Enum):
    CEP = 'cep'
    QEP_TRI_HEX = 'qep-tri-hex'
    QEP_KAGOME_SQUARE = 'qep-kagome-square'


class Mode(Enum):
    PER_OUTCOME = 'per-outcome'
    EFFECTIVE_RATE = 'effective-rate'


@dataclass(frozen=True)
class ProtocolSpec:
    """Protocol with its link entanglement and measurement choice.

    Kwargs:
        basis: Basis, its name, or a MeasurementSpec (QEP only)
        mode: Mode of bond sampling
        kind: lattice of a CEP run
    """
    name: ProtocolName
    alpha1: float
    basis: object = None
    mode: Mode = Mode.EFFECTIVE_RATE
    kind: LatticeKind = LatticeKind.TRIANGULAR

    def __post_init__(self):
        object.__setattr__(self, 'name', ProtocolName(self.name))
        object.__setattr__(self, 'mode', Mode(self.mode))
        object.__setattr__(self, 'kind', LatticeKind(self.kind))
        if self.name is ProtocolName.CEP:
            object.__setattr__(self, 'basis', None)
        elif self.basis is None:
            object.__setattr__(self, 'basis', Basis.ZZ)
        elif not isinstance(self.basis, MeasurementSpec):
            object.__setattr__(self, 'basis', Basis(self.basis))
        # Validates alpha1 and the basis
        self.measurement()
        if (self.name is ProtocolName.QEP_KAGOME_SQUARE
                and self.basis is not Basis.ZZ):
            logging.warning(
                f"{self.name.value} with basis {self.basis_name}: only the ZZ "
                f"full swap keeps the swapped bonds at 2 alpha1, expect a "
                f"lower bond rate")

    @property
    def link(self):
        return make_link_state(self.alpha1)

    def measurement(self):
        if self.basis is None:
            return None
        return resolve_basis(self.basis, self.link)

    @property
    def basis_name(self):
        if self.basis is None:
            return ""
        if isinstance(self.basis, MeasurementSpec):
            return str(self.basis)
        return self.basis.value


@dataclass(frozen=True)
class ProtocolRun:
    spec: ProtocolSpec
    L: int
    width: int
    height: int
    trials: int
    seed: int
    observable: Observable
    estimate: object
    empirical_bond_rate: float
    expected_bond_rate: float

    def as_row(self):
        return {
            'protocol': self.spec.name.value,
            'basis': self.spec.basis_name,
            'mode': self.spec.mode.value,
            'alpha1': self.spec.alpha1,
            'estimate': self.estimate.probability_estimate,
            'stderr': self.estimate.stderr,
            'empirical_bond_rate': self.empirical_bond_rate,
            'expected_bond_rate': self.expected_bond_rate,
            'L': self.L,
            'trials': self.trials,
            'seed': self.seed,
        }


def sample_double_links(link, meas, n, rng):
    """Open/closed state of n double links after partial swap and distillation.

    For each double link a measurement outcome m is drawn with probability
    p_m, then the link opens with probability distill_prob(a1, lambda_m).
    """
    probs = np.array(meas.probs)
    outcomes = rng.choice(4, size=n, p=probs / probs.sum())
    success = distill_prob(link.alpha1, outcome_lambda(link, probs))
    return rng.random(n) < np.asarray(success)[outcomes]


def run_cep(kind, alpha1, L, trials, seed, observable=Observable.WRAPPING,
            workers=DEFAULT_WORKERS):
    """Classical entanglement percolation: bond percolation at p = 2 a1."""
    spec = ProtocolSpec(ProtocolName.CEP, alpha1, kind=kind)
    p = singlet_conversion_prob(spec.link)
    graph = build(spec.kind, L, L, boundary_for(observable))
    est = percolation_probability(graph, p, observable, trials, seed,
                                  workers=workers)
    return _finish(spec, L, graph, trials, seed, observable, est, p)


def run_qep_tri_hex(alpha1, basis, mode, L, trials, seed,
                    observable=Observable.WRAPPING, workers=DEFAULT_WORKERS):
    """Partial swapping from triangular to hexagonal, then percolation.

    The honeycomb result is always periodic; L must be a multiple of 3.
    """
    spec = ProtocolSpec(ProtocolName.QEP_TRI_HEX, alpha1, basis, mode)
    link, meas = spec.link, spec.measurement()
    plan = transform_tri_to_hex(build(LatticeKind.TRIANGULAR, L, L,
                                      Boundary.PERIODIC))
    bonds = plan.bond_graph()
    rate = partial_swap_avg_scp(link, meas)
    if spec.mode is Mode.EFFECTIVE_RATE:
        est = percolation_probability(bonds, rate, observable, trials, seed,
                                      workers=workers)
    else:
        def sampler(rng):
            return sample_double_links(link, meas, bonds.n_edges, rng)
        est = run_trials(bonds, sampler, observable, trials, seed,
                         workers=workers)
    return _finish(spec, L, bonds, trials, seed, observable, est, rate)


def run_qep_kagome_square(alpha1, L, trials, seed,
                          observable=Observable.WRAPPING, basis=Basis.ZZ,
                          mode=Mode.EFFECTIVE_RATE, workers=DEFAULT_WORKERS):
    """Full swapping from kagome to square, then percolation.

    Swap outcome bonds open with the full-swap SCP of the basis (2 a1 for
    ZZ), the remaining bonds by singlet conversion with 2 a1.
    """
    spec = ProtocolSpec(ProtocolName.QEP_KAGOME_SQUARE, alpha1, basis, mode)
    link, meas = spec.link, spec.measurement()
    plan = transform_kagome_to_square(build(LatticeKind.KAGOME, L, L,
                                            Boundary.PERIODIC))
    graph = plan.bond_graph()
    swapped = graph.payload == Payload.SWAP_OUTCOME
    conversion = singlet_conversion_prob(link)
    full = full_swap_avg_scp(link, meas)
    probs = np.where(swapped, full, conversion)
    if spec.mode is Mode.EFFECTIVE_RATE:
        est = percolation_probability(graph, probs, observable, trials, seed,
                                      workers=workers)
    else:
        outcome_probs = np.array(meas.probs)
        outcome_scp = 2 * np.asarray(outcome_lambda(link, outcome_probs))
        n_swapped = int(np.count_nonzero(swapped))

        def sampler(rng):
            u = rng.random(graph.n_edges)
            p = np.full(graph.n_edges, conversion)
            m = rng.choice(4, size=n_swapped,
                           p=outcome_probs / outcome_probs.sum())
            p[swapped] = outcome_scp[m]
            return u < p
        est = run_trials(graph, sampler, observable, trials, seed,
                         workers=workers)
    return _finish(spec, L, graph, trials, seed, observable, est,
                   float(np.mean(probs)))


def _finish(spec, L, graph, trials, seed, observable, est, expected):
    result = ProtocolRun(spec, L, graph.width, graph.height, trials, seed,
                         Observable(observable), est, est.open_fraction,
                         float(expected))
    if spec.mode is Mode.PER_OUTCOME:
        n = trials * graph.n_edges
        sigma = math.sqrt(expected * (1 - expected) / n)
        if abs(est.open_fraction - expected) > RATE_SIGMAS * sigma + 1e-12:
            logging.warning(
                f"Bond rate {est.open_fraction:.5f} of {spec.name.value} is "
                f"more than {RATE_SIGMAS} sigma from {expected:.5f}")
    logging.info(
        f"{spec.name.value} alpha1={spec.alpha1} {spec.basis_name} "
        f"{spec.mode.value}: {Observable(observable).value} = "
        f"{est.probability_estimate:.4f} +/- {est.stderr:.4f}")
    return result


def compatible_size(spec, L):
    """Smallest lattice size >= L that the protocol can be run on."""
    if spec.name is ProtocolName.QEP_TRI_HEX:
        return -(-L // 3) * 3
    if spec.name is ProtocolName.QEP_KAGOME_SQUARE or (
            spec.kind is LatticeKind.KAGOME):
        return L + L % 2
    return L


def run(spec, L, trials, seed, observable=Observable.WRAPPING,
        workers=DEFAULT_WORKERS):
    """Run a ProtocolSpec on an L x L lattice."""
    if spec.name is ProtocolName.CEP:
        return run_cep(spec.kind, spec.alpha1, L, trials, seed, observable,
                       workers=workers)
    if spec.name is ProtocolName.QEP_TRI_HEX:
        return run_qep_tri_hex(spec.alpha1, spec.basis, spec.mode, L, trials,
                               seed, observable, workers=workers)
    return run_qep_kagome_square(spec.alpha1, L, trials, seed, observable,
                                 basis=spec.basis, mode=spec.mode,
                                 workers=workers)


def compare(specs, alpha1_grid, L, trials, seed,
            observable=Observable.WRAPPING, workers=DEFAULT_WORKERS):
    """Run every protocol at every alpha1 of the grid.

    L is rounded up per protocol to a compatible size, which is reported
    in the `L` column.

    Returns:
        list of dict rows, see ProtocolRun.as_row
    """
    if not len(alpha1_grid):
        raise ValueError("compare needs at least one alpha1 value")
    rows = []
    for spec in specs:
        size = compatible_size(spec, L)
        if size != L:
            logging.info(f"Using L = {size} instead of {L} for "
                         f"{spec.name.value}")
        for a1 in alpha1_grid:
            result = run(replace(spec, alpha1=float(a1)), size, trials, seed,
                         observable, workers=workers)
            row = result.as_row()
            if spec.name is ProtocolName.CEP:
                row['protocol'] = f"cep-{spec.kind.value}"
            rows.append(row)
    return rows
