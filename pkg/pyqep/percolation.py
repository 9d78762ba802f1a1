"""Bond percolation Monte Carlo engine.

Clusters are found with a disjoint-set forest compiled by numba. Every node
also stores its displacement (in torus periods) relative to its root, so a
cluster that closes a loop with non-zero displacement wraps the torus.

Each trial draws its own counter-based random stream from (seed, trial), so
estimates do not depend on the number of workers or on trial order, and the
same uniforms are reused for every p (common random numbers).
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
import logging

from numba import njit
import numpy as np

from pyqep.lattice import Boundary, LatticeKind, build
from pyqep.solver import ThresholdEstimate, ThresholdKind


# Bisection stops once the bracket on p is this narrow
PC_TOLERANCE = 5e-4

MAX_BISECTIONS = 30

BOOTSTRAP_SAMPLES = 200

# Crossing level of the wrapping probability that defines p_c
PC_LEVEL = 0.5

DEFAULT_WORKERS = 1

# Trials handed to a worker at a time
CHUNK_SIZE = 64


class Observable(Enum):
    WRAPPING = 'wrapping'
    CROSSING = 'crossing'
    TWO_POINT = 'two-point'


def boundary_for(observable):
    """Natural boundary condition of an observable."""
    if Observable(observable) is Observable.WRAPPING:
        return Boundary.PERIODIC
    return Boundary.OPEN


@njit(cache=True, nogil=True)
def _find(parent, offset, x):
    root = x
    dx = 0
    dy = 0
    while parent[root] != root:
        dx += offset[root, 0]
        dy += offset[root, 1]
        root = parent[root]
    # Point the whole path at the root, storing displacements to it
    while x != root:
        nxt = parent[x]
        ox = offset[x, 0]
        oy = offset[x, 1]
        offset[x, 0] = dx
        offset[x, 1] = dy
        parent[x] = root
        dx -= ox
        dy -= oy
        x = nxt
    return root


@njit(cache=True, nogil=True)
def _union(parent, size, offset, a, b, wx, wy):
    """Join a and b across an edge of winding (wx, wy).

    Returns True if the edge closes a loop that wraps the torus.
    """
    ra = _find(parent, offset, a)
    rb = _find(parent, offset, b)
    dax, day = offset[a, 0], offset[a, 1]
    dbx, dby = offset[b, 0], offset[b, 1]
    if ra == rb:
        return dax + wx - dbx != 0 or day + wy - dby != 0
    if size[ra] >= size[rb]:
        parent[rb] = ra
        offset[rb, 0] = dax + wx - dbx
        offset[rb, 1] = day + wy - dby
        size[ra] += size[rb]
    else:
        parent[ra] = rb
        offset[ra, 0] = dbx - wx - dax
        offset[ra, 1] = dby - wy - day
        size[rb] += size[ra]
    return False


@njit(cache=True, nogil=True)
def _forest(n):
    parent = np.arange(n)
    size = np.ones(n, dtype=np.int64)
    offset = np.zeros((n, 2), dtype=np.int64)
    return parent, size, offset


@njit(cache=True, nogil=True)
def _wraps(n, edges, winding, is_open):
    parent, size, offset = _forest(n)
    wrapped = False
    for e in range(edges.shape[0]):
        if is_open[e]:
            if _union(parent, size, offset, edges[e, 0], edges[e, 1],
                      winding[e, 0], winding[e, 1]):
                wrapped = True
    return wrapped


@njit(cache=True, nogil=True)
def _first_wrap(n, edges, winding, order):
    """Position in `order` of the first edge whose addition wraps."""
    parent, size, offset = _forest(n)
    for k in range(order.shape[0]):
        e = order[k]
        if _union(parent, size, offset, edges[e, 0], edges[e, 1],
                  winding[e, 0], winding[e, 1]):
            return k
    return -1


@njit(cache=True, nogil=True)
def _roots(n, edges, is_open, skip_wrapping, winding):
    parent, size, offset = _forest(n)
    for e in range(edges.shape[0]):
        if not is_open[e]:
            continue
        if skip_wrapping and (winding[e, 0] != 0 or winding[e, 1] != 0):
            continue
        _union(parent, size, offset, edges[e, 0], edges[e, 1], 0, 0)
    roots = np.empty(n, dtype=np.int64)
    for x in range(n):
        roots[x] = _find(parent, offset, x)
    return roots


@njit(cache=True, nogil=True)
def _connected(n, edges, is_open, a, b):
    parent, size, offset = _forest(n)
    for e in range(edges.shape[0]):
        if is_open[e]:
            _union(parent, size, offset, edges[e, 0], edges[e, 1], 0, 0)
    return _find(parent, offset, a) == _find(parent, offset, b)


@njit(cache=True, nogil=True)
def _crosses(n, edges, winding, is_open, left, right):
    roots = _roots(n, edges, is_open, True, winding)
    seen = np.zeros(n, dtype=np.bool_)
    for x in left:
        seen[roots[x]] = True
    for x in right:
        if seen[roots[x]]:
            return True
    return False


@dataclass(frozen=True, eq=False)
class BondConfig:
    """Open/closed state of every edge of a graph."""
    graph: object
    open_flags: np.ndarray

    def __post_init__(self):
        if len(self.open_flags) != self.graph.n_edges:
            raise ValueError(
                f"Got {len(self.open_flags)} bond flags for a graph of "
                f"{self.graph.n_edges} edges")

    @property
    def open_fraction(self):
        if not len(self.open_flags):
            return 0.0
        return float(np.mean(self.open_flags))


@dataclass(frozen=True)
class PercolationEstimate:
    probability_estimate: float
    stderr: float
    trials: int
    observable: Observable
    open_fraction: float = float('nan')

    @classmethod
    def from_counts(cls, hits, trials, observable, open_bonds=None,
                    bonds=None):
        est = hits / trials
        open_fraction = float('nan')
        if open_bonds is not None and bonds:
            open_fraction = open_bonds / bonds
        return cls(est, float(np.sqrt(est * (1 - est) / trials)), trials,
                   Observable(observable), open_fraction)


def trial_rng(seed, trial):
    """Independent counter-based generator for one trial."""
    return np.random.Generator(np.random.Philox(
        np.random.SeedSequence(seed, spawn_key=(trial,))))


def _check_probs(probs, n_edges):
    probs = np.asarray(probs, dtype=float)
    if np.any(probs < 0) or np.any(probs > 1):
        raise ValueError(f"Bond probabilities must be in [0, 1], got {probs}")
    if probs.ndim and probs.shape != (n_edges,):
        raise ValueError(
            f"Expected one probability per edge ({n_edges}), got "
            f"{probs.shape}")
    return probs


def sample_bonds(graph, p, rng):
    """Open each edge independently with probability p (scalar or per edge).

    Bonds open when a uniform draw falls below p, so configurations drawn
    from the same generator state are nested in p.
    """
    probs = _check_probs(p, graph.n_edges)
    return BondConfig(graph, rng.random(graph.n_edges) < probs)


def find_clusters(config):
    """Cluster label of every node, consecutive from 0."""
    g = config.graph
    roots = _roots(g.n_nodes, g.edges, config.open_flags, False, g.winding)
    _, labels = np.unique(roots, return_inverse=True)
    return labels


def observe(config, observable, pair=None):
    """Whether the configuration shows the observable event.

    Args:
        config: BondConfig
        observable: Observable

    Kwargs:
        pair: (A, B) nodes for Observable.TWO_POINT, defaults to the
            graph's far pair
    """
    g = config.graph
    observable = Observable(observable)
    if observable is Observable.WRAPPING:
        if not g.periodic:
            raise ValueError("Wrapping needs a periodic lattice")
        return bool(_wraps(g.n_nodes, g.edges, g.winding, config.open_flags))
    if observable is Observable.CROSSING:
        return bool(_crosses(g.n_nodes, g.edges, g.winding, config.open_flags,
                             g.column_nodes(0), g.column_nodes(g.width - 1)))
    a, b = pair if pair is not None else g.far_pair()
    return bool(_connected(g.n_nodes, g.edges, config.open_flags, a, b))


def run_trials(graph, sampler, observable, trials, seed, pair=None,
               workers=DEFAULT_WORKERS):
    """Count the trials in which `observable` occurs.

    Args:
        graph: LatticeGraph shared read-only by all workers
        sampler: function rng -> boolean array of open edges
        observable: Observable
        trials: number of trials
        seed: master seed

    Kwargs:
        pair: node pair for Observable.TWO_POINT
        workers: number of threads; does not change the result

    Returns:
        PercolationEstimate
    """
    if trials < 1:
        raise ValueError(f"Need at least one trial, got {trials}")
    observable = Observable(observable)
    if observable is Observable.TWO_POINT:
        pair = pair if pair is not None else graph.far_pair()
        if pair[0] == pair[1]:
            raise ValueError(f"Two-point nodes must differ, got {pair}")

    def chunk(start):
        hits, n_open = 0, 0
        for t in range(start, min(start + CHUNK_SIZE, trials)):
            config = BondConfig(graph, sampler(trial_rng(seed, t)))
            hits += observe(config, observable, pair)
            n_open += int(np.count_nonzero(config.open_flags))
        logging.debug(f"Trials {start}-{min(start + CHUNK_SIZE, trials)}: "
                      f"{hits} hits")
        return hits, n_open

    starts = range(0, trials, CHUNK_SIZE)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            counts = list(pool.map(chunk, starts))
    else:
        counts = [chunk(s) for s in starts]
    hits = sum(c[0] for c in counts)
    n_open = sum(c[1] for c in counts)
    return PercolationEstimate.from_counts(hits, trials, observable, n_open,
                                           trials * graph.n_edges)


def percolation_probability(graph, probs, observable, trials, seed,
                            pair=None, workers=DEFAULT_WORKERS):
    """Probability of `observable` with independent bonds open at `probs`."""
    probs = _check_probs(probs, graph.n_edges)

    def sampler(rng):
        return rng.random(graph.n_edges) < probs

    return run_trials(graph, sampler, observable, trials, seed, pair=pair,
                      workers=workers)


def wrapping_probability(kind, p, L, trials, seed, workers=DEFAULT_WORKERS):
    """Fraction of trials on an L x L torus with a wrapping cluster."""
    if L < 8:
        raise ValueError(f"Wrapping estimates need L >= 8, got {L}")
    graph = build(kind, L, L, Boundary.PERIODIC)
    return percolation_probability(graph, p, Observable.WRAPPING, trials,
                                   seed, workers=workers)


def wrap_thresholds(graph, trials, seed, workers=DEFAULT_WORKERS):
    """Critical p of every trial: the bond density at which it first wraps.

    Uses the same random streams as `percolation_probability`, so for any p
    the fraction of thresholds below p equals the wrapping probability.
    """
    if not graph.periodic:
        raise ValueError("Wrapping thresholds need a periodic lattice")

    def chunk(start):
        out = []
        for t in range(start, min(start + CHUNK_SIZE, trials)):
            u = trial_rng(seed, t).random(graph.n_edges)
            order = np.argsort(u, kind='stable')
            k = _first_wrap(graph.n_nodes, graph.edges, graph.winding, order)
            out.append(u[order[k]] if k >= 0 else np.inf)
        return out

    starts = range(0, trials, CHUNK_SIZE)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(chunk, starts))
    else:
        parts = [chunk(s) for s in starts]
    return np.concatenate([np.asarray(p, dtype=float) for p in parts])


def estimate_pc(kind, L, trials, seed, workers=DEFAULT_WORKERS):
    """Estimate the bond percolation threshold of `kind` on an L x L torus.

    Bisects p until the bracket around the crossing of PC_LEVEL is
    narrower than PC_TOLERANCE. The wrapping probability is a step function
    of p over the per-trial thresholds, so the bracket always holds the
    empirical crossing. The standard error comes from a bootstrap over
    trials.

    Returns:
        ThresholdEstimate of kind CLASSICAL_PC
    """
    if L < 16:
        raise ValueError(f"p_c estimates need L >= 16, got {L}")
    kind = LatticeKind(kind)
    graph = build(kind, L, L, Boundary.PERIODIC)
    thresholds = wrap_thresholds(graph, trials, seed, workers=workers)

    lo, hi = 0.0, 1.0
    converged = False
    for step in range(1, MAX_BISECTIONS + 1):
        mid = 0.5 * (lo + hi)
        est = float(np.mean(thresholds < mid))
        stderr = np.sqrt(est * (1 - est) / trials)
        logging.debug(f"estimate_pc({kind.value}) step {step}: p = {mid:.6f}"
                      f", P = {est:.4f} +/- {stderr:.4f}")
        if hi - lo <= PC_TOLERANCE:
            converged = True
            break
        if est < PC_LEVEL:
            lo = mid
        else:
            hi = mid
    if not converged:
        logging.warning(f"estimate_pc({kind.value}) did not converge after "
                        f"{MAX_BISECTIONS} steps, bracket [{lo}, {hi}]")

    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    finite = np.where(np.isfinite(thresholds), thresholds, 1.0)
    samples = rng.choice(finite, size=(BOOTSTRAP_SAMPLES, len(finite)))
    boot_stderr = float(np.std(np.median(samples, axis=1), ddof=1))
    crossing = float(np.median(finite))
    logging.info(f"p_c({kind.value}, L={L}) = {mid:.5f} +/- "
                 f"{boot_stderr:.5f} after {step} bisection steps, "
                 f"empirical crossing {crossing:.5f}")
    return ThresholdEstimate(
        mid, ThresholdKind.CLASSICAL_PC,
        f"wrapping bisection, L={L}, {trials} trials",
        abs(est - PC_LEVEL), stderr=boot_stderr, bracket=(lo, hi),
        converged=converged)


def two_point_connectivity(graph, probs, a, b, trials, seed,
                           workers=DEFAULT_WORKERS):
    """Probability that nodes a and b end up in the same cluster."""
    if a == b:
        raise ValueError(f"Two-point nodes must differ, got {a} twice")
    return percolation_probability(graph, probs, Observable.TWO_POINT,
                                   trials, seed, pair=(a, b), workers=workers)


def sweep(kind, p_grid, L, trials, seed, observable=Observable.WRAPPING,
          workers=DEFAULT_WORKERS):
    """Estimate `observable` on an L x L lattice for every p in p_grid.

    Returns:
        list of dict rows with keys p, estimate, stderr, trials, L, kind,
        observable, seed
    """
    kind = LatticeKind(kind)
    observable = Observable(observable)
    graph = build(kind, L, L, boundary_for(observable))
    rows = []
    for p in p_grid:
        est = percolation_probability(graph, p, observable, trials, seed,
                                      workers=workers)
        rows.append({
            'p': float(p),
            'estimate': est.probability_estimate,
            'stderr': est.stderr,
            'trials': trials,
            'L': L,
            'kind': kind.value,
            'observable': observable.value,
            'seed': seed,
        })
    return rows
