from collections import deque
import itertools
import os
import unittest

import numpy as np

from pyqep.lattice import (
    Boundary, LatticeGraph, LatticeKind, build, classical_pc)
from pyqep.percolation import (
    PC_TOLERANCE, BondConfig, Observable, estimate_pc, find_clusters, observe,
    percolation_probability, run_trials, sample_bonds, sweep, trial_rng,
    two_point_connectivity, wrap_thresholds, wrapping_probability)
from pyqep.solver import ThresholdKind


SLOW = bool(os.environ.get('PYQEP_SLOW'))


def plain_graph(n, edges):
    """Open-boundary graph of n nodes with the given edges."""
    edges = np.asarray(edges, dtype=int).reshape(-1, 2)
    zeros = np.zeros(len(edges), dtype=int)
    return LatticeGraph(LatticeKind.SQUARE, n, 1, Boundary.OPEN, edges,
                        np.zeros((len(edges), 2), dtype=int), zeros, zeros)


def components(n, edges, open_flags):
    """Component index of every node by breadth-first search."""
    adjacency = [[] for _ in range(n)]
    for (a, b), is_open in zip(edges, open_flags):
        if is_open:
            adjacency[a].append(b)
            adjacency[b].append(a)
    label = [-1] * n
    for start in range(n):
        if label[start] >= 0:
            continue
        label[start] = start
        queue = deque([start])
        while queue:
            x = queue.popleft()
            for y in adjacency[x]:
                if label[y] < 0:
                    label[y] = start
                    queue.append(y)
    return label


def edges_where(graph, bond_type, y=None, x=None):
    keep = graph.bond_type == bond_type
    coords = np.array([graph.coords(a) for a in graph.edges[:, 0]])
    if y is not None:
        keep &= coords[:, 1] == y
    if x is not None:
        keep &= coords[:, 0] == x
    return keep


class TestClusters(unittest.TestCase):
    def test_against_breadth_first_search(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            n = int(rng.integers(1, 13))
            m = int(rng.integers(0, 20))
            edges = rng.integers(0, n, size=(m, 2))
            graph = plain_graph(n, edges)
            flags = rng.random(m) < 0.5
            labels = find_clusters(BondConfig(graph, flags))
            expected = components(n, edges.tolist(), flags)
            for a, b in itertools.combinations(range(n), 2):
                self.assertEqual(labels[a] == labels[b],
                                 expected[a] == expected[b])

    def test_all_closed_and_all_open(self):
        graph = build(LatticeKind.TRIANGULAR, 4, 4)
        closed = find_clusters(BondConfig(graph, np.zeros(48, dtype=bool)))
        np.testing.assert_array_equal(closed, np.arange(16))
        full = find_clusters(BondConfig(graph, np.ones(48, dtype=bool)))
        np.testing.assert_array_equal(full, 0)

    def test_config_length(self):
        graph = build(LatticeKind.SQUARE, 4, 4)
        with self.assertRaises(ValueError):
            BondConfig(graph, np.ones(31, dtype=bool))


class TestWrapping(unittest.TestCase):
    def setUp(self):
        self.graph = build(LatticeKind.SQUARE, 8, 8)

    def test_open_row_wraps(self):
        flags = edges_where(self.graph, 0, y=0)
        self.assertEqual(np.count_nonzero(flags), 8)
        self.assertTrue(observe(BondConfig(self.graph, flags),
                                Observable.WRAPPING))

    def test_open_column_wraps(self):
        flags = edges_where(self.graph, 1, x=3)
        self.assertTrue(observe(BondConfig(self.graph, flags),
                                Observable.WRAPPING))

    def test_plaquette_does_not_wrap(self):
        g = self.graph
        cells = [(0, 0, 0), (0, 0, 1), (1, 0, 1), (0, 1, 0)]
        flags = np.zeros(g.n_edges, dtype=bool)
        for x, y, bt in cells:
            flags |= edges_where(g, bt, y=y, x=x)
        self.assertEqual(np.count_nonzero(flags), 4)
        self.assertFalse(observe(BondConfig(g, flags), Observable.WRAPPING))

    def test_spanning_tree_does_not_wrap(self):
        flags = np.all(self.graph.winding == 0, axis=1)
        config = BondConfig(self.graph, flags)
        np.testing.assert_array_equal(find_clusters(config), 0)
        self.assertFalse(observe(config, Observable.WRAPPING))

    def test_sheared_torus(self):
        graph = build(LatticeKind.HEXAGONAL, 6, 2, shear=2)
        flags = np.all(graph.winding == 0, axis=1)
        self.assertFalse(observe(BondConfig(graph, flags),
                                 Observable.WRAPPING))
        self.assertTrue(observe(BondConfig(graph, np.ones(36, dtype=bool)),
                                Observable.WRAPPING))

    def test_needs_periodic(self):
        graph = build(LatticeKind.SQUARE, 8, 8, Boundary.OPEN)
        with self.assertRaises(ValueError):
            observe(BondConfig(graph, np.ones(graph.n_edges, dtype=bool)),
                    Observable.WRAPPING)

    def test_crossing(self):
        graph = build(LatticeKind.SQUARE, 8, 8, Boundary.OPEN)
        flags = edges_where(graph, 0, y=4)
        self.assertTrue(observe(BondConfig(graph, flags),
                                Observable.CROSSING))
        flags = edges_where(graph, 1, x=4)
        self.assertFalse(observe(BondConfig(graph, flags),
                                 Observable.CROSSING))

    def test_crossing_ignores_wrapping_edges(self):
        flags = edges_where(self.graph, 1, x=0) | edges_where(
            self.graph, 0, x=7)
        self.assertTrue(observe(BondConfig(self.graph, flags),
                                Observable.WRAPPING))
        self.assertFalse(observe(BondConfig(self.graph, flags),
                                 Observable.CROSSING))


class TestSampling(unittest.TestCase):
    def test_extremes(self):
        graph = build(LatticeKind.SQUARE, 8, 8)
        rng = trial_rng(0, 0)
        self.assertFalse(sample_bonds(graph, 0.0, rng).open_flags.any())
        self.assertTrue(sample_bonds(graph, 1.0, rng).open_flags.all())

    def test_open_fraction(self):
        graph = build(LatticeKind.SQUARE, 224, 224)
        config = sample_bonds(graph, 0.5, trial_rng(3, 0))
        sigma = np.sqrt(0.25 / graph.n_edges)
        self.assertLess(abs(config.open_fraction - 0.5), 5 * sigma)

    def test_invalid_probability(self):
        graph = build(LatticeKind.SQUARE, 8, 8)
        with self.assertRaises(ValueError):
            sample_bonds(graph, 1.5, trial_rng(0, 0))
        with self.assertRaises(ValueError):
            sample_bonds(graph, np.full(5, 0.5), trial_rng(0, 0))

    def test_trial_streams(self):
        a = trial_rng(42, 3).random(8)
        np.testing.assert_array_equal(a, trial_rng(42, 3).random(8))
        self.assertFalse(np.array_equal(a, trial_rng(42, 4).random(8)))


class TestEstimates(unittest.TestCase):
    def setUp(self):
        self.graph = build(LatticeKind.SQUARE, 8, 8)

    def test_extreme_probabilities(self):
        for observable in (Observable.WRAPPING, Observable.TWO_POINT):
            est = percolation_probability(self.graph, 0.0, observable, 50, 1)
            self.assertEqual(est.probability_estimate, 0.0)
            self.assertEqual(est.stderr, 0.0)
            est = percolation_probability(self.graph, 1.0, observable, 50, 1)
            self.assertEqual(est.probability_estimate, 1.0)
            self.assertEqual(est.open_fraction, 1.0)

    def test_reproducible_across_workers(self):
        one = percolation_probability(self.graph, 0.5, Observable.WRAPPING,
                                      300, 99)
        again = percolation_probability(self.graph, 0.5, Observable.WRAPPING,
                                        300, 99)
        many = percolation_probability(self.graph, 0.5, Observable.WRAPPING,
                                       300, 99, workers=4)
        self.assertEqual(one, again)
        self.assertEqual(one, many)

    def test_common_random_numbers(self):
        ps = np.linspace(0.3, 0.7, 9)
        est = [percolation_probability(self.graph, p, Observable.WRAPPING,
                                       200, 5).probability_estimate
               for p in ps]
        self.assertTrue(np.all(np.diff(est) >= 0))

    def test_wrap_thresholds(self):
        thresholds = wrap_thresholds(self.graph, 200, 11)
        self.assertEqual(len(thresholds), 200)
        self.assertTrue(np.all(thresholds <= 1))
        for p in (0.4, 0.5, 0.6):
            est = wrapping_probability(LatticeKind.SQUARE, p, 8, 200, 11)
            self.assertAlmostEqual(est.probability_estimate,
                                   np.count_nonzero(thresholds < p) / 200,
                                   delta=1e-12)

    def test_wrapping_needs_size(self):
        with self.assertRaises(ValueError):
            wrapping_probability(LatticeKind.SQUARE, 0.5, 4, 10, 0)

    def test_single_edge(self):
        graph = plain_graph(2, [[0, 1]])
        est = two_point_connectivity(graph, 0.3, 0, 1, 10000, 2)
        self.assertLess(abs(est.probability_estimate - 0.3),
                        5 * np.sqrt(0.21 / 10000))
        with self.assertRaises(ValueError):
            two_point_connectivity(graph, 0.3, 1, 1, 10, 2)

    def test_two_point_exact(self):
        graph = build(LatticeKind.SQUARE, 3, 3, Boundary.OPEN)
        a, b = graph.far_pair()
        edges = graph.edges.tolist()
        exact = 0.0
        for flags in itertools.product((False, True), repeat=len(edges)):
            label = components(graph.n_nodes, edges, flags)
            if label[a] == label[b]:
                exact += 0.5 ** len(edges)
        est = two_point_connectivity(graph, 0.5, a, b, 20000, 8)
        sigma = np.sqrt(exact * (1 - exact) / 20000)
        self.assertLess(abs(est.probability_estimate - exact), 5 * sigma)

    def test_two_point_same_streams(self):
        graph = build(LatticeKind.TRIANGULAR, 6, 6, Boundary.OPEN)
        a, b = graph.far_pair()
        edges = graph.edges.tolist()
        hits = 0
        for t in range(300):
            config = sample_bonds(graph, 0.4, trial_rng(21, t))
            label = components(graph.n_nodes, edges, config.open_flags)
            hits += label[a] == label[b]
        est = two_point_connectivity(graph, 0.4, a, b, 300, 21)
        self.assertEqual(est.probability_estimate, hits / 300)

    def test_run_trials(self):
        est = run_trials(self.graph,
                         lambda rng: np.ones(self.graph.n_edges, dtype=bool),
                         Observable.CROSSING, 10, 0)
        self.assertEqual(est.probability_estimate, 1.0)
        self.assertEqual(est.observable, Observable.CROSSING)
        with self.assertRaises(ValueError):
            run_trials(self.graph, None, Observable.WRAPPING, 0, 0)

    def test_sweep(self):
        rows = sweep(LatticeKind.TRIANGULAR, [0.0, 1.0], 8, 20, 3)
        self.assertEqual([r['estimate'] for r in rows], [0.0, 1.0])
        self.assertEqual(set(rows[0]), {'p', 'estimate', 'stderr', 'trials',
                                        'L', 'kind', 'observable', 'seed'})
        self.assertEqual(rows[0]['kind'], 'triangular')

    def test_estimate_pc(self):
        est = estimate_pc(LatticeKind.SQUARE, 16, 400, 4)
        self.assertEqual(est.kind, ThresholdKind.CLASSICAL_PC)
        self.assertLess(abs(est.value - 0.5), 0.06)
        lo, hi = est.bracket
        self.assertTrue(lo <= est.value <= hi)
        self.assertGreater(est.stderr, 0)
        with self.assertRaises(ValueError):
            estimate_pc(LatticeKind.SQUARE, 8, 10, 0)

    def test_estimate_pc_brackets_crossing(self):
        est = estimate_pc(LatticeKind.KAGOME, 16, 400, 4)
        lo, hi = est.bracket
        self.assertTrue(est.converged)
        self.assertLessEqual(hi - lo, PC_TOLERANCE)
        thresholds = wrap_thresholds(build(LatticeKind.KAGOME, 16, 16), 400,
                                     4)
        self.assertLess(np.mean(thresholds < lo), 0.5)
        self.assertGreaterEqual(np.mean(thresholds < hi), 0.5)


@unittest.skipUnless(SLOW, "set PYQEP_SLOW=1 to run")
class TestThresholdsSlow(unittest.TestCase):
    def test_known_thresholds(self):
        for kind in LatticeKind:
            est = estimate_pc(kind, 128, 10000, 12648430, workers=4)
            self.assertLess(abs(est.value - classical_pc(kind)), 0.01, kind)


if __name__ == "__main__":
    unittest.main()
