import os
import unittest

import numpy as np

from pyqep.lattice import LatticeKind
from pyqep.measurement import MeasurementSpec, resolve_basis
from pyqep.percolation import Observable
from pyqep.protocol import (
    Mode, ProtocolName, ProtocolSpec, compare, compatible_size, run, run_cep,
    run_qep_kagome_square, run_qep_tri_hex, sample_double_links)
from pyqep.quantum_core import make_link_state, partial_swap_avg_scp


SLOW = bool(os.environ.get('PYQEP_SLOW'))


def within(test, a, b, sigma, n_sigma=5):
    test.assertLessEqual(abs(a - b), n_sigma * sigma + 1e-12)


class TestProtocolSpec(unittest.TestCase):
    def test_defaults(self):
        spec = ProtocolSpec('qep-tri-hex', 0.3)
        self.assertEqual(spec.name, ProtocolName.QEP_TRI_HEX)
        self.assertEqual(spec.basis_name, 'zz')
        self.assertEqual(spec.mode, Mode.EFFECTIVE_RATE)

    def test_cep_has_no_basis(self):
        spec = ProtocolSpec('cep', 0.3, 'xz')
        self.assertIsNone(spec.basis)
        self.assertIsNone(spec.measurement())
        self.assertEqual(spec.basis_name, "")

    def test_invalid(self):
        with self.assertRaises(ValueError):
            ProtocolSpec('qep-tri-hex', 0.7)
        with self.assertRaises(ValueError):
            ProtocolSpec('qep-tri-hex', 0.3,
                         MeasurementSpec((0.2, 0.2, 0.3, 0.3)))
        with self.assertRaises(ValueError):
            ProtocolSpec('qep', 0.3)

    def test_compatible_size(self):
        self.assertEqual(compatible_size(ProtocolSpec('qep-tri-hex', 0.3), 64),
                         66)
        self.assertEqual(compatible_size(ProtocolSpec('qep-tri-hex', 0.3), 66),
                         66)
        self.assertEqual(
            compatible_size(ProtocolSpec('qep-kagome-square', 0.3), 63), 64)
        self.assertEqual(compatible_size(ProtocolSpec('cep', 0.3), 63), 63)
        spec = ProtocolSpec('cep', 0.3, kind=LatticeKind.KAGOME)
        self.assertEqual(compatible_size(spec, 63), 64)


class TestDoubleLinks(unittest.TestCase):
    def test_rate_matches_average_scp(self):
        rng = np.random.default_rng(17)
        n = 100000
        for a1 in (0.1, 0.2, 0.3, 0.4):
            link = make_link_state(a1)
            for basis in ('zz', 'xz', 'optimal'):
                meas = resolve_basis(basis, link)
                expected = partial_swap_avg_scp(link, meas)
                rate = np.mean(sample_double_links(link, meas, n, rng))
                sigma = np.sqrt(expected * (1 - expected) / n)
                within(self, rate, expected, sigma)


class TestCep(unittest.TestCase):
    def test_extremes(self):
        est = run_cep(LatticeKind.TRIANGULAR, 0.5, 8, 20, 1).estimate
        self.assertEqual(est.probability_estimate, 1.0)
        est = run_cep(LatticeKind.TRIANGULAR, 0.0, 8, 20, 1).estimate
        self.assertEqual(est.probability_estimate, 0.0)

    def test_below_and_above_threshold(self):
        below = run_cep(LatticeKind.TRIANGULAR, 0.1, 32, 200, 2).estimate
        self.assertLess(below.probability_estimate, 0.02)
        above = run_cep(LatticeKind.TRIANGULAR, 0.25, 32, 200, 2).estimate
        self.assertGreater(above.probability_estimate, 0.9)

    def test_corner_to_corner_fails_sometimes(self):
        result = run_cep(LatticeKind.TRIANGULAR, 0.33, 32, 2000, 3,
                         Observable.TWO_POINT)
        self.assertLess(result.estimate.probability_estimate, 0.95)
        self.assertAlmostEqual(result.expected_bond_rate, 0.66)


class TestQepTriHex(unittest.TestCase):
    def test_saturated_xz(self):
        result = run_qep_tri_hex(0.34, 'xz', 'per-outcome', 6, 50, 4)
        self.assertEqual(result.estimate.probability_estimate, 1.0)
        self.assertEqual(result.empirical_bond_rate, 1.0)
        self.assertEqual(result.expected_bond_rate, 1.0)

    def test_deterministic_success(self):
        result = run_qep_tri_hex(0.33, 'xz', 'effective-rate', 24, 1000, 5,
                                 Observable.TWO_POINT)
        self.assertEqual(result.estimate.probability_estimate, 1.0)

    def test_subcritical(self):
        result = run_qep_tri_hex(0.15, 'xz', 'effective-rate', 24, 200, 6)
        self.assertLess(result.estimate.probability_estimate, 0.02)

    def test_per_outcome_bond_rate(self):
        for basis in ('zz', 'xz', 'optimal'):
            result = run_qep_tri_hex(0.3, basis, 'per-outcome', 12, 200, 7)
            p = result.expected_bond_rate
            n = result.trials * 144
            within(self, result.empirical_bond_rate, p,
                   np.sqrt(p * (1 - p) / n))

    def test_modes_agree(self):
        runs = [run_qep_tri_hex(0.22, 'xz', mode, 12, 1000, 8)
                for mode in ('per-outcome', 'effective-rate')]
        a, b = (r.estimate for r in runs)
        sigma = np.hypot(a.stderr, b.stderr)
        within(self, a.probability_estimate, b.probability_estimate, sigma)

    def test_incompatible_size(self):
        with self.assertRaises(ValueError):
            run_qep_tri_hex(0.3, 'xz', 'effective-rate', 8, 10, 0)

    def test_workers(self):
        spec = ProtocolSpec('qep-tri-hex', 0.25, 'optimal', 'per-outcome')
        one = run(spec, 9, 150, 10)
        many = run(spec, 9, 150, 10, workers=3)
        self.assertEqual(one.estimate, many.estimate)

    def test_row(self):
        row = run_qep_tri_hex(0.3, 'xz', 'effective-rate', 6, 10, 0).as_row()
        self.assertEqual(row['protocol'], 'qep-tri-hex')
        self.assertEqual(row['basis'], 'xz')
        self.assertEqual(row['L'], 6)
        self.assertAlmostEqual(row['expected_bond_rate'], 0.920190, places=5)


class TestQepKagomeSquare(unittest.TestCase):
    def test_extremes(self):
        result = run_qep_kagome_square(0.5, 8, 20, 1)
        self.assertEqual(result.estimate.probability_estimate, 1.0)
        self.assertEqual((result.width, result.height), (16, 8))
        result = run_qep_kagome_square(0.2, 32, 200, 1)
        self.assertLess(result.estimate.probability_estimate, 0.05)

    def test_per_outcome_bond_rate(self):
        result = run_qep_kagome_square(0.3, 8, 200, 9, mode='per-outcome')
        self.assertAlmostEqual(result.expected_bond_rate, 0.6)
        n = result.trials * 256
        within(self, result.empirical_bond_rate, 0.6, np.sqrt(0.24 / n))

    def test_default_basis_is_zz(self):
        spec = ProtocolSpec('qep-kagome-square', 0.255)
        self.assertEqual(spec.basis_name, 'zz')
        result = run(spec, 8, 10, 0)
        self.assertAlmostEqual(result.expected_bond_rate, 0.51, delta=1e-9)

    def test_non_zz_basis_warns(self):
        with self.assertLogs(level='WARNING') as cm:
            ProtocolSpec('qep-kagome-square', 0.3, 'xz')
        self.assertIn("ZZ", cm.output[0])

    def test_xz_swaps_are_worse(self):
        zz = run_qep_kagome_square(0.3, 8, 10, 0)
        xz = run_qep_kagome_square(0.3, 8, 10, 0, basis='xz')
        self.assertLess(xz.expected_bond_rate, zz.expected_bond_rate)


class TestCompare(unittest.TestCase):
    def setUp(self):
        self.specs = [
            ProtocolSpec('cep', 0.3, kind=LatticeKind.TRIANGULAR),
            ProtocolSpec('qep-tri-hex', 0.3, 'xz'),
            ProtocolSpec('qep-kagome-square', 0.3),
        ]

    def test_extremes(self):
        rows = compare(self.specs, [0.5], 6, 10, 0, Observable.TWO_POINT)
        self.assertEqual([r['protocol'] for r in rows],
                         ['cep-triangular', 'qep-tri-hex',
                          'qep-kagome-square'])
        self.assertTrue(all(r['estimate'] == 1.0 for r in rows))
        rows = compare(self.specs, [0.0], 6, 10, 0, Observable.TWO_POINT)
        self.assertTrue(all(r['estimate'] == 0.0 for r in rows))

    def test_grid(self):
        rows = compare(self.specs[:2], [0.1, 0.33], 12, 300, 1,
                       Observable.TWO_POINT)
        self.assertEqual(len(rows), 4)
        by_key = {(r['protocol'], r['alpha1']): r for r in rows}
        self.assertEqual(by_key[('qep-tri-hex', 0.33)]['estimate'], 1.0)
        self.assertLess(by_key[('cep-triangular', 0.33)]['estimate'], 1.0)

    def test_size_rounding(self):
        rows = compare(self.specs[1:], [0.5], 7, 5, 0, Observable.TWO_POINT)
        self.assertEqual([r['L'] for r in rows], [9, 8])

    def test_empty_grid(self):
        with self.assertRaises(ValueError):
            compare(self.specs, [], 6, 10, 0)


@unittest.skipUnless(SLOW, "set PYQEP_SLOW=1 to run")
class TestKagomeWindowSlow(unittest.TestCase):
    def test_qep_beats_cep(self):
        qep = run_qep_kagome_square(0.255, 96, 10000, 12648430, workers=4)
        cep = run_cep(LatticeKind.KAGOME, 0.255, 96, 10000, 12648430,
                      workers=4)
        a, b = qep.estimate, cep.estimate
        sigma = np.hypot(a.stderr, b.stderr)
        self.assertGreater(a.probability_estimate - b.probability_estimate,
                           5 * sigma)


if __name__ == "__main__":
    unittest.main()
