"""Unit tests for pyqep package.

To run all tests, execute `pytest` from the project root directory. Slow
Monte Carlo checks run only with PYQEP_SLOW=1 set in the environment.
"""
import io
import json
import unittest

import numpy as np

from pyqep.lattice import LatticeKind
from pyqep.utils import parse_grid, read_csv, write_rows


class TestUtils(unittest.TestCase):
    def test_parse_single(self):
        self.assertEqual(parse_grid("0.3"), [0.3])

    def test_parse_list(self):
        self.assertEqual(parse_grid("0.1, 0.2,0.4"), [0.1, 0.2, 0.4])

    def test_parse_range(self):
        grid = parse_grid("0:0.5:0.1")
        np.testing.assert_allclose(grid, [0, 0.1, 0.2, 0.3, 0.4, 0.5])
        self.assertEqual(grid[-1], 0.5)
        self.assertEqual(len(parse_grid("0.01:0.49:0.01")), 49)

    def test_parse_errors(self):
        for text in ("a", "0:1", "0.5:0.1:0.1", "0:1:0"):
            with self.assertRaises(ValueError):
                parse_grid(text)

    def test_csv(self):
        rows = [{'p': np.float64(0.5), 'kind': LatticeKind.SQUARE, 'n': 3},
                {'p': 0.75, 'kind': LatticeKind.KAGOME, 'n': 4}]
        f = io.StringIO()
        write_rows(rows, f, {'L': 8, 'kind': LatticeKind.SQUARE}, 42)
        text = f.getvalue()
        lines = text.splitlines()
        self.assertEqual(lines[1], "# seed: 42")
        self.assertEqual(lines[2], '# params: {"L": 8, "kind": "square"}')
        self.assertTrue(lines[3].startswith("# timestamp: "))
        self.assertEqual(lines[4], "p,kind,n")
        back = read_csv(io.StringIO(text))
        self.assertEqual(back[0], {'p': '0.5', 'kind': 'square', 'n': '3'})
        self.assertEqual(back[1]['kind'], 'kagome')

    def test_json(self):
        f = io.StringIO()
        write_rows([{'p': np.float64(0.5)}], f, {'L': 8}, 1, fmt='json')
        doc = json.loads(f.getvalue())
        self.assertEqual(doc['rows'], [{'p': 0.5}])
        self.assertEqual(doc['params'], {'L': 8})
        self.assertEqual(doc['seed'], 1)

    def test_unknown_format(self):
        with self.assertRaises(ValueError):
            write_rows([], io.StringIO(), {}, 0, fmt='xml')


if __name__ == "__main__":
    unittest.main()
