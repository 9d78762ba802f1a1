"""Unit tests for pyqep package.

To run all tests, execute `pytest` from the project root directory. (May
require `pip install pytest`.) Set PYQEP_SLOW=1 to include the long Monte
Carlo runs.
"""
