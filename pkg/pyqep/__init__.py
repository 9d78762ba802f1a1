"""Entanglement percolation laboratory

See README.md for installation and usage instructions.

Contains the following modules:

    pyqep.quantum_core: closed-form algebra of partially entangled links
    pyqep.measurement: Bell measurement bases and their optimisation
    pyqep.lattice: lattice graphs and entanglement-swapping transformations
    pyqep.percolation: bond percolation Monte Carlo engine
    pyqep.protocol: classical and quantum entanglement percolation protocols
    pyqep.solver: threshold computation and the threshold table
    pyqep.cli: command-line front end
"""

__version__ = "0.1.0"
__author__ = "R. David Dunphy"
__credits__ = "Centre for Signal & Image Processing, University of Strathclyde"
