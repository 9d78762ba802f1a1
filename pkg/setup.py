from setuptools import setup


setup(
    name='pyqep',
    version='0.1.0',
    description='Entanglement percolation laboratory',
    author='R. David Dunphy',
    license='MIT',
    packages=['pyqep'],
    scripts=['PyQEP.py'],
    entry_points={
        'console_scripts': ['pyqep=pyqep.cli:run_cli'],
    },
    install_requires=[
        'numpy>=1.19',
        'scipy>=1.5',
        'numba>=0.53',
        'networkx>=2.5'
    ]
)
