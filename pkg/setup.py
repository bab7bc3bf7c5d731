from setuptools import find_packages, setup

setup(
    name='VRSolve',
    version='0.1.0',
    description='Inexact SARAH and variance-reduced stochastic gradient solvers with convergence diagnostics.',
    packages=find_packages(exclude=['examples', 'examples.*']),
    python_requires='>=3.9',
    install_requires=['numpy>=1.22', 'scipy>=1.8', 'scikit-learn>=1.0'],
    extras_require={'test': ['pytest']},
    entry_points={'console_scripts': ['vrsolve = VRSolve.CLI.cli:main']},
)
