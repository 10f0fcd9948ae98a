"""Lattice-sum asymptotics toolkit.

Log-space numerics, 2-associated Stirling numbers, a discrete Laplace
lattice-sum engine, and the 2-core 3XOR-SAT threshold experiments built on
top of them.
"""

__version__ = "0.1.0"

from .laplace import Lattice, Region, SummandFamily
from .numkernel import LogScalar, ln_add_exp, ln_factorial
from .stirling import StirlingTable, build_table
from .xorsat_sim import Xor3Instance, gf2_solve, peel_2core, sample_instance

__all__ = [
    "Lattice",
    "LogScalar",
    "Region",
    "StirlingTable",
    "SummandFamily",
    "Xor3Instance",
    "__version__",
    "build_table",
    "gf2_solve",
    "ln_add_exp",
    "ln_factorial",
    "peel_2core",
    "sample_instance",
]
