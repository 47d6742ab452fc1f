"""Bond percolation on Z^d with a sublattice of defects: estimators, exact
oracles and a dynamic block renormalization."""

from .field import ParamPoint, UniformField
from .lattice import LatticeSpec, Region
from .sampling import EstimateRecord

__all__ = ["LatticeSpec", "Region", "ParamPoint", "UniformField", "EstimateRecord"]
__version__ = "0.1.0"
