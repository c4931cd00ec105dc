"""Structure-preserving coupling of nonconforming triangle meshes.

Whitney forms on two unrelated triangulations of the same planar domain are
transferred by a de Rham interpolation, an L2 (Galerkin) projection or a
projection whose multiplier space is the Buffa-Christiansen dual complex.
"""
from .bc import BCBasis, bc_space, build_bc
from .coupling import apply_Q, build_operator, check_commuting, condition_number, solve_cgs
from .forms import AnalyticForm, FormDoFs, de_rham_map, exterior_derivative, norm_L2
from .mesh import (SurfaceMesh, build_complex, build_dual, read_mesh, refine_barycentric,
                   refine_uniform, write_mesh)
from .overlay import intersect_meshes, locate_point, clip_segment

__version__ = "0.1.0"
