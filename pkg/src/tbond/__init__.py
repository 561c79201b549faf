"""Local analysis of t-bonded point sets."""

from .geom import Isometry, Subspace, TolerancePolicy, affine_rank, compose, invert, orthogonal_fit
from .pointset import PeriodicSpec, PointSet, estimate_R, estimate_r, load_pointset, realize_window
from .bonding import bond_graph, is_t_bonded, minimal_bond_parameter, minimax_chain
from .cluster import Cluster, classify, cluster_at, clusters_equivalent, counting_profile
from .symmetry import groups_equal, stabilization_test, stabilizer, verify_extension

__version__ = "0.1.0"
