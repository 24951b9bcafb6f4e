"""Split conformal prediction for hierarchical classification.

Node-valued sets (CRSVP), sets of bounded representation complexity
(CRSVP-r), and the flat baselines LAC / APS / NPS.
"""

from .ancestors import AncestorSolution, ancestor_sequence, bruteforce_ancestors, omega_set, solve_ancestors
from .conformal import (
    CalibratedPredictor,
    ConformalConfig,
    Prediction,
    calibrate,
    conformal_quantile,
    config_from_label,
    predict,
    predict_batch,
)
from .evaluation import Dataset, MetricReport, SyntheticDataset, generate_synthetic, run_benchmark
from .hierarchy import Hierarchy, balanced_tree, minimal_cover, parse_hierarchy, path_to_root, representation_complexity
from .probmodel import BranchTable, ProbabilityView, from_branch_table, mode, node_mass, to_branch_table

__version__ = "0.1.0"
