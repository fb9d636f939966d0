"""Electromigration stress analysis for multi-segment interconnect trees.

A transient finite-volume solver for Korhonen's stress equation serves as
the ground-truth oracle for a rasterized image-pair dataset pipeline and an
evaluation harness.
"""

from .model import (Branch, InterconnectTree, Node, PhysicalParams,
                    diffusivity, driving_force, validate_tree)
from .solver import (Mesh, SolverConfig, StressField, TreeSolver,
                     analytic_single_segment, build_mesh, solve_transient,
                     steady_state)
from .design import GenConfig, assign_currents, generate_topology, generate_tree
from .raster import (FieldImage, NormStats, footprint_mask, rasterize_current,
                     rasterize_stress, standardize_apply, standardize_fit,
                     standardize_invert)
from .dataset import Dataset, SamplePair, read_dataset, split_by_design, write_dataset
from .metrics import EvalReport, aggregate, baseline_mean_predictor, nrmse, rmse

__version__ = "0.1.0"
