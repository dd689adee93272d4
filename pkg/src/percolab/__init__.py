"""Simulation and exact certification of Mandelbrot fractal percolation projections."""

__version__ = "0.1.0"

from .core import (ProbabilityMatrix, RealizationTree, SquareCode, extinction_probability,
                   growth_rate_estimate, level_codes, sample_tree, square_geometry,
                   theoretical_dimension)
from .geometry import (Angle, Center, IntervalSet, ProjectionFrame, axis_projection_cover,
                       column_row_condition, contains_interval, coradial_point, normalize_center,
                       project_level, project_point, project_square, radial_point,
                       radial_project_level)
from .families import AlmostLinearFamily, verify_almost_linear
from .functions import PiecewiseLinearFunction, StepFunction
from .operator import (CertificateA, IntervalPair, NotFound, apply_F, build_tent, certify_A,
                       check_condition_B, derive_intervals, derive_r, expansion_map,
                       pushforward_indicator, robustness_extend, tile_angle_range)
from .replay import (build_net, count_cover, hoeffding_tail, replay_angle_range, replay_family,
                     replay_single_angle, success_lower_bound)
from .harness import CampaignConfig, fixed_point_coverage, run_campaign, self_similarity_test
