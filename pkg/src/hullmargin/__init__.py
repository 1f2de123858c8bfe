"""Exact recovery of hidden partitions with strong convex hull margins from LABEL and SEED queries."""
from .cutting_plane import CPConfig, CPResult, cp_learn, lift, perceptron_seed_baseline, relax_cut
from .errors import *  # noqa: F401,F403
from .geometry import Ellipsoid, Halfspace, SeminormMetric, hull_distance, mvee
from .instances import (Instance, certify_margin, gen_ellipsoidal, gen_grid, gen_one_sided, gen_rational,
                        gen_separable, gen_staircase)
from .learners import (LearnedPartition, LearnerConfig, ball_search, bin_learn, cp_reference, kclass_learn,
                       lower_bound_queries, one_sided_learn)
from .oracles import OracleSuite, QueryLedger, SeedPolicy, TargetPartition, replay
from .rounding import RoundConfig, Rounding, round_partition, verify_rounding
from .sampling import ConvexBody, SamplingConfig, draw_samples, refresh_rounding

__version__ = "0.1.0"
