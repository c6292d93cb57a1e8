"""Hitting probabilities of a walk started at the origin: Monte Carlo and certified brackets."""
from .bracket import (ExactBracket, SolverError, absorbing_bracket, certified_beta_interval,
                      dense_bracket, exact_bracket, exact_bracket_2d, exact_bracket_highd,
                      extrapolated_estimate, reflection_bracket)
from .estimate import (NO_CUTOFF, CutoffKind, CutoffPolicy, HittingEstimate, Target,
                       binomial_half_width, classify_path, estimate_return_before_neighbor,
                       estimate_tail, estimate_truncated, first_time_histograms, h_k, joint_z,
                       survival, tail_identity_table, wilson_half_width)
