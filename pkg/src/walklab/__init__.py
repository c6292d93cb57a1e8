"""Random walk range laboratory: inner boundary, favourite sites and the constants behind them."""
from .hitting import (CutoffPolicy, ExactBracket, HittingEstimate, estimate_return_before_neighbor,
                      estimate_tail, estimate_truncated, exact_bracket, exact_bracket_2d,
                      exact_bracket_highd, h_k)
from .lattice import WalkPath, generate_walk, path_from_directions, path_from_points
from .rng import RngStream
from .statistics import BetaConstant, BetaSource, StatSnapshot, beta_from_p, snapshot, theta_tilde
from .tracker import RangeState, advance, new_state, recompute_from_scratch

__version__ = "0.1.0"
