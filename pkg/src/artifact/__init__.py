"""Symbolic trees, scale sequences, realized spaces and GIFS constructions."""

from .symbolic import (
    OMEGA,
    BoundaryAddress,
    Exactness,
    Fin,
    LambdaAlpha,
    LambdaAlphaN,
    LambdaMax,
    LambdaR,
    LambdaS,
    OrdinalIndex,
    cb_height_symbolic,
    cb_rank_bruteforce,
    enumerate_boundary,
)
from .scales import GoodPair, GoodSequence, PMode, PSequence, geometric_good, pair_b_for_p
from .realization import (
    SpaceApprox,
    realize_bp_space,
    realize_s_space,
    realize_z_space,
    segment_grid,
    verify_space_conditions,
)
from .gifs_engine import (
    Gifs,
    PointSet,
    hausdorff,
    hutchinson_step,
    iterate_to_attractor,
    lipschitz_estimate,
)
from .constructions import (
    Bundle,
    densify,
    gifs_component_space,
    gifs_mixed,
    gifs_sandwiched,
    gifs_scattered,
    nonattractor_bound,
)

__version__ = "0.1.0"
