"""Rank-constrained proximal splitting with convex-envelope certificates.

The package evaluates the rank-constrained function
``k(||M||_F) + indicator(rank(M) <= r)`` and its convex envelope, computes
both proximal operators, runs Douglas-Rachford and forward-backward
splitting with either choice, and derives dual certificates telling when
the convex relaxation and the non-convex iteration agree.
"""

__version__ = "0.1.0"

from .certificates import *  # noqa: E402,F401,F403
from .errors import CapabilityError, ConfigError, InputError, LowRankSplitError, NumericalError  # noqa: E402
from .experiments import *  # noqa: E402,F401,F403
from .gauges import *  # noqa: E402,F401,F403
from .matrix import *  # noqa: E402,F401,F403
from .problems import *  # noqa: E402,F401,F403
from .prox import *  # noqa: E402,F401,F403
from .runs import *  # noqa: E402,F401,F403
from .solvers import *  # noqa: E402,F401,F403
