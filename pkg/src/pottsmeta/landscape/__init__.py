"""Critical points, thresholds, regimes and valleys of the potential."""

from .critical import *  # noqa: F401,F403
from .functions import *
from .regime import *  # noqa: F401,F403
from .continuation import *  # noqa: F401,F403
