"""Anonymous mutual localization of robot teams with a coupled
probabilistic data association filter."""
__version__ = "0.1.0"

from .config import ScenarioConfig, parse_config  # noqa: E402
from .estimator import Frame, MutualLocalizer  # noqa: E402
from .simulator import RunLog, run_scenario  # noqa: E402

__all__ = ["Frame", "MutualLocalizer", "RunLog", "ScenarioConfig", "parse_config",
           "run_scenario", "__version__"]
