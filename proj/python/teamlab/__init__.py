"""Team-reward multi-agent experiments: incentive analysis, learners, runners."""

try:
    from . import _core
except ImportError:  # in-tree layout: the extension sits beside the build tree
    import _core  # type: ignore

TeamPartition = _core.TeamPartition
IncentiveEntry = _core.IncentiveEntry

parse_structure = _core.parse_structure
apply_team_transform = _core.apply_team_transform
teammate_probability = _core.teammate_probability
incentive_table = _core.incentive_table
format_incentive_table = _core.format_incentive_table
cooperation_threshold = _core.cooperation_threshold
incentive_margin = _core.incentive_margin
normalized_reward = _core.normalized_reward
equality = _core.equality
confidence_interval = _core.confidence_interval
config_hash = _core.config_hash
run_experiment = _core.run_experiment

__version__ = _core.__version__

__all__ = [
    "TeamPartition",
    "IncentiveEntry",
    "parse_structure",
    "apply_team_transform",
    "teammate_probability",
    "incentive_table",
    "format_incentive_table",
    "cooperation_threshold",
    "incentive_margin",
    "normalized_reward",
    "equality",
    "confidence_interval",
    "config_hash",
    "run_experiment",
]
