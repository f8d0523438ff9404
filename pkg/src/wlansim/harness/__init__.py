from .config import ConfigError, Scenario, Workload, load_scenario
from .run import run_scenario, summary_csv

__all__ = ["ConfigError", "Scenario", "Workload", "load_scenario", "run_scenario", "summary_csv"]
