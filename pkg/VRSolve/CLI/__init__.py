# Imports the command-line entry point and the config loader.
from .cli import main, run, verify
from .config import ExperimentConfig, load_config, parse_config, build_problem
