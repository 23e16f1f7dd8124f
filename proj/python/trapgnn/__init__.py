"""Graph-classification backdoor lab: TRAP triggers, baselines, defense and harness.

The heavy lifting lives in the C++ extension ``trapgnn._core``; this module
re-exports it and adds dict-based wrappers around the JSON config and report APIs.
"""

import json

from . import _core
from ._core import *  # noqa: F401,F403

__all__ = [name for name in dir(_core) if not name.startswith("_")] + [
    "default_config",
    "resolve_config",
    "run_experiment",
    "report_csv",
]


def default_config():
    return json.loads(_core.default_config_json())


def resolve_config(config=None, overrides=()):
    """Fill defaults and validate; raises ConfigError listing every bad key path."""
    return json.loads(_core.resolve_config_json(json.dumps(config or {}), list(overrides)))


def run_experiment(config=None, overrides=(), jobs=0):
    """Run the configured experiment and return the report as a dict."""
    return json.loads(_core.run_experiment_json(json.dumps(config or {}), list(overrides), jobs))


def report_csv(report):
    return _core.report_csv_json(json.dumps(report))
