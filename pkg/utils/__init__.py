"""
Utilities package for pmlab.

Contains:
- config: RunConfig, lab defaults, run files, validation and hashing
- dispatch: command handler running a config end to end
- artifacts: CSV and JSON writers
- plotting: log-log SVG rendering
"""

from .config import RunConfig, build_config, config_hash

__all__ = ["RunConfig", "build_config", "config_hash"]
