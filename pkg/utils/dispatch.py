"""
Command handler using the centralized command registry.

Resolves a RunConfig to a registered command, fills the command's keyword
arguments from the config, and writes the CSV tables, JSON sidecar and
optional plot the command produces.
"""

import logging
import time
from pathlib import Path
from typing import Any, Dict, List

import experiments.commands  # noqa: F401  (registers the commands)
from core.errors import ConfigError, DomainError, LabError
from experiments.commands import CommandResult
from experiments.registry import command_registry

from .artifacts import write_csv, write_sidecar
from .config import RunConfig, config_hash
from .plotting import loglog_svg

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INVALID = 2
EXIT_ACCEPTANCE = 3


class CommandHandler:
    """Runs experiment commands from resolved configurations."""

    def __init__(self, registry=command_registry):
        self.registry = registry
        self.logger = logging.getLogger("CommandHandler")

    def build_kwargs(self, config: RunConfig) -> Dict[str, Any]:
        """Keyword arguments of the command, read from same-named config attributes."""
        schema = self.registry.get_schema(config.command)
        if schema is None:
            raise ConfigError(
                f"Unknown command: {config.command} (registered: {', '.join(self.registry.names())})",
                field="command",
            )
        kwargs = {}
        for param in schema.parameters:
            if not hasattr(config, param.name):
                raise ConfigError(f"command {schema.name} needs '{param.name}'", field=param.name)
            kwargs[param.name] = getattr(config, param.name)
        return kwargs

    def handle(self, config: RunConfig) -> CommandResult:
        """Execute the configured command and return its result."""
        kwargs = self.build_kwargs(config)
        return self.registry.execute_command(config.command, kwargs=kwargs)

    def write_outputs(self, config: RunConfig, result: CommandResult, wall_time_s: float) -> List[Path]:
        """CSV per artifact, the JSON sidecar and, if enabled, the SVG plot."""
        digest = config_hash(config)
        out_dir = Path(config.output_dir)
        stem = config.command.replace("-", "_")
        written = []
        for artifact in result.artifacts:
            written.append(write_csv(out_dir / f"{artifact.name}.csv", artifact.header, artifact.rows, digest))
        report = dict(result.report)
        report["passed"] = result.passed
        report["failures"] = result.failures
        written.append(write_sidecar(
            out_dir / f"{stem}.json", config.to_dict(), digest, result.fit, wall_time_s, report,
        ))
        if config.plot and result.plot is not None:
            spec = result.plot
            svg = loglog_svg(
                out_dir / f"{spec.name}.svg", spec.x, spec.y, spec.xlabel, spec.ylabel,
                guide_slope=spec.guide_slope, title=spec.title,
            )
            if svg is not None:
                written.append(svg)
        return written

    def run(self, config: RunConfig) -> int:
        """
        Run one command end to end.

        Returns:
            0 on success, 2 on invalid input, 3 on a failed acceptance check
            with assert_band set, 1 on any other lab error
        """
        start = time.perf_counter()
        try:
            result = self.handle(config)
        except (ConfigError, DomainError) as e:
            self.logger.error(f"Invalid input: {e}")
            return EXIT_INVALID
        except LabError as e:
            violations = getattr(e, "violations", None)
            self.logger.error(f"{type(e).__name__}: {e}")
            if violations:
                self.logger.error(f"Report: {violations}")
            return EXIT_ERROR
        wall_time = time.perf_counter() - start

        written = self.write_outputs(config, result, wall_time)
        self.logger.info(f"{config.command} finished in {wall_time:.2f}s, wrote {len(written)} files")
        if not result.passed:
            for failure in result.failures:
                self.logger.warning(f"Acceptance: {failure}")
            if config.assert_band:
                return EXIT_ACCEPTANCE
        return EXIT_OK


# Global command handler instance
command_handler = CommandHandler()


def run(config: RunConfig) -> int:
    return command_handler.run(config)
