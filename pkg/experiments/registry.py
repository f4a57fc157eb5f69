"""
Centralized command registry with parameter schemas.

Experiment commands register themselves with the @command decorator; the CLI
looks them up by name or alias and builds its argument surface from the
recorded schemas.
"""

import inspect
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Dict, List, Optional

logger = logging.getLogger(__name__)


class ParameterType(Enum):
    """Parameter types for command schemas."""
    STRING = "string"
    INTEGER = "integer"
    FLOAT = "number"
    BOOLEAN = "boolean"
    ARRAY = "array"
    OBJECT = "object"


@dataclass
class ParameterSchema:
    """Schema definition for a command parameter."""
    name: str
    type: ParameterType
    description: str
    required: bool = True
    default: Optional[Any] = None


@dataclass
class CommandSchema:
    """Schema definition for an experiment command."""
    name: str
    description: str
    parameters: List[ParameterSchema]
    artifacts: List[str]


_TYPE_MAP = {
    int: ParameterType.INTEGER,
    float: ParameterType.FLOAT,
    bool: ParameterType.BOOLEAN,
    list: ParameterType.ARRAY,
    dict: ParameterType.OBJECT,
}


class CommandRegistry:
    """Registry of the experiment commands."""

    def __init__(self):
        self._commands: Dict[str, Callable] = {}
        self._schemas: Dict[str, CommandSchema] = {}
        self._aliases: Dict[str, str] = {}

    def register_command(
        self,
        func: Callable,
        name: Optional[str] = None,
        description: Optional[str] = None,
        aliases: Optional[List[str]] = None,
        artifacts: Optional[List[str]] = None,
    ) -> Callable:
        """
        Register a command function with schema information.

        Args:
            func: The function to register
            name: Command name (defaults to func.__name__)
            description: Command description (defaults to the docstring)
            aliases: Alternative names for the command
            artifacts: CSV schemas the command emits
        """
        command_name = name or func.__name__
        parameters = []
        for param_name, param in inspect.signature(func).parameters.items():
            if param_name == "self":
                continue
            required = param.default is inspect.Parameter.empty
            parameters.append(ParameterSchema(
                name=param_name,
                type=_TYPE_MAP.get(param.annotation, ParameterType.STRING),
                description=f"Parameter {param_name}",
                required=required,
                default=None if required else param.default,
            ))

        doc = inspect.getdoc(func)
        self._commands[command_name] = func
        self._schemas[command_name] = CommandSchema(
            name=command_name,
            description=description or (doc.splitlines()[0] if doc else f"Command {command_name}"),
            parameters=parameters,
            artifacts=artifacts or [],
        )
        for alias in aliases or []:
            self._aliases[alias] = command_name

        logger.debug(f"Registered command: {command_name}")
        return func

    def _resolve(self, name: str) -> Optional[str]:
        if name in self._commands:
            return name
        return self._aliases.get(name)

    def get_command(self, name: str) -> Optional[Callable]:
        """Get a command function by name or alias."""
        resolved = self._resolve(name)
        return self._commands[resolved] if resolved else None

    def get_schema(self, name: str) -> Optional[CommandSchema]:
        """Get the schema of a command by name or alias."""
        resolved = self._resolve(name)
        return self._schemas[resolved] if resolved else None

    def names(self) -> List[str]:
        return sorted(self._commands)

    def execute_command(
        self,
        name: str,
        args: Optional[List[Any]] = None,
        kwargs: Optional[Dict[str, Any]] = None,
    ) -> Any:
        """
        Run a registered command.

        Raises:
            ValueError: unknown command name
        """
        func = self.get_command(name)
        if func is None:
            raise ValueError(f"Unknown command: {name}")
        logger.info(f"Running command: {name}")
        return func(*(args or []), **(kwargs or {}))


# Global command registry instance
command_registry = CommandRegistry()


def command(
    name: Optional[str] = None,
    description: Optional[str] = None,
    aliases: Optional[List[str]] = None,
    artifacts: Optional[List[str]] = None,
):
    """Decorator to register an experiment command."""
    def decorator(func):
        return command_registry.register_command(func, name, description, aliases, artifacts)
    return decorator
