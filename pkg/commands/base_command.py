"""
Base Command Abstract Class
Defines the interface for all esmcheck commands
"""

import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

from core.builders import ScenarioBuilder
from core.reports import STATUS_FAIL, STATUS_INCONCLUSIVE, STATUS_PASS, error_entry
from core.scenario import Scenario
from utils.errors import EsmError, InputError
from utils.logger import EsmLogger


@dataclass
class CommandResult:
    """Status and command-specific results of one run."""

    status: str
    results: Dict[str, Any]
    timings: Dict[str, float] = field(default_factory=dict)


def combine(*statuses: str) -> str:
    """fail dominates inconclusive, which dominates pass."""
    if STATUS_FAIL in statuses:
        return STATUS_FAIL
    if STATUS_INCONCLUSIVE in statuses:
        return STATUS_INCONCLUSIVE
    return STATUS_PASS


def verdict(passed: bool) -> str:
    return STATUS_PASS if passed else STATUS_FAIL


class BaseCommand(ABC):
    """Abstract base class for commands."""

    name = "command"
    needs_scenario = True

    def __init__(self, config: Dict[str, Any], logger: EsmLogger, options: Optional[Dict[str, Any]] = None):
        """
        Initialize the command.

        Args:
            config: Configuration dictionary
            logger: Logger instance
            options: Parsed command-line options
        """
        self.config = config
        self.logger = logger
        self.options = dict(options or {})
        self.limits = config.get("limits", {})
        self._timings: Dict[str, float] = {}

    def builder(self, scenario: Scenario, refine: int = 1) -> ScenarioBuilder:
        return ScenarioBuilder(scenario, self.config, refine, self.options.get("tolerances"))

    def timed(self, label: str, func, *args, **kwargs):
        """Run func and record its wall time under label."""
        start = time.perf_counter()
        try:
            return func(*args, **kwargs)
        finally:
            self._timings[label] = round(time.perf_counter() - start, 6)

    def guarded(self, label: str, func, *args, **kwargs) -> Dict[str, Any]:
        """
        Run one check, turning library errors into a failed report entry.

        Input errors are not caught: they abort the command with exit code 2.

        Returns:
            The check's dict with a "status" key
        """
        try:
            result = self.timed(label, func, *args, **kwargs)
        except InputError:
            raise
        except EsmError as e:
            self.logger.warning(f"{self.name}: {label} failed with {e.code}: {e.message}")
            return {"status": STATUS_FAIL, **error_entry(e)}
        return result

    @abstractmethod
    def execute(self, scenario: Optional[Scenario]) -> CommandResult:
        """
        Run the command.

        Args:
            scenario: Parsed scenario (None for commands that build their own)

        Returns:
            CommandResult with status and results
        """
        ...

    def run(self, scenario: Optional[Scenario]) -> CommandResult:
        self.logger.info(f"{self.name}: starting")
        result = self.execute(scenario)
        result.timings = dict(self._timings)
        self.logger.info(f"{self.name}: finished with status {result.status}")
        return result
