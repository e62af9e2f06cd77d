"""
esmcheck verifier - core application
Loads configuration, sets up logging and dispatches commands to reports
"""

import os
import sys
from typing import Any, Dict, List, Optional, Type

import yaml

from algebra.symplectic_core import DEFAULT_TOLERANCES
from commands.base_command import BaseCommand
from commands.duality import DualityCommand
from commands.holonomy import HolonomyCommand
from commands.quantize import QuantizeCommand
from commands.residuals import ResidualsCommand
from commands.ufold_demo import UfoldDemoCommand
from commands.validate import ValidateCommand
from core.reports import FLOAT_DIGITS, SCHEMA_VERSION, STATUS_FAIL, build_report, dumps, error_entry, exit_code
from core.scenario import Scenario, load_scenario, parse_float
from utils.errors import EsmError, InputError
from utils.logger import ROOT_LOGGER, EsmLogger, get_logger

COMMANDS: Dict[str, Type[BaseCommand]] = {
    cls.name: cls
    for cls in (ValidateCommand, ResidualsCommand, DualityCommand, QuantizeCommand, HolonomyCommand, UfoldDemoCommand)
}

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_INPUT = 2

DEFAULT_CONFIG: Dict[str, Any] = {
    "general": {"log_level": "INFO", "default_kappa": 1.0},
    "logging": {"log_file": None, "console": True},
    "tolerances": dict(DEFAULT_TOLERANCES),
    "limits": {
        "holonomy_max_size": 10000,
        "holonomy_max_len": 4,
        "equivalence_word_len": 4,
        "conjugator_height": 2,
    },
    "reports": {"float_digits": FLOAT_DIGITS, "schema_version": SCHEMA_VERSION},
    "numerics": {"gradient_step": 1e-4, "target_step": 1e-3},
}


def status(message: str) -> None:
    """Console status line; stderr keeps stdout free for reports."""
    print(message, file=sys.stderr)


def parse_tolerance_overrides(items: Optional[List[str]]) -> Dict[str, float]:
    """
    Parse ``name=value`` pairs from --tol.

    Raises:
        InputError: malformed pair, unknown name or non-positive value
    """
    out: Dict[str, float] = {}
    for item in items or []:
        name, sep, value = item.partition("=")
        name = name.strip()
        if not sep or name not in DEFAULT_TOLERANCES:
            raise InputError(f"--tol expects name=value with name in {sorted(DEFAULT_TOLERANCES)}, got '{item}'")
        try:
            out[name] = float(value)
        except ValueError as e:
            raise InputError(f"--tol value for {name} is not a number: '{value}'") from e
        if not out[name] > 0:
            raise InputError(f"--tol value for {name} must be positive")
    return out


class EsmVerifier:
    """Main esmcheck application object."""

    def __init__(self, config_path: str = "config.yaml"):
        """Initialize the verifier."""
        self.config_path = config_path
        self.config: Optional[Dict[str, Any]] = None
        self.logger: Optional[EsmLogger] = None

    def load_configuration(self) -> bool:
        """
        Load configuration from the YAML file and fill in optional sections.

        Returns:
            True if successful, False otherwise
        """
        try:
            if not os.path.exists(self.config_path):
                status(f"[ERROR] Configuration file not found: {self.config_path}")
                return False

            with open(self.config_path, "r", encoding="utf-8") as file:
                loaded = yaml.safe_load(file) or {}

            # Validate required configuration sections
            for section in ("general", "logging"):
                if section not in loaded:
                    status(f"[ERROR] Missing required configuration section: {section}")
                    return False

            config = {key: dict(value) for key, value in DEFAULT_CONFIG.items()}
            for key, value in loaded.items():
                if isinstance(value, dict) and key in config:
                    config[key].update(value)
                else:
                    config[key] = value
            unknown = sorted(set(config["tolerances"]) - set(DEFAULT_TOLERANCES))
            if unknown:
                status(f"[ERROR] Unknown tolerances in configuration: {unknown}")
                return False

            self.config = config
            status("[OK] Configuration loaded successfully")
            return True

        except yaml.YAMLError as e:
            status(f"[ERROR] Error parsing configuration file: {e}")
            return False
        except Exception as e:
            status(f"[ERROR] Error loading configuration: {e}")
            return False

    def initialize_logger(self) -> bool:
        """
        Initialize the logging system.

        Returns:
            True if successful, False otherwise
        """
        try:
            self.logger = get_logger(ROOT_LOGGER, self.config)
            self.logger.debug("esmcheck starting up")
            return True
        except Exception as e:
            status(f"[ERROR] Error initializing logger: {e}")
            return False

    def write_report(self, report: Dict[str, Any], path: Optional[str]) -> None:
        text = dumps(report, int(self.config["reports"].get("float_digits", FLOAT_DIGITS)))
        if path is None:
            sys.stdout.write(text)
            return
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as file:
            file.write(text)
        status(f"[OK] Report written to {path}")

    def run_command(self, name: str, scenario_path: Optional[str], options: Dict[str, Any]) -> int:
        """
        Run one command and emit its report.

        Returns:
            Exit code: 0 pass, 1 failed check, 2 input error
        """
        if name not in COMMANDS:
            status(f"[ERROR] Unknown command: {name}")
            return EXIT_INPUT
        command_cls = COMMANDS[name]

        try:
            options = dict(options)
            options["tolerances"] = parse_tolerance_overrides(options.get("tol"))
            scenario: Optional[Scenario] = None
            if scenario_path is not None:
                scenario = load_scenario(scenario_path)
            elif command_cls.needs_scenario:
                raise InputError(f"command '{name}' needs --scenario")
        except InputError as e:
            self.logger.error(f"{e.code}: {e.message}")
            status(f"[ERROR] {e.message}")
            return EXIT_INPUT

        command = command_cls(self.config, self.logger, options)
        kappa = float(self.config["general"].get("default_kappa", 1.0))
        try:
            result = command.run(scenario)
            status_value, results, timings = result.status, result.results, result.timings
        except InputError as e:
            self.logger.error(f"{e.code}: {e.message}")
            status(f"[ERROR] {e.message}")
            return EXIT_INPUT
        except EsmError as e:
            self.logger.error(f"{name} failed: {e.code}: {e.message}")
            status_value, results, timings = STATUS_FAIL, {"error": error_entry(e)}, {}

        if scenario is not None and "kappa" in (scenario.data.get("params") or {}):
            try:
                kappa = parse_float(scenario.data["params"]["kappa"], "params.kappa")
            except InputError as e:
                status(f"[ERROR] {e.message}")
                return EXIT_INPUT
        report = build_report(
            name,
            status_value,
            results,
            scenario.scenario_hash if scenario is not None else None,
            kappa,
            str(self.config["reports"].get("schema_version", SCHEMA_VERSION)),
            timings if options.get("timings") else None,
        )
        self.write_report(report, options.get("report"))
        tag = "[OK]" if status_value == "pass" else "[WARNING]"
        status(f"{tag} {name}: {status_value}")
        return exit_code(status_value)

    def run(self, name: str, scenario_path: Optional[str], options: Dict[str, Any]) -> int:
        """Main application entry point."""
        if not self.load_configuration():
            return EXIT_INPUT
        if not self.initialize_logger():
            return EXIT_INPUT
        return self.run_command(name, scenario_path, options)
