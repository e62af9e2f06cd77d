"""
esmcheck - One-Time Setup Script
Installs dependencies, creates working directories and runs a smoke check
Run this once before using esmcheck
"""

import json
import platform
import subprocess
import sys
import time
from pathlib import Path

MIN_PYTHON = (3, 9)
MODULES = ("numpy", "sympy", "yaml", "colorlog", "pytest")


class EsmSetup:
    """Setup steps for esmcheck."""

    def __init__(self):
        """Initialize the setup system."""
        self.project_root = Path(__file__).resolve().parent
        self.setup_completed_flag = self.project_root / "setup_completed.flag"
        self.log_file = self.project_root / "logs" / "setup.log"

        # Ensure logs directory exists
        self.log_file.parent.mkdir(exist_ok=True)

        print("esmcheck setup - v1.0")
        print("=" * 50)

    def log(self, message: str) -> None:
        """Log message to file and console."""
        timestamp = time.strftime("%Y-%m-%d %H:%M:%S")
        with open(self.log_file, "a", encoding="utf-8") as f:
            f.write(f"[{timestamp}] {message}\n")
        print(message)

    def check_python_version(self) -> bool:
        """Check if Python version is compatible (3.9+)."""
        version = sys.version_info
        if (version.major, version.minor) < MIN_PYTHON:
            self.log(f"[ERROR] Python {version.major}.{version.minor} detected; 3.9 or higher is required")
            return False
        self.log(f"[OK] Python {version.major}.{version.minor}.{version.micro} detected")
        return True

    def install_requirements(self) -> bool:
        """Install Python requirements with pip."""
        requirements = self.project_root / "requirements.txt"
        if not requirements.exists():
            self.log("[ERROR] requirements.txt not found")
            return False
        self.log("[INFO] Installing Python requirements...")
        try:
            result = subprocess.run(
                [sys.executable, "-m", "pip", "install", "-r", str(requirements)],
                capture_output=True, text=True, encoding="utf-8", errors="replace", timeout=900,
            )
            if result.returncode != 0:
                self.log(f"[ERROR] pip failed: {result.stderr.strip()[-500:]}")
                return False
            self.log("[OK] Python requirements installed")
            return True
        except subprocess.TimeoutExpired:
            self.log("[ERROR] Requirements installation timed out")
            return False
        except Exception as e:
            self.log(f"[ERROR] Python requirements installation error: {e}")
            return False

    def create_directories(self) -> bool:
        """Create the log and report directories."""
        try:
            for name in ("logs", "reports"):
                (self.project_root / name).mkdir(exist_ok=True)
            self.log("[OK] Created logs/ and reports/")
            return True
        except OSError as e:
            self.log(f"[ERROR] Could not create directories: {e}")
            return False

    def verify_imports(self) -> bool:
        """Import every runtime dependency once."""
        ok = True
        for module in MODULES:
            try:
                __import__(module)
                self.log(f"  [OK] {module}")
            except ImportError as e:
                self.log(f"  [ERROR] {module}: {e}")
                ok = False
        return ok

    def run_smoke_check(self) -> bool:
        """Validate and evaluate residuals on the bundled vacuum scenario."""
        scenario = self.project_root / "scenarios" / "vacuum.yaml"
        for command in ("validate", "residuals"):
            report = self.project_root / "reports" / f"smoke_{command}.json"
            result = subprocess.run(
                [sys.executable, "esmcheck.py", command, "--scenario", str(scenario), "--report", str(report)],
                cwd=self.project_root, capture_output=True, text=True, encoding="utf-8", errors="replace",
            )
            if result.returncode != 0:
                self.log(f"[ERROR] Smoke check '{command}' exited with {result.returncode}")
                return False
            self.log(f"[OK] Smoke check '{command}' passed")
        return True

    def create_setup_completion_flag(self) -> None:
        """Create setup completion flag file."""
        completion_data = {
            "setup_completed": True,
            "timestamp": time.strftime("%Y-%m-%d %H:%M:%S"),
            "python_version": f"{sys.version_info.major}.{sys.version_info.minor}.{sys.version_info.micro}",
            "platform": platform.system(),
        }
        with open(self.setup_completed_flag, "w") as f:
            json.dump(completion_data, f, indent=2)
        self.log("[OK] Created setup completion flag")

    def run_complete_setup(self) -> bool:
        """Run the complete setup process."""
        steps = (
            self.check_python_version,
            self.install_requirements,
            self.create_directories,
            self.verify_imports,
            self.run_smoke_check,
        )
        for step in steps:
            if not step():
                self.log(f"[ERROR] Setup stopped at {step.__name__}")
                return False
        self.create_setup_completion_flag()
        self.log("[OK] esmcheck setup complete")
        return True


def main() -> int:
    """Main entry point for setup."""
    setup = EsmSetup()
    return 0 if setup.run_complete_setup() else 1


if __name__ == "__main__":
    sys.exit(main())
