"""
Configuration module for jetcartan.
Loads verification defaults from config.ini and overrides from .env / the environment.
"""

import os
import configparser
from pathlib import Path
from typing import Optional, Tuple
from dotenv import load_dotenv
import logging
from datetime import datetime

from .checks import CheckSettings

VALID_LOG_LEVELS = ['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL']


def _parse_interval(text: str) -> Tuple[float, float]:
    low, high = (float(part) for part in text.split(','))
    return low, high


class Config:
    """Configuration class that loads settings from config.ini and overrides from .env."""

    def __init__(self, config_path: Optional[str] = None, env_path: Optional[str] = None):
        """
        Initialize configuration by loading from config files.

        Args:
            config_path: Path to config.ini file. Defaults to project root.
            env_path: Path to .env file. Defaults to project root.
        """
        self.project_root = Path(__file__).parent.parent

        # Load configuration from INI file
        self._load_config_file(config_path)

        # Environment overrides win over the INI file
        self._load_env_file(env_path)

        self._validate_config()

    def _load_env_file(self, env_path: Optional[str] = None):
        """Load environment overrides from .env file."""
        if env_path:
            load_dotenv(env_path)
        else:
            env_file = self.project_root / '.env'
            if env_file.exists():
                load_dotenv(env_file)
            else:
                load_dotenv()

        log_level = os.getenv('JETCARTAN_LOG_LEVEL')
        if log_level:
            self.log_level = log_level.upper()

        seed = os.getenv('JETCARTAN_SEED')
        if seed:
            try:
                self.seed = int(seed)
            except ValueError:
                logging.warning(f"JETCARTAN_SEED must be an integer, ignoring '{seed}'")

        maintenance = os.getenv('JETCARTAN_ORACLE_MAINTENANCE')
        if maintenance:
            self.oracle_maintenance_mode = maintenance.strip().lower() in ('1', 'true', 'yes', 'on')

    def _load_config_file(self, config_path: Optional[str] = None):
        """Load configuration from INI file."""
        if config_path:
            config_file = Path(config_path)
        else:
            config_file = self.project_root / 'config.ini'

        if not config_file.exists():
            raise FileNotFoundError(f"Configuration file not found: {config_file}")

        config = configparser.ConfigParser()
        config.read(config_file, encoding='utf-8')

        # Verification defaults
        verify_section = config['verify']
        self.tolerance = verify_section.getfloat('tolerance', 1e-8)
        self.trials = verify_section.getint('trials', 20)
        self.seed = verify_section.getint('seed', 0)
        self.third_derivative_tolerance = verify_section.getfloat('third_derivative_tolerance', 1e-7)
        self.finite_difference_tolerance = verify_section.getfloat('finite_difference_tolerance', 1e-4)
        self.finite_difference_step = verify_section.getfloat('finite_difference_step', 1e-5)
        self.orientation = verify_section.getint('orientation', 1)
        self.jet_box = _parse_interval(verify_section.get('jet_box', '-1,1'))

        # Oracle fixtures
        oracles_section = config['oracles']
        self.oracle_directory = oracles_section.get('fixture_directory') or 'fixtures/oracles'
        self.oracle_maintenance_mode = oracles_section.getboolean('maintenance_mode', False)

        # Logging Settings
        logging_section = config['logging']
        self.log_level = (logging_section.get('log_level') or 'INFO').upper()
        self.log_to_file = logging_section.getboolean('log_to_file')
        self.log_file = logging_section.get('log_file')

    def _validate_config(self):
        """Validate configuration values."""
        if self.trials < 1:
            self.trials = 20
            logging.warning("trials must be at least 1, using default of 20")

        if not self.tolerance > 0:
            raise ValueError(f"Invalid tolerance: {self.tolerance}")

        if self.third_derivative_tolerance < self.tolerance:
            self.third_derivative_tolerance = self.tolerance
            logging.warning("third_derivative_tolerance is below tolerance, using tolerance instead")

        if self.orientation not in (1, -1):
            raise ValueError(f"Invalid orientation: {self.orientation} (expected 1 or -1)")

        low, high = self.jet_box
        if not low < high:
            raise ValueError(f"Invalid jet_box: {low},{high}")

        if self.log_level not in VALID_LOG_LEVELS:
            self.log_level = 'INFO'
            logging.warning(f"Invalid LOG_LEVEL, using default 'INFO'")

    def setup_logging(self):
        """Setup logging based on configuration."""
        log_level = getattr(logging, self.log_level)

        formatter = logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )

        console_handler = logging.StreamHandler()
        console_handler.setFormatter(formatter)

        root_logger = logging.getLogger()
        root_logger.setLevel(log_level)

        # Clear existing handlers
        root_logger.handlers.clear()
        root_logger.addHandler(console_handler)

        if self.log_to_file:
            try:
                log_path = Path(self.log_file)
                if not log_path.is_absolute():
                    log_path = self.project_root / self.log_file

                log_dir = log_path.parent
                log_dir.mkdir(parents=True, exist_ok=True)

                # Create timestamped log file for this run
                timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
                timestamped_log = log_dir / f"jetcartan_{timestamp}.log"

                file_handler = logging.FileHandler(timestamped_log)
                file_handler.setFormatter(formatter)
                root_logger.addHandler(file_handler)

                logging.info(f"Logging to file: {timestamped_log}")

                self._cleanup_old_logs(log_dir)

            except Exception as e:
                logging.error(f"Failed to setup file logging: {e}")

    def _cleanup_old_logs(self, log_dir: Path, max_logs: int = 10):
        """Clean up old log files, keeping only the most recent ones."""
        try:
            log_files = list(log_dir.glob("jetcartan_*.log"))

            if len(log_files) <= max_logs:
                return

            # Newest first
            log_files.sort(key=lambda f: f.stat().st_mtime, reverse=True)

            deleted_count = 0
            for log_file in log_files[max_logs:]:
                try:
                    log_file.unlink()
                    deleted_count += 1
                except Exception as e:
                    logging.warning(f"Failed to delete old log {log_file.name}: {e}")

            if deleted_count > 0:
                logging.info(f"Cleaned up {deleted_count} old log files, kept {max_logs} most recent")

        except Exception as e:
            logging.warning(f"Error during log cleanup: {e}")

    def get_oracle_directory_path(self) -> Path:
        """
        Get the full path to the oracle fixture directory.

        Returns:
            Path object for the fixture directory
        """
        if os.path.isabs(self.oracle_directory):
            return Path(self.oracle_directory)
        return self.project_root / self.oracle_directory

    def check_settings(self, tolerance: Optional[float] = None, trials: Optional[int] = None,
                       orientation: Optional[int] = None) -> CheckSettings:
        """
        Settings for one verification run; explicit arguments override the configured defaults.

        Returns:
            CheckSettings for the check registry
        """
        tolerance = self.tolerance if tolerance is None else tolerance
        return CheckSettings(
            tolerance=tolerance,
            trials=self.trials if trials is None else trials,
            third_derivative_tolerance=max(self.third_derivative_tolerance, tolerance),
            finite_difference_tolerance=self.finite_difference_tolerance,
            finite_difference_step=self.finite_difference_step,
            orientation=self.orientation if orientation is None else orientation,
            jet_box=self.jet_box,
            oracle_directory=self.get_oracle_directory_path(),
        )

    def get_summary(self) -> dict:
        """
        Get configuration summary for logging/debugging.

        Returns:
            Dictionary with configuration summary
        """
        return {
            'tolerance': self.tolerance,
            'trials': self.trials,
            'seed': self.seed,
            'third_derivative_tolerance': self.third_derivative_tolerance,
            'finite_difference_tolerance': self.finite_difference_tolerance,
            'orientation': self.orientation,
            'jet_box': self.jet_box,
            'oracle_directory': str(self.get_oracle_directory_path()),
            'oracle_maintenance_mode': self.oracle_maintenance_mode,
            'log_level': self.log_level,
            'log_to_file': self.log_to_file,
        }

    def __str__(self) -> str:
        """String representation of configuration."""
        summary = self.get_summary()
        lines = ['jetcartan Configuration:']

        lines.append('  Verify:')
        lines.append(f'    tolerance: {summary["tolerance"]:g}')
        lines.append(f'    trials: {summary["trials"]}')
        lines.append(f'    seed: {summary["seed"]}')
        lines.append(f'    third_derivative_tolerance: {summary["third_derivative_tolerance"]:g}')
        lines.append(f'    finite_difference_tolerance: {summary["finite_difference_tolerance"]:g}')
        lines.append(f'    orientation: {summary["orientation"]:+d}')
        lines.append(f'    jet_box: {summary["jet_box"][0]:g},{summary["jet_box"][1]:g}')

        lines.append('  Oracles:')
        lines.append(f'    fixture_directory: {summary["oracle_directory"]}')
        lines.append(f'    maintenance_mode: {summary["oracle_maintenance_mode"]}')

        lines.append('  Logging:')
        lines.append(f'    log_level: {summary["log_level"]}')
        lines.append(f'    log_to_file: {summary["log_to_file"]}')

        return '\n'.join(lines)


# Lazy configuration singleton
_config_instance: Optional['Config'] = None


def get_config() -> 'Config':
    """Get or create the global config instance."""
    global _config_instance
    if _config_instance is None:
        _config_instance = Config()
    return _config_instance


def __getattr__(name: str):
    if name == 'config':
        return get_config()
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def main():
    """Test configuration loading."""
    print("🔧 Testing Configuration Loading")
    print("=" * 40)

    try:
        cfg = get_config()
        cfg.setup_logging()
        print(cfg)

        print(f"\nOracle fixtures: {cfg.get_oracle_directory_path()}")
        if cfg.get_oracle_directory_path().exists():
            print("✅ Oracle fixture directory found")
        else:
            print("⚠️  Oracle fixture directory missing - oracle-backed checks will error")
        if cfg.oracle_maintenance_mode:
            print("⚠️  Oracle maintenance mode is ON - fixtures may be rewritten")

        print("✅ Configuration loaded successfully from config.ini and .env")

    except Exception as e:
        print(f"❌ Configuration error: {e}")
        raise


if __name__ == "__main__":
    main()
