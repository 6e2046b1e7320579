"""
Engine settings loaded from environment variables.

This module handles loading and validation of the environment variables
that bound the brute-force oracles and drive the full-reducer verifier.
"""

import logging
import os
import sys

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

LOG_LEVELS = {0: logging.WARNING, 1: logging.INFO, 2: logging.DEBUG}


class Settings:
    """Engine settings loaded from environment variables."""

    def __init__(self):
        """Initialize settings from environment variables."""

        self.log_verbosity: int = int(os.getenv("LOG_VERBOSITY", "1"))

        # Oracle budgets
        self.brute_force_bound: int = int(os.getenv("BRUTE_FORCE_BOUND", "1000000"))
        self.transport_table_limit: int = int(
            os.getenv("TRANSPORT_TABLE_LIMIT", "32")
        )

        # Verifier defaults
        self.verify_trials: int = int(os.getenv("VERIFY_TRIALS", "500"))
        self.verify_max_support: int = int(os.getenv("VERIFY_MAX_SUPPORT", "8"))
        self.verify_domain_size: int = int(os.getenv("VERIFY_DOMAIN_SIZE", "4"))
        self.verify_workers: int = int(os.getenv("VERIFY_WORKERS", "1"))

        # Validate critical settings
        self._validate()

    def _validate(self):
        """Validate settings and fall back to defaults on bad values."""

        if self.log_verbosity not in LOG_LEVELS:
            _warn(
                f"LOG_VERBOSITY={self.log_verbosity} is not in valid range [0, 1, 2]",
                "Using default value of 1",
            )
            self.log_verbosity = 1

        if self.brute_force_bound < 1:
            _warn(
                f"BRUTE_FORCE_BOUND={self.brute_force_bound} must be positive",
                "Using default value of 1000000",
            )
            self.brute_force_bound = 1_000_000

        if self.transport_table_limit < 2:
            _warn(
                f"TRANSPORT_TABLE_LIMIT={self.transport_table_limit} is below 2",
                "Using default value of 32",
            )
            self.transport_table_limit = 32

        if self.verify_trials < 1:
            _warn(
                f"VERIFY_TRIALS={self.verify_trials} must be positive",
                "Using default value of 500",
            )
            self.verify_trials = 500

        if self.verify_max_support < 1:
            _warn(
                f"VERIFY_MAX_SUPPORT={self.verify_max_support} must be positive",
                "Using default value of 8",
            )
            self.verify_max_support = 8

        if self.verify_domain_size < 1:
            _warn(
                f"VERIFY_DOMAIN_SIZE={self.verify_domain_size} must be positive",
                "Using default value of 4",
            )
            self.verify_domain_size = 4

        if self.verify_workers < 1:
            _warn(
                f"VERIFY_WORKERS={self.verify_workers} must be positive",
                "Using default value of 1",
            )
            self.verify_workers = 1

    def get_search_config(self) -> dict:
        """Get the brute-force search budgets."""
        return {
            "brute_force_bound": self.brute_force_bound,
            "transport_table_limit": self.transport_table_limit,
        }

    def get_verify_config(self) -> dict:
        """Get the default full-reducer verifier configuration."""
        return {
            "trials": self.verify_trials,
            "max_support": self.verify_max_support,
            "domain_size": self.verify_domain_size,
            "workers": self.verify_workers,
        }

    def get_logging_config(self) -> dict:
        """Get logging configuration."""
        return {
            "level": LOG_LEVELS[self.log_verbosity],
            "format": "%(asctime)s %(levelname)s %(name)s: %(message)s",
        }

    def __repr__(self) -> str:
        return f"""Settings(
    log_verbosity={self.log_verbosity},
    brute_force_bound={self.brute_force_bound},
    transport_table_limit={self.transport_table_limit},
    verify_trials={self.verify_trials},
    verify_max_support={self.verify_max_support},
    verify_domain_size={self.verify_domain_size},
    verify_workers={self.verify_workers}
)"""


def _warn(problem: str, remedy: str):
    print(f"⚠️  Warning: {problem}", file=sys.stderr)
    print(f"   {remedy}", file=sys.stderr)


def configure_logging(verbosity: int | None = None):
    """Configure the root logger from the settings (or an explicit verbosity)."""
    config = settings.get_logging_config()
    if verbosity is not None:
        config["level"] = LOG_LEVELS.get(verbosity, logging.INFO)
    logging.basicConfig(stream=sys.stderr, **config)


# Global settings instance
settings = Settings()


if __name__ == "__main__":
    print("Current Settings:")
    print("=" * 50)
    print(settings)
    print()
    print("Search Config:")
    print(settings.get_search_config())
    print()
    print("Verify Config:")
    print(settings.get_verify_config())
