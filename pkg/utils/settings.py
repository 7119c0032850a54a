"""
Environment-backed defaults for the two-way coding toolkit
"""

import os
from dataclasses import dataclass, replace

from dotenv import load_dotenv

load_dotenv()


def _int_env(name: str, default: int) -> int:
    value = os.getenv(name)
    return int(value) if value not in (None, "") else default


def _float_env(name: str, default: float) -> float:
    value = os.getenv(name)
    return float(value) if value not in (None, "") else default


@dataclass(frozen=True)
class Settings:
    """Solver and runtime defaults. Every field can be overridden from .env"""

    max_cells: int = 2 ** 24
    rd_max_iters: int = 5000
    rd_restarts: int = 16
    rd_tol: float = 1e-6
    power_tol: float = 1e-12
    power_max_sweeps: int = 100_000
    grid_step: float = 0.05
    refine_rounds: int = 200
    multistart: int = 32
    threads: int = 1
    seed: int = 7
    log_level: str = "INFO"
    fixture_dir: str = "fixtures"

    def with_overrides(self, **changes) -> "Settings":
        """Return a copy with the non-None overrides applied"""
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


def load_settings() -> Settings:
    """Read the TWC_* environment variables (after .env has been loaded)"""
    return Settings(
        max_cells=_int_env("TWC_MAX_CELLS", 2 ** 24),
        rd_max_iters=_int_env("TWC_RD_MAX_ITERS", 5000),
        rd_restarts=_int_env("TWC_RD_RESTARTS", 16),
        rd_tol=_float_env("TWC_RD_TOL", 1e-6),
        power_tol=_float_env("TWC_POWER_TOL", 1e-12),
        power_max_sweeps=_int_env("TWC_POWER_MAX_SWEEPS", 100_000),
        grid_step=_float_env("TWC_GRID_STEP", 0.05),
        refine_rounds=_int_env("TWC_REFINE_ROUNDS", 200),
        multistart=_int_env("TWC_MULTISTART", 32),
        threads=_int_env("TWC_THREADS", 1),
        seed=_int_env("TWC_SEED", 7),
        log_level=os.getenv("TWC_LOG_LEVEL", "INFO"),
        fixture_dir=os.getenv("TWC_FIXTURE_DIR", "fixtures"),
    )


SETTINGS = load_settings()
