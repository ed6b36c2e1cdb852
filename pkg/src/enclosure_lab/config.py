import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

from dotenv import load_dotenv

load_dotenv()

DEFAULT_TAU_GRID: Tuple[float, ...] = (8.0, 12.0, 16.0, 24.0, 32.0, 40.0)


@dataclass(frozen=True)
class Settings:
    output_dir: Path
    log_level: str
    tau_grid: Tuple[float, ...]
    grid_level: int
    n_max: Optional[int]


def parse_tau_grid(text: str) -> Tuple[float, ...]:
    """
    Parse a comma separated τ grid such as "8,12,16".

    Args:
        text (str): Comma separated positive reals.

    Returns:
        Tuple[float, ...]: The grid, in the order given.

    Example:
        parse_tau_grid("8, 16,32") -> (8.0, 16.0, 32.0)
    """
    try:
        grid = tuple(float(item) for item in text.split(",") if item.strip())
    except ValueError as exc:
        raise ValueError(f"Malformed τ grid '{text}'") from exc
    if any(tau <= 0.0 for tau in grid):
        raise ValueError(f"τ grid '{text}' must contain positive values only")
    return grid


def _int_env(name: str, default: Optional[int]) -> Optional[int]:
    raw = os.getenv(name)
    if raw is None or not raw.strip():
        return default
    try:
        value = int(raw)
    except ValueError as exc:
        raise ValueError(f"Set {name} to an integer, got '{raw}'") from exc
    if value <= 0:
        raise ValueError(f"Set {name} to a positive integer, got '{raw}'")
    return value


def load_settings() -> Settings:
    """Read the ENCLOSURE_LAB_* environment variables into a Settings object."""
    raw_grid = os.getenv("ENCLOSURE_LAB_TAU_GRID")
    try:
        tau_grid = parse_tau_grid(raw_grid) if raw_grid else DEFAULT_TAU_GRID
    except ValueError as exc:
        raise ValueError(f"Set ENCLOSURE_LAB_TAU_GRID correctly: {exc}") from exc

    return Settings(
        output_dir=Path(os.getenv("ENCLOSURE_LAB_OUTPUT_DIR", "results")),
        log_level=os.getenv("ENCLOSURE_LAB_LOG_LEVEL", "INFO").upper(),
        tau_grid=tau_grid,
        grid_level=_int_env("ENCLOSURE_LAB_GRID_LEVEL", 1),
        n_max=_int_env("ENCLOSURE_LAB_N_MAX", None),
    )


SETTINGS: Settings = load_settings()
