import hashlib
import json
from pathlib import Path
from typing import Callable, Dict, Optional, Sequence

from mcp.server.fastmcp.utilities.logging import get_logger

from .reconstruct import LogSeries, series_from_csv, series_to_csv
from .scene import Scene

LOG = get_logger(__name__)


def save_series(series: LogSeries, path: Path) -> Path:
    """
    Write a series as ``tau,sign,log_mag`` CSV, creating parent directories.

    Args:
        series (LogSeries): The samples.
        path (Path): Target file.

    Returns:
        Path: The written file.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(series_to_csv(series), encoding="utf-8")
    LOG.info(f"Saved {len(series)} samples to '{path}'")
    return path


def load_series(path: Path, gamma0: float = 1.0, source: str = "external") -> LogSeries:
    return series_from_csv(Path(path).read_text(encoding="utf-8"), gamma0=gamma0, source=source)


def save_report(report: Dict, path: Path) -> Path:
    """Write a JSON report with two-space indentation and insertion-ordered keys."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, indent=2, sort_keys=False) + "\n", encoding="utf-8")
    LOG.info(f"Saved report to '{path}'")
    return path


def series_key(scene: Scene, tau_grid: Sequence[float], extra: Optional[Dict] = None) -> str:
    """
    Short digest naming a forward run: the scene document, the τ grid and any
    extra run options.

    Example:
        series_key(example_scene("cfg1"), (8, 16)) -> "3f1c0a9e5b27"
    """
    payload = {
        "scene": scene.to_document(),
        "tau": [float(t) for t in tau_grid],
        "extra": extra or {},
    }
    text = json.dumps(payload, sort_keys=True)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]


def load_or_create_series(
    path: Path, create: Callable[[], LogSeries], gamma0: float = 1.0, source: str = "forward"
) -> LogSeries:
    """
    Loads a previously saved series from disk. If none exists, it computes the
    series with ``create`` and saves it.

    Args:
        path (Path): Cache file.
        create (Callable[[], LogSeries]): Producer for a missing series.
        gamma0 (float): γ₀ attached to a loaded series.
        source (str): Source label attached to a loaded series.

    Returns:
        LogSeries: The loaded or newly computed series.
    """
    path = Path(path)
    if path.exists():
        LOG.info(f"Loading existing series from '{path}'")
        return load_series(path, gamma0=gamma0, source=source)
    LOG.info("No saved series found. Computing one now...")
    series = create()
    save_series(series, path)
    return series
