from pathlib import Path
from typing import Dict, List, Optional

from mcp.server.fastmcp.utilities.logging import get_logger

from ..asymptotics import T0, classify_limit, explain_limit
from ..config import SETTINGS
from ..errors import EnclosureLabError, ReconstructionError
from ..forward import indicator_series
from ..numerics.logvalue import LogValue
from ..oracle import compare_to_laplace
from ..reconstruct import (
    FitModel,
    LogSeries,
    classify_sign,
    fit_shortest_length,
    series_to_csv,
)
from ..scene import Scene, example_scene, validate
from ..stationary import StationaryPair, check_nondegenerate, find_pairs, shortest_lengths
from ..storage import load_or_create_series, load_series, save_report, save_series, series_key

LOG = get_logger(__name__)

ORACLE_TAU_GRID = (16.0, 24.0, 32.0)


def load_scene(scene_path: Optional[str] = None, example: Optional[str] = None) -> Scene:
    """
    Resolve a scene from a JSON file or a built-in example name.

    Args:
        scene_path (str, optional): Path to a scene JSON document.
        example (str, optional): Built-in layout name such as "cfg1".

    Returns:
        Scene: The validated scene.
    """
    if scene_path and example:
        raise EnclosureLabError("give either a scene file or an example name, not both")
    if scene_path:
        return validate(scene_path)
    return example_scene(example or "cfg1")


def _vector(values) -> List[float]:
    return [float(v) for v in values]


def _log_value(value: LogValue) -> Dict:
    return {"sign": value.sign, "log_mag": value.log_mag}


def _pair_summary(pair: StationaryPair) -> Dict:
    check = check_nondegenerate(pair)
    return {
        "cavity_id": pair.cavity_id,
        "kind": pair.kind.value,
        "x0": _vector(pair.x0),
        "y0": _vector(pair.y0),
        "l0": pair.l0_local,
        "G": [_vector(row) for row in pair.G],
        "H": [_vector(row) for row in pair.H],
        "nondegenerate": check.passed,
        "min_eig": check.min_eig,
        "triple_min_eig": check.triple_min_eig,
        "tests_agree": check.equivalence_holds,
    }


def _series_rows(series: LogSeries) -> List[Dict]:
    return [{"tau": s.tau, **_log_value(s.value)} for s in series.samples]


def _save(output_dir: Optional[str], name: str, report: Dict) -> Dict:
    if output_dir:
        report["output"] = str(save_report(report, Path(output_dir) / name))
    return report


def run_stationary(
    scene_path: Optional[str] = None,
    example: Optional[str] = None,
    n_starts: int = 32,
    output_dir: Optional[str] = None,
) -> Dict:
    """
    Find the closest cavity/probe point pairs and check them.

    Use this first: every other step builds on the pairs and on l₀.

    Args:
        scene_path (str, optional): Scene JSON file.
        example (str, optional): Built-in layout name (default "cfg1").
        n_starts (int): Multistart count per cavity.
        output_dir (str, optional): Directory to write ``stationary.json`` into.

    Returns:
        dict: Pairs with frames and non-degeneracy results, plus l₀, l₀⁺, l₀⁻, l₁.

    Example:
        example="cfg1" -> l0 = 2, one pair, nondegenerate
    """
    scene = load_scene(scene_path, example)
    pairs = find_pairs(scene, n_starts=n_starts)
    lengths = shortest_lengths(pairs, scene)
    report = {
        "l0": lengths.l0,
        "l0_plus": lengths.l0_plus,
        "l0_minus": lengths.l0_minus,
        "l1": lengths.l1,
        "regime": lengths.regime,
        "pairs": [_pair_summary(pair) for pair in pairs],
    }
    return _save(output_dir, "stationary.json", report)


def run_asympt(
    scene_path: Optional[str] = None,
    example: Optional[str] = None,
    T: Optional[float] = None,
    output_dir: Optional[str] = None,
) -> Dict:
    """
    Leading coefficient 𝒯₀ of the indicator and, for a given T, the limit of e^{τT}I_τ.

    Args:
        scene_path (str, optional): Scene JSON file.
        example (str, optional): Built-in layout name (default "cfg1").
        T (float, optional): Exponent to classify.
        output_dir (str, optional): Directory to write ``asympt.json`` into.

    Returns:
        dict: 𝒯₀, per-pair terms and the classification when T is given.

    Example:
        example="cfg1", T=5 -> T0 = -1/24, classification "minus_infinity"
    """
    scene = load_scene(scene_path, example)
    pairs = find_pairs(scene)
    report = T0(scene, pairs)
    result = {
        "T0": report.T0,
        "T0_is_zero": report.T0_is_zero,
        "l0": report.l0,
        "threshold": report.threshold,
        "terms": [
            {
                "cavity_id": term.pair.cavity_id,
                "kind": term.pair.kind.value,
                "b": term.b,
                "f": term.f_value,
                "amplitude": term.amplitude,
                "contribution": term.contribution,
                "amplitude_ball": term.amplitude_ball,
                "contribution_ball": term.contribution_ball,
            }
            for term in report.terms
        ],
    }
    if T is not None:
        lengths = shortest_lengths(pairs, scene)
        result["T"] = T
        result["classification"] = classify_limit(report, T).value
        result["explanation"] = explain_limit(report, T, lengths)
    return _save(output_dir, "asympt.json", result)


def run_oracle(
    scene_path: Optional[str] = None,
    example: Optional[str] = None,
    cavity_id: Optional[str] = None,
    tau_grid: Optional[List[float]] = None,
    grid_level: Optional[int] = None,
    output_dir: Optional[str] = None,
) -> Dict:
    """
    Brute-force the top-order kernel integral and compare it with its Laplace term.

    Slow: each τ costs tens of millions of kernel evaluations.

    Args:
        scene_path (str, optional): Scene JSON file.
        example (str, optional): Built-in layout name (default "cfg1").
        cavity_id (str, optional): One cavity; all cavities when omitted.
        tau_grid (List[float], optional): τ values, default 16, 24, 32.
        grid_level (int, optional): Node-count multiplier.
        output_dir (str, optional): Directory to write ``oracle.json`` into.

    Returns:
        dict: Ratio tables per cavity, with the fitted convergence exponent.
    """
    scene = load_scene(scene_path, example)
    taus = list(tau_grid or ORACLE_TAU_GRID)
    level = grid_level or SETTINGS.grid_level
    ids = [cavity_id] if cavity_id else sorted(c.id for c in scene.cavities)
    tables = []
    for cid in ids:
        table = compare_to_laplace(scene, cid, taus, grid_level=level)
        tables.append(
            {
                "cavity_id": cid,
                "exponent": table.exponent,
                "rows": [
                    {
                        "tau": row.tau,
                        "oracle": _log_value(row.oracle),
                        "leading": _log_value(row.leading),
                        "ratio": row.ratio,
                        "tail_bound": row.tail_bound,
                    }
                    for row in table.rows
                ],
            }
        )
    return _save(output_dir, "oracle.json", {"tables": tables})


def _forward_series(
    scene: Scene,
    taus: List[float],
    truncation_T: Optional[float],
    n_max: Optional[int],
    grid_level: int,
    output_dir: Optional[str],
) -> LogSeries:
    def create() -> LogSeries:
        return indicator_series(
            scene, taus, truncation_T=truncation_T, n_max=n_max, grid_level=grid_level
        )

    if not output_dir:
        return create()
    key = series_key(scene, taus, {"T": truncation_T, "n_max": n_max, "level": grid_level})
    path = Path(output_dir) / f"forward-{key}.csv"
    return load_or_create_series(path, create, gamma0=scene.gamma0)


def run_forward(
    scene_path: Optional[str] = None,
    example: Optional[str] = None,
    tau_grid: Optional[List[float]] = None,
    truncation_T: Optional[float] = None,
    n_max: Optional[int] = None,
    grid_level: Optional[int] = None,
    output_dir: Optional[str] = None,
) -> Dict:
    """
    Exact indicator samples J_τ for spherical cavities around a ball probe.

    Args:
        scene_path (str, optional): Scene JSON file.
        example (str, optional): Built-in layout name (default "cfg1").
        tau_grid (List[float], optional): Increasing τ values.
        truncation_T (float, optional): Adds the synthetic τ⁻¹e^{-τT} gap term.
        n_max (int, optional): Initial mode truncation.
        grid_level (int, optional): Volume quadrature multiplier.
        output_dir (str, optional): Directory for ``forward.csv``.

    Returns:
        dict: Samples as (τ, sign, log|J|) and the CSV text. Every sample has passed
        the boundary/volume cross-check.

    Example:
        example="cfg1" -> every sample has sign -1
    """
    scene = load_scene(scene_path, example)
    taus = list(tau_grid or SETTINGS.tau_grid)
    level = grid_level or SETTINGS.grid_level
    n_max = n_max or SETTINGS.n_max
    series = _forward_series(scene, taus, truncation_T, n_max, level, None)
    report = {"samples": _series_rows(series), "csv": series_to_csv(series)}
    if output_dir:
        report["output"] = str(save_series(series, Path(output_dir) / "forward.csv"))
    return report


def _fit_report(
    series: LogSeries,
    model: FitModel,
    T: Optional[float],
    tau_min: Optional[float],
    tau_max: Optional[float],
) -> Dict:
    """
    Fit l₀ and classify e^{τT}I_τ. With T given, a window the fit rejects
    (mixed signs, too few samples) still gets a classification; the fit fields
    are then None and ``fit_error`` says why.
    """
    try:
        result = fit_shortest_length(series, model=model, tau_min=tau_min, tau_max=tau_max)
    except ReconstructionError as exc:
        if T is None:
            raise
        LOG.warning(f"l₀ fit skipped: {exc}")
        result = None
        report = dict.fromkeys(
            ("l0_hat", "stderr", "sign_class", "window", "model", "n_samples", "T0_hat")
        )
        report["fit_error"] = str(exc)
    else:
        report = {
            "l0_hat": result.l0_hat,
            "stderr": result.stderr,
            "sign_class": result.sign_class.value,
            "window": list(result.window),
            "model": result.model.value,
            "n_samples": result.n_samples,
            "T0_hat": result.T0_hat,
        }
    if T is not None:
        report["T"] = T
        report["classification"] = classify_sign(series, T, result=result, model=model).value
    return report


def run_reconstruct(
    input_path: Optional[str] = None,
    scene_path: Optional[str] = None,
    example: Optional[str] = None,
    model: str = FitModel.SLOPE_PLUS_LOG.value,
    T: Optional[float] = None,
    gamma0: float = 1.0,
    tau_grid: Optional[List[float]] = None,
    tau_min: Optional[float] = None,
    tau_max: Optional[float] = None,
    output_dir: Optional[str] = None,
) -> Dict:
    """
    Estimate l₀ from indicator samples, read from CSV or computed by a forward run.

    Args:
        input_path (str, optional): ``tau,sign,log_mag`` CSV file.
        scene_path (str, optional): Scene for a forward run when no CSV is given.
        example (str, optional): Built-in layout for a forward run.
        model (str): "pure_slope" or "slope_plus_log".
        T (float, optional): Exponent to classify.
        gamma0 (float): γ₀ for a CSV input.
        tau_grid (List[float], optional): τ values of the forward run.
        tau_min (float, optional): Fit window start.
        tau_max (float, optional): Fit window end.
        output_dir (str, optional): Directory for ``reconstruct.json``.

    Returns:
        dict: l0_hat with its standard error, sign class and optional classification.
    """
    if input_path:
        series = load_series(Path(input_path), gamma0=gamma0)
    else:
        scene = load_scene(scene_path, example)
        taus = list(tau_grid or SETTINGS.tau_grid)
        series = _forward_series(
            scene, taus, None, SETTINGS.n_max, SETTINGS.grid_level, output_dir
        )
    report = _fit_report(series, FitModel(model), T, tau_min, tau_max)
    report["source"] = series.source
    return _save(output_dir, "reconstruct.json", report)


def run_report(
    scene_path: Optional[str] = None,
    example: Optional[str] = None,
    tau_grid: Optional[List[float]] = None,
    T: Optional[float] = None,
    model: str = FitModel.SLOPE_PLUS_LOG.value,
    n_max: Optional[int] = None,
    grid_level: Optional[int] = None,
    output_dir: Optional[str] = None,
) -> Dict:
    """
    End to end: forward series, reconstruction, and comparison with the asymptotics.

    Args:
        scene_path (str, optional): Scene JSON file.
        example (str, optional): Built-in layout name (default "cfg1").
        tau_grid (List[float], optional): τ values of the forward run.
        T (float, optional): Exponent to classify both ways.
        model (str): Fit model.
        n_max (int, optional): Initial mode truncation.
        grid_level (int, optional): Volume quadrature multiplier.
        output_dir (str, optional): Directory for ``report.json`` and the cached series.

    Returns:
        dict: Stationary data, 𝒯₀, the fit and their agreement.

    Example:
        example="cfg1" -> l0_hat within 2% of 2, sign_class "minus"
    """
    scene = load_scene(scene_path, example)
    taus = list(tau_grid or SETTINGS.tau_grid)
    level = grid_level or SETTINGS.grid_level
    series = _forward_series(scene, taus, None, n_max or SETTINGS.n_max, level, output_dir)
    pairs = find_pairs(scene)
    lengths = shortest_lengths(pairs, scene)
    asymptotic = T0(scene, pairs)
    fit = _fit_report(series, FitModel(model), T, None, None)

    expected_sign = "plus" if asymptotic.T0 > 0 else "minus"
    l0_hat = fit["l0_hat"]
    report = {
        "l0": lengths.l0,
        "regime": lengths.regime,
        "T0": asymptotic.T0,
        "fit": fit,
        "relative_l0_error": None if l0_hat is None else abs(l0_hat - lengths.l0) / lengths.l0,
        "sign_agrees": asymptotic.T0_is_zero or fit["sign_class"] == expected_sign,
        "samples": _series_rows(series),
    }
    if T is not None:
        report["asymptotic_classification"] = classify_limit(asymptotic, T).value
    if l0_hat is not None:
        LOG.info(f"Report: l0_hat = {l0_hat:.8g} against l₀ = {lengths.l0:.8g}")
    return _save(output_dir, "report.json", report)
