import json
from typing import Callable, Dict, List, Optional

import typer
from mcp.server.fastmcp.utilities.logging import configure_logging, get_logger

from .config import SETTINGS, parse_tau_grid
from .errors import ConvergenceError, DegeneratePairError, EnclosureLabError, SceneValidationError
from .functions import lab_tools
from .reconstruct import FitModel
from .scene import validate

LOG = get_logger(__name__)

EXIT_FAILURE = 1
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

app = typer.Typer(
    name="enclosure-lab",
    help="Enclosure-method lab: stationary pairs, asymptotics, oracle and forward checks.",
    no_args_is_help=True,
)

SceneOption = typer.Option(None, "--scene", help="Scene JSON file.")
ExampleOption = typer.Option(None, "--example", help="Built-in layout, e.g. cfg1 or example-3.1.")
OutputOption = typer.Option(None, "--output-dir", help="Directory for CSV/JSON results.")
TauGridOption = typer.Option(None, "--tau-grid", help="Comma separated τ values, e.g. 8,16,32.")
GridLevelOption = typer.Option(None, "--grid-level", min=1, help="Quadrature node multiplier.")
NMaxOption = typer.Option(None, "--n-max", min=1, help="Initial mode truncation.")
TOption = typer.Option(None, "--T", help="Exponent T for the limit classification.")
ModelOption = typer.Option(FitModel.SLOPE_PLUS_LOG, "--model", help="Fit model.")


def _tau_grid(text: Optional[str]) -> Optional[List[float]]:
    if text is None:
        return None
    try:
        return list(parse_tau_grid(text))
    except ValueError as exc:
        raise typer.BadParameter(str(exc), param_hint="--tau-grid") from exc


def _output_dir(value: Optional[str]) -> str:
    return value or str(SETTINGS.output_dir)


def _emit(producer: Callable[[], Dict], text_key: Optional[str] = None) -> None:
    """Run a lab tool, print its result and map lab errors to exit codes."""
    try:
        result = producer()
    except SceneValidationError as exc:
        for diagnostic in exc.diagnostics:
            typer.echo(f"invalid scene: {diagnostic}", err=True)
        raise typer.Exit(code=EXIT_VALIDATION)
    except (ConvergenceError, DegeneratePairError) as exc:
        typer.echo(f"numerical failure: {exc}", err=True)
        raise typer.Exit(code=EXIT_NUMERICAL)
    except (EnclosureLabError, KeyError) as exc:
        typer.echo(f"error: {exc}", err=True)
        raise typer.Exit(code=EXIT_FAILURE)
    if text_key is not None:
        typer.echo(result[text_key], nl=False)
    else:
        typer.echo(json.dumps(result, indent=2, sort_keys=False))


@app.callback()
def configure(
    log_level: str = typer.Option(SETTINGS.log_level, "--log-level", help="Logging level."),
):
    configure_logging(log_level.upper())


@app.command("validate")
def validate_command(path: str = typer.Argument(..., help="Scene JSON file.")):
    """Check a scene file against every modelling assumption."""

    def producer() -> Dict:
        scene = validate(path)
        return {"valid": True, "cavities": [c.id for c in scene.cavities]}

    _emit(producer)


@app.command("stationary")
def stationary_command(
    scene: Optional[str] = SceneOption,
    example: Optional[str] = ExampleOption,
    n_starts: int = typer.Option(32, "--n-starts", min=1, help="Multistarts per cavity."),
    output_dir: Optional[str] = OutputOption,
):
    """Stationary pairs, l₀/l₀⁺/l₀⁻/l₁ and the non-degeneracy report."""
    _emit(lambda: lab_tools.run_stationary(scene, example, n_starts, _output_dir(output_dir)))


@app.command("asympt")
def asympt_command(
    scene: Optional[str] = SceneOption,
    example: Optional[str] = ExampleOption,
    T: Optional[float] = TOption,
    output_dir: Optional[str] = OutputOption,
):
    """𝒯₀, the per-pair table and the classification for --T."""
    _emit(lambda: lab_tools.run_asympt(scene, example, T, _output_dir(output_dir)))


@app.command("oracle")
def oracle_command(
    scene: Optional[str] = SceneOption,
    example: Optional[str] = ExampleOption,
    cavity: Optional[str] = typer.Option(None, "--cavity", help="Cavity id (default: all)."),
    tau_grid: Optional[str] = TauGridOption,
    grid_level: Optional[int] = GridLevelOption,
    output_dir: Optional[str] = OutputOption,
):
    """Brute-force kernel integral against its Laplace top term."""
    taus = _tau_grid(tau_grid)
    _emit(
        lambda: lab_tools.run_oracle(
            scene, example, cavity, taus, grid_level, _output_dir(output_dir)
        )
    )


@app.command("forward")
def forward_command(
    scene: Optional[str] = SceneOption,
    example: Optional[str] = ExampleOption,
    tau_grid: Optional[str] = TauGridOption,
    T: Optional[float] = typer.Option(
        None, "--T", help="Add the synthetic τ⁻¹e^(-τT) truncation term."
    ),
    n_max: Optional[int] = NMaxOption,
    grid_level: Optional[int] = GridLevelOption,
    output_dir: Optional[str] = OutputOption,
):
    """Exact indicator series, printed as tau,sign,log_mag CSV."""
    taus = _tau_grid(tau_grid)
    _emit(
        lambda: lab_tools.run_forward(
            scene, example, taus, T, n_max, grid_level, _output_dir(output_dir)
        ),
        text_key="csv",
    )


@app.command("reconstruct")
def reconstruct_command(
    input_path: Optional[str] = typer.Option(None, "--input", help="tau,sign,log_mag CSV."),
    scene: Optional[str] = SceneOption,
    example: Optional[str] = ExampleOption,
    model: FitModel = ModelOption,
    T: Optional[float] = TOption,
    gamma0: float = typer.Option(1.0, "--gamma0", min=0.0, help="γ₀ of a CSV input."),
    tau_grid: Optional[str] = TauGridOption,
    tau_min: Optional[float] = typer.Option(None, "--tau-min", help="Fit window start."),
    tau_max: Optional[float] = typer.Option(None, "--tau-max", help="Fit window end."),
    output_dir: Optional[str] = OutputOption,
):
    """l0_hat and the sign class, from --input or from a forward run."""
    taus = _tau_grid(tau_grid)
    _emit(
        lambda: lab_tools.run_reconstruct(
            input_path, scene, example, model.value, T, gamma0, taus, tau_min, tau_max,
            _output_dir(output_dir),
        )
    )


@app.command("report")
def report_command(
    scene: Optional[str] = SceneOption,
    example: Optional[str] = ExampleOption,
    tau_grid: Optional[str] = TauGridOption,
    T: Optional[float] = TOption,
    model: FitModel = ModelOption,
    n_max: Optional[int] = NMaxOption,
    grid_level: Optional[int] = GridLevelOption,
    output_dir: Optional[str] = OutputOption,
):
    """Forward run, reconstruction and comparison with 𝒯₀."""
    taus = _tau_grid(tau_grid)
    _emit(
        lambda: lab_tools.run_report(
            scene, example, taus, T, model.value, n_max, grid_level, _output_dir(output_dir)
        )
    )


@app.command("serve")
def serve_command():
    """Run the MCP server over stdio."""
    from .server import mcp

    LOG.info("Starting Enclosure Lab MCP server")
    mcp.run()
