"""Main CLI entry point for undernewton."""
import logging
import logging.handlers
from pathlib import Path
from typing import Optional

import typer
from dotenv import load_dotenv
from rich.console import Console
from rich.logging import RichHandler

from undernewton import runner
from undernewton.config import config
from undernewton.linalg import NormKind

# Load environment variables from .env file (UNDERNEWTON_HOME)
load_dotenv()

logger = logging.getLogger(__name__)

app = typer.Typer(
    name="undernewton",
    help="Newton methods for underdetermined nonlinear systems P(x) = 0",
    add_completion=False,
)


def setup_logging(verbose: bool = False):
    """Console logging through rich on stderr plus a rotating file log."""
    root = logging.getLogger()
    if getattr(setup_logging, "_done", False):
        return
    level = "DEBUG" if verbose else config.get("Logging", "console_level", "WARNING")
    console_handler = RichHandler(rich_tracebacks=True, markup=False, console=Console(stderr=True))
    console_handler.setLevel(level)
    root.setLevel(logging.DEBUG)
    root.addHandler(console_handler)

    try:
        config.log_dir.mkdir(parents=True, exist_ok=True)
        file_handler = logging.handlers.RotatingFileHandler(
            config.log_dir / "undernewton.log",
            maxBytes=config.get("Logging", "log_max_bytes", 5242880),
            backupCount=config.get("Logging", "log_backup_count", 3),
        )
    except OSError:
        logger.debug("Log directory not writable; file logging disabled")
    else:
        file_handler.setLevel(config.get("Logging", "file_level", "DEBUG"))
        file_handler.setFormatter(logging.Formatter(
            "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
        ))
        root.addHandler(file_handler)
    setup_logging._done = True


@app.command()
def solve(
    problem_file: Path = typer.Argument(..., help="JSON problem file"),
    algorithm: str = typer.Option("basic", "--algorithm", "-a", help="basic, adaptive, L, pure or constant"),
    norm_domain: Optional[NormKind] = typer.Option(None, "--norm-domain", help="Norm of the substep"),
    norm_image: Optional[NormKind] = typer.Option(None, "--norm-image", help="Norm of the residual"),
    tol: Optional[float] = typer.Option(None, "--tol", help="Stop when ||P(x)|| <= tol"),
    max_iter: Optional[int] = typer.Option(None, "--max-iter", help="Iteration limit"),
    mu: Optional[float] = typer.Option(None, "--mu", help="Covering constant (overrides file)"),
    L: Optional[float] = typer.Option(None, "--L", help="Jacobian Lipschitz constant (overrides file)"),
    rho: Optional[float] = typer.Option(None, "--rho", help="Trust-ball radius (overrides file)"),
    beta0: Optional[float] = typer.Option(None, "--beta0", help="Initial beta for the adaptive method"),
    q: Optional[float] = typer.Option(None, "--q", help="Beta reduction factor for the adaptive method"),
    alpha: Optional[float] = typer.Option(None, "--alpha", help="Step size for the constant method"),
    growth: bool = typer.Option(False, "--growth", help="Grow beta after accepted adaptive steps"),
    armijo: bool = typer.Option(False, "--armijo", help="Backtracking step size in the adaptive method"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Directory for trace.csv and summary.json"),
):
    """Run one solver on a problem file."""
    code = runner.run_solve(
        problem_file, algorithm, norm_domain, norm_image, tol, max_iter,
        mu=mu, L=L, rho=rho, beta0=beta0, q=q, alpha=alpha,
        growth=growth, armijo=armijo, out=out,
    )
    raise typer.Exit(code)


@app.command()
def certify(
    problem_file: Path = typer.Argument(..., help="JSON problem file"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Directory for certificate.json"),
):
    """Print solvability regions and whether the file's target lies inside."""
    raise typer.Exit(runner.run_certify(problem_file, out))


@app.command(name="bench-paper")
@app.command(name="bench", hidden=True)
def bench_paper(
    seed: int = typer.Option(7, "--seed", help="Seed of the random instance"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Directory for traces and summary.json"),
    n: Optional[int] = typer.Option(None, "--n", help="Number of unknowns"),
    m: Optional[int] = typer.Option(None, "--m", help="Number of equations"),
    tol: float = typer.Option(1e-10, "--tol", help="Stopping tolerance"),
    max_iter: Optional[int] = typer.Option(None, "--max-iter", help="Iteration limit per run"),
):
    """Sigmoid benchmark: Algorithms 1 and 3 with conservative and structured constants, plus the adaptive method."""
    raise typer.Exit(runner.run_bench(seed, out, n, m, tol, max_iter))


@app.command(name="oracle-check")
def oracle_check(
    seed: int = typer.Option(0, "--seed", help="Seed for the random systems"),
    count: int = typer.Option(200, "--count", help="Number of systems"),
    tol: float = typer.Option(1e-9, "--tol", help="Allowed gap to the enumeration oracle"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Directory for summary.json"),
):
    """Check l1/linf minimum-norm steps against basis enumeration."""
    raise typer.Exit(runner.run_oracle_check(seed, count, tol, out))


@app.command(name="config")
def config_cmd(
    set_key: Optional[str] = typer.Option(None, "--set", help="Configuration key to set"),
    value: Optional[str] = typer.Option(None, "--value", "-v", help="Value to set"),
    get_key: Optional[str] = typer.Option(None, "--get", help="Configuration key to get"),
):
    """Get or set configuration values (keys as Section.key)."""
    console = Console()
    key = set_key or get_key
    if not key:
        console.print("[red]ERROR: Use --get Section.key or --set Section.key --value V[/red]")
        raise typer.Exit(1)
    if "." not in key:
        console.print("[red]ERROR: Invalid key format. Use 'Section.key'[/red]")
        raise typer.Exit(1)
    section, name = key.split(".", 1)

    if set_key:
        if value is None:
            console.print("[red]ERROR: --set requires --value[/red]")
            raise typer.Exit(1)
        config.set(section, name, value)
        console.print(f"[green]✓ Set {set_key} = {value}[/green]")
        return
    current = config.get(section, name)
    if current is None:
        console.print(f"[yellow]{get_key} is not set[/yellow]")
        raise typer.Exit(1)
    console.print(f"{get_key} = {current}")


@app.callback()
def main(verbose: bool = typer.Option(False, "--verbose", help="Debug logging on stderr")):
    """undernewton - damped and pure Newton methods with minimum-norm steps."""
    setup_logging(verbose)


if __name__ == "__main__":
    app()
