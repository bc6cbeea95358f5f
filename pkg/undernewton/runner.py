"""Command orchestration behind the CLI.

Each ``run_*`` function returns the process exit code: 0 for success,
1 for usage or input errors, 2 for algorithmic non-convergence.
"""
import logging
import math
import time
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from .config import config
from .diagnostics import RunDiagnostics
from .exceptions import ProblemFileError, UnderNewtonError
from .linalg import NormKind, vector_norm
from .min_norm import LinearSystem, min_norm, oracle_min_norm
from .models import SolveOutcome, SolverConfig, SolveStatus
from .problem_file import load_problem_file
from .problems import (
    QuadraticProblem,
    quadratic_L1,
    quadratic_mu0,
    random_structured,
)
from .results import ResultWriter, outcome_summary
from .solvers import (
    solve_adaptive,
    solve_basic,
    solve_damped_constant,
    solve_L,
    solve_pure,
)
from .theory import (
    adaptive_reduction_bound,
    k_max,
    region_thm1,
    region_thm2,
    region_thm5,
    region_thm6,
)
from .utils import make_rng

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NOT_CONVERGED = 2

ALGORITHMS = ("basic", "adaptive", "L", "pure", "constant")

console = Console()


def _error(message: str) -> int:
    console.print(f"[red]{message}[/red]")
    return EXIT_INPUT


def _outcome_table(title: str, rows: list[tuple[str, SolveOutcome, float]]) -> Table:
    table = Table(title=title)
    table.add_column("Run")
    table.add_column("Status")
    table.add_column("Iterations", justify="right")
    table.add_column("Stage 1", justify="right")
    table.add_column("Final residual", justify="right")
    table.add_column("Time (s)", justify="right")
    for label, outcome, elapsed in rows:
        colour = "green" if outcome.status is SolveStatus.CONVERGED else "yellow"
        table.add_row(
            label, f"[{colour}]{outcome.status.value}[/{colour}]", str(outcome.iterations),
            str(outcome.stage1_count), f"{outcome.final_residual:.3e}", f"{elapsed:.3f}",
        )
    return table


def run_solve(
    path: Path,
    algorithm: str,
    domain_norm: Optional[NormKind] = None,
    image_norm: Optional[NormKind] = None,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    mu: Optional[float] = None,
    L: Optional[float] = None,
    rho: Optional[float] = None,
    beta0: Optional[float] = None,
    q: Optional[float] = None,
    alpha: Optional[float] = None,
    growth: bool = False,
    armijo: bool = False,
    out: Optional[Path] = None,
) -> int:
    if algorithm not in ALGORITHMS:
        return _error(f"ERROR: unknown algorithm '{algorithm}' (choose from {', '.join(ALGORITHMS)}).")
    try:
        loaded = load_problem_file(path)
    except ProblemFileError as e:
        return _error(str(e))

    constants = loaded.document.constants
    mu = mu if mu is not None else constants.mu
    L = L if L is not None else constants.L
    rho = rho if rho is not None else constants.rho

    if algorithm == "basic" and (mu is None or L is None):
        return _error("ERROR: algorithm 'basic' needs both mu and L (--mu/--L or file constants).")
    if algorithm == "L" and L is None:
        return _error("ERROR: algorithm 'L' needs L (--L or file constants).")
    if algorithm == "adaptive" and beta0 is None:
        return _error("ERROR: algorithm 'adaptive' needs --beta0.")
    if algorithm == "constant" and alpha is None:
        return _error("ERROR: algorithm 'constant' needs --alpha.")

    try:
        cfg = SolverConfig.from_config(
            domain_norm=domain_norm, image_norm=image_norm, stop_tol=tol, max_iter=max_iter,
            trust_radius=rho, q=q, armijo=armijo,
            growth=config.get("Adaptive", "growth", 2.0) if growth else None,
        )
        started = time.perf_counter()
        problem, x0 = loaded.definition, loaded.x0
        if algorithm == "basic":
            outcome = solve_basic(problem, x0, mu, L, cfg)
        elif algorithm == "L":
            outcome = solve_L(problem, x0, L, cfg)
        elif algorithm == "adaptive":
            outcome = solve_adaptive(problem, x0, beta0, cfg)
        elif algorithm == "pure":
            outcome = solve_pure(problem, x0, cfg)
        else:
            outcome = solve_damped_constant(problem, x0, alpha, cfg)
        elapsed = time.perf_counter() - started
    except (ValidationError, ValueError, UnderNewtonError) as e:
        return _error(f"ERROR: {e}")

    console.print(_outcome_table(f"{algorithm} on {problem.name}", [(algorithm, outcome, elapsed)]))
    if out is not None:
        writer = ResultWriter(out)
        writer.write_trace("trace.csv", outcome.trace)
        writer.write_json("summary.json", outcome_summary(
            outcome, algorithm=algorithm, kind=loaded.document.kind, wall_time=elapsed,
            x=outcome.x.tolist(),
        ))
        console.print(f"[green]✓ Results written to {out}[/green]")
    return EXIT_OK if outcome.status is SolveStatus.CONVERGED else EXIT_NOT_CONVERGED


def run_certify(path: Path, out: Optional[Path] = None) -> int:
    """Solvability regions for the file's right-hand side (Euclidean norms)."""
    try:
        loaded = load_problem_file(path)
    except ProblemFileError as e:
        return _error(str(e))

    constants = loaded.document.constants
    residual = loaded.definition.evaluate(loaded.x0)
    distance = vector_norm(residual, NormKind.L2)
    rho = constants.rho if constants.rho is not None else math.inf
    regions = []
    certificate: dict = {"kind": loaded.document.kind, "residual_norm": distance}

    if isinstance(loaded.source, QuadraticProblem):
        mu0 = constants.mu0 if constants.mu0 is not None else quadratic_mu0(loaded.source)
        L = constants.L if constants.L is not None else quadratic_L1(loaded.source)
    else:
        mu0, L = constants.mu0, constants.L
        if (mu0 is None or L is None) and (constants.mu is None or constants.rho is None):
            return _error("ERROR: certify needs a quadratic problem or constants (mu0, L) or (mu, rho).")
    certificate.update({"mu0": mu0, "L": L})

    if mu0 == 0.0:
        console.print("[yellow]mu0 = 0, no region[/yellow]")
        certificate["regions"] = []
        certificate["verdict"] = "mu0 = 0, no region"
    else:
        if mu0 is not None and L is not None and L > 0.0:
            console.print(f"mu0 = {mu0:.10g}, L = {L:.10g}")
            regions.append(region_thm2(mu0, L, rho))
            if isinstance(loaded.source, QuadraticProblem):
                regions.append(region_thm5(mu0, L))
                regions.append(region_thm6(mu0, L))
        if constants.mu is not None and constants.rho is not None:
            regions.append(region_thm1(constants.mu, constants.rho))

        table = Table(title=f"Solvability regions (||P(x0)|| = {distance:.6g})")
        table.add_column("Source")
        table.add_column("radius_y", justify="right")
        table.add_column("radius_x", justify="right")
        table.add_column("Inside")
        for region in regions:
            inside = region.contains(distance)
            table.add_row(
                region.source, f"{region.radius_y:.10g}", f"{region.radius_x:.10g}",
                "[green]yes[/green]" if inside else "[red]no[/red]",
            )
        console.print(table)
        certificate["regions"] = [
            {**region.model_dump(), "inside": region.contains(distance),
             "solution_bound": region.solution_bound(distance)}
            for region in regions
        ]

    if out is not None:
        ResultWriter(out).write_json("certificate.json", certificate)
        console.print(f"[green]✓ Certificate written to {out}[/green]")
    return EXIT_OK


def run_bench(
    seed: int = 7,
    out: Optional[Path] = None,
    n: Optional[int] = None,
    m: Optional[int] = None,
    tol: float = 1e-10,
    max_iter: Optional[int] = None,
) -> int:
    """Random sigmoid benchmark.

    Algorithms 1 and 3 each run with the conservative constants and with the
    structured ones, followed by one adaptive run.
    """
    n = n or config.get("Bench", "n", 60)
    m = m or config.get("Bench", "m", 21)
    beta0 = float(config.get("Bench", "beta0", 5.0))
    max_iter = max_iter or config.get("Bench", "max_iter", 5000)
    try:
        structured = random_structured(seed, n, m)
        cfg = SolverConfig.from_config(
            domain_norm=NormKind.L2, image_norm=NormKind.L2, stop_tol=tol, max_iter=max_iter,
        )
    except (ValidationError, ValueError) as e:
        return _error(f"ERROR: {e}")

    problem = structured.to_problem()
    x0 = np.zeros(n)
    u0 = vector_norm(problem.evaluate(x0), NormKind.L2)
    mu_c, L_c = structured.conservative_constants()
    mu_s, L_s = structured.structured_constants()
    beta_s = mu_s ** 2 / L_s

    runs = {}
    diagnostics = RunDiagnostics()
    for label, solve in (
        ("conservative", lambda: solve_basic(problem, x0, mu_c, L_c, cfg)),
        ("structured", lambda: solve_basic(problem, x0, mu_s, L_s, cfg)),
        ("conservative-L", lambda: solve_L(problem, x0, L_c, cfg)),
        ("structured-L", lambda: solve_L(problem, x0, L_s, cfg, step_map=structured.C)),
        ("adaptive", lambda: solve_adaptive(problem, x0, beta0, cfg)),
    ):
        started = time.perf_counter()
        outcome = solve()
        runs[label] = (outcome, time.perf_counter() - started)
        diagnostics.record_outcome(label, outcome, {"seed": seed, "n": n, "m": m})

    console.print(_outcome_table(
        f"Sigmoid benchmark (seed={seed}, n={n}, m={m})",
        [(label, outcome, elapsed) for label, (outcome, elapsed) in runs.items()],
    ))
    summary = {
        "seed": seed, "n": n, "m": m, "u0": u0, "stop_tol": tol,
        "runs": {
            label: outcome_summary(outcome, wall_time=elapsed)
            for label, (outcome, elapsed) in runs.items()
        },
        "diagnostics": diagnostics.summary(),
    }
    summary["runs"]["conservative"].update(mu=mu_c, L=L_c, k_max=k_max(u0, mu_c, L_c))
    summary["runs"]["structured"].update(mu=mu_s, L=L_s, k_max=k_max(u0, mu_s, L_s))
    summary["runs"]["conservative-L"].update(L=L_c)
    summary["runs"]["structured-L"].update(L=L_s, step_map="C")
    summary["runs"]["adaptive"].update(
        beta0=beta0, q=cfg.q, reduction_bound=adaptive_reduction_bound(beta0, beta_s, cfg.q),
    )

    if out is not None:
        writer = ResultWriter(out)
        for label, (outcome, _) in runs.items():
            writer.write_trace(f"{label}.csv", outcome.trace)
        writer.write_json("summary.json", summary)
        console.print(f"[green]✓ Traces written to {out}[/green]")

    if diagnostics.failure_count:
        console.print(f"[yellow]{diagnostics.failure_count} run(s) did not converge[/yellow]")
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def run_oracle_check(seed: int = 0, count: int = 200, tol: float = 1e-9, out: Optional[Path] = None) -> int:
    """Compare simplex-based minimum norms with basis enumeration on small systems."""
    if not (math.isfinite(tol) and tol > 0.0):
        return _error(f"ERROR: tolerance must be a positive finite number, got {tol}.")
    if count < 0:
        return _error(f"ERROR: count must be nonnegative, got {count}.")

    rng = make_rng(seed)
    diagnostics = RunDiagnostics()
    passed = 0
    for i in range(count):
        m = int(rng.integers(1, 5))
        n = int(rng.integers(m, 7))
        system = LinearSystem(A=rng.standard_normal((m, n)), b=rng.standard_normal(m))
        ok = True
        for kind in (NormKind.L1, NormKind.LINF):
            label = f"oracle-{kind.value}"
            try:
                z = min_norm(system, kind)
                expected = oracle_min_norm(system, kind)
            except UnderNewtonError as e:
                diagnostics.record_error(label, e, {"instance": i})
                ok = False
                continue
            gap = abs(vector_norm(z, kind) - expected)
            feasibility = vector_norm(system.A @ z - system.b, NormKind.L2)
            if gap > tol or feasibility > 1e-8 * max(1.0, vector_norm(system.b, NormKind.L2)):
                diagnostics.record_error(
                    label, ValueError(f"norm gap {gap:.3e}, feasibility {feasibility:.3e}"),
                    {"instance": i, "m": m, "n": n},
                )
                ok = False
        passed += ok

    failed = count - passed
    colour = "green" if failed == 0 else "red"
    console.print(f"[{colour}]oracle-check: {passed} passed, {failed} failed[/{colour}]")
    for pattern in diagnostics.detect_patterns():
        console.print(f"[yellow]repeated failure: {pattern['label']} {pattern['kind']} x{pattern['count']}[/yellow]")
    if out is not None:
        ResultWriter(out).write_json("summary.json", {
            "seed": seed, "count": count, "tol": tol, "passed": passed, "failed": failed,
            "diagnostics": diagnostics.summary(),
        })
        console.print(f"[green]✓ Summary written to {out}[/green]")
    return EXIT_OK if failed == 0 else EXIT_NOT_CONVERGED
