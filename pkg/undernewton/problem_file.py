"""JSON problem files read by the CLI.

Example::

    {"format": 1, "kind": "quadratic", "n": 1, "m": 1,
     "payload": {"A": [[[1.0]]], "B": [[1.0]], "y": [0.105]},
     "constants": {"mu": 1.0, "L": 1.0}}

Either ``payload`` or ``generator`` ({seed, n, m, distribution}) must be given.
"""
import json
import logging
from pathlib import Path
from typing import Any, Literal, NamedTuple, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .exceptions import ProblemFileError
from .problems import (
    QuadraticProblem,
    ScalarProblem,
    StructuredProblem,
    linear_feasibility_transform,
    random_linear_feasibility,
    random_quadratic,
    random_scalar_polynomial,
    random_structured,
    scalar_polynomial,
)
from .solvers import ProblemDefinition

logger = logging.getLogger(__name__)

ProblemKind = Literal["quadratic", "structured-sigmoid", "linear-feasibility", "scalar-polynomial"]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GeneratorSection(_Strict):
    seed: int = Field(ge=0, lt=2**64)
    n: int = Field(ge=1)
    m: int = Field(ge=1)
    distribution: Literal["standard-normal"] = "standard-normal"


class Constants(_Strict):
    mu: Optional[float] = Field(default=None, gt=0.0)
    mu0: Optional[float] = Field(default=None, gt=0.0)
    L: Optional[float] = Field(default=None, gt=0.0)
    rho: Optional[float] = Field(default=None, gt=0.0)


class QuadraticPayload(_Strict):
    A: list[list[list[float]]]
    B: list[list[float]]
    y: list[float]


class StructuredPayload(_Strict):
    C: list[list[float]]
    b: list[float]
    y: list[float]


class FeasibilityPayload(_Strict):
    A: list[list[float]]
    b: list[float]


class PolynomialPayload(_Strict):
    coefficients: list[list[float]]
    constant: float = 0.0


_PAYLOADS = {
    "quadratic": QuadraticPayload,
    "structured-sigmoid": StructuredPayload,
    "linear-feasibility": FeasibilityPayload,
    "scalar-polynomial": PolynomialPayload,
}


class ProblemFile(_Strict):
    format: Literal[1]
    kind: ProblemKind
    n: int = Field(ge=1)
    m: int = Field(ge=1)
    payload: Optional[dict[str, Any]] = None
    generator: Optional[GeneratorSection] = None
    constants: Constants = Constants()
    x0: Optional[list[float]] = None


class LoadedProblem(NamedTuple):
    definition: ProblemDefinition
    x0: np.ndarray
    source: Union[QuadraticProblem, StructuredProblem, ScalarProblem, tuple]
    document: ProblemFile


def _shape_error(field: str, expected: tuple, got: tuple) -> ProblemFileError:
    return ProblemFileError(f"ERROR: {field} has shape {got}, expected {expected}.", field=field)


def _check_shape(field: str, values, expected: tuple) -> np.ndarray:
    try:
        arr = np.array(values, dtype=float)
    except ValueError:
        raise ProblemFileError(f"ERROR: {field} is ragged.", field=field)
    if arr.shape != expected:
        raise _shape_error(field, expected, arr.shape)
    if not np.all(np.isfinite(arr)):
        raise ProblemFileError(f"ERROR: {field} contains non-finite values.", field=field)
    return arr


def _validate(model: type[BaseModel], data: Any, prefix: str = ""):
    try:
        return model.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        field = prefix + ".".join(str(part) for part in first["loc"])
        raise ProblemFileError(
            f"ERROR: invalid problem file field '{field}': {first['msg']}", field=field
        )


def parse_problem_file(data: Any) -> ProblemFile:
    """Validate decoded JSON; errors name the offending field."""
    document = _validate(ProblemFile, data)
    if document.payload is not None:
        _validate(_PAYLOADS[document.kind], document.payload, prefix="payload.")
    if (document.payload is None) == (document.generator is None):
        raise ProblemFileError("ERROR: exactly one of 'payload' or 'generator' is required.", field="payload")
    if document.generator is not None and (document.generator.n, document.generator.m) != (document.n, document.m):
        raise ProblemFileError("ERROR: generator dimensions differ from n, m.", field="generator")
    if document.m > document.n:
        raise ProblemFileError(f"ERROR: expected m <= n, got m={document.m}, n={document.n}.", field="m")
    if document.kind == "scalar-polynomial" and document.m != 1:
        raise ProblemFileError("ERROR: scalar-polynomial problems have m = 1.", field="m")
    if document.x0 is not None and len(document.x0) != document.n:
        raise ProblemFileError(f"ERROR: x0 has length {len(document.x0)}, expected {document.n}.", field="x0")
    return document


def load_problem_file(path: Path) -> LoadedProblem:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as e:
        raise ProblemFileError(f"ERROR: cannot read problem file {path}: {e}", field="")
    except json.JSONDecodeError as e:
        raise ProblemFileError(f"ERROR: problem file {path} is not valid JSON: {e}", field="")
    document = parse_problem_file(data)
    loaded = build_problem(document)
    logger.info(f"Loaded {document.kind} problem from {path} (n={document.n}, m={document.m})")
    return loaded


def build_problem(document: ProblemFile) -> LoadedProblem:
    n, m = document.n, document.m
    gen = document.generator
    payload = document.payload or {}
    x0 = np.zeros(n)

    if document.kind == "quadratic":
        if gen is not None:
            source = random_quadratic(gen.seed, n, m)
        else:
            source = QuadraticProblem(
                A=_check_shape("payload.A", payload["A"], (m, n, n)),
                B=_check_shape("payload.B", payload["B"], (m, n)),
                y=_check_shape("payload.y", payload["y"], (m,)),
            )
        definition = source.to_problem()
    elif document.kind == "structured-sigmoid":
        if gen is not None:
            source = random_structured(gen.seed, n, m)
        else:
            source = StructuredProblem(
                C=_check_shape("payload.C", payload["C"], (m, n)),
                b=_check_shape("payload.b", payload["b"], (m,)),
                y=_check_shape("payload.y", payload["y"], (m,)),
            )
        definition = source.to_problem()
    elif document.kind == "linear-feasibility":
        if gen is not None:
            A, b, _ = random_linear_feasibility(gen.seed, n, m)
        else:
            A = _check_shape("payload.A", payload["A"], (m, n))
            b = _check_shape("payload.b", payload["b"], (m,))
        source = (A, b)
        definition = linear_feasibility_transform(A, b)
        x0 = np.ones(n)
    else:
        if gen is not None:
            source = random_scalar_polynomial(gen.seed, n)
        else:
            coefficients = np.array(payload["coefficients"], dtype=float)
            if coefficients.ndim != 2 or coefficients.shape[0] != n or coefficients.shape[1] == 0:
                raise _shape_error("payload.coefficients", (n, "degree"), coefficients.shape)
            source = scalar_polynomial(coefficients, payload.get("constant", 0.0))
        definition = source.to_problem()

    if document.x0 is not None:
        x0 = _check_shape("x0", document.x0, (n,))
    return LoadedProblem(definition=definition, x0=x0, source=source, document=document)
