"""JSON experiment configs and the records written for each run."""
from __future__ import annotations

import copy
import enum
import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

from qcprop.catalog import HAMILTONIANS
from qcprop.dynamics import BoundaryData, SolverSettings
from qcprop.errors import ConfigError
from qcprop.geometry import PhaseSpaceGeometry
from qcprop.symbols import ALGEBRA_FOR_KIND, HamiltonianSpec


class Mode(str, enum.Enum):
    PROPAGATE = "propagate"
    SWEEP = "sweep"
    CONVERGENCE = "convergence"
    VALIDATE = "validate"


def parse_complex(value) -> complex:
    """Accept a number, ``[re, im]``, ``{"re": .., "im": ..}`` or a string like ``"0.3+0.2j"``."""
    try:
        if isinstance(value, dict):
            return complex(float(value.get("re", 0.0)), float(value.get("im", 0.0)))
        if isinstance(value, (list, tuple)):
            re, im = value
            return complex(float(re), float(im))
        if isinstance(value, str):
            return complex(value.replace(" ", ""))
        return complex(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"not a complex number: {value!r}") from exc


@dataclass
class ExperimentConfig:
    geometry: PhaseSpaceGeometry
    hamiltonian: HamiltonianSpec
    boundary: BoundaryData
    solver: SolverSettings
    mode: Mode = Mode.PROPAGATE
    axes: list[tuple[str, list]] = field(default_factory=list)
    exact: dict = field(default_factory=dict)
    checks: bool = False
    raw: dict = field(default_factory=dict, repr=False)


def build_hamiltonian(rec: dict, geometry: PhaseSpaceGeometry) -> HamiltonianSpec:
    algebra = ALGEBRA_FOR_KIND[geometry.kind]
    if "example" in rec:
        name = rec["example"]
        if name not in HAMILTONIANS:
            raise ConfigError(f"unknown example Hamiltonian {name!r}")
        params = {k: (parse_complex(v) if k == "f" else float(v))
                  for k, v in rec.get("params", {}).items()}
        try:
            h = HAMILTONIANS[name](**params)
        except TypeError as exc:
            raise ConfigError(f"bad parameters for {name}: {exc}") from exc
        if h.algebra is not algebra:
            raise ConfigError(f"example {name!r} needs a {h.algebra.value} phase space")
        return h
    terms = rec.get("terms")
    if terms is None:
        raise ConfigError("hamiltonian record needs 'terms' or 'example'")
    for t in terms:
        if "coeff" in t and not isinstance(t["coeff"], dict):
            c = parse_complex(t["coeff"])
            t["coeff"] = {"re": c.real, "im": c.imag}
    return HamiltonianSpec.from_records(terms, algebra)


def parse_config(raw: dict, mode: Mode | str | None = None, tol: float | None = None) -> ExperimentConfig:
    """Validate a raw JSON config and resolve it into module inputs."""
    raw = copy.deepcopy(raw)
    for key in ("geometry", "hamiltonian", "boundary"):
        if key not in raw:
            raise ConfigError(f"config is missing the {key!r} record")
    geometry = PhaseSpaceGeometry.from_record(raw["geometry"])
    hamiltonian = build_hamiltonian(copy.deepcopy(raw["hamiltonian"]), geometry)
    b = raw["boundary"]
    try:
        boundary = BoundaryData(parse_complex(b["z_I"]), parse_complex(b["zbar_F"]), float(b["tau"]))
    except KeyError as exc:
        raise ConfigError(f"boundary record lacks {exc}") from exc
    solver = SolverSettings.from_record(raw.get("solver"))
    if tol is not None:
        solver.tol = float(tol)
    m = Mode(mode or raw.get("mode", "propagate"))
    axes = []
    for ax in raw.get("sweep", []):
        try:
            path, values = ax["path"], list(ax["values"])
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad sweep axis {ax!r}") from exc
        if not values:
            raise ConfigError(f"sweep axis {path!r} has no values")
        axes.append((path, values))
    if m in (Mode.SWEEP, Mode.CONVERGENCE) and not axes:
        raise ConfigError(f"{m.value} mode needs at least one sweep axis")
    return ExperimentConfig(geometry, hamiltonian, boundary, solver, m, axes,
                            dict(raw.get("exact", {})), bool(raw.get("checks", False)), raw)


def load_config(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc


def set_path(raw: dict, path: str, value) -> None:
    """Assign ``value`` at a dotted path such as ``geometry.weight``."""
    keys = path.split(".")
    node = raw
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(f"sweep path {path!r} crosses a non-record field")
    node[keys[-1]] = value


def expand_sweep(raw: dict, axes: list[tuple[str, list]]) -> list[tuple[dict, dict]]:
    """Cartesian product of axis values, last axis varying fastest."""
    points = []
    for combo in itertools.product(*(values for _, values in axes)):
        point = copy.deepcopy(raw)
        point.pop("sweep", None)
        for (path, _), v in zip(axes, combo):
            set_path(point, path, v)
        points.append((point, {path: v for (path, _), v in zip(axes, combo)}))
    return points
