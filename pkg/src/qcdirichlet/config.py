"""JSON problem configurations.

A config file fully determines a solve or an audit: domain, coefficients,
source, boundary data, grid, tolerances and the random seed.  Parsing
enforces every invariant of the target problem type up front and reports the
offending key path together with the violated invariant, so malformed runs
fail before any numerics start.

Minimal Beltrami example:

    {
      "schema_version": 1,
      "task": "beltrami",
      "domain": {"preset": "disk"},
      "mu": {"preset": "zero"},
      "sigma": {"preset": "zero"},
      "phi": {"preset": "cos-harmonic"}
    }

Defaults: grid n=256, half_width=2.0, solver tolerance 1e-6, seed 2718.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .beltrami import BeltramiProblem
from .fields import BoundaryData, ComplexField, DomainSpec, Grid, RealField, field_from_callable
from .fieldio import import_field
from .poisson import A_from_mu, MatrixField, PoissonProblem
from .presets import (
    boundary_data_preset,
    domain_preset,
    mu_preset,
    phi_gauge_preset,
    psi_family_preset,
    q_profile_preset,
)

__all__ = ["parse_config", "ConfigError", "ParsedConfig", "DEFAULTS"]

SCHEMA_VERSION = 1
DEFAULTS = {
    "grid": {"n": 256, "half_width": 2.0, "center": [0.0, 0.0]},
    "tolerances": {"solver": 1e-6, "ladder": 1e-3},
    "seed": 2718,
    "boundary_samples": 512,
}


class ConfigError(ValueError):
    """Config rejected; the message names the key path and the invariant."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class ParsedConfig:
    """A validated configuration ready to run."""

    task: str
    problem: Optional[object]
    grid: Grid
    tolerances: dict
    seed: int
    audit: dict = dc_field(default_factory=dict)
    raw: dict = dc_field(default_factory=dict)
    degenerate: str = "auto"


def _complex_of(node, path: str) -> complex:
    if isinstance(node, (int, float)):
        return complex(node)
    if isinstance(node, (list, tuple)) and len(node) == 2:
        return complex(node[0], node[1])
    raise ConfigError(path, "expected a number or an [x, y] pair")


def _known_keys(node: dict, allowed: set, path: str) -> None:
    unknown = set(node) - allowed
    if unknown:
        raise ConfigError(path, f"unknown keys {sorted(unknown)}; allowed: {sorted(allowed)}")


def _parse_grid(node: dict) -> Grid:
    _known_keys(node, {"n", "half_width", "center"}, "grid")
    n = int(node.get("n", DEFAULTS["grid"]["n"]))
    L = float(node.get("half_width", DEFAULTS["grid"]["half_width"]))
    c = _complex_of(node.get("center", DEFAULTS["grid"]["center"]), "grid.center")
    try:
        return Grid(c, L, n)
    except ValueError as exc:
        raise ConfigError("grid", str(exc))


def _parse_domain(node: dict, samples: int) -> DomainSpec:
    _known_keys(node, {"preset", "radius", "center", "a", "b", "vertices", "samples"}, "domain")
    name = node.get("preset", "disk")
    kwargs = {k: v for k, v in node.items() if k not in ("preset", "samples")}
    if "center" in kwargs:
        kwargs["center"] = _complex_of(kwargs["center"], "domain.center")
    try:
        return domain_preset(name, samples=int(node.get("samples", samples)), **kwargs)
    except (ValueError, KeyError) as exc:
        raise ConfigError("domain", str(exc))


def _parse_complex_coefficient(node: dict, grid: Grid, path: str,
                               base_dir: Path) -> ComplexField:
    _known_keys(node, {"preset", "csv", "K", "k", "z0", "lam", "supersample",
                       "radius", "center", "value"}, path)
    if "csv" in node:
        f = import_field(base_dir / node["csv"])
        if f.grid != grid:
            raise ConfigError(path + ".csv", "field grid does not match the config grid")
        return f if isinstance(f, ComplexField) else ComplexField(f.grid, f.values.astype(complex))
    name = node.get("preset", "zero")
    ss = int(node.get("supersample", 3))
    if name == "disk-indicator":
        r = float(node.get("radius", 0.5))
        c = _complex_of(node.get("center", 0.0), path + ".center")
        v = _complex_of(node.get("value", 1.0), path + ".value")
        fn = lambda z: v * (np.abs(z - c) <= r)
        return field_from_callable(grid, fn, supersample=ss)
    kwargs = {k: v for k, v in node.items() if k in ("K", "k", "lam")}
    if "z0" in node:
        kwargs["z0"] = _complex_of(node["z0"], path + ".z0")
    try:
        fn = mu_preset(name, **kwargs)
    except ValueError as exc:
        raise ConfigError(path, str(exc))
    return field_from_callable(grid, fn, supersample=ss)


def _parse_real_source(node: dict, grid: Grid, path: str, base_dir: Path) -> RealField:
    _known_keys(node, {"preset", "csv", "radius", "center", "value", "supersample"}, path)
    if "csv" in node:
        f = import_field(base_dir / node["csv"])
        if f.grid != grid:
            raise ConfigError(path + ".csv", "field grid does not match the config grid")
        return RealField(f.grid, f.values.real, f.mask)
    name = node.get("preset", "zero")
    ss = int(node.get("supersample", 3))
    if name == "zero":
        return RealField(grid, np.zeros((grid.n, grid.n)))
    if name == "disk-indicator":
        r = float(node.get("radius", 0.5))
        c = _complex_of(node.get("center", 0.0), path + ".center")
        v = float(node.get("value", 1.0))
        return field_from_callable(grid, lambda z: v * (np.abs(z - c) <= r),
                                   supersample=ss, real=True)
    raise ConfigError(path, f"unknown source preset {name!r}")


def _parse_phi(node: dict, domain: DomainSpec) -> BoundaryData:
    _known_keys(node, {"preset", "c", "values"}, "phi")
    name = node.get("preset", "const")
    kwargs = {k: v for k, v in node.items() if k != "preset"}
    try:
        return boundary_data_preset(name, domain, **kwargs)
    except (ValueError, KeyError) as exc:
        raise ConfigError("phi", str(exc))


def _parse_matrix(node: dict, grid: Grid, base_dir: Path) -> MatrixField:
    _known_keys(node, {"preset", "K", "k", "z0", "lam", "supersample",
                       "csv_a11", "csv_a12", "csv_a21", "csv_a22"}, "A")
    name = node.get("preset", "identity")
    if name == "identity":
        return MatrixField.identity(grid)
    if name == "from-mu":
        sub = dict(node)
        sub.pop("preset")
        sub["preset"] = sub.pop("mu_preset", None) or "radial-stretch"
        mu = _parse_complex_coefficient(sub, grid, "A.from-mu", base_dir)
        try:
            return A_from_mu(mu)
        except ValueError as exc:
            raise ConfigError("A", str(exc))
    if name == "csv":
        fields = {}
        for key in ("a11", "a12", "a21", "a22"):
            f = import_field(base_dir / node[f"csv_{key}"])
            if f.grid != grid:
                raise ConfigError(f"A.csv_{key}", "field grid does not match the config grid")
            fields[key] = RealField(f.grid, f.values.real, f.mask)
        try:
            return MatrixField(fields["a11"], fields["a12"], fields["a21"], fields["a22"])
        except ValueError as exc:
            raise ConfigError("A", str(exc))
    raise ConfigError("A", f"unknown matrix preset {name!r}")


def parse_config(path: Union[str, Path], grid_n: Optional[int] = None,
                 seed: Optional[int] = None) -> ParsedConfig:
    """Load and validate a JSON problem configuration.

    Returns a ParsedConfig whose ``problem`` is a BeltramiProblem, a
    PoissonProblem, or None for audit / map-only tasks (their parameters
    land in ``audit``).  Every invariant violation is raised as ConfigError
    naming the key path and the broken invariant.  ``grid_n`` and ``seed``
    override the config before any field is sampled.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(str(path), "config file does not exist")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}")
    if not isinstance(raw, dict):
        raise ConfigError(str(path), "top level must be an object")
    if grid_n is not None:
        raw.setdefault("grid", {})["n"] = int(grid_n)
    if seed is not None:
        raw["seed"] = int(seed)
    version = raw.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"unsupported version {version} (supported: {SCHEMA_VERSION})")
    task = raw.get("task")
    if task not in ("beltrami", "poisson", "audit", "qc-map"):
        raise ConfigError("task", "must be one of beltrami | poisson | audit | qc-map")

    grid = _parse_grid(raw.get("grid", {}))
    tolerances = dict(DEFAULTS["tolerances"])
    tolerances.update(raw.get("tolerances", {}))
    seed = int(raw.get("seed", DEFAULTS["seed"]))
    base_dir = path.parent
    degenerate = raw.get("degenerate", "auto")
    if degenerate not in ("auto", "always", "never"):
        raise ConfigError("degenerate", "must be auto | always | never")

    if task == "beltrami":
        domain = _parse_domain(raw.get("domain", {}), DEFAULTS["boundary_samples"])
        mu = _parse_complex_coefficient(raw.get("mu", {"preset": "zero"}), grid, "mu", base_dir)
        sigma = _parse_complex_coefficient(raw.get("sigma", {"preset": "zero"}), grid, "sigma", base_dir)
        phi = _parse_phi(raw.get("phi", {"preset": "const"}), domain)
        anchor = _complex_of(raw["anchor"], "anchor") if "anchor" in raw else None
        mu = ComplexField(mu.grid, mu.values, domain.interior_mask(grid))
        try:
            problem = BeltramiProblem(domain, mu, sigma, phi, anchor=anchor)
        except ValueError as exc:
            raise ConfigError("beltrami", str(exc))
        return ParsedConfig(task, problem, grid, tolerances, seed, raw=raw, degenerate=degenerate)

    if task == "poisson":
        domain = _parse_domain(raw.get("domain", {}), DEFAULTS["boundary_samples"])
        A = _parse_matrix(raw.get("A", {"preset": "identity"}), grid, base_dir)
        gsrc = _parse_real_source(raw.get("g", {"preset": "zero"}), grid, "g", base_dir)
        phi = _parse_phi(raw.get("phi", {"preset": "const"}), domain)
        try:
            problem = PoissonProblem(domain, A, gsrc, phi)
        except ValueError as exc:
            raise ConfigError("poisson", str(exc))
        return ParsedConfig(task, problem, grid, tolerances, seed, raw=raw, degenerate=degenerate)

    if task == "qc-map":
        mu = _parse_complex_coefficient(raw.get("mu", {"preset": "zero"}), grid, "mu", base_dir)
        return ParsedConfig(task, None, grid, tolerances, seed,
                            audit={"mu": mu, "caps": raw.get("caps")},
                            raw=raw, degenerate=degenerate)

    # audit task
    audit: dict = {}
    if "mu" in raw:
        node = raw["mu"]
        kwargs = {k: v for k, v in node.items() if k in ("K", "k", "lam")}
        if "z0" in node:
            kwargs["z0"] = _complex_of(node["z0"], "mu.z0")
        try:
            audit["mu_callable"] = mu_preset(node.get("preset", "zero"), **kwargs)
        except ValueError as exc:
            raise ConfigError("mu", str(exc))
    if "Q" in raw:
        node = raw["Q"]
        try:
            audit["q_profile"] = q_profile_preset(node.get("preset", "const"),
                                                  **{k: v for k, v in node.items() if k != "preset"})
        except ValueError as exc:
            raise ConfigError("Q", str(exc))
    if "mu_callable" not in audit and "q_profile" not in audit:
        raise ConfigError("audit", "needs a mu preset or a Q profile to audit")
    points = raw.get("points", [[0.0, 0.0]])
    if points == "boundary-samples":
        dom = _parse_domain(raw.get("domain", {}), DEFAULTS["boundary_samples"])
        stride = max(int(raw.get("stride", 16)), 1)
        audit["points"] = [complex(z) for z in dom.boundary[::stride]]
    else:
        audit["points"] = [_complex_of(p, f"points[{i}]") for i, p in enumerate(points)]
    audit["criteria"] = raw.get("criteria", ["FMO", "MEAN", "CZ", "LEHTO", "ORLICZ"])
    params = raw.get("params", {})
    audit["eps0"] = params.get("eps0")
    audit["alpha"] = float(params.get("alpha", 1.0))
    audit["delta"] = float(params.get("delta", 1.0))
    gauge = params.get("gauge", "exp")
    try:
        audit["gauge"] = phi_gauge_preset(gauge, alpha=audit["alpha"]) if gauge == "exp" \
            else phi_gauge_preset(gauge, **params.get("gauge_params", {}))
    except ValueError as exc:
        raise ConfigError("params.gauge", str(exc))
    psi = params.get("psi", "inv-t")
    try:
        audit["psi"] = psi_family_preset(psi)
    except ValueError as exc:
        raise ConfigError("params.psi", str(exc))
    return ParsedConfig(task, None, grid, tolerances, seed, audit=audit, raw=raw,
                        degenerate=degenerate)
