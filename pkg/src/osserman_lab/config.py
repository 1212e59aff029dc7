"""Config-file schema for the experiment runner: validation plus builders
turning the declarative sections into operators, Hamiltonians, problems,
grids, boundary data and right-hand sides.
"""

from __future__ import annotations

import json
import math
from typing import Callable

import numpy as np

from .core import build_ball_grid
from .operators import (EllipticityPair, HamiltonianH, OperatorF,
                        hamiltonian_library, laplacian_operator,
                        negate_hamiltonian, pucci_minus_operator,
                        pucci_plus_operator, weighted_trace_operator)
from .solver import ProblemSpec
from .uniqueness import CounterexampleField


class ConfigError(ValueError):
    """Schema violation; carries the offending key path."""

    def __init__(self, key: str, message: str):
        self.key = key
        self.message = message
        super().__init__(f"{key}: {message}")


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read config ({exc})")
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"not valid JSON ({exc})")
    if not isinstance(cfg, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    return cfg


def _require(section: dict, key: str, path: str):
    if key not in section:
        raise ConfigError(f"{path}.{key}", "missing required key")
    return section[key]


def _number(section: dict, key: str, path: str, default=None):
    if key not in section:
        if default is None:
            raise ConfigError(f"{path}.{key}", "missing required key")
        return default
    val = section[key]
    if not isinstance(val, (int, float)) or isinstance(val, bool):
        raise ConfigError(f"{path}.{key}", "must be a number")
    return float(val)


def build_operator(section: dict, path: str = "problem.operator") -> OperatorF:
    tag = _require(section, "tag", path)
    if tag in ("pucci_plus", "pucci_minus"):
        lam = _number(section, "lam", path)
        Lam = _number(section, "Lam", path)
        if not 0 < lam <= Lam:
            raise ConfigError(f"{path}.lam", "need 0 < lam <= Lam")
        ell = EllipticityPair(lam, Lam)
        return pucci_plus_operator(ell) if tag == "pucci_plus" \
            else pucci_minus_operator(ell)
    if tag == "laplacian":
        return laplacian_operator()
    if tag == "weighted_trace":
        weights = _require(section, "weights", path)
        if not isinstance(weights, list) or not weights \
                or any(w <= 0 for w in weights):
            raise ConfigError(f"{path}.weights", "must be a list of positive numbers")
        return weighted_trace_operator(weights)
    raise ConfigError(f"{path}.tag", f"unknown operator tag {tag!r}")


def build_hamiltonian(section: dict, path: str = "problem.hamiltonian") -> HamiltonianH:
    tag = _require(section, "tag", path)
    params = {k: v for k, v in section.items() if k not in ("tag", "negate")}
    try:
        H = hamiltonian_library(tag, **params)
    except (ValueError, TypeError) as exc:
        raise ConfigError(path, str(exc))
    if section.get("negate", False):
        H = negate_hamiltonian(H)
    return H


def build_f(section: dict, path: str = "problem.f") -> Callable:
    tag = _require(section, "tag", path)
    if tag == "zero":
        return lambda x: 0.0
    if tag == "constant":
        value = _number(section, "value", path)
        return lambda x: value
    if tag == "radial_power":
        rho = _number(section, "rho", path)
        if rho < 0:
            raise ConfigError(f"{path}.rho", "rho must be nonnegative")
        return lambda x: -(1.0 + float(np.linalg.norm(np.atleast_1d(x))) ** rho)
    if tag == "mms_cos":
        # rhs manufactured so u*(x) = cos(x_0) solves Lap u + |Du|^2 - |u|^2 u = f
        return lambda x: (-math.cos(x[0]) + math.sin(x[0]) ** 2
                          - math.cos(x[0]) ** 3)
    raise ConfigError(f"{path}.tag", f"unknown rhs tag {tag!r}")


def build_boundary(section: dict, path: str = "boundary") -> Callable:
    tag = _require(section, "tag", path)
    if tag == "constant":
        value = _number(section, "value", path)
        return lambda x: value
    if tag == "exp_family":
        alpha = _number(section, "alpha", path)
        sign = section.get("sign", "+")
        axis = int(_number(section, "axis", path, default=0.0))
        n = int(_number(section, "n", path, default=1.0))
        try:
            fld = CounterexampleField(alpha=alpha, sign=sign, axis=axis, n=n)
        except ValueError as exc:
            raise ConfigError(path, str(exc))
        return fld.boundary_function(negated=bool(section.get("negated", False)))
    if tag == "cos":
        return lambda x: math.cos(x[0])
    raise ConfigError(f"{path}.tag", f"unknown boundary tag {tag!r}")


def build_problem(cfg: dict) -> ProblemSpec:
    section = cfg.get("problem")
    if not isinstance(section, dict):
        raise ConfigError("problem", "missing problem section")
    s = _number(section, "s", "problem")
    if s <= 1.0:
        raise ConfigError("problem.s", "s must exceed 1")
    F = build_operator(_require(section, "operator", "problem"))
    H = build_hamiltonian(_require(section, "hamiltonian", "problem"))
    f = build_f(section.get("f", {"tag": "zero"}))
    return ProblemSpec(F=F, H=H, s=s, f=f)


def build_grid(cfg: dict):
    section = cfg.get("grid")
    if not isinstance(section, dict):
        raise ConfigError("grid", "missing grid section")
    n = int(_number(section, "n", "grid"))
    if n not in (1, 2):
        raise ConfigError("grid.n", "dimension must be 1 or 2")
    center = section.get("center", [0.0] * n)
    radius = _number(section, "radius", "grid")
    h = _number(section, "h", "grid")
    if radius <= 0 or h <= 0:
        raise ConfigError("grid.h", "radius and h must be positive")
    if h > radius / 2:
        raise ConfigError("grid.h", "h too coarse: need h <= radius/2")
    return build_ball_grid(center, radius, h, n)
