"""Reader for ``.problem`` files.

A problem file is INI-style with four sections; only ``[functions]`` and its
``h``, ``f``, ``g`` keys are mandatory. Expression values are double-quoted::

    [functions]
    h = "sin(x) + 4*x"
    f = "exp(x) + 5*x"
    g = "cos(x)"
    # optional: hp, fp, gp (derivatives; differentiated symbolically if absent)

    [constants]          # optional: K, alpha, beta, g_bound
    K = 3
    alpha = 5
    beta = 1

    [domain]             # optional: A (interval halfwidth), grid_n
    grid_n = 4001

    [solver]             # optional: tol, max_iter, L, rho, policy,
    tol = 1e-10          #           inverse_tol, residual_tol

Unknown sections or keys are rejected.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

__all__ = ["ProblemFile", "ProblemFileError", "load_problem", "SCHEMA"]

SCHEMA = {
    "functions": {"h": "expr", "f": "expr", "g": "expr",
                  "hp": "expr", "fp": "expr", "gp": "expr"},
    "constants": {"K": "float", "alpha": "float", "beta": "float", "g_bound": "float"},
    "domain": {"A": "float", "grid_n": "int"},
    "solver": {"tol": "float", "max_iter": "int", "L": "float", "rho": "float",
               "policy": "policy", "inverse_tol": "float", "residual_tol": "float"},
}
POLICIES = ("midpoint", "min", "explicit")


class ProblemFileError(ValueError):
    pass


@dataclass
class ProblemFile:
    path: str
    functions: dict
    constants: dict = field(default_factory=dict)
    domain: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)


def _convert(kind, key, raw, where):
    raw = raw.strip()
    if kind == "expr":
        if len(raw) >= 2 and raw[0] == raw[-1] == '"':
            return raw[1:-1]
        raise ProblemFileError(f"{where}: expression for {key!r} must be double-quoted")
    if kind == "policy":
        v = raw.strip('"').lower()
        if v not in POLICIES:
            raise ProblemFileError(f"{where}: policy must be one of {', '.join(POLICIES)}")
        return v
    try:
        v = int(raw) if kind == "int" else float(raw)
    except ValueError:
        raise ProblemFileError(f"{where}: {key} = {raw!r} is not a valid {kind}") from None
    if not math.isfinite(v):
        raise ProblemFileError(f"{where}: {key} must be finite")
    return v


def load_problem(path) -> ProblemFile:
    path = Path(path)
    parser = configparser.ConfigParser(
        interpolation=None, comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    parser.optionxform = str  # keys are case-sensitive (K, L, A)
    try:
        text = path.read_text(encoding="utf-8")
        parser.read_string(text, source=str(path))
    except OSError as exc:
        raise ProblemFileError(f"cannot read {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ProblemFileError(f"{path}: {exc}") from exc

    sections = {}
    for name in parser.sections():
        if name not in SCHEMA:
            raise ProblemFileError(f"{path}: unknown section [{name}]")
        out = {}
        for key, raw in parser.items(name):
            if key not in SCHEMA[name]:
                raise ProblemFileError(f"{path}: unknown key {key!r} in [{name}]")
            out[key] = _convert(SCHEMA[name][key], key, raw, f"{path} [{name}]")
        sections[name] = out

    functions = sections.get("functions", {})
    missing = [k for k in ("h", "f", "g") if k not in functions]
    if missing:
        raise ProblemFileError(f"{path}: missing mandatory keys {', '.join(missing)} "
                               "in [functions]")
    return ProblemFile(str(path), functions, sections.get("constants", {}),
                       sections.get("domain", {}), sections.get("solver", {}))
