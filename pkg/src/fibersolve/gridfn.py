"""Piecewise-linear functions on a finite grid with constant extension.

A :class:`GridFunction` stands in for a bounded continuous function on the
whole real line: it interpolates linearly between nodes and is held constant
at its endpoint values outside ``[nodes[0], nodes[-1]]``. With that
extension the sup norm and the Lipschitz constant of the represented
function are both read off the node values exactly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "GridFunction", "make_grid", "eval_grid", "sup_dist",
    "lipschitz_estimate", "bound_estimate",
]


@dataclass(frozen=True, eq=False)
class GridFunction:
    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        values = np.array(self.values, dtype=float)
        if nodes.ndim != 1 or nodes.shape != values.shape:
            raise ValueError("nodes and values must be 1-d arrays of equal length")
        if nodes.size < 2:
            raise ValueError("a GridFunction needs at least two nodes")
        if not np.all(np.isfinite(nodes)) or not np.all(np.diff(nodes) > 0):
            raise ValueError("nodes must be finite and strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite")
        nodes.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)

    def __call__(self, x):
        return eval_grid(self, x)

    def __len__(self):
        return self.nodes.size

    @property
    def halfwidth(self):
        return 0.5 * (self.nodes[-1] - self.nodes[0])

    @property
    def spacing(self):
        """Largest gap between adjacent nodes."""
        return float(np.max(np.diff(self.nodes)))

    def with_values(self, values):
        return GridFunction(self.nodes, values)

    def to_csv(self, path):
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["x", "value"])
            for x, v in zip(self.nodes, self.values):
                writer.writerow([repr(float(x)), repr(float(v))])

    @classmethod
    def from_csv(cls, path):
        with Path(path).open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["x", "value"]:
                raise ValueError(f"{path}: expected header 'x,value', got {header}")
            rows = [(float(a), float(b)) for a, b in reader]
        nodes, values = zip(*rows) if rows else ((), ())
        return cls(np.array(nodes), np.array(values))


def make_grid(interval_halfwidth: float, n: int, sampler) -> GridFunction:
    """Sample ``sampler`` at ``n`` uniform nodes on ``[-A, A]``.

    ``sampler`` is called once with the whole node array and must return an
    array (or a scalar, broadcast to every node).
    """
    A = float(interval_halfwidth)
    if not np.isfinite(A) or A <= 0:
        raise ValueError(f"interval halfwidth must be finite and positive, got {A}")
    if n < 2:
        raise ValueError(f"need at least two nodes, got {n}")
    nodes = np.linspace(-A, A, int(n))
    values = np.broadcast_to(np.asarray(sampler(nodes), dtype=float), nodes.shape)
    if not np.all(np.isfinite(values)):
        raise ValueError("sampler produced non-finite values")
    return GridFunction(nodes, values)


def eval_grid(g: GridFunction, x):
    """Linear interpolation inside the grid, endpoint value outside."""
    # np.interp already clamps to values[0] / values[-1] beyond the ends
    out = np.interp(x, g.nodes, g.values)
    return float(out) if np.ndim(out) == 0 else out


def sup_dist(g1: GridFunction, g2: GridFunction) -> float:
    """Sup distance between two grid functions.

    On a shared grid this is the max node-wise difference. Otherwise the
    difference is piecewise linear on the union of both node sets, so the
    max over that union is still exact.
    """
    if g1.nodes.shape == g2.nodes.shape and np.array_equal(g1.nodes, g2.nodes):
        return float(np.max(np.abs(g1.values - g2.values)))
    xs = np.union1d(g1.nodes, g2.nodes)
    return float(np.max(np.abs(eval_grid(g1, xs) - eval_grid(g2, xs))))


def lipschitz_estimate(g: GridFunction) -> float:
    return float(np.max(np.abs(np.diff(g.values) / np.diff(g.nodes))))


def bound_estimate(g: GridFunction) -> float:
    return float(np.max(np.abs(g.values)))
