"""Utility (scalarisation) functions with a serialisable prefix-notation form.

Grammar, whitespace separated, prefix notation::

    expr := NUMBER | objK | dot [w0,w1,...] | OP expr expr
    OP   := add | sum | mul | prod | min | max | pow

``dot`` builds a linear utility; anything else is a general monotone utility
that must pass a sampled monotonicity check on a probe box.
"""

from __future__ import annotations

import functools
import itertools
import json
import math
import re
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from morl.sets import validate_weights

_BINARY_OPS: dict[str, Callable[[float, float], float]] = {
    "add": lambda a, b: a + b,
    "sum": lambda a, b: a + b,
    "mul": lambda a, b: a * b,
    "prod": lambda a, b: a * b,
    "min": min,
    "max": max,
    "pow": lambda a, b: a**b,
}

_TOKEN = re.compile(r"\[[^\]]*\]|[^\s\[\]]+")
_OBJ = re.compile(r"obj(\d+)$")


class UtilityError(ValueError):
    """Malformed utility expression or a utility that violates its contract."""


class NumericError(ArithmeticError):
    """A utility evaluated to a non-finite number."""


def _parse(tokens: list[str], pos: int):
    if pos >= len(tokens):
        raise UtilityError("unexpected end of utility expression")
    tok = tokens[pos]
    if tok == "dot":
        if pos + 1 >= len(tokens) or not tokens[pos + 1].startswith("["):
            raise UtilityError("'dot' expects a bracketed weight list")
        return ("dot", tuple(float(x) for x in json.loads(tokens[pos + 1]))), pos + 2
    if tok in _BINARY_OPS:
        left, pos = _parse(tokens, pos + 1)
        right, pos = _parse(tokens, pos)
        return (tok, left, right), pos
    m = _OBJ.match(tok)
    if m:
        return ("obj", int(m.group(1))), pos + 1
    try:
        return ("const", float(tok)), pos + 1
    except ValueError:
        raise UtilityError(f"unknown token {tok!r} in utility expression") from None


def _evaluate(node, v: np.ndarray) -> float:
    kind = node[0]
    if kind == "const":
        return node[1]
    if kind == "obj":
        return float(v[node[1]])
    if kind == "dot":
        return math.fsum(w * x for w, x in zip(node[1], v))
    return _BINARY_OPS[kind](_evaluate(node[1], v), _evaluate(node[2], v))


def _max_objective(node) -> int:
    if node[0] == "obj":
        return node[1]
    if node[0] == "dot":
        return len(node[1]) - 1
    if node[0] == "const":
        return -1
    return max(_max_objective(node[1]), _max_objective(node[2]))


@dataclass(frozen=True)
class UtilityFunction:
    """A scalarisation ``u: R^d -> R``; ``weights`` is set only for the linear kind."""

    expression: str
    kind: str
    weights: tuple[float, ...] | None = None

    @classmethod
    def linear(cls, weights: Sequence[float]) -> "UtilityFunction":
        w = validate_weights(weights)
        return cls(f"dot {json.dumps([float(x) for x in w], separators=(',', ':'))}", "linear", tuple(map(float, w)))

    @classmethod
    def parse(cls, expression: str, probe_low: float = 0.0, probe_high: float = 10.0) -> "UtilityFunction":
        """Parse a prefix expression; non-linear utilities are checked for monotonicity on
        ``[probe_low, probe_high]^d``."""
        tokens = _TOKEN.findall(expression)
        node, pos = _parse(tokens, 0)
        if pos != len(tokens):
            raise UtilityError(f"trailing tokens in utility expression: {tokens[pos:]}")
        if node[0] == "dot":
            return cls.linear(node[1])
        u = cls(" ".join(tokens), "monotone")
        d = max(_max_objective(node) + 1, 1)
        check_monotone(u, d, probe_low, probe_high)
        return u

    @functools.cached_property
    def _tree(self):
        return _parse(_TOKEN.findall(self.expression), 0)[0]

    def __call__(self, v: Sequence[float]) -> float:
        v = np.asarray(v, dtype=float)
        if self.weights is not None:
            if len(self.weights) != v.shape[-1]:
                raise UtilityError(f"utility expects {len(self.weights)} objectives, got {v.shape[-1]}")
            out = math.fsum(w * x for w, x in zip(self.weights, v))
        else:
            out = _evaluate(self._tree, v)
        if not math.isfinite(out):
            raise NumericError(f"utility {self.expression!r} is non-finite at {v.tolist()}")
        return out

    def batch(self, values: np.ndarray) -> np.ndarray:
        values = np.atleast_2d(np.asarray(values, dtype=float))
        if self.weights is not None:
            return values @ np.asarray(self.weights)
        return np.array([self(v) for v in values])


def check_monotone(
    u: Callable[[np.ndarray], float],
    d: int,
    low: float = 0.0,
    high: float = 10.0,
    points_per_axis: int = 5,
    delta: float = 0.5,
) -> None:
    """Raise ``UtilityError`` unless ``u(v + delta*e_i) >= u(v)`` on a probe grid."""
    axis = np.linspace(low, high, points_per_axis)
    for point in itertools.product(axis, repeat=d):
        v = np.array(point)
        base = u(v)
        for i in range(d):
            bumped = v.copy()
            bumped[i] += delta
            if u(bumped) < base:
                raise UtilityError(f"utility is not monotone: increasing objective {i} at {v.tolist()} lowers it")
