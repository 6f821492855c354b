"""Probe functions: scalar expressions of (u, uo, phi) with exact u-derivatives.

A probe is a small expression tree over the realized controls ``u``, the
intended controls ``uo`` and the state ``phi``. The vocabulary is closed under
differentiation with respect to u: sums, differences, products, non-negative
integer powers and tanh. Probe sets bundle exactly d+1 probes for a game with
d total control components.

Serialized form is a prefix notation, e.g. ``(* u1 phi0)`` or
``(+ (* 0.5 u0) (tanh phi1))``; all indices are zero-based.
"""

from __future__ import annotations

import json
import math
import random
import re
from typing import Iterable, Sequence

import numpy as np

from .errors import BadParams, ExhaustedDraws, FormatError, NonFiniteValue

_ZERO = ("const", 0.0)
_ONE = ("const", 1.0)

_VAR_KINDS = ("u", "uo", "phi")
_VAR_RE = re.compile(r"^(uo|u|phi)(\d+)$")
_INT_RE = re.compile(r"^-?\d+$")
_RATIONAL_RE = re.compile(r"^(-?\d+)/(\d+)$")


def _validate_tree(node) -> None:
    if not isinstance(node, tuple) or not node:
        raise FormatError(f"malformed expression node: {node!r}")
    kind = node[0]
    if kind in _VAR_KINDS:
        if len(node) != 2 or not isinstance(node[1], int) or node[1] < 0:
            raise FormatError(f"bad variable node: {node!r}")
    elif kind == "const":
        if len(node) != 2 or not isinstance(node[1], float) or not math.isfinite(node[1]):
            raise FormatError(f"bad constant node: {node!r}")
    elif kind in ("add", "sub", "mul"):
        if len(node) != 3:
            raise FormatError(f"bad binary node: {node!r}")
        _validate_tree(node[1])
        _validate_tree(node[2])
    elif kind == "pow":
        if len(node) != 3 or not isinstance(node[2], int) or node[2] < 0:
            raise FormatError(f"bad power node: {node!r}")
        _validate_tree(node[1])
    elif kind == "tanh":
        if len(node) != 2:
            raise FormatError(f"bad tanh node: {node!r}")
        _validate_tree(node[1])
    else:
        raise FormatError(f"unknown node kind: {kind!r}")


def _eval(node, u, uo, phi) -> float:
    kind = node[0]
    if kind == "u":
        return float(u[node[1]])
    if kind == "uo":
        return float(uo[node[1]])
    if kind == "phi":
        return float(phi[node[1]])
    if kind == "const":
        return node[1]
    if kind == "add":
        return _eval(node[1], u, uo, phi) + _eval(node[2], u, uo, phi)
    if kind == "sub":
        return _eval(node[1], u, uo, phi) - _eval(node[2], u, uo, phi)
    if kind == "mul":
        return _eval(node[1], u, uo, phi) * _eval(node[2], u, uo, phi)
    if kind == "pow":
        return _eval(node[1], u, uo, phi) ** node[2]
    return math.tanh(_eval(node[1], u, uo, phi))


def _add(a, b):
    if a == _ZERO:
        return b
    if b == _ZERO:
        return a
    return ("add", a, b)


def _sub(a, b):
    if b == _ZERO:
        return a
    return ("sub", a, b)


def _mul(a, b):
    if a == _ZERO or b == _ZERO:
        return _ZERO
    if a == _ONE:
        return b
    if b == _ONE:
        return a
    return ("mul", a, b)


def _pow(a, k: int):
    if k == 0:
        return _ONE
    if k == 1:
        return a
    return ("pow", a, k)


def _diff_u(node, index: int):
    """Exact derivative tree with respect to u[index]."""
    kind = node[0]
    if kind == "u":
        return _ONE if node[1] == index else _ZERO
    if kind in ("uo", "phi", "const"):
        return _ZERO
    if kind == "add":
        return _add(_diff_u(node[1], index), _diff_u(node[2], index))
    if kind == "sub":
        return _sub(_diff_u(node[1], index), _diff_u(node[2], index))
    if kind == "mul":
        return _add(
            _mul(_diff_u(node[1], index), node[2]),
            _mul(node[1], _diff_u(node[2], index)),
        )
    if kind == "pow":
        inner = _diff_u(node[1], index)
        return _mul(_mul(("const", float(node[2])), _pow(node[1], node[2] - 1)), inner)
    # tanh' = 1 - tanh^2
    inner = _diff_u(node[1], index)
    return _mul(_sub(_ONE, _pow(("tanh", node[1]), 2)), inner)


def _depends_on_u(node) -> bool:
    kind = node[0]
    if kind == "u":
        return True
    if kind in ("uo", "phi", "const"):
        return False
    if kind in ("add", "sub", "mul"):
        return _depends_on_u(node[1]) or _depends_on_u(node[2])
    return _depends_on_u(node[1])


def _max_indices(node, bounds) -> None:
    kind = node[0]
    if kind in _VAR_KINDS:
        bounds[kind] = max(bounds[kind], node[1])
    elif kind in ("add", "sub", "mul"):
        _max_indices(node[1], bounds)
        _max_indices(node[2], bounds)
    elif kind in ("pow", "tanh"):
        _max_indices(node[1], bounds)


def _const_text(value: float) -> str:
    if value == int(value) and abs(value) < 2**53:
        return str(int(value))
    return repr(value)


def _to_text(node) -> str:
    kind = node[0]
    if kind in _VAR_KINDS:
        return f"{kind}{node[1]}"
    if kind == "const":
        return _const_text(node[1])
    if kind == "pow":
        return f"(pow {_to_text(node[1])} {node[2]})"
    if kind == "tanh":
        return f"(tanh {_to_text(node[1])})"
    op = {"add": "+", "sub": "-", "mul": "*"}[kind]
    return f"({op} {_to_text(node[1])} {_to_text(node[2])})"


def _tokenize(text: str) -> list[str]:
    return text.replace("(", " ( ").replace(")", " ) ").split()


def _parse_tokens(tokens: list[str], pos: int):
    if pos >= len(tokens):
        raise FormatError("unexpected end of expression")
    tok = tokens[pos]
    if tok == "(":
        if pos + 1 >= len(tokens):
            raise FormatError("dangling '('")
        op = tokens[pos + 1]
        if op == "tanh":
            arg, nxt = _parse_tokens(tokens, pos + 2)
            node = ("tanh", arg)
        elif op == "pow":
            arg, nxt = _parse_tokens(tokens, pos + 2)
            if nxt >= len(tokens) or not _INT_RE.match(tokens[nxt]):
                raise FormatError("pow needs an integer exponent")
            exponent = int(tokens[nxt])
            if exponent < 0:
                raise FormatError("pow exponent must be non-negative")
            node = ("pow", arg, exponent)
            nxt += 1
        elif op in ("+", "-", "*"):
            left, mid = _parse_tokens(tokens, pos + 2)
            right, nxt = _parse_tokens(tokens, mid)
            node = ({"+": "add", "-": "sub", "*": "mul"}[op], left, right)
        else:
            raise FormatError(f"unknown operator {op!r}")
        if nxt >= len(tokens) or tokens[nxt] != ")":
            raise FormatError("missing ')'")
        return node, nxt + 1
    if tok == ")":
        raise FormatError("unexpected ')'")
    m = _VAR_RE.match(tok)
    if m:
        return (m.group(1), int(m.group(2))), pos + 1
    m = _RATIONAL_RE.match(tok)
    if m:
        return ("const", float(int(m.group(1))) / float(int(m.group(2)))), pos + 1
    try:
        return ("const", float(tok)), pos + 1
    except ValueError:
        raise FormatError(f"unrecognized token {tok!r}") from None


class ProbeExpression:
    """Immutable expression tree evaluable at (u, uo, phi)."""

    __slots__ = ("tree",)

    def __init__(self, tree):
        _validate_tree(tree)
        object.__setattr__(self, "tree", tree)

    def __setattr__(self, *_):
        raise AttributeError("ProbeExpression is immutable")

    @classmethod
    def parse(cls, text: str) -> "ProbeExpression":
        tokens = _tokenize(text)
        tree, pos = _parse_tokens(tokens, 0)
        if pos != len(tokens):
            raise FormatError(f"trailing tokens in expression {text!r}")
        return cls(tree)

    @classmethod
    def var(cls, kind: str, index: int) -> "ProbeExpression":
        return cls((kind, index))

    @classmethod
    def const(cls, value: float) -> "ProbeExpression":
        return cls(("const", float(value)))

    def evaluate(self, u, uo, phi) -> float:
        return _eval(self.tree, u, uo, phi)

    def diff_u(self, index: int) -> "ProbeExpression":
        return ProbeExpression(_diff_u(self.tree, index))

    def depends_on_u(self) -> bool:
        return _depends_on_u(self.tree)

    @property
    def text(self) -> str:
        return _to_text(self.tree)

    def __str__(self):
        return self.text

    def __repr__(self):
        return f"ProbeExpression({self.text!r})"

    def __eq__(self, other):
        return isinstance(other, ProbeExpression) and self.tree == other.tree

    def __hash__(self):
        return hash(self.tree)


class ProbeSet:
    """Ordered bundle of exactly d+1 probes for control dimension d."""

    __slots__ = ("probes", "d", "m", "_jac_trees")

    def __init__(self, probes: Sequence[ProbeExpression], d: int, m: int):
        probes = tuple(probes)
        if d < 1 or m < 1:
            raise BadParams(f"need d >= 1 and m >= 1, got d={d}, m={m}")
        if len(probes) != d + 1:
            raise BadParams(f"a probe set needs exactly d+1={d + 1} probes, got {len(probes)}")
        for p in probes:
            bounds = {"u": -1, "uo": -1, "phi": -1}
            _max_indices(p.tree, bounds)
            if bounds["u"] >= d or bounds["uo"] >= d:
                raise BadParams(f"probe {p.text!r} references a control index >= d={d}")
            if bounds["phi"] >= m:
                raise BadParams(f"probe {p.text!r} references a state index >= m={m}")
        object.__setattr__(self, "probes", probes)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "m", m)
        object.__setattr__(
            self,
            "_jac_trees",
            tuple(tuple(_diff_u(p.tree, l) for l in range(d)) for p in probes),
        )

    def __setattr__(self, *_):
        raise AttributeError("ProbeSet is immutable")

    @property
    def size(self) -> int:
        return len(self.probes)

    def texts(self) -> list[str]:
        return [p.text for p in self.probes]

    def depends_on_u(self) -> bool:
        return any(p.depends_on_u() for p in self.probes)

    def eval_vector(self, u, uo, phi) -> np.ndarray:
        try:
            out = np.array([_eval(p.tree, u, uo, phi) for p in self.probes])
        except OverflowError:
            raise NonFiniteValue("probe evaluation overflowed") from None
        if not np.all(np.isfinite(out)):
            raise NonFiniteValue("probe evaluation produced a non-finite value")
        return out

    def jacobian_u(self, u, uo, phi) -> np.ndarray:
        try:
            out = np.array(
                [[_eval(tree, u, uo, phi) for tree in row] for row in self._jac_trees]
            )
        except OverflowError:
            raise NonFiniteValue("probe derivative overflowed") from None
        if not np.all(np.isfinite(out)):
            raise NonFiniteValue("probe derivative produced a non-finite value")
        return out

    def __eq__(self, other):
        return (
            isinstance(other, ProbeSet)
            and self.d == other.d
            and self.m == other.m
            and self.probes == other.probes
        )

    def __hash__(self):
        return hash((self.d, self.m, self.probes))

    def __repr__(self):
        return f"ProbeSet(d={self.d}, m={self.m}, probes={self.texts()})"


def eval_probe_vector(pset: ProbeSet, u, uo, phi) -> np.ndarray:
    """Componentwise probe values p_j(u, uo, phi) as a (d+1)-vector."""
    return pset.eval_vector(u, uo, phi)


def probe_jacobian_u(pset: ProbeSet, u, uo, phi) -> np.ndarray:
    """Exact (d+1) x d matrix of partials of each probe with respect to u."""
    return pset.jacobian_u(u, uo, phi)


def canonical_probe_set(d: int, m: int) -> ProbeSet:
    """Coordinate probes u0..u{d-1} plus the first state component."""
    probes = [ProbeExpression.var("u", i) for i in range(d)]
    probes.append(ProbeExpression.var("phi", 0))
    return ProbeSet(probes, d, m)


class ProbeLibrary:
    """Deterministic pool of candidate probe expressions."""

    __slots__ = ("entries", "d", "m")

    def __init__(self, entries: Sequence[ProbeExpression], d: int, m: int):
        object.__setattr__(self, "entries", tuple(entries))
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "m", m)

    def __setattr__(self, *_):
        raise AttributeError("ProbeLibrary is immutable")

    def __len__(self):
        return len(self.entries)


def generate_library(d: int, m: int) -> ProbeLibrary:
    """All monomials of total degree <= 2 in (u, uo, phi), then tanh of each variable.

    Enumeration order is fixed: degree-1 terms (u's, uo's, phi's), degree-2
    products in the same variable order, then the tanh terms.
    """
    if d < 1 or m < 1:
        raise BadParams("need d >= 1 and m >= 1")
    variables = (
        [("u", i) for i in range(d)]
        + [("uo", i) for i in range(d)]
        + [("phi", j) for j in range(m)]
    )
    entries: list[ProbeExpression] = [ProbeExpression(v) for v in variables]
    for i in range(len(variables)):
        for j in range(i, len(variables)):
            if i == j:
                entries.append(ProbeExpression(("pow", variables[i], 2)))
            else:
                entries.append(ProbeExpression(("mul", variables[i], variables[j])))
    entries.extend(ProbeExpression(("tanh", v)) for v in variables)
    return ProbeLibrary(entries, d, m)


def random_probe_set(lib: ProbeLibrary, seed: int, max_draws: int = 1000) -> ProbeSet:
    """Seeded draw of d+1 distinct library entries, at least one depending on u."""
    k = lib.d + 1
    if len(lib) < k:
        raise ExhaustedDraws(f"library holds {len(lib)} entries, need {k}")
    rng = random.Random(seed)
    for _ in range(max_draws):
        picks = rng.sample(range(len(lib)), k)
        probes = [lib.entries[i] for i in picks]
        if any(p.depends_on_u() for p in probes):
            return ProbeSet(probes, lib.d, lib.m)
    raise ExhaustedDraws(f"no u-dependent draw found in {max_draws} attempts")


def probe_set_to_json(pset: ProbeSet) -> str:
    return json.dumps(
        {"d": pset.d, "m": pset.m, "probes": pset.texts()},
        sort_keys=True,
    )


def probe_set_from_json(text: str) -> ProbeSet:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid probe-set JSON: {exc}") from None
    for key in ("d", "m", "probes"):
        if key not in payload:
            raise FormatError(f"probe-set JSON missing key {key!r}")
    probes = [ProbeExpression.parse(s) for s in payload["probes"]]
    return ProbeSet(probes, int(payload["d"]), int(payload["m"]))


def save_probe_set(pset: ProbeSet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(probe_set_to_json(pset))
        fh.write("\n")


def load_probe_set(path) -> ProbeSet:
    with open(path, "r", encoding="utf-8") as fh:
        return probe_set_from_json(fh.read())
