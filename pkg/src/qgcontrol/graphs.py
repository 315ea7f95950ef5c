"""Compact metric graphs with Dirichlet/Neumann/Kirchhoff vertex conditions.

A graph is a finite set of edges of positive length, each parametrized by a
coordinate from 0 to its length.  Internal vertices (degree >= 2, loops count
twice) carry continuity-plus-flux (Kirchhoff) conditions; external vertices
(degree 1) carry Dirichlet or Neumann conditions.

Edge lengths carry an optional restricted symbolic expression
(``INT/INT``, ``sqrt(INT/INT)``, or a product of the two) so that rationality
of length ratios is decided exactly rather than from floats.  Whether the
length family has pairwise irrational algebraic ratios is a declared property
of the input, not something the toolkit attempts to prove numerically.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction


class GraphError(ValueError):
    """Invalid graph description or graph-document parse failure."""


class VertexKind(Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"
    KIRCHHOFF = "kirchhoff"


_EXPR_FACTOR = re.compile(r"^(?:(\d+)/(\d+)|sqrt\((\d+)/(\d+)\))$")


def parse_length_expr(expr: str) -> tuple[Fraction, Fraction]:
    """Parse a length expression into (rational, radicand) with value r*sqrt(s).

    Grammar: ``INT/INT``, ``sqrt(INT/INT)``, or '*'-separated products.
    """
    rational = Fraction(1)
    radicand = Fraction(1)
    for factor in expr.replace(" ", "").split("*"):
        m = _EXPR_FACTOR.match(factor)
        if m is None:
            raise GraphError(f"bad length expression factor {factor!r} in {expr!r}")
        if m.group(1) is not None:
            num, den = int(m.group(1)), int(m.group(2))
            if den == 0:
                raise GraphError(f"zero denominator in {expr!r}")
            rational *= Fraction(num, den)
        else:
            num, den = int(m.group(3)), int(m.group(4))
            if den == 0:
                raise GraphError(f"zero denominator in {expr!r}")
            radicand *= Fraction(num, den)
    if rational <= 0 or radicand <= 0:
        raise GraphError(f"length expression {expr!r} is not positive")
    # pull square factors of the radicand into the rational part
    num_free, num_sq = _squarefree_split(radicand.numerator)
    den_free, den_sq = _squarefree_split(radicand.denominator)
    rational *= Fraction(num_sq, den_sq * den_free)
    radicand = Fraction(num_free * den_free)
    return rational, radicand


def _squarefree_split(n: int) -> tuple[int, int]:
    """n = free * sq**2 with free squarefree; returns (free, sq)."""
    free, sq = 1, 1
    d = 2
    while d * d <= n:
        while n % (d * d) == 0:
            n //= d * d
            sq *= d
        if n % d == 0:
            n //= d
            free *= d
        d += 1
    return free * n, sq


def expr_value(expr: str) -> float:
    rational, radicand = parse_length_expr(expr)
    return float(rational) * math.sqrt(float(radicand))


@dataclass(frozen=True)
class EdgeLength:
    """Positive length with an optional exact symbolic tag."""

    value: float
    expr: str | None = None

    def __post_init__(self):
        if not (self.value > 0.0 and math.isfinite(self.value)):
            raise GraphError(f"edge length must be positive, got {self.value}")
        if self.expr is not None:
            exact = expr_value(self.expr)
            if abs(exact - self.value) > 1e-12 * max(1.0, exact):
                raise GraphError(
                    f"length value {self.value!r} disagrees with expression "
                    f"{self.expr!r} = {exact!r}"
                )

    def exact_parts(self) -> tuple[Fraction, Fraction] | None:
        if self.expr is None:
            return None
        return parse_length_expr(self.expr)


@dataclass(frozen=True)
class Edge:
    id: str
    tail: str  # vertex at coordinate 0
    head: str  # vertex at coordinate length
    length: EdgeLength

    @property
    def is_loop(self) -> bool:
        return self.tail == self.head


@dataclass(frozen=True)
class MetricGraph:
    """Immutable compact metric graph.

    ``vertex_kinds`` maps vertex id to its condition.  ``adjacency`` lists, per
    vertex, the incident (edge index, endpoint) pairs where endpoint 0 is the
    coordinate-0 end; a loop appears twice.
    """

    vertices: tuple[str, ...]
    vertex_kinds: dict[str, VertexKind]
    edges: tuple[Edge, ...]
    allow_disconnected: bool = False

    @property
    def adjacency(self) -> dict[str, list[tuple[int, int]]]:
        adj: dict[str, list[tuple[int, int]]] = {v: [] for v in self.vertices}
        for i, e in enumerate(self.edges):
            adj[e.tail].append((i, 0))
            adj[e.head].append((i, 1))
        return adj

    def degree(self, v: str) -> int:
        return len(self.adjacency[v])

    @property
    def lengths(self) -> list[float]:
        return [e.length.value for e in self.edges]

    def components(self) -> list[set[str]]:
        seen: set[str] = set()
        comps = []
        neighbours: dict[str, set[str]] = {v: set() for v in self.vertices}
        for e in self.edges:
            neighbours[e.tail].add(e.head)
            neighbours[e.head].add(e.tail)
        for v in self.vertices:
            if v in seen:
                continue
            stack, comp = [v], set()
            while stack:
                w = stack.pop()
                if w in comp:
                    continue
                comp.add(w)
                stack.extend(neighbours[w] - comp)
            seen |= comp
            comps.append(comp)
        return comps


def classify_vertices(g: MetricGraph) -> tuple[set[str], set[str]]:
    """Partition vertices into (external, internal); external means degree 1."""
    external = {v for v in g.vertices if g.degree(v) == 1}
    return external, set(g.vertices) - external


def total_length(g: MetricGraph) -> float:
    return float(sum(g.lengths))


def _validate(g: MetricGraph) -> MetricGraph:
    if not g.edges:
        raise GraphError("graph has no edges")
    ids = [e.id for e in g.edges]
    if len(set(ids)) != len(ids):
        raise GraphError("duplicate edge ids")
    if len(set(g.vertices)) != len(g.vertices):
        raise GraphError("duplicate vertex ids")
    vset = set(g.vertices)
    for e in g.edges:
        if e.tail not in vset or e.head not in vset:
            raise GraphError(f"edge {e.id!r} references unknown vertex")
    for v in g.vertices:
        if g.degree(v) == 0:
            raise GraphError(f"vertex {v!r} is isolated")
    external, internal = classify_vertices(g)
    for v in external:
        if g.vertex_kinds[v] == VertexKind.KIRCHHOFF:
            raise GraphError(f"Kirchhoff condition on degree-1 vertex {v!r}")
    for v in internal:
        if g.vertex_kinds[v] != VertexKind.KIRCHHOFF:
            raise GraphError(
                f"internal vertex {v!r} must carry the Kirchhoff condition"
            )
    if len(g.components()) > 1 and not g.allow_disconnected:
        raise GraphError(
            "graph is disconnected; set allow_disconnected for interval families"
        )
    return g


_KIND_NAMES = {
    "dirichlet": VertexKind.DIRICHLET,
    "neumann": VertexKind.NEUMANN,
    "kirchhoff": VertexKind.KIRCHHOFF,
    "neumann-kirchhoff": VertexKind.KIRCHHOFF,
}

DOCUMENT_VERSION = 1


def build_graph(doc: dict) -> MetricGraph:
    """Build and validate a MetricGraph from a graph-description document."""
    if not isinstance(doc, dict):
        raise GraphError("graph document must be a mapping")
    if doc.get("version") != DOCUMENT_VERSION:
        raise GraphError(f"unsupported document version {doc.get('version')!r}")
    try:
        vertices = tuple(str(v["id"]) for v in doc["vertices"])
        kinds = {}
        for v in doc["vertices"]:
            cond = str(v["condition"]).lower()
            if cond not in _KIND_NAMES:
                raise GraphError(f"unknown vertex condition {v['condition']!r}")
            kinds[str(v["id"])] = _KIND_NAMES[cond]
        edges = []
        for e in doc["edges"]:
            length = e["length"]
            if isinstance(length, dict):
                el = EdgeLength(float(length["float"]), length.get("expr"))
            else:
                el = EdgeLength(float(length))
            edges.append(Edge(str(e["id"]), str(e["from"]), str(e["to"]), el))
    except (KeyError, TypeError) as exc:
        raise GraphError(f"malformed graph document: {exc}") from exc
    g = MetricGraph(
        vertices=vertices,
        vertex_kinds=kinds,
        edges=tuple(edges),
        allow_disconnected=bool(doc.get("allow_disconnected", False)),
    )
    return _validate(g)


def graph_to_doc(g: MetricGraph) -> dict:
    doc = {
        "version": DOCUMENT_VERSION,
        "vertices": [
            {"id": v, "condition": g.vertex_kinds[v].value} for v in g.vertices
        ],
        "edges": [
            {
                "id": e.id,
                "from": e.tail,
                "to": e.head,
                "length": (
                    {"float": e.length.value, "expr": e.length.expr}
                    if e.length.expr is not None
                    else {"float": e.length.value}
                ),
            }
            for e in g.edges
        ],
    }
    if g.allow_disconnected:
        doc["allow_disconnected"] = True
    return doc


def load_graph(path) -> MetricGraph:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise GraphError(f"invalid JSON in {path}: {exc}") from exc
    return build_graph(doc)


def save_graph(g: MetricGraph, path) -> None:
    with open(path, "w") as fh:
        json.dump(graph_to_doc(g), fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Ratio analysis of declared symbolic lengths
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RatioReport:
    """Exact rationality analysis of a declared length family.

    ``ratios_irrational``: every pairwise ratio is irrational (and then
    automatically a quadratic algebraic number under the expression grammar).
    ``independent_with_one``: {1} together with the lengths is linearly
    independent over the rationals.  ``declared``: all lengths carried
    expressions, so the analysis is exact; otherwise both flags are None.
    """

    declared: bool
    ratios_irrational: bool | None
    independent_with_one: bool | None
    rational_ratio_pairs: tuple[tuple[int, int], ...] = ()


def ratio_analysis(lengths: list[EdgeLength]) -> RatioReport:
    parts = [el.exact_parts() for el in lengths]
    if any(p is None for p in parts):
        return RatioReport(declared=False, ratios_irrational=None, independent_with_one=None)
    radicands = [p[1] for p in parts]  # squarefree by construction
    bad = tuple(
        (i, j)
        for i in range(len(parts))
        for j in range(i + 1, len(parts))
        if radicands[i] == radicands[j]
    )
    # q_i sqrt(m_i) with m_i squarefree: {1, lengths} is Q-independent iff the
    # m_i are pairwise distinct and none equals 1.
    independent = not bad and all(r != 1 for r in radicands)
    return RatioReport(
        declared=True,
        ratios_irrational=not bad,
        independent_with_one=independent,
        rational_ratio_pairs=bad,
    )


# ---------------------------------------------------------------------------
# Builders for the standard test families
# ---------------------------------------------------------------------------

def interval(length: float | EdgeLength, left: VertexKind, right: VertexKind) -> MetricGraph:
    el = length if isinstance(length, EdgeLength) else EdgeLength(float(length))
    g = MetricGraph(
        vertices=("a", "b"),
        vertex_kinds={"a": left, "b": right},
        edges=(Edge("e1", "a", "b", el),),
    )
    return _validate(g)


def star(lengths, external: VertexKind = VertexKind.DIRICHLET) -> MetricGraph:
    """Star graph: edges run from external leaves (coordinate 0) to the center."""
    edges = []
    names = []
    kinds = {"c": VertexKind.KIRCHHOFF}
    for i, L in enumerate(lengths, start=1):
        el = L if isinstance(L, EdgeLength) else EdgeLength(float(L))
        leaf = f"v{i}"
        names.append(leaf)
        kinds[leaf] = external
        edges.append(Edge(f"e{i}", leaf, "c", el))
    g = MetricGraph(vertices=tuple(names) + ("c",), vertex_kinds=kinds, edges=tuple(edges))
    return _validate(g)


def tadpole(loop_length, tail_length, external: VertexKind = VertexKind.DIRICHLET) -> MetricGraph:
    """Loop of length L1 at the junction plus a tail whose coordinate-0 end is external."""
    l1 = loop_length if isinstance(loop_length, EdgeLength) else EdgeLength(float(loop_length))
    l2 = tail_length if isinstance(tail_length, EdgeLength) else EdgeLength(float(tail_length))
    g = MetricGraph(
        vertices=("w", "v"),
        vertex_kinds={"w": external, "v": VertexKind.KIRCHHOFF},
        edges=(Edge("e1", "v", "v", l1), Edge("e2", "w", "v", l2)),
    )
    return _validate(g)


def disjoint_intervals(lengths, kind: VertexKind = VertexKind.DIRICHLET) -> MetricGraph:
    """Family of unconnected intervals handled as one graph with a flag."""
    vertices = []
    kinds = {}
    edges = []
    for i, L in enumerate(lengths, start=1):
        el = L if isinstance(L, EdgeLength) else EdgeLength(float(L))
        a, b = f"a{i}", f"b{i}"
        vertices += [a, b]
        kinds[a] = kind
        kinds[b] = kind
        edges.append(Edge(f"e{i}", a, b, el))
    g = MetricGraph(
        vertices=tuple(vertices),
        vertex_kinds=kinds,
        edges=tuple(edges),
        allow_disconnected=True,
    )
    return _validate(g)
