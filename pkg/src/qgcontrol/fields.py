"""Control operators: multiplication fields, matrix elements, coupling checks.

Matrix elements are integrals of polynomial-times-trigonometric products and
are evaluated in closed form through the term engine; no quadrature enters the
library path (tests cross-check against adaptive quadrature separately).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import integrals
from .graphs import MetricGraph, classify_vertices
from .spectra import SpectralBasis

HERMITICITY_TOL = 1e-12


class FieldError(ValueError):
    """Field profile inconsistent with the graph."""


@dataclass(frozen=True)
class EdgeField:
    """Real polynomial plus optional sinusoid on one edge."""

    poly: tuple[float, ...] = ()
    sinusoid: tuple[float, float, float] | None = None  # (amp, omega, phase)

    def terms(self):
        out = []
        if self.poly and any(self.poly):
            out += integrals.poly_terms(self.poly)
        if self.sinusoid is not None:
            amp, omega, phase = self.sinusoid
            out += integrals.sinusoid_terms(amp, omega, phase)
        return out

    def is_zero(self) -> bool:
        return not self.terms()


@dataclass(frozen=True)
class ControlField:
    """Multiplication field (per-edge profiles) or the cross-scaled coupling
    map that mixes edges through argument rescaling."""

    kind: str  # "multiplication" | "cross_scaled"
    per_edge: tuple[EdgeField, ...] = ()

    def __post_init__(self):
        if self.kind not in ("multiplication", "cross_scaled"):
            raise FieldError(f"unknown field kind {self.kind!r}")


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

def star_quartic_field(g: MetricGraph, edge: int = 0) -> ControlField:
    """(x - L)^4 multiplication on one star edge, zero elsewhere."""
    L = g.edges[edge].length.value
    quartic = tuple(
        float(c)
        for c in (L**4, -4 * L**3, 6 * L**2, -4 * L, 1.0)
    )
    profiles = [
        EdgeField(poly=quartic) if l == edge else EdgeField()
        for l in range(len(g.edges))
    ]
    return ControlField("multiplication", tuple(profiles))


def tadpole_mixed_field(g: MetricGraph) -> ControlField:
    """Sinusoid-plus-parabola on the loop and a matched parabola on the tail.

    The profile vanishes at the junction on every incident end and its ingoing
    derivatives sum to zero there, so multiplication preserves the vertex
    conditions to leading order.
    """
    loop = next(i for i, e in enumerate(g.edges) if e.is_loop)
    tail = next(i for i, e in enumerate(g.edges) if not e.is_loop)
    L1 = g.edges[loop].length.value
    L2 = g.edges[tail].length.value
    profiles = [EdgeField() for _ in g.edges]
    profiles[loop] = EdgeField(
        poly=(0.0, -L1, 1.0), sinusoid=(1.0, 2.0 * np.pi / L1, 0.0)
    )
    profiles[tail] = EdgeField(poly=(L2**2 + 2 * L1 * L2, -2 * (L1 + L2), 1.0))
    return ControlField("multiplication", tuple(profiles))


def cross_scaled_field(g: MetricGraph) -> ControlField:
    """x^2-weighted coupling that maps edge j onto edge l with the argument
    rescaled by L_j/L_l; intended for families of unconnected intervals."""
    return ControlField("cross_scaled")


FIELD_PRESETS = {
    "star-quartic": star_quartic_field,
    "tadpole-mixed": tadpole_mixed_field,
    "cross-scaled": cross_scaled_field,
}


def field_from_doc(doc: dict, g: MetricGraph) -> ControlField:
    """Field from a document: {"preset": name} or {"kind": ..., "edges": {...}}."""
    if "preset" in doc:
        name = doc["preset"]
        if name not in FIELD_PRESETS:
            raise FieldError(f"unknown field preset {name!r}")
        return FIELD_PRESETS[name](g)
    kind = doc.get("kind", "multiplication")
    if kind == "cross_scaled":
        return ControlField("cross_scaled")
    by_id = doc.get("edges", {})
    profiles = []
    for e in g.edges:
        spec = by_id.get(e.id, {})
        sin_spec = spec.get("sin")
        profiles.append(
            EdgeField(
                poly=tuple(float(c) for c in spec.get("poly", ())),
                sinusoid=(
                    (float(sin_spec["amp"]), float(sin_spec["omega"]), float(sin_spec["phase"]))
                    if sin_spec
                    else None
                ),
            )
        )
    unknown = set(by_id) - {e.id for e in g.edges}
    if unknown:
        raise FieldError(f"field references missing edges {sorted(unknown)}")
    return ControlField("multiplication", tuple(profiles))


def field_to_doc(field: ControlField) -> dict:
    if field.kind == "cross_scaled":
        return {"kind": "cross_scaled"}
    edges = {}
    for i, ef in enumerate(field.per_edge):
        entry: dict = {}
        if ef.poly:
            entry["poly"] = list(ef.poly)
        if ef.sinusoid is not None:
            amp, omega, phase = ef.sinusoid
            entry["sin"] = {"amp": amp, "omega": omega, "phase": phase}
        edges[f"e{i + 1}"] = entry
    return {"kind": "multiplication", "edges": edges}


# ---------------------------------------------------------------------------
# Matrix elements
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ControlMatrix:
    """Hermitian truncation of the control operator in the eigenbasis."""

    matrix: np.ndarray

    def __post_init__(self):
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise FieldError("control matrix must be square")
        scale = max(1.0, float(np.max(np.abs(m))))
        if np.max(np.abs(m - m.conj().T)) > HERMITICITY_TOL * scale:
            raise FieldError("control matrix is not Hermitian")

    @property
    def K(self) -> int:
        return self.matrix.shape[0]


def _rescaled_terms(terms, alpha: float):
    """Terms of f(alpha * x) given the terms of f."""
    out = []
    for c, w in terms:
        scaled = np.array([c[k] * alpha**k for k in range(len(c))], dtype=complex)
        out.append((scaled, w * alpha))
    return out


def _apply_cross_scaled(basis: SpectralBasis, k: int):
    """Per-edge terms of the cross-scaled field applied to basis function k."""
    g = basis.graph
    lengths = g.lengths
    n = len(g.edges)
    x_sq = [np.array([0.0, 0.0, 1.0], dtype=complex)]
    mapped = []
    for l in range(n):
        acc: list = []
        for j in range(n):
            alpha = lengths[j] / lengths[l]
            part = _rescaled_terms(basis.edge_terms(k, j), alpha)
            weight = np.sqrt(alpha)
            part = [(weight * np.convolve(c, x_sq[0]), w) for c, w in part]
            acc += part
        mapped.append(acc)
    return mapped


def matrix_elements(field: ControlField, basis: SpectralBasis) -> ControlMatrix:
    """Hermitian matrix of the field in the truncated eigenbasis, via exact
    per-edge integrals."""
    g = basis.graph
    K = basis.K
    B = np.zeros((K, K), dtype=complex)
    if field.kind == "multiplication":
        if len(field.per_edge) != len(g.edges):
            raise FieldError("field profile count does not match the edge count")
        profile_terms = [ef.terms() for ef in field.per_edge]
        for l, e in enumerate(g.edges):
            terms_l = profile_terms[l]
            if not terms_l:
                continue
            length = e.length.value
            for k in range(K):
                mu_phi_k = integrals.multiply_terms(terms_l, basis.edge_terms(k, l))
                for j in range(k + 1):
                    prod = integrals.multiply_terms(
                        integrals.conjugate_terms(basis.edge_terms(j, l)), mu_phi_k
                    )
                    B[j, k] += integrals.integrate_terms(prod, 0.0, length)
        B = B + np.triu(B, 1).conj().T
    else:
        for k in range(K):
            mapped = _apply_cross_scaled(basis, k)
            for l, e in enumerate(g.edges):
                length = e.length.value
                for j in range(K):
                    prod = integrals.multiply_terms(
                        integrals.conjugate_terms(basis.edge_terms(j, l)), mapped[l]
                    )
                    B[j, k] += integrals.integrate_terms(prod, 0.0, length)
        B = 0.5 * (B + B.conj().T)  # symmetrize rounding noise
    return ControlMatrix(B)


# ---------------------------------------------------------------------------
# Coupling and resonance diagnostics
# ---------------------------------------------------------------------------

def coupling_decay_fit(M: ControlMatrix, exponent: float, zero_tol: float = 1e-14):
    """Worst |B_{1,j}| * j^exponent over the truncation, with the list of j
    where the ground-state coupling vanishes outright."""
    row = np.abs(M.matrix[0])
    j = np.arange(1, M.K + 1, dtype=float)
    violations = [int(i) + 1 for i in np.nonzero(row <= zero_tol)[0]]
    weighted = row * j**exponent
    return float(np.min(weighted)), violations


def resonance_collision_check(M: ControlMatrix, lambdas, tol: float = 1e-9, cap: int = 40):
    """Quadruples (j,k),(l,m) whose transition frequencies coincide within tol
    but whose diagonal control shifts fail to separate them.

    Enumeration is over j != k up to min(K, cap); near-equal frequency
    differences are matched through sorting rather than an O(K^4) scan.
    """
    lams = np.asarray(lambdas, dtype=float)
    K = min(M.K, len(lams), cap)
    diag = np.real(np.diag(M.matrix))
    pairs = [(j, k) for j in range(K) for k in range(K) if j != k]
    diffs = np.array([lams[j] - lams[k] for j, k in pairs])
    order = np.argsort(diffs)
    bad = []
    for a in range(len(order)):
        for b in range(a + 1, len(order)):
            ia, ib = order[a], order[b]
            if diffs[ib] - diffs[ia] >= tol:
                break
            j, k = pairs[ia]
            l, m = pairs[ib]
            if (j, k) == (l, m):
                continue
            shift = abs((diag[j] - diag[k]) - (diag[l] - diag[m]))
            if shift <= tol:
                quad = ((j + 1, k + 1), (l + 1, m + 1))
                bad.append(min(quad, quad[::-1]))
    return sorted(set(bad))


def perturbed_spectrum(lambdas, M: ControlMatrix, u0: float) -> np.ndarray:
    """Eigenvalues of diag(lambda) + u0 * B, sorted ascending."""
    lams = np.asarray(lambdas, dtype=float)
    if len(lams) != M.K:
        raise ValueError("eigenvalue count does not match the control matrix")
    H = np.diag(lams).astype(complex) + u0 * M.matrix
    return np.linalg.eigvalsh(H)


def first_order_residuals(lambdas, M: ControlMatrix, u0: float) -> np.ndarray:
    """lambda_k(u0) - lambda_k - u0 * B_kk; decays quadratically in u0."""
    lams = np.asarray(lambdas, dtype=float)
    return perturbed_spectrum(lams, M, u0) - lams - u0 * np.real(np.diag(M.matrix))


# ---------------------------------------------------------------------------
# Vertex regularity of the field profile
# ---------------------------------------------------------------------------

def field_vertex_defects(field: ControlField, g: MetricGraph, max_order: int = 1):
    """Continuity and flux defects of the multiplication profile at internal
    vertices, per derivative order.

    Order m reports (continuity spread of the m-th derivative, absolute
    ingoing-derivative sum of order m+1).  Small defects are the computable
    surrogate for the operator preserving the Laplacian domain.
    """
    if field.kind != "multiplication":
        raise FieldError("vertex defects are defined for multiplication fields")
    _, internal = classify_vertices(g)
    adjacency = g.adjacency
    report = {}
    for v in sorted(internal):
        per_order = []
        for order in range(max_order + 1):
            values = []
            flux = 0.0
            for edge_index, endpoint in adjacency[v]:
                e = g.edges[edge_index]
                x0 = 0.0 if endpoint == 0 else e.length.value
                direction = -1.0 if endpoint == 0 else 1.0
                terms = field.per_edge[edge_index].terms() or integrals.poly_terms([0.0])
                for _ in range(order):
                    terms = integrals.differentiate_terms(terms)
                val = complex(integrals.evaluate_terms(terms, np.array([x0]))[0])
                values.append(val)
                dterms = integrals.differentiate_terms(terms)
                flux += direction * complex(
                    integrals.evaluate_terms(dterms, np.array([x0]))[0]
                ).real
            spread = max(abs(a - b) for a in values for b in values)
            per_order.append((float(spread), abs(float(flux))))
        report[v] = per_order
    return report
