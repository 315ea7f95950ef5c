"""Eigenvalues and eigenfunctions of the Laplacian on a compact metric graph.

On each edge an eigenfunction of frequency z = sqrt(lambda) is
a*cos(z x) + b*sin(z x) (affine a + b*x for lambda = 0).  The vertex
conditions assemble into a homogeneous 2N x 2N linear system whose scaled
real determinant is the secular function; its positive zeros are the
eigenfrequencies and the null space at a zero carries the eigenfunctions,
with multiplicity equal to the null-space dimension.

Scaling of the system: the sine column is sin(z x)*max(1,z)/z and flux rows
are divided by max(1,z), so every entry stays O(1) on [0, inf) and the z->0
limit of the determinant is exactly the affine (lambda = 0) system.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .graphs import MetricGraph, VertexKind, classify_vertices, total_length
from . import integrals


class SpectralError(RuntimeError):
    """Root-count mismatch or unresolved near-degeneracy."""


_NULL_SPACE_RTOL = 1e-8


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------

def _assembly_plan(g: MetricGraph):
    """Rows of the vertex-condition system as primitive contributions.

    Each row is a list of (column_pair_base, x0, direction, kind, weight) with
    kind 'val' or 'der'; direction is the ingoing orientation sign at the
    endpoint (-1 at coordinate 0, +1 at coordinate L).
    """
    adjacency = g.adjacency
    rows = []
    for v in g.vertices:
        ends = adjacency[v]
        kind = g.vertex_kinds[v]
        prims = []
        for edge_index, endpoint in ends:
            L = g.edges[edge_index].length.value
            x0 = 0.0 if endpoint == 0 else L
            direction = -1.0 if endpoint == 0 else 1.0
            prims.append((2 * edge_index, x0, direction))
        if kind == VertexKind.DIRICHLET:
            col, x0, _ = prims[0]
            rows.append([(col, x0, 1.0, "val", 1.0)])
        elif kind == VertexKind.NEUMANN:
            col, x0, direction = prims[0]
            rows.append([(col, x0, direction, "der", 1.0)])
        else:  # Kirchhoff: continuity chain + flux balance
            c0, x0_0, _ = prims[0]
            for col, x0, _ in prims[1:]:
                rows.append([(c0, x0_0, 1.0, "val", 1.0), (col, x0, 1.0, "val", -1.0)])
            rows.append([(col, x0, direction, "der", 1.0) for col, x0, direction in prims])
    return rows


def secular_matrices(g: MetricGraph, zs: np.ndarray) -> np.ndarray:
    """Scaled condition matrices, shape (len(zs), 2N, 2N)."""
    zs = np.atleast_1d(np.asarray(zs, dtype=float))
    n = 2 * len(g.edges)
    rows = _assembly_plan(g)
    A = np.zeros((zs.shape[0], n, n))
    s = np.maximum(1.0, zs)
    for i, row in enumerate(rows):
        for col, x0, direction, kind, weight in row:
            zx = zs * x0
            if kind == "val":
                A[:, i, col] += weight * np.cos(zx)
                # sin(z x0) * max(1,z)/z, stable as z -> 0
                A[:, i, col + 1] += weight * x0 * np.sinc(zx / np.pi) * s
            else:
                A[:, i, col] += weight * direction * (-zs * np.sin(zx)) / s
                A[:, i, col + 1] += weight * direction * np.cos(zx)
    return A


def secular_determinant(g: MetricGraph, z) -> float | np.ndarray:
    """Scaled real secular determinant; positive zeros are eigenfrequencies."""
    scalar = np.isscalar(z)
    det = np.linalg.det(secular_matrices(g, z))
    return float(det[0]) if scalar else det


def _null_space(g: MetricGraph, z: float):
    """(null dimension, eigenfunction coefficient rows (a_l, b_l per edge))."""
    A = secular_matrices(g, np.array([z]))[0]
    _, sing, vh = np.linalg.svd(A)
    null_dim = int(np.sum(sing <= _NULL_SPACE_RTOL * sing[0]))
    if null_dim == 0:
        return 0, None
    vecs = vh[-null_dim:].copy()
    # undo the sine-column scaling: b = beta * max(1,z)/z
    vecs[:, 1::2] *= max(1.0, z) / z
    return null_dim, vecs


def zero_modes(g: MetricGraph) -> np.ndarray | None:
    """Affine eigenfunctions at lambda = 0 (rows of (a_l, b_l)), or None."""
    n = 2 * len(g.edges)
    rows = _assembly_plan(g)
    A = np.zeros((len(rows), n))
    for i, row in enumerate(rows):
        for col, x0, direction, kind, weight in row:
            if kind == "val":
                A[i, col] += weight
                A[i, col + 1] += weight * x0
            else:
                A[i, col + 1] += weight * direction
    _, sing, vh = np.linalg.svd(A)
    null_dim = int(np.sum(sing <= _NULL_SPACE_RTOL * sing[0]))
    if null_dim == 0:
        return None
    return vh[-null_dim:].copy()


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EigenPair:
    """Eigenvalue with per-edge amplitudes.

    ``coeffs[l] = (a_l, b_l)`` means a_l*cos(sqrt(lam) x) + b_l*sin(sqrt(lam) x)
    on edge l, or a_l + b_l*x when lam == 0.
    """

    index: int
    lam: float
    coeffs: np.ndarray
    multiplicity: int = 1

    def edge_terms(self, edge: int):
        a, b = self.coeffs[edge]
        if self.lam == 0.0:
            return integrals.poly_terms([a, b])
        return integrals.trig_terms(a, b, np.sqrt(self.lam))


@dataclass
class SpectralBasis:
    """First K eigenpairs of a graph, orthonormalized in L2."""

    graph: MetricGraph
    pairs: tuple[EigenPair, ...]
    _terms_cache: dict = field(default_factory=dict, repr=False)

    @property
    def K(self) -> int:
        return len(self.pairs)

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([p.lam for p in self.pairs])

    def edge_terms(self, k: int, edge: int):
        key = (k, edge)
        if key not in self._terms_cache:
            self._terms_cache[key] = self.pairs[k].edge_terms(edge)
        return self._terms_cache[key]

    def inner_product(self, j: int, k: int) -> complex:
        total = 0.0 + 0.0j
        for l, e in enumerate(self.graph.edges):
            terms = integrals.multiply_terms(
                integrals.conjugate_terms(self.edge_terms(j, l)), self.edge_terms(k, l)
            )
            total += integrals.integrate_terms(terms, 0.0, e.length.value)
        return total

    def gram(self) -> np.ndarray:
        K = self.K
        G = np.empty((K, K), dtype=complex)
        for j in range(K):
            for k in range(j, K):
                G[j, k] = self.inner_product(j, k)
                G[k, j] = np.conj(G[j, k])
        return G

    def evaluate(self, k: int, edge: int, x) -> np.ndarray:
        return integrals.evaluate_terms(self.edge_terms(k, edge), x)


# ---------------------------------------------------------------------------
# Root isolation
# ---------------------------------------------------------------------------

def _grid_step(g: MetricGraph) -> float:
    lengths = g.lengths
    # density-guided default, with a safeguard for graphs dominated by one
    # long edge where min*pi/(8*max) alone would overshoot the root spacing
    return min(
        min(lengths) * np.pi / (8.0 * max(lengths)),
        np.pi / (4.0 * total_length(g)),
    )


def _local_scale(absdet: np.ndarray, i: int, window: int = 40) -> float:
    lo = max(0, i - window)
    hi = min(len(absdet), i + window)
    return float(np.max(absdet[lo:hi])) or 1.0


def _polish_extremum(det_scalar, zm: float, lo: float, hi: float) -> float:
    """Locate the critical point of the determinant near zm via a sign flip of
    the centred-difference derivative; falls back to zm when no flip exists."""
    delta = 1e-6 * max(1.0, abs(zm))

    def dprime(z):
        return det_scalar(z + delta) - det_scalar(z - delta)

    a = max(lo, zm - 0.5 * (hi - lo))
    b = min(hi, zm + 0.5 * (hi - lo))
    da, db = dprime(a), dprime(b)
    if da == 0.0:
        return a
    if db == 0.0:
        return b
    if da * db > 0.0:
        return zm
    return brentq(dprime, a, b, xtol=1e-13 * max(1.0, b), rtol=1e-15)


def _handle_dip(g, det_scalar, lo: float, hi: float, zm: float, scale: float):
    """Classify a sign-preserving dip of the determinant on (lo, hi).

    Returns a list of (z, multiplicity): two bracketed simple roots when the
    polished extremum flips sign (a close pair inside one scan cell), one
    multiple root when the extremum value vanishes, nothing for a benign dip.
    """
    s_out = np.sign(det_scalar(lo))
    if s_out == 0.0 or np.sign(det_scalar(hi)) != s_out:
        return None  # window not sign-definite; let the caller refine
    z0 = _polish_extremum(det_scalar, zm, lo, hi)
    d0 = det_scalar(z0)
    if np.sign(d0) == -s_out:
        found = []
        for a, b in ((lo, z0), (z0, hi)):
            z = brentq(det_scalar, a, b, xtol=1e-13 * max(1.0, b), rtol=1e-15)
            dim, _ = _null_space(g, z)
            found.append((z, max(dim, 1)))
        return found
    if abs(d0) <= 1e-12 * scale:
        dim, _ = _null_space(g, z0)
        if dim == 0:
            return None
        return [(z0, dim)]
    if abs(d0) <= 1e-7 * scale:
        return None  # ambiguous near-degeneracy; caller refines the scan
    return []


def _scan_roots(g: MetricGraph, z_lo: float, z_hi: float, step: float):
    """Roots (z, multiplicity) in (z_lo, z_hi] via sign changes plus recovery
    of sign-preserving dips (double roots or unresolved close pairs)."""
    grid = np.arange(z_lo, z_hi + step, step)
    det = secular_determinant(g, grid)
    absdet = np.abs(det)
    roots: list[tuple[float, int]] = []

    def det_scalar(z):
        return secular_determinant(g, float(z))

    for i in range(len(grid) - 1):
        if det[i] == 0.0:
            continue
        if det[i] * det[i + 1] < 0.0:
            z = brentq(det_scalar, grid[i], grid[i + 1],
                       xtol=1e-13 * max(1.0, grid[i + 1]), rtol=1e-15)
            dim, _ = _null_space(g, z)
            roots.append((z, max(dim, 1)))
    for i in np.nonzero(det == 0.0)[0]:
        dim, _ = _null_space(g, float(grid[i]))
        if dim > 0:
            roots.append((float(grid[i]), dim))

    # Sign-preserving local minima of |det|: a double root touches zero, and a
    # close pair inside one cell flips sign twice leaving no net change.
    unresolved = []
    for i in range(1, len(grid) - 1):
        if not (absdet[i] < absdet[i - 1] and absdet[i] <= absdet[i + 1]):
            continue
        lo, hi = grid[i - 1], grid[i + 1]
        # keep clear of already-bracketed roots inside the window
        inside = sorted(z for z, _ in roots if lo < z < hi)
        for z in inside:
            if z <= grid[i]:
                lo = max(lo, z + 1e-9 * max(1.0, z))
            else:
                hi = min(hi, z - 1e-9 * max(1.0, z))
        if hi <= lo:
            continue
        res = minimize_scalar(
            lambda z: abs(det_scalar(z)),
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": 1e-13 * max(1.0, hi)},
        )
        scale = _local_scale(absdet, i)
        if abs(res.fun) > 1e-7 * scale:
            continue
        # a minimum hugging the window edge is the slope of a neighbouring
        # root, not an interior dip
        margin = 1e-6 * max(1.0, hi)
        if res.x - lo < margin or hi - res.x < margin:
            continue
        outcome = _handle_dip(g, det_scalar, lo, hi, float(res.x), scale)
        if outcome is None:
            unresolved.append(float(res.x))
        else:
            roots.extend(outcome)
    if unresolved:
        raise SpectralError(
            f"unresolved near-degeneracies near z ~ {unresolved[:3]}; refine and retry"
        )
    roots.sort()
    # merge duplicates found through different detectors
    merged: list[tuple[float, int]] = []
    for z, m in roots:
        if merged and abs(z - merged[-1][0]) <= 1e-9 * max(1.0, z):
            merged[-1] = (merged[-1][0], max(merged[-1][1], m))
        else:
            merged.append((z, m))
    return merged


# ---------------------------------------------------------------------------
# Closed forms and decoupled reference spectra
# ---------------------------------------------------------------------------

def closed_form_spectrum(family: str, count: int, **params) -> list[tuple[float, int]]:
    """Analytic (eigenvalue, multiplicity) lists for the oracle families."""
    k = np.arange(1, count + 1, dtype=float)
    if family == "interval_DD":
        L = params["length"]
        lams = (k * np.pi / L) ** 2
        return [(float(x), 1) for x in lams]
    if family == "interval_NN":
        L = params["length"]
        lams = ((k - 1) * np.pi / L) ** 2
        return [(float(x), 1) for x in lams]
    if family == "interval_DN":
        L = params["length"]
        lams = ((2 * k - 1) * np.pi / (2 * L)) ** 2
        return [(float(x), 1) for x in lams]
    if family == "tadpole_skew":
        L1 = params["loop_length"]
        lams = (2 * k * np.pi / L1) ** 2
        return [(float(x), 1) for x in lams]
    if family == "equilateral_star":
        n_edges = params["edges"]
        L = params["length"]
        out = []
        m = 1
        while sum(mult for _, mult in out) < count:
            out.append((((2 * m - 1) * np.pi / (2 * L)) ** 2, 1))
            out.append(((m * np.pi / L) ** 2, n_edges - 1))
            m += 1
        out.sort()
        return out
    raise ValueError(f"unsupported closed-form family {family!r}")


def expand_spectrum(pairs: list[tuple[float, int]], count: int | None = None) -> np.ndarray:
    """Flatten (eigenvalue, multiplicity) pairs into an ordered array."""
    flat = [lam for lam, mult in pairs for _ in range(mult)]
    return np.array(flat if count is None else flat[:count])


def dirichlet_decoupled_spectrum(g: MetricGraph, count: int) -> np.ndarray:
    """Spectrum after imposing Dirichlet at every vertex: reordered (n pi/L_j)^2."""
    vals = []
    for L in g.lengths:
        n_needed = int(np.ceil(np.sqrt(count) * total_length(g) / L)) + count + 2
        vals.extend(((n * np.pi / L) ** 2 for n in range(1, n_needed)))
    return np.sort(np.array(vals))[:count]


def neumann_decoupled_spectrum(g: MetricGraph, count: int) -> np.ndarray:
    """Spectrum after disconnecting every edge with Neumann ends."""
    vals = []
    for L in g.lengths:
        n_needed = int(np.ceil(np.sqrt(count) * total_length(g) / L)) + count + 2
        vals.extend((((n - 1) * np.pi / L) ** 2 for n in range(1, n_needed)))
    return np.sort(np.array(vals))[:count]


def _count_check(g: MetricGraph, lams: np.ndarray) -> None:
    """Index-wise bracketing of the computed spectrum between the decoupled
    Neumann and Dirichlet spectra; a violation signals missed roots."""
    K = len(lams)
    n_edges = len(g.edges)
    n_vertices = len(g.vertices)
    upper = dirichlet_decoupled_spectrum(g, K + n_vertices + 1)
    lower = neumann_decoupled_spectrum(g, K)
    for k in range(1, K + 1):
        lam = lams[k - 1]
        tol = 1e-9 * max(1.0, lam)
        if lam > upper[k + n_vertices - 1] + tol:
            raise SpectralError(
                f"root-count mismatch: lambda_{k} = {lam:.6g} exceeds the "
                f"Dirichlet-decoupled bracket {upper[k + n_vertices - 1]:.6g}"
            )
        if k > 2 * n_edges and lam < lower[k - 2 * n_edges - 1] - tol:
            raise SpectralError(
                f"root-count mismatch: lambda_{k} = {lam:.6g} falls below the "
                f"Neumann-decoupled bracket {lower[k - 2 * n_edges - 1]:.6g}"
            )


# ---------------------------------------------------------------------------
# Spectrum computation
# ---------------------------------------------------------------------------

def _norm_squared(g: MetricGraph, lam: float, coeffs: np.ndarray) -> float:
    total = 0.0
    for l, e in enumerate(g.edges):
        a, b = coeffs[l]
        if lam == 0.0:
            terms = integrals.poly_terms([a, b])
        else:
            terms = integrals.trig_terms(a, b, np.sqrt(lam))
        prod = integrals.multiply_terms(integrals.conjugate_terms(terms), terms)
        total += integrals.integrate_terms(prod, 0.0, e.length.value).real
    return total


def _eigenspace_inner(g: MetricGraph, lam: float, c1: np.ndarray, c2: np.ndarray) -> float:
    total = 0.0
    for l, e in enumerate(g.edges):
        if lam == 0.0:
            t1 = integrals.poly_terms(c1[l])
            t2 = integrals.poly_terms(c2[l])
        else:
            z = np.sqrt(lam)
            t1 = integrals.trig_terms(c1[l][0], c1[l][1], z)
            t2 = integrals.trig_terms(c2[l][0], c2[l][1], z)
        prod = integrals.multiply_terms(integrals.conjugate_terms(t1), t2)
        total += integrals.integrate_terms(prod, 0.0, e.length.value).real
    return total


def _orthonormalize(g: MetricGraph, lam: float, vecs: np.ndarray) -> list[np.ndarray]:
    """L2-orthonormalize coefficient vectors within one eigenspace and fix the
    phase so the first nonnegligible coefficient is real positive."""
    m = len(vecs)
    coeff_sets = [v.reshape(-1, 2) for v in vecs]
    G = np.empty((m, m))
    for i in range(m):
        for j in range(i, m):
            G[i, j] = G[j, i] = _eigenspace_inner(g, lam, coeff_sets[i], coeff_sets[j])
    R = np.linalg.cholesky(G).T  # G = R^T R
    Rinv = np.linalg.inv(R)
    out = []
    for j in range(m):
        c = sum(Rinv[i, j] * coeff_sets[i] for i in range(m))
        flat = c.ravel()
        lead = flat[np.argmax(np.abs(flat) > 1e-8 * np.max(np.abs(flat)))]
        if lead.real < 0:
            c = -c
        out.append(c)
    return out


def compute_spectrum(
    g: MetricGraph,
    K: int,
    *,
    step: float | None = None,
    max_refinements: int = 6,
) -> SpectralBasis:
    """First K eigenpairs in nondecreasing order, L2-normalized.

    Raises SpectralError when the Weyl-style bracket detects missed roots even
    after the scan step has been refined ``max_refinements`` times.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    base_step = step if step is not None else _grid_step(g)
    last_error: Exception | None = None
    for attempt in range(max_refinements + 1):
        try:
            return _compute_spectrum_once(g, K, base_step / (2**attempt))
        except SpectralError as exc:
            last_error = exc
    raise SpectralError(
        f"spectrum of {g} did not stabilize after {max_refinements} refinements"
    ) from last_error


def _roots_agree(f1, f2) -> bool:
    if len(f1) != len(f2):
        return False
    for (z1, m1), (z2, m2) in zip(f1, f2):
        if m1 != m2 or abs(z1 - z2) > 1e-8 * max(1.0, z2):
            return False
    return True


def _compute_spectrum_once(g: MetricGraph, K: int, step: float) -> SpectralBasis:
    pairs: list[EigenPair] = []
    zm = zero_modes(g)
    if zm is not None:
        for c in _orthonormalize(g, 0.0, zm):
            pairs.append(EigenPair(len(pairs) + 1, 0.0, np.asarray(c, dtype=complex), len(zm)))
    need = K - len(pairs)
    density = total_length(g) / np.pi  # mean number of roots per unit z
    z_lo = 1e-9
    z_hi = (need + 2 * len(g.edges) + len(g.vertices) + 6) / density
    found: list[tuple[float, int]] = []
    while need > 0:
        found = _scan_roots(g, z_lo, z_hi, 0.5 * step)
        if sum(m for _, m in found) >= need:
            # a coarser scan must see the identical root multiset, otherwise
            # the grid is still too crude to trust
            if not _roots_agree(_scan_roots(g, z_lo, z_hi, step), found):
                raise SpectralError(
                    "root scan did not converge between grid resolutions"
                )
            break
        z_hi *= 1.4
    for z, mult in found:
        if need <= 0:
            break
        dim, vecs = _null_space(g, z)
        if dim == 0:
            raise SpectralError(f"lost root during refinement at z ~ {z:.6g}")
        lam = z * z
        for c in _orthonormalize(g, lam, vecs):
            if need <= 0:
                break
            pairs.append(EigenPair(len(pairs) + 1, lam, np.asarray(c, dtype=complex), dim))
            need -= 1
    lams = np.array([p.lam for p in pairs])
    if np.any(np.diff(lams) < -1e-12):
        raise SpectralError("eigenvalues came out unordered")
    _count_check(g, lams)
    return SpectralBasis(graph=g, pairs=tuple(pairs))


# ---------------------------------------------------------------------------
# Star amplitude closed form
# ---------------------------------------------------------------------------

def star_normalization(basis: SpectralBasis, j: int) -> float | None:
    """|amplitude on edge 1|^2 of the j-th star eigenfunction via the
    product-of-sines closed form; None tags the degenerate branch where the
    eigenfunction is supported off the first edge."""
    g = basis.graph
    external, internal = classify_vertices(g)
    if (
        len(internal) != 1
        or any(g.vertex_kinds[v] != VertexKind.DIRICHLET for v in external)
        or any(e.is_loop for e in g.edges)
        or any({e.tail, e.head} & internal == set() for e in g.edges)
    ):
        raise ValueError("closed-form amplitudes require a Dirichlet star")
    pair = basis.pairs[j - 1]
    if pair.multiplicity != 1:
        return None
    z = np.sqrt(pair.lam)
    lengths = g.lengths
    sins = np.sin(z * np.array(lengths))
    if np.any(np.abs(sins) < 1e-9):
        return None
    prods = []
    for k in range(len(lengths)):
        p = 1.0
        for m in range(len(lengths)):
            if m != k:
                p *= sins[m] ** 2
        prods.append(p)
    denom = sum(L * p for L, p in zip(lengths, prods))
    return float(2.0 * prods[0] / denom)


def weyl_fit(lams: np.ndarray, k_min: int = 2) -> tuple[float, float]:
    """Interval [C1, C2] with C1*k^2 <= lambda_k <= C2*k^2 on the given range."""
    k = np.arange(1, len(lams) + 1)
    ratios = lams[k_min - 1 :] / (k[k_min - 1 :] ** 2)
    return float(np.min(ratios)), float(np.max(ratios))


def spectrum_to_csv(basis: SpectralBasis, path) -> None:
    n_edges = len(basis.graph.edges)
    header = ["k", "lambda", "multiplicity"]
    for l in range(1, n_edges + 1):
        header += [f"re_a{l}", f"im_a{l}", f"re_b{l}", f"im_b{l}"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for p in basis.pairs:
            row = [p.index, repr(float(p.lam)), p.multiplicity]
            for l in range(n_edges):
                a, b = p.coeffs[l]
                row += [
                    repr(float(a.real)),
                    repr(float(a.imag)),
                    repr(float(b.real)),
                    repr(float(b.imag)),
                ]
            writer.writerow(row)
