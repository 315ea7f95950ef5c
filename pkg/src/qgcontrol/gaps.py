"""Empirical certification of spectral-gap hypotheses and small-divisor bounds.

All checks run over a finite index range and report range-limited constants;
nothing here claims an asymptotic law.  Repeated eigenvalues must be collapsed
to one representative first (`collapse_multiplicities`); the moment machinery
downstream assumes pairwise distinct frequencies.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

DEFAULT_D_GRID = tuple(round(0.1 * i, 1) for i in range(31))  # 0.0 .. 3.0
GAP_FLOOR = 1e-6


class GapHypothesisError(RuntimeError):
    """A structural assumption on the spectrum failed (not a numerical issue)."""


def collapse_multiplicities(lambdas, rel_tol: float = 1e-9):
    """Collapse numerically repeated eigenvalues to one representative.

    Returns (distinct, collapse_map) where collapse_map[i] is the list of
    original 1-based indices merged into distinct[i].
    """
    lams = np.asarray(lambdas, dtype=float)
    distinct: list[float] = []
    collapse: list[list[int]] = []
    for i, lam in enumerate(lams):
        if distinct and abs(lam - distinct[-1]) <= rel_tol * max(1.0, abs(lam)):
            collapse[-1].append(i + 1)
        else:
            distinct.append(float(lam))
            collapse.append([i + 1])
    return np.array(distinct), collapse


@dataclass
class GapReport:
    """Range-verified uniform and one-step gap constants for one window size."""

    M: int
    delta: float
    d_tilde: float
    C_fit: float
    worst_index: int
    violations: list[int]
    k_range: tuple[int, int]
    collapse_map: list[list[int]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "M": self.M,
            "delta": self.delta,
            "d_tilde": self.d_tilde,
            "C_fit": self.C_fit,
            "worst_index": self.worst_index,
            "range": list(self.k_range),
            "violations": self.violations,
            "collapse_map": self.collapse_map,
        }


def fit_gap_constants(
    lambdas,
    M: int,
    *,
    d_grid=DEFAULT_D_GRID,
    floor: float = GAP_FLOOR,
    collapse_map=None,
) -> GapReport:
    """Fit the uniform M-step gap constant and the one-step decay exponent.

    delta is the worst (lambda_{k+M} - lambda_k)/M over the range.  The decay
    fit reports the smallest grid exponent whose constant
    min_k (lambda_{k+1} - lambda_k) * k^(exponent/(M-1)) stays above ``floor``
    (M == 1 needs no exponent; the one-step gap itself must clear the floor).
    """
    lams = np.asarray(lambdas, dtype=float)
    if M < 1:
        raise ValueError("M must be >= 1")
    if len(lams) < M + 2:
        raise ValueError("need at least M + 2 eigenvalues")
    one_step = np.diff(lams)
    if np.any(one_step <= 0.0):
        k_bad = int(np.argmin(one_step)) + 1
        raise GapHypothesisError(
            f"repeated eigenvalue at k = {k_bad}; collapse multiplicities first"
        )
    m_step = (lams[M:] - lams[:-M]) / M
    delta = float(np.min(m_step))
    worst = int(np.argmin(m_step)) + 1
    violations = [int(k) + 1 for k in np.nonzero(m_step < floor)[0]]

    k = np.arange(1, len(one_step) + 1, dtype=float)
    d_tilde = None
    C_fit = float(np.min(one_step))  # exponent-0 constant as fallback
    for d in d_grid:
        expo = 0.0 if M == 1 else d / (M - 1)
        c = float(np.min(one_step * k**expo))
        if c > floor:
            d_tilde = float(d)
            C_fit = c
            break
        if M == 1:
            break  # exponent is vacuous for M = 1
    if d_tilde is None:
        d_tilde = float(d_grid[-1]) if M > 1 else 0.0
        expo = 0.0 if M == 1 else d_tilde / (M - 1)
        weighted = one_step * k**expo
        C_fit = float(np.min(weighted))
        violations += [int(np.argmin(weighted)) + 1]
    return GapReport(
        M=M,
        delta=delta,
        d_tilde=d_tilde,
        C_fit=C_fit,
        worst_index=worst,
        violations=sorted(set(violations)),
        k_range=(1, len(lams)),
        collapse_map=collapse_map or [],
    )


def best_gap_report(lambdas, *, max_M: int = 6, d_max: float = 1.0, **kw) -> GapReport:
    """Smallest window size whose report is clean with an exponent <= d_max."""
    last = None
    for M in range(1, max_M + 1):
        rep = fit_gap_constants(lambdas, M, **kw)
        if rep.ok and rep.d_tilde <= d_max:
            return rep
        last = rep
    return last


# ---------------------------------------------------------------------------
# Class partition for clustered frequencies
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClassPartition:
    """Contiguous grouping of frequencies: within a class consecutive gaps are
    below the threshold, across classes at least the threshold.

    The uniform M-step gap forbids M consecutive sub-threshold gaps, so a
    class can hold at most M members (at most M-1 small gaps in a row)."""

    classes: tuple[tuple[int, ...], ...]  # 1-based eigenvalue indices
    delta: float
    M: int

    @property
    def sizes(self) -> list[int]:
        return [len(c) for c in self.classes]


def partition_classes(lambdas, delta: float, M: int) -> ClassPartition:
    """Greedy left-to-right grouping: a gap >= delta starts a new class."""
    lams = np.asarray(lambdas, dtype=float)
    if len(lams) == 0:
        raise ValueError("empty spectrum")
    size_cap = max(M, 1)
    classes: list[list[int]] = [[1]]
    for i in range(1, len(lams)):
        if lams[i] - lams[i - 1] >= delta:
            classes.append([i + 1])
        else:
            classes[-1].append(i + 1)
    for c in classes:
        if len(c) > size_cap:
            raise GapHypothesisError(
                f"class {c} exceeds {size_cap} members; the uniform gap "
                f"hypothesis fails for (delta={delta}, M={M})"
            )
        span = lams[c[-1] - 1] - lams[c[0] - 1]
        if span >= delta * max(M - 1, 1):
            raise GapHypothesisError(
                f"class {c} spans {span:.3g} >= delta*(M-1); grouping inconsistent"
            )
    return ClassPartition(tuple(tuple(c) for c in classes), float(delta), int(M))


# ---------------------------------------------------------------------------
# Small divisors along secular roots
# ---------------------------------------------------------------------------

def neumann_star_secular(lengths, x):
    """sum_l sin(x L_l) * prod_{m != l} cos(x L_m); zeros are the Neumann-star
    eigenfrequencies."""
    x = np.asarray(x, dtype=float)
    lengths = np.asarray(lengths, dtype=float)
    s = np.sin(np.multiply.outer(x, lengths))
    c = np.cos(np.multiply.outer(x, lengths))
    total = np.zeros_like(x)
    for l in range(len(lengths)):
        prod = s[..., l].copy()
        for m in range(len(lengths)):
            if m != l:
                prod = prod * c[..., m]
        total += prod
    return total


def neumann_star_secular_roots(lengths, count: int) -> np.ndarray:
    """First ``count`` positive solutions of the Neumann-star secular relation."""
    lengths = np.asarray(lengths, dtype=float)
    total = float(np.sum(lengths))
    step = np.pi / (8.0 * total)
    roots: list[float] = []
    x_lo = step / 4.0
    x_hi = (count + 4) * np.pi / total
    f = lambda x: neumann_star_secular(lengths, x)
    while len(roots) < count:
        grid = np.arange(x_lo, x_hi, step)
        vals = f(grid)
        roots = []
        for i in range(len(grid) - 1):
            if vals[i] == 0.0:
                roots.append(float(grid[i]))
            elif vals[i] * vals[i + 1] < 0.0:
                roots.append(brentq(f, grid[i], grid[i + 1], xtol=1e-13, rtol=1e-15))
            elif (
                0 < i
                and abs(vals[i]) < abs(vals[i - 1])
                and abs(vals[i]) <= abs(vals[i + 1])
            ):
                # tangential zero (degenerate length families)
                res = minimize_scalar(
                    lambda x: abs(f(float(x))),
                    bounds=(grid[i - 1], grid[i + 1]),
                    method="bounded",
                    options={"xatol": 1e-13},
                )
                if abs(res.fun) <= 1e-10:
                    roots.append(float(res.x))
        x_hi *= 1.3
    return np.array(sorted(roots)[:count])


@dataclass(frozen=True)
class SmallDivisorReport:
    """Worst |cos(w_n L_l)| * w_n^(1+eps) over the checked roots."""

    C_eps: float
    epsilon: float
    argmin_root: int    # 1-based n
    argmin_length: int  # 1-based l
    n_roots: int


def small_divisor_check(omegas, lengths, epsilon: float) -> SmallDivisorReport:
    om = np.asarray(omegas, dtype=float)
    lengths = np.asarray(lengths, dtype=float)
    vals = np.abs(np.cos(np.multiply.outer(om, lengths))) * (om ** (1.0 + epsilon))[:, None]
    n, l = np.unravel_index(np.argmin(vals), vals.shape)
    return SmallDivisorReport(
        C_eps=float(vals[n, l]),
        epsilon=float(epsilon),
        argmin_root=int(n) + 1,
        argmin_length=int(l) + 1,
        n_roots=len(om),
    )


# ---------------------------------------------------------------------------
# Cross-family Dirichlet gap
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CrossFamilyReport:
    C_emp: float
    argmin_pair: tuple[float, float]
    coincidences: int


def dirichlet_cross_family_gap(lengths1, lengths2, epsilon: float, K: int) -> CrossFamilyReport:
    """Worst weighted gap between adjacent cross-family members of the merged
    Dirichlet interval spectra, min |gap| * k^eps up to merged index K.

    Exact cross-family coincidences (rationally related length families) drive
    the minimum to zero and are counted separately.
    """
    def family(lengths):
        vals = []
        for L in np.asarray(lengths, dtype=float):
            n_max = int(np.ceil(np.sqrt(K + 2) * max(lengths) / L)) + K + 2
            vals.extend(((n * np.pi / L) ** 2 for n in range(1, n_max)))
        return np.sort(np.array(vals))[: K + 1]

    f1, f2 = family(lengths1), family(lengths2)
    merged = sorted(
        [(v, 0) for v in f1] + [(v, 1) for v in f2]
    )[: 2 * (K + 1)]
    best = np.inf
    arg = (np.nan, np.nan)
    coincidences = 0
    for k in range(1, min(len(merged), 2 * K)):
        (v0, t0), (v1, t1) = merged[k - 1], merged[k]
        if t0 == t1:
            continue
        gap = abs(v1 - v0)
        if gap <= 1e-12 * max(1.0, v1):
            coincidences += 1
            gap = 0.0
        weighted = gap * k**epsilon
        if weighted < best:
            best = weighted
            arg = (v0, v1)
    return CrossFamilyReport(C_emp=float(best), argmin_pair=arg, coincidences=coincidences)
