"""Trigonometric moment problems: find a real control u on [0, T] with
prescribed integrals against exponentials.

The solver returns the minimum-L2-norm exponential-sum representative: the
frequency list is extended conjugate-symmetrically, the Gram matrix of the
exponentials is solved in closed form, and realness of u follows from the
symmetry of the extended system.  Divided-difference blocks over clustered
frequency classes are exposed for diagnosing near-degenerate (ill-conditioned)
problems rather than silently regularizing them.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .gaps import ClassPartition


class MomentError(RuntimeError):
    """Moment problem outside the solvable regime (conditioning, symmetry)."""


# ---------------------------------------------------------------------------
# Divided-difference blocks
# ---------------------------------------------------------------------------

def _block_matrix(nodes: np.ndarray) -> np.ndarray:
    """Upper-triangular inverse-node-difference matrix.

    Entry (j, k), j <= k, is prod_{l != j, l <= k} (h_j - h_l)^(-1); the (1,1)
    entry is 1.
    """
    n = len(nodes)
    F = np.zeros((n, n))
    F[0, 0] = 1.0
    for j in range(n):
        for k in range(j, n):
            if j == k == 0:
                continue
            prod = 1.0
            for l in range(k + 1):
                if l == j:
                    continue
                d = nodes[j] - nodes[l]
                if d == 0.0:
                    raise MomentError(f"coincident nodes within a class: {nodes}")
                prod /= d
            F[j, k] = prod
    return F


@dataclass(frozen=True)
class DividedDifferenceBlock:
    class_index: int
    nodes: np.ndarray
    matrix: np.ndarray

    @classmethod
    def from_nodes(cls, class_index: int, nodes) -> "DividedDifferenceBlock":
        nodes = np.asarray(nodes, dtype=float)
        return cls(class_index, nodes, _block_matrix(nodes))

    def inverse(self) -> np.ndarray:
        return solve_triangular(self.matrix, np.eye(len(self.nodes)))

    @property
    def size(self) -> int:
        return len(self.nodes)


def build_blocks(lambdas, partition: ClassPartition) -> list[DividedDifferenceBlock]:
    lams = np.asarray(lambdas, dtype=float)
    blocks = []
    for m, members in enumerate(partition.classes, start=1):
        nodes = lams[[k - 1 for k in members]]
        blocks.append(DividedDifferenceBlock.from_nodes(m, nodes))
    return blocks


def apply_blocks(blocks, x) -> np.ndarray:
    """Blockwise matrix-vector product of the divided-difference operator."""
    x = np.asarray(x, dtype=complex)
    total = sum(b.size for b in blocks)
    if total != len(x):
        raise ValueError("length mismatch between blocks and input")
    out = np.empty_like(x)
    pos = 0
    for b in blocks:
        out[pos : pos + b.size] = b.matrix @ x[pos : pos + b.size]
        pos += b.size
    return out


def trace_bound_constant(blocks, d_tilde: float) -> float:
    """Constant C with ||F x||_2 <= sqrt(C) ||x||_{h^d} from block traces."""
    best = 0.0
    pos = 0
    for b in blocks:
        indices = np.arange(pos + 1, pos + b.size + 1, dtype=float)
        tr = float(np.trace(b.matrix.T @ b.matrix))
        best = max(best, tr / float(np.min(indices**(2 * d_tilde))) if d_tilde else tr)
        pos += b.size
    return best


# ---------------------------------------------------------------------------
# Moment problem
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentProblem:
    """Targets x_k for the moments int_0^T u(t) exp(i w_k t) dt of a real u."""

    frequencies: np.ndarray
    targets: np.ndarray
    horizon: float

    def __post_init__(self):
        om = np.asarray(self.frequencies, dtype=float)
        x = np.asarray(self.targets, dtype=complex)
        object.__setattr__(self, "frequencies", om)
        object.__setattr__(self, "targets", x)
        if len(om) != len(x):
            raise ValueError("frequency/target length mismatch")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if len(np.unique(om)) != len(om):
            raise MomentError("frequencies must be pairwise distinct")
        zero = np.abs(om) < 1e-14
        if np.any(zero) and np.max(np.abs(x[zero].imag)) > 1e-14:
            raise MomentError("target at the zero frequency must be real")


@dataclass
class ControlSignal:
    """Real control as an exponential sum sum_j c_j exp(-i w_j t) on [0, T]."""

    frequencies: np.ndarray
    coefficients: np.ndarray
    horizon: float
    residual: float
    condition_number: float

    def evaluate(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        phases = np.exp(-1j * np.multiply.outer(t, self.frequencies))
        vals = phases @ self.coefficients
        return vals.real if np.max(np.abs(vals.imag), initial=0.0) < 1e-10 else vals

    def __call__(self, t):
        return self.evaluate(t)

    def sample(self, n: int | None = None):
        if n is None:
            n = max(32 * len(self.frequencies), 512)
        t = np.linspace(0.0, self.horizon, n + 1)
        phases = np.exp(-1j * np.multiply.outer(t, self.frequencies))
        return t, phases @ self.coefficients

    def max_imag(self, n: int | None = None) -> float:
        _, u = self.sample(n)
        return float(np.max(np.abs(u.imag)))

    def l2_norm(self) -> float:
        G = _gram(self.frequencies, self.horizon)
        return float(np.sqrt(np.real(self.coefficients.conj() @ G @ self.coefficients)))

    def to_json(self) -> dict:
        return {
            "frequencies": [repr(w) for w in self.frequencies.tolist()],
            "coefficients_re": [repr(c.real) for c in self.coefficients.tolist()],
            "coefficients_im": [repr(c.imag) for c in self.coefficients.tolist()],
            "T": repr(self.horizon),
            "residual": repr(self.residual),
            "cond": repr(self.condition_number),
        }

    def write_csv(self, path, n: int | None = None) -> None:
        t, u = self.sample(n)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "u"])
            for ti, ui in zip(t, u):
                writer.writerow([repr(float(ti)), repr(float(ui.real))])

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")


def _gram(freqs: np.ndarray, T: float) -> np.ndarray:
    """G_{jk} = int_0^T exp(i (w_j - w_k) t) dt, Hermitian positive definite."""
    D = np.subtract.outer(freqs, freqs)
    small = np.abs(D) < 1e-14
    Dsafe = np.where(small, 1.0, D)
    G = (np.exp(1j * Dsafe * T) - 1.0) / (1j * Dsafe)
    return np.where(small, T + 0.0j, G)


def extend_conjugate(frequencies, targets):
    """Extended frequency and target lists closed under w -> -w with
    conjugate-symmetric targets; the duplicate of a zero frequency is dropped."""
    om = np.asarray(frequencies, dtype=float)
    x = np.asarray(targets, dtype=complex)
    ext_om = list(om)
    ext_x = list(x)
    for w, xk in zip(om, x):
        if abs(w) < 1e-14:
            continue
        ext_om.append(-w)
        ext_x.append(np.conj(xk))
    order = np.argsort(ext_om)
    return np.array(ext_om)[order], np.array(ext_x)[order]


COND_LIMIT = 1e12


def solve_moments(problem: MomentProblem, *, delta: float | None = None) -> ControlSignal:
    """Minimum-norm real control matching the prescribed moments.

    When ``delta`` (a fitted uniform gap) is supplied and T <= 2*pi/delta the
    problem may sit outside the solvable-time regime; a warning is emitted but
    the Gram solve proceeds, with its condition number as the arbiter.
    """
    T = problem.horizon
    if delta is not None and T <= 2.0 * np.pi / delta:
        warnings.warn(
            f"horizon T = {T:.4g} is at or below the solvability threshold "
            f"{2 * np.pi / delta:.4g}; conditioning may degrade",
            stacklevel=2,
        )
    ext_om, ext_x = extend_conjugate(problem.frequencies, problem.targets)
    G = _gram(ext_om, T)
    cond = float(np.linalg.cond(G))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise MomentError(
            f"Gram condition number {cond:.3e} exceeds {COND_LIMIT:.0e}: "
            "the horizon is too small or frequencies are near-resonant"
        )
    try:
        c = np.linalg.solve(G, ext_x)
    except np.linalg.LinAlgError:
        jitter = 1e-12 * np.trace(G).real / len(ext_om)
        c = np.linalg.solve(G + jitter * np.eye(len(ext_om)), ext_x)
    # iterative refinement keeps the analytic moment residual near roundoff
    for _ in range(2):
        r = ext_x - G @ c
        c = c + np.linalg.solve(G, r)
    c = _symmetrize_coefficients(ext_om, c)
    residual = float(np.linalg.norm(G @ c - ext_x))
    return ControlSignal(
        frequencies=ext_om,
        coefficients=c,
        horizon=T,
        residual=residual,
        condition_number=cond,
    )


def _symmetrize_coefficients(freqs: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Project onto the real-control subspace c(-w) = conj(c(w))."""
    out = c.copy()
    index = {round(float(w), 12): i for i, w in enumerate(freqs)}
    for i, w in enumerate(freqs):
        if w < 0:
            continue
        j = index.get(round(float(-w), 12))
        if j is None:
            continue
        if i == j:
            out[i] = out[i].real
        else:
            avg = 0.5 * (out[i] + np.conj(out[j]))
            out[i] = avg
            out[j] = np.conj(avg)
    return out


def signal_moments(signal: ControlSignal, frequencies) -> np.ndarray:
    """Analytic moments int_0^T u(t) exp(i w t) dt of an exponential-sum u."""
    om = np.asarray(frequencies, dtype=float)
    D = np.subtract.outer(om, signal.frequencies)
    small = np.abs(D) < 1e-14
    Dsafe = np.where(small, 1.0, D)
    E = (np.exp(1j * Dsafe * signal.horizon) - 1.0) / (1j * Dsafe)
    E = np.where(small, signal.horizon + 0.0j, E)
    return E @ signal.coefficients


# ---------------------------------------------------------------------------
# Empirical moment-map bound
# ---------------------------------------------------------------------------

def moment_bound_trial_ratios(
    lambdas, T: float, trials: int, *, seed: int = 0, modes: int = 16
) -> np.ndarray:
    """l2 norms of the moment vectors of random band-limited unit-norm trial
    functions on (0, T); the max over trials estimates the moment-map bound."""
    lams = np.asarray(lambdas, dtype=float)
    rng = np.random.default_rng(seed)
    ns = np.arange(-modes, modes + 1)
    # moments of the Fourier modes: int exp(i(lam_k + 2 pi n / T) t)/sqrt(T)
    W = np.add.outer(lams, 2.0 * np.pi * ns / T)
    small = np.abs(W) < 1e-14
    Wsafe = np.where(small, 1.0, W)
    E = (np.exp(1j * Wsafe * T) - 1.0) / (1j * Wsafe)
    E = np.where(small, T + 0.0j, E) / np.sqrt(T)
    ratios = np.empty(trials)
    for i in range(trials):
        gamma = rng.standard_normal(len(ns)) + 1j * rng.standard_normal(len(ns))
        gamma /= np.linalg.norm(gamma)
        ratios[i] = np.linalg.norm(E @ gamma)
    return ratios


def moment_bound_constant(lambdas, T: float, trials: int, *, seed: int = 0, modes: int = 16) -> float:
    return float(np.max(moment_bound_trial_ratios(lambdas, T, trials, seed=seed, modes=modes)))


def moment_bound_monotone(lambdas, horizons, trials: int, *, seed: int = 0, modes: int = 16):
    """Empirical bound across increasing horizons on matched trial sets.

    Trials for a smaller horizon are zero-extended to every larger one, which
    changes neither their moments nor their norm, so each horizon's constant
    is the running maximum over its own trials and all earlier ones.
    """
    horizons = sorted(float(t) for t in horizons)
    out = []
    running = 0.0
    for i, T in enumerate(horizons):
        ratios = moment_bound_trial_ratios(lambdas, T, trials, seed=seed + i, modes=modes)
        running = max(running, float(np.max(ratios)))
        out.append(running)
    return out
