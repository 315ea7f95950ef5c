"""Local steering experiments and finite-dimensional controllability checks.

The local loop linearizes the end-time coefficient map around the free
trajectory of the ground state: the first-order mismatch becomes a moment
problem with frequencies lambda_k - lambda_1 and targets scaled by the
ground-state couplings.  Newton-style iteration concatenates the corrective
controls in time, with the frame phases advanced per leg.

The finite-dimensional side verifies the rank of the Lie algebra generated by
the admissible planar rotations and factorizes model-space rotations into
them (the computable toy version of the global leg; no time-domain synthesis
is attempted for it).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import graded_norm, propagate
from .fields import ControlMatrix
from .moments import ControlSignal, MomentProblem, solve_moments
from .spectra import SpectralBasis


class SteeringError(RuntimeError):
    pass


@dataclass(frozen=True)
class SteeringProblem:
    """Reach a unit-norm coefficient target near the free ground state within
    a graded-norm ball of radius eps at time T."""

    basis: SpectralBasis
    coupling: ControlMatrix
    horizon: float
    target: np.ndarray  # frame coefficients at time T
    eps: float
    s: float
    delta: float | None = None  # fitted uniform gap, for horizon warnings

    def __post_init__(self):
        tgt = np.asarray(self.target, dtype=complex)
        object.__setattr__(self, "target", tgt)
        if abs(np.linalg.norm(tgt) - 1.0) > 1e-12:
            raise SteeringError("target must have unit l2 norm")
        if len(tgt) != self.coupling.K or len(tgt) > self.basis.K:
            raise SteeringError("dimension mismatch between target, coupling, basis")
        mismatch = tgt - _ground_delta(len(tgt))
        if graded_norm(mismatch, self.s) > self.eps:
            raise SteeringError(
                "target lies outside the stated graded-norm ball; widen eps"
            )


def _ground_delta(K: int) -> np.ndarray:
    d = np.zeros(K, dtype=complex)
    d[0] = 1.0
    return d


def linearized_control(
    problem: SteeringProblem,
    mismatch=None,
    *,
    time_offset: float = 0.0,
    reality_tol: float = 1e-9,
) -> ControlSignal:
    """Control whose first-order effect on the frame coefficients equals the
    mismatch (default: target minus the free ground state).

    The first-order map sends v to -i * B_k1 * int_0^T v(t) e^{i(l_k-l_1)t} dt,
    so the moment targets are i * x_k / B_k1; a mismatch whose first component
    makes that target non-real is rejected (it is normal to the sphere and not
    reachable at first order).  ``time_offset`` rotates the frequencies' phase
    reference for controls concatenated after earlier legs.
    """
    K = problem.coupling.K
    lams = problem.basis.lambdas[:K]
    B = problem.coupling.matrix
    if mismatch is None:
        mismatch = problem.target - _ground_delta(K)
    x = np.asarray(mismatch, dtype=complex)
    b_col = B[:, 0]
    weak = np.abs(b_col) <= 1e-14
    if np.any(weak):
        bad = [int(j) + 1 for j in np.nonzero(weak)[0]]
        raise SteeringError(f"vanishing ground-state coupling at modes {bad}")
    y = 1j * x / b_col
    scale = max(1.0, float(np.max(np.abs(y))))
    if abs(y[0].imag) > reality_tol * scale:
        raise SteeringError(
            "mismatch has a first-order-unreachable first component "
            f"(imaginary part {y[0].imag:.3e})"
        )
    y[0] = y[0].real
    omegas = lams - lams[0]
    y = y * np.exp(-1j * omegas * time_offset)
    mp = MomentProblem(frequencies=omegas, targets=y, horizon=problem.horizon)
    return solve_moments(mp, delta=problem.delta)


@dataclass
class SteerResult:
    controls: list[ControlSignal] = field(default_factory=list)
    errors: list[float] = field(default_factory=list)
    states: list[np.ndarray] = field(default_factory=list)
    converged: bool = False
    diverged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.controls)


def steer(
    problem: SteeringProblem,
    max_iters: int = 5,
    *,
    tol: float = 1e-6,
    steps_per_leg: int = 8192,
) -> SteerResult:
    """Iterate the linearized correction, concatenating the legs in time.

    Stops when the graded-norm error drops below ``tol``; reports divergence
    (without raising) when the error grows on two consecutive iterations.
    """
    K = problem.coupling.K
    lams = problem.basis.lambdas[:K]
    psi = _ground_delta(K)  # plain coefficients at t = 0
    result = SteerResult()
    damping = 1.0
    elapsed = 0.0
    frame = psi.copy()
    err = graded_norm(problem.target - frame, problem.s)
    result.errors.append(err)
    result.states.append(psi.copy())
    while len(result.controls) < max_iters:
        if err <= tol:
            result.converged = True
            return result
        mismatch = (problem.target - frame) * damping
        mismatch[0] = 1j * mismatch[0].imag  # tangent projection
        control = linearized_control(problem, mismatch, time_offset=elapsed)
        traj = propagate(
            psi, control, lams, problem.coupling, problem.horizon, steps_per_leg
        )
        psi = traj.final()
        elapsed += problem.horizon
        frame = np.exp(1j * lams * elapsed) * psi
        err = graded_norm(problem.target - frame, problem.s)
        result.controls.append(control)
        result.errors.append(err)
        result.states.append(psi.copy())
        if len(result.errors) >= 3 and (
            result.errors[-1] > result.errors[-2] >= result.errors[-3]
        ):
            result.diverged = True
            return result
        if result.errors[-1] > result.errors[-2]:
            damping *= 0.5
    result.converged = result.errors[-1] <= tol
    return result


# ---------------------------------------------------------------------------
# Planar rotation generators and Lie-algebra rank
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LieGeneratorSet:
    """Skew-Hermitian traceless planar generators over admissible index pairs.

    For a pair (j, k) and angle theta the generator has e^{i theta} at (j, k)
    and -e^{-i theta} at (k, j); the default angles {0, pi/2} span the same
    real space as the full circle of angles.
    """

    dimension: int
    pairs: tuple[tuple[int, int], ...]  # 1-based
    thetas: tuple[float, ...] = (0.0, np.pi / 2.0)

    def matrices(self) -> list[np.ndarray]:
        out = []
        for j, k in self.pairs:
            for theta in self.thetas:
                out.append(planar_generator(self.dimension, j, k, theta))
        return out


def planar_generator(n: int, j: int, k: int, theta: float) -> np.ndarray:
    if not (1 <= j <= n and 1 <= k <= n and j != k):
        raise ValueError(f"bad pair ({j}, {k}) for dimension {n}")
    E = np.zeros((n, n), dtype=complex)
    E[j - 1, k - 1] = np.exp(1j * theta)
    E[k - 1, j - 1] = -np.exp(-1j * theta)
    return E


def _real_vector(M: np.ndarray) -> np.ndarray:
    return np.concatenate([M.real.ravel(), M.imag.ravel()])


def lie_rank(generators: LieGeneratorSet, *, tol: float = 1e-10) -> int:
    """Dimension of the real Lie algebra generated by the planar rotations,
    computed by bracket closure with rank tracking; equals n^2 - 1 exactly
    when the finite-dimensional model is controllable."""
    mats = generators.matrices()
    if not mats:
        return 0
    basis: list[np.ndarray] = []
    vectors: list[np.ndarray] = []

    def try_add(M: np.ndarray) -> bool:
        v = _real_vector(M)
        norm = np.linalg.norm(v)
        if norm <= tol:
            return False
        for w in vectors:
            v = v - np.dot(v, w) * w
        res = np.linalg.norm(v)
        if res <= tol * max(1.0, norm):
            return False
        vectors.append(v / res)
        basis.append(M)
        return True

    queue = list(mats)
    while queue:
        M = queue.pop()
        if not try_add(M):
            continue
        for N in list(basis):
            queue.append(M @ N - N @ M)
    cap = generators.dimension**2 - 1
    return min(len(basis), cap)


def resonant_pairs(
    lambdas, coupling: ControlMatrix, n1: int, tol: float = 1e-9
) -> list[tuple[int, int]]:
    """Pairs (j, k) within the model dimension whose coupling is nonzero and
    whose transition frequency is shared by no other coupled pair in the
    available truncation."""
    lams = np.asarray(lambdas, dtype=float)
    B = coupling.matrix
    K = min(len(lams), coupling.K)
    connected = [
        (j, k) for j in range(K) for k in range(j + 1, K) if abs(B[j, k]) > 1e-14
    ]
    freqs = {p: abs(lams[p[0]] - lams[p[1]]) for p in connected}
    out = []
    for j, k in connected:
        if j >= n1 or k >= n1:
            continue
        f = freqs[(j, k)]
        clash = any(
            other != (j, k) and abs(freqs[other] - f) < tol for other in connected
        )
        if not clash:
            out.append((j + 1, k + 1))
    return out


# ---------------------------------------------------------------------------
# Rotation factorization (finite-dimensional global leg, state version)
# ---------------------------------------------------------------------------

def _pair_rotation(n: int, j: int, k: int, theta: float, alpha: float) -> np.ndarray:
    """exp(alpha * planar_generator): cos/sin block on the (j, k) plane."""
    R = np.eye(n, dtype=complex)
    c, s = np.cos(alpha), np.sin(alpha)
    R[j - 1, j - 1] = c
    R[k - 1, k - 1] = c
    R[j - 1, k - 1] = np.exp(1j * theta) * s
    R[k - 1, j - 1] = -np.exp(-1j * theta) * s
    return R


def rotation_factorization(
    target: np.ndarray, pairs: list[tuple[int, int]]
) -> list[tuple[int, int, float, float]]:
    """Factor a unit target state as a product of admissible planar rotations
    applied to the first basis vector.

    Returns [(j, k, theta, alpha)] with, left factor applied last,
    prod exp(alpha * E^theta_{jk}) e_1 = target; the pair graph must connect
    every index with nonzero amplitude to index 1.
    """
    x = np.asarray(target, dtype=complex).copy()
    n = len(x)
    if abs(np.linalg.norm(x) - 1.0) > 1e-10:
        raise SteeringError("rotation factorization needs a unit target")
    order, parent = _spanning_tree(n, pairs)
    support = {i + 1 for i in range(n) if abs(x[i]) > 1e-14}
    reachable = set(order)
    if not support <= reachable:
        raise SteeringError(
            f"pair graph does not connect amplitudes at {sorted(support - reachable)}"
        )
    steps: list[tuple[int, int, float, float]] = []
    # fold leaves into their parents; each recorded forward rotation restores
    # the amplitude the inverse rotation just removed
    for k in reversed(order):
        j = parent[k]
        if j is None:
            continue
        xj, xk = x[j - 1], x[k - 1]
        if abs(xk) <= 1e-15:
            continue
        if abs(xj) > 1e-15:
            theta = float(np.pi + np.angle(xj) - np.angle(xk))
        else:
            theta = np.pi
        alpha = float(np.arctan2(abs(xk), abs(xj)))
        x = _pair_rotation(n, j, k, theta, -alpha) @ x
        steps.append((j, k, theta, alpha))
    # x is now e^{i phi} e_1; absorb the phase with a diagonal factor
    phi = float(np.angle(x[0]))
    if abs(phi) > 1e-14:
        partner = _partner_of_first(pairs)
        steps.extend(_phase_steps(1, partner, phi))
    return steps


def _phase_steps(j: int, k: int, phi: float) -> list[tuple[int, int, float, float]]:
    """Three planar factors whose product is diag(e^{i phi}, e^{-i phi}) on the
    (j, k) plane: the in-plane axis conjugated onto the diagonal one."""
    return [
        (j, k, 0.0, np.pi / 4.0),
        (j, k, np.pi / 2.0, phi),
        (j, k, 0.0, -np.pi / 4.0),
    ]


def _partner_of_first(pairs) -> int:
    for j, k in pairs:
        if j == 1:
            return k
        if k == 1:
            return j
    raise SteeringError("no admissible pair touches index 1 for the phase fix")


def _spanning_tree(n: int, pairs):
    """BFS tree of the pair graph rooted at index 1."""
    neighbours: dict[int, set[int]] = {i: set() for i in range(1, n + 1)}
    for j, k in pairs:
        neighbours[j].add(k)
        neighbours[k].add(j)
    order = [1]
    parent: dict[int, int | None] = {1: None}
    queue = [1]
    while queue:
        v = queue.pop(0)
        for w in sorted(neighbours[v]):
            if w not in parent:
                parent[w] = v
                order.append(w)
                queue.append(w)
    return order, parent


def apply_factorization(steps, n: int) -> np.ndarray:
    """Product of the factored rotations, leftmost applied last."""
    U = np.eye(n, dtype=complex)
    for j, k, theta, alpha in steps:
        U = U @ _pair_rotation(n, j, k, theta, alpha)
    return U
