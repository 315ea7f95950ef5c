"""Closed-form integrals of polynomial-times-exponential edge profiles.

Everything downstream (eigenfunction normalization, Gram matrices, control
matrix elements) reduces to integrals of the form

    I(p, w; a, b) = int_a^b p(x) * exp(i*w*x) dx

with p a polynomial of small degree.  Edge profiles are kept as lists of
``(coeffs, omega)`` terms, so products of eigenfunctions and multiplication
fields stay inside the class and never require numerical quadrature.
"""

from __future__ import annotations

import numpy as np

# Below this value of |w| * max(|a|,|b|) the power series is used; above it the
# integration-by-parts recurrence is stable (no digit loss for degree <= ~12).
_SERIES_THRESHOLD = 8.0


def poly_exp_integral(coeffs, omega: float, a: float, b: float) -> complex:
    """Integrate p(x)*exp(i*omega*x) over [a, b] exactly.

    ``coeffs`` holds p in ascending powers.  Stable for every omega, including
    omega == 0 and the near-resonant regime |omega*(b-a)| << 1 where the naive
    recurrence cancels catastrophically.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    if coeffs.size == 0 or not np.any(coeffs):
        return 0.0 + 0.0j
    scale = abs(omega) * max(abs(a), abs(b))
    if scale <= _SERIES_THRESHOLD:
        return _series_integral(coeffs, omega, a, b)
    return _recurrence_integral(coeffs, omega, a, b)


def _series_integral(coeffs: np.ndarray, omega: float, a: float, b: float) -> complex:
    # int x^n e^{iwx} = sum_m (iw)^m / m! * (b^{n+m+1} - a^{n+m+1})/(n+m+1)
    total = 0.0 + 0.0j
    for n, c in enumerate(coeffs):
        if c == 0:
            continue
        term = 1.0 + 0.0j  # (i w)^m / m!
        acc = 0.0 + 0.0j
        for m in range(200):
            p = n + m + 1
            contrib = term * (b**p - a**p) / p
            acc += contrib
            term *= 1j * omega / (m + 1)
            if abs(contrib) <= 1e-18 * (abs(acc) + 1e-30) and m > 4:
                break
        total += c * acc
    return total


def _recurrence_integral(coeffs: np.ndarray, omega: float, a: float, b: float) -> complex:
    # J_n = int_a^b x^n e^{iwx} dx = [x^n e^{iwx}/(iw)]_a^b - (n/(iw)) J_{n-1}
    iw = 1j * omega
    ea, eb = np.exp(iw * a), np.exp(iw * b)
    n_max = len(coeffs) - 1
    J = np.empty(n_max + 1, dtype=complex)
    J[0] = (eb - ea) / iw
    for n in range(1, n_max + 1):
        J[n] = (b**n * eb - a**n * ea) / iw - (n / iw) * J[n - 1]
    return complex(np.dot(coeffs, J))


# ---------------------------------------------------------------------------
# Term lists: profile(x) = sum_k poly_k(x) * exp(i*omega_k*x)
# ---------------------------------------------------------------------------

def poly_terms(coeffs) -> list[tuple[np.ndarray, float]]:
    """A plain polynomial as a single zero-frequency term."""
    return [(np.asarray(coeffs, dtype=complex), 0.0)]


def trig_terms(amp_cos: complex, amp_sin: complex, z: float) -> list[tuple[np.ndarray, float]]:
    """a*cos(z x) + b*sin(z x) as exponential terms (z > 0)."""
    p = 0.5 * (amp_cos - 1j * amp_sin)
    q = 0.5 * (amp_cos + 1j * amp_sin)
    return [(np.array([p], dtype=complex), z), (np.array([q], dtype=complex), -z)]


def sinusoid_terms(amp: complex, omega: float, phase: float) -> list[tuple[np.ndarray, float]]:
    """amp*sin(omega x + phase) as exponential terms."""
    c_plus = amp * np.exp(1j * phase) / 2j
    c_minus = -amp * np.exp(-1j * phase) / 2j
    return [(np.array([c_plus], dtype=complex), omega), (np.array([c_minus], dtype=complex), -omega)]


def conjugate_terms(terms) -> list[tuple[np.ndarray, float]]:
    return [(np.conj(c), -w) for c, w in terms]


def multiply_terms(t1, t2) -> list[tuple[np.ndarray, float]]:
    """Pointwise product of two term lists, merging equal frequencies."""
    out: dict[float, np.ndarray] = {}
    for c1, w1 in t1:
        for c2, w2 in t2:
            c = np.convolve(c1, c2)
            w = w1 + w2
            if w in out:
                m = max(len(out[w]), len(c))
                s = np.zeros(m, dtype=complex)
                s[: len(out[w])] += out[w]
                s[: len(c)] += c
                out[w] = s
            else:
                out[w] = c
    return [(c, w) for w, c in out.items()]


def integrate_terms(terms, a: float, b: float) -> complex:
    return sum((poly_exp_integral(c, w, a, b) for c, w in terms), 0.0 + 0.0j)


def evaluate_terms(terms, x) -> np.ndarray:
    """Evaluate a term list on an array of points."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x, dtype=complex)
    for c, w in terms:
        out += np.polyval(c[::-1], x) * np.exp(1j * w * x)
    return out


def differentiate_terms(terms) -> list[tuple[np.ndarray, float]]:
    """d/dx of a term list: (p' + i w p) e^{iwx}."""
    out = []
    for c, w in terms:
        dp = np.array([k * c[k] for k in range(1, len(c))], dtype=complex)
        if dp.size == 0:
            dp = np.zeros(1, dtype=complex)
        m = max(len(dp), len(c))
        s = np.zeros(m, dtype=complex)
        s[: len(dp)] += dp
        s[: len(c)] += 1j * w * c
        out.append((s, w))
    return out
