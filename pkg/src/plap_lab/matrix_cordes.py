"""Cordes-condition checks and the associated matrix inequalities.

Matrices are plain ``numpy`` arrays. Every function accepts either a single
``(n, n)`` matrix or a stack ``(..., n, n)`` so randomized sweeps can run
vectorized; scalar inputs give Python floats back.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SPD_RTOL = 1e-12


@dataclass(frozen=True)
class CordesCertificate:
    """Cordes parameter ``delta`` with the constants it buys.

    ``basis`` is the matrix the condition is taken with respect to; ``None``
    means the identity.
    """

    delta: float
    c: float
    C: float
    basis: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if not 0.0 < self.delta <= 1.0:
            raise ValueError(f"delta must lie in (0, 1], got {self.delta}")
        if not 0.0 < self.c <= 1.0:
            raise ValueError(f"c must lie in (0, 1], got {self.c}")
        if self.C < 1.0:
            raise ValueError(f"C must be >= 1, got {self.C}")

    @classmethod
    def for_delta(cls, n: int, delta: float, basis=None) -> "CordesCertificate":
        c, C = cordes_constants(n, delta)
        return cls(delta=delta, c=c, C=C, basis=basis)


def _scalar(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def as_symmetric(M, name="matrix") -> np.ndarray:
    """Validate a (stack of) square symmetric matrices and return it as float."""
    M = np.asarray(M, dtype=float)
    if M.ndim < 2 or M.shape[-1] != M.shape[-2]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    if M.shape[-1] < 2:
        raise ValueError(f"{name} must have dimension >= 2")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    Mt = np.swapaxes(M, -1, -2)
    if not np.array_equal(M, Mt):
        scale = np.max(np.abs(M)) if M.size else 0.0
        if not np.allclose(M, Mt, rtol=0.0, atol=1e-12 * max(scale, 1.0)):
            raise ValueError(f"{name} is not symmetric")
        M = 0.5 * (M + Mt)
    return M


def _check_spd(B, name="B"):
    lam = np.linalg.eigvalsh(B)
    lo, hi = lam[..., 0], lam[..., -1]
    if np.any(hi <= 0) or np.any(lo <= SPD_RTOL * hi):
        raise ValueError(f"{name} is not positive definite")
    return lo, hi


def frob(M, N=None):
    """Hilbert-Schmidt inner product <M, N> over the last two axes."""
    if N is None:
        N = M
    return np.einsum("...ij,...ij->...", M, N)


def trace(M):
    return np.einsum("...ii->...", M)


def transpose_pairing(M):
    """<M, M^T> = sum_ij M_ij M_ji."""
    return np.einsum("...ij,...ji->...", M, M)


def cordes_ratio(A, B=None):
    """(tr(B^-1 A))^2 / <B^-1 A, (B^-1 A)^T> - (n - 1), the largest admissible delta."""
    A = as_symmetric(A, "A")
    n = A.shape[-1]
    if B is None:
        N = A
    else:
        B = as_symmetric(B, "B")
        _check_spd(B)
        N = np.linalg.solve(B, A)
    denom = transpose_pairing(N)
    if np.any(denom <= 0):
        raise ValueError("A must be nonzero")
    return trace(N) ** 2 / denom - (n - 1)


def cordes_delta(A, B=None):
    """Largest delta for which A satisfies the Cordes condition w.r.t. B.

    Returns ``None`` when the condition fails for every positive delta. For
    stacked input an array is returned with ``nan`` in place of ``None``.
    """
    value = cordes_ratio(A, B)
    if np.ndim(value) == 0:
        return float(value) if value > 0 else None
    return np.where(value > 0, value, np.nan)


def split_parallel_perp(A):
    """Split A into its multiple of the identity and the trace-free remainder."""
    A = as_symmetric(A, "A")
    n = A.shape[-1]
    par = (trace(A) / n)[..., None, None] * np.eye(n)
    return par, A - par


def cordes_constants(n: int, delta: float) -> tuple[float, float]:
    """Constants (c, C) for the basic Cordes inequality.

    ``C = n/delta`` makes the determinant of the restricted quadratic form at
    least one; ``c`` is then det/trace, a lower bound for its smallest
    eigenvalue. Valid, not sharp.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if not 0.0 < delta <= 1.0:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    C = n / delta
    return 1.0 / (2.0 - n + C), C


def cordes_quadratic_form(A, C: float):
    """2x2 coefficient matrix of the quadratic form in (m_par, m_perp).

    Returns ``(Q, det)`` where ``det`` is computed from the entries of Q.
    """
    par, perp = split_parallel_perp(A)
    n = np.shape(A)[-1]
    na2 = frob(par) + frob(perp)
    a = np.sqrt(frob(par) / na2)
    b = np.sqrt(frob(perp) / na2)
    Q = np.empty(np.shape(a) + (2, 2))
    Q[..., 0, 0] = 1 - n + C * a * a
    Q[..., 1, 1] = 1 + C * b * b
    Q[..., 0, 1] = Q[..., 1, 0] = C * a * b
    det = Q[..., 0, 0] * Q[..., 1, 1] - Q[..., 0, 1] * Q[..., 1, 0]
    return Q, _scalar(det)


def basic_cordes_gap(A, M, cert: CordesCertificate):
    """|M|^2 - tr(M)^2 + C <A,M>^2/|A|^2 - c|M|^2; nonnegative under the condition."""
    A = as_symmetric(A, "A")
    M = as_symmetric(M, "M")
    nA2 = frob(A)
    if np.any(nA2 == 0):
        raise ValueError("A must be nonzero")
    M2 = frob(M)
    gap = M2 - trace(M) ** 2 + cert.C / nA2 * frob(A, M) ** 2 - cert.c * M2
    return _scalar(gap)


def congruence_reduce(B):
    """Phi with Phi^T B Phi = I, from the spectral square root of B."""
    B = as_symmetric(B, "B")
    _check_spd(B)
    lam, Qm = np.linalg.eigh(B)
    return Qm * (1.0 / np.sqrt(lam))[..., None, :]


def general_cordes_gap(A, B, M, cert: CordesCertificate):
    """Gap of the Cordes inequality taken relative to an SPD matrix B."""
    A = as_symmetric(A, "A")
    B = as_symmetric(B, "B")
    M = as_symmetric(M, "M")
    _check_spd(B)
    BM = B @ M
    N = np.linalg.solve(B, A)
    nN = transpose_pairing(N)
    if np.any(nN <= 0):
        raise ValueError("A must be nonzero")
    P = transpose_pairing(BM)
    gap = P - trace(BM) ** 2 + cert.C / nN * frob(A, M) ** 2 - cert.c * P
    return _scalar(gap)


def transpose_product_bound(B, M):
    """Return (|BM|^2, (lmax/lmin)^2 <BM, (BM)^T>); the first never exceeds the second."""
    B = as_symmetric(B, "B")
    M = as_symmetric(M, "M")
    lo, hi = _check_spd(B)
    BM = B @ M
    return _scalar(frob(BM)), _scalar((hi / lo) ** 2 * transpose_pairing(BM))


# --- random sampling used by the sweeps -------------------------------------


def random_symmetric(rng: np.random.Generator, n: int, size: int) -> np.ndarray:
    G = rng.standard_normal((size, n, n))
    return 0.5 * (G + np.swapaxes(G, -1, -2))


def random_spd(rng: np.random.Generator, n: int, size: int, log_cond: float = 2.0):
    """SPD matrices with random orthogonal eigenvectors and log-uniform spectrum."""
    Qm, _ = np.linalg.qr(rng.standard_normal((size, n, n)))
    lam = 10.0 ** rng.uniform(-log_cond / 2, log_cond / 2, size=(size, n))
    B = (Qm * lam[:, None, :]) @ np.swapaxes(Qm, -1, -2)
    return 0.5 * (B + np.swapaxes(B, -1, -2))


def admissible_shift(A, delta: float, B=None, rng=None):
    """Shift A -> A + t B (t scalar per matrix) until the Cordes ratio reaches delta.

    The minimal |t| is solved for in closed form from tr(B^-1 A) and
    <B^-1 A, (B^-1 A)^T>; with ``rng`` a random excess margin is added, half
    of the samples staying within 1e-6 of the boundary of the admissible set.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[-1]
    N = A if B is None else np.linalg.solve(B, A)
    m = trace(N) / n
    spread = np.maximum(transpose_pairing(N) - n * m * m, 0.0)
    if delta >= 1.0:
        raise ValueError("delta = 1 is attained only by multiples of B; sample those directly")
    need = np.sqrt((n - 1 + delta) * spread / ((1 - delta) * n))
    if rng is None:
        margin = np.full(np.shape(m), 1e-9)
        sign = np.where(m >= 0, 1.0, -1.0)
    else:
        tight = rng.random(np.shape(m)) < 0.5
        margin = np.where(tight, 1e-6 * rng.random(np.shape(m)), rng.exponential(1.0, np.shape(m)))
        sign = np.where(rng.random(np.shape(m)) < 0.5, 1.0, -1.0)
    target = sign * np.where(need > 0, need * (1 + margin), 1.0)
    t = target - m
    I = np.eye(n) if B is None else B
    return A + t[..., None, None] * I
