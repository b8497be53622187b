"""Quadratic matrix Lie groups, their algebras, and the Cayley transform.

A quadratic group is the set of invertible matrices g satisfying
g^dagger J g = J for a fixed invertible matrix J; its Lie algebra
consists of the matrices xi with J xi + xi^dagger J = 0.  Orthogonal,
unitary, and symplectic groups all arise this way.  The Cayley
transform

    cay(xi) = (I - xi/2)^{-1} (I + xi/2)

maps the algebra into the group exactly (no series truncation, one
linear solve per application).  Its right-trivialized differential and
the inverse of that differential are

    dcay_xi(eta)     = (I - xi/2)^{-1} eta (I + xi/2)^{-1}
    dcay_inv_xi(eta) = (I - xi/2) eta (I + xi/2)

and satisfy dcay_xi o dcay_inv_{-xi} = Ad_{cay(xi)}.  These maps are
the only group-level operations the integrators need.

All routines act on plain ndarrays.  The QuadraticStructure context is
consulted only for membership residuals and random sampling; nothing
here enforces membership at runtime.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SplitMix64",
    "QuadraticStructure",
    "orthogonal_structure",
    "special_unitary_structure",
    "commutator",
    "frobenius_pairing",
    "cayley",
    "dcay",
    "dcay_inv",
    "cayley_conjugate",
    "spectrum",
    "membership_residuals",
    "random_algebra_element",
]

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


class SplitMix64:
    """Deterministic random stream with 64 bits of state.

    The generator is SplitMix64: state advances by the odd constant
    0x9e3779b97f4a7c15 and each output mixes the advanced state through
    two xorshift-multiply rounds (constants 0xbf58476d1ce4e5b9 and
    0x94d049bb133111eb, shifts 30/27/31).  Doubles take the top 53 bits
    of the mixed word.  Because the state after k draws is just
    seed + k*gamma mod 2^64, blocks of draws vectorize with uint64
    arithmetic.  The point of carrying our own dozen-line generator is
    bit-identical streams on every platform and library version, which
    keeps seeded trajectories and their CSVs exactly reproducible.
    """

    def __init__(self, seed: int):
        self._count = 0
        self._seed = int(seed) & _MASK64

    def _mixed_block(self, count: int) -> np.ndarray:
        idx = np.arange(self._count + 1, self._count + count + 1, dtype=np.uint64)
        self._count += count
        z = np.uint64(self._seed) + idx * np.uint64(_GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))

    def uniform(self, shape=None) -> np.ndarray | float:
        """Uniform doubles in [-1, 1), advancing the stream one per entry."""
        if shape is None:
            return float(self.uniform((1,))[0])
        count = int(np.prod(shape))
        u01 = (self._mixed_block(count) >> np.uint64(11)) * 2.0 ** -53
        return (2.0 * u01 - 1.0).reshape(shape)


@dataclass(frozen=True, eq=False)
class QuadraticStructure:
    """Membership context for one quadratic group/algebra pair.

    J is the defining matrix (identity for orthogonal and unitary
    types, the canonical skew matrix for symplectic).  The scalar kind
    of the algebra is taken from J's dtype: a complex J means complex
    entries are admissible.  `traceless` additionally restricts the
    algebra to trace-free matrices (su(N) rather than u(N)).
    """

    n: int
    J: np.ndarray
    traceless: bool = False

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(np.complex128) if np.iscomplexobj(self.J) else np.dtype(np.float64)

    @property
    def identity_j(self) -> bool:
        return bool(np.array_equal(self.J, np.eye(self.n)))


def orthogonal_structure(n: int) -> QuadraticStructure:
    """Context for so(n): real matrices with xi + xi^T = 0."""
    return QuadraticStructure(n, np.eye(n), traceless=False)


def special_unitary_structure(n: int) -> QuadraticStructure:
    """Context for su(n): traceless skew-Hermitian matrices."""
    return QuadraticStructure(n, np.eye(n, dtype=complex), traceless=True)


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def frobenius_pairing(a: np.ndarray, b: np.ndarray):
    """Frobenius pairing <a, b> = trace(a^dagger b)."""
    return np.trace(np.asarray(a).conj().T @ b)


def _half_factors(xi: np.ndarray):
    xi = np.asarray(xi)
    dtype = np.result_type(xi.dtype, np.float64)
    eye = np.eye(xi.shape[0], dtype=dtype)
    return eye - 0.5 * xi, eye + 0.5 * xi


def _solve_right(a: np.ndarray, m: np.ndarray) -> np.ndarray:
    # X solving X m = a; plain transposes keep this valid over C.
    return np.linalg.solve(m.T, a.T).T


def cayley(xi: np.ndarray) -> np.ndarray:
    """cay(xi) = (I - xi/2)^{-1} (I + xi/2).

    Lands in the group of the context whose algebra contains xi.
    Raises numpy.linalg.LinAlgError when I - xi/2 is singular, which
    for stepped flows signals a step size too large for the Cayley
    chart.
    """
    lo, hi = _half_factors(xi)
    return np.linalg.solve(lo, hi)


def dcay(xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """Right-trivialized differential of cay at xi applied to eta."""
    lo, hi = _half_factors(xi)
    return _solve_right(np.linalg.solve(lo, eta), hi)


def dcay_inv(xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """Inverse of dcay at xi applied to eta: (I - xi/2) eta (I + xi/2)."""
    lo, hi = _half_factors(xi)
    return lo @ eta @ hi


def cayley_conjugate(xi: np.ndarray, x: np.ndarray) -> np.ndarray:
    """cay(xi) x cay(xi)^{-1} without forming either inverse.

    Uses the exact commutation of (I - xi/2) and (I + xi/2); the result
    is similar to x, so its spectrum agrees with x's to solve roundoff.
    """
    lo, hi = _half_factors(xi)
    a = np.linalg.solve(lo, hi @ x)
    return _solve_right(a, hi) @ lo


def spectrum(a: np.ndarray, real_tol: float = 1e-9) -> np.ndarray:
    """Eigenvalues of a in canonical order.

    Sorted by real part ascending with ties broken by imaginary part
    ascending.  Ties are detected with the relative tolerance
    `real_tol` rather than exact comparison: conserved spectra of skew
    or skew-Hermitian matrices have real parts that are pure roundoff
    noise, and an exact lexicographic sort would let that noise swap
    conjugate pairs between successive evaluations.  Clustering the
    real parts first makes the order reproducible along a trajectory.

    Eigensolver failures propagate as numpy.linalg.LinAlgError; they
    are never swallowed.
    """
    ev = np.linalg.eigvals(np.asarray(a, dtype=np.result_type(a.dtype, np.float64)))
    ev = ev[np.lexsort((ev.imag, ev.real))]
    if ev.size == 0:
        return ev
    tol = real_tol * (1.0 + float(np.max(np.abs(ev))))
    out = np.empty_like(ev)
    i, n = 0, ev.size
    while i < n:
        j = i + 1
        while j < n and ev[j].real - ev[j - 1].real <= tol:
            j += 1
        cluster = ev[i:j]
        out[i:j] = cluster[np.argsort(cluster.imag, kind="stable")]
        i = j
    return out


def membership_residuals(x: np.ndarray, context: QuadraticStructure) -> tuple[float, float]:
    """Frobenius residuals of x against the group and algebra conditions.

    Returns (group_residual, algebra_residual) where the group residual
    is ||x^dagger J x - J||_F and the algebra residual is
    ||J x + x^dagger J||_F, plus |trace x| when the context is
    traceless.  Pure measurement; nothing is enforced.
    """
    j = context.J
    xd = np.asarray(x).conj().T
    group = float(np.linalg.norm(xd @ j @ x - j))
    algebra = float(np.linalg.norm(j @ x + xd @ j))
    if context.traceless:
        algebra += abs(complex(np.trace(x)))
    return group, algebra


def random_algebra_element(context: QuadraticStructure, seed: int, scale: float = 1.0) -> np.ndarray:
    """Seeded random element of the context's algebra.

    Entries are drawn uniformly from scale*[-1, 1) with SplitMix64
    (real part first, then the imaginary part for complex contexts) and
    projected onto the algebra: x -> (x - J^{-1} x^dagger J)/2, which
    for J = I is plain antisymmetrization and satisfies the membership
    condition exactly in floating point.  Traceless contexts then have
    trace(x)/n removed, which stays inside the algebra because the
    trace of a skew-Hermitian matrix is imaginary.
    """
    rng = SplitMix64(seed)
    n = context.n
    raw = scale * rng.uniform((n, n))
    if context.dtype == np.complex128:
        raw = raw + 1j * (scale * rng.uniform((n, n)))
    if context.identity_j:
        x = (raw - raw.conj().T) / 2.0
    else:
        x = (raw - np.linalg.solve(context.J, raw.conj().T @ context.J)) / 2.0
    if context.traceless:
        x = x - (np.trace(x) / n) * np.eye(n, dtype=x.dtype)
    return x
