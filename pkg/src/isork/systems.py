"""Benchmark isospectral Lie-Poisson flows.

Three matrix systems of the form mu_dot = [B(mu), mu] with
B = (grad H)^dagger, the gradient taken with respect to the Frobenius
pairing <xi, alpha> = trace(xi^dagger alpha):

* RigidBody: the free rigid body on so(3), H(W) = <Iinv W, W>/2 with a
  symmetric 3x3 inertia matrix.
* TodaExtended: a periodic Toda flow extended from the symmetric Lax
  form to full gl(n), with the quadratic-trace energy term.
* ZeitlinSphere: the spin-truncated vorticity equation on the sphere,
  skew-Hermitian traceless W with a stream matrix obtained by inverting
  the double-commutator Laplacian built from irreducible spin
  generators.

Every analytic gradient here is validated against central finite
differences in the test suite; B maps are pure functions evaluated
fresh at every solver iteration.  System objects are immutable after
construction (Laplacian factorizations are precomputed), so one
instance can serve any number of concurrent trajectories.
"""

from __future__ import annotations

import functools

import numpy as np

from .quadlie import (
    QuadraticStructure,
    orthogonal_structure,
    random_algebra_element,
    special_unitary_structure,
)

__all__ = [
    "IsospectralSystem",
    "RigidBody",
    "TodaExtended",
    "ZeitlinSphere",
    "rigid_body_B",
    "toda_lax_matrices",
    "toda_extended_B",
    "toda_extended_H",
    "zeitlin_spin_generators",
    "zeitlin_laplacian",
    "zeitlin_laplacian_inv",
    "zeitlin_B",
    "zeitlin_H",
    "casimirs",
]


def casimirs(w: np.ndarray, orders) -> list[float]:
    """Real parts of the trace Casimirs tr(w^k) for the requested k.

    The imaginary parts are a sanity metric for admissible states (they
    vanish identically for real or even-k skew-Hermitian input); callers
    wanting them can take np.trace of matrix powers directly.
    """
    out = []
    p = np.eye(w.shape[0], dtype=np.result_type(w.dtype, np.float64))
    k_prev = 0
    for k in orders:
        if k < k_prev:
            p = np.linalg.matrix_power(w, k)
        else:
            for _ in range(k - k_prev):
                p = p @ w
        k_prev = k
        out.append(float(np.real(np.trace(p))))
    return out


class IsospectralSystem:
    """Shared surface of the benchmark systems.

    Subclasses set `name`, `n`, `context`, `casimir_orders` and
    implement `hamiltonian`, `grad_hamiltonian`, `initial_state`.  The
    flow generator defaults to B = (grad H)^dagger; systems whose
    energy contains a Casimir summand may override B to drop that part,
    since a Casimir gradient commutes with the state and cannot move it.
    """

    name: str = ""
    n: int = 0
    context: QuadraticStructure
    casimir_orders: tuple[int, ...] = (2,)

    @property
    def dtype(self) -> np.dtype:
        return self.context.dtype

    def hamiltonian(self, w: np.ndarray) -> float:
        raise NotImplementedError

    def grad_hamiltonian(self, w: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def B(self, w: np.ndarray) -> np.ndarray:
        return self.grad_hamiltonian(w).conj().T

    def casimirs(self, w: np.ndarray) -> list[float]:
        return casimirs(w, self.casimir_orders)

    def state_residual(self, w: np.ndarray) -> float:
        """Frobenius residual of w against the system's state structure."""
        raise NotImplementedError

    def initial_state(self, seed: int, scale: float = 1.0) -> np.ndarray:
        raise NotImplementedError


# --- rigid body ---------------------------------------------------------


def rigid_body_B(w: np.ndarray, inertia=(1.0, 2.0, 3.0)) -> np.ndarray:
    """Flow generator of the free rigid body at angular momentum w.

    With H(W) = <Iinv W, W>/2 the Frobenius gradient constrained to
    skew directions is the skew projection of Iinv W, which for skew W
    is (Iinv W + W Iinv)/2; the generator is its transpose.  Isotropic
    inertia gives B = -W, and any W proportional to a single principal
    axis makes [B, W] vanish (relative equilibrium).
    """
    assert w.shape == (3, 3)
    assert np.allclose(w, -w.T, atol=1e-12 * (1.0 + abs(w).max()))
    iinv = _inertia_inverse(tuple(float(x) for x in inertia))
    return ((iinv @ w + w @ iinv) / 2.0).T


@functools.lru_cache(maxsize=None)
def _inertia_inverse(inertia: tuple[float, ...]) -> np.ndarray:
    if len(inertia) != 3 or any(x <= 0 for x in inertia):
        raise ValueError("inertia must be three positive moments")
    return np.diag([1.0 / x for x in inertia])


class RigidBody(IsospectralSystem):
    """Free rigid body on so(3), H(W) = <Iinv W, W>/2.

    The reported quadratic invariant is the squared Frobenius norm
    ||W||_F^2 (the angular momentum magnitude squared, equal to
    -tr(W^2) on the skew algebra), listed under the casimir_2 column.
    """

    name = "rigidbody"
    n = 3
    casimir_orders = (2,)

    def __init__(self, inertia=(1.0, 2.0, 3.0)):
        self.inertia = tuple(float(x) for x in inertia)
        self._iinv = _inertia_inverse(self.inertia)
        self.context = orthogonal_structure(3)

    def hamiltonian(self, w: np.ndarray) -> float:
        return 0.5 * float(np.trace((self._iinv @ w).T @ w))

    def grad_hamiltonian(self, w: np.ndarray) -> np.ndarray:
        return (self._iinv @ w + w @ self._iinv) / 2.0

    def casimirs(self, w: np.ndarray) -> list[float]:
        return [float(np.linalg.norm(w) ** 2)]

    def state_residual(self, w: np.ndarray) -> float:
        return float(np.linalg.norm(w + w.T))

    def initial_state(self, seed: int, scale: float = 1.0) -> np.ndarray:
        return random_algebra_element(self.context, seed, scale)


# --- periodic Toda, extended to gl(n) -----------------------------------


def toda_lax_matrices(a, b) -> tuple[np.ndarray, np.ndarray]:
    """Periodic Lax pair (L, B(L)) from diagonal and off-diagonal lists.

    L is symmetric tridiagonal with a on the diagonal, b_1..b_{n-1} on
    the off-diagonals, and b_n in the (1,n)/(n,1) corners; B(L) is its
    skew counterpart with +b above the diagonal and the corner signs
    flipped.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("a and b must be equal-length 1-d lists")
    n = a.size
    if n < 3:
        raise ValueError("lattice size must be at least 3")
    lax = np.diag(a)
    for i in range(n - 1):
        lax[i, i + 1] = lax[i + 1, i] = b[i]
    lax[0, n - 1] = lax[n - 1, 0] = b[n - 1]
    return lax, toda_extended_B(lax)


def toda_extended_B(w: np.ndarray) -> np.ndarray:
    """Entry mask sending w to its cyclic off-diagonal signed part.

    Keeps the superdiagonal, negates the subdiagonal, and treats the
    (1,n)/(n,1) corners periodically: B_{1,n} = -W_{1,n},
    B_{n,1} = +W_{n,1}.  On symmetric w the result is skew-symmetric
    and coincides with the classical Toda B(L).
    """
    n = w.shape[0]
    out = np.zeros_like(w, dtype=np.result_type(w.dtype, np.float64))
    idx = np.arange(n - 1)
    out[idx, idx + 1] = w[idx, idx + 1]
    out[idx + 1, idx] = -w[idx + 1, idx]
    out[0, n - 1] = -w[0, n - 1]
    out[n - 1, 0] = w[n - 1, 0]
    return out


def toda_extended_H(w: np.ndarray) -> float:
    """Extended Toda energy -tr(w^T B(w)) + 2 tr(w^2).

    The first term vanishes on symmetric w (the mask is odd under
    transposition), so on Lax-form states the energy reduces to the
    classical 2 tr(L^2); off the symmetric slice the extra term is what
    generates the flow.
    """
    w = np.asarray(w, dtype=float)
    return float(-np.trace(w.T @ toda_extended_B(w)) + 2.0 * np.trace(w @ w))


class TodaExtended(IsospectralSystem):
    """Periodic Toda flow on gl(n) with energy toda_extended_H.

    The gradient of the energy is -2 B(w) + 4 w^T.  The 2 tr(w^2) part
    is a Casimir: its gradient transposes to 4 w, which commutes with w
    and contributes nothing to the flow, while inside the implicit
    updates it would leak O(h^2) asymmetry into Lax-form states.  The
    stepper generator therefore keeps only the mask part,
    B(w) = 2 * mask(w^T), which is skew-symmetric exactly on the
    symmetric slice; trace Casimirs, and with them the dropped energy
    term, are conserved exactly by the similarity updates, so the
    reported energy drift is unaffected.
    """

    name = "toda"

    def __init__(self, n: int = 4):
        n = int(n)
        if n < 3:
            raise ValueError("lattice size must be at least 3")
        self.n = n
        self.context = orthogonal_structure(n)
        self.casimir_orders = tuple(range(2, n + 1))

    def hamiltonian(self, w: np.ndarray) -> float:
        return toda_extended_H(w)

    def grad_hamiltonian(self, w: np.ndarray) -> np.ndarray:
        return -2.0 * toda_extended_B(w) + 4.0 * w.T

    def B(self, w: np.ndarray) -> np.ndarray:
        return 2.0 * toda_extended_B(w.T)

    def state_residual(self, w: np.ndarray) -> float:
        return float(np.linalg.norm(w - w.T))

    def initial_state(self, seed: int, scale: float = 1.0) -> np.ndarray:
        # The alternating-sign Lax data; deterministic, seed unused.
        signs = (-1.0) ** np.arange(1, self.n + 1)
        lax, _ = toda_lax_matrices(scale * signs, scale * signs)
        return lax


# --- Zeitlin sphere ------------------------------------------------------


@functools.lru_cache(maxsize=None)
def zeitlin_spin_generators(N: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Skew-Hermitian generators of the irreducible spin-(N-1)/2 representation.

    Built from the Hermitian angular momentum matrices J1, J2, J3 in
    the m = -s..s basis as S1 = -i J1, S2 = -i J2, S3 = -i J3, giving
    S3 = i diag(s, s-1, ..., -s) and the cyclic relations
    [S1, S2] = S3, [S2, S3] = S1, [S3, S1] = S2.  Each S_k is traceless
    and skew-Hermitian, and sum_k S_k^2 = -s(s+1) I.
    """
    if N < 2:
        raise ValueError("truncation size must be at least 2")
    s = (N - 1) / 2.0
    m = -s + np.arange(N)
    j3 = np.diag(m).astype(complex)
    jplus = np.zeros((N, N), dtype=complex)
    jplus[np.arange(1, N), np.arange(N - 1)] = np.sqrt(s * (s + 1) - m[:-1] * (m[:-1] + 1))
    jminus = jplus.conj().T
    j1 = (jplus + jminus) / 2.0
    j2 = (jplus - jminus) / 2j
    s1, s2, s3 = -1j * j1, -1j * j2, -1j * j3
    for arr in (s1, s2, s3):
        arr.setflags(write=False)
    return s1, s2, s3


def zeitlin_laplacian(w: np.ndarray, N: int | None = None) -> np.ndarray:
    """Hoppe Laplacian -sum_k [S_k, [S_k, w]].

    The sign makes the operator positive semidefinite with eigenvalue
    l(l+1) on the spin-l matrix harmonics; its kernel is spanned by the
    identity, so it is invertible on traceless matrices.
    """
    if N is None:
        N = w.shape[0]
    out = np.zeros_like(w, dtype=complex)
    for s_k in zeitlin_spin_generators(N):
        inner = s_k @ w - w @ s_k
        out -= s_k @ inner - inner @ s_k
    return out


@functools.lru_cache(maxsize=None)
def _laplacian_pinv(N: int) -> np.ndarray:
    """Pseudoinverse of the Laplacian as a dense operator on vec(w).

    The operator matrix is Hermitian positive semidefinite with a
    one-dimensional kernel (the identity direction); eigenvalues at or
    below 1 are treated as that kernel, safe because the smallest
    nonzero eigenvalue is l(l+1) = 2.
    """
    eye = np.eye(N)
    op = np.zeros((N * N, N * N), dtype=complex)
    for s_k in zeitlin_spin_generators(N):
        ad = np.kron(s_k, eye) - np.kron(eye, s_k.T)
        op -= ad @ ad
    evals, vecs = np.linalg.eigh(op)
    inv = np.where(evals > 1.0, 1.0 / np.where(evals > 1.0, evals, 1.0), 0.0)
    pinv = (vecs * inv) @ vecs.conj().T
    pinv.setflags(write=False)
    return pinv


def zeitlin_laplacian_inv(w: np.ndarray, N: int | None = None) -> np.ndarray:
    """Solve laplacian(p) = w for traceless w via the cached spectral factorization.

    Raises ValueError when the input has a trace beyond roundoff scale,
    since the identity component is not in the operator's range.
    """
    if N is None:
        N = w.shape[0]
    trace_residual = abs(complex(np.trace(w)))
    if trace_residual > 1e-10 * (1.0 + float(np.linalg.norm(w))):
        raise ValueError(f"inverse Laplacian needs traceless input (|tr| = {trace_residual:.3e})")
    return (_laplacian_pinv(N) @ w.reshape(-1)).reshape(N, N)


def zeitlin_B(w: np.ndarray, N: int | None = None) -> np.ndarray:
    """Scaled stream matrix N^{3/2} laplacian_inv(w).

    This is the Frobenius gradient of zeitlin_H; the flow generator is
    its conjugate transpose, which on skew-Hermitian states is the
    negated stream matrix.
    """
    if N is None:
        N = w.shape[0]
    return N ** 1.5 * zeitlin_laplacian_inv(w, N)


def zeitlin_H(w: np.ndarray, N: int | None = None) -> float:
    """Kinetic energy (N^{3/2}/2) <laplacian_inv(w), w>, real on the algebra."""
    if N is None:
        N = w.shape[0]
    p = zeitlin_laplacian_inv(w, N)
    return 0.5 * N ** 1.5 * float(np.real(np.trace(p.conj().T @ w)))


class ZeitlinSphere(IsospectralSystem):
    """Spin-truncated vorticity flow on su(N).

    The default reading turns vorticity into a stream matrix with the
    inverse Laplacian, the interpretation under which the stated
    kinetic energy is conserved; `forward_laplacian=True` applies the
    forward operator instead, for comparison runs (a legal isospectral
    flow, but for a different quadratic energy).

    The generator used by the steppers is (grad H)^dagger.  For the
    inverse reading that is -N^{3/2} laplacian_inv(w) on skew-Hermitian
    states: the conjugate transpose flips the stream matrix's sign,
    which fixes the flow's orientation; the finite-difference check on
    grad H pins the gradient itself.

    Odd-order traces of skew-Hermitian matrices are purely imaginary,
    so the casimir_3 and casimir_5 diagnostics record the imaginary
    part (the real part is identically zero), while even orders record
    the real part.
    """

    name = "zeitlin"
    casimir_orders = (2, 3, 4, 5)

    def __init__(self, N: int = 17, forward_laplacian: bool = False):
        N = int(N)
        if N < 2:
            raise ValueError("truncation size must be at least 2")
        self.n = N
        self.N = N
        self.context = special_unitary_structure(N)
        self.forward_laplacian = bool(forward_laplacian)
        self.spin_generators = zeitlin_spin_generators(N)
        if not forward_laplacian:
            _laplacian_pinv(N)  # precompute; instances stay immutable after this
        self._scale = N ** 1.5

    def _stream(self, w: np.ndarray) -> np.ndarray:
        if self.forward_laplacian:
            return self._scale * zeitlin_laplacian(w, self.N)
        # Implicit stage iterates wander O(h^2) off the traceless slice
        # inside u(N); that direction is the Laplacian kernel and both
        # update forms return the half points to su(N) exactly, so the
        # stream is computed from the traceless component.
        trace = np.trace(w) / self.N
        if trace != 0.0:
            w = w - trace * np.eye(self.N)
        return self._scale * zeitlin_laplacian_inv(w, self.N)

    def hamiltonian(self, w: np.ndarray) -> float:
        return 0.5 * float(np.real(np.trace(self._stream(w).conj().T @ w)))

    def grad_hamiltonian(self, w: np.ndarray) -> np.ndarray:
        return self._stream(w)

    def casimirs(self, w: np.ndarray) -> list[float]:
        out = []
        p = w @ w
        for k in self.casimir_orders:
            if k > 2:
                p = p @ w
            tr = complex(np.trace(p))
            out.append(tr.real if k % 2 == 0 else tr.imag)
        return out

    def state_residual(self, w: np.ndarray) -> float:
        return float(np.linalg.norm(w + w.conj().T)) + abs(complex(np.trace(w)))

    def initial_state(self, seed: int, scale: float = 1.0) -> np.ndarray:
        w = random_algebra_element(self.context, seed, 1.0)
        return scale * (w / np.linalg.norm(w))
