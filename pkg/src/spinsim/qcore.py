"""Dense complex linear algebra for small multi-qubit registers.

Conventions used throughout the package:

* qubit index 0 is the leftmost tensor factor; basis label ``|b0 b1 b2>``
  with bit 0 most significant in the integer basis index,
* spin-down maps to computational ``|1>``,
* gates are defined up to global phase; comparisons use
  :func:`unitaries_equal`.

Registers are at most four qubits (dim 16), so everything is a dense
``numpy`` array and no sparse or state-vector fast paths exist.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-9

PAULI_1Q = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

SQRT_X = np.array([[1, -1j], [-1j, 1]], dtype=complex) / math.sqrt(2)  # exp(-i pi X / 4)
PI_X = -1j * PAULI_1Q["X"]  # exp(-i pi X / 2)


class DimensionError(ValueError):
    """Operator/state dimensions are incompatible."""


class StateError(ValueError):
    """Matrix does not satisfy the density-matrix invariants."""


def n_qubits(dim: int) -> int:
    n = int(round(math.log2(dim)))
    if 2**n != dim or not 1 <= n <= 4:
        raise DimensionError(f"dimension {dim} is not 2^n with n in 1..4")
    return n


def make_gate(kind: str, *params: float) -> np.ndarray:
    """Build one of the native gate unitaries.

    ``kind`` is one of ``sqrtX``, ``piX``, ``virtualZ`` (one phase
    parameter) and ``controlledPhase`` (one phase parameter).  Phases are
    in radians and must be finite.
    """
    if kind == "sqrtX":
        return SQRT_X.copy()
    if kind == "piX":
        return PI_X.copy()
    if kind in ("virtualZ", "controlledPhase"):
        if len(params) != 1:
            raise ValueError(f"{kind} takes exactly one phase parameter")
        phi = float(params[0])
        if not math.isfinite(phi):
            raise ValueError(f"non-finite phase {phi!r}")
        if kind == "virtualZ":
            return np.diag([1.0, np.exp(1j * phi)]).astype(complex)
        return np.diag([1.0, 1.0, 1.0, np.exp(1j * phi)]).astype(complex)
    raise ValueError(f"unknown gate kind {kind!r}")


def ket(bits: Sequence[int]) -> np.ndarray:
    """Computational basis state |b0 b1 ...> as a vector."""
    idx = 0
    for b in bits:
        idx = (idx << 1) | int(b)
    v = np.zeros(2 ** len(bits), dtype=complex)
    v[idx] = 1.0
    return v


def density(psi: np.ndarray) -> np.ndarray:
    """Outer product |psi><psi| of a normalized state vector."""
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def ghz_state() -> np.ndarray:
    v = np.zeros(8, dtype=complex)
    v[0] = v[7] = 1 / math.sqrt(2)
    return v


def cluster_state() -> np.ndarray:
    """(|i>|0>|i> - |-i>|1>|-i>)/sqrt(2) on qubits (Q2, Q3, Q4)."""
    return np.array([1, 1j, -1, 1j, 1j, -1, 1j, 1], dtype=complex) / (2 * math.sqrt(2))


def cluster_prime_state() -> np.ndarray:
    """(|-i>|0>|-i> - |i>|1>|i>)/sqrt(2), reached at 3/4 of the CZ period."""
    return np.array([1, -1j, -1, -1j, -1j, -1, -1j, 1], dtype=complex) / (2 * math.sqrt(2))


def plus_state(n: int) -> np.ndarray:
    return np.full(2**n, 2 ** (-n / 2), dtype=complex)


def check_density(rho: np.ndarray, require_psd: bool = True) -> np.ndarray:
    """Validate Hermiticity, unit trace and (optionally) positivity."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise StateError(f"expected a square matrix, got shape {rho.shape}")
    n_qubits(rho.shape[0])
    if np.abs(rho - rho.conj().T).max() > HERMITICITY_TOL:
        raise StateError("matrix is not Hermitian within 1e-10")
    if abs(np.trace(rho) - 1.0) > TRACE_TOL:
        raise StateError(f"trace {np.trace(rho)} differs from 1 beyond 1e-10")
    if require_psd:
        evals = np.linalg.eigvalsh(rho)
        if evals.min() < -PSD_TOL:
            raise StateError(f"negative eigenvalue {evals.min():.3e} below -1e-9")
    return rho


def pauli_matrix(labels: str) -> np.ndarray:
    """Tensor product operator for a Pauli label string like ``"XIZ"``."""
    out = np.array([[1.0 + 0j]])
    for c in labels:
        if c not in PAULI_1Q:
            raise ValueError(f"invalid Pauli label {c!r} in {labels!r}")
        out = np.kron(out, PAULI_1Q[c])
    return out


def all_pauli_labels(n: int) -> list[str]:
    """All 4^n Pauli label strings in lexicographic I,X,Y,Z order."""
    labels = [""]
    for _ in range(n):
        labels = [p + c for p in labels for c in "IXYZ"]
    return labels


def embed_unitary(u: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    """Expand ``u`` acting on ``targets`` to the full 2^n register.

    Targets are register qubit indices in tensor order; they must be
    distinct and ``u`` must be 2^len(targets) dimensional.
    """
    targets = list(targets)
    if len(set(targets)) != len(targets):
        raise DimensionError(f"duplicate targets {targets}")
    if any(t < 0 or t >= n for t in targets):
        raise DimensionError(f"target out of range for {n}-qubit register: {targets}")
    k = len(targets)
    u = np.asarray(u, dtype=complex)
    if u.shape != (2**k, 2**k):
        raise DimensionError(f"gate shape {u.shape} does not match {k} targets")
    # reshape to rank-2n tensor, contract gate over target axes, restore order
    full = np.reshape(np.eye(2**n, dtype=complex), (2,) * (2 * n))
    ut = np.reshape(u, (2,) * (2 * k))
    out = np.tensordot(ut, full, axes=(list(range(k, 2 * k)), targets))
    # tensordot moved target axes to the front; permute them back
    rest = [ax for ax in range(2 * n) if ax not in targets]
    perm = [0] * (2 * n)
    for pos, ax in enumerate(list(targets) + rest):
        perm[ax] = pos
    out = np.transpose(out, perm)
    return np.reshape(out, (2**n, 2**n))


def embed_and_apply(rho: np.ndarray, u: np.ndarray, targets: Sequence[int]) -> np.ndarray:
    """Return U rho U^dag with ``u`` embedded on ``targets``."""
    rho = np.asarray(rho, dtype=complex)
    n = n_qubits(rho.shape[0])
    full = embed_unitary(u, targets, n)
    return full @ rho @ full.conj().T


def pauli_expectation(rho: np.ndarray, labels: str) -> float:
    """Tr(rho P) for the Pauli string ``labels``; clamped to [-1, 1]."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape[0] != 2 ** len(labels):
        raise DimensionError(f"{len(labels)}-qubit Pauli on dim-{rho.shape[0]} state")
    val = np.trace(rho @ pauli_matrix(labels))
    if abs(val.imag) > 1e-9:
        raise StateError(f"expectation of {labels} has imaginary part {val.imag:.3e}")
    return float(min(1.0, max(-1.0, val.real)))


def fidelity_pure(rho: np.ndarray, target: np.ndarray) -> float:
    """<psi|rho|psi> against a normalized pure target state."""
    rho = np.asarray(rho, dtype=complex)
    target = np.asarray(target, dtype=complex)
    if rho.shape[0] != target.shape[0]:
        raise DimensionError(f"state dim {target.shape[0]} vs rho dim {rho.shape[0]}")
    if abs(np.linalg.norm(target) - 1.0) > 1e-9:
        raise StateError("target state is not normalized")
    return float(np.real(target.conj() @ rho @ target))


def purity(rho: np.ndarray) -> float:
    """Tr(rho^2)."""
    rho = np.asarray(rho, dtype=complex)
    return float(np.real(np.trace(rho @ rho)))


def unitaries_equal(u: np.ndarray, v: np.ndarray, tol: float = 1e-9) -> bool:
    """Equality up to global phase: |Tr(U^dag V)| / dim == 1."""
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    if u.shape != v.shape:
        return False
    return bool(abs(abs(np.trace(u.conj().T @ v)) / u.shape[0] - 1.0) < tol)


def is_unitary(u: np.ndarray, tol: float = HERMITICITY_TOL) -> bool:
    u = np.asarray(u, dtype=complex)
    return bool(np.abs(u.conj().T @ u - np.eye(u.shape[0])).max() < tol)


def depolarize(rho: np.ndarray, contraction: float) -> np.ndarray:
    """Uniform Bloch-vector contraction: lam*rho + (1-lam)*I/d."""
    rho = np.asarray(rho, dtype=complex)
    d = rho.shape[0]
    return contraction * rho + (1.0 - contraction) * np.eye(d) / d


def random_density(n: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random physical density matrix from a Ginibre ensemble."""
    d = 2**n
    rank = rank or d
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def rho_to_json(rho: np.ndarray) -> dict:
    """Serialize to the {"dim", "re", "im"} row-major schema."""
    rho = np.asarray(rho, dtype=complex)
    return {
        "dim": int(rho.shape[0]),
        "re": [[float(x) for x in row] for row in rho.real],
        "im": [[float(x) for x in row] for row in rho.imag],
    }


def rho_from_json(obj: dict) -> np.ndarray:
    dim = int(obj["dim"])
    rho = np.array(obj["re"], dtype=float) + 1j * np.array(obj["im"], dtype=float)
    if rho.shape != (dim, dim):
        raise DimensionError(f"matrix shape {rho.shape} does not match dim {dim}")
    return rho


def diag_phase_vector(phases: Iterable[float], n: int) -> np.ndarray:
    """Diagonal of prod_q vZ(phi_q) over the register basis."""
    phis = list(phases)
    if len(phis) != n:
        raise DimensionError(f"need {n} phases, got {len(phis)}")
    d = np.zeros(2**n)
    for b in range(2**n):
        acc = 0.0
        for q in range(n):
            if (b >> (n - 1 - q)) & 1:
                acc += phis[q]
        d[b] = acc
    return np.exp(1j * d)
