"""Dense linear algebra for small composite Hilbert spaces.

Kets, operators and density matrices carry their subsystem dimensions
(big-endian: the first subsystem is the most significant index). Values
are immutable; every operation returns a new object.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

ATOL = 1e-10
UNITARY_ATOL = 1e-12
NORM_ATOL = 1e-12


class DimensionError(ValueError):
    """Raised when subsystem dimensions do not line up."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=complex)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Ket:
    """Pure state vector over a tensor product of subsystems.

    Normalization is not enforced, since branch kets carry their
    probability amplitude in their norm. Use ``is_normalized`` to check and
    ``normalize`` to rescale on purpose.
    """

    dims: tuple[int, ...]
    amplitudes: np.ndarray

    def __init__(self, amplitudes, dims: Sequence[int] | None = None):
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        dims = (amps.size,) if dims is None else tuple(int(d) for d in dims)
        if any(d < 1 for d in dims):
            raise DimensionError(f"subsystem dimensions must be positive, got {dims}")
        if int(np.prod(dims)) != amps.size:
            raise DimensionError(
                f"{amps.size} amplitudes do not fit subsystem dims {dims} (product {int(np.prod(dims))})"
            )
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "amplitudes", _frozen(amps))

    @classmethod
    def _trusted(cls, amps: np.ndarray, dims: tuple[int, ...]) -> "Ket":
        # skips validation; callers guarantee a complex 1-D array matching dims
        obj = object.__new__(cls)
        amps.setflags(write=False)
        object.__setattr__(obj, "dims", dims)
        object.__setattr__(obj, "amplitudes", amps)
        return obj

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def norm_sq(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def is_normalized(self, atol: float = NORM_ATOL) -> bool:
        return abs(self.norm_sq() - 1.0) <= atol

    def normalize(self) -> "Ket":
        n = np.sqrt(self.norm_sq())
        if n == 0:
            raise ValueError("cannot normalize the zero vector")
        return Ket(self.amplitudes / n, self.dims)

    def inner(self, other: "Ket") -> complex:
        """Return <self|other>."""
        _check_same_dims(self.dims, other.dims)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def to_dm(self) -> "DensityMatrix":
        v = self.amplitudes
        return DensityMatrix(np.outer(v, v.conj()), self.dims, check=False)

    def __add__(self, other: "Ket") -> "Ket":
        _check_same_dims(self.dims, other.dims)
        return Ket._trusted(self.amplitudes + other.amplitudes, self.dims)

    def __mul__(self, c) -> "Ket":
        return Ket._trusted(complex(c) * self.amplitudes, self.dims)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"Ket(dims={self.dims}, amplitudes={np.array2string(self.amplitudes, precision=4)})"


@dataclass(frozen=True, eq=False)
class Operator:
    """Linear map from a ``dim_in`` space to a ``dim_out`` space."""

    entries: np.ndarray

    def __init__(self, entries):
        m = np.atleast_2d(np.asarray(entries, dtype=complex))
        if m.ndim != 2:
            raise DimensionError(f"operator entries must be a matrix, got shape {m.shape}")
        object.__setattr__(self, "entries", _frozen(m))

    @property
    def dim_in(self) -> int:
        return self.entries.shape[1]

    @property
    def dim_out(self) -> int:
        return self.entries.shape[0]

    @property
    def dag(self) -> "Operator":
        return Operator(self.entries.conj().T)

    def is_unitary(self, atol: float = UNITARY_ATOL) -> bool:
        if self.dim_in != self.dim_out:
            return False
        u = self.entries
        return bool(np.max(np.abs(u.conj().T @ u - np.eye(self.dim_in))) <= atol)

    def __matmul__(self, other):
        if isinstance(other, Operator):
            if self.dim_in != other.dim_out:
                raise DimensionError(f"cannot compose {self.dim_in}-input with {other.dim_out}-output operator")
            return Operator(self.entries @ other.entries)
        if isinstance(other, Ket):
            if self.dim_in != other.dim:
                raise DimensionError(f"operator of input dim {self.dim_in} applied to ket of dim {other.dim}")
            dims = other.dims if self.dim_out == other.dim else (self.dim_out,)
            return Ket._trusted(self.entries @ other.amplitudes, dims)
        return NotImplemented

    def __repr__(self) -> str:
        return f"Operator({self.dim_out}x{self.dim_in})"


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Density operator over a tensor product of subsystems."""

    dims: tuple[int, ...]
    entries: np.ndarray

    def __init__(self, entries, dims: Sequence[int] | None = None, check: bool = True):
        m = np.asarray(entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"density matrix must be square, got shape {m.shape}")
        dims = (m.shape[0],) if dims is None else tuple(int(d) for d in dims)
        if int(np.prod(dims)) != m.shape[0]:
            raise DimensionError(f"matrix of size {m.shape[0]} does not fit subsystem dims {dims}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "entries", _frozen(m))
        if check:
            self.validate()

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def validate(self, atol: float = NORM_ATOL, eig_tol: float = ATOL) -> None:
        m = self.entries
        herm = np.max(np.abs(m - m.conj().T))
        if herm > atol:
            raise ValueError(f"density matrix not Hermitian (max deviation {herm:.3e})")
        tr = np.trace(m).real
        if abs(tr - 1.0) > atol:
            raise ValueError(f"density matrix trace {tr!r} differs from 1")
        lo = np.linalg.eigvalsh(m).min()
        if lo < -eig_tol:
            raise ValueError(f"density matrix has negative eigenvalue {lo:.3e}")

    def trace(self) -> float:
        return float(np.trace(self.entries).real)

    def purity(self) -> float:
        return float(np.real(np.trace(self.entries @ self.entries)))

    def eigh(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenvalues (ascending) and eigenvectors of the Hermitian part."""
        m = self.entries
        return np.linalg.eigh(0.5 * (m + m.conj().T))

    def __repr__(self) -> str:
        return f"DensityMatrix(dims={self.dims})"


State = Union[Ket, DensityMatrix]


def _check_same_dims(a: Sequence[int], b: Sequence[int]) -> None:
    if tuple(a) != tuple(b):
        raise DimensionError(f"subsystem dims differ: {tuple(a)} vs {tuple(b)}")


# --- constructors -----------------------------------------------------------

def basis(d: int, i: int) -> Ket:
    if not 0 <= i < d:
        raise IndexError(f"basis index {i} out of range for dimension {d}")
    v = np.zeros(d, dtype=complex)
    v[i] = 1.0
    return Ket(v)


def plus() -> Ket:
    return Ket(np.array([1.0, 1.0]) / np.sqrt(2))


def minus() -> Ket:
    return Ket(np.array([1.0, -1.0]) / np.sqrt(2))


def identity(d: int) -> Operator:
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    return Operator(np.eye(d))


def hadamard() -> Operator:
    return Operator(np.array([[1, 1], [1, -1]]) / np.sqrt(2))


def pauli_x() -> Operator:
    return Operator([[0, 1], [1, 0]])


def pauli_y() -> Operator:
    return Operator([[0, -1j], [1j, 0]])


def pauli_z() -> Operator:
    return Operator([[1, 0], [0, -1]])


def haar_random_unitary(d: int, seed: int) -> Operator:
    """Haar-distributed unitary, deterministic in ``seed``.

    QR of a complex Ginibre matrix, with R's diagonal phases moved into Q
    so the distribution is exactly Haar.
    """
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    rng = np.random.default_rng(np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r)
    q = q * (diag / np.abs(diag))
    return Operator(q)


# --- operations ---------------------------------------------------------------

def tensor(*kets: Ket) -> Ket:
    """Kronecker product of kets; subsystem dims are concatenated."""
    if not kets:
        raise ValueError("tensor() needs at least one ket")
    amps = kets[0].amplitudes
    dims = tuple(kets[0].dims)
    for k in kets[1:]:
        amps = np.kron(amps, k.amplitudes)
        dims += tuple(k.dims)
    return Ket(amps, dims)


def kron(*ops: Operator) -> Operator:
    m = ops[0].entries
    for op in ops[1:]:
        m = np.kron(m, op.entries)
    return Operator(m)


def apply_on(op: Operator, target: int, state: Ket) -> Ket:
    """Apply ``op`` to subsystem ``target`` of ``state``, identity elsewhere."""
    n = len(state.dims)
    if not 0 <= target < n:
        raise DimensionError(f"target subsystem {target} out of range for {n} subsystems")
    d = state.dims[target]
    if op.dim_in != d or op.dim_out != d:
        raise DimensionError(
            f"operator is {op.dim_out}x{op.dim_in} but subsystem {target} has dimension {d}"
        )
    psi = state.amplitudes.reshape(state.dims)
    psi = np.tensordot(op.entries, psi, axes=([1], [target]))
    psi = np.moveaxis(psi, 0, target)
    return Ket(psi.reshape(-1), state.dims)


def partial_trace(rho: State, keep: Iterable[int]) -> DensityMatrix:
    """Reduced state on the subsystems listed in ``keep`` (kept in original order)."""
    if isinstance(rho, Ket):
        rho = rho.to_dm()
    n = len(rho.dims)
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise ValueError("keep set must be nonempty")
    if keep[0] < 0 or keep[-1] >= n:
        raise ValueError(f"keep set {keep} out of range for {n} subsystems")
    dims = rho.dims
    t = rho.entries.reshape(dims + dims)
    traced = [i for i in range(n) if i not in keep]
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = [letters[i] for i in range(n)]
    col = [letters[i].upper() for i in range(n)]
    for i in traced:
        col[i] = row[i]
    out = "".join(row[i] for i in keep) + "".join(col[i] for i in keep)
    reduced = np.einsum("".join(row) + "".join(col) + "->" + out, t)
    kd = tuple(dims[i] for i in keep)
    dk = int(np.prod(kd))
    return DensityMatrix(reduced.reshape(dk, dk), kd, check=False)


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def fidelity(a: State, b: State) -> float:
    """Fidelity between two states.

    Pure/pure gives |<a|b>|^2, pure/mixed gives <a|rho|a>, and mixed/mixed
    the Uhlmann fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.
    """
    _check_same_dims(a.dims, b.dims)
    if isinstance(a, Ket) and isinstance(b, Ket):
        f = abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2
    elif isinstance(a, Ket) or isinstance(b, Ket):
        ket, dm = (a, b) if isinstance(a, Ket) else (b, a)
        v = ket.amplitudes
        f = np.vdot(v, dm.entries @ v).real
    else:
        # nuclear norm of sqrt(a) sqrt(b); singular values make it symmetric
        sv = np.linalg.svd(_psd_sqrt(a.entries) @ _psd_sqrt(b.entries), compute_uv=False)
        f = np.sum(sv) ** 2
    return float(min(max(f, 0.0), 1.0))


def trace_distance(a: State, b: State) -> float:
    """Half the trace norm of the difference."""
    _check_same_dims(a.dims, b.dims)
    ma = a.to_dm().entries if isinstance(a, Ket) else a.entries
    mb = b.to_dm().entries if isinstance(b, Ket) else b.entries
    diff = ma - mb
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T)))))


def equal_up_to_phase(a: Ket, b: Ket, atol: float = ATOL) -> bool:
    _check_same_dims(a.dims, b.dims)
    ov = np.vdot(a.amplitudes, b.amplitudes)
    phase = ov / abs(ov) if abs(ov) > 0 else 1.0
    return bool(np.max(np.abs(a.amplitudes * phase - b.amplitudes), initial=0.0) <= atol)
