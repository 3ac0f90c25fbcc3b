"""Dense linear algebra for bipartite quantum objects.

Every bipartite operator in this package is ordered as (system, ancilla):
the first tensor factor is the output of a channel, the second the static
reference system. Array-level kernels (``ptrace``, ``ptranspose``) work on
plain ``numpy`` arrays; the typed operations wrap them around
:class:`HermitianOperator`.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.stats import unitary_group

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-10
TRACE_TOL = 1e-10

Split = Tuple[int, int]


class ValidationError(ValueError):
    """An operator or channel violates one of its declared invariants."""


def hermitian_defect(x: np.ndarray) -> float:
    x = np.asarray(x)
    if x.size == 0:
        return 0.0
    return float(np.max(np.abs(x - x.conj().T)))


def hermitize(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    return (x + x.conj().T) / 2


def eigh_desc(x: np.ndarray):
    """Hermitian eigendecomposition with eigenvalues in descending order."""
    w, v = np.linalg.eigh(hermitize(x))
    return w[::-1], v[:, ::-1]


def min_eig(x: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(hermitize(x))[0])


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """A dense Hermitian matrix with an optional bipartite split ``(d_A, d_B)``."""

    data: np.ndarray
    split: Optional[Split] = None

    def __post_init__(self):
        a = np.array(self.data, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValidationError(f"expected a square matrix, got shape {a.shape}")
        defect = hermitian_defect(a)
        if defect > HERMITIAN_TOL * max(1.0, float(np.max(np.abs(a)))):
            raise ValidationError(f"matrix is not Hermitian (max |X - X^dag| = {defect:.3e})")
        if self.split is not None:
            split = (int(self.split[0]), int(self.split[1]))
            if split[0] < 1 or split[1] < 1 or split[0] * split[1] != a.shape[0]:
                raise ValidationError(f"split {split} does not factor dimension {a.shape[0]}")
            object.__setattr__(self, "split", split)
        a.setflags(write=False)
        object.__setattr__(self, "data", a)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.data
        return self.data.astype(dtype)

    def with_split(self, split: Split) -> "HermitianOperator":
        return type(self)(self.data, split)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "split": list(self.split) if self.split else None,
            "re": self.data.real.tolist(),
            "im": self.data.imag.tolist(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "HermitianOperator":
        return cls(matrix_from_dict(obj), _split_from_obj(obj))


class DensityOperator(HermitianOperator):
    """Positive semidefinite, unit-trace Hermitian operator."""

    def __post_init__(self):
        super().__post_init__()
        lo = min_eig(self.data)
        if lo < -PSD_TOL:
            raise ValidationError(f"state is not positive semidefinite (min eigenvalue {lo:.3e})")
        tr = np.trace(self.data).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValidationError(f"state trace is {tr!r}, expected 1")


def _split_from_obj(obj: dict) -> Optional[Split]:
    s = obj.get("split")
    return None if s is None else (int(s[0]), int(s[1]))


def matrix_to_dict(m: np.ndarray, split: Optional[Split] = None) -> dict:
    """Serialize any square complex matrix in the package's JSON matrix form."""
    m = np.asarray(m, dtype=complex)
    return {
        "dim": m.shape[0],
        "split": list(split) if split else None,
        "re": m.real.tolist(),
        "im": m.imag.tolist(),
    }


def matrix_from_dict(obj: dict) -> np.ndarray:
    try:
        n = int(obj["dim"])
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj.get("im", np.zeros_like(re)), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed matrix object: {exc}") from exc
    if re.shape != (n, n) or im.shape != (n, n):
        raise ValidationError(f"matrix entries must be {n}x{n}, got {re.shape} and {im.shape}")
    return re + 1j * im


def load_operator(path, density: bool = False) -> HermitianOperator:
    with open(path) as fh:
        obj = json.load(fh)
    cls = DensityOperator if density else HermitianOperator
    return cls(matrix_from_dict(obj), _split_from_obj(obj))


# ---------------------------------------------------------------------------
# array-level kernels
# ---------------------------------------------------------------------------

def ptrace(x: np.ndarray, dims: Split, keep: int) -> np.ndarray:
    """Partial trace of a bipartite array, keeping subsystem ``keep`` (0 or 1)."""
    da, db = dims
    t = np.asarray(x).reshape(da, db, da, db)
    if keep == 0:
        return np.einsum("ijkj->ik", t)
    if keep == 1:
        return np.einsum("ijil->jl", t)
    raise ValueError(f"subsystem index must be 0 or 1, got {keep}")


def ptranspose(x: np.ndarray, dims: Split, sys: int = 1) -> np.ndarray:
    """Partial transpose on subsystem ``sys`` (0 or 1)."""
    da, db = dims
    t = np.asarray(x).reshape(da, db, da, db)
    if sys == 0:
        t = t.transpose(2, 1, 0, 3)
    elif sys == 1:
        t = t.transpose(0, 3, 2, 1)
    else:
        raise ValueError(f"subsystem index must be 0 or 1, got {sys}")
    return t.reshape(da * db, da * db)


def _resolve_split(x, split: Optional[Split]) -> Split:
    s = split if split is not None else getattr(x, "split", None)
    if s is None:
        raise ValidationError("operation needs a bipartite split but none was declared")
    return s


# ---------------------------------------------------------------------------
# typed operations
# ---------------------------------------------------------------------------

def tensor(a: HermitianOperator, b: HermitianOperator) -> HermitianOperator:
    a_, b_ = np.asarray(a), np.asarray(b)
    return HermitianOperator(np.kron(a_, b_), (a_.shape[0], b_.shape[0]))


def partial_trace(x: HermitianOperator, keep: int, split: Optional[Split] = None) -> HermitianOperator:
    dims = _resolve_split(x, split)
    return HermitianOperator(hermitize(ptrace(np.asarray(x), dims, keep)))


def partial_transpose(x: HermitianOperator, on: int = 1, split: Optional[Split] = None) -> HermitianOperator:
    dims = _resolve_split(x, split)
    return HermitianOperator(ptranspose(np.asarray(x), dims, on), dims)


def trace_norm(x) -> float:
    """Sum of singular values; for Hermitian input, the sum of absolute eigenvalues."""
    a = np.asarray(x)
    if hermitian_defect(a) <= 1e-12 * max(1.0, float(np.max(np.abs(a))) if a.size else 1.0):
        return float(np.sum(np.abs(np.linalg.eigvalsh(hermitize(a)))))
    return float(np.sum(np.linalg.svd(a, compute_uv=False)))


def max_entangled_vector(d: int) -> np.ndarray:
    if d < 2:
        raise ValidationError(f"maximally entangled state needs d >= 2, got {d}")
    return np.eye(d, dtype=complex).reshape(d * d) / np.sqrt(d)


def max_entangled(d: int) -> DensityOperator:
    """|phi+><phi+| on d x d with |phi+> = sum_j |j>|j> / sqrt(d)."""
    v = max_entangled_vector(d)
    return DensityOperator(np.outer(v, v.conj()), (d, d))


def is_ppt(rho, split: Optional[Split] = None, tol: float = 1e-8) -> bool:
    dims = _resolve_split(rho, split)
    return min_eig(ptranspose(np.asarray(rho), dims, 1)) >= -tol


# ---------------------------------------------------------------------------
# random fixtures
# ---------------------------------------------------------------------------

def random_hermitian(n: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (g + g.conj().T) / 2


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    return unitary_group.rvs(n, random_state=rng)


def random_density(n: int, rng: np.random.Generator, rank: Optional[int] = None) -> np.ndarray:
    """Random density matrix from a Ginibre ensemble of the given rank."""
    k = n if rank is None else rank
    g = rng.normal(size=(n, k)) + 1j * rng.normal(size=(n, k))
    rho = g @ g.conj().T
    return hermitize(rho / np.trace(rho).real)
