"""Interval non-Markovianity witnesses and their positive-map form.

For optimal robustness witnesses ``W_1, W_2`` of the evolved maximally
entangled states at ``t1 <= t2``, the interval witness is

    W(t2, t1) = (Phi_t2^dag (x) id)(W_2) - (Phi_t1^dag (x) id)(W_1)

and ``-<phi+|W(t2, t1)|phi+> = R_G(t2) - R_G(t1)``. The witnessed
non-Markovianity of the interval is the positive part of that number.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channel import ChannelTrajectory, adjoint_apply, extend_to_ancilla
from .qcore import ValidationError, hermitian_defect, hermitize, matrix_to_dict, max_entangled_vector
from .robustness import RobustnessResult, WitnessOperator, rg_dual_witness

log = logging.getLogger(__name__)

TP_DIAGNOSTIC_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class IntervalWitness:
    t1: float
    t2: float
    operator: np.ndarray

    def __post_init__(self):
        if self.t1 > self.t2:
            raise ValidationError(f"interval needs t1 <= t2, got ({self.t1}, {self.t2})")
        op = np.asarray(self.operator, dtype=complex)
        if hermitian_defect(op) > 1e-10:
            raise ValidationError("interval witness is not Hermitian")
        object.__setattr__(self, "operator", hermitize(op))

    @property
    def system_dim(self) -> int:
        return int(round(np.sqrt(self.operator.shape[0])))

    @property
    def raw_expectation(self) -> float:
        """``<phi+|W(t2, t1)|phi+>``."""
        v = max_entangled_vector(self.system_dim)
        return float(np.real(v.conj() @ self.operator @ v))

    def to_dict(self, include_operator: bool = False) -> dict:
        out = {
            "t1": float(self.t1),
            "t2": float(self.t2),
            "value": witnessed_nm(self),
            "raw_expectation": self.raw_expectation,
        }
        if include_operator:
            d = self.system_dim
            out["witness"] = matrix_to_dict(self.operator, (d, d))
        return out


def heisenberg_witness(channel, w) -> np.ndarray:
    """``(Phi^dag (x) id)(W)`` computed with the Kraus form of the extended channel."""
    return adjoint_apply(extend_to_ancilla(channel), np.asarray(w))


def interval_witness(traj: ChannelTrajectory, t1: float, t2: float, w1, w2) -> IntervalWitness:
    c1, c2 = traj.at(t1), traj.at(t2)
    op = heisenberg_witness(c2, w2) - heisenberg_witness(c1, w1)
    return IntervalWitness(float(t1), float(t2), op)


def witnessed_nm(iw: IntervalWitness) -> float:
    return max(0.0, -iw.raw_expectation)


def optimal_witness(traj: ChannelTrajectory, t: float, tol: float = 1e-8) -> RobustnessResult:
    c = traj.at(t)
    return rg_dual_witness(c.choi, (c.dim, c.dim), tol)


def witnessed_nm_between(traj: ChannelTrajectory, t1: float, t2: float, tol: float = 1e-8) -> float:
    """Solve the two robustness programs and evaluate the interval quantifier."""
    r1, r2 = optimal_witness(traj, t1, tol), optimal_witness(traj, t2, tol)
    return witnessed_nm(interval_witness(traj, t1, t2, r1.witness.w, r2.witness.w))


@dataclass(frozen=True, eq=False)
class PositiveMapForm:
    """The map ``Lambda`` with ``(id (x) Lambda)(phi+) = W``.

    ``blocks[i, j]`` holds ``Lambda(|i><j|)``.
    """

    blocks: np.ndarray
    source: Optional[WitnessOperator] = None

    @property
    def dim(self) -> int:
        return self.blocks.shape[0]

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=complex)
        return np.einsum("ij,ijab->ab", x, self.blocks)

    def adjoint(self, y) -> np.ndarray:
        """Hilbert-Schmidt adjoint: ``Tr(A^dag Lambda(X)) = Tr(Lambda^dag(A)^dag X)``."""
        y = np.asarray(y, dtype=complex)
        return np.einsum("ijab,ab->ij", self.blocks.conj(), y)

    def reconstruct(self) -> np.ndarray:
        d = self.dim
        w = self.blocks.transpose(0, 2, 1, 3).reshape(d * d, d * d) / d
        return w

    def trace_preservation_defect(self) -> float:
        traces = np.einsum("ijaa->ij", self.blocks)
        return float(np.max(np.abs(traces - np.eye(self.dim))))


def witness_to_map(w) -> PositiveMapForm:
    """Block extraction ``Lambda(|i><j|) = d (<i| (x) 1) W (|j> (x) 1)``."""
    src = w if isinstance(w, WitnessOperator) else None
    a = np.asarray(w, dtype=complex)
    d = int(round(np.sqrt(a.shape[0])))
    if d * d != a.shape[0]:
        raise ValidationError(f"witness dimension {a.shape[0]} is not d^2")
    blocks = d * a.reshape(d, d, d, d).transpose(0, 2, 1, 3)
    mf = PositiveMapForm(blocks, src)
    defect = mf.trace_preservation_defect()
    if defect > TP_DIAGNOSTIC_TOL:
        log.info("witness map is not trace preserving (defect %.3e)", defect)
    return mf


def _local_adjoint(mf: PositiveMapForm, rho: np.ndarray) -> np.ndarray:
    """``(id (x) Lambda^dag)(rho)`` on (system, ancilla)."""
    d = mf.dim
    r = rho.reshape(d, d, d, d)
    out = np.einsum("klab,iajb->ikjl", mf.blocks.conj(), r)
    return out.reshape(d * d, d * d)


def expectation_via_map(mf: PositiveMapForm, rho) -> float:
    """``<phi+| (id (x) Lambda^dag)(rho) |phi+>``, equal to ``Tr(W rho)``.

    The map acting on the state is the Hilbert-Schmidt adjoint of the one
    that reconstructs ``W`` from ``phi+``; only this pairing moves ``W``
    onto the state through the trace.
    """
    r = np.asarray(rho, dtype=complex)
    if r.shape != (mf.dim ** 2,) * 2:
        raise ValidationError(f"state of shape {r.shape} does not match map dimension {mf.dim}")
    v = max_entangled_vector(mf.dim)
    return float(np.real(v.conj() @ _local_adjoint(mf, r) @ v))


def state_form_interval(mf2: PositiveMapForm, rho2, mf1: PositiveMapForm, rho1) -> float:
    """``<phi+|W(t2, t1)|phi+>`` evaluated from the two states alone."""
    return expectation_via_map(mf2, rho2) - expectation_via_map(mf1, rho1)
