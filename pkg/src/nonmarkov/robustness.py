"""Generalized robustness of entanglement under the PPT relaxation.

The separable set is replaced by the states with positive partial transpose.
Two semidefinite programs are solved independently:

primal (mixing form)
    ``min Tr S``  s.t.  ``S >= 0``,  ``(rho + S)^{T_B} >= 0``

dual (witness form)
    ``max -Tr(W rho)``  s.t.  ``W = P + Q^{T_B}``,  ``P, Q >= 0``,  ``W <= I``

Both return the value, a decomposable witness and a mixing matrix ``S``
(the mixing operator ``s * sigma``), read off from the solver's dual
multipliers when the program does not carry them as variables.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from . import conic
from .qcore import (
    HermitianOperator,
    Split,
    ValidationError,
    hermitize,
    matrix_to_dict,
    min_eig,
    ptranspose,
)

RELAXATION_LABEL = "PPT relaxation (decomposable witnesses)"
WITNESS_TOL = 1e-8


class SolverError(RuntimeError):
    def __init__(self, message: str, solution: Optional[conic.SDPSolution] = None):
        super().__init__(message)
        self.solution = solution


@dataclass(frozen=True, eq=False)
class WitnessOperator:
    """Decomposable witness ``W = P + Q^{T_B}`` with ``P, Q >= 0`` and ``W <= I``."""

    w: np.ndarray
    p: np.ndarray
    q: np.ndarray
    split: Split

    def __post_init__(self):
        w = hermitize(self.w)
        top = float(np.linalg.eigvalsh(w)[-1])
        if top > 1 + WITNESS_TOL:
            raise ValidationError(f"witness exceeds the identity (max eigenvalue {top:.12g})")
        object.__setattr__(self, "w", w)

    def __array__(self, dtype=None, copy=None):
        return self.w if dtype is None else self.w.astype(dtype)

    @property
    def certificate_defect(self) -> float:
        return float(np.max(np.abs(self.w - self.p - ptranspose(self.q, self.split, 1))))

    def expectation(self, rho) -> float:
        return float(np.real(np.trace(self.w @ np.asarray(rho))))

    def to_dict(self) -> dict:
        return {
            "w": matrix_to_dict(self.w, self.split),
            "p": matrix_to_dict(self.p, self.split),
            "q": matrix_to_dict(self.q, self.split),
        }


@dataclass(frozen=True, eq=False)
class RobustnessResult:
    value: float
    raw: float
    witness: WitnessOperator
    mixing: np.ndarray
    gap: float
    primal_value: float
    dual_value: float
    method: str
    relaxation: str = RELAXATION_LABEL

    def to_dict(self, include_matrices: bool = True) -> dict:
        out = {
            "value": self.value,
            "raw": self.raw,
            "gap": self.gap,
            "primal_value": self.primal_value,
            "dual_value": self.dual_value,
            "method": self.method,
            "relaxation": self.relaxation,
        }
        if include_matrices:
            out["witness"] = self.witness.to_dict()
            out["mixing"] = matrix_to_dict(self.mixing, self.witness.split)
        return out


def _prepare(rho, split):
    s = split if split is not None else getattr(rho, "split", None)
    if s is None:
        raise ValidationError("robustness needs a bipartite split")
    r = np.asarray(rho, dtype=complex)
    if r.shape != (s[0] * s[1],) * 2:
        raise ValidationError(f"state of shape {r.shape} does not match split {s}")
    real = bool(np.max(np.abs(r.imag), initial=0.0) == 0.0)
    return hermitize(r), (int(s[0]), int(s[1])), real


def _psd_part(x):
    w, v = np.linalg.eigh(hermitize(x))
    return (v * np.clip(w, 0, None)) @ v.conj().T


def rg_primal(rho, split: Optional[Split] = None, tol: float = conic.DEFAULT_TOL) -> RobustnessResult:
    """Mixing-form robustness ``min Tr S`` over ``S >= 0`` with ``rho + S`` PPT."""
    r, dims, real = _prepare(rho, split)
    n = r.shape[0]
    pt = lambda x: ptranspose(x, dims, 1)
    prob = conic.SDProblem()
    prob.variable("S", n, real=real)
    prob.add_psd([("S", conic.identity_map)], label="S >= 0")
    prob.add_psd([("S", pt)], pt(r), label="(rho + S)^T_B >= 0")
    prob.set_objective("min", {"S": np.eye(n)})
    sol = conic.solve(prob, tol)
    if not sol.optimal:
        raise SolverError(f"primal robustness SDP ended with status {sol.status} ({sol.detail})", sol)

    mixing = hermitize(sol.values["S"])
    # Lagrange multiplier Z of the PPT constraint gives the witness W = Z^T_B with I - W = P >= 0.
    q = _psd_part(sol.duals[1])
    witness = WitnessOperator(pt(q), np.zeros((n, n), dtype=complex), q, dims)
    raw = sol.primal_value
    return RobustnessResult(max(0.0, raw), raw, witness, mixing, sol.gap,
                            sol.primal_value, sol.dual_value, "primal")


def rg_dual_witness(rho, split: Optional[Split] = None, tol: float = conic.DEFAULT_TOL) -> RobustnessResult:
    """Witness-form robustness ``max{0, -min Tr(W rho)}`` over decomposable ``W <= I``."""
    r, dims, real = _prepare(rho, split)
    n = r.shape[0]
    pt = lambda x: ptranspose(x, dims, 1)
    neg = lambda x: -x
    neg_pt = lambda x: -pt(x)
    prob = conic.SDProblem()
    prob.variable("P", n, real=real)
    prob.variable("Q", n, real=real)
    prob.add_psd([("P", conic.identity_map)], label="P >= 0")
    prob.add_psd([("Q", conic.identity_map)], label="Q >= 0")
    prob.add_psd([("P", neg), ("Q", neg_pt)], np.eye(n), label="I - W >= 0")
    prob.set_objective("max", {"P": -r, "Q": -pt(r)})
    sol = conic.solve(prob, tol)
    if not sol.optimal:
        raise SolverError(f"witness robustness SDP ended with status {sol.status} ({sol.detail})", sol)

    p, q = hermitize(sol.values["P"]), hermitize(sol.values["Q"])
    witness = WitnessOperator(p + pt(q), p, q, dims)
    mixing = _psd_part(sol.duals[2])
    raw = -witness.expectation(r)
    return RobustnessResult(max(0.0, raw), raw, witness, mixing, sol.gap,
                            sol.primal_value, sol.dual_value, "dual")


def generalized_robustness(rho, split: Optional[Split] = None, method: str = "dual",
                           tol: float = conic.DEFAULT_TOL) -> RobustnessResult:
    if method == "dual":
        return rg_dual_witness(rho, split, tol)
    if method == "primal":
        return rg_primal(rho, split, tol)
    raise ValueError(f"unknown robustness method {method!r}")


def pure_state_robustness(psi: np.ndarray, dims: Tuple[int, int]) -> float:
    """Closed form ``(sum_i lambda_i)^2 - 1`` over the Schmidt coefficients of ``psi``."""
    m = np.asarray(psi, dtype=complex).reshape(dims)
    lam = np.linalg.svd(m, compute_uv=False)
    lam = lam / np.linalg.norm(lam)
    return float(np.sum(lam) ** 2 - 1)


def negativity_bound(rho, split: Split) -> float:
    """``||rho^{T_B}||_1 - 1``, twice the negativity."""
    ev = np.linalg.eigvalsh(ptranspose(np.asarray(rho), split, 1))
    return float(np.sum(np.abs(ev)) - 1)


def check_result(res: RobustnessResult, rho, tol: float = 1e-6) -> dict:
    """Feasibility diagnostics for a result; all entries should be at most ``tol``."""
    r = np.asarray(rho)
    dims = res.witness.split
    return {
        "mixing_psd": max(0.0, -min_eig(res.mixing)),
        "mixed_ppt": max(0.0, -min_eig(ptranspose(r + res.mixing, dims, 1))),
        "witness_le_identity": max(0.0, float(np.linalg.eigvalsh(res.witness.w)[-1]) - 1),
        "value_vs_trace_mixing": abs(res.value - float(np.trace(res.mixing).real)) if res.value > tol else 0.0,
        "value_vs_witness": abs(res.value - max(0.0, -res.witness.expectation(r))),
    }


__all__ = [
    "RELAXATION_LABEL",
    "RobustnessResult",
    "SolverError",
    "WitnessOperator",
    "check_result",
    "generalized_robustness",
    "negativity_bound",
    "pure_state_robustness",
    "rg_dual_witness",
    "rg_primal",
    "HermitianOperator",
]
