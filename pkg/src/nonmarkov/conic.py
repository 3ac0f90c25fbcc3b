"""Small semidefinite-programming layer over Hermitian matrix variables.

Problems are written in terms of Hermitian (or real symmetric) matrix
variables, linear objectives ``sum_k Re Tr(C_k X_k)``, trace equalities and
linear matrix inequalities ``sum_k L_k(X_k) + C >= 0``. Each variable is
expanded in a real basis of the Hermitian space and every complex LMI is
mapped to a real one through :func:`real_embedding`, so the numerical work is
a real-symmetric conic program. The program is handed to the CVXOPT
primal-dual interior-point solver.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from cvxopt import matrix as cvx_matrix
from cvxopt import solvers as cvx_solvers

from .qcore import hermitize, min_eig

DEFAULT_TOL = 1e-8

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
NUMERICAL_FAILURE = "numerical-failure"

LinearMap = Callable[[np.ndarray], np.ndarray]


def identity_map(x: np.ndarray) -> np.ndarray:
    return x


def real_embedding(h) -> np.ndarray:
    """``[[Re H, -Im H], [Im H, Re H]]``; PSD exactly when ``H`` is."""
    h = np.asarray(h, dtype=complex)
    re, im = h.real, h.imag
    return np.block([[re, -im], [im, re]])


def complex_from_embedding(z: np.ndarray) -> np.ndarray:
    """Hermitian matrix ``M`` with ``Tr(Z E(X)) = Re Tr(M X)`` for every Hermitian ``X``."""
    n = z.shape[0] // 2
    a, b = z[:n, :n], z[:n, n:]
    c, d = z[n:, :n], z[n:, n:]
    return hermitize((a + d) + 1j * (c - b))


@dataclass(frozen=True)
class Variable:
    name: str
    dim: int
    real: bool = False

    @property
    def size(self) -> int:
        n = self.dim
        return n * (n + 1) // 2 if self.real else n * n

    def basis(self) -> List[np.ndarray]:
        n = self.dim
        out = []
        for i in range(n):
            e = np.zeros((n, n), dtype=complex)
            e[i, i] = 1.0
            out.append(e)
        for i in range(n):
            for j in range(i + 1, n):
                e = np.zeros((n, n), dtype=complex)
                e[i, j] = e[j, i] = 1.0
                out.append(e)
                if not self.real:
                    e = np.zeros((n, n), dtype=complex)
                    e[i, j], e[j, i] = 1j, -1j
                    out.append(e)
        return out

    def assemble(self, coeffs: np.ndarray) -> np.ndarray:
        n = self.dim
        x = np.zeros((n, n), dtype=complex)
        x[np.diag_indices(n)] = coeffs[:n]
        p = n
        for i in range(n):
            for j in range(i + 1, n):
                x[i, j] += coeffs[p]
                p += 1
                if not self.real:
                    x[i, j] += 1j * coeffs[p]
                    p += 1
        return x + np.triu(x, 1).conj().T


@dataclass(frozen=True)
class LMI:
    """``sum_k L_k(X_k) + constant`` is required to be PSD."""

    terms: Tuple[Tuple[str, LinearMap], ...]
    constant: np.ndarray
    label: str = ""


@dataclass(frozen=True)
class Equality:
    """``sum_k Re Tr(A_k X_k) == rhs``."""

    terms: Tuple[Tuple[str, np.ndarray], ...]
    rhs: float
    label: str = ""


@dataclass
class SDProblem:
    sense: str = "min"
    variables: List[Variable] = field(default_factory=list)
    objective: Dict[str, np.ndarray] = field(default_factory=dict)
    objective_constant: float = 0.0
    lmis: List[LMI] = field(default_factory=list)
    equalities: List[Equality] = field(default_factory=list)

    def variable(self, name: str, dim: int, real: bool = False) -> str:
        if any(v.name == name for v in self.variables):
            raise ValueError(f"duplicate variable {name!r}")
        self.variables.append(Variable(name, dim, real))
        return name

    def add_psd(self, terms: Sequence[Tuple[str, LinearMap]], constant=None, label: str = "") -> None:
        dims = {v.name: v.dim for v in self.variables}
        n = None
        if constant is not None:
            n = np.asarray(constant).shape[0]
        else:
            probe = terms[0]
            n = np.asarray(probe[1](np.zeros((dims[probe[0]],) * 2, dtype=complex))).shape[0]
        c = np.zeros((n, n), dtype=complex) if constant is None else np.asarray(constant, dtype=complex)
        self.lmis.append(LMI(tuple(terms), c, label))

    def add_equality(self, terms: Sequence[Tuple[str, np.ndarray]], rhs: float, label: str = "") -> None:
        self.equalities.append(Equality(tuple((k, np.asarray(a, dtype=complex)) for k, a in terms), float(rhs), label))

    def set_objective(self, sense: str, terms: Dict[str, np.ndarray], constant: float = 0.0) -> None:
        if sense not in ("min", "max"):
            raise ValueError(f"sense must be 'min' or 'max', got {sense!r}")
        self.sense = sense
        self.objective = {k: np.asarray(v, dtype=complex) for k, v in terms.items()}
        self.objective_constant = float(constant)


@dataclass(frozen=True)
class SDPSolution:
    status: str
    primal_value: float
    dual_value: float
    values: Dict[str, np.ndarray]
    duals: Tuple[np.ndarray, ...]
    eq_duals: Tuple[float, ...]
    primal_residual: float
    gap: float
    iterations: int = 0
    detail: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


class _Compiled:
    """Real conic data ``min c'x  s.t.  G_j x + s_j = h_j, s_j >= 0,  A x = b``."""

    def __init__(self, p: SDProblem):
        self.problem = p
        self.offsets = {}
        off = 0
        for v in p.variables:
            self.offsets[v.name] = off
            off += v.size
        self.n = off
        self.vars = {v.name: v for v in p.variables}
        self.bases = {v.name: v.basis() for v in p.variables}
        sign = 1.0 if p.sense == "min" else -1.0

        self.c = np.zeros(self.n)
        for name, cm in p.objective.items():
            o = self.offsets[name]
            for q, e in enumerate(self.bases[name]):
                self.c[o + q] = sign * np.real(np.trace(cm @ e))

        self.Gs, self.hs, self.embedded = [], [], []
        for lmi in p.lmis:
            cols = {}
            m = lmi.constant.shape[0]
            blocks = []
            for name, fn in lmi.terms:
                o = self.offsets[name]
                for q, e in enumerate(self.bases[name]):
                    img = np.asarray(fn(e), dtype=complex)
                    cols[o + q] = cols.get(o + q, 0) + img
                    blocks.append(img)
            is_real = np.all(np.abs(lmi.constant.imag) == 0) and all(np.all(np.abs(b.imag) == 0) for b in blocks)
            size = m if is_real else 2 * m
            g = np.zeros((size * size, self.n))
            for col, img in cols.items():
                r = img.real if is_real else real_embedding(img)
                g[:, col] = -r.reshape(-1, order="F")
            h = lmi.constant.real if is_real else real_embedding(lmi.constant)
            self.Gs.append(g)
            self.hs.append(np.ascontiguousarray(h))
            self.embedded.append(not is_real)

        rows, rhs = [], []
        for eq in p.equalities:
            row = np.zeros(self.n)
            for name, am in eq.terms:
                o = self.offsets[name]
                for q, e in enumerate(self.bases[name]):
                    row[o + q] += np.real(np.trace(am @ e))
            rows.append(row)
            rhs.append(eq.rhs)
        self.A = np.array(rows) if rows else None
        self.b = np.array(rhs) if rows else None

    def unpack(self, x: np.ndarray) -> Dict[str, np.ndarray]:
        out = {}
        for name, v in self.vars.items():
            o = self.offsets[name]
            out[name] = v.assemble(x[o:o + v.size])
        return out

    def lmi_value(self, j: int, values: Dict[str, np.ndarray]) -> np.ndarray:
        lmi = self.problem.lmis[j]
        acc = lmi.constant.copy()
        for name, fn in lmi.terms:
            acc = acc + np.asarray(fn(values[name]), dtype=complex)
        return acc

    def objective_value(self, values: Dict[str, np.ndarray]) -> float:
        val = sum(np.real(np.trace(cm @ values[k])) for k, cm in self.problem.objective.items())
        return float(val) + self.problem.objective_constant

    def to_json(self) -> str:
        return json.dumps({
            "sense": self.problem.sense,
            "variables": [{"name": v.name, "dim": v.dim, "real": v.real} for v in self.problem.variables],
            "c": self.c.tolist(),
            "lmis": [{"label": l.label, "embedded": e, "G": g.tolist(), "h": h.tolist()}
                     for l, e, g, h in zip(self.problem.lmis, self.embedded, self.Gs, self.hs)],
            "A": None if self.A is None else self.A.tolist(),
            "b": None if self.b is None else self.b.tolist(),
        })


def dump_problem(p: SDProblem) -> str:
    """JSON dump of the compiled real conic data, for offline inspection only."""
    return _Compiled(p).to_json()


# cvxopt stopping tolerances relative to ``tol``, tried in order until one run meets ``tol``.
# Very tight internal tolerances occasionally stall on degenerate duals.
SOLVER_SCALES = (1e-2, 1e-1, 1.0)


def solve(p: SDProblem, tol: float = DEFAULT_TOL, maxiters: int = 100) -> SDPSolution:
    """Solve ``p``; never raises on infeasibility or solver breakdown, see ``status``.

    Acceptance is always judged at ``tol``: gap at most ``tol * max(1, |primal|)``
    and LMI/equality residual at most ``tol``.
    """
    comp = _Compiled(p)
    sol = None
    for scale in SOLVER_SCALES:
        sol = _solve_once(comp, p, tol, scale, maxiters)
        if sol.status != NUMERICAL_FAILURE:
            break
    return sol


def _solve_once(comp: _Compiled, p: SDProblem, tol: float, scale: float, maxiters: int) -> SDPSolution:
    opts = {
        "show_progress": False,
        "abstol": tol * scale,
        "reltol": tol * scale,
        "feastol": tol * min(1.0, 10 * scale),
        "maxiters": maxiters,
    }
    kwargs = {}
    if comp.A is not None:
        kwargs["A"] = cvx_matrix(comp.A)
        kwargs["b"] = cvx_matrix(comp.b)
    try:
        res = cvx_solvers.sdp(
            cvx_matrix(comp.c),
            Gs=[cvx_matrix(g) for g in comp.Gs],
            hs=[cvx_matrix(h) for h in comp.hs],
            options=opts,
            **kwargs,
        )
    except (ValueError, ArithmeticError) as exc:
        return SDPSolution(NUMERICAL_FAILURE, np.nan, np.nan, {}, (), (), np.inf, np.inf, 0, str(exc))

    raw = res["status"]
    if raw in ("primal infeasible", "dual infeasible"):
        return SDPSolution(INFEASIBLE, np.nan, np.nan, {}, (), (), np.inf, np.inf,
                           res.get("iterations", 0), raw)
    if res["x"] is None:
        return SDPSolution(NUMERICAL_FAILURE, np.nan, np.nan, {}, (), (), np.inf, np.inf,
                           res.get("iterations", 0), raw)

    x = np.array(res["x"]).ravel()
    values = comp.unpack(x)
    duals = []
    for j, z in enumerate(res["zs"]):
        z = np.array(z)
        z = (z + z.T) / 2
        duals.append(complex_from_embedding(z) if comp.embedded[j] else z.astype(complex))
    y = tuple(np.array(res["y"]).ravel().tolist()) if comp.A is not None else ()

    sign = 1.0 if p.sense == "min" else -1.0
    primal = sign * float(res["primal objective"]) + p.objective_constant
    dual = sign * float(res["dual objective"]) + p.objective_constant

    resid = 0.0
    for j in range(len(p.lmis)):
        resid = max(resid, -min_eig(comp.lmi_value(j, values)))
    if comp.A is not None:
        resid = max(resid, float(np.max(np.abs(comp.A @ x - comp.b))))
    gap = abs(primal - dual)
    ok = gap <= tol * max(1.0, abs(primal)) and resid <= tol
    status = OPTIMAL if ok else NUMERICAL_FAILURE
    return SDPSolution(status, primal, dual, values, tuple(duals), y, resid, gap,
                       int(res.get("iterations", 0)), raw)
