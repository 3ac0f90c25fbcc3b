"""Total non-Markovianity of a sampled process, diamond distance, continuity audit."""
from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import conic
from .channel import ChannelTrajectory, QuantumChannel
from .qcore import ValidationError, trace_norm
from .robustness import RELAXATION_LABEL, RobustnessResult, SolverError, rg_dual_witness
from .witness import interval_witness, witnessed_nm

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 1e-6
FLOAT_FMT = "%.12e"


@dataclass
class NonMarkovReport:
    times: np.ndarray
    rg_values: np.ndarray
    increments: List[Tuple[float, float, float]]
    total: float
    threshold: float
    relaxation_label: str = RELAXATION_LABEL
    failed: List[int] = field(default_factory=list)
    witnesses: Optional[List[Optional[np.ndarray]]] = None

    @property
    def partial(self) -> bool:
        return bool(self.failed)

    @property
    def n_increments(self) -> int:
        return len(self.increments)

    def increment_flags(self) -> np.ndarray:
        """1 at sample ``i`` when the step ``(t_{i-1}, t_i)`` counts as backflow."""
        flags = np.zeros(len(self.times), dtype=int)
        ends = {t2 for _, t2, _ in self.increments}
        for i, t in enumerate(self.times):
            if float(t) in ends:
                flags[i] = 1
        return flags

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "rg_value", "increment_flag"])
        for t, r, f in zip(self.times, self.rg_values, self.increment_flags()):
            w.writerow([FLOAT_FMT % t, "nan" if np.isnan(r) else FLOAT_FMT % r, int(f)])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "total": self.total,
            "n_increments": self.n_increments,
            "increments": [{"t1": a, "t2": b, "delta": c} for a, b, c in self.increments],
            "relaxation_label": self.relaxation_label,
            "threshold": self.threshold,
            "partial": self.partial,
            "failed_samples": list(self.failed),
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def _robustness_of_choi(args):
    choi, d, tol = args
    try:
        res = rg_dual_witness(choi, (d, d), tol)
    except SolverError as exc:
        return None, str(exc)
    return res, ""


def robustness_series(choi_matrices: Sequence[np.ndarray], d: int, tol: float = conic.DEFAULT_TOL,
                      workers: Optional[int] = None) -> List[Optional[RobustnessResult]]:
    jobs = [(np.asarray(j), d, tol) for j in choi_matrices]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            out = list(ex.map(_robustness_of_choi, jobs))
    else:
        out = [_robustness_of_choi(j) for j in jobs]
    results = []
    for i, (res, msg) in enumerate(out):
        if res is None:
            log.warning("robustness solve failed at sample %d: %s", i, msg)
        results.append(res)
    return results


def fold_increments(times, rg_values, threshold: float = DEFAULT_THRESHOLD):
    """Consecutive-sample increments of ``R_G`` above ``threshold``."""
    incs = []
    for i in range(1, len(times)):
        a, b = rg_values[i - 1], rg_values[i]
        if np.isnan(a) or np.isnan(b):
            continue
        delta = float(b - a)
        if delta > threshold:
            incs.append((float(times[i - 1]), float(times[i]), delta))
    return incs


def assemble_report(times, results: Sequence[Optional[RobustnessResult]], threshold: float = DEFAULT_THRESHOLD,
                    keep_witnesses: bool = False) -> NonMarkovReport:
    """Fold per-sample robustness results (``None`` marks a failed sample) into a report."""
    rg = np.array([np.nan if r is None else r.value for r in results])
    failed = [i for i, r in enumerate(results) if r is None]
    incs = fold_increments(times, rg, threshold)
    total = float(sum(x[2] for x in incs))
    wits = [None if r is None else r.witness.w for r in results] if keep_witnesses else None
    return NonMarkovReport(np.array(times, dtype=float), rg, incs, total, threshold, failed=failed, witnesses=wits)


def nm_total(traj: ChannelTrajectory, threshold: float = DEFAULT_THRESHOLD, tol: float = conic.DEFAULT_TOL,
             workers: Optional[int] = None, keep_witnesses: bool = False) -> NonMarkovReport:
    """Sum of positive robustness increments of ``(Phi_t (x) id)(phi+)`` over the grid."""
    if threshold <= 0:
        raise ValueError("increment threshold must be positive")
    results = robustness_series([c.choi for c in traj.channels], traj.dim, tol, workers)
    return assemble_report(traj.times, results, threshold, keep_witnesses)


# ---------------------------------------------------------------------------
# diamond norm
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiamondResult:
    value: float
    gap: float
    status: str
    input_state: Optional[np.ndarray] = None


def _diamond_once(jdiff: np.ndarray, d: int, tol: float) -> conic.SDPSolution:
    real = bool(np.max(np.abs(jdiff.imag)) == 0.0)
    eye = np.eye(d)
    prob = conic.SDProblem()
    prob.variable("W", d * d, real=real)
    prob.variable("rho", d, real=real)
    prob.add_psd([("W", conic.identity_map)], label="W >= 0")
    prob.add_psd([("rho", lambda x: np.kron(eye, x)), ("W", lambda x: -x)], label="1 (x) rho - W >= 0")
    prob.add_equality([("rho", eye)], 1.0, label="Tr rho = 1")
    prob.set_objective("max", {"W": jdiff})
    return conic.solve(prob, tol)


def diamond_sdp(c1: QuantumChannel, c2: QuantumChannel, tol: float = conic.DEFAULT_TOL) -> DiamondResult:
    """Diamond distance of two channels by the semidefinite program

        max Re Tr(J W)  s.t.  0 <= W <= 1 (x) rho,  Tr rho = 1

    with ``J`` the unnormalized Choi matrix of ``c1 - c2``; the distance is
    twice the optimum. ``rho >= 0`` follows from the two LMIs and is left out;
    the redundant block made the interior-point iteration stall.
    """
    if c1.dim != c2.dim:
        raise ValidationError(f"channel dimensions differ: {c1.dim} vs {c2.dim}")
    d = c1.dim
    jdiff = d * (np.asarray(c1.choi) - np.asarray(c2.choi))
    if np.max(np.abs(jdiff), initial=0.0) == 0.0:
        return DiamondResult(0.0, 0.0, conic.OPTIMAL, np.eye(d) / d)
    sol = _diamond_once(jdiff, d, tol)
    if not sol.optimal:
        raise SolverError(f"diamond-norm SDP ended with status {sol.status} ({sol.detail})", sol)
    val = min(2.0, max(0.0, 2 * sol.primal_value))
    return DiamondResult(val, 2 * sol.gap, sol.status, sol.values["rho"])


def diamond_distance(c1: QuantumChannel, c2: QuantumChannel, tol: float = conic.DEFAULT_TOL) -> float:
    return diamond_sdp(c1, c2, tol).value


def choi_trace_distance(c1: QuantumChannel, c2: QuantumChannel) -> float:
    """``||J(c1) - J(c2)||_1``: the maximally entangled input, a lower bound on the diamond distance."""
    return trace_norm(np.asarray(c1.choi) - np.asarray(c2.choi))


# ---------------------------------------------------------------------------
# continuity audit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ContinuityCheck:
    lhs: float
    rhs: float
    satisfied: bool
    factor: float
    factor_label: str
    nm_a: float
    nm_b: float
    diamond_t1: float
    diamond_t2: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def interval_nm(traj: ChannelTrajectory, t1: float, t2: float, tol: float = conic.DEFAULT_TOL) -> float:
    c1, c2 = traj.at(t1), traj.at(t2)
    d = traj.dim
    w1 = rg_dual_witness(c1.choi, (d, d), tol).witness.w
    w2 = rg_dual_witness(c2.choi, (d, d), tol).witness.w
    return witnessed_nm(interval_witness(traj, t1, t2, w1, w2))


def continuity_check(traj_a: ChannelTrajectory, traj_b: ChannelTrajectory, t1: float, t2: float,
                     factor: str = "d2", tol: float = conic.DEFAULT_TOL) -> ContinuityCheck:
    """Compare ``|N_A(t1,t2) - N_B(t1,t2)|`` with ``k (||A_t1 - B_t1|| + ||A_t2 - B_t2||)``.

    ``factor="d2"`` uses ``k = dim(S) dim(A) = d^2``; ``factor="d"`` is the
    weaker constant ``k = d``, kept to exercise the audit's failure path.
    """
    if traj_a.dim != traj_b.dim:
        raise ValidationError("trajectories act on different dimensions")
    d = traj_a.dim
    if factor == "d2":
        k = float(d * d)
    elif factor == "d":
        k = float(d)
    else:
        raise ValueError(f"factor must be 'd2' or 'd', got {factor!r}")
    na, nb = interval_nm(traj_a, t1, t2, tol), interval_nm(traj_b, t1, t2, tol)
    dd1 = diamond_distance(traj_a.at(t1), traj_b.at(t1), tol)
    dd2 = diamond_distance(traj_a.at(t2), traj_b.at(t2), tol)
    lhs = abs(na - nb)
    rhs = k * (dd1 + dd2)
    return ContinuityCheck(lhs, rhs, lhs <= rhs + 1e-8, k, factor, na, nb, dd1, dd2)
