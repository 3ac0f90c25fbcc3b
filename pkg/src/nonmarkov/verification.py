"""Built-in identity and bound audits, runnable without any input files."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List

import numpy as np

from .bec import dephasing_choi
from .channel import (
    ChannelTrajectory,
    QuantumChannel,
    dephasing_semigroup,
    depolarizing_channel,
    identity_channel,
    random_channel,
    unitary_trajectory,
)
from .measure import continuity_check, diamond_distance, nm_total
from .qcore import max_entangled, random_density, random_hermitian
from .robustness import rg_dual_witness, rg_primal
from .witness import expectation_via_map, interval_witness, witness_to_map


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "value": float(self.value),
                "tolerance": float(self.tolerance), "detail": self.detail}


def synthetic_revival_trajectory(n: int = 12) -> ChannelTrajectory:
    # non-monotone integrated rates give entanglement revivals without any quadrature
    ts = np.linspace(0, 6, n)
    g1 = 0.08 * ts + 0.12 * np.sin(1.5 * ts) ** 2
    g2 = 0.3 * g1 * np.cos(ts)
    return ChannelTrajectory(ts, [QuantumChannel.from_choi(dephasing_choi(a, b)) for a, b in zip(g1, g2)])


def check_ground_truth() -> CheckResult:
    err = 0.0
    for d, expected in ((2, 1.0), (4, 3.0)):
        rho = max_entangled(d)
        for fn in (rg_primal, rg_dual_witness):
            err = max(err, abs(fn(rho).value - expected))
    return CheckResult("robustness_ground_truth", err <= 1e-6, err, 1e-6)


def check_duality(n: int, seed: int = 11) -> CheckResult:
    rng = np.random.default_rng(seed)
    err = 0.0
    for _ in range(n):
        rho = random_density(4, rng)
        err = max(err, abs(rg_primal(rho, (2, 2)).value - rg_dual_witness(rho, (2, 2)).value))
    return CheckResult("strong_duality", err <= 1e-6, err, 1e-6, f"{n} random two-qubit states")


def check_witness_identity(n_pairs: int) -> CheckResult:
    traj = synthetic_revival_trajectory()
    res = [rg_dual_witness(c.choi, (4, 4)) for c in traj.channels]
    rng = np.random.default_rng(5)
    err = 0.0
    for _ in range(n_pairs):
        i, j = sorted(rng.choice(len(traj), size=2, replace=False))
        iw = interval_witness(traj, traj.times[i], traj.times[j], res[i].witness.w, res[j].witness.w)
        err = max(err, abs((res[j].value - res[i].value) + iw.raw_expectation))
    return CheckResult("interval_witness_identity", err <= 1e-6, err, 1e-6, f"{n_pairs} sample pairs")


def check_map_identity(n: int, seed: int = 3) -> CheckResult:
    rng = np.random.default_rng(seed)
    err = 0.0
    for _ in range(n):
        w = random_hermitian(16, rng)
        rho = random_density(16, rng)
        err = max(err, abs(expectation_via_map(witness_to_map(w), rho) - np.trace(w @ rho).real))
    return CheckResult("positive_map_identity", err <= 1e-9, err, 1e-9, f"{n} random pairs")


def check_zero_cases(n_samples: int) -> CheckResult:
    rng = np.random.default_rng(2)
    ts = np.linspace(0, 4, n_samples)
    a = nm_total(unitary_trajectory(random_hermitian(2, rng), ts)).total
    b = nm_total(dephasing_semigroup(0.4, ts)).total
    return CheckResult("zero_cases", max(a, b) <= 1e-8, max(a, b), 1e-8, "unitary and semigroup")


def check_diamond() -> CheckResult:
    val = diamond_distance(identity_channel(2), depolarizing_channel(2))
    return CheckResult("diamond_identity_vs_depolarizing", abs(val - 1.5) <= 1e-6, abs(val - 1.5), 1e-6)


def check_continuity(n_trials: int, factor: str = "d2", seed: int = 7) -> CheckResult:
    rng = np.random.default_rng(seed)
    violations = 0
    worst = -np.inf
    for _ in range(n_trials):
        ta = ChannelTrajectory([1.0, 2.0], [random_channel(2, rng), random_channel(2, rng)])
        tb = ChannelTrajectory([1.0, 2.0], [random_channel(2, rng), random_channel(2, rng)])
        chk = continuity_check(ta, tb, 1.0, 2.0, factor=factor)
        violations += not chk.satisfied
        worst = max(worst, chk.lhs - chk.rhs)
    return CheckResult(f"continuity_bound_{factor}", violations == 0, float(violations), 0.0,
                       f"{n_trials} random pairs, worst lhs - rhs = {worst:.3e}")


def run_checks(quick: bool = False, factor: str = "d2") -> List[CheckResult]:
    plan: List[Callable[[], CheckResult]] = [
        check_ground_truth,
        lambda: check_duality(5 if quick else 50),
        lambda: check_witness_identity(3 if quick else 10),
        lambda: check_map_identity(10 if quick else 50),
        lambda: check_zero_cases(10 if quick else 50),
        check_diamond,
        lambda: check_continuity(5 if quick else 100, factor),
    ]
    return [fn() for fn in plan]
