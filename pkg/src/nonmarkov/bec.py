"""Two impurity atoms dephasing in a Bose-Einstein condensate.

Each impurity is a two-level system (left/right well of a double well).
Both couple to the Bogoliubov modes of the condensate, giving the pure-
dephasing master equation

    d rho/dt = (g1 - g2)/2 D[s1 - s2](rho) + (g1 + g2)/2 D[s1 + s2](rho),
    D[A](rho) = A rho A - {A A, rho}/2,   s_n = sigma_z on atom n,

with time-dependent rates ``g1(t), g2(t)`` given by momentum integrals over
the condensate spectrum. The Lindblad operators are diagonal and commute at
all times, so the channel is exact: populations are fixed and the coherence
``rho_mn`` is multiplied by ``exp(-Theta_mn)``, ``Theta_mn`` a fixed
combination of the integrated rates ``G1 = int g1`` and ``G2 = int g2``.

Units. Momenta are measured in ``1/sigma`` and time in
``t0 = 2 m_E sigma^2 / hbar``, which is independent of ``a_E`` so one grid
serves a whole scattering-length sweep. Rates are returned per ``t0``.
"""
from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy import constants as const
from scipy import integrate

from .channel import ChannelTrajectory, QuantumChannel
from .measure import DEFAULT_THRESHOLD, FLOAT_FMT, NonMarkovReport, nm_total
from .qcore import ValidationError

log = logging.getLogger(__name__)

HBAR = const.hbar
BOHR_RADIUS = const.physical_constants["Bohr radius"][0]
ATOMIC_MASS = const.physical_constants["atomic mass constant"][0]
A_RB = 99 * BOHR_RADIUS
A_SE = 55 * BOHR_RADIUS
MASS_NA23 = 23 * ATOMIC_MASS
MASS_RB87 = 87 * ATOMIC_MASS

# momentum cutoff in units of 1/sigma; exp(-q^2/2) < 1e-31 beyond it
Q_MAX = 12.0
QUAD_EPSABS = 1e-12
QUAD_EPSREL = 1e-10

# sigma_z eigenvalues of atoms 1 and 2 on |00>, |01>, |10>, |11>
_Z1 = np.array([1.0, 1.0, -1.0, -1.0])
_Z2 = np.array([1.0, -1.0, 1.0, -1.0])


@dataclass(frozen=True)
class BECParams:
    """Physical parameters in SI units. ``sigma`` and ``D`` default to ``L/2`` and ``4L``."""

    a_E: float
    a_SE: float = A_SE
    wavelength: float = 600e-9
    n0: float = 1e20
    m_S: float = MASS_NA23
    m_E: float = MASS_RB87
    sigma: Optional[float] = None
    D: Optional[float] = None

    def __post_init__(self):
        if self.sigma is None:
            object.__setattr__(self, "sigma", self.L / 2)
        if self.D is None:
            object.__setattr__(self, "D", 4 * self.L)
        for name in ("a_E", "a_SE", "wavelength", "n0", "m_S", "m_E", "sigma", "D"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValidationError(f"{name} must be positive, got {v!r}")
        if self.D < 4 * self.L * (1 - 1e-12):
            raise ValidationError(f"impurity separation needs D >= 4L, got D = {self.D / self.L:.6g} L")

    @classmethod
    def preset(cls, a_E_over_aRb: float = 0.2, D_over_L: float = 4.0,
               sigma_over_L: float = 0.5, **overrides) -> "BECParams":
        """23Na impurities in an 87Rb condensate, lambda = 600 nm, n0 = 1e20 m^-3."""
        wl = overrides.pop("wavelength", 600e-9)
        L = wl / 4
        return cls(a_E=a_E_over_aRb * A_RB, wavelength=wl, sigma=sigma_over_L * L,
                   D=D_over_L * L, **overrides)

    @property
    def L(self) -> float:
        return self.wavelength / 4

    @property
    def m_SE(self) -> float:
        return self.m_S * self.m_E / (self.m_S + self.m_E)

    @property
    def g_E(self) -> float:
        return 4 * np.pi * HBAR ** 2 * self.a_E / self.m_E

    @property
    def g_SE(self) -> float:
        return 2 * np.pi * HBAR ** 2 * self.a_SE / self.m_SE

    @property
    def t0(self) -> float:
        """Time unit ``2 m_E sigma^2 / hbar`` in seconds."""
        return 2 * self.m_E * self.sigma ** 2 / HBAR

    @property
    def beta(self) -> float:
        """Mean-field energy ``g_E n0`` in units of ``hbar / t0``."""
        return self.g_E * self.n0 * self.t0 / HBAR

    @property
    def kappa(self) -> float:
        """Dimensionless prefactor of ``g1 * t0``."""
        return self.g_SE ** 2 * self.n0 * self.t0 ** 2 / (HBAR ** 2 * np.pi ** 2 * self.sigma ** 3)

    @property
    def ae_ratio(self) -> float:
        return self.a_E / A_RB

    @property
    def d_ratio(self) -> float:
        return self.D / self.L

    def with_ae(self, ratio: float) -> "BECParams":
        return replace(self, a_E=ratio * A_RB)

    def with_D(self, ratio: float) -> "BECParams":
        return replace(self, D=ratio * self.L)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "BECParams":
        obj = dict(obj)
        if "a_E_over_aRb" in obj or "D_over_L" in obj or "sigma_over_L" in obj:
            return cls.preset(obj.pop("a_E_over_aRb", 0.2), obj.pop("D_over_L", 4.0),
                              obj.pop("sigma_over_L", 0.5), **obj)
        try:
            return cls(**obj)
        except TypeError as exc:
            raise ValidationError(f"bad BEC parameter set: {exc}") from exc

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path) -> "BECParams":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _sinc(x):
    return np.sinc(x / np.pi)


def form_factors(p: BECParams, q):
    """Spatial factors of the two rate integrands at momenta ``q`` (units 1/sigma)."""
    q = np.asarray(q, dtype=float)
    s = p.sigma
    f1 = 1 - _sinc(2 * q * p.L / s)
    f2 = (_sinc(2 * q * (p.D + p.L) / s) + _sinc(2 * q * (p.D - p.L) / s)
          - 2 * _sinc(2 * q * p.D / s))
    return f1, f2


def dispersion(p: BECParams, q):
    """Bogoliubov energy ``E_k t0 / hbar`` at ``q = k sigma``."""
    q = np.asarray(q, dtype=float)
    return q * np.sqrt(q * q + 2 * p.beta)


def _weight(p: BECParams, q):
    # k^2 exp(-k^2 sigma^2 / 2) / (eps_k + 2 g_E n0), in reduced units
    q = np.asarray(q, dtype=float)
    return q * q * np.exp(-q * q / 2) / (q * q + 2 * p.beta)


def _integrand(p: BECParams, times: np.ndarray):
    times = np.asarray(times, dtype=float)

    def f(q):
        w = _weight(p, q)
        f1, f2 = form_factors(p, q)
        om = dispersion(p, q)
        phase = times * om
        rate = np.sin(phase) / 2
        # int_0^t sin(om s)/2 ds = sin^2(om t / 2) / om
        cum = np.sin(phase / 2) ** 2 / om if om > 0 else 0.0 * times
        k = p.kappa
        return np.concatenate([k * w * f1 * rate, 0.5 * k * w * f2 * rate,
                               k * w * f1 * cum, 0.5 * k * w * f2 * cum])

    return f


def _breakpoints(p: BECParams, tmax: float, qmax: float) -> List[float]:
    # panels of about one oscillation period of the fastest time
    om_max = float(dispersion(p, qmax))
    n = int(min(20000, max(8, np.ceil(tmax * om_max / (2 * np.pi)))))
    # uniform in the phase variable om(q)
    om = np.linspace(0, om_max, n + 1)[1:-1]
    q = np.sqrt(np.sqrt(p.beta ** 2 + om ** 2) - p.beta)
    return q.tolist()


def _rate_quadrature(p: BECParams, times, qmax: float = Q_MAX, epsabs: float = QUAD_EPSABS):
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < 0):
        raise ValueError("times must be nonnegative")
    f = _integrand(p, times)
    tmax = float(times.max(initial=0.0))
    pts = [0.0] + _breakpoints(p, tmax, qmax) + [qmax]
    total = np.zeros(4 * len(times))
    err = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        val, e = integrate.quad_vec(f, a, b, epsabs=epsabs / len(pts), epsrel=QUAD_EPSREL,
                                    norm="max", limit=200)
        total += val
        err += e
    if err > 10 * epsabs:
        raise ArithmeticError(f"rate quadrature did not converge (estimated error {err:.3e})")
    n = len(times)
    return total[:n], total[n:2 * n], total[2 * n:3 * n], total[3 * n:], err


def gamma_rates(p: BECParams, t, epsabs: float = QUAD_EPSABS):
    """``(g1(t), g2(t))`` in units of ``1/t0``; ``t`` scalar or array in units of ``t0``."""
    g1, g2, _, _, _ = _rate_quadrature(p, t, epsabs=epsabs)
    if np.ndim(t) == 0:
        return float(g1[0]), float(g2[0])
    return g1, g2


@dataclass(frozen=True, eq=False)
class RateTable:
    times: np.ndarray
    gamma1: np.ndarray
    gamma2: np.ndarray
    Gamma1: np.ndarray
    Gamma2: np.ndarray
    params: Optional[BECParams] = field(default=None, compare=False)

    def __post_init__(self):
        for name in ("times", "gamma1", "gamma2", "Gamma1", "Gamma2"):
            a = np.array(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def index(self, t: float) -> int:
        hits = np.flatnonzero(np.isclose(self.times, t, rtol=1e-12, atol=1e-12))
        if hits.size == 0:
            raise ValidationError(f"time {t!r} is not on the rate-table grid")
        return int(hits[0])

    def scaled(self, factor: float) -> "RateTable":
        """Both rates multiplied by ``factor``."""
        return RateTable(self.times, factor * self.gamma1, factor * self.gamma2,
                         factor * self.Gamma1, factor * self.Gamma2, self.params)

    def without_gamma2(self) -> "RateTable":
        z = np.zeros_like(self.gamma2)
        return RateTable(self.times, self.gamma1, z, self.Gamma1, z, self.params)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "gamma1", "gamma2", "Gamma1", "Gamma2"])
        for row in zip(self.times, self.gamma1, self.gamma2, self.Gamma1, self.Gamma2):
            w.writerow([FLOAT_FMT % v for v in row])
        return buf.getvalue()

    @classmethod
    def from_rate_function(cls, times, rates: Callable[[float], tuple]) -> "RateTable":
        """Tabulate arbitrary rates ``t -> (g1, g2)``, integrating them in time with adaptive quadrature."""
        ts = np.asarray(times, dtype=float)
        _check_grid(ts)
        g = np.array([rates(t) for t in ts], dtype=float)
        cum = np.zeros((len(ts), 2))
        for i in range(1, len(ts)):
            for j in range(2):
                val, _ = integrate.quad(lambda s: rates(s)[j], ts[i - 1], ts[i],
                                        epsabs=1e-13, epsrel=1e-12, limit=200)
                cum[i, j] = cum[i - 1, j] + val
        return cls(ts, g[:, 0], g[:, 1], cum[:, 0], cum[:, 1])


def _check_grid(ts):
    if ts.ndim != 1 or len(ts) < 1 or ts[0] != 0 or np.any(np.diff(ts) <= 0):
        raise ValidationError("time grid must start at 0 and increase strictly")


def integrated_rates(p: BECParams, grid) -> RateTable:
    """Rates and their integrals from 0 on ``grid``; the time integral is taken inside the momentum integral."""
    ts = np.asarray(grid, dtype=float)
    _check_grid(ts)
    g1, g2, G1, G2, _ = _rate_quadrature(p, ts)
    G1[0] = G2[0] = 0.0
    return RateTable(ts, g1, g2, G1, G2, p)


def decay_exponents(G1: float, G2: float) -> np.ndarray:
    """``Theta_mn`` with ``rho_mn(t) = rho_mn(0) exp(-Theta_mn)``."""
    a = _Z1 - _Z2
    b = _Z1 + _Z2
    da = (a[:, None] - a[None, :]) ** 2
    db = (b[:, None] - b[None, :]) ** 2
    return (G1 - G2) * da / 4 + (G1 + G2) * db / 4


def coherence_factors(G1: float, G2: float) -> np.ndarray:
    return np.exp(-decay_exponents(G1, G2))


def dephasing_choi(G1: float, G2: float) -> np.ndarray:
    """16 x 16 normalized Choi state of the two-atom dephasing channel."""
    m = coherence_factors(G1, G2)
    j = np.zeros((16, 16))
    idx = np.arange(4) * 5  # |mm> inside C^4 (x) C^4
    j[np.ix_(idx, idx)] = m / 4
    return j.astype(complex)


def bec_channel(p: Optional[BECParams], rt: RateTable, t: float) -> QuantumChannel:
    if p is not None and rt.params is not None and rt.params != p:
        raise ValidationError("rate table was computed for different parameters")
    i = rt.index(t)
    return QuantumChannel.from_choi(dephasing_choi(rt.Gamma1[i], rt.Gamma2[i]))


def bec_trajectory(p: BECParams, grid, rt: Optional[RateTable] = None) -> ChannelTrajectory:
    rt = integrated_rates(p, grid) if rt is None else rt
    return ChannelTrajectory(rt.times, [bec_channel(None, rt, t) for t in rt.times])


def rg_closed_form(G1, G2):
    """Robustness of the dephased maximally entangled state, ``(1/4) sum_{m != n} exp(-Theta_mn)``.

    Valid for this maximally correlated family only; used as a cross-check.
    """
    G1, G2 = np.asarray(G1), np.asarray(G2)
    return 2 * np.exp(-2 * G1) + np.exp(-4 * G1) * np.cosh(4 * G2)


# ---------------------------------------------------------------------------
# grids and sweeps
# ---------------------------------------------------------------------------

CALIBRATION_AE = 0.01
DECAY_FRACTION = 0.01


def calibrate_tmax(p: BECParams, calibration_ae: float = CALIBRATION_AE,
                   fraction: float = DECAY_FRACTION, horizon: float = 200.0, n: int = 2001) -> float:
    """Time after which ``|g1|`` stays below ``fraction`` of its peak.

    Evaluated at ``a_E = calibration_ae * a_Rb``, the slowest-decaying end of a
    scattering-length sweep, so one grid covers the full decay of every point.
    """
    q = p.with_ae(calibration_ae)
    ts = np.linspace(0, horizon, n)
    g1, _ = gamma_rates(q, ts, epsabs=1e-9)
    peak = np.max(np.abs(g1))
    above = np.flatnonzero(np.abs(g1) >= fraction * peak)
    tmax = float(ts[min(above[-1] + 1, n - 1)])
    log.info("calibrated t_max = %.6g t0 (= %.6g s) at a_E = %g a_Rb", tmax, tmax * p.t0, calibration_ae)
    return tmax


def default_grid(p: BECParams, n: int = 100, tmax: Optional[float] = None) -> np.ndarray:
    if n < 2:
        raise ValidationError("grid needs at least 2 samples")
    tmax = calibrate_tmax(p) if tmax is None else float(tmax)
    if tmax <= 0:
        raise ValidationError("t_max must be positive")
    return np.linspace(0.0, tmax, n)


@dataclass
class SweepPoint:
    value: float
    report: Optional[NonMarkovReport]
    error: str = ""


def _run_point(args):
    p, grid, threshold, tol, drop_gamma2 = args
    try:
        rt = integrated_rates(p, grid)
        if drop_gamma2:
            rt = rt.without_gamma2()
        return nm_total(bec_trajectory(p, grid, rt), threshold, tol), ""
    except (ArithmeticError, ValidationError, RuntimeError) as exc:
        return None, str(exc)


def _sweep(points, values, grid, threshold, tol, workers, drop_gamma2=False) -> List[SweepPoint]:
    jobs = [(p, np.asarray(grid), threshold, tol, drop_gamma2) for p in points]
    if workers and workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as ex:
            out = list(ex.map(_run_point, jobs))
    else:
        out = [_run_point(j) for j in jobs]
    res = []
    for v, (rep, err) in zip(values, out):
        if rep is None:
            log.warning("sweep point %g failed: %s", v, err)
        res.append(SweepPoint(float(v), rep, err))
    return res


def sweep_ae(p: BECParams, ae_values: Sequence[float], grid, threshold: float = DEFAULT_THRESHOLD,
             tol: float = 1e-8, workers: Optional[int] = None) -> List[SweepPoint]:
    """One non-Markovianity report per ``a_E / a_Rb`` value."""
    vals = list(ae_values)
    if not vals:
        raise ValidationError("empty a_E sweep")
    return _sweep([p.with_ae(v) for v in vals], vals, grid, threshold, tol, workers)


def sweep_D(p: BECParams, d_values: Sequence[float], grid, threshold: float = DEFAULT_THRESHOLD,
            tol: float = 1e-8, workers: Optional[int] = None, drop_gamma2: bool = False) -> List[SweepPoint]:
    """One non-Markovianity report per ``D / L`` value; every ``D`` must satisfy ``D >= 4L``."""
    vals = list(d_values)
    if not vals:
        raise ValidationError("empty D sweep")
    points = [p.with_D(v) for v in vals]
    return _sweep(points, vals, grid, threshold, tol, workers, drop_gamma2)


def crossover(points: Sequence[SweepPoint]):
    """Bracket ``(last zero, first positive)`` of a single zero-to-positive transition, else ``None``."""
    flags = [pt.report is not None and pt.report.total > 0 for pt in points]
    changes = [i for i in range(1, len(flags)) if flags[i] != flags[i - 1]]
    if len(changes) != 1 or flags[0] or not flags[-1]:
        return None
    i = changes[0]
    return points[i - 1].value, points[i].value


def sweep_csv(points: Sequence[SweepPoint], key: str) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([key, "nm_total", "n_increments"])
    for pt in points:
        if pt.report is None:
            w.writerow([FLOAT_FMT % pt.value, "nan", ""])
        else:
            w.writerow([FLOAT_FMT % pt.value, FLOAT_FMT % pt.report.total, pt.report.n_increments])
    return buf.getvalue()


def long_csv(points: Sequence[SweepPoint], key: str) -> str:
    """Plot-ready long format: one row per (parameter, time) pair."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([key, "time", "rg_value"])
    for pt in points:
        if pt.report is None:
            continue
        for t, r in zip(pt.report.times, pt.report.rg_values):
            w.writerow([FLOAT_FMT % pt.value, FLOAT_FMT % t, FLOAT_FMT % r])
    return buf.getvalue()
