"""Quantum channels in Kraus and Choi form, and sampled channel trajectories.

Choi states are normalized to unit trace and ordered (output, input):

    J(Phi) = (Phi (x) id)(phi+),    phi+ = |phi+><phi+|,  |phi+> = sum_j |j>|j> / sqrt(d)

so that ``Phi(X) = d * Tr_2[J (1 (x) X^T)]``. The factor ``d`` and the
transpose on the input slot are what make :func:`choi_from_kraus` and
:func:`kraus_from_choi` exact inverses of each other.
"""
from __future__ import annotations

import json
import threading
from typing import List, Optional, Sequence

import numpy as np

from .qcore import (
    DensityOperator,
    HermitianOperator,
    ValidationError,
    eigh_desc,
    hermitian_defect,
    hermitize,
    matrix_from_dict,
    matrix_to_dict,
    max_entangled,
    min_eig,
    ptrace,
    random_unitary,
)

CPTP_TOL = 1e-10
KRAUS_RANK_TOL = 1e-10


class QuantumChannel:
    """A CPTP map on a ``dim``-dimensional system.

    Construct with :meth:`from_kraus` or :meth:`from_choi`. Whichever
    representation is missing is computed on first access and cached; the
    cache is filled under a lock so concurrent readers see either nothing or
    the finished representation.
    """

    def __init__(self, dim: int, kraus: Optional[Sequence[np.ndarray]] = None,
                 choi: Optional[np.ndarray] = None, validate: bool = True):
        if kraus is None and choi is None:
            raise ValueError("a channel needs Kraus operators or a Choi matrix")
        self.dim = int(dim)
        self._lock = threading.Lock()
        self._kraus = None
        self._choi = None
        if kraus is not None:
            ks = tuple(np.array(k, dtype=complex) for k in kraus)
            if not ks:
                raise ValidationError("Kraus list is empty")
            for k in ks:
                if k.shape != (self.dim, self.dim):
                    raise ValidationError(f"Kraus operator of shape {k.shape}, expected {(self.dim, self.dim)}")
                k.setflags(write=False)
            if validate:
                _check_kraus(ks, self.dim)
            self._kraus = ks
        if choi is not None:
            j = np.array(choi, dtype=complex)
            if j.shape != (self.dim ** 2, self.dim ** 2):
                raise ValidationError(f"Choi matrix of shape {j.shape}, expected {(self.dim ** 2,) * 2}")
            if validate:
                _check_choi(j, self.dim)
            j = hermitize(j)
            j.setflags(write=False)
            self._choi = j

    @classmethod
    def from_kraus(cls, kraus: Sequence[np.ndarray], validate: bool = True) -> "QuantumChannel":
        ks = list(kraus)
        if not ks:
            raise ValidationError("Kraus list is empty")
        return cls(np.asarray(ks[0]).shape[0], kraus=ks, validate=validate)

    @classmethod
    def from_choi(cls, choi, validate: bool = True) -> "QuantumChannel":
        j = np.asarray(choi)
        d = int(round(np.sqrt(j.shape[0])))
        if d * d != j.shape[0]:
            raise ValidationError(f"Choi dimension {j.shape[0]} is not a square")
        return cls(d, choi=j, validate=validate)

    @property
    def kraus(self):
        if self._kraus is None:
            with self._lock:
                if self._kraus is None:
                    self._kraus = _kraus_of(self._choi, self.dim)
        return self._kraus

    @property
    def choi(self) -> np.ndarray:
        if self._choi is None:
            with self._lock:
                if self._choi is None:
                    j = _choi_of(self._kraus, self.dim)
                    j.setflags(write=False)
                    self._choi = j
        return self._choi

    def __getstate__(self):
        state = self.__dict__.copy()
        del state["_lock"]
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._lock = threading.Lock()

    def __repr__(self):
        forms = [n for n, v in (("kraus", self._kraus), ("choi", self._choi)) if v is not None]
        return f"QuantumChannel(dim={self.dim}, forms={forms})"

    def to_dict(self, form: str = "kraus") -> dict:
        if form == "kraus":
            return {"dim": self.dim, "kraus": [matrix_to_dict(k) for k in self.kraus]}
        if form == "choi":
            return {"dim": self.dim, "choi": matrix_to_dict(self.choi, (self.dim, self.dim))}
        raise ValueError(f"unknown channel form {form!r}")

    @classmethod
    def from_dict(cls, obj: dict) -> "QuantumChannel":
        if "dim" not in obj:
            raise ValidationError("channel object has no 'dim'")
        d = int(obj["dim"])
        if "kraus" in obj:
            return cls(d, kraus=[matrix_from_dict(k) for k in obj["kraus"]])
        if "choi" in obj:
            return cls(d, choi=matrix_from_dict(obj["choi"]))
        raise ValidationError("channel object needs a 'kraus' list or a 'choi' matrix")


def _check_kraus(ks, d):
    s = sum(k.conj().T @ k for k in ks)
    err = float(np.max(np.abs(s - np.eye(d))))
    if err > CPTP_TOL:
        raise ValidationError(f"Kraus operators are not trace preserving (|sum K^dag K - I| = {err:.3e})")


def _check_choi(j, d):
    if hermitian_defect(j) > 1e-10:
        raise ValidationError("Choi matrix is not Hermitian")
    lo = min_eig(j)
    if lo < -1e-10:
        raise ValidationError(f"Choi matrix is not positive semidefinite (min eigenvalue {lo:.3e})")
    marg = ptrace(j, (d, d), keep=1)
    err = float(np.max(np.abs(marg - np.eye(d) / d)))
    if err > CPTP_TOL:
        raise ValidationError(f"Choi marginal over the output differs from I/d by {err:.3e}; not trace preserving")


def _choi_of(ks, d) -> np.ndarray:
    vecs = np.array([k.reshape(d * d) for k in ks]) / np.sqrt(d)
    return hermitize(vecs.T @ vecs.conj())


def _kraus_of(j, d):
    w, v = eigh_desc(j)
    ks = []
    for lam, vec in zip(w, v.T):
        if lam > KRAUS_RANK_TOL:
            k = np.sqrt(d * lam) * vec.reshape(d, d)
            k.setflags(write=False)
            ks.append(k)
    return tuple(ks)


def choi_from_kraus(c: QuantumChannel) -> DensityOperator:
    return DensityOperator(c.choi, (c.dim, c.dim))


def kraus_from_choi(j) -> QuantumChannel:
    """Kraus form of the channel whose normalized Choi state is ``j``.

    One Kraus operator per eigenvalue of ``j`` above ``1e-10``, in
    descending eigenvalue order.
    """
    j = np.asarray(j, dtype=complex)
    c = QuantumChannel.from_choi(j)
    return QuantumChannel(c.dim, kraus=_kraus_of(c.choi, c.dim))


def apply(c: QuantumChannel, rho) -> np.ndarray:
    r = np.asarray(rho, dtype=complex)
    _check_dims(c, r)
    return hermitize(sum(k @ r @ k.conj().T for k in c.kraus))


def apply_via_choi(c: QuantumChannel, rho) -> np.ndarray:
    r = np.asarray(rho, dtype=complex)
    _check_dims(c, r)
    d = c.dim
    return hermitize(d * ptrace(c.choi @ np.kron(np.eye(d), r.T), (d, d), keep=0))


def adjoint_apply(c: QuantumChannel, w) -> np.ndarray:
    """Heisenberg-picture action ``sum_i K_i^dag W K_i``."""
    w = np.asarray(w, dtype=complex)
    _check_dims(c, w)
    return hermitize(sum(k.conj().T @ w @ k for k in c.kraus))


def _check_dims(c, x):
    if x.shape != (c.dim, c.dim):
        raise ValidationError(f"operator of shape {x.shape} does not match channel dimension {c.dim}")


def extend_to_ancilla(c: QuantumChannel, ancilla_dim: Optional[int] = None) -> QuantumChannel:
    """``c (x) id`` acting on (system, ancilla); the ancilla defaults to a copy of the system."""
    da = c.dim if ancilla_dim is None else ancilla_dim
    eye = np.eye(da)
    return QuantumChannel(c.dim * da, kraus=[np.kron(k, eye) for k in c.kraus], validate=False)


def compose(c2: QuantumChannel, c1: QuantumChannel) -> QuantumChannel:
    """The channel ``c2 o c1`` (apply ``c1`` first)."""
    if c1.dim != c2.dim:
        raise ValidationError("cannot compose channels of different dimension")
    return QuantumChannel(c1.dim, kraus=[b @ a for b in c2.kraus for a in c1.kraus], validate=False)


def choi_state(c: QuantumChannel) -> np.ndarray:
    """``(c (x) id)(phi+)``, equal to the normalized Choi matrix."""
    return c.choi


# ---------------------------------------------------------------------------
# standard channels
# ---------------------------------------------------------------------------

def identity_channel(d: int) -> QuantumChannel:
    return QuantumChannel(d, kraus=[np.eye(d)])


def unitary_channel(u) -> QuantumChannel:
    u = np.asarray(u, dtype=complex)
    return QuantumChannel(u.shape[0], kraus=[u])


def depolarizing_channel(d: int, p: float = 1.0) -> QuantumChannel:
    """``rho -> (1 - p) rho + p Tr(rho) I/d``; ``p = 1`` is complete depolarization."""
    j = (1 - p) * np.asarray(max_entangled(d)) + p * np.eye(d * d) / (d * d)
    return QuantumChannel(d, choi=j)


def dephasing_channel(p: float) -> QuantumChannel:
    """Qubit phase flip: ``rho -> (1 - p) rho + p Z rho Z``."""
    z = np.diag([1.0, -1.0])
    return QuantumChannel(2, kraus=[np.sqrt(1 - p) * np.eye(2), np.sqrt(p) * z])


def random_channel(d: int, rng: np.random.Generator, n_kraus: Optional[int] = None) -> QuantumChannel:
    """Random CPTP map from an isometry drawn with the Haar measure."""
    r = d if n_kraus is None else n_kraus
    u = random_unitary(d * r, rng)
    iso = u[:, :d]
    return QuantumChannel(d, kraus=[iso[i * d:(i + 1) * d, :] for i in range(r)])


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

class ChannelTrajectory:
    """A process ``{Phi_t}`` sampled on a strictly increasing time grid."""

    def __init__(self, times: Sequence[float], channels: Sequence[QuantumChannel]):
        ts = np.asarray(times, dtype=float)
        chans = list(channels)
        if ts.ndim != 1 or len(ts) != len(chans):
            raise ValidationError(f"{len(ts)} times but {len(chans)} channels")
        if len(ts) == 0:
            raise ValidationError("trajectory is empty")
        if np.any(ts < 0) or np.any(np.diff(ts) <= 0):
            raise ValidationError("trajectory times must be nonnegative and strictly increasing")
        dims = {c.dim for c in chans}
        if len(dims) != 1:
            raise ValidationError(f"channels of mixed dimension {sorted(dims)}")
        if ts[0] == 0:
            err = float(np.max(np.abs(chans[0].choi - np.asarray(max_entangled(chans[0].dim)))))
            if err > 1e-10:
                raise ValidationError(f"channel at t = 0 is not the identity (deviation {err:.3e})")
        ts.setflags(write=False)
        self.times = ts
        self.channels = tuple(chans)

    @property
    def dim(self) -> int:
        return self.channels[0].dim

    def __len__(self):
        return len(self.times)

    def index(self, t: float) -> int:
        hits = np.flatnonzero(np.isclose(self.times, t, rtol=1e-12, atol=1e-12))
        if hits.size == 0:
            raise ValidationError(f"time {t!r} is not on the trajectory grid")
        return int(hits[0])

    def at(self, t: float) -> QuantumChannel:
        return self.channels[self.index(t)]

    def map(self, fn) -> "ChannelTrajectory":
        return ChannelTrajectory(self.times, [fn(c) for c in self.channels])

    def to_dict(self, form: str = "kraus") -> dict:
        return {"times": self.times.tolist(), "channels": [c.to_dict(form) for c in self.channels]}

    @classmethod
    def from_dict(cls, obj: dict) -> "ChannelTrajectory":
        try:
            times, chans = obj["times"], obj["channels"]
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"trajectory object needs 'times' and 'channels': {exc}") from exc
        return cls(times, [QuantumChannel.from_dict(c) for c in chans])

    def save(self, path, form: str = "kraus") -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(form), fh)

    @classmethod
    def load(cls, path) -> "ChannelTrajectory":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def unitary_trajectory(hamiltonian, times: Sequence[float]) -> ChannelTrajectory:
    """``Phi_t(rho) = U_t rho U_t^dag`` with ``U_t = exp(-i H t)``."""
    h = np.asarray(hamiltonian, dtype=complex)
    w, v = np.linalg.eigh(h)
    chans = []
    for t in times:
        u = (v * np.exp(-1j * w * t)) @ v.conj().T
        chans.append(unitary_channel(u))
    return ChannelTrajectory(times, chans)


def dephasing_semigroup(rate: float, times: Sequence[float]) -> ChannelTrajectory:
    """Constant-rate qubit dephasing: coherences decay as ``exp(-2 rate t)``."""
    chans = [dephasing_channel((1 - np.exp(-2 * rate * t)) / 2) for t in times]
    return ChannelTrajectory(times, chans)


def trajectory_from_choi(times, chois: List[np.ndarray]) -> ChannelTrajectory:
    return ChannelTrajectory(times, [QuantumChannel.from_choi(j) for j in chois])
