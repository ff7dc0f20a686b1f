"""Input noise, homodyne readout, force PSD and feed-forward across auxiliary readouts.

All spectra are SQL-normalized: the transfer sets coming out of
:func:`~speedmeter.freqsolve.solve_transfer` already carry the force drive in
units of ``F_SQL``, so the ratio below is ``S^F / S^F_SQL`` directly.

Vacuum inputs have PSD matrix ``I`` in this normalization.  With that choice the
single-cavity position meter touches the SQL (minimum exactly 1) and the
filtered speed-meter output reproduces the ``1/2 [...]`` structure of the
published spectra.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Mapping, Sequence, Union

import numpy as np
from numpy.typing import NDArray

from . import closedform
from .freqsolve import NumericalFailure, TransferSet

WIENER_EPS = 1e-12

Feedforward = Literal["off", "closed-form", "wiener"]
_FF_ALIASES = {"off": "off", "closed-form": "closed-form", "closedForm": "closed-form", "wiener": "wiener"}


@dataclass(frozen=True)
class Vacuum:
    kind: Literal["vacuum"] = "vacuum"


@dataclass(frozen=True)
class Squeezed:
    """Squeezed vacuum; ``theta = 0`` squeezes the amplitude quadrature."""

    r: float
    theta: float = 0.0
    kind: Literal["squeezed"] = "squeezed"

    def __post_init__(self):
        if not (np.isfinite(self.r) and self.r >= 0):
            raise ValueError("squeeze factor r must be finite and >= 0")
        if not 0 <= self.theta < np.pi:
            raise ValueError("squeeze angle theta must lie in [0, pi)")


InputState = Union[Vacuum, Squeezed]


def input_psd(state: InputState) -> NDArray[np.float64]:
    if isinstance(state, Vacuum):
        return np.eye(2)
    c, s = np.cos(state.theta), np.sin(state.theta)
    rot = np.array([[c, -s], [s, c]])
    return rot @ np.diag([np.exp(-2 * state.r), np.exp(2 * state.r)]) @ rot.T


@dataclass(frozen=True)
class NoiseModel:
    """Input state per port; ports not listed are in vacuum.

    ``scale`` multiplies every input PSD (``scale=0`` silences all quantum noise,
    which is only useful as a diagnostic).
    """

    states: Mapping[str, InputState] = field(default_factory=dict)
    scale: float = 1.0

    def psd(self, port: str) -> NDArray[np.float64]:
        return self.scale * input_psd(self.states.get(port, Vacuum()))

    def covariance(self, ports: Sequence[str]) -> NDArray[np.float64]:
        n = len(ports)
        out = np.zeros((2 * n, 2 * n))
        for i, p in enumerate(ports):
            out[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = self.psd(p)
        return out


VACUUM = NoiseModel()


def homodyne_row(phi: float) -> NDArray[np.float64]:
    """Homodyne projection ``{sin phi, cos phi}``; ``phi = 0`` reads the phase quadrature."""
    return np.array([np.sin(phi), np.cos(phi)])


@dataclass(frozen=True)
class ReadoutPlan:
    signal_port: str = "b"
    signal_angle: float | Literal["opt"] = "opt"
    auxiliaries: tuple[tuple[str, float], ...] = ()
    feedforward: Feedforward = "off"

    def __post_init__(self):
        ff = _FF_ALIASES.get(self.feedforward)
        if ff is None:
            raise ValueError(f"unknown feedforward mode {self.feedforward!r}")
        object.__setattr__(self, "feedforward", ff)
        aux = tuple((str(p), float(a)) for p, a in self.auxiliaries)
        object.__setattr__(self, "auxiliaries", aux)
        if any(p == self.signal_port for p, _ in aux):
            raise ValueError("auxiliary ports must differ from the signal port")
        if len({p for p, _ in aux}) != len(aux):
            raise ValueError("duplicate auxiliary port")
        if self.signal_angle != "opt" and not np.isfinite(self.signal_angle):
            raise ValueError("signal angle must be a finite number or 'opt'")

    def angle(self, gamma: float | None) -> float:
        if self.signal_angle == "opt":
            if gamma is None:
                raise ValueError("'opt' angle needs the model's gamma")
            return float(closedform.phi_opt(gamma))
        return float(self.signal_angle)


# Auxiliary readouts whose homodyne angles make the printed filters cancel the loop
# noise exactly: the A-port amplitude quadrature and the C-port phase quadrature.
CANONICAL_AUXILIARIES = (("a", np.pi / 2), ("c", 0.0))


def canonical_plan(feedforward: Feedforward = "wiener") -> ReadoutPlan:
    return ReadoutPlan("b", "opt", CANONICAL_AUXILIARIES, feedforward)


@dataclass(frozen=True)
class SpectrumResult:
    omegas: NDArray[np.float64]
    total: NDArray[np.float64]
    per_port: dict[str, NDArray[np.float64]]
    signal_power: NDArray[np.float64]
    gains: NDArray[np.complex128] | None = None

    @property
    def noise(self) -> NDArray[np.float64]:
        return sum(self.per_port.values())

    def contribution(self, port: str) -> NDArray[np.float64]:
        """SQL-normalized share of the total coming from one input port."""
        return self.per_port[port] / self.signal_power


def _readout(transfers: TransferSet, port: str, phi: float):
    h = homodyne_row(phi)
    rows = np.einsum("i,nij->nj", h, transfers.output_rows(port))
    sig = transfers.force_response(port) @ h
    return rows, sig


def assemble_spectrum(omegas, in_ports, noise, rows, sig, gains=None, signal_scale=None) -> SpectrumResult:
    """Force PSD of readout rows ``(n, 2P)`` with signal coefficients ``(n,)``.

    ``signal_scale`` sets the reference for the "no signal" test (default ``|sig|^2``).
    """
    sig_power = np.abs(sig) ** 2
    per_port = {}
    for i, p in enumerate(in_ports):
        r = rows[:, 2 * i : 2 * i + 2]
        per_port[p] = np.real(np.einsum("ni,ij,nj->n", r, noise.psd(p), np.conj(r)))
    ref = sig_power if signal_scale is None else signal_scale
    tiny = (sig_power <= 1e-20 * ref) | (sig_power == 0)
    if np.any(tiny):
        w = float(omegas[np.argmax(tiny)])
        raise NumericalFailure(f"readout carries no signal at omega={w:.17g}", w)
    total = sum(per_port.values()) / sig_power
    return SpectrumResult(np.asarray(omegas), total, per_port, sig_power, gains)


def _assemble(transfers, noise, rows, sig, gains=None) -> SpectrumResult:
    scale = np.max(np.abs(transfers.force) ** 2, axis=1)
    return assemble_spectrum(transfers.omegas, transfers.in_ports, noise, rows, sig, gains, scale)


def force_psd(transfers: TransferSet, noise: NoiseModel, plan: ReadoutPlan) -> SpectrumResult:
    """Force PSD of the bare signal readout (auxiliaries ignored)."""
    rows, sig = _readout(transfers, plan.signal_port, plan.angle(transfers.gamma))
    return _assemble(transfers, noise, rows, sig)


def _aux_rows(transfers: TransferSet, plan: ReadoutPlan):
    if not plan.auxiliaries:
        raise ValueError("plan has no auxiliary readouts")
    rows, sigs = zip(*(_readout(transfers, p, a) for p, a in plan.auxiliaries))
    return np.stack(rows, axis=1), np.stack(sigs, axis=1)


def wiener_filters(transfers: TransferSet, noise: NoiseModel, plan: ReadoutPlan) -> NDArray[np.complex128]:
    """Per-frequency gains ``(n, K)`` minimizing the residual noise of signal - sum g_k aux_k."""
    y, _ = _readout(transfers, plan.signal_port, plan.angle(transfers.gamma))
    Z, _ = _aux_rows(transfers, plan)
    cov = noise.covariance(transfers.in_ports)
    cross = np.einsum("ni,ij,nkj->nk", y, cov, np.conj(Z))
    auto = np.einsum("nki,ij,nlj->nkl", Z, cov, np.conj(Z))
    auto = auto + WIENER_EPS * np.eye(auto.shape[-1])
    # g = cross @ inv(auto)  <=>  auto^T g^T = cross^T
    return np.linalg.solve(np.swapaxes(auto, 1, 2), cross[..., None])[..., 0]


def residual_psd(transfers: TransferSet, noise: NoiseModel, plan: ReadoutPlan, gains) -> NDArray[np.float64]:
    """Noise PSD of ``signal - sum_k gains_k aux_k`` (not force-normalized)."""
    y, _ = _readout(transfers, plan.signal_port, plan.angle(transfers.gamma))
    Z, _ = _aux_rows(transfers, plan)
    r = y - np.einsum("nk,nki->ni", np.asarray(gains), Z)
    cov = noise.covariance(transfers.in_ports)
    return np.real(np.einsum("ni,ij,nj->n", r, cov, np.conj(r)))


def closed_form_gains(transfers: TransferSet, plan: ReadoutPlan) -> NDArray[np.complex128]:
    """Printed filters mapped onto the canonical auxiliaries.

    g2 acts on the A-port amplitude readout and g1 on the C-port phase readout; an
    auxiliary angle shifted by pi flips the sign of its gain.
    """
    if plan.signal_port != "b" or plan.signal_angle != "opt" or transfers.gamma is None:
        raise ValueError("closed-form feed-forward needs the canonical speed-meter plan")
    canonical = dict(CANONICAL_AUXILIARIES)
    given = dict(plan.auxiliaries)
    if set(given) != set(canonical):
        raise ValueError("closed-form feed-forward needs auxiliaries on ports 'a' and 'c'")
    g1, g2 = closedform.feedforward_filters(transfers.gamma, transfers.omegas)
    printed = {"a": g2, "c": g1}
    cols = []
    for port, angle in plan.auxiliaries:
        d = np.cos(angle - canonical[port])
        if not np.isclose(abs(d), 1.0, atol=1e-12):
            raise ValueError(f"closed-form feed-forward needs port {port!r} at angle {canonical[port]} (mod pi)")
        cols.append(np.sign(d) * printed[port])
    return np.stack(cols, axis=1)


def conditional_psd(
    transfers: TransferSet, noise: NoiseModel, plan: ReadoutPlan, gains=None
) -> SpectrumResult:
    """Force PSD of the signal readout after subtracting filtered auxiliary readouts."""
    if gains is None:
        if plan.feedforward == "wiener":
            gains = wiener_filters(transfers, noise, plan)
        elif plan.feedforward == "closed-form":
            gains = closed_form_gains(transfers, plan)
        else:
            raise ValueError("conditional_psd needs feedforward 'wiener' or 'closed-form'")
    gains = np.asarray(gains, dtype=complex)
    y, ty = _readout(transfers, plan.signal_port, plan.angle(transfers.gamma))
    Z, tz = _aux_rows(transfers, plan)
    rows = y - np.einsum("nk,nki->ni", gains, Z)
    sig = ty - np.einsum("nk,nk->n", gains, tz)
    return _assemble(transfers, noise, rows, sig, gains)


def readout_psd(transfers: TransferSet, noise: NoiseModel, plan: ReadoutPlan) -> SpectrumResult:
    if plan.feedforward == "off" or not plan.auxiliaries:
        return force_psd(transfers, noise, plan)
    return conditional_psd(transfers, noise, plan)
