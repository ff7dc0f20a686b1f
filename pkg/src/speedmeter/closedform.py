"""Published closed-form expressions, transcribed as printed.

Every function here takes the normalized power ``gamma`` and the dimensionless
frequency ``omega = Omega / (2 kappa)``; both may be numpy arrays.  Matrices come
back with shape ``omega.shape + (2, 2)`` and vectors with ``omega.shape + (2,)``.

Nothing in this module is "fixed up".  Known misprints are reproduced on
purpose so that they can be exposed by the cross-checks in :mod:`.scenarios`;
the one-entry correction for the drive matrix lives in
:func:`drive_matrix_corrected` and is used only as a diagnostic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .freqsolve import FrequencyGrid, TransferSet, as_omegas, f_sql

__all__ = [
    "ReducedParams",
    "CoefficientMatrices",
    "speedmeter_io",
    "drive_matrix",
    "drive_matrix_corrected",
    "mimo_out",
    "feedforward_filters",
    "conditional_coeffs",
    "speed_spectrum",
    "position_spectrum",
    "positionmeter_io",
    "phi_opt",
    "f_sql",
    "conditional_psd_closed",
    "positionmeter_psd",
    "printed_speedmeter_transfers",
    "printed_mimo_transfers",
    "printed_positionmeter_transfers",
]

I = 1j


@dataclass(frozen=True)
class ReducedParams:
    gamma: float
    omega: float

    def __post_init__(self):
        for name in ("gamma", "omega"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and > 0, got {v!r}")


class CoefficientMatrices(NamedTuple):
    D_d: np.ndarray
    D_e: np.ndarray
    D_c: np.ndarray
    t_F: np.ndarray


def _mat(a, b, c, d):
    a, b, c, d = np.broadcast_arrays(*(np.asarray(v, dtype=complex) for v in (a, b, c, d)))
    return np.stack([np.stack([a, b], -1), np.stack([c, d], -1)], -2)


def _vec(a, b):
    a, b = np.broadcast_arrays(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))
    return np.stack([a, b], -1)


def _args(gamma, omega, *, allow_zero_omega=False):
    g = np.asarray(gamma, dtype=float)
    w = np.asarray(omega, dtype=float)
    if np.any(g < 0) or not np.all(np.isfinite(g)):
        raise ValueError("gamma must be finite and >= 0")
    if allow_zero_omega:
        if np.any(w < 0):
            raise ValueError("omega must be >= 0")
    elif np.any(w <= 0):
        raise ValueError("omega must be > 0")
    return g, w


def drive_matrix(gamma, omega):
    """Transfer from the A-cavity input to the B output, as printed (finite at omega = 0)."""
    g, w = _args(gamma, omega, allow_zero_omega=True)
    return _mat(-1 / (I + w) ** 2, 0, -g / (I + w) ** 4, -w / (I + w) ** 2)


def drive_matrix_corrected(gamma, omega):
    """Drive matrix with the lower-right entry replaced by ``-1/(i+omega)^2``.

    Diagnostic hypothesis only: this is the entry a phase-insensitive cascade
    must have, and the value the first-principles solve produces.
    """
    g, w = _args(gamma, omega, allow_zero_omega=True)
    return _mat(-1 / (I + w) ** 2, 0, -g / (I + w) ** 4, -1 / (I + w) ** 2)


def speedmeter_io(gamma, omega) -> CoefficientMatrices:
    g, w = _args(gamma, omega)
    D_d = drive_matrix(g, w)
    D_e = _mat(-w / (I + w), 0, g / (w * (I + w) ** 3), -w / (I + w))
    D_c = _mat(0, I * w / (I + w) ** 2, -I * w / (I + w) ** 2, g * (I + 2 * w) / (w * (I + w) ** 4))
    t_F = _vec(0 * w, -I * np.sqrt(2 * g) / (I + w) ** 2)
    return CoefficientMatrices(D_d, D_e, D_c, t_F)


def mimo_out(gamma, omega) -> dict:
    """Auxiliary-port relations exactly as displayed, keyed by the printed input labels."""
    g, w = _args(gamma, omega)
    a_port = {
        "b": _mat(-w / (I + w), 0, g / (w * (I + w) ** 3), -w / (I + w)),
        "a": _mat(0, 0, -g / (w**2 * (I + w) ** 2), 0),
        "c": _mat(0, -I / (I + w), I / (I + w), -g * (I + 2 * w) / (w**2 * (I + w) ** 3)),
        "force": _vec(0 * w, I * np.sqrt(2 * g) / (w * (I + w))),
    }
    c_port = {
        "b": _mat(-g * (I + 2 * w) / (w * (I + w) ** 4), -I * w / (I + w) ** 2, I * w / (I + w) ** 2, 0),
        "a": _mat(g * (I + 2 * w) / (w**2 * (I + w) ** 3), I / (I + w), -I / (I + w), 0),
        "c": _mat(w**2 / (I + w) ** 2, g * (I + 2 * w) ** 2 / (w**2 * (I + w) ** 4), 0, w**2 / (I + w) ** 2),
        "force": _vec(0 * w, -I * np.sqrt(2 * g) * (I + 2 * w) / (w * (I + w) ** 2)),
    }
    return {"a": a_port, "c": c_port}


def feedforward_filters(gamma, omega):
    """Printed feed-forward filters ``(g1, g2)``."""
    g, w = _args(gamma, omega)
    root = np.sqrt(1 + g**2)
    g1 = I * g * (1 - w**2 * (I + w) ** 2) / (root * w * (I + w) ** 2)
    g2 = g * (1 - w**2 - w**4) / (root * w * (I + w))
    return g1, g2


def conditional_coeffs(gamma, omega) -> dict:
    """Coefficients of the filtered output; keys ``a1, a2, b2, c1, force``."""
    g, w = _args(gamma, omega, allow_zero_omega=True)
    pre = 1 / np.sqrt(g**2 + 1)
    return {
        "a1": pre * (-g * w**2 * (w**2 + 2) / (w + I) ** 2),
        "a2": pre * (-1 / (w + I) ** 2),
        "b2": pre * (-w / (w + I)),
        "c1": pre * (-I * w / (w + I) ** 2),
        "force": pre * (-I * np.sqrt(2 * g) / (w + I) ** 2),
    }


def conditional_psd_closed(gamma, omega, s_in: float = 1.0):
    """SQL-normalized PSD of the filtered output, assembled through the PSD ratio."""
    k = conditional_coeffs(gamma, omega)
    noise = sum(np.abs(k[n]) ** 2 for n in ("a1", "a2", "b2", "c1")) * s_in
    return noise / np.abs(k["force"]) ** 2


def speed_spectrum(gamma, omega):
    g, w = _args(gamma, omega, allow_zero_omega=True)
    return 0.5 * ((1 + w**2) ** 2 / g + g * w**4 * (2 + w**2))


def position_spectrum(gamma, omega):
    g, w = _args(gamma, omega)
    u = w**2 * (2 + w**2) / (8 * g)
    return 0.5 * (u + 1 / u)


def positionmeter_io(gamma, omega):
    """Single-cavity transfer matrix and signal vector ``(T_pm, t_F_pm)``."""
    g, w = _args(gamma, omega)
    diag = -1 + 2 * I / (I + 2 * w)
    T = _mat(diag, 0, 8 * g / (w**2 * (I + 2 * w) ** 2), diag)
    t = _vec(0 * w, 4 * I * np.sqrt(g) / (w * (I + 2 * w)))
    return T, t


def positionmeter_psd(gamma, omega, phi: float = 0.0):
    """PSD ratio of the printed single-cavity matrices read at homodyne angle ``phi``."""
    T, t = positionmeter_io(gamma, omega)
    h = np.array([np.sin(phi), np.cos(phi)])
    row = np.einsum("i,...ij->...j", h, T)
    return np.sum(np.abs(row) ** 2, axis=-1) / np.abs(t @ h) ** 2


def positionmeter_kappa(alpha, mass, Omega, kappa, gamma):
    """Coupling constant ``4 gamma hbar alpha^2 / (m Omega^2 (kappa^2 + Omega^2))`` (diagnostic)."""
    return 4 * gamma * alpha**2 / (mass * Omega**2 * (kappa**2 + Omega**2))


def phi_opt(gamma):
    """Homodyne angle ``arctan(gamma)`` that cancels the DC back-action term."""
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0):
        raise ValueError("gamma must be >= 0")
    return np.arctan(g)


# -- printed matrices packed as transfer sets ---------------------------------


def printed_speedmeter_transfers(gamma, grid: FrequencyGrid, *, corrected: bool = False) -> TransferSet:
    """The B-port relation (drive, B-input, C-input matrices and signal vector)."""
    w = as_omegas(grid)
    D_d, D_e, D_c, t_F = speedmeter_io(gamma, w)
    if corrected:
        D_d = drive_matrix_corrected(gamma, w)
    S = np.concatenate([D_d, D_e, D_c], axis=-1)
    return TransferSet(w, ("b",), ("a", "b", "c"), S, t_F, float(gamma))


def printed_mimo_transfers(gamma, grid: FrequencyGrid, *, relabel: bool = False, corrected: bool = False) -> TransferSet:
    """All three output ports from the displayed relations.

    With ``relabel=True`` the A- and B-input labels of the auxiliary-port displays are
    exchanged and the two components of the C-port signal vector are swapped;
    ``corrected`` is passed on to the B-port block.
    """
    w = as_omegas(grid)
    b = printed_speedmeter_transfers(gamma, w, corrected=corrected)
    m = mimo_out(gamma, w)
    rows = {"b": b.scattering}
    force = {"b": b.force}
    for port in ("a", "c"):
        blocks = dict(m[port])
        f = blocks.pop("force")
        if relabel:
            blocks["a"], blocks["b"] = blocks["b"], blocks["a"]
            if port == "c":
                f = f[..., ::-1]
        rows[port] = np.concatenate([blocks["a"], blocks["b"], blocks["c"]], axis=-1)
        force[port] = f
    order = ("a", "b", "c")
    S = np.concatenate([rows[p] for p in order], axis=-2)
    F = np.concatenate([force[p] for p in order], axis=-1)
    return TransferSet(w, order, order, S, F, float(gamma))


def printed_positionmeter_transfers(gamma, grid: FrequencyGrid) -> TransferSet:
    w = as_omegas(grid)
    T, t = positionmeter_io(gamma, w)
    return TransferSet(w, ("a",), ("a",), T, t, float(gamma))
