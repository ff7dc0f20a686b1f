"""Frequency-domain solution of a linear quantum network.

Fourier convention ``d/dt -> -i Omega``.  For every grid point the multiport
quadrature scattering matrix is

    S[p <- q](Omega) = delta_pq D_p + C_p (-i Omega I - drift)^-1 B_q

and the force response is normalized so that the drive enters as ``F / F_SQL``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .sysmodel import HBAR, KAPPA, SIGMA, DriftModel


class NumericalFailure(ArithmeticError):
    """A grid point where the linear response cannot be evaluated."""

    def __init__(self, message: str, omega: float | None = None):
        super().__init__(message)
        self.omega = omega


@dataclass(frozen=True)
class FrequencyGrid:
    points: NDArray[np.float64]
    spacing: str = "log"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("frequency grid needs at least 2 points")
        if not np.all(np.isfinite(pts)) or np.any(pts <= 0):
            raise ValueError("frequency grid points must be finite and > 0")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("frequency grid must be strictly increasing")
        if self.spacing not in ("log", "linear"):
            raise ValueError(f"unknown spacing {self.spacing!r}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def log(cls, lo: float = 1e-3, hi: float = 10.0, n: int = 400) -> "FrequencyGrid":
        if not 0 < lo < hi:
            raise ValueError("need 0 < lo < hi")
        return cls(np.geomspace(lo, hi, n), "log")

    @classmethod
    def linear(cls, lo: float, hi: float, n: int) -> "FrequencyGrid":
        if not 0 < lo < hi:
            raise ValueError("need 0 < lo < hi")
        return cls(np.linspace(lo, hi, n), "linear")

    def __len__(self):
        return self.points.size


DEFAULT_GRID = FrequencyGrid.log(1e-3, 10.0, 400)


def as_omegas(grid: FrequencyGrid | ArrayLike) -> NDArray[np.float64]:
    if isinstance(grid, FrequencyGrid):
        return grid.points
    return np.atleast_1d(np.asarray(grid, dtype=float))


def f_sql(mass, Omega):
    """Free-mass force SQL amplitude ``sqrt(2 hbar m Omega^2)``."""
    return np.sqrt(2.0 * HBAR * mass * np.asarray(Omega) ** 2)


@dataclass(frozen=True)
class TransferSet:
    """Per-frequency scattering matrices and SQL-normalized force response.

    ``scattering[k]`` has shape ``(2 * len(out_ports), 2 * len(in_ports))`` and
    ``force[k]`` has shape ``(2 * len(out_ports),)``.
    """

    omegas: NDArray[np.float64]
    out_ports: tuple[str, ...]
    in_ports: tuple[str, ...]
    scattering: NDArray[np.complex128]
    force: NDArray[np.complex128]
    gamma: float | None = None

    def __post_init__(self):
        n = len(self.omegas)
        shape = (n, 2 * len(self.out_ports), 2 * len(self.in_ports))
        if self.scattering.shape != shape:
            raise ValueError(f"scattering has shape {self.scattering.shape}, expected {shape}")
        if self.force.shape != (n, 2 * len(self.out_ports)):
            raise ValueError("force response shape does not match the output ports")

    def _out(self, port: str) -> slice:
        try:
            i = self.out_ports.index(port)
        except ValueError:
            raise KeyError(f"no output port {port!r}") from None
        return slice(2 * i, 2 * i + 2)

    def _in(self, port: str) -> slice:
        try:
            i = self.in_ports.index(port)
        except ValueError:
            raise KeyError(f"no input port {port!r}") from None
        return slice(2 * i, 2 * i + 2)

    def block(self, out_port: str, in_port: str) -> NDArray[np.complex128]:
        """``(n, 2, 2)`` transfer from ``in_port`` quadratures to ``out_port`` quadratures."""
        return self.scattering[:, self._out(out_port), self._in(in_port)]

    def force_response(self, port: str) -> NDArray[np.complex128]:
        return self.force[:, self._out(port)]

    def output_rows(self, port: str) -> NDArray[np.complex128]:
        """``(n, 2, 2 * len(in_ports))``: both quadratures of one output over all inputs."""
        return self.scattering[:, self._out(port), :]

    def select(self, out_ports: Sequence[str]) -> "TransferSet":
        idx = np.concatenate([np.arange(self._out(p).start, self._out(p).stop) for p in out_ports])
        return TransferSet(
            self.omegas,
            tuple(out_ports),
            self.in_ports,
            self.scattering[:, idx, :],
            self.force[:, idx],
            self.gamma,
        )


def solve_transfer(model: DriftModel, grid: FrequencyGrid | ArrayLike) -> TransferSet:
    omegas = as_omegas(grid)
    Omega = 2.0 * KAPPA * omegas
    dim = model.dim
    ports = model.ports
    B = np.concatenate([model.input_coupling[p] for p in ports], axis=1)
    C = np.concatenate([model.output_coupling[p] for p in ports], axis=0)
    D = np.zeros((2 * len(ports), 2 * len(ports)))
    for i, p in enumerate(ports):
        D[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = model.feedthrough[p]

    M = -1j * Omega[:, None, None] * np.eye(dim) - model.drift[None, :, :]
    rhs = np.concatenate([B, model.force_column[:, None]], axis=1).astype(complex)
    try:
        X = np.linalg.solve(M, np.broadcast_to(rhs, (len(omegas),) + rhs.shape))
    except np.linalg.LinAlgError:
        X = None
    if X is None or not np.all(np.isfinite(X)):
        for w, Mk in zip(omegas, M):
            if np.linalg.cond(Mk) > 1e14 or not np.all(np.isfinite(Mk)):
                raise NumericalFailure(f"singular response matrix at omega={w:.17g}", float(w))
        raise NumericalFailure("non-finite response")

    S = D[None] + np.einsum("ij,njk->nik", C, X[:, :, :-1])
    force = np.einsum("ij,nj->ni", C, X[:, :, -1]) * f_sql(model.mass, Omega)[:, None]
    if not (np.all(np.isfinite(S)) and np.all(np.isfinite(force))):
        bad = ~(np.isfinite(S).all(axis=(1, 2)) & np.isfinite(force).all(axis=1))
        w = float(omegas[np.argmax(bad)])
        raise NumericalFailure(f"non-finite transfer at omega={w:.17g}", w)
    return TransferSet(omegas, ports, ports, S, force, model.gamma)


def commutator_form(n_ports: int) -> NDArray[np.float64]:
    return np.kron(np.eye(n_ports), SIGMA)


def commutator_defect(transfers: TransferSet) -> NDArray[np.float64]:
    """``max |S Lambda S^dag - Lambda|`` per frequency.

    Works for a subset of output ports as long as every input port is present.
    """
    S = transfers.scattering
    lam_in = commutator_form(len(transfers.in_ports))
    lam_out = commutator_form(len(transfers.out_ports))
    resid = S @ lam_in @ np.conj(np.swapaxes(S, 1, 2)) - lam_out
    return np.abs(resid).max(axis=(1, 2))
