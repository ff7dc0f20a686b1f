"""Linear optomechanical systems as data, and their quadrature-space drift model.

Normalized units: hbar = 1 and the signal-cavity bandwidth ``KAPPA = 1/2``, so the
dimensionless frequency ``omega = Omega / (2 kappa)`` equals ``Omega`` numerically.

Quadrature ordering is fixed everywhere: (amplitude, phase) for optical modes and
(x, p) for the mechanical mode.  Both pairs satisfy ``[q1, q2] = i``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Literal, Union

import numpy as np
from numpy.typing import NDArray

KAPPA = 0.5
HBAR = 1.0

SIGMA = np.array([[0.0, 1.0], [-1.0, 0.0]])


class ModelError(ValueError):
    """Raised for inconsistent system descriptions."""


def complex_block(z: complex) -> NDArray[np.float64]:
    """Real 2x2 quadrature block of the complex coefficient ``z``.

    If ``dY/dt = z X`` for annihilation operators X, Y, then the quadrature
    vectors obey ``dY_q/dt = complex_block(z) @ X_q``.  This is the only place
    where the ``i`` <-> rotation mapping is made.
    """
    z = complex(z)
    return np.array([[z.real, -z.imag], [z.imag, z.real]])


@dataclass(frozen=True)
class ModeSpec:
    name: str
    kind: Literal["cavity", "mechanical"]
    damping: float = 0.0
    mass: float = 1.0
    resonance: float = 0.0
    port: str | None = None

    def __post_init__(self):
        if self.kind not in ("cavity", "mechanical"):
            raise ModelError(f"mode {self.name!r}: unknown kind {self.kind!r}")
        if not self.damping >= 0:
            raise ModelError(f"mode {self.name!r}: damping must be >= 0")
        if self.kind == "mechanical":
            if not self.mass > 0:
                raise ModelError(f"mode {self.name!r}: mass must be > 0")
            if not self.resonance >= 0:
                raise ModelError(f"mode {self.name!r}: resonance must be >= 0")

    @property
    def port_name(self) -> str | None:
        """Name of the input/output port, or None for an undamped mode."""
        if self.kind != "cavity" or self.damping == 0:
            return None
        return self.port if self.port is not None else self.name.lower()


@dataclass(frozen=True)
class BeamSplitter:
    """``H = -rate * a^dag b + h.c.`` between cavities ``mode_a`` and ``mode_b``."""

    mode_a: str
    mode_b: str
    rate: complex


@dataclass(frozen=True)
class Optomechanical:
    """``H = sign * strength * x * (c + c^dag)`` between a cavity and the mechanics."""

    cavity: str
    mechanical: str
    strength: float
    sign: int = 1

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ModelError("optomechanical sign must be +1 or -1")


@dataclass(frozen=True)
class DissipativeChannel:
    """Collective Markovian channel left behind by an eliminated reservoir.

    The channel's output obeys ``out = in + sum_k w_k X_k`` (feedthrough +1), and
    each participating mode picks up ``dX_j/dt += -conj(w_j) (sum_k w_k X_k / 2 + in)``.
    """

    port: str
    weights: tuple[tuple[str, complex], ...]


CouplingSpec = Union[BeamSplitter, Optomechanical, DissipativeChannel]


@dataclass(frozen=True)
class SystemSpec:
    modes: tuple[ModeSpec, ...]
    couplings: tuple[CouplingSpec, ...] = ()
    reservoir_modes: tuple[str, ...] = ()
    force_target: str = "x"
    gamma: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        object.__setattr__(self, "couplings", tuple(self.couplings))
        object.__setattr__(self, "reservoir_modes", tuple(self.reservoir_modes))
        if not (np.isfinite(self.gamma) and self.gamma >= 0):
            raise ModelError("gamma must be finite and >= 0")
        names = [m.name for m in self.modes]
        if len(set(names)) != len(names):
            raise ModelError("duplicate mode names")
        n_mech = sum(m.kind == "mechanical" for m in self.modes)
        if n_mech != 1:
            raise ModelError(f"expected exactly one mechanical mode, found {n_mech}")
        for r in self.reservoir_modes:
            mode = self.mode(r)
            if mode.kind != "cavity":
                raise ModelError(f"reservoir mode {r!r} must be a cavity")
        self._check_couplings()
        self._check_markovian()

    def mode(self, name: str) -> ModeSpec:
        for m in self.modes:
            if m.name == name:
                return m
        raise ModelError(f"unknown mode {name!r}")

    def _check_couplings(self):
        for c in self.couplings:
            if isinstance(c, BeamSplitter):
                a, b = self.mode(c.mode_a), self.mode(c.mode_b)
                if a.name == b.name:
                    raise ModelError("beam splitter must couple distinct modes")
                if a.kind != "cavity" or b.kind != "cavity":
                    raise ModelError("beam splitter only couples cavity modes")
            elif isinstance(c, Optomechanical):
                if self.mode(c.cavity).kind != "cavity":
                    raise ModelError(f"{c.cavity!r} is not a cavity")
                if self.mode(c.mechanical).kind != "mechanical":
                    raise ModelError(f"{c.mechanical!r} is not mechanical")
            elif isinstance(c, DissipativeChannel):
                for name, _ in c.weights:
                    if self.mode(name).kind != "cavity":
                        raise ModelError("dissipative channels act on cavities only")
            else:
                raise ModelError(f"unsupported coupling {c!r}")

    def _check_markovian(self):
        if not self.reservoir_modes:
            return
        others = [m.damping for m in self.modes if m.name not in self.reservoir_modes]
        for c in self.couplings:
            if isinstance(c, BeamSplitter):
                if c.mode_a in self.reservoir_modes or c.mode_b in self.reservoir_modes:
                    continue
                others.append(abs(c.rate))
            elif isinstance(c, Optomechanical):
                others.append(abs(c.strength))
        fastest = max(others, default=0.0)
        for r in self.reservoir_modes:
            if not self.mode(r).damping > fastest:
                warnings.warn(
                    f"reservoir {r!r} damping {self.mode(r).damping} does not exceed the "
                    f"other rates (max {fastest}); adiabatic elimination is not justified",
                    stacklevel=3,
                )


@dataclass(frozen=True)
class DriftModel:
    """Real quadrature-space Langevin model ``dv/dt = drift v + sum_p B_p in_p + f F``.

    Outputs are ``out_p = feedthrough_p in_p + C_p v``.
    """

    labels: tuple[str, ...]
    drift: NDArray[np.float64]
    ports: tuple[str, ...]
    input_coupling: dict[str, NDArray[np.float64]]
    output_coupling: dict[str, NDArray[np.float64]]
    feedthrough: dict[str, NDArray[np.float64]]
    force_column: NDArray[np.float64]
    damping_diagonal: NDArray[np.float64]
    mode_slices: dict[str, slice]
    mass: float
    gamma: float
    hamiltonian: bool = field(default=True)

    @property
    def dim(self) -> int:
        return self.drift.shape[0]

    def block(self, to: str, frm: str) -> NDArray[np.float64]:
        """Drift block driving mode ``to`` from mode ``frm``."""
        return self.drift[self.mode_slices[to], self.mode_slices[frm]]


def _frozen(a) -> NDArray:
    a = np.array(a)
    a.setflags(write=False)
    return a


def symplectic_form(n_modes: int) -> NDArray[np.float64]:
    return np.kron(np.eye(n_modes), SIGMA)


def build_drift(spec: SystemSpec) -> DriftModel:
    """Assemble the quadrature drift model from the Hamiltonian and dissipation data."""
    slices = {}
    labels = []
    for i, m in enumerate(spec.modes):
        slices[m.name] = slice(2 * i, 2 * i + 2)
        if m.kind == "cavity":
            labels += [f"{m.name}1", f"{m.name}2"]
        else:
            labels += [f"{m.name}", f"p_{m.name}"]
    dim = 2 * len(spec.modes)
    drift = np.zeros((dim, dim))
    damping = np.zeros(dim)
    ports: list[str] = []
    b_in: dict[str, NDArray] = {}
    c_out: dict[str, NDArray] = {}
    d_ff: dict[str, NDArray] = {}

    def add_port(name):
        if name in b_in:
            raise ModelError(f"duplicate port {name!r}")
        ports.append(name)
        b_in[name] = np.zeros((dim, 2))
        c_out[name] = np.zeros((2, dim))

    for m in spec.modes:
        s = slices[m.name]
        if m.kind == "mechanical":
            drift[s.start, s.start + 1] = 1.0 / m.mass
            drift[s.start + 1, s.start] = -m.mass * m.resonance**2
            continue
        drift[s, s] -= m.damping * np.eye(2)
        damping[s] = m.damping
        port = m.port_name
        if port is not None:
            add_port(port)
            b_in[port][s] = np.sqrt(2 * m.damping) * np.eye(2)
            c_out[port][:, s] = np.sqrt(2 * m.damping) * np.eye(2)
            d_ff[port] = -np.eye(2)

    hamiltonian = True
    for c in spec.couplings:
        if isinstance(c, BeamSplitter):
            sa, sb = slices[c.mode_a], slices[c.mode_b]
            drift[sa, sb] += complex_block(1j * c.rate)
            drift[sb, sa] += complex_block(1j * np.conj(c.rate))
        elif isinstance(c, Optomechanical):
            sc, sm = slices[c.cavity], slices[c.mechanical]
            g = np.sqrt(2.0) * c.sign * c.strength
            # phase quadrature <- x ; momentum <- amplitude quadrature
            drift[sc.start + 1, sm.start] += -g
            drift[sm.start + 1, sc.start] += -HBAR * g
        elif isinstance(c, DissipativeChannel):
            hamiltonian = False
            add_port(c.port)
            d_ff[c.port] = np.eye(2)
            for name_j, w_j in c.weights:
                sj = slices[name_j]
                b_in[c.port][sj] += complex_block(-np.conj(w_j))
                c_out[c.port][:, sj] += complex_block(w_j)
                for name_k, w_k in c.weights:
                    drift[sj, slices[name_k]] += complex_block(-0.5 * np.conj(w_j) * w_k)

    target = spec.mode(spec.force_target)
    if target.kind != "mechanical":
        raise ModelError(f"force target {spec.force_target!r} is not mechanical")
    force = np.zeros(dim)
    force[slices[target.name].start + 1] = 1.0

    return DriftModel(
        labels=tuple(labels),
        drift=_frozen(drift),
        ports=tuple(ports),
        input_coupling={p: _frozen(v) for p, v in b_in.items()},
        output_coupling={p: _frozen(v) for p, v in c_out.items()},
        feedthrough={p: _frozen(v) for p, v in d_ff.items()},
        force_column=_frozen(force),
        damping_diagonal=_frozen(np.diag(damping)),
        mode_slices=slices,
        mass=target.mass,
        gamma=spec.gamma,
        hamiltonian=hamiltonian,
    )


def hamiltonian_residual(model: DriftModel) -> float:
    """Asymmetry of ``Sigma^-1 (drift + damping)``; zero for Hamiltonian dynamics plus local loss."""
    n = model.dim // 2
    h = np.linalg.solve(symplectic_form(n), model.drift + model.damping_diagonal)
    return float(np.abs(h - h.T).max())


def eliminate_reservoir(spec: SystemSpec) -> SystemSpec:
    """Adiabatically eliminate every reservoir mode of ``spec``.

    A reservoir C with damping kappa_c and beam-splitter rates J'_k to modes X_k is
    slaved to ``C = (i sum_k J'_k X_k + sqrt(2 kappa_c) c_in) / kappa_c``.  This leaves a
    collective channel with weights ``w_k = i sqrt(2/kappa_c) J'_k``: the pair (j, k)
    acquires the dissipative coupling ``-conj(J'_j) J'_k / kappa_c`` (rate
    ``Gamma = |J'|^2 / kappa_c`` for equal magnitudes) and shares the reservoir's port.
    """
    if not spec.reservoir_modes:
        return spec
    couplings = list(spec.couplings)
    channels = []
    for r in spec.reservoir_modes:
        mode = spec.mode(r)
        if mode.damping <= 0:
            raise ModelError(f"reservoir {r!r} needs damping > 0")
        rates: dict[str, complex] = {}
        kept = []
        for c in couplings:
            if isinstance(c, Optomechanical) and c.cavity == r:
                raise ModelError(f"reservoir {r!r} carries an optomechanical coupling")
            if isinstance(c, DissipativeChannel) and any(n == r for n, _ in c.weights):
                raise ModelError(f"reservoir {r!r} already in a dissipative channel")
            if isinstance(c, BeamSplitter) and r in (c.mode_a, c.mode_b):
                if c.mode_a == r:
                    other, jp = c.mode_b, complex(c.rate)
                else:
                    other, jp = c.mode_a, complex(np.conj(c.rate))
                if other in spec.reservoir_modes:
                    raise ModelError("reservoir-reservoir couplings are not supported")
                rates[other] = rates.get(other, 0.0) + jp
                continue
            kept.append(c)
        couplings = kept
        scale = 1j * np.sqrt(2.0 / mode.damping)
        port = mode.port_name or r.lower()
        channels.append(
            DissipativeChannel(port=port, weights=tuple((k, scale * v) for k, v in rates.items()))
        )
    modes = tuple(m for m in spec.modes if m.name not in spec.reservoir_modes)
    return replace(
        spec, modes=modes, couplings=tuple(couplings) + tuple(channels), reservoir_modes=()
    )


def nonreciprocity_defect(model: DriftModel, frm: str, to: str) -> tuple[float, float]:
    """Frobenius norms of the (frm -> to) and (to -> frm) drift blocks."""
    for name in (frm, to):
        if name not in model.mode_slices:
            raise ModelError(f"mode {name!r} not in model")
    forward = float(np.linalg.norm(model.block(to, frm)))
    backward = float(np.linalg.norm(model.block(frm, to)))
    return forward, backward
