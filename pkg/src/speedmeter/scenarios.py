"""Canonical speed- and position-meter systems, comparisons and cross-checks.

The speed meter uses two signal cavities A, B (bandwidth ``KAPPA``) and a strongly
damped reservoir C.  Its dissipative A-B rate is ``Gamma = KAPPA``: this is the
value for which the closed-form matrices have all their poles at ``omega = -i``.
C couples to the combination ``A - B``; together with ``J = i Gamma`` this gives
the drift pattern ``(iJ + Gamma)``, ``-(iJ - Gamma)`` with unidirectional A -> B
coupling.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.typing import NDArray

from . import closedform
from .freqsolve import (
    DEFAULT_GRID,
    FrequencyGrid,
    TransferSet,
    as_omegas,
    commutator_defect,
    solve_transfer,
)
from .spectra import (
    VACUUM,
    NoiseModel,
    ReadoutPlan,
    SpectrumResult,
    canonical_plan,
    closed_form_gains,
    conditional_psd,
    force_psd,
    readout_psd,
    assemble_spectrum,
    residual_psd,
    wiener_filters,
)
from .sysmodel import (
    HBAR,
    KAPPA,
    BeamSplitter,
    ModeSpec,
    Optomechanical,
    SystemSpec,
    build_drift,
    complex_block,
    eliminate_reservoir,
)

GAMMA_DISSIPATIVE = KAPPA
NOMINAL_KAPPA_C = 1e3
MARKOV_RATIO = 10.0

Route = Literal["firstPrinciples", "closedForm"]


def optomechanical_strength(gamma: float, mass: float = 1.0) -> float:
    """alpha = sqrt(Theta m / 2 hbar) with Theta = 8 kappa^3 gamma."""
    theta = 8 * KAPPA**3 * gamma
    return float(np.sqrt(theta * mass / (2 * HBAR)))


def speed_meter_system(
    gamma: float,
    kappa_c: float | None = None,
    *,
    coherent_rate: complex | None = None,
    mass: float = 1.0,
) -> SystemSpec:
    """Reservoir-engineered speed meter.

    Without ``kappa_c`` the reservoir is eliminated (two cavities plus mechanics);
    with it the full three-cavity spec is returned, reservoir marked for elimination.
    """
    if kappa_c is not None:
        if not (np.isfinite(kappa_c) and kappa_c > 0):
            raise ValueError("kappa_c must be finite and > 0")
    if not (np.isfinite(gamma) and gamma >= 0):
        raise ValueError("gamma must be finite and >= 0")
    kc = NOMINAL_KAPPA_C if kappa_c is None else float(kappa_c)
    J = 1j * GAMMA_DISSIPATIVE if coherent_rate is None else complex(coherent_rate)
    jp = np.sqrt(GAMMA_DISSIPATIVE * kc)
    alpha = optomechanical_strength(gamma, mass)
    modes = (
        ModeSpec("A", "cavity", KAPPA),
        ModeSpec("B", "cavity", KAPPA),
        ModeSpec("C", "cavity", kc),
        ModeSpec("x", "mechanical", mass=mass),
    )
    couplings = (
        BeamSplitter("A", "B", J),
        BeamSplitter("C", "A", jp),
        BeamSplitter("C", "B", -jp),
        Optomechanical("A", "x", alpha, +1),
        Optomechanical("B", "x", alpha, -1),
    )
    with warnings.catch_warnings():
        if kappa_c is None:
            warnings.simplefilter("ignore")
        spec = SystemSpec(modes, couplings, reservoir_modes=("C",), force_target="x", gamma=gamma)
    if kappa_c is None:
        return eliminate_reservoir(spec)
    others = max(KAPPA, GAMMA_DISSIPATIVE, abs(J), alpha)
    if kc <= MARKOV_RATIO * others:
        warnings.warn(f"kappa_c={kc} is not > {MARKOV_RATIO}x the other rates", stacklevel=2)
    return spec


PM_COUPLING_SCALE = float(np.sqrt(2.0))


def position_meter_system(gamma: float, *, coupling_scale: float = PM_COUPLING_SCALE, mass: float = 1.0) -> SystemSpec:
    """Single cavity A on a free mass with coupling ``coupling_scale * alpha``.

    ``alpha`` is the speed meter's per-cavity coupling at the same gamma.  The default
    scale sqrt(2) reproduces the published single-cavity transfer matrix and signal
    vector, whose DC force noise is ``4 gamma / omega^2``; a scale of 2 (literally
    doubled coupling) doubles the back-action term instead.
    """
    if not (np.isfinite(gamma) and gamma >= 0):
        raise ValueError("gamma must be finite and >= 0")
    alpha = optomechanical_strength(gamma, mass)
    modes = (ModeSpec("A", "cavity", KAPPA), ModeSpec("x", "mechanical", mass=mass, resonance=0.0))
    return SystemSpec(modes, (Optomechanical("A", "x", coupling_scale * alpha, +1),), gamma=gamma)


def speed_meter_transfers(gamma, grid, kappa_c=None) -> TransferSet:
    spec = speed_meter_system(gamma, kappa_c)
    return solve_transfer(build_drift(spec), grid)


def position_meter_transfers(gamma, grid, coupling_scale: float = PM_COUPLING_SCALE) -> TransferSet:
    return solve_transfer(build_drift(position_meter_system(gamma, coupling_scale=coupling_scale)), grid)


# -- scenario runs --------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioConfig:
    gamma: float
    grid: FrequencyGrid = DEFAULT_GRID
    noise: NoiseModel = VACUUM
    plan: ReadoutPlan = field(default_factory=canonical_plan)
    route: Route = "firstPrinciples"
    kappa_c: float | None = None

    def __post_init__(self):
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise ValueError("gamma must be finite and > 0")
        if self.route not in ("firstPrinciples", "closedForm"):
            raise ValueError(f"unknown route {self.route!r}")


def _eq14_result(gamma, omegas, noise: NoiseModel) -> SpectrumResult:
    k = closedform.conditional_coeffs(gamma, omegas)
    z = np.zeros_like(k["a1"])
    rows = np.stack([k["a1"], k["a2"], z, k["b2"], k["c1"], z], axis=1)
    return assemble_spectrum(omegas, ("a", "b", "c"), noise, rows, k["force"])


def run_speed_meter(config: ScenarioConfig) -> SpectrumResult:
    plan = config.plan
    if config.route == "closedForm":
        w = config.grid.points
        if plan.feedforward == "off" or not plan.auxiliaries:
            return force_psd(closedform.printed_speedmeter_transfers(config.gamma, w), config.noise, plan)
        return _eq14_result(config.gamma, w, config.noise)
    transfers = speed_meter_transfers(config.gamma, config.grid, config.kappa_c)
    return readout_psd(transfers, config.noise, plan)


def position_plan() -> ReadoutPlan:
    return ReadoutPlan("a", 0.0, (), "off")


def run_position_meter(config: ScenarioConfig) -> SpectrumResult:
    """Single-cavity readout at the plan's numeric angle, or phi = 0 when it is 'opt'."""
    angle = config.plan.signal_angle
    plan = position_plan() if angle == "opt" else ReadoutPlan("a", angle)
    if config.route == "closedForm":
        transfers = closedform.printed_positionmeter_transfers(config.gamma, config.grid)
    else:
        transfers = position_meter_transfers(config.gamma, config.grid)
    return force_psd(transfers, config.noise, plan)


@dataclass(frozen=True)
class ComparisonResult:
    omegas: NDArray[np.float64]
    s_sm: NDArray[np.float64]
    s_pm: NDArray[np.float64]

    @property
    def sm_better(self) -> NDArray[np.bool_]:
        return self.s_sm < self.s_pm

    @property
    def verdicts(self) -> list[str]:
        return ["SM<PM" if b else "SM>=PM" for b in self.sm_better]


def compare_meters(gamma: float, grid: FrequencyGrid = DEFAULT_GRID, route: Route = "firstPrinciples") -> ComparisonResult:
    """Speed meter (conditional readout) against the position meter read at phi = 0.

    The closed-form route evaluates the two published spectra directly.
    """
    w = as_omegas(grid)
    if route == "closedForm":
        return ComparisonResult(w, closedform.speed_spectrum(gamma, w), closedform.position_spectrum(gamma, w))
    sm = readout_psd(speed_meter_transfers(gamma, w), VACUUM, canonical_plan("wiener"))
    pm = force_psd(position_meter_transfers(gamma, w), VACUUM, position_plan())
    return ComparisonResult(w, sm.total, pm.total)


def adiabatic_deviation(gamma: float, kappa_c: float, grid=DEFAULT_GRID) -> float:
    """Max relative PSD deviation between the full three-cavity model and the eliminated one."""
    plan = canonical_plan("wiener")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        full = readout_psd(solve_transfer(build_drift(speed_meter_system(gamma, kappa_c)), grid), VACUUM, plan)
    elim = readout_psd(speed_meter_transfers(gamma, grid), VACUUM, plan)
    return float(np.max(np.abs(full.total - elim.total) / elim.total))


# -- consistency report ----------------------------------------------------------


@dataclass(frozen=True)
class CheckRecord:
    name: str
    route_a: str
    route_b: str
    max_rel_deviation: float
    location_omega: float
    tolerance: float
    details: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return "agree" if self.max_rel_deviation <= self.tolerance else "deviate"


@dataclass(frozen=True)
class ConsistencyReport:
    gamma: float
    records: tuple[CheckRecord, ...]

    def __getitem__(self, name: str) -> CheckRecord:
        for r in self.records:
            if r.name == name:
                return r
        raise KeyError(name)

    @property
    def names(self) -> list[str]:
        return [r.name for r in self.records]


def _rel(a, b):
    return np.abs(a - b) / np.abs(b)


def _worst(dev, w):
    k = int(np.nanargmax(dev))
    return float(dev[k]), float(w[k])


def check_eq14_vs_eq16(gamma, w) -> CheckRecord:
    dev = _rel(closedform.conditional_psd_closed(gamma, w), closedform.speed_spectrum(gamma, w))
    m, loc = _worst(dev, w)
    ref = np.array([1e-3, 1.0])
    e14 = closedform.conditional_psd_closed(gamma, ref)
    e16 = closedform.speed_spectrum(gamma, ref)
    return CheckRecord(
        "a_conditional_coeffs_vs_speed_spectrum",
        "filtered-output coefficients through the PSD ratio",
        "published speed-meter spectrum",
        m, loc, 1e-5,
        {"rel_dev_at_omega_1e-3": float(abs(e14[0] - e16[0]) / e16[0]), "ratio_at_omega_1": float(e14[1] / e16[1])},
    )


def _quarter_turns(n):
    return itertools.product(range(4), repeat=n)


def fit_port_gauge(fp: TransferSet, printed: TransferSet, omega_ref: float = 1.0) -> dict[str, int]:
    """Quarter-turn quadrature rotation per port (i^k phase) best aligning ``fp`` with ``printed`` at one frequency."""
    a = np.array([omega_ref])
    ports = sorted(set(printed.out_ports) | set(printed.in_ports))
    fpk = fp.select(printed.out_ports)
    best, best_k = np.inf, None
    for ks in _quarter_turns(len(ports)):
        gauge = dict(zip(ports, ks))
        S, t = _apply_gauge(fpk, gauge, omegas=a)
        S_ref, t_ref = _printed_at(printed, a)
        err = np.abs(S - S_ref).max() + np.abs(t - t_ref).max()
        if err < best - 1e-12:
            best, best_k = err, gauge
    return best_k


def _printed_at(printed: TransferSet, omegas):
    k = [int(np.argmin(np.abs(printed.omegas - w))) for w in omegas]
    return printed.scattering[k], printed.force[k]


def _gauge_block(ports, gauge, inverse=False):
    blocks = [complex_block((1j) ** (-gauge[p] if inverse else gauge[p])) for p in ports]
    out = np.zeros((2 * len(ports), 2 * len(ports)))
    for i, b in enumerate(blocks):
        out[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = b
    return out


def _apply_gauge(ts: TransferSet, gauge, omegas=None):
    if omegas is not None:
        k = [int(np.argmin(np.abs(ts.omegas - w))) for w in omegas]
        S, t = ts.scattering[k], ts.force[k]
    else:
        S, t = ts.scattering, ts.force
    G_out = _gauge_block(ts.out_ports, gauge)
    G_in = _gauge_block(ts.in_ports, gauge, inverse=True)
    return G_out @ S @ G_in, t @ G_out.T


def _relative_matrix_dev(S, t, S_ref, t_ref):
    diff = np.maximum(np.abs(S - S_ref).max(axis=(1, 2)), np.abs(t - t_ref).max(axis=1))
    scale = np.maximum(np.abs(S_ref).max(axis=(1, 2)), np.abs(t_ref).max(axis=1))
    return diff / scale


def check_bport_vs_printed(gamma, w) -> CheckRecord:
    grid = np.union1d(w, [1.0])
    fp = speed_meter_transfers(gamma, grid)
    printed = closedform.printed_speedmeter_transfers(gamma, grid)
    gauge = fit_port_gauge(fp, printed, 1.0)
    S, t = _apply_gauge(fp.select(("b",)), gauge)
    dev = _relative_matrix_dev(S, t, printed.scattering, printed.force)
    keep = np.isin(grid, w)
    m, loc = _worst(dev[keep], grid[keep])
    entry = np.abs(S - printed.scattering)[keep].max(axis=0)
    worst = np.unravel_index(np.argmax(entry), entry.shape)
    labels = ["D_d", "D_d", "D_e", "D_e", "D_c", "D_c"]
    corrected = closedform.printed_speedmeter_transfers(gamma, grid, corrected=True)
    dev_c = _relative_matrix_dev(S, t, corrected.scattering, corrected.force)[keep]
    return CheckRecord(
        "b_first_principles_vs_printed_bport",
        "first-principles B-port scattering (gauge fitted at omega=1)",
        "printed B-port coefficient matrices and signal vector",
        m, loc, 1e-9,
        {
            "gauge_quarter_turns": dict(gauge),
            "worst_entry": f"{labels[worst[1]]}[{worst[0] + 1},{worst[1] % 2 + 1}]",
            "max_rel_dev_with_corrected_drive_entry": float(dev_c.max()),
        },
    )


def check_positionmeter_vs_eq17(gamma, w) -> CheckRecord:
    appb = closedform.positionmeter_psd(gamma, w, 0.0)
    eq17 = closedform.position_spectrum(gamma, w)
    m, loc = _worst(_rel(appb, eq17), w)
    w0 = w[:1]
    dc_law = 4 * gamma / w0**2
    return CheckRecord(
        "c_positionmeter_matrices_vs_position_spectrum",
        "single-cavity matrices through the PSD ratio (phi=0)",
        "published position-meter spectrum",
        m, loc, 1e-5,
        {
            "omega_dc": float(w0[0]),
            "dc_ratio_matrices_over_spectrum": float(appb[0] / eq17[0]),
            "matrices_rel_dev_from_4gamma_over_omega2": float(abs(closedform.positionmeter_psd(gamma, w0)[0] - dc_law[0]) / dc_law[0]),
            "spectrum_rel_dev_from_4gamma_over_omega2": float(abs(eq17[0] - dc_law[0]) / dc_law[0]),
        },
    )


def check_printed_commutator(gamma, w) -> CheckRecord:
    defect = commutator_defect(closedform.printed_speedmeter_transfers(gamma, w))
    m, loc = _worst(defect, w)
    fixed = commutator_defect(closedform.printed_speedmeter_transfers(gamma, w, corrected=True))
    mimo = commutator_defect(closedform.printed_mimo_transfers(gamma, w))
    mimo_fixed = commutator_defect(closedform.printed_mimo_transfers(gamma, w, relabel=True, corrected=True))
    return CheckRecord(
        "d_printed_matrix_commutator_defect",
        "printed B-port matrix set",
        "commutator preservation (S Lambda S^dag = Lambda)",
        m, loc, 1e-9,
        {
            "defect_with_corrected_drive_entry": float(fixed.max()),
            "defect_full_printed_mimo": float(mimo.max()),
            "defect_full_printed_mimo_relabelled_and_corrected": float(mimo_fixed.max()),
        },
    )


def zero_forcing_gains(transfers: TransferSet, plan: ReadoutPlan) -> NDArray[np.complex128]:
    """Gains that remove the B-amplitude and C-phase input noise from the signal exactly."""
    from .spectra import _aux_rows, _readout

    y, _ = _readout(transfers, plan.signal_port, plan.angle(transfers.gamma))
    Z, _ = _aux_rows(transfers, plan)
    ib = 2 * transfers.in_ports.index("b")
    ic = 2 * transfers.in_ports.index("c") + 1
    M = Z[:, :, [ib, ic]]
    return np.linalg.solve(np.swapaxes(M, 1, 2), y[:, [ib, ic]][..., None])[..., 0]


def check_wiener_vs_printed(gamma, w) -> CheckRecord:
    grid = np.union1d(w, [1.0])
    ts = speed_meter_transfers(gamma, grid)
    plan = canonical_plan("wiener")
    gw = wiener_filters(ts, VACUUM, plan)
    gp = closed_form_gains(ts, plan)
    gz = zero_forcing_gains(ts, plan)
    dev = np.abs(gw - gp).max(axis=1) / np.abs(gp).max(axis=1)
    keep = np.isin(grid, w)
    m, loc = _worst(dev[keep], grid[keep])
    k1 = int(np.argmin(np.abs(grid - 1.0)))
    res_w = residual_psd(ts, VACUUM, plan, gw)
    res_p = residual_psd(ts, VACUUM, plan, gp)
    zf_dev = np.abs(gz - gp).max(axis=1) / np.abs(gp).max(axis=1)
    return CheckRecord(
        "e_wiener_gains_vs_printed_filters",
        "numerically optimal (minimum residual) gains",
        "printed feed-forward filters",
        m, loc, 1e-6,
        {
            "printed_filters_equal_zero_forcing_rel_dev": float(zf_dev[keep].max()),
            "residual_ratio_printed_over_wiener_at_omega_1": float(res_p[k1] / res_w[k1]),
            "wiener_never_worse": bool(np.all(res_w <= res_p * (1 + 1e-12))),
        },
    )


def check_first_principles_vs_eq14(gamma, w) -> CheckRecord:
    ts = speed_meter_transfers(gamma, w)
    zf = conditional_psd(ts, VACUUM, canonical_plan("closed-form")).total
    eq14 = closedform.conditional_psd_closed(gamma, w)
    m, loc = _worst(_rel(zf, eq14), w)
    eq16_dev, eq16_loc = _worst(_rel(zf, closedform.speed_spectrum(gamma, w)), w)
    wiener = conditional_psd(ts, VACUUM, canonical_plan("wiener")).total
    return CheckRecord(
        "f_first_principles_filtered_psd_vs_conditional_coeffs",
        "first-principles solve with the printed filters",
        "filtered-output coefficients through the PSD ratio",
        m, loc, 1e-9,
        {
            "max_rel_dev_vs_speed_spectrum": eq16_dev,
            "omega_of_max_dev_vs_speed_spectrum": eq16_loc,
            "wiener_over_printed_filters_max": float(np.max(wiener / zf)),
        },
    )


def check_mimo_vs_printed(gamma, w) -> CheckRecord:
    fp = speed_meter_transfers(gamma, w)
    out = {}
    for relabel in (False, True):
        pr = closedform.printed_mimo_transfers(gamma, w, relabel=relabel)
        dev = _relative_matrix_dev(fp.scattering, fp.force, pr.scattering, pr.force)
        out[relabel] = dev
    pr = closedform.printed_mimo_transfers(gamma, w, relabel=True, corrected=True)
    corrected = _relative_matrix_dev(fp.scattering, fp.force, pr.scattering, pr.force)
    m, loc = _worst(out[False], w)
    return CheckRecord(
        "g_first_principles_vs_printed_auxiliary_ports",
        "first-principles A/B/C-port scattering",
        "printed auxiliary-port relations (labels as printed)",
        m, loc, 1e-9,
        {
            "max_rel_dev_relabelled": float(out[True].max()),
            "max_rel_dev_relabelled_and_corrected_drive_entry": float(corrected.max()),
        },
    )


def check_positionmeter_first_principles(gamma, w) -> CheckRecord:
    fp = position_meter_transfers(gamma, w)
    pr = closedform.printed_positionmeter_transfers(gamma, w)
    m, loc = _worst(_relative_matrix_dev(fp.scattering, fp.force, pr.scattering, pr.force), w)
    doubled = position_meter_transfers(gamma, w, coupling_scale=2.0)
    ba_ratio = np.abs(doubled.scattering[:, 1, 0] / pr.scattering[:, 1, 0])
    return CheckRecord(
        "h_first_principles_vs_printed_positionmeter",
        f"first-principles single cavity, coupling {PM_COUPLING_SCALE:.6f}*alpha",
        "printed single-cavity transfer matrix and signal vector",
        m, loc, 1e-9,
        {
            "coupling_scale": PM_COUPLING_SCALE,
            "backaction_ratio_doubled_coupling_over_printed": float(ba_ratio.mean()),
            "cavity_rate_used_for_printed_damping_symbol": KAPPA,
        },
    )


CHECKS = (
    check_eq14_vs_eq16,
    check_bport_vs_printed,
    check_positionmeter_vs_eq17,
    check_printed_commutator,
    check_wiener_vs_printed,
    check_first_principles_vs_eq14,
    check_mimo_vs_printed,
    check_positionmeter_first_principles,
)


def consistency_report(gamma: float, grid: FrequencyGrid = DEFAULT_GRID) -> ConsistencyReport:
    w = as_omegas(grid)
    return ConsistencyReport(float(gamma), tuple(check(gamma, w) for check in CHECKS))
