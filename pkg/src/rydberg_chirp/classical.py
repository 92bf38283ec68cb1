"""Classical dynamics of the chirp-driven Kepler problem.

The exact Hamiltonian, in the shared dimensionless units, is

    H = (p2 n0^4 / 6 q^2) [p_r^2 + p_theta^2/r^2 + p_phi^2/(r^2 sin^2 th)
        - 2/r]  +  (2 p1 / c0) cos(phi_d) r cos(theta).

The unperturbed part is a Kepler problem whose principal action I3 obeys
``E = -(p2 n0^4 / 6 q^2) / I3^2``, so I3 plays the role of a continuous
principal number and the orbital frequency matches the level-ladder
resonance frequency.  The drive force is along z, which conserves the
axial angular momentum p_phi exactly.

Integration always runs in Cartesian coordinates: spherical equations are
singular on the polar axis, which polar orbits (the natural 2:1 initial
condition) cross twice per revolution.  Spherical coordinates appear only
at the state I/O boundary.

Capture diagnostics use the energy relation only: the reported action is
``I3(tau) = sqrt(-(p2 n0^4/6 q^2)/E(tau))``, with no circularity
assumption at readout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import couplings, rk
from .errors import IntegrationError, InvalidParameterError
from .model import ProblemSpec

__all__ = [
    "ClassicalState",
    "ClassicalTrajectory",
    "EnsembleSpec",
    "EnsembleResult",
    "kinetic_scale",
    "drive_strength",
    "build_circular_orbit",
    "integrate_trajectory",
    "detect_ionization",
    "ensemble_run",
    "ensemble_to_csv",
]


def kinetic_scale(spec: ProblemSpec) -> float:
    """Prefactor of the unperturbed Hamiltonian, ``p2*n0**4/(6*q**2)``."""
    return spec.p2 * spec.n0**4 / (6.0 * spec.q**2)


def drive_strength(spec: ProblemSpec, c0: float | None = None) -> float:
    """Drive force amplitude ``2*p1/c0``; exact c0 by default."""
    if c0 is None:
        c0 = couplings.c0_exact(spec.n0, spec.q, spec.m)
    return 2.0 * spec.p1 / c0


@dataclass
class ClassicalState:
    """Spherical coordinates and conjugate momenta at one time."""

    r: float
    theta: float
    phi: float
    p_r: float
    p_theta: float
    p_phi: float
    tau: float = 0.0

    def __post_init__(self):
        if self.r <= 0:
            raise InvalidParameterError("radius must be positive")

    def to_cartesian(self) -> np.ndarray:
        """State vector (x, y, z, px, py, pz)."""
        st, ct = math.sin(self.theta), math.cos(self.theta)
        sp, cp = math.sin(self.phi), math.cos(self.phi)
        x = self.r * st * cp
        y = self.r * st * sp
        z = self.r * ct
        # p_phi / sin(theta) is an exact 0/0 for motion through the axis
        pphi_over_sin = self.p_phi / st if abs(st) > 1e-13 else 0.0
        px = self.p_r * st * cp + (self.p_theta / self.r) * ct * cp - pphi_over_sin * sp / self.r
        py = self.p_r * st * sp + (self.p_theta / self.r) * ct * sp + pphi_over_sin * cp / self.r
        pz = self.p_r * ct - (self.p_theta / self.r) * st
        return np.array([x, y, z, px, py, pz])

    @classmethod
    def from_cartesian(cls, y: np.ndarray, tau: float = 0.0) -> "ClassicalState":
        x, yy, z, px, py, pz = (float(v) for v in y)
        r = math.sqrt(x * x + yy * yy + z * z)
        theta = math.acos(max(-1.0, min(1.0, z / r)))
        phi = math.atan2(yy, x)
        st, ct = math.sin(theta), math.cos(theta)
        sp, cp = math.sin(phi), math.cos(phi)
        p_r = (x * px + yy * py + z * pz) / r
        p_theta = r * (ct * cp * px + ct * sp * py - st * pz)
        p_phi = x * py - yy * px
        return cls(r=r, theta=theta, phi=phi, p_r=p_r, p_theta=p_theta, p_phi=p_phi, tau=tau)


def unperturbed_energy(y: np.ndarray, spec: ProblemSpec) -> float:
    """Kepler energy of a Cartesian state (drive excluded)."""
    amp = kinetic_scale(spec)
    r = math.sqrt(float(y[0]) ** 2 + float(y[1]) ** 2 + float(y[2]) ** 2)
    p2 = float(y[3]) ** 2 + float(y[4]) ** 2 + float(y[5]) ** 2
    return amp * (p2 - 2.0 / r)


def action_from_energy(energy: float, spec: ProblemSpec) -> float:
    """Principal action from the energy relation; nan for unbound states."""
    if energy >= 0:
        return math.nan
    return math.sqrt(kinetic_scale(spec) / (-energy))


def build_circular_orbit(
    spec: ProblemSpec, i3: float, i1: float, phase: float = 0.0, tau: float = 0.0
) -> ClassicalState:
    """Circular Kepler orbit with principal action i3 and z-projection i1.

    The orbit radius is ``i3**2`` and the unperturbed energy matches the
    level energy at continuous n = i3; ``phase`` places the particle along
    the orbit (for a polar orbit it maps directly onto the starting polar
    angle).  Total angular momentum equals i3 (circular), tilted so its
    z component is i1.
    """
    if not 0 <= abs(i1) <= i3:
        raise InvalidParameterError(f"need |i1| <= i3, got i1={i1}, i3={i3}")
    cos_inc = i1 / i3
    sin_inc = math.sqrt(max(0.0, 1.0 - cos_inc * cos_inc))
    e1 = np.array([cos_inc, 0.0, -sin_inc])
    e2 = np.array([0.0, 1.0, 0.0])
    radius = i3 * i3
    pos = radius * (e1 * math.cos(phase) + e2 * math.sin(phase))
    mom = (1.0 / i3) * (-e1 * math.sin(phase) + e2 * math.cos(phase))
    return ClassicalState.from_cartesian(np.concatenate([pos, mom]), tau=tau)


@dataclass
class ClassicalTrajectory:
    """Sampled observables of one classical integration."""

    spec: ProblemSpec
    taus: np.ndarray
    states: np.ndarray          # (n_samples, 6) Cartesian
    energies: np.ndarray        # unperturbed energy
    i3: np.ndarray              # action from energy (nan when unbound)
    p_phi: np.ndarray
    final_state: ClassicalState
    final_energy: float
    final_i3: float
    escaped: bool
    r_escape: float
    c0: float
    n_steps: int = 0
    extras: dict = field(default_factory=dict)


def default_r_escape(spec: ProblemSpec) -> float:
    """Escape radius: 10x the outer turning radius at the sweep-end action.

    A bound orbit of action n has apoapsis at most ``2 n^2``, so the cutoff
    is ``20 * n_end^2``.  Capture/ionization fractions must be insensitive
    to the factor (5x..20x checks are part of the test suite).
    """
    return 20.0 * spec.n_end**2


def integrate_trajectory(
    state: ClassicalState,
    spec: ProblemSpec,
    tau_span: tuple[float, float] | None = None,
    c0: float | None = None,
    phi0: float = 0.0,
    n_samples: int = 1000,
    r_escape: float | None = None,
    stop_on_escape: bool = True,
    rtol: float = 1e-12,
    atol: float = 1e-14,
) -> ClassicalTrajectory:
    """Integrate the driven Hamilton equations from ``state``.

    ``phi0`` offsets the drive phase (ensembles scan it).  When the
    particle is unbound (positive Kepler energy) beyond ``r_escape`` the
    integration stops early and the remaining samples repeat the stopped
    state.  Raises :class:`IntegrationError` on a non-finite state or
    step-size underflow.
    """
    if tau_span is None:
        tau_span = (0.0, spec.tau_end)
    if r_escape is None:
        r_escape = default_r_escape(spec)
    if c0 is None:
        c0 = couplings.c0_exact(spec.n0, spec.q, spec.m)
    eps_c = 2.0 * spec.p1 / c0
    amp2 = 2.0 * kinetic_scale(spec)
    taus = np.linspace(tau_span[0], tau_span[1], n_samples)
    y0 = state.to_cartesian()
    samples, y_final, tau_final, status, n_steps = rk.integrate_orbit(
        y0, tau_span[0], tau_span[1], amp2, eps_c, spec.omega0, phi0,
        rtol, atol, taus, r_escape, stop_on_escape,
    )
    if status == rk.STATUS_FAILED:
        raise IntegrationError(
            f"orbit integration failed at tau={tau_final:.3f} "
            f"(started from r={state.r:.3f})"
        )
    amp = 0.5 * amp2
    r = np.sqrt((samples[:, :3] ** 2).sum(axis=1))
    p2 = (samples[:, 3:] ** 2).sum(axis=1)
    energies = amp * (p2 - 2.0 / r)
    with np.errstate(invalid="ignore", divide="ignore"):
        i3 = np.where(energies < 0, np.sqrt(amp / np.abs(energies)), np.nan)
    p_phi = samples[:, 0] * samples[:, 4] - samples[:, 1] * samples[:, 3]
    final_energy = float(amp * ((y_final[3:] ** 2).sum() - 2.0 / np.linalg.norm(y_final[:3])))
    return ClassicalTrajectory(
        spec=spec,
        taus=taus,
        states=samples,
        energies=energies,
        i3=i3,
        p_phi=p_phi,
        final_state=ClassicalState.from_cartesian(y_final, tau=float(tau_final)),
        final_energy=final_energy,
        final_i3=action_from_energy(final_energy, spec),
        escaped=(status == rk.STATUS_ESCAPED),
        r_escape=r_escape,
        c0=c0,
        n_steps=int(n_steps),
    )


def detect_ionization(traj: ClassicalTrajectory) -> bool:
    """True when the electron left the atom.

    Either the unperturbed energy is positive at the final time, or the
    radius crossed the escape cutoff while unbound (which stops the
    integration early).  Deterministic.
    """
    return bool(traj.escaped or traj.final_energy > 0.0)


@dataclass(frozen=True)
class EnsembleSpec:
    """Deterministic trajectory ensemble over one scanned variable.

    ``scan='drive_phase'`` varies the initial drive phase uniformly over
    [0, 2pi); ``scan='theta'`` varies the starting position angle of a
    polar orbit uniformly over (0, pi) at midpoints.  Grids are even and
    deterministic, so runs are reproducible without seed management.
    """

    count: int
    i3: float
    i1: float
    scan: str = "drive_phase"

    def __post_init__(self):
        if self.count < 1:
            raise InvalidParameterError("ensemble count must be >= 1")
        if self.scan not in ("drive_phase", "theta"):
            raise InvalidParameterError(f"unknown scan variable {self.scan!r}")

    def scan_values(self) -> np.ndarray:
        if self.scan == "drive_phase":
            return 2.0 * math.pi * np.arange(self.count) / self.count
        return math.pi * (np.arange(self.count) + 0.5) / self.count


@dataclass
class EnsembleResult:
    spec: ProblemSpec
    ensemble: EnsembleSpec
    i3_threshold: float
    scan_values: np.ndarray
    final_i3: np.ndarray
    final_energy: np.ndarray
    ionized: np.ndarray
    captured: np.ndarray
    failures: int
    captured_fraction: float
    ionized_fraction: float
    energy_samples: np.ndarray | None = None
    sample_taus: np.ndarray | None = None

    def summary(self) -> dict:
        return {
            "captured_fraction": self.captured_fraction,
            "ionized_fraction": self.ionized_fraction,
            "neither_fraction": 1.0 - self.captured_fraction - self.ionized_fraction,
            "failures": self.failures,
            "count": self.ensemble.count,
            "i3_threshold": self.i3_threshold,
        }


def ensemble_run(
    spec: ProblemSpec,
    ens: EnsembleSpec,
    i3_threshold: float,
    c0: float | None = None,
    record_energies: bool = False,
    n_samples: int = 400,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    r_escape: float | None = None,
) -> EnsembleResult:
    """Run all ensemble members and reduce to capture/ionization fractions.

    Members are mutually exclusive per trajectory: ionized first, then
    captured (final action above threshold), else neither.  Per-trajectory
    integration failures are counted, excluded from the fractions'
    numerators, and never abort the ensemble.
    """
    if c0 is None:
        c0 = couplings.c0_exact(spec.n0, spec.q, spec.m)
    values = ens.scan_values()
    final_i3 = np.full(ens.count, np.nan)
    final_energy = np.full(ens.count, np.nan)
    ionized = np.zeros(ens.count, dtype=bool)
    captured = np.zeros(ens.count, dtype=bool)
    ok = np.zeros(ens.count, dtype=bool)
    energy_samples = None
    sample_taus = None
    failures = 0
    for idx, value in enumerate(values):
        if ens.scan == "drive_phase":
            state = build_circular_orbit(spec, ens.i3, ens.i1, phase=0.0)
            phi0 = float(value)
        else:
            state = build_circular_orbit(spec, ens.i3, ens.i1, phase=float(value))
            phi0 = 0.0
        try:
            traj = integrate_trajectory(
                state,
                spec,
                c0=c0,
                phi0=phi0,
                n_samples=n_samples if record_energies else 2,
                rtol=rtol,
                atol=atol,
                r_escape=r_escape,
            )
        except IntegrationError:
            failures += 1
            continue
        ok[idx] = True
        final_i3[idx] = traj.final_i3
        final_energy[idx] = traj.final_energy
        ionized[idx] = detect_ionization(traj)
        captured[idx] = (not ionized[idx]) and traj.final_i3 > i3_threshold
        if record_energies:
            if energy_samples is None:
                energy_samples = np.full((ens.count, n_samples), np.nan)
                sample_taus = traj.taus
            energy_samples[idx] = traj.energies
    return EnsembleResult(
        spec=spec,
        ensemble=ens,
        i3_threshold=i3_threshold,
        scan_values=values,
        final_i3=final_i3,
        final_energy=final_energy,
        ionized=ionized,
        captured=captured,
        failures=failures,
        captured_fraction=float(captured.sum()) / ens.count,
        ionized_fraction=float(ionized.sum()) / ens.count,
        energy_samples=energy_samples,
        sample_taus=sample_taus,
    )


def ensemble_to_csv(result: EnsembleResult, path: str) -> None:
    """One row per trajectory: scan value, final action, energy, ionized flag."""
    with open(path, "w") as fh:
        fh.write("scan_value,final_i3,final_energy,ionized\n")
        for i in range(result.ensemble.count):
            fh.write(
                f"{result.scan_values[i]!r},{result.final_i3[i]!r},"
                f"{result.final_energy[i]!r},{int(result.ionized[i])}\n"
            )
