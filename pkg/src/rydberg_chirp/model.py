"""Dimensionless model of a hydrogenic atom driven by a down-chirped field.

The drive has constant amplitude and a linearly falling frequency.  All
dynamics in this package are expressed in the dimensionless time
``tau = t*sqrt(alpha)`` (``alpha`` is the chirp rate) and are controlled by
two numbers:

* ``p1`` -- drive strength, the ratio of the frequency-sweep time scale to
  the Rabi time scale of the root transition,
* ``p2`` -- nonlinearity, the ratio of the level-anharmonicity time scale
  to the sweep time scale.

In these units the bound-level energies are ``E_n = -p2*n0**4/(6*q**2*n**2)``
and the instantaneous drive frequency is ``omega0 - tau``.  The resonance
of interest couples ``n -> n+q`` with ``l -> l+1`` (a q:1 ratio between the
drive and the Keplerian orbital frequency), so the drive window is fixed by
two principal numbers ``n_start < n0`` and ``n_end > n0`` at which the sweep
begins and ends on resonance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConvergenceError, DomainError, InvalidParameterError

__all__ = [
    "QuantumLevel",
    "Tolerances",
    "PhysicalParams",
    "ProblemSpec",
    "to_dimensionless",
    "from_dimensionless",
    "dimensionless_energy",
    "level_gap",
    "resonant_frequency",
    "drive_frequency",
    "drive_phase",
    "crossing_time",
    "resonant_n_at",
    "resonant_energy_curve",
    "min_nonmixing_n",
]


@dataclass(frozen=True, order=True)
class QuantumLevel:
    """A hydrogenic level ``(n, l, m)`` with the usual constraints."""

    n: int
    l: int
    m: int

    def __post_init__(self):
        if self.n < 1:
            raise InvalidParameterError(f"n must be >= 1, got {self.n}")
        if not 0 <= self.l <= self.n - 1:
            raise InvalidParameterError(
                f"l must satisfy 0 <= l <= n-1, got l={self.l} for n={self.n}"
            )
        if abs(self.m) > self.l:
            raise InvalidParameterError(
                f"|m| must not exceed l, got m={self.m} for l={self.l}"
            )

    @property
    def is_circular(self) -> bool:
        """True for a circular state, i.e. maximal orbital number l = n-1."""
        return self.l == self.n - 1


@dataclass(frozen=True)
class Tolerances:
    """Solver tolerance bundle carried by a :class:`ProblemSpec`.

    ``rtol``/``atol`` control the ODE integrators, ``norm`` is the allowed
    total norm drift over a full sweep, and ``boundary`` is the maximum
    population allowed at a truncated basis edge.  The integration defaults
    are set so the norm-conservation contract (drift < ``norm`` over the
    longest sweep) holds with margin; loosen them only for exploratory runs.
    """

    rtol: float = 1e-12
    atol: float = 1e-12
    norm: float = 1e-6
    boundary: float = 1e-3

    def __post_init__(self):
        for name in ("rtol", "atol", "norm", "boundary"):
            if getattr(self, name) <= 0:
                raise InvalidParameterError(f"tolerance {name} must be positive")


@dataclass(frozen=True)
class PhysicalParams:
    """Dimensional description of the driven atom.

    ``epsilon`` is the drive amplitude in energy units (the normalization of
    the dimensionless dipole operator is absorbed into it), ``alpha`` the
    chirp rate (frequency^2), ``rydberg`` the binding-energy scale, ``n0``
    the initial principal number, ``q`` the resonance order and ``m`` the
    conserved magnetic number.
    """

    epsilon: float
    alpha: float
    hbar: float
    rydberg: float
    n0: int
    q: int = 1
    m: int = 0

    def __post_init__(self):
        if self.alpha <= 0:
            raise InvalidParameterError("chirp rate alpha must be positive")
        if self.epsilon < 0:
            raise InvalidParameterError("drive amplitude epsilon must be >= 0")
        if self.rydberg <= 0 or self.hbar <= 0:
            raise InvalidParameterError("rydberg and hbar must be positive")
        if self.n0 < 1 or self.q < 1:
            raise InvalidParameterError("n0 and q must be positive integers")

    def energy(self, n: int) -> float:
        """Unperturbed level energy ``-rydberg / n**2``."""
        return -self.rydberg / n**2

    @property
    def sweep_time(self) -> float:
        """Frequency-sweep time scale ``alpha**-0.5``."""
        return self.alpha**-0.5

    def rabi_time(self, c0: float) -> float:
        """Rabi time scale ``2*hbar/(c0*epsilon)`` of the root transition."""
        return 2.0 * self.hbar / (c0 * self.epsilon)

    @property
    def nonlinearity_time(self) -> float:
        """Time between the first two resonance crossings, ``q**2*|E''(n0)|/(hbar*alpha)``."""
        d2e = 6.0 * self.rydberg / self.n0**4
        return self.q**2 * d2e / (self.hbar * self.alpha)


@dataclass(frozen=True)
class ProblemSpec:
    """Dimensionless problem definition consumed by every solver."""

    p1: float
    p2: float
    q: int
    n0: int
    m: int
    n_start: int
    n_end: int
    n_th: int
    tolerances: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        if self.p1 < 0:
            raise InvalidParameterError("p1 must be >= 0")
        if self.p2 <= 0:
            raise InvalidParameterError("p2 must be positive")
        if self.q < 1:
            raise InvalidParameterError("q must be >= 1")
        # the initial state (n0, n0-1, m) must be a valid circular level
        QuantumLevel(self.n0, self.n0 - 1, self.m)
        if not self.n_start < self.n0 < self.n_th < self.n_end:
            raise InvalidParameterError(
                "sweep protocol requires n_start < n0 < n_th < n_end, got "
                f"{self.n_start} < {self.n0} < {self.n_th} < {self.n_end}"
            )

    def with_drive(self, p1: float, p2: float) -> "ProblemSpec":
        """Copy of this spec at a different point of the (p1, p2) plane."""
        return replace(self, p1=p1, p2=p2)

    @property
    def omega0(self) -> float:
        """Initial drive frequency, on resonance at ``n_start``."""
        return resonant_frequency(self.n_start, self)

    @property
    def tau_end(self) -> float:
        """Sweep duration: the drive reaches resonance at ``n_end``."""
        return self.omega0 - resonant_frequency(self.n_end, self)

    @property
    def energy_scale(self) -> float:
        """|E(n0)|, used to normalize reported energies."""
        return abs(dimensionless_energy(self.n0, self))


def to_dimensionless(
    params: PhysicalParams,
    c0: float,
    n_start: int | None = None,
    n_end: int | None = None,
    n_th: int | None = None,
    tolerances: Tolerances | None = None,
) -> ProblemSpec:
    """Map dimensional parameters to the (p1, p2) description.

    ``c0`` is the dipole matrix element of the root transition (see the
    couplings module); it normalizes the drive strength.  Sweep endpoints
    default to the standard protocol ``n_start = 0.75*n0``,
    ``n_end = 1.5*n0`` with the success threshold halfway up.
    """
    if c0 <= 0:
        raise InvalidParameterError("c0 must be positive")
    sqrt_alpha = math.sqrt(params.alpha)
    p1 = c0 * params.epsilon / (2.0 * params.hbar * sqrt_alpha)
    p2 = 6.0 * params.q**2 * params.rydberg / (params.hbar * sqrt_alpha * params.n0**4)
    n_start = int(round(0.75 * params.n0)) if n_start is None else n_start
    n_end = int(round(1.5 * params.n0)) if n_end is None else n_end
    n_th = (params.n0 + n_end) // 2 if n_th is None else n_th
    return ProblemSpec(
        p1=p1,
        p2=p2,
        q=params.q,
        n0=params.n0,
        m=params.m,
        n_start=n_start,
        n_end=n_end,
        n_th=n_th,
        tolerances=tolerances or Tolerances(),
    )


def from_dimensionless(
    spec: ProblemSpec, c0: float, hbar: float, rydberg: float
) -> PhysicalParams:
    """Inverse of :func:`to_dimensionless` at fixed ``hbar`` and ``rydberg``."""
    if c0 <= 0:
        raise InvalidParameterError("c0 must be positive")
    sqrt_alpha = 6.0 * spec.q**2 * rydberg / (hbar * spec.p2 * spec.n0**4)
    epsilon = 2.0 * hbar * sqrt_alpha * spec.p1 / c0
    return PhysicalParams(
        epsilon=epsilon,
        alpha=sqrt_alpha**2,
        hbar=hbar,
        rydberg=rydberg,
        n0=spec.n0,
        q=spec.q,
        m=spec.m,
    )


def dimensionless_energy(n, spec: ProblemSpec):
    """Bound-level energy ``-p2*n0**4 / (6*q**2*n**2)``.

    Strictly increasing in ``n`` and negative for every bound level.
    Accepts scalars or numpy arrays; continuous ``n`` is meaningful (the
    same formula defines the classical energy at principal action ``n``).
    """
    if np.any(np.asarray(n) < 1):
        raise DomainError(f"principal number must be >= 1, got {n}")
    return -spec.p2 * spec.n0**4 / (6.0 * spec.q**2 * np.asarray(n, dtype=float) ** 2)


def level_gap(n: int, dn: int, spec: ProblemSpec) -> float:
    """Exact energy gap ``E(n+dn) - E(n)`` between bound levels."""
    return float(dimensionless_energy(n + dn, spec) - dimensionless_energy(n, spec))


def resonant_frequency(n, spec: ProblemSpec):
    """Resonance frequency ``q * dE/dn = p2*n0**4 / (3*q*n**3)``.

    This is the continuous-in-n form used to define the sweep endpoints and
    the resonant-energy curve.  Exact two-level crossings use
    :func:`crossing_time` instead.
    """
    if np.any(np.asarray(n) <= 0):
        raise DomainError(f"principal number must be positive, got {n}")
    return spec.p2 * spec.n0**4 / (3.0 * spec.q * np.asarray(n, dtype=float) ** 3)


def drive_frequency(tau, spec: ProblemSpec):
    """Instantaneous drive frequency ``omega0 - tau`` (down-chirp)."""
    return spec.omega0 - tau


def drive_phase(tau, spec: ProblemSpec):
    """Accumulated drive phase ``omega0*tau - tau**2/2`` with phase 0 at tau=0."""
    return spec.omega0 * tau - 0.5 * tau * tau


def crossing_time(n: int, q: int, spec: ProblemSpec) -> float:
    """Time at which the drive crosses the exact ``n -> n+q`` gap.

    Uses the exact two-level gap rather than the large-n derivative form:
    the crossing condition is ``omega0 - tau = E(n+q) - E(n)``.  Along one
    chain these times are strictly increasing in ``n``.
    """
    return spec.omega0 - level_gap(n, q, spec)


def resonant_n_at(omega: float, spec: ProblemSpec) -> float:
    """Continuous principal number resonant with drive frequency ``omega``."""
    if omega <= 0:
        raise DomainError(f"drive frequency must be positive, got {omega}")
    return (spec.p2 * spec.n0**4 / (3.0 * spec.q * omega)) ** (1.0 / 3.0)


def resonant_energy_curve(tau, spec: ProblemSpec):
    """Energy of the level instantaneously resonant with the drive.

    Solves the resonance condition for continuous ``n`` at the current
    drive frequency and evaluates the energy there; monotonically
    increasing along a down-chirp.
    """
    omega = np.asarray(drive_frequency(tau, spec), dtype=float)
    if np.any(omega <= 0):
        raise DomainError("drive frequency left the positive domain")
    n_res = (spec.p2 * spec.n0**4 / (3.0 * spec.q * omega)) ** (1.0 / 3.0)
    out = -spec.p2 * spec.n0**4 / (6.0 * spec.q**2 * n_res**2)
    return float(out) if np.isscalar(tau) else out


def _normalized_gap(n: int, dn: int) -> float:
    """Level gap in units where the energy is exactly -1/n**2."""
    return 1.0 / n**2 - 1.0 / (n + dn) ** 2


def min_nonmixing_n(q: int, scan_limit: int = 400) -> int:
    """Smallest chain level above which q:1 and (q+1):1 chains stay separated.

    Climbing the q-chain, population sits on level ``n+q`` between the
    crossings of the ``n -> n+q`` and ``n+q -> n+2q`` gaps.  The competing
    (q+1)-chain crossing out of ``n+q`` must fall outside that occupancy
    window for every level at or above the returned ``n``.  Comparing the
    crossing frequencies of the exact gaps, the binding requirement is

        gap(n+q, q+1) > gap(n, q),

    while the companion ordering ``gap(n+q, q+1) > gap(n+q, q)`` holds for
    every ``n``.  Both are checked over the scan range and the last
    violation of the binding one sets the answer.
    """
    if q < 1:
        raise DomainError("q must be >= 1")
    last_violation = 0
    for n in range(1, scan_limit + 1):
        if not _normalized_gap(n + q, q + 1) > _normalized_gap(n + q, q):
            raise AssertionError("gap ordering in dn violated; cannot happen")
        if _normalized_gap(n + q, q + 1) <= _normalized_gap(n, q):
            last_violation = n
    if last_violation >= scan_limit - 10:
        raise ConvergenceError(
            f"chain-separation scan for q={q} still finds violations near the "
            f"scan limit {scan_limit}; increase scan_limit"
        )
    return last_violation + 1
