"""Hydrogenic dipole matrix elements of the z operator.

The drive couples ``(n, l, m)`` to ``(n', l+-1, m)``; all other pairs vanish
(z polarization conserves m, and the angular integral enforces dl = +-1).
Lengths here are measured in half Bohr radii, so the radial functions are

    R_{n,l}(r) = sqrt((n-l-1)! / (2 n^4 (n+l)!)) * exp(-r/2n) * (r/n)^l
                 * L_{n-l-1}^{2l+1}(r/n),

normalized as ``integral R^2 r^2 dr = 1``.  Expanding both generalized
Laguerre polynomials turns ``integral r^3 R R' dr`` into a finite double sum
of Gamma-function terms.  The sum alternates and cancels catastrophically
at large n in floating point, so it is accumulated in exact rational
arithmetic and converted to a float only at the end (the working precision
argument only affects that final conversion).

A table of chain and near-circular couplings, normalized by the root
element ``c0 = |<n0, n0-1, m| z |n0+q, n0, m>|``, is persisted to a hashed
text cache so sweeps never recompute it.
"""

from __future__ import annotations

import hashlib
import math
import os
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath as mp

from .errors import CacheCorruptionWarning, DomainError, InvalidParameterError
from .model import ProblemSpec, QuantumLevel, crossing_time

__all__ = [
    "CouplingKey",
    "CouplingTable",
    "ResonantChain",
    "angular_factor",
    "radial_integral",
    "matrix_element",
    "coupling",
    "c0_exact",
    "c0_asymptotic",
    "build_table",
    "load_table",
    "save_table",
    "table_to_csv",
]

TABLE_FORMAT_VERSION = 1
DEFAULT_DPS = 40


def angular_factor(l: int, m: int) -> float:
    """Angular part of ``<l, m| cos(theta) |l+1, m>``.

    Standard recurrence coefficient of cos(theta) acting on a spherical
    harmonic: ``sqrt(((l+1)^2 - m^2) / ((2l+1)(2l+3)))``.  Even in m, and
    equal to ``1/sqrt(2l+3)`` for the stretched case m = l.
    """
    if abs(m) > l:
        raise DomainError(f"|m| <= l required, got l={l}, m={m}")
    return math.sqrt(((l + 1) ** 2 - m**2) / ((2 * l + 1) * (2 * l + 3)))


def _radial_sum_exact(n: int, l: int, n_prime: int) -> Fraction:
    """Exact double sum for the radial integral with l' = l + 1.

    Groups terms by total polynomial order s = i + j, computing the
    coefficient convolution exactly before multiplying in the shared
    Gamma and power factors.
    """
    fact = math.factorial
    ni = n - l            # number of i terms
    nj = n_prime - l - 1  # number of j terms
    fi = [
        Fraction((-1) ** i, n ** (i + l + 2) * fact(n - l - 1 - i) * fact(2 * l + 1 + i) * fact(i))
        for i in range(ni)
    ]
    fj = [
        Fraction(
            (-1) ** j,
            n_prime ** (j + l + 3) * fact(n_prime - l - 2 - j) * fact(2 * l + 3 + j) * fact(j),
        )
        for j in range(nj)
    ]
    conv = [Fraction(0)] * (ni + nj - 1)
    for i, a in enumerate(fi):
        for j, b in enumerate(fj):
            conv[i + j] += a * b
    base = Fraction(2 * n * n_prime, n + n_prime)
    power = base ** (2 * l + 5)
    total = Fraction(0)
    for s, c in enumerate(conv):
        if c:
            total += c * fact(2 * l + 4 + s) * power
        power *= base
    return total


def radial_integral(n: int, l: int, n_prime: int, l_prime: int, dps: int = DEFAULT_DPS):
    """Radial integral ``integral_0^inf r^3 R_{n,l} R_{n',l'} dr`` (half-Bohr units).

    Exact up to the final float conversion at ``dps`` decimal digits.
    Returns an mpmath float; symmetric under exchange of the two states.
    Violation of the |dl| = 1 selection rule returns a hard zero rather
    than raising, since the full matrix element vanishes there anyway.
    """
    if n < 1 or n_prime < 1 or not 0 <= l <= n - 1 or not 0 <= l_prime <= n_prime - 1:
        raise InvalidParameterError(
            f"invalid level pair (n={n}, l={l}) -> (n'={n_prime}, l'={l_prime})"
        )
    if l_prime == l + 1:
        lo_n, lo_l, hi_n = n, l, n_prime
    elif l_prime == l - 1:
        lo_n, lo_l, hi_n = n_prime, l_prime, n
    else:
        return mp.mpf(0)
    s = _radial_sum_exact(lo_n, lo_l, hi_n)
    fact = math.factorial
    norm_sq = (
        fact(lo_n - lo_l - 1)
        * fact(hi_n - lo_l - 2)
        * fact(lo_n + lo_l)
        * fact(hi_n + lo_l + 1)
    )
    with mp.workdps(dps):
        value = mp.mpf(0.5) * mp.sqrt(mp.mpf(norm_sq)) * mp.mpf(s.numerator) / mp.mpf(s.denominator)
    return value


def matrix_element(
    n: int, l: int, m: int, n_prime: int, l_prime: int, dps: int = DEFAULT_DPS
) -> float:
    """Full dipole matrix element ``<n,l,m| z |n',l',m>`` as a float.

    Zero for selection-rule violating pairs (dl != +-1).
    """
    QuantumLevel(n, l, m)
    QuantumLevel(n_prime, l_prime, m)
    if abs(l_prime - l) != 1:
        return 0.0
    ang = angular_factor(min(l, l_prime), m)
    return float(radial_integral(n, l, n_prime, l_prime, dps=dps) * ang)


@dataclass(frozen=True)
class CouplingKey:
    """Identifies one bra-ket pair; m is shared between both states."""

    n: int
    l: int
    m: int
    n_prime: int
    l_prime: int

    def __post_init__(self):
        QuantumLevel(self.n, self.l, self.m)
        QuantumLevel(self.n_prime, self.l_prime, self.m)

    @property
    def allowed(self) -> bool:
        return abs(self.l_prime - self.l) == 1


def coupling(key: CouplingKey, c0: float, dps: int = DEFAULT_DPS) -> float:
    """Normalized coupling: matrix element divided by the root element c0."""
    if c0 <= 0:
        raise InvalidParameterError("c0 must be positive")
    if not key.allowed:
        return 0.0
    return matrix_element(key.n, key.l, key.m, key.n_prime, key.l_prime, dps=dps) / c0


def c0_exact(n0: int, q: int, m: int, dps: int = DEFAULT_DPS) -> float:
    """Exact normalization ``|<n0, n0-1, m| z |n0+q, n0, m>|``."""
    return abs(matrix_element(n0, n0 - 1, m, n0 + q, n0, dps=dps))


def c0_asymptotic(n0: int, q: int, m: int) -> float:
    """Large-n0 closed form of the root element.

    ``sqrt(2)*n0**1.5`` for the 1:1 resonance (stretched m = n0-1) and
    ``sqrt(1-(m/n0)^2)*n0**1.5/sqrt(2)`` for the 2:1 resonance.
    """
    if q == 1:
        if m != n0 - 1:
            raise InvalidParameterError("1:1 asymptotic form holds for m = n0-1")
        return math.sqrt(2.0) * n0**1.5
    if q == 2:
        if abs(m) > n0:
            raise InvalidParameterError(f"|m| <= n0 required, got m={m}")
        return math.sqrt(1.0 - (m / n0) ** 2) * n0**1.5 / math.sqrt(2.0)
    raise InvalidParameterError(f"asymptotic c0 implemented for q in (1, 2), got {q}")


@dataclass
class CouplingTable:
    """Persisted set of dipole elements for one chain configuration.

    Entries are stored un-normalized in canonical orientation
    ``(n, l) -> (n', l+1)``; :meth:`normalized` divides by ``c0``.
    """

    q: int
    n0: int
    m: int
    n_min: int
    n_max: int
    max_shell: int
    dps: int
    c0: float
    entries: dict = field(default_factory=dict, repr=False)

    def _canonical(self, n, l, n_prime, l_prime):
        if l_prime == l + 1:
            return (n, l, n_prime, l_prime)
        if l_prime == l - 1:
            return (n_prime, l_prime, n, l)
        return None

    def get(self, n: int, l: int, n_prime: int, l_prime: int) -> float:
        """Raw matrix element; zero when the selection rule forbids the pair."""
        key = self._canonical(n, l, n_prime, l_prime)
        if key is None:
            return 0.0
        return self.entries[key]

    def normalized(self, n: int, l: int, n_prime: int, l_prime: int) -> float:
        return self.get(n, l, n_prime, l_prime) / self.c0

    def chain_levels(self) -> list[QuantumLevel]:
        """Ladder of levels (n0 + k*q, n0 - 1 + k, m) covered by the table."""
        levels = []
        k = 0
        while self.n0 + k * self.q <= self.n_max:
            levels.append(QuantumLevel(self.n0 + k * self.q, self.n0 - 1 + k, self.m))
            k += 1
        return levels

    def chain_couplings(self) -> list[float]:
        """Normalized couplings c_k of successive chain transitions."""
        levels = self.chain_levels()
        return [
            self.normalized(a.n, a.l, b.n, b.l)
            for a, b in zip(levels[:-1], levels[1:])
        ]


@dataclass
class ResonantChain:
    """Chain levels with cached normalized couplings and crossing times."""

    q: int
    n0: int
    m: int
    levels: list
    cs: list
    taus: list

    @classmethod
    def from_table(cls, spec: ProblemSpec, table: CouplingTable) -> "ResonantChain":
        levels = table.chain_levels()
        cs = table.chain_couplings()
        taus = [crossing_time(lev.n, spec.q, spec) for lev in levels[:-1]]
        return cls(q=spec.q, n0=spec.n0, m=spec.m, levels=levels, cs=cs, taus=taus)

    @property
    def max_n(self) -> int:
        return self.levels[-1].n


def _shell_states(m: int, n_min: int, n_max: int, max_shell: int):
    for n in range(max(n_min, 1), n_max + 1):
        l_lo = max(abs(m), n - max_shell)
        for l in range(l_lo, n):
            yield (n, l)


def _table_keys(q, n0, m, n_min, n_max, max_shell):
    """Canonical key set: chain transitions plus the near-circular block."""
    keys = set()
    k = 0
    while n0 + (k + 1) * q <= n_max:
        n, l = n0 + k * q, n0 - 1 + k
        keys.add((n, l, n0 + (k + 1) * q, l + 1))
        k += 1
    if max_shell > 0:
        states = set(_shell_states(m, n_min, n_max, max_shell))
        for n, l in states:
            for n_prime in range(n_min, n_max + 1):
                if (n_prime, l + 1) in states:
                    keys.add((n, l, n_prime, l + 1))
    return keys


def build_table(
    spec: ProblemSpec,
    n_max: int,
    n_min: int | None = None,
    max_shell: int = 6,
    cache_dir: str | None = None,
    dps: int = DEFAULT_DPS,
) -> CouplingTable:
    """Compute (or load from cache) all couplings needed by the solvers.

    Covers the resonant chain up to ``n_max`` plus every dl = +-1 pair in
    the near-circular block ``n_min <= n <= n_max``, ``n - l <= max_shell``,
    ``l >= |m|``.  Re-running with a populated cache verifies the stored
    content hash and recomputes (with a warning) only on corruption.
    """
    if n_max < spec.n0 + spec.q:
        raise InvalidParameterError("n_max must cover at least one chain transition")
    if n_min is None:
        n_min = max(1, spec.n_start - 5)
    path = None
    if cache_dir is not None:
        os.makedirs(cache_dir, exist_ok=True)
        name = (
            f"couplings_q{spec.q}_n0{spec.n0}_m{spec.m}"
            f"_n{n_min}-{n_max}_shell{max_shell}_dps{dps}.tbl"
        )
        path = os.path.join(cache_dir, name)
        if os.path.exists(path):
            try:
                return load_table(path)
            except (ValueError, KeyError, OSError) as exc:
                warnings.warn(
                    f"coupling cache {path} unreadable ({exc}); recomputing",
                    CacheCorruptionWarning,
                )
    keys = sorted(_table_keys(spec.q, spec.n0, spec.m, n_min, n_max, max_shell))
    entries = {}
    for n, l, n_prime, l_prime in keys:
        ang = angular_factor(l, spec.m)
        entries[(n, l, n_prime, l_prime)] = float(
            radial_integral(n, l, n_prime, l_prime, dps=dps) * ang
        )
    c0 = abs(entries[(spec.n0, spec.n0 - 1, spec.n0 + spec.q, spec.n0)])
    table = CouplingTable(
        q=spec.q,
        n0=spec.n0,
        m=spec.m,
        n_min=n_min,
        n_max=n_max,
        max_shell=max_shell,
        dps=dps,
        c0=c0,
        entries=entries,
    )
    if path is not None:
        save_table(table, path)
    return table


def _entry_lines(table: CouplingTable) -> list[str]:
    return [
        f"{n} {l} {np_} {lp} {value!r}"
        for (n, l, np_, lp), value in sorted(table.entries.items())
    ]


def save_table(table: CouplingTable, path: str) -> None:
    lines = _entry_lines(table)
    body = "\n".join(lines)
    digest = hashlib.sha256(body.encode()).hexdigest()
    header = [
        f"version = {TABLE_FORMAT_VERSION}",
        f"q = {table.q}",
        f"n0 = {table.n0}",
        f"m = {table.m}",
        f"n_min = {table.n_min}",
        f"n_max = {table.n_max}",
        f"max_shell = {table.max_shell}",
        f"dps = {table.dps}",
        f"c0 = {table.c0!r}",
        f"count = {len(lines)}",
        f"sha256 = {digest}",
        "---",
    ]
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write("\n".join(header) + "\n" + body + "\n")
    os.replace(tmp, path)


def load_table(path: str) -> CouplingTable:
    with open(path) as fh:
        text = fh.read()
    head, _, body = text.partition("\n---\n")
    meta = {}
    for line in head.splitlines():
        key, _, value = line.partition("=")
        meta[key.strip()] = value.strip()
    if int(meta["version"]) != TABLE_FORMAT_VERSION:
        raise ValueError(f"unsupported table version {meta['version']}")
    lines = [ln for ln in body.splitlines() if ln.strip()]
    digest = hashlib.sha256("\n".join(lines).encode()).hexdigest()
    if digest != meta["sha256"] or len(lines) != int(meta["count"]):
        raise ValueError("content hash mismatch")
    entries = {}
    for ln in lines:
        n, l, np_, lp, value = ln.split()
        entries[(int(n), int(l), int(np_), int(lp))] = float(value)
    return CouplingTable(
        q=int(meta["q"]),
        n0=int(meta["n0"]),
        m=int(meta["m"]),
        n_min=int(meta["n_min"]),
        n_max=int(meta["n_max"]),
        max_shell=int(meta["max_shell"]),
        dps=int(meta["dps"]),
        c0=float(meta["c0"]),
        entries=entries,
    )


def table_to_csv(table: CouplingTable, path: str) -> None:
    """Dump all entries as CSV with columns n,l,m,n_prime,l_prime,value."""
    with open(path, "w") as fh:
        fh.write("n,l,m,n_prime,l_prime,value\n")
        for (n, l, np_, lp), value in sorted(table.entries.items()):
            fh.write(f"{n},{l},{table.m},{np_},{lp},{value!r}\n")
