"""Flat key-value configuration text.

One ``key = value`` pair per line, ``#`` comments, blank lines ignored.
The schema is versioned through a mandatory ``config_version`` key and is
closed: unknown keys are errors, so typos never silently change a run.
"""

from __future__ import annotations

from .errors import ConfigError
from .model import ProblemSpec, Tolerances

CONFIG_VERSION = 1

SPEC_KEYS = {
    "p1": float,
    "p2": float,
    "q": int,
    "n0": int,
    "m": int,
    "n_start": int,
    "n_end": int,
    "n_th": int,
    "tol_rtol": float,
    "tol_atol": float,
    "tol_norm": float,
    "tol_boundary": float,
}
_REQUIRED_SPEC_KEYS = ("p1", "p2", "q", "n0", "m", "n_start", "n_end", "n_th")


def parse_flat_text(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines into a string map, validating the shape."""
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value in {raw!r}")
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = value
    if "config_version" not in pairs:
        raise ConfigError("missing required key 'config_version'")
    if pairs.pop("config_version") != str(CONFIG_VERSION):
        raise ConfigError(f"unsupported config_version (expected {CONFIG_VERSION})")
    return pairs


def convert_pairs(pairs: dict[str, str], schema: dict[str, type]) -> dict:
    """Type-convert string pairs against a closed schema."""
    out = {}
    for key, raw in pairs.items():
        if key not in schema:
            raise ConfigError(f"unknown config key {key!r}")
        typ = schema[key]
        try:
            if typ is bool:
                if raw.lower() not in ("true", "false", "0", "1"):
                    raise ValueError(raw)
                out[key] = raw.lower() in ("true", "1")
            else:
                out[key] = typ(raw)
        except ValueError as exc:
            raise ConfigError(f"key {key!r}: cannot parse {raw!r} as {typ.__name__}") from exc
    return out


def spec_from_pairs(pairs: dict) -> ProblemSpec:
    """Build a :class:`ProblemSpec` from already-converted pairs."""
    missing = [k for k in _REQUIRED_SPEC_KEYS if k not in pairs]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    tol_kwargs = {}
    for key, attr in (
        ("tol_rtol", "rtol"),
        ("tol_atol", "atol"),
        ("tol_norm", "norm"),
        ("tol_boundary", "boundary"),
    ):
        if key in pairs:
            tol_kwargs[attr] = pairs[key]
    return ProblemSpec(
        p1=pairs["p1"],
        p2=pairs["p2"],
        q=pairs["q"],
        n0=pairs["n0"],
        m=pairs["m"],
        n_start=pairs["n_start"],
        n_end=pairs["n_end"],
        n_th=pairs["n_th"],
        tolerances=Tolerances(**tol_kwargs),
    )


def spec_from_text(text: str) -> ProblemSpec:
    return spec_from_pairs(convert_pairs(parse_flat_text(text), SPEC_KEYS))


def spec_to_text(spec: ProblemSpec) -> str:
    tol = spec.tolerances
    lines = [
        f"config_version = {CONFIG_VERSION}",
        f"p1 = {spec.p1!r}",
        f"p2 = {spec.p2!r}",
        f"q = {spec.q}",
        f"n0 = {spec.n0}",
        f"m = {spec.m}",
        f"n_start = {spec.n_start}",
        f"n_end = {spec.n_end}",
        f"n_th = {spec.n_th}",
        f"tol_rtol = {tol.rtol!r}",
        f"tol_atol = {tol.atol!r}",
        f"tol_norm = {tol.norm!r}",
        f"tol_boundary = {tol.boundary!r}",
    ]
    return "\n".join(lines) + "\n"


def load_spec(path: str) -> ProblemSpec:
    with open(path) as fh:
        return spec_from_text(fh.read())


def save_spec(spec: ProblemSpec, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(spec_to_text(spec))
