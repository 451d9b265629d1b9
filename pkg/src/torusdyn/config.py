"""Flat key = value configuration with sections, and the bundle format.

A config file carries two sections: [params] holds every construction
parameter and [run] holds probe budgets, seeds, resolutions, the
validation mode, and the output directory.  Parsing is strict: unknown
sections or keys are errors, and a dump/load round trip reproduces the
config exactly (floats serialize via repr).

The bundle is the structured text serialization of validated Params plus
the derived family data (slice centers and member parameters); it is an
output artifact of `build`, meant for diffing and downstream tooling.
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, fields, replace

from .endo import Params, System

__all__ = [
    "Config",
    "ConfigError",
    "default_config",
    "load_config",
    "loads_config",
    "dump_config",
    "config_hash",
    "bundle_text",
]


class ConfigError(ValueError):
    pass


_PARAM_INT = {"n", "k", "lam", "stride", "seed"}
_PARAM_FLOAT = {
    "r", "kappa", "alpha", "a", "a0", "theta", "delta", "l",
    "M_target", "jac_slack",
}
_PARAM_TUPLE = {"p"}
_PARAM_KEYS = _PARAM_INT | _PARAM_FLOAT | _PARAM_TUPLE

_RUN_INT = {"seed", "samples", "N", "resolution", "trials", "max_depth"}
_RUN_FLOAT = {"eps_pert"}
_RUN_STR = {"mode", "out"}
_RUN_KEYS = _RUN_INT | _RUN_FLOAT | _RUN_STR

_MODES = ("empirical", "strict")


@dataclass(frozen=True)
class Config:
    """Construction parameters plus run settings for the CLI."""

    params: Params
    mode: str = "empirical"
    seed: int = 0
    samples: int = 100_000
    N: int = 1_000_000
    resolution: int = 20
    trials: int = 100
    eps_pert: float = 0.4
    max_depth: int = 16
    out: str = "reports"

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ConfigError(f"mode must be one of {_MODES}, got {self.mode!r}")

    def with_overrides(self, **kw) -> "Config":
        # "seed" names both a construction and a run field; overrides take
        # the run reading (config files disambiguate by section)
        run_fields = {f.name for f in fields(Config)} - {"params"}
        rkeys = {k: v for k, v in kw.items() if k in run_fields}
        pkeys = {k: v for k, v in kw.items() if k not in run_fields}
        cfg = self
        if pkeys:
            cfg = replace(cfg, params=replace(cfg.params, **pkeys))
        if rkeys:
            cfg = replace(cfg, **rkeys)
        return cfg


def default_config() -> Config:
    return Config(params=Params())


def _parse_value(section: str, key: str, raw: str):
    raw = raw.strip()
    try:
        if section == "params":
            if key in _PARAM_INT:
                return int(raw)
            if key in _PARAM_FLOAT:
                return float(raw)
            return tuple(float(v) for v in raw.split(","))
        if key in _RUN_INT:
            # accept scientific notation for budgets (N = 1e7)
            f = float(raw)
            if f != int(f):
                raise ValueError("not an integer")
            return int(f)
        if key in _RUN_FLOAT:
            return float(raw)
        return raw
    except ValueError as e:
        raise ConfigError(f"[{section}] {key} = {raw!r}: {e}") from None


def loads_config(text: str) -> Config:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keep key case (M_target)
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(str(e)) from None
    unknown_sections = set(cp.sections()) - {"params", "run"}
    if unknown_sections:
        raise ConfigError(f"unknown sections: {sorted(unknown_sections)}")
    pkw = {}
    if cp.has_section("params"):
        for key, raw in cp.items("params"):
            if key not in _PARAM_KEYS:
                raise ConfigError(f"unknown key [params] {key}")
            pkw[key] = _parse_value("params", key, raw)
    rkw = {}
    if cp.has_section("run"):
        for key, raw in cp.items("run"):
            if key not in _RUN_KEYS:
                raise ConfigError(f"unknown key [run] {key}")
            rkw[key] = _parse_value("run", key, raw)
    return Config(params=Params(**pkw), **rkw)


def load_config(path: str) -> Config:
    with open(path, "r", encoding="utf-8") as fh:
        return loads_config(fh.read())


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dump_config(cfg: Config) -> str:
    buf = io.StringIO()
    buf.write("[params]\n")
    for f in fields(Params):
        buf.write(f"{f.name} = {_fmt(getattr(cfg.params, f.name))}\n")
    buf.write("\n[run]\n")
    for name in ("mode", "seed", "samples", "N", "resolution", "trials",
                 "eps_pert", "max_depth", "out"):
        buf.write(f"{name} = {_fmt(getattr(cfg, name))}\n")
    return buf.getvalue()


def config_hash(cfg: Config) -> str:
    return hashlib.sha256(dump_config(cfg).encode("utf-8")).hexdigest()[:16]


def _member_lines(tag: str, fam) -> list[str]:
    lines = [f"[{tag}]", f"members = {len(fam.members)}"]
    for i, mem in enumerate(fam.members):
        cls = type(mem).__name__
        if cls == "ZoneMember":
            lines.append(
                f"member{i} = zone shift={_fmt(mem.shift)} "
                f"alpha={_fmt(mem.g.alpha)} a0={_fmt(mem.g.a0)}"
            )
        elif cls == "TranslationMember":
            lines.append(f"member{i} = translation v={_fmt(tuple(mem.v))}")
        else:
            lines.append(
                f"member{i} = sine eta={_fmt(mem.eta)} "
                f"w={_fmt(tuple(mem.w))} phases={_fmt(tuple(mem.phases))}"
            )
    return lines


def bundle_text(system: System) -> str:
    """Structured serialization of the validated instance."""
    P = system.params
    lines = ["[params]"]
    for f in fields(Params):
        lines.append(f"{f.name} = {_fmt(getattr(P, f.name))}")
    lines += [
        "",
        "[derived]",
        f"m = {P.m}",
        f"slice_centers = {_fmt(P.slice_centers)}",
        f"expansion_floor = {_fmt(P.expansion_floor)}",
        "",
    ]
    lines += _member_lines("family_shrinking", system.F2)
    lines.append("")
    lines += _member_lines("family_pair", system.F1)
    return "\n".join(lines) + "\n"
