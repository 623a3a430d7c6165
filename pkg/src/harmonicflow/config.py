"""Strict scenario configuration: INI sections, key = value, unknown keys error."""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field

from .errors import ConfigError

ANALYSES = ("flow", "loja-fit", "hessian-spec", "verify", "chart-audit", "mult-probe")

# section -> key -> (parser, default); REQUIRED means no default
REQUIRED = object()


def _floats_list(s: str) -> list[float]:
    return [float(x) for x in s.split(",") if x.strip()]


def _ints_list(s: str) -> list[int]:
    return [int(x) for x in s.split(",") if x.strip()]


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _analyses(s: str) -> list[str]:
    items = [x.strip() for x in s.split(",") if x.strip()]
    for it in items:
        if it not in ANALYSES:
            raise ValueError(f"unknown analysis {it!r}; choose from {ANALYSES}")
    return items


def _opt_float(s: str) -> float | None:
    return None if s.strip().lower() == "auto" else float(s)


def _opt_int(s: str) -> int | None:
    return None if s.strip().lower() in ("", "none") else int(s)


SCHEMA: dict[str, dict[str, tuple]] = {
    "scenario": {
        "seed": (int, REQUIRED),
        "output_dir": (str, "runs/scenario"),
        "analyses": (_analyses, []),
    },
    "mesh": {
        "kind": (str, REQUIRED),
        "n": (int, None),
        "nu": (int, None),
        "nv": (int, None),
        "lu": (float, 2.0 * math.pi),
        "lv": (float, 2.0 * math.pi),
        "level": (int, None),
    },
    "target": {
        "kind": (str, REQUIRED),
        "ambient_dim": (int, None),
        "m": (int, None),
        "R": (float, None),
        "r": (float, None),
    },
    "initial_map": {
        "kind": (str, REQUIRED),
        "point": (_floats_list, None),
        "k": (int, 1),
        "amplitude": (float, 0.1),
        "path": (str, None),
    },
    "flow": {
        "dt0": (float, 1e-4),
        "dt_min": (float, 1e-12),
        "max_steps": (int, 200_000),
        "max_time": (float, math.inf),
        "grad_tol": (float, 1e-9),
        "checkpoint_every": (int, 100),
        "write_checkpoints": (_bool, False),
        "dist_k": (int, 1),
        "dist_p": (float, 2.0),
    },
    "loja_fit": {
        "window_lo": (_opt_float, None),
        "window_hi": (_opt_float, None),
    },
    "verify": {
        "sigma": (float, 0.1),
        "count": (int, 32),
        "k": (int, 1),
        "p": (float, 2.0),
        "variant": (str, "l2"),
        "theta": (float, 0.5),
        "z": (float, 0.9),
        "norm": (str, "l2"),
    },
    "hessian": {
        "kernel_tol": (_opt_float, None),
        "expected_critical_dim": (_opt_int, None),
        "n_modes": (int, 32),
    },
    "chart_audit": {
        "radius": (_opt_float, None),  # auto = 0.1 * tubular radius
        "samples": (int, 32),
        "k": (int, 1),
        "p": (float, 2.0),
    },
    "mult_probe": {
        "levels": (_ints_list, [16, 32, 64]),
        "k": (int, 2),
        "p": (float, 2.0),
        "trials": (int, 8),
    },
}

INITIAL_MAP_KINDS = (
    "constant",
    "identity_sphere",
    "degree_circle",
    "perturbed_constant",
    "from_checkpoint",
)


@dataclass
class Scenario:
    seed: int
    output_dir: str
    analyses: list[str]
    mesh: dict
    target: dict
    initial_map: dict
    flow: dict
    loja_fit: dict
    verify: dict
    hessian: dict
    chart_audit: dict
    mult_probe: dict
    echo: dict = field(default_factory=dict)


def parse_config(path: str) -> Scenario:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keep option case: the torus radii R and r differ
    try:
        read = cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not read:
        raise ConfigError(f"config file not found: {path}")

    parsed: dict[str, dict] = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        parsed[section] = {}
        for key, raw in cp[section].items():
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            parser, _ = SCHEMA[section][key]
            try:
                parsed[section][key] = parser(raw)
            except ValueError as exc:
                raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from exc

    for required_section in ("scenario", "mesh", "target", "initial_map"):
        if required_section not in parsed:
            raise ConfigError(f"missing required section [{required_section}]")

    out: dict[str, dict] = {}
    for section, keys in SCHEMA.items():
        out[section] = {}
        got = parsed.get(section, {})
        for key, (parser, default) in keys.items():
            if key in got:
                out[section][key] = got[key]
            elif default is REQUIRED:
                raise ConfigError(f"missing required key {key!r} in [{section}]")
            else:
                out[section][key] = default

    imk = out["initial_map"]["kind"]
    if imk not in INITIAL_MAP_KINDS:
        raise ConfigError(
            f"initial_map kind {imk!r} not one of {INITIAL_MAP_KINDS}"
        )
    if imk == "from_checkpoint" and not out["initial_map"]["path"]:
        raise ConfigError("initial_map kind from_checkpoint requires path")

    echo = {sec: {k: _echo_value(v) for k, v in keys.items()}
            for sec, keys in out.items()}
    return Scenario(
        seed=out["scenario"]["seed"],
        output_dir=out["scenario"]["output_dir"],
        analyses=out["scenario"]["analyses"],
        mesh=out["mesh"],
        target=out["target"],
        initial_map=out["initial_map"],
        flow=out["flow"],
        loja_fit=out["loja_fit"],
        verify=out["verify"],
        hessian=out["hessian"],
        chart_audit=out["chart_audit"],
        mult_probe=out["mult_probe"],
        echo=echo,
    )


def _echo_value(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return v


def mesh_spec_from_config(mesh: dict) -> dict:
    kind = mesh["kind"]
    if kind == "circle":
        if mesh["n"] is None:
            raise ConfigError("[mesh] circle requires n")
        return {"kind": "circle", "n": mesh["n"]}
    if kind == "flat_torus":
        if mesh["nu"] is None or mesh["nv"] is None:
            raise ConfigError("[mesh] flat_torus requires nu and nv")
        return {
            "kind": "flat_torus",
            "nu": mesh["nu"],
            "nv": mesh["nv"],
            "lu": mesh["lu"],
            "lv": mesh["lv"],
        }
    if kind == "icosphere":
        if mesh["level"] is None:
            raise ConfigError("[mesh] icosphere requires level")
        return {"kind": "icosphere", "level": mesh["level"]}
    raise ConfigError(f"unknown mesh kind {kind!r}")


def target_spec_from_config(target: dict) -> dict:
    kind = target["kind"]
    if kind == "sphere":
        if target["ambient_dim"] is None:
            raise ConfigError("[target] sphere requires ambient_dim")
        return {"kind": "sphere", "ambient_dim": target["ambient_dim"]}
    if kind == "clifford_torus":
        if target["m"] is None:
            raise ConfigError("[target] clifford_torus requires m")
        return {"kind": "clifford_torus", "m": target["m"]}
    if kind == "torus_rev":
        if target["R"] is None or target["r"] is None:
            raise ConfigError("[target] torus_rev requires R and r")
        return {"kind": "torus_rev", "R": target["R"], "r": target["r"]}
    raise ConfigError(f"unknown target kind {kind!r}")
