"""Experiment configuration files.

A configuration is an INI file with the sections ``[grid]``, ``[data]``,
``[potential]``, ``[nonlinearity]``, ``[solver]``, ``[verify]``, ``[norm]``
and ``[output]``.  Every key is optional; unknown sections or keys and
malformed values are reported with the line they appear on.

Example::

    [grid]
    R = 8
    cells = 32
    grading = 0.85

    [data]
    preset = homogeneous
    amplitude = 0.1

    [potential]
    kappa = 0.05
"""
from __future__ import annotations

import configparser
import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .grid import BoundaryFunction, Grid, GridFunction, GridSpec, build_grid, sample_boundary, sample_field
from .operators import DEFAULT_TIME_NODES, Nonlinearity, Pole, Potential
from .presets import make_profile
from .solver import SolverConfig, check_hypothesis


def _float(s):
    return float(s)


def _opt_float(s):
    return None if s.strip().lower() in ("", "none") else float(s)


def _int(s):
    v = float(s)
    if v != int(v):
        raise ValueError(f"{s!r} is not an integer")
    return int(v)


def _bool(s):
    low = s.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"{s!r} is not a boolean")


def _floats(s):
    s = s.strip()
    return tuple(float(v) for v in s.replace(",", " ").split()) if s else ()


def _opt_floats(s):
    return None if s.strip().lower() in ("", "none") else _floats(s)


def _points(s):
    """``"x1, x2; y1, y2"`` -> ``((x1, x2), (y1, y2))``."""
    return tuple(_floats(p) for p in s.split(";") if p.strip())


def _str(s):
    return s.strip()


SCHEMA = {
    "grid": {
        "n": (_int, 3), "R": (_float, 8.0), "cells": (_int, 32),
        "grading": (_opt_float, None), "centers": (_points, ()),
        "cell_budget": (_int, 2**24),
    },
    "data": {
        "preset": (_str, "gaussian"), "amplitude": (_float, 1.0), "width": (_float, 1.0),
        "radius": (_float, 1.0), "center": (_opt_floats, None), "degree": (_opt_float, None),
        "theta": (_floats, (1.0,)), "exponent": (_float, 1.0),
    },
    "potential": {"kappa": (_float, 0.0), "poles": (_str, "")},
    "nonlinearity": {"rho": (_float, 3.0), "sign": (_int, 1), "eta": (_opt_float, None)},
    "solver": {
        "first_level": (_float, 0.025), "levels": (_int, 5), "max_iterations": (_int, 20),
        "residual_tolerance": (_float, 1e-6), "time_nodes": (_int, DEFAULT_TIME_NODES),
        "steps_per_octave": (_int, 4), "octaves_below": (_int, 6),
        "override": (_bool, False),
    },
    "verify": {
        "lambdas": (_floats, (0.5, 2.0)), "d1": (_float, 2.0), "d2": (_float, 4.0),
        "r": (_float, math.inf), "fit_times": (_floats, (0.01, 0.1, 8)),
        "target": (_str, "boundary"), "transform": (_str, "rotation"),
        "parity": (_str, "symmetric"), "expected_sign": (_int, 1),
        "which": (_str, "trace"), "ladder_t_min": (_float, 2.0**-6),
        "ladder_t_max": (_float, 4.0), "rungs": (_int, 12), "per_octave": (_int, 4),
        "tolerance": (_float, 0.01), "perturbation": (_float, 0.1), "halvings": (_int, 2),
        "refine": (_bool, False),
    },
    "norm": {"p": (_float, 2.0), "r": (_float, math.inf), "field": (_str, "data")},
    "output": {"directory": (_str, "halfheat-out"), "seed": (_int, 0)},
}


def _locate(text, section, key=None):
    """1-based line of ``[section]`` or of ``key`` inside it, or None."""
    current = None
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
            if key is None and current == section:
                return no
        elif current == section and key is not None:
            name = s.split("=", 1)[0].split(":", 1)[0].strip()
            if name == key:
                return no
    return None


def _parse_poles(text, n):
    """``"x1,x2 constant 0.5; y1,y2 dipole d1,d2; z1,z2 profile a:v a:v"``."""
    poles = []
    for entry in (e.strip() for e in text.split(";")):
        if not entry:
            continue
        parts = entry.split()
        if len(parts) < 3:
            raise ValueError(f"pole entry {entry!r} needs position, kind and coefficient")
        pos = _floats(parts[0])
        if len(pos) != n - 1:
            raise ValueError(f"pole position {parts[0]!r} needs {n - 1} coordinates")
        kind = parts[1]
        if kind == "constant":
            poles.append(Pole(pos, "constant", float(parts[2])))
        elif kind == "dipole":
            poles.append(Pole(pos, "dipole", dipole=_floats(parts[2])))
        elif kind == "profile":
            if n != 3:
                raise ValueError("angle:value profiles are only defined for n = 3")
            pairs = [tuple(float(v) for v in item.split(":")) for item in parts[2:]]
            ang = np.radians([a for a, _ in pairs])
            dirs = tuple((float(math.cos(a)), float(math.sin(a))) for a in ang)
            poles.append(Pole(pos, "profile", directions=dirs, profile=tuple(v for _, v in pairs)))
        else:
            raise ValueError(f"unknown pole kind {kind!r}")
    return tuple(poles)


@dataclass
class ExperimentConfig:
    text: str
    values: dict
    path: str | None = None
    _grid: Grid | None = field(default=None, repr=False)

    # -- raw access --------------------------------------------------------
    def __getitem__(self, section):
        return self.values[section]

    @property
    def sha256(self):
        return hashlib.sha256(self.text.encode()).hexdigest()

    @property
    def rho(self):
        return self.values["nonlinearity"]["rho"]

    @property
    def n(self):
        return self.values["grid"]["n"]

    @property
    def p(self):
        return self.n * (self.rho - 1.0)

    @property
    def q(self):
        return (self.n - 1) * (self.rho - 1.0)

    # -- derived objects ---------------------------------------------------
    def potential(self) -> Potential:
        pv = self.values["potential"]
        poles = list(pv["poles"])
        if pv["kappa"] != 0.0:
            poles.insert(0, Pole((0.0,) * (self.n - 1), "constant", pv["kappa"]))
        return Potential(tuple(poles))

    def grid_spec(self) -> GridSpec:
        g = self.values["grid"]
        centers = list(g["centers"])
        for c in self.potential().refinement_centers():
            if c not in centers:
                centers.append(c)
        return GridSpec(n=g["n"], R=g["R"], cells_per_axis=g["cells"], grading=g["grading"],
                        refinement_centers=tuple(centers), cell_budget=g["cell_budget"])

    def grid(self) -> Grid:
        if self._grid is None:
            self._grid = build_grid(self.grid_spec())
        return self._grid

    def profile(self):
        d = self.values["data"]
        name = d["preset"]
        keys = {
            "gaussian": ("amplitude", "width", "center"),
            "boundary_gaussian": ("amplitude", "width", "center"),
            "indicator": ("amplitude", "radius", "center"),
            "boundary_indicator": ("amplitude", "radius", "center"),
            "homogeneous": ("amplitude", "degree", "theta"),
            "odd_gaussian": ("amplitude", "width"),
            "boundary_power": ("amplitude", "exponent"),
            "zero": (),
        }.get(name, ())
        params = {k: d[k] for k in keys}
        if name == "homogeneous" and params["degree"] is None:
            params["degree"] = -1.0 / (self.rho - 1.0)
        return make_profile(name, **params)

    def data(self) -> GridFunction | BoundaryFunction:
        f, domain = self.profile()
        grid = self.grid()
        return sample_field(f, grid) if domain == "interior" else sample_boundary(f, grid)

    def initial_data(self) -> GridFunction:
        u0 = self.data()
        if isinstance(u0, BoundaryFunction):
            raise ConfigurationError(
                f"preset {self.values['data']['preset']!r} is a boundary field; "
                "this command needs interior initial data", line=_locate(self.text, "data", "preset"))
        return u0

    def nonlinearity(self) -> Nonlinearity:
        h = self.values["nonlinearity"]
        return Nonlinearity(rho=h["rho"], sign=h["sign"], eta=h["eta"])

    def solver_config(self) -> SolverConfig:
        s = self.values["solver"]
        return SolverConfig(
            rho=self.rho, n=self.n, first_level=s["first_level"], n_levels=s["levels"],
            max_iterations=s["max_iterations"], residual_tolerance=s["residual_tolerance"],
            time_nodes=s["time_nodes"], steps_per_octave=s["steps_per_octave"],
            octaves_below=s["octaves_below"])

    def output_dir(self, env=None):
        import os
        env = os.environ if env is None else env
        return env.get("HALFHEAT_OUTPUT_DIR") or self.values["output"]["directory"]

    def refined(self) -> "ExperimentConfig":
        """Same experiment with twice the cells per axis."""
        values = {k: dict(v) for k, v in self.values.items()}
        values["grid"]["cells"] *= 2
        return ExperimentConfig(self.text, values, self.path)


def parse_config(text: str, path: str | None = None) -> ExperimentConfig:
    """Parse and validate configuration text."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(text, source=path or "<config>")
    except configparser.ParsingError as exc:
        line = getattr(exc, "lineno", None)
        if line is None and getattr(exc, "errors", None):
            line = exc.errors[0][0]
        raise ConfigurationError(f"cannot parse configuration: {str(exc).splitlines()[0]}",
                                 line=line) from None
    except configparser.Error as exc:
        raise ConfigurationError(f"cannot parse configuration: {exc}",
                                 line=getattr(exc, "lineno", None)) from None
    values = {sec: {k: default for k, (_, default) in keys.items()} for sec, keys in SCHEMA.items()}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigurationError(f"unknown section [{section}]", line=_locate(text, section))
        for key, raw in parser.items(section):
            line = _locate(text, section, key)
            if key not in SCHEMA[section]:
                raise ConfigurationError(f"unknown key {key!r} in [{section}]", line=line)
            conv = SCHEMA[section][key][0]
            try:
                values[section][key] = conv(raw)
            except (ValueError, TypeError) as exc:
                raise ConfigurationError(f"[{section}] {key}: {exc}", line=line) from None
    n = values["grid"]["n"]
    try:
        values["potential"]["poles"] = _parse_poles(values["potential"]["poles"], n)
    except (ValueError, ConfigurationError) as exc:
        raise ConfigurationError(f"[potential] poles: {exc}",
                                 line=_locate(text, "potential", "poles")) from None
    cfg = ExperimentConfig(text, values, path)
    check_hypothesis(n, values["nonlinearity"]["rho"])
    # validate everything that can fail at construction, reporting the offending section
    for section, build in (("grid", cfg.grid_spec), ("nonlinearity", cfg.nonlinearity),
                           ("solver", cfg.solver_config), ("data", cfg.profile)):
        try:
            build()
        except ConfigurationError as exc:
            if exc.line is not None:
                raise
            raise ConfigurationError(str(exc), line=_locate(text, section)) from None
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read configuration {path}: {exc.strerror}") from None
    return parse_config(text, str(path))
