"""Experiment configuration and problem files (INI-style ``key = value`` sections)."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

from .grid import Annulus, Box, Disk, Polygon, Region


def _floats(text: str) -> tuple:
    return tuple(float(x) for x in text.replace(";", ",").split(",") if x.strip())


def _ints(text: str) -> tuple:
    return tuple(int(x) for x in text.split(",") if x.strip())


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    p_values: tuple = (2.0,)
    beta: float = 0.0
    eps_list: tuple = (1e-2,)
    domain: dict = field(default_factory=lambda: {"type": "disk"})
    phi: str = "sinsin"
    grid: tuple = (128,)
    seed: int = 0
    out: str = "results"
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ValueError("grid sizes must be strictly increasing")
        if any(b >= a for a, b in zip(self.eps_list, self.eps_list[1:])):
            raise ValueError("eps sequence must be strictly decreasing")
        if any(not 0 < e < 1 for e in self.eps_list):
            raise ValueError("eps values must lie in (0, 1)")
        if any(n < 4 for n in self.grid):
            raise ValueError("grid sizes must be at least 4")

    def option(self, key, default, cast=str):
        return cast(self.options[key]) if key in self.options else default

    def with_overrides(self, seed=None, out=None, grid=None, eps_list=None) -> "ExperimentConfig":
        changes = {}
        if seed is not None:
            changes["seed"] = seed
        if out is not None:
            changes["out"] = out
        if grid is not None:
            changes["grid"] = tuple(grid)
        if eps_list is not None:
            changes["eps_list"] = tuple(eps_list)
        return replace(self, **changes)


DEFAULTS = {
    "verify-cordes": ExperimentConfig("verify-cordes", options={"trials": "100000"}),
    "verify-identities": ExperimentConfig("verify-identities", p_values=(1.5, 2.0, 3.0, 6.0), eps_list=(1e-2,), grid=(32, 64, 128)),
    "solve": ExperimentConfig("solve", p_values=(1.5, 3.0), eps_list=(1e-5,), domain={"type": "annulus", "inner": "0.25", "outer": "1"}, phi="radial", grid=(64, 128, 256)),
    "boundary-suite": ExperimentConfig("boundary-suite", grid=(64,), options={"samples": "512", "normal_fields": "20", "step_functions": "100"}),
    "global-estimate": ExperimentConfig("global-estimate", p_values=(1.5, 2.0, 2.5, 4.0), eps_list=(1e-2, 1e-3, 1e-4, 1e-5), grid=(128,)),
}


def parse_config(text: str, experiment: str) -> ExperimentConfig:
    """Read an experiment config; sections [experiment], [profile], [domain], [phi], [grid], [eps], [options]."""
    cp = configparser.ConfigParser()
    cp.read_string(text)
    base = DEFAULTS[experiment]
    kw = {}
    if cp.has_section("experiment"):
        sec = cp["experiment"]
        if "seed" in sec:
            kw["seed"] = int(sec["seed"])
        if "out" in sec:
            kw["out"] = sec["out"]
    if cp.has_section("profile"):
        sec = cp["profile"]
        if "p" in sec:
            kw["p_values"] = _floats(sec["p"])
        if "beta" in sec:
            kw["beta"] = float(sec["beta"])
        if "eps" in sec:
            kw["eps_list"] = _floats(sec["eps"])
    if cp.has_section("eps") and "sequence" in cp["eps"]:
        kw["eps_list"] = _floats(cp["eps"]["sequence"])
    if cp.has_section("domain"):
        kw["domain"] = dict(cp["domain"])
    if cp.has_section("phi") and "name" in cp["phi"]:
        kw["phi"] = cp["phi"]["name"]
    if cp.has_section("grid") and "sizes" in cp["grid"]:
        kw["grid"] = _ints(cp["grid"]["sizes"])
    if cp.has_section("options"):
        kw["options"] = {**base.options, **dict(cp["options"])}
    return replace(base, **kw)


def load_config(path, experiment: str) -> ExperimentConfig:
    return parse_config(Path(path).read_text(), experiment)


def region_from_spec(spec: dict) -> Region:
    kind = spec.get("type", "disk")
    if kind == "square":
        return Box(_floats(spec.get("lower", "0,0")), _floats(spec.get("upper", "1,1")))
    if kind == "disk":
        return Disk(_floats(spec.get("center", "0,0")), float(spec.get("radius", 1.0)))
    if kind == "annulus":
        return Annulus(float(spec.get("inner", 0.25)), float(spec.get("outer", 1.0)), _floats(spec.get("center", "0,0")))
    if kind == "polygon":
        flat = _floats(spec["vertices"])
        if len(flat) < 6 or len(flat) % 2:
            raise ValueError("polygon needs at least three x,y vertex pairs")
        return Polygon(tuple(zip(flat[::2], flat[1::2])))
    raise ValueError(f"unknown domain type {kind!r}")


@dataclass(frozen=True)
class ProblemSpec:
    region: Region
    p: float
    eps: float
    beta: float
    phi: str
    n: int
    boundary: str = "extend"
    tol: float = 1e-8
    max_iter: int = 200


def parse_problem(text: str) -> ProblemSpec:
    """Flat ``key = value`` problem file (a leading [problem] header is optional)."""
    if not text.lstrip().startswith("["):
        text = "[problem]\n" + text
    cp = configparser.ConfigParser()
    cp.read_string(text)
    sec = dict(cp["problem"])
    missing = {"domain", "p", "eps", "phi"} - sec.keys()
    if missing:
        raise ValueError(f"problem file lacks {sorted(missing)}")
    domain = {"type": sec["domain"], **{k: v for k, v in sec.items() if k in ("lower", "upper", "center", "radius", "inner", "outer", "vertices")}}
    return ProblemSpec(
        region=region_from_spec(domain),
        p=float(sec["p"]),
        eps=float(sec["eps"]),
        beta=float(sec.get("beta", 0.0)),
        phi=sec["phi"],
        n=int(sec.get("n", 64)),
        boundary=sec.get("boundary", "extend"),
        tol=float(sec.get("tol", 1e-8)),
        max_iter=int(sec.get("max_iter", 200)),
    )
