"""Command-line front end: ``logp-lab <command> [--config file.yaml] [flags]``.

A run is described by an ``ExperimentConfig``, read from a YAML file and
overridden by flags.  Every output starts with the resolved configuration and
the constants C_{N,p} and rho_N(p): CSV files carry them as ``#`` lines
before the header row, JSON files under ``config`` and ``constants``.
Floats in CSV are written with 17 significant digits.

Exit status: 0 on success, 1 on a numerical failure (partial results are
written and flagged ``# status: failed``), 2 on an invalid configuration.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np
import yaml

from .constants import ProblemParams, kernel_constant, rho_constant
from .energy import (RayleighOptions, assemble_frac, assemble_log, dirichlet_solve,
                     eigen_derivative, equal_area_shapes, faber_krahn_experiment, min_rayleigh,
                     sandwich_bounds)
from .errors import DomainError, LogpError
from .geometry import h_lower_bound, h_omega
from .grid import Grid
from .operator import ScalarField, derivative_check, log_p_laplacian
from .whitney import (HalfSpace, empirical_constant, halfspace_hardy_constants, hardy_sides,
                      sandwich_violations, shape_from_dict, tent_family, verify_conditions,
                      whitney_decompose)

SCHEMA_VERSION = 1
COMMANDS = ("eval", "h-omega", "eigen", "frac-eigen", "derivative", "faber-krahn", "scaling",
            "hardy", "whitney", "maxprinciple")


@dataclass
class ExperimentConfig:
    command: str
    N: int = 1
    p: float = 2.0
    domain: dict = field(default_factory=lambda: {"type": "interval", "a": 0.0, "b": 1.0})
    grid: int = 64
    s_list: list = field(default_factory=lambda: [0.1, 0.05, 0.025])
    tol: float = 1e-8
    out: Optional[str] = None
    seed: int = 0
    function: Optional[dict] = None
    points: Optional[list] = None
    r: float = 2.0
    clipped: bool = False
    area: float = math.pi
    halfspace: bool = False
    m_min: int = -6
    m_max: int = 0
    ks: list = field(default_factory=lambda: [1, 2, 3, 4, 5, 6])
    f: float = 1.0

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise DomainError(f"unknown command {self.command!r}")
        self.N, self.grid, self.seed = int(self.N), int(self.grid), int(self.seed)
        self.m_min, self.m_max = int(self.m_min), int(self.m_max)
        self.p, self.tol, self.r, self.area, self.f = (float(self.p), float(self.tol),
                                                       float(self.r), float(self.area),
                                                       float(self.f))
        self.s_list = [float(s) for s in self.s_list]
        self.ks = [int(k) for k in self.ks]
        if not self.tol > 0:
            raise DomainError("tol must be positive")
        if self.grid < 1:
            raise DomainError("grid must be a positive integer")

    @property
    def params(self) -> ProblemParams:
        return ProblemParams(self.N, self.p)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise DomainError(f"unknown config keys: {sorted(extra)}")
        if "command" not in data:
            raise DomainError("config needs a command")
        return cls(**data)


def emit_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True)


def parse_config(text: str) -> ExperimentConfig:
    data = yaml.safe_load(text)
    if not isinstance(data, dict):
        raise DomainError("config must be a mapping")
    return ExperimentConfig.from_dict(data)


# ---------------------------------------------------------------------------
# output

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    if v is None:
        return ""
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    return v


class Output:
    """Collects rows (CSV) or a result mapping (JSON) plus summary entries,
    so partial results survive a failure."""

    def __init__(self, cfg: ExperimentConfig, columns=None):
        self.cfg = cfg
        self.columns = columns
        self.rows: list = []
        self.summary: dict = {}
        self.result: dict = {}
        self.status = "ok"

    def constants(self) -> dict:
        prm = self.cfg.params
        return {"C_Np": kernel_constant(prm), "rho_N": rho_constant(prm)}

    def render(self) -> str:
        if self.columns is None:
            doc = {"schema_version": SCHEMA_VERSION, "command": self.cfg.command,
                   "status": self.status, "config": self.cfg.to_dict(),
                   "constants": self.constants(), "result": self.result}
            return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"
        buf = io.StringIO()
        buf.write(f"# logp-lab {self.cfg.command}\n")
        buf.write(f"# schema_version: {SCHEMA_VERSION}\n")
        buf.write("# config: " + json.dumps(_jsonable(self.cfg.to_dict()), sort_keys=True) + "\n")
        for k, v in self.constants().items():
            buf.write(f"# {k}: {_fmt(v)}\n")
        buf.write(f"# status: {self.status}\n")
        for k, v in self.summary.items():
            buf.write(f"# {k}: {_fmt(v)}\n")
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(_fmt(v) for v in row) + "\n")
        return buf.getvalue()


# ---------------------------------------------------------------------------
# commands

def _domain(cfg):
    dom = shape_from_dict(cfg.domain)
    if dom.dim != cfg.N:
        raise DomainError(f"domain dimension {dom.dim} differs from N={cfg.N}")
    return dom


def _field(cfg, dom) -> ScalarField:
    if cfg.function is not None:
        return ScalarField(**cfg.function)
    blo, bhi = dom.bounding_box()
    c = 0.5 * (blo + bhi)
    return ScalarField("smooth_bump", tuple(c), 0.4 * float(np.min(bhi - blo)))


def _points(cfg, dom) -> np.ndarray:
    if cfg.points is not None:
        return np.asarray(cfg.points, dtype=float).reshape(-1, cfg.N)
    blo, bhi = dom.bounding_box()
    t = (np.arange(1, 6) / 6.0)[:, None]
    pts = blo + t * (bhi - blo)
    return pts[dom.inside(pts)]


def _opts(cfg) -> RayleighOptions:
    return RayleighOptions(tol=cfg.tol, seed=cfg.seed)


def cmd_eval(cfg, out):
    dom = _domain(cfg)
    u = _field(cfg, dom)
    out.columns = [f"x{k + 1}" for k in range(cfg.N)] + ["value", "near", "far", "zero_order",
                                                        "error_estimate"]
    out.summary["field"] = json.dumps(u.to_dict(), sort_keys=True)
    for x in _points(cfg, dom):
        s = log_p_laplacian(u, x, cfg.params, tol=cfg.tol)
        out.rows.append([*x, s.value, *s.split, s.error_estimate])


def cmd_h_omega(cfg, out):
    dom = _domain(cfg)
    out.columns = [f"x{k + 1}" for k in range(cfg.N)] + ["h", "epsilon", "error_estimate",
                                                        "lower_bound"]
    lb = h_lower_bound(dom, cfg.params)
    for x in _points(cfg, dom):
        rep = h_omega(dom, x, cfg.params, tol=cfg.tol)
        out.rows.append([*x, rep.h_value, rep.epsilon_used, rep.quadrature_error_estimate, lb])


def cmd_eigen(cfg, out):
    dom = _domain(cfg)
    g = Grid.uniform(dom, cfg.grid, clipped=cfg.clipped)
    out.columns = ["n", "cells", "eigenvalue", "residual", "iterations", "restarts_agreeing",
                   "sandwich_lower", "sandwich_upper"]
    asm = assemble_log(dom, g, cfg.params)
    res = min_rayleigh(asm, _opts(cfg))
    lo, hi = sandwich_bounds(dom, asm)
    out.rows.append([cfg.grid, g.n, res.eigenvalue, res.gradient_residual, res.iterations,
                     res.restarts_agreeing, lo, hi])


def cmd_frac_eigen(cfg, out):
    dom = _domain(cfg)
    g = Grid.uniform(dom, cfg.grid, clipped=cfg.clipped)
    out.columns = ["s", "eigenvalue", "quotient", "lp_distance"]
    rep = eigen_derivative(dom, g, cfg.params, sorted(cfg.s_list, reverse=True), _opts(cfg))
    for row in zip(rep.s, rep.eigenvalues, rep.quotients, rep.distances):
        out.rows.append(list(row))
    out.summary.update(lambda_log=rep.lambda_log, extrapolated=rep.extrapolated,
                       discrepancy=rep.discrepancy,
                       monotone_to_one=bool(np.all(np.diff(np.abs(rep.eigenvalues - 1.0)) < 0)))


def cmd_derivative(cfg, out):
    dom = _domain(cfg)
    u = _field(cfg, dom)
    out.columns = [f"x{k + 1}" for k in range(cfg.N)] + ["L_value", "extrapolated",
                                                        "discrepancy", "slope"]
    for x in _points(cfg, dom):
        rep = derivative_check(u, x, sorted(cfg.s_list, reverse=True), cfg.params, tol=cfg.tol)
        out.rows.append([*x, rep.L_value, rep.extrapolated, rep.discrepancy, rep.slope])


def cmd_faber_krahn(cfg, out):
    if cfg.N != 2:
        raise DomainError("faber-krahn runs in N = 2")
    out.columns = ["shape", "n", "cells", "eigenvalue", "eigenvalue_refined", "refinement_gap"]
    rows = faber_krahn_experiment(cfg.area, equal_area_shapes(cfg.area), cfg.grid, cfg.params,
                                  refine=True, clipped=cfg.clipped, opts=_opts(cfg))
    for r in rows:
        out.rows.append([r.shape, r.n, r.cells, r.eigenvalue, r.eigenvalue_refined,
                         r.refinement_gap])
    lam = [r.eigenvalue for r in rows]
    gaps = [r.refinement_gap for r in rows]
    margins = [lam[1] - lam[0], lam[2] - lam[1]]
    out.summary.update(ordered=bool(margins[0] > 0 and margins[1] > 0),
                       margins_exceed_gaps=bool(min(margins) > 3.0 * max(gaps)))


def cmd_scaling(cfg, out):
    dom = _domain(cfg)
    g = Grid.uniform(dom, cfg.grid)
    out.columns = ["r", "eigenvalue", "eigenvalue_dilated", "error", "pass"]
    lam = min_rayleigh(assemble_log(dom, g, cfg.params), _opts(cfg)).eigenvalue
    lam_r = min_rayleigh(assemble_log(dom.dilate(cfg.r), g.dilate(cfg.r), cfg.params),
                         _opts(cfg)).eigenvalue
    err = abs(lam_r - lam + cfg.p * math.log(cfg.r))
    out.rows.append([cfg.r, lam, lam_r, err, err <= 1e-6])


def cmd_hardy(cfg, out):
    if cfg.N != 1:
        raise DomainError("hardy runs the 1-D tent family")
    dom = HalfSpace(1) if cfg.halfspace else _domain(cfg)
    boundary = 0.0 if cfg.halfspace else float(dom.bounding_box()[0][0])
    family = tent_family(cfg.ks, boundary)
    members = []
    for k, u in zip(cfg.ks, family):
        rep = hardy_sides(u, dom, cfg.p, cfg.grid)
        members.append({"k": k, **rep.to_dict()})
    out.result["members"] = members
    out.result["empirical_constant"] = max(m["ratio"] for m in members)
    if len(family) > 1:
        prev = empirical_constant(family[:-1], dom, cfg.p, cfg.grid)
        out.result["growth_last_member"] = out.result["empirical_constant"] / prev - 1.0
    if cfg.halfspace:
        c = halfspace_hardy_constants(1, cfg.p)
        out.result["constants"] = {"c1": c.c1, "c2": c.c2, "j0": c.j0}
        out.result["bound_holds"] = all(
            m["lhs"] <= c.c1 * m["seminorm_term"] + c.c2 * m["mass_term"] for m in members)


def cmd_whitney(cfg, out):
    if cfg.halfspace:
        dec = whitney_decompose(HalfSpace(cfg.N), cfg.m_min, cfg.m_max)
        rep = verify_conditions(dec)
        out.result.update(rep.to_dict())
        out.result["cubes"] = len(dec)
        return
    dec = whitney_decompose(_domain(cfg), cfg.m_min, cfg.m_max)
    bad = sandwich_violations(dec)
    out.result.update(cubes=len(dec), covered_measure=float(dec.measure()),
                      sandwich_violations=[str(q) for q in bad], valid=not bad,
                      levels={str(m): len(v) for m, v in dec.levels.items()})


def cmd_maxprinciple(cfg, out):
    dom = _domain(cfg)
    g = Grid.uniform(dom, cfg.grid, clipped=cfg.clipped)
    asm = assemble_log(dom, g, cfg.params)
    out.columns = [f"x{k + 1}" for k in range(cfg.N)] + ["u"]
    u = dirichlet_solve(asm, np.full(g.n, cfg.f))
    for c, v in zip(g.centers, u.values):
        out.rows.append([*c, v])
    out.summary.update(min_u=float(np.min(u.values)), nonnegative=bool(np.min(u.values) >= 0.0))


HANDLERS = {
    "eval": (cmd_eval, "csv"), "h-omega": (cmd_h_omega, "csv"), "eigen": (cmd_eigen, "csv"),
    "frac-eigen": (cmd_frac_eigen, "csv"), "derivative": (cmd_derivative, "csv"),
    "faber-krahn": (cmd_faber_krahn, "csv"), "scaling": (cmd_scaling, "csv"),
    "hardy": (cmd_hardy, "json"), "whitney": (cmd_whitney, "json"),
    "maxprinciple": (cmd_maxprinciple, "csv"),
}


def run(cfg: ExperimentConfig) -> tuple[int, str]:
    """Execute ``cfg``; returns (exit status, rendered output)."""
    handler, kind = HANDLERS[cfg.command]
    out = Output(cfg, columns=[] if kind == "csv" else None)
    status = 0
    try:
        handler(cfg, out)
    except DomainError:
        raise
    except LogpError as exc:
        out.status = f"failed: {type(exc).__name__}: {exc}"
        status = 1
    text = out.render()
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return status, text


# ---------------------------------------------------------------------------
# argument parsing

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="logp-lab",
                                 description="Logarithmic p-Laplacian experiments.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="YAML file with ExperimentConfig fields")
    ap.add_argument("--out", help="output path (default: stdout)")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--tol", type=float)
    ap.add_argument("--grid", type=int, help="cells per axis")
    ap.add_argument("-N", type=int, dest="N")
    ap.add_argument("-p", type=float, dest="p")
    ap.add_argument("--r", type=float, help="dilation factor for scaling")
    ap.add_argument("--halfspace", action="store_true", default=None,
                    help="use the model half-space (hardy, whitney)")
    ap.add_argument("--m-min", type=int, dest="m_min")
    ap.add_argument("--clipped", action="store_true", default=None)
    ap.add_argument("--print-config", action="store_true",
                    help="print the resolved config as YAML and exit")
    return ap


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    data = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            loaded = yaml.safe_load(fh) or {}
        if not isinstance(loaded, dict):
            raise DomainError("config must be a mapping")
        data.update(loaded)
    data["command"] = args.command
    for key in ("out", "seed", "tol", "grid", "N", "p", "r", "halfspace", "m_min", "clipped"):
        val = getattr(args, key)
        if val is not None:
            data[key] = val
    if data.get("N", 1) == 2 and "domain" not in data and not data.get("halfspace"):
        data["domain"] = {"type": "box", "lo": [0.0, 0.0], "hi": [1.0, 1.0]}
    return ExperimentConfig.from_dict(data)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.print_config:
            sys.stdout.write(emit_config(cfg))
            return 0
        status, text = run(cfg)
    except (DomainError, OSError, yaml.YAMLError, TypeError) as exc:
        print(f"logp-lab: invalid configuration: {exc}", file=sys.stderr)
        return 2
    if not cfg.out:
        sys.stdout.write(text)
    elif status:
        print(f"logp-lab: {cfg.command} failed; partial results in {cfg.out}", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
