"""Scenario configs, the pipeline runner and JSON reports.

A scenario is a TOML file::

    name = "shift_small_norm"
    pipeline = "small_norm"          # defect_one | small_norm | bridge | structure
    dim = 1024
    seed = 0
    epsilon = 0.1
    lam = 1.0                        # or [re, im]

    [operator]
    name = "forward_shift_unweighted" # see `almostinv zoo list`
    # any further keys are passed to the zoo builder (power, seed, ...)

    [schedule]                       # lam_n = lam (1 + q r^n), n = 1..count
    q = 0.25
    r = 0.25
    count = 8

    [estar]                          # either an explicit vector ...
    vector = "power:0.75"            # ... or candidates = ["e1", "harmonic", ...]

    [selection]
    kappa_max = 1e4
    gamma_growth = 2.0

    [bridge]
    mode = "full"                    # or "scaled" (stop after alpha*G)
    boundary = 1                     # defaults to the zoo entry's boundary

    [structure]
    orbit_vector = "e1"
    orbit_horizon = 32
    expect_minimal = true
    chain = true
    eigen_select = [1, 3]
    partition = true
    [[structure.contours]]
    center = 0.0
    radius = 2.5

    [tolerances]                     # overrides of DEFAULT_TOLERANCES
    invariance = 1e-8

Every residual in a report carries its value, tolerance and pass flag; a
report passes iff every residual passes and no pipeline error occurred.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import zoo
from .bridge import assemble_small_norm, is_quasinilpotent, scaled_bridge
from .biorthogonal import biorthogonal_from_family
from .errors import AlmostInvError, ConfigInvalid, HypothesisFailed, NoStabilization
from .halfspace import (defect_estimate, invariance_residual, perturbation_from_defect,
                        preannihilator)
from .perturbation import defect_one_construction, small_norm_rank_one
from .resolvent import (ApproachSchedule, boundary_hypothesis, build_family, growth_diagnostic,
                        named_candidate, select_estar, wstar_decay_diagnostic)
from .structure import (cross_pairing, dense_range_chain, eigen_halfspace, orbit_minimality,
                        partition_residual, riesz_projection)

PIPELINES = ("defect_one", "small_norm", "bridge", "structure")
DEFAULT_SCHEDULE = {"q": 1.0, "r": 0.25, "count": 6}

DEFAULT_TOLERANCES = {
    "inveq": 1e-8,
    "cancellation": 1e-8,
    "invariance": 1e-8,
    "roundtrip_invariance": 1e-8,
    "defect": 1.0,            # defect count must not exceed this
    "defect_gap": 1e-4,       # sigma_2 / sigma_1 of the out-of-subspace compression
    "biorthogonality": 1e-8,
    "unit_pairing": 1e-8,
    "sigma_alpha": 1e-10,
    "riesz": 1e-8,
    "partition": 1e-8,
    "orbit": 1e-6,
    "eigen_defect": 0.0,
}


@dataclass
class ScenarioConfig:
    name: str
    pipeline: str
    dim: int
    operator: str
    operator_params: dict = field(default_factory=dict)
    lam: complex = 1.0
    schedule: dict = None           # None: pipeline default
    estar: dict = field(default_factory=dict)
    selection: dict = field(default_factory=dict)
    epsilon: float = None
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    bridge: dict = field(default_factory=dict)
    structure: dict = field(default_factory=dict)

    def tol(self, key):
        return float({**DEFAULT_TOLERANCES, **self.tolerances}[key])


def _complex(v):
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ValueError("complex numbers are written as [re, im]")
        return complex(float(v[0]), float(v[1]))
    return complex(v)


def config_from_dict(d) -> ScenarioConfig:
    errors = {}
    d = dict(d)
    op = d.get("operator", {})
    if isinstance(op, str):
        op = {"name": op}
    op = dict(op)
    try:
        lam = _complex(d.get("lam", 1.0))
    except (TypeError, ValueError) as e:
        errors["lam"] = str(e)
        lam = 0j
    for key in ("name", "pipeline", "dim"):
        if key not in d:
            errors[key] = "missing"
    if "name" not in op:
        errors["operator.name"] = "missing"
    if errors:
        raise ConfigInvalid(errors)
    cfg = ScenarioConfig(
        name=str(d["name"]), pipeline=str(d["pipeline"]), dim=d["dim"],
        operator=str(op.pop("name")), operator_params=op, lam=lam,
        schedule={**DEFAULT_SCHEDULE, **d["schedule"]} if "schedule" in d else None,
        estar=dict(d.get("estar", {})), selection=dict(d.get("selection", {})),
        epsilon=d.get("epsilon"), seed=d.get("seed", 0),
        tolerances=dict(d.get("tolerances", {})), bridge=dict(d.get("bridge", {})),
        structure=dict(d.get("structure", {})))
    validate(cfg)
    return cfg


def validate(cfg: ScenarioConfig):
    errors = {}
    if cfg.pipeline not in PIPELINES:
        errors["pipeline"] = f"must be one of {', '.join(PIPELINES)}"
    if not isinstance(cfg.dim, int) or isinstance(cfg.dim, bool) or cfg.dim < 16:
        errors["dim"] = "must be an integer >= 16"
    if cfg.operator not in zoo.ZOO:
        errors["operator.name"] = f"unknown operator {cfg.operator!r}"
    sch = cfg.schedule
    if sch is None and cfg.pipeline in ("defect_one", "small_norm"):
        sch = DEFAULT_SCHEDULE
    try:
        if sch is None:
            raise LookupError
        q, r, n = float(sch["q"]), float(sch["r"]), sch["count"]
        if not q > 0:
            errors["schedule.q"] = "must be positive"
        if not 0 < abs(r) < 1:
            errors["schedule.r"] = "must satisfy 0 < |r| < 1"
        if not isinstance(n, int) or n < 1:
            errors["schedule.count"] = "must be a positive integer"
        elif isinstance(cfg.dim, int) and n > cfg.dim / 8:
            errors["schedule.count"] = f"N={n} exceeds D/8"
    except LookupError as e:
        if sch is not None:
            errors["schedule"] = f"missing key {e}"
    except (TypeError, ValueError) as e:
        errors["schedule"] = f"malformed ({e})"
    if cfg.epsilon is not None:
        if not isinstance(cfg.epsilon, (int, float)) or not cfg.epsilon > 0:
            errors["epsilon"] = "must be positive"
    elif cfg.pipeline in ("small_norm", "bridge"):
        errors["epsilon"] = f"required by the {cfg.pipeline} pipeline"
    for k, v in cfg.tolerances.items():
        if k not in DEFAULT_TOLERANCES:
            errors[f"tolerances.{k}"] = "unknown tolerance"
        elif not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
            errors[f"tolerances.{k}"] = "must be positive"
    if not isinstance(cfg.seed, int):
        errors["seed"] = "must be an integer"
    if cfg.pipeline in ("defect_one", "small_norm"):
        if "vector" not in cfg.estar and "candidates" not in cfg.estar:
            errors["estar"] = "give either vector or candidates"
    if cfg.bridge.get("mode", "full") not in ("full", "scaled"):
        errors["bridge.mode"] = "must be 'full' or 'scaled'"
    if errors:
        raise ConfigInvalid(errors)
    return cfg


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as e:
        raise ConfigInvalid({"file": f"{path}: {e}"}) from None
    return config_from_dict(data)


def bundled_scenarios() -> dict:
    """``{name: path}`` of the scenarios shipped with the package."""
    root = resources.files("almostinv") / "scenarios"
    return {p.name[:-5]: Path(str(p)) for p in sorted(root.iterdir(), key=lambda p: p.name)
            if p.name.endswith(".toml")}


def apply_overrides(cfg: ScenarioConfig, dim=None, eps=None, tol_overrides=(), seed=None):
    tols = dict(cfg.tolerances)
    errors = {}
    for item in tol_overrides:
        key, sep, val = item.partition("=")
        try:
            if not sep:
                raise ValueError("expected KEY=VAL")
            tols[key.strip()] = float(val)
        except ValueError as e:
            errors[f"tol-override {item}"] = str(e)
    if errors:
        raise ConfigInvalid(errors)
    cfg = replace(cfg, tolerances=tols,
                  dim=cfg.dim if dim is None else dim,
                  epsilon=cfg.epsilon if eps is None else eps,
                  seed=cfg.seed if seed is None else seed)
    return validate(cfg)


# --------------------------------------------------------------------------
# report plumbing
# --------------------------------------------------------------------------

def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [_jsonable(float(x.real)), _jsonable(float(x.imag))]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if np.isfinite(x) else repr(x)
    return x


class _Report:
    def __init__(self, cfg):
        self.cfg = cfg
        self.residuals = {}
        self.objects = {}
        self.flags = {}
        self.timings = {}

    def residual(self, key, value, tol_key=None, tolerance=None, strict=False):
        tol = self.cfg.tol(tol_key or key) if tolerance is None else float(tolerance)
        value = float(value)
        ok = value < tol if strict else value <= tol
        self.residuals[key] = {"value": repr(value), "tolerance": repr(tol),
                               "relation": "<" if strict else "<=", "pass": bool(ok)}

    def timed(self, key):
        report = self

        class _T:
            def __enter__(self):
                self.t = time.perf_counter()

            def __exit__(self, *exc):
                report.timings[key] = round((time.perf_counter() - self.t) * 1e3, 3)
        return _T()

    def as_dict(self, error=None):
        if error is not None:
            self.objects["error"] = {"type": type(error).__name__, "message": str(error)}
        passed = (error is None and bool(self.residuals)
                  and all(r["pass"] for r in self.residuals.values()))
        return _jsonable({"scenario": self.cfg.name, "pass": passed,
                          "residuals": self.residuals, "objects": self.objects,
                          "hypothesis_flags": self.flags, "timings_ms": self.timings})


def _family_summary(fam):
    g = growth_diagnostic(fam) if len(fam) >= 3 else None
    return {"lambdas": fam.lambdas, "norms": fam.norms, "log_norms": np.log(fam.norms),
            "inveq_residuals": fam.inveq_residuals,
            "growth": None if g is None else {"growing": g.growing, "rate": g.rate,
                                              "ratio": g.ratio}}


def _estar_and_family(cfg, T, rep):
    sch = _schedule(cfg.schedule or DEFAULT_SCHEDULE)
    if "vector" in cfg.estar:
        e = named_candidate(cfg.estar["vector"], cfg.dim, cfg.seed)
        e = e / np.linalg.norm(e)
        fam = build_family(T, cfg.lam, sch, e)
        rep.objects["estar"] = {"choice": cfg.estar["vector"]}
    else:
        names = list(cfg.estar["candidates"])
        cands = [named_candidate(n, cfg.dim, cfg.seed) for n in names]
        e, fam = select_estar(T, cfg.lam, sch, cands, return_family=True)
        pick = next(i for i, c in enumerate(cands)
                    if np.allclose(c / np.linalg.norm(c), e, rtol=0, atol=1e-15))
        rep.objects["estar"] = {"choice": names[pick], "candidates": names}
    rep.objects["family"] = _family_summary(fam)
    decay = wstar_decay_diagnostic(fam)
    rep.flags["wstar_decay_first_coords"] = decay.decaying
    return fam


def _schedule(d):
    return ApproachSchedule(float(d["q"]), float(d["r"]), int(d["count"]))


def _check_boundary(cfg, T, rep):
    bh = boundary_hypothesis(T, cfg.lam)
    rep.flags["boundary_point"] = {"holds": bh.holds, "structural": bh.structural,
                                   "numerical_eigenvalue": bh.numerical_eigenvalue,
                                   "reason": bh.reason}
    if not bh.holds:
        raise HypothesisFailed(bh.reason)


# --------------------------------------------------------------------------
# pipelines
# --------------------------------------------------------------------------

def _run_defect_one(cfg, T, rep):
    _check_boundary(cfg, T, rep)
    with rep.timed("family"):
        fam = _estar_and_family(cfg, T, rep)
    with rep.timed("construction"):
        Z = preannihilator(fam.h_stars, cfg.dim)
        res = defect_one_construction(T, fam, Z)
    rep.residual("inveq", fam.max_inveq_residual)
    rep.objects["Z"] = {"codim": Z.codim_in_truncation, "halfspace_proxy": Z.halfspace_proxy_flag}
    rep.objects["already_invariant"] = res.already_invariant
    s = res.defect.residual_spectrum
    rep.objects["defect"] = {"count": res.defect.defect, "threshold": res.defect.threshold,
                             "leading_singular_values": s[:4]}
    rep.residual("defect", res.defect.defect)
    if res.already_invariant:
        rep.residual("invariance", res.invariance)
        return
    rep.residual("cancellation", res.cancellation)
    rep.residual("invariance", res.invariance)
    rep.residual("defect_gap", s[1] / s[0] if s.size > 1 else 0.0)
    rep.objects["perturbation"] = {"norm": res.F.norm, "alpha_norm": np.linalg.norm(res.alpha),
                                   "f_norm": np.linalg.norm(res.f)}
    with rep.timed("roundtrip"):
        Fp = perturbation_from_defect(T, Z, res.f, res.alpha)
        rt = invariance_residual(T + Fp, Z)
    rep.residual("roundtrip_invariance", rt)


def _run_small_norm(cfg, T, rep):
    _check_boundary(cfg, T, rep)
    with rep.timed("family"):
        fam = _estar_and_family(cfg, T, rep)
    rep.residual("inveq", fam.max_inveq_residual)
    sel = {"kappa_max": 1e4, "gamma_growth": 2.0, **cfg.selection}
    with rep.timed("biorthogonal"):
        bio = biorthogonal_from_family(fam, float(sel["kappa_max"]), float(sel["gamma_growth"]))
    rep.objects["selection"] = {"indices": bio.indices, "gram_cond": bio.gram_cond,
                                "M_bound": bio.M_bound}
    with rep.timed("construction"):
        res = small_norm_rank_one(T, fam, bio, cfg.epsilon)
    rep.objects["perturbation"] = {"indices": res.indices, "norm": res.F.norm,
                                   "M_bound": res.M_bound, "tail_sum": res.tail_sum,
                                   "Z_codim": res.Z.codim_in_truncation}
    rep.residual("biorthogonality", res.biorthogonality)
    rep.residual("unit_pairing", res.unit_pairing)
    rep.residual("invariance", res.invariance)
    rep.residual("norm_budget", res.F.norm, tolerance=cfg.epsilon, strict=True)


def _run_bridge(cfg, T, rep):
    entry = zoo.ZOO[cfg.operator]
    boundary = int(cfg.bridge.get("boundary", entry.boundary))
    qn = is_quasinilpotent(T)
    rep.flags["quasinilpotent"] = {"holds": qn, "structural": entry.tag == "Nilpotent"}
    eps = float(cfg.epsilon)
    with rep.timed("bridge"):
        if cfg.bridge.get("mode", "full") == "scaled":
            aG, kr, cert = scaled_bridge(T, eps, boundary=boundary)
        else:
            sch = None if cfg.schedule is None else _schedule(cfg.schedule)
            F, cert = assemble_small_norm(T, eps, boundary=boundary, schedule=sch)
    rep.flags["kernel_range"] = {"n": cert.n, "m": cert.m, "branch": cert.branch,
                                 "proxy": cert.proxy, "assumptions": cert.assumptions}
    rep.objects["certificate"] = cert.as_dict()
    rep.residual("alphaG_budget", cert.alphaG_norm, tolerance=eps / 2, strict=True)
    rep.residual("proxy_margin", cert.sigma_floor / cert.sigma_min, tolerance=1.0, strict=True)
    if cfg.bridge.get("expect_sigma_alpha", False):
        rep.residual("sigma_alpha", abs(cert.sigma_min - cert.alpha))
    if cert.F_norm is None:
        return
    rep.residual("F0_budget", cert.F0_norm, tolerance=eps / 2, strict=True)
    rep.residual("norm_budget", cert.F_norm, tolerance=eps, strict=True)
    rep.residual("rank", cert.F_rank, tolerance=min(cert.n, cert.m) + 1)
    rep.residual("unit_pairing", cert.unit_pairing)
    rep.residual("invariance", cert.invariance)


def _run_structure(cfg, T, rep):
    st = cfg.structure
    if "orbit_vector" in st:
        z = named_candidate(st["orbit_vector"], cfg.dim, cfg.seed)
        with rep.timed("orbit"):
            orb = orbit_minimality(T, z, st.get("orbit_horizon"), cfg.tol("orbit"))
        rep.objects["orbit"] = {"minimal": orb.minimal, "failing_index": orb.failing_index,
                                "collapsed_at": orb.collapsed_at,
                                "distance_min": float(orb.distances.min()),
                                "distance_max": float(orb.distances.max()),
                                "refinement_residual": orb.refinement_residual}
        if "expect_minimal" in st:
            rep.residual("orbit_expectation", float(orb.minimal != bool(st["expect_minimal"])),
                         tolerance=0.0)
        if orb.failing_index is not None:
            rep.residual("orbit_refinement", orb.refinement_residual, "orbit")
    if st.get("chain", False):
        with rep.timed("chain"):
            try:
                ch = dense_range_chain(T)
                rep.objects["chain"] = {"stabilized": True, "j_star": ch.j_star,
                                        "codims": ch.codims, "degenerate": ch.degenerate,
                                        "sigma_min": ch.sigma_min}
            except NoStabilization as e:
                rep.objects["chain"] = {"stabilized": False, "codims": e.codims,
                                        "truncation_artifact": e.truncation_artifact}
    if "eigen_select" in st:
        with rep.timed("eigen"):
            lams, V = np.linalg.eig(np.asarray(T.matrix))
            order = np.lexsort((lams.imag, lams.real))
            pairs = [(lams[i], V[:, i]) for i in order]
            Z = eigen_halfspace(T, pairs, st["eigen_select"])
            d = defect_estimate(T, Z)
            cp = cross_pairing(T, pairs)
        rep.residual("eigen_defect", d.defect)
        rep.objects["eigen"] = {"eigenvalues": [p[0] for p in pairs],
                                "cross_pairing_offdiag_max": float(
                                    np.max(cp - np.diag(np.diag(cp))))}
    contours = st.get("contours", [])
    if contours:
        max_nodes = int(st.get("riesz_max_nodes", 256))
        with rep.timed("riesz"):
            rz = [riesz_projection(T, _complex(c["center"]), float(c["radius"]),
                                   max_nodes=max_nodes) for c in contours]
        rep.objects["riesz"] = [{"center": r.center, "radius": r.radius, "nodes": r.nodes,
                                 "rank": int(round(np.trace(r.P.matrix).real))} for r in rz]
        for i, r in enumerate(rz):
            rep.residual(f"riesz_{i}_idempotency", r.residuals["idempotency"], "riesz")
            rep.residual(f"riesz_{i}_commutation", r.residuals["commutation"], "riesz")
        if st.get("partition", False):
            rep.residual("partition", partition_residual(rz))


_PIPELINES = {"defect_one": _run_defect_one, "small_norm": _run_small_norm,
              "bridge": _run_bridge, "structure": _run_structure}


def run_scenario(cfg: ScenarioConfig) -> dict:
    """Run the configured pipeline; package errors become a failed report."""
    validate(cfg)
    rep = _Report(cfg)
    rep.objects["config"] = {"pipeline": cfg.pipeline, "dim": cfg.dim, "operator": cfg.operator,
                             "lam": cfg.lam, "epsilon": cfg.epsilon, "seed": cfg.seed,
                             "schedule": cfg.schedule}
    rep.flags["zoo_facts"] = zoo.ZOO[cfg.operator].facts
    t0 = time.perf_counter()
    error = None
    try:
        T = zoo.build(cfg.operator, cfg.dim, {"seed": cfg.seed, **cfg.operator_params})
        _PIPELINES[cfg.pipeline](cfg, T, rep)
    except AlmostInvError as e:
        error = e
    rep.timings["total"] = round((time.perf_counter() - t0) * 1e3, 3)
    return rep.as_dict(error)


def write_report(report, path):
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")


def strip_timings(report):
    return {k: v for k, v in report.items() if k != "timings_ms"}
