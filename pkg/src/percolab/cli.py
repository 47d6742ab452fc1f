"""Command-line front end: ``percolab <command> [--config FILE] [flags]``.

A run is configured by one JSON document (``--config``) whose keys are
validated against the command's schema; ``--set key=value`` and the common
flags override it.  Every run writes CSV rows and a JSON document and prints
a one-line summary.  Exit codes: 0 success, 2 configuration error, 3 runtime
error, 4 failed ``--assert``.

CSV columns (all commands): event, d, s, L, N, p, q, mean, stderr, n, seed,
extra, config.  ``extra`` holds command-specific fields as JSON and
``config`` the resolved configuration (without ``workers``).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from fractions import Fraction
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .sampling import CSV_COLUMNS

COLUMNS = CSV_COLUMNS + ("extra", "config")
EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_ASSERT = 0, 2, 3, 4


class ConfigError(Exception):
    pass


# schemas ------------------------------------------------------------------------

class Base(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = Field(0, ge=0, lt=2**64)
    workers: int = Field(1, ge=1)
    expect_min: Optional[float] = None
    expect_max: Optional[float] = None


class Lattice(Base):
    d: int = Field(3, ge=2)
    s: int = Field(2, ge=1)
    class_rule: Literal["defect_sublattice", "axis_direction"] = "defect_sublattice"
    p: float = Field(0.1, ge=0, le=1)
    q: float = Field(0.5, ge=0, le=1)
    t: Optional[float] = Field(None, ge=0, le=1)


class ThetaConfig(Lattice):
    n: int = Field(1, ge=1)
    n_samples: int = Field(10000, ge=1)


class OneArmConfig(Lattice):
    m_list: list[int] = Field(default_factory=lambda: list(range(4, 25, 4)))
    n_samples: int = Field(10000, ge=1)


class CrossingConfig(Lattice):
    L: int = Field(16, ge=2)
    N: Optional[int] = Field(None, ge=0)
    axis: int = Field(0, ge=0)
    n_samples: int = Field(1000, ge=1)


class BisectConfig(Lattice):
    L: int = Field(32, ge=2)
    N: Optional[int] = Field(None, ge=0)
    tolerance: float = Field(2e-3, gt=0)
    samples_per_step: int = Field(100, ge=2)
    max_samples: int = Field(800, ge=2)


class CurveConfig(BisectConfig):
    p_list: list[float] = Field(default_factory=lambda: [0.1, 0.2])


class SlabConfig(BisectConfig):
    N_list: list[Optional[int]] = Field(default_factory=lambda: [0, 1, 2, 4, 8, None])


class UniquenessConfig(CrossingConfig):
    min_fraction: float = Field(0.01, gt=0, le=1)


class TrifurcationConfig(Lattice):
    n_list: list[int] = Field(default_factory=lambda: [8, 12, 16])
    n_samples: int = Field(100, ge=1)


class CertificateConfig(Lattice):
    L: int = Field(4, ge=1)
    n_samples: int = Field(20000, ge=1)
    p_list: Optional[list[float]] = None
    q_list: Optional[list[float]] = None


class GMConfig(Lattice):
    kind: Literal["U_count", "V_count", "seed_reach", "finite_size_conditional"] = "seed_reach"
    alpha: str = "1/2"
    beta: str = "1"
    m: int = Field(1, ge=0)
    n: int = Field(8, ge=1)
    gamma: float = Field(0.0, ge=0, le=1)
    delta: float = Field(0.1, ge=0, le=1)
    mode: Literal["truncated", "rejection"] = "truncated"
    n_samples: int = Field(1000, ge=1)

    @field_validator("alpha", "beta", mode="before")
    @classmethod
    def _rational(cls, v):
        try:
            Fraction(str(v))
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"not a rational number: {v!r}") from exc
        return str(v)


class RenormCliConfig(Lattice):
    preset: Literal["desk", "full"] = "desk"
    n: Optional[int] = Field(None, ge=1)
    m: Optional[int] = Field(None, ge=0)
    alpha: Optional[str] = None
    delta: Optional[float] = Field(None, ge=0, lt=1)
    eta: float = Field(0.08, gt=0, lt=1)
    max_sites: int = Field(1, ge=1)
    strict: bool = False
    step_limit: Optional[int] = Field(None, ge=1)
    sample: int = Field(0, ge=0)
    trace: Optional[str] = None


class OracleConfig(Lattice):
    event: Literal["arm", "cluster_size", "sweep"] = "arm"
    n: int = Field(1, ge=1)
    k: int = Field(4, ge=0, le=5)
    p_num: Optional[list[int]] = None
    denom: int = Field(10, ge=1)


class MTPConfig(Lattice):
    shape: list[int] = Field(default_factory=lambda: [6, 6, 3])
    transport: Literal["diagonal", "connectivity", "nearest_cluster"] = "nearest_cluster"
    mode: Literal["exact", "monte_carlo"] = "monte_carlo"
    n_samples: int = Field(100000, ge=2)


SCHEMAS = {"theta": ThetaConfig, "one-arm": OneArmConfig, "crossing": CrossingConfig,
           "bisect": BisectConfig, "qc-curve": CurveConfig, "slab-curve": SlabConfig,
           "uniqueness": UniquenessConfig, "trifurcations": TrifurcationConfig,
           "certificate": CertificateConfig, "gm-event": GMConfig, "renorm": RenormCliConfig,
           "oracle": OracleConfig, "mtp-check": MTPConfig}


# helpers -------------------------------------------------------------------------

def _params(c: Lattice):
    from .field import ParamPoint
    return ParamPoint(c.p, c.q, c.t)


def _row(event, c, mean, stderr, n, L="", N="", p=None, q=None, **extra) -> dict:
    return {"event": event, "d": getattr(c, "d", ""), "s": getattr(c, "s", ""), "L": L,
            "N": "" if N is None else N, "p": c.p if p is None else p,
            "q": c.q if q is None else q, "mean": mean, "stderr": stderr, "n": n,
            "seed": c.seed, "extra": extra}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


# commands: each returns (rows, payload, summary text, summary value, default check) ------

def cmd_theta(c: ThetaConfig):
    from .estimators import theta
    r = theta(c.d, c.s, _params(c), c.n, c.n_samples, c.seed, c.class_rule, c.workers)
    rows = [_row("theta", c, r.mean, r.stderr, r.n, L=c.n)]
    return rows, r.to_dict(), f"theta n={c.n}: {r.mean:.6g} ± {r.stderr:.2g}", r.mean, None


def cmd_one_arm(c: OneArmConfig):
    from .estimators import one_arm_profile
    prof = one_arm_profile(c.d, c.s, _params(c), c.m_list, c.n_samples, c.seed,
                           class_rule=c.class_rule, workers=c.workers)
    rows = [_row("one_arm", c, r.mean, r.stderr, r.n, L=m) for m, r in zip(prof.m, prof.records)]
    payload = {"m": prof.m, "decay_rate": prof.decay_rate, "intercept": prof.intercept,
               "r2": prof.r2, "dropped": prof.dropped, "degenerate": prof.degenerate,
               "records": [r.to_dict() for r in prof.records]}
    ok = (not prof.degenerate) and prof.decay_rate > 0 and prof.r2 >= 0.98
    return (rows, payload, f"one-arm decay rate {prof.decay_rate:.4g} (R^2 {prof.r2:.4f})",
            prof.decay_rate, ok)


def cmd_crossing(c: CrossingConfig):
    from .estimators import crossing_probability
    from .lattice import LatticeSpec
    spec = LatticeSpec.crossing_box(c.d, c.s, c.L, c.N, c.class_rule)
    r = crossing_probability(spec, _params(c), c.axis, c.n_samples, c.seed, c.workers)
    rows = [_row("crossing", c, r.mean, r.stderr, r.n, L=c.L, N=c.N, axis=c.axis)]
    return rows, r.to_dict(), f"crossing L={c.L}: {r.mean:.6g} ± {r.stderr:.2g}", r.mean, None


def _bisect_one(c: BisectConfig, p: float, N):
    from .estimators import bisect_critical_q
    from .lattice import LatticeSpec
    spec = LatticeSpec.crossing_box(c.d, c.s, c.L, N, c.class_rule)
    return bisect_critical_q(spec, p, tolerance=c.tolerance, samples_per_step=c.samples_per_step,
                             seed=c.seed, max_samples=c.max_samples, t=c.t, workers=c.workers)


def _qc_row(c, est, p, N):
    return _row("q_c", c, est.q_hat, est.stderr, est.n_samples, L=c.L, N=N, p=p, q=est.q_hat,
                ci=list(est.ci), flag=est.flag, drift=est.drift)


def cmd_bisect(c: BisectConfig):
    est = _bisect_one(c, c.p, c.N)
    rows = [_qc_row(c, est, c.p, c.N)]
    return rows, est.to_dict(), f"q_c({c.p}) ≈ {est.q_hat:.4f} ± {est.stderr:.2g}", est.q_hat, None


def cmd_qc_curve(c: CurveConfig):
    ests = [_bisect_one(c, p, c.N) for p in c.p_list]
    rows = [_qc_row(c, e, p, c.N) for p, e in zip(c.p_list, ests)]
    qs = [e.q_hat for e in ests]
    dec = all(a > b for a, b in zip(qs, qs[1:]))
    text = "q_c curve: " + ", ".join(f"{p}:{q:.4f}" for p, q in zip(c.p_list, qs))
    return rows, {"p": c.p_list, "estimates": [e.to_dict() for e in ests]}, text, qs[-1], dec


def cmd_slab_curve(c: SlabConfig):
    ests = [_bisect_one(c, c.p, N) for N in c.N_list]
    rows = [_qc_row(c, e, c.p, N) for N, e in zip(c.N_list, ests)]
    qs = [e.q_hat for e in ests]
    text = "slab curve: " + ", ".join(f"N={'full' if N is None else N}:{q:.4f}"
                                      for N, q in zip(c.N_list, qs))
    return rows, {"N": c.N_list, "estimates": [e.to_dict() for e in ests]}, text, qs[-1], None


def cmd_uniqueness(c: UniquenessConfig):
    from .estimators import spanning_fraction
    from .lattice import LatticeSpec
    spec = LatticeSpec.crossing_box(c.d, c.s, c.L, c.N, c.class_rule)
    rec, counts = spanning_fraction(spec, _params(c), c.axis, c.min_fraction, c.n_samples,
                                    c.seed, c.workers)
    hist = {int(k): int(v) for k, v in zip(*np.unique(counts, return_counts=True))}
    rows = [_row("unique_spanning", c, rec.mean, rec.stderr, rec.n, L=c.L, N=c.N,
                 histogram=hist)]
    return (rows, {"record": rec.to_dict(), "histogram": hist},
            f"exactly one spanning cluster in {rec.mean:.4f} of samples", rec.mean, None)


def cmd_trifurcations(c: TrifurcationConfig):
    from .clusters import find_trifurcations
    from .field import UniformField
    from .lattice import LatticeSpec
    from .sampling import EstimateRecord
    params = _params(c)
    rows, recs, bound_ok = [], [], True
    for i, n in enumerate(c.n_list):
        spec = LatticeSpec.box(c.d, c.s, n, c.class_rule)
        vals = []
        for k in range(c.n_samples):
            rep = find_trifurcations(UniformField(c.seed, i * c.n_samples + k), spec, params)
            bound_ok &= rep.count <= rep.shell_size
            vals.append(rep.count)
        r = EstimateRecord.from_values(vals, c.seed, "trifurcations", indicator=False)
        recs.append(r)
        rows.append(_row("trifurcations", c, r.mean, r.stderr, r.n, L=n))
    means = np.array([r.mean for r in recs])
    slope = math.nan
    if len(c.n_list) >= 2 and np.all(means > 0):
        slope = float(np.polyfit(np.log(c.n_list), np.log(means), 1)[0])
    payload = {"n": c.n_list, "mean": means.tolist(), "exponent": slope,
               "bounded_by_shell": bool(bound_ok)}
    return rows, payload, f"trifurcation exponent {slope:.3f}", slope, bool(bound_ok)


def holding_region_closed(p_list, q_list, holds: dict) -> bool:
    """True when holding at (p, q) implies holding at every grid point below it."""
    for i, p in enumerate(p_list):
        for j, q in enumerate(q_list):
            if holds[(p, q)] and not all(holds[(a, b)] for a in p_list[:i + 1]
                                         for b in q_list[:j + 1]):
                return False
    return True


def cmd_certificate(c: CertificateConfig):
    from .estimators import subcritical_certificate
    from .field import ParamPoint
    p_list = sorted(c.p_list) if c.p_list else [c.p]
    q_list = sorted(c.q_list) if c.q_list else [c.q]
    rows, certs, holds = [], [], {}
    for p in p_list:
        for q in q_list:
            cert = subcritical_certificate(c.d, c.s, ParamPoint(p, q, c.t), c.L, c.n_samples,
                                           c.seed, c.class_rule, c.workers)
            holds[(p, q)] = cert.holds
            certs.append({"p": p, "q": q, **cert.to_dict()})
            rows += [_row("certificate", c, phi, rec.stderr * cert.K_prime * c.L ** c.d, rec.n,
                          L=c.L, p=p, q=q, center=list(v), phi_upper=up, holds=cert.holds)
                     for v, phi, up, rec in zip(cert.representatives, cert.phi,
                                                cert.phi_upper, cert.records)]
    closed = holding_region_closed(p_list, q_list, holds)
    n_hold = sum(holds.values())
    payload = {"certificates": certs, "downward_closed": closed}
    if len(holds) == 1:
        ok = next(iter(holds.values()))
        text = f"certificate {'holds' if ok else 'fails'} at (p,q)=({p_list[0]},{q_list[0]})"
        return rows, payload, text, float(ok), ok
    text = f"certificate holds at {n_hold}/{len(holds)} grid points, downward closed: {closed}"
    return rows, payload, text, float(n_hold), closed


def cmd_gm_event(c: GMConfig):
    from .estimators import finite_size_conditional, gm_seed_event
    from .gmgeometry import GMEventSpec, seed_box
    ev = GMEventSpec(Fraction(c.alpha), Fraction(c.beta), c.m, c.n, c.d, c.s, c.kind)
    if c.kind == "finite_size_conditional":
        R = seed_box(np.zeros(c.d, dtype=np.int64), c.m, c.s)
        r = finite_size_conditional(_params(c), ev, R, c.gamma, c.delta, c.n_samples, c.seed,
                                    c.mode, c.workers)
    else:
        r = gm_seed_event(_params(c), ev, c.n_samples, c.seed, c.workers)
    rows = [_row(c.kind, c, r.mean, r.stderr, r.n, L=ev.radius, alpha=c.alpha, beta=c.beta,
                 m=c.m, n_scale=c.n, degenerate=r.meta.get("degenerate"),
                 acceptance=r.meta.get("acceptance"))]
    return rows, r.to_dict(), f"{c.kind}: {r.mean:.6g} ± {r.stderr:.2g}", r.mean, None


def renorm_config(c: RenormCliConfig):
    from .gmrenorm import RenormConfig
    kw = {"strict": c.strict, "step_limit": c.step_limit}
    for name in ("n", "m", "delta"):
        if getattr(c, name) is not None:
            kw[name] = getattr(c, name)
    if c.alpha is not None:
        kw["alpha"] = Fraction(c.alpha)
    kw["d"], kw["s"] = c.d, c.s
    if c.preset == "full":
        kw.pop("delta", None)
        return RenormConfig.full(eta=c.eta, **kw)
    return RenormConfig.desk(**kw)


def cmd_renorm(c: RenormCliConfig):
    from .gmrenorm import audit, certify_path, grow_renormalized_cluster
    cfg = renorm_config(c)
    growth, orc = grow_renormalized_cluster(cfg, _params(c), c.seed, c.max_sites, c.sample)
    eng = orc.engine
    au = audit(eng)
    rows, sites = [], []
    for st in growth.steps:
        res = orc.results[st.site]
        cert = None
        if res.Z:
            paths = [certify_path(eng, res.entry, res.exit_lower),
                     certify_path(eng, res.entry, res.exit_upper)]
            cert = all(p.found and p.reverified for p in paths)
        rows.append(_row("renorm_site", c, float(res.Z), 0.0, 1, site=list(st.site),
                         rho_hat=st.rho_hat, failed_phase=res.failed_phase,
                         steps=res.steps, preconditions=len(res.preconditions),
                         certified_paths=cert))
        d = res.to_dict()
        d["certified_paths"] = cert
        sites.append(d)
    if c.trace:
        eng.write_trace(c.trace)
    payload = {"config": cfg.to_dict(), "growth": growth.to_dict(), "sites": sites,
               "audit": au.to_dict(), "lambda_target": cfg.lam_target}
    ok = au.clean and au.zeta_bound_violations == 0 and all(
        s["certified_paths"] in (None, True) for s in sites)
    text = (f"renorm: {len(growth.A)}/{len(growth.steps)} sites open, rho_hat "
            f"{growth.rho_hat:.3f}, audit {'clean' if ok else 'VIOLATIONS'}")
    return rows, payload, text, growth.rho_hat, ok


def cmd_oracle(c: OracleConfig):
    from .oracle import (arm_probability, box_instance, cluster_size, exact_expected,
                         inequality_sweep)
    if c.event == "sweep":
        pn = c.p_num if c.p_num is not None else [c.denom // 2] * c.k
        res = inequality_sweep(c.k, pn, c.denom)
        ok = res.fkg_violations == 0 and res.bk_violations == 0
        rows = [_row("fkg_bk_sweep", c, float(res.fkg_violations + res.bk_violations), 0.0,
                     res.pairs, k=c.k, p_num=list(pn), denom=c.denom)]
        return (rows, dict(res.__dict__), f"sweep k={c.k}: {res.pairs} pairs, "
                f"{res.fkg_violations} FKG / {res.bk_violations} BK violations",
                float(res.fkg_violations + res.bk_violations), ok)
    rule = None if c.class_rule == "defect_sublattice" else c.class_rule
    if c.event == "arm":
        v = arm_probability(c.d, c.s, _params(c), c.n, rule)
    else:
        inst = box_instance(c.d, c.s, c.n, _params(c), rule)
        v = exact_expected(inst, cluster_size(inst, inst.vertex_index((0,) * c.d)), batched=True)
    rows = [_row(f"oracle_{c.event}", c, v, 0.0, 0, L=c.n)]
    return rows, {"event": c.event, "value": v}, f"exact {c.event}: {v!r}", v, None


def cmd_mtp(c: MTPConfig):
    from .lattice import LatticeSpec
    from .oracle import TRANSPORTS, mass_transport_check
    if len(c.shape) != c.d:
        raise ConfigError("shape: needs one entry per dimension")
    spec = LatticeSpec.torus(c.d, c.s, c.shape, class_rule=c.class_rule)
    r = mass_transport_check(spec, TRANSPORTS[c.transport](), _params(c), c.mode, c.n_samples,
                             c.seed, workers=c.workers)
    rows = [_row("mtp_delta", c, r.delta, r.stderr, r.n, L=c.shape[0], lhs=r.lhs, rhs=r.rhs,
                 transport=c.transport, mode=c.mode)]
    if c.mode == "exact":
        ok = abs(r.delta) <= 1e-12 * max(abs(r.lhs), abs(r.rhs), 1e-300)
    else:
        ok = abs(r.delta) <= 4 * r.stderr
    return rows, r.to_dict(), (f"mtp {c.transport}: lhs {r.lhs:.6g} rhs {r.rhs:.6g} "
                               f"delta {r.delta:.3g} ± {r.stderr:.2g}"), r.delta, ok


COMMANDS = {"theta": cmd_theta, "one-arm": cmd_one_arm, "crossing": cmd_crossing,
            "bisect": cmd_bisect, "qc-curve": cmd_qc_curve, "slab-curve": cmd_slab_curve,
            "uniqueness": cmd_uniqueness, "trifurcations": cmd_trifurcations,
            "certificate": cmd_certificate, "gm-event": cmd_gm_event, "renorm": cmd_renorm,
            "oracle": cmd_oracle, "mtp-check": cmd_mtp}


# configuration ---------------------------------------------------------------------

def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def resolve_config(command: str, config_path: str | None, sets: list, flags: dict):
    doc = {}
    if config_path:
        try:
            doc = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        doc.pop("command", None) if doc.get("command") in (None, command) else None
        if "command" in doc:
            raise ConfigError(f"command: config is for {doc['command']!r}, not {command!r}")
    for item in sets or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        doc[k.strip()] = _parse_value(v)
    doc.update({k: v for k, v in flags.items() if v is not None})
    try:
        return SCHEMAS[command].model_validate(doc)
    except ValidationError as exc:
        err = exc.errors()[0]
        path = ".".join(str(x) for x in err["loc"]) or "<root>"
        raise ConfigError(f"{path}: {err['msg']}") from exc


def embedded_config(command: str, c: Base) -> str:
    d = c.model_dump(exclude={"workers"})
    d["command"] = command
    return json.dumps(_jsonable(d), sort_keys=True, separators=(",", ":"))


def render_csv(rows: list, config_json: str) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        out = {k: r.get(k, "") for k in CSV_COLUMNS}
        for k, v in out.items():
            if isinstance(v, float):
                out[k] = repr(v)
        out["extra"] = json.dumps(_jsonable(r.get("extra", {})), sort_keys=True,
                                  separators=(",", ":"))
        out["config"] = config_json
        w.writerow(out)
    return buf.getvalue()


def render_json(command: str, rows: list, payload, config_json: str) -> str:
    doc = {"command": command, "config": json.loads(config_json), "rows": _jsonable(rows),
           "result": _jsonable(payload)}
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="percolab", description=__doc__.split("\n")[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="JSON configuration document")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override one configuration field (value parsed as JSON)")
    ap.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    ap.add_argument("--workers", type=int, help="threads for sample-parallel work")
    ap.add_argument("--out", help="output path; writes <stem>.csv and <stem>.json")
    ap.add_argument("--format", choices=("csv", "json"), default="csv",
                    help="format written to stdout when --out is absent")
    ap.add_argument("--assert", dest="check", action="store_true",
                    help="exit 4 unless the run's acceptance check passes")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = resolve_config(args.command, args.config, args.set,
                             {"seed": args.seed, "workers": args.workers})
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        rows, payload, text, value, default_ok = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    cj = embedded_config(args.command, cfg)
    csv_text = render_csv(rows, cj)
    json_text = render_json(args.command, rows, payload, cj)
    if args.out:
        stem = Path(args.out)
        stem = stem.with_suffix("") if stem.suffix in (".csv", ".json") else stem
        stem.parent.mkdir(parents=True, exist_ok=True)
        Path(f"{stem}.csv").write_text(csv_text, encoding="utf-8", newline="")
        Path(f"{stem}.json").write_text(json_text, encoding="utf-8", newline="")
        print(text)
    else:
        sys.stdout.write(csv_text if args.format == "csv" else json_text)
        print(text, file=sys.stderr)
    if args.check:
        ok = default_ok if default_ok is not None else True
        if cfg.expect_min is not None:
            ok = ok and value >= cfg.expect_min
        if cfg.expect_max is not None:
            ok = ok and value <= cfg.expect_max
        if not ok:
            print("assertion failed", file=sys.stderr)
            return EXIT_ASSERT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
