"""Command-line front end: ``shortvol {smile,atm,rate,path,validate}``.

Tables go to ``--out`` (or stdout) as CSV or JSON; diagnostics go to stderr,
with the level taken from ``SHORTVOL_LOG``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .cev import cev_atm_skew, cev_optimal_path, cev_rate_closed, novikov_horizon
from .errors import DomainError, NumericError, ShortVolError
from .model import CevSpec, Market, constant_model, make_cev_model
from .pricers import bs_implied_vol, cev_exact_price, mc_price, otm_kind
from .ratefn import optimal_path, rate_function
from .smile import atm_skew_rho, atm_vol_rho, bbf_vol, implied_vol_asymptotic

log = logging.getLogger("shortvol")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VALIDATION = 0, 2, 3, 4


class ConfigError(ShortVolError):
    pass


@dataclass
class RunConfig:
    model: str = "cev"
    beta: float = -0.5
    sigma: float = 0.14
    s0: float = 2.0
    r: float = 0.1
    q: float = 0.0
    T: float = 1.0
    kmin: float = -1.0
    kmax: float = 1.0
    n: int = 61
    grid_var: str = "x"
    strike: list = field(default_factory=list)
    sigmas: list = field(default_factory=list)
    n_samples: int = 101
    out: str | None = None
    format: str = "csv"
    seed: int = 0
    mc_paths: int = 200_000
    mc_steps: int | None = None
    bbf: bool = False
    exact: bool = False
    mc: bool = False
    slow: bool = True
    tol_scale: float = 1.0

    def validate(self):
        if self.model not in ("cev", "constant"):
            raise ConfigError(f"unknown model {self.model!r}")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {self.format!r}")
        if self.grid_var not in ("k", "x"):
            raise ConfigError("grid_var must be k or x")
        if self.n < 1:
            raise ConfigError("n must be at least 1")
        if self.n > 1 and not self.kmax > self.kmin:
            raise ConfigError("grid must be strictly increasing: need kmax > kmin")
        if self.mc_paths < 1 or (self.mc_steps is not None and self.mc_steps < 1):
            raise ConfigError("mc paths and steps must be positive")
        try:
            self.market()
            self.vol_model()
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc

    def market(self) -> Market:
        return Market(self.s0, self.r, self.q, self.T)

    def cev_spec(self, sigma=None) -> CevSpec:
        return CevSpec(self.sigma if sigma is None else sigma, self.beta)

    def vol_model(self, sigma=None):
        if self.model == "constant":
            return constant_model(self.sigma if sigma is None else sigma)
        return make_cev_model(self.cev_spec(sigma))

    def grid(self):
        if self.n == 1:
            return np.array([self.kmin])
        return np.linspace(self.kmin, self.kmax, self.n)


_FIELD_NAMES = {f.name for f in fields(RunConfig)}


def _floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _common_parser():
    p = argparse.ArgumentParser(add_help=False)
    S = argparse.SUPPRESS
    p.add_argument("--config", help="JSON file with flat keys mirroring the flags", default=S)
    p.add_argument("--model", choices=["cev", "constant"], default=S)
    p.add_argument("--beta", type=float, default=S)
    p.add_argument("--sigma", type=float, default=S)
    p.add_argument("--s0", type=float, default=S)
    p.add_argument("--r", type=float, default=S)
    p.add_argument("--q", type=float, default=S)
    p.add_argument("--T", type=float, default=S)
    p.add_argument("--out", default=S, help="output file (default stdout)")
    p.add_argument("--format", choices=["csv", "json"], default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--mc-paths", dest="mc_paths", type=int, default=S)
    p.add_argument("--mc-steps", dest="mc_steps", type=int, default=S)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    S = argparse.SUPPRESS
    parser = argparse.ArgumentParser(prog="shortvol", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("smile", parents=[common], help="asymptotic smile on a strike grid")
    sp.add_argument("--kmin", type=float, default=S)
    sp.add_argument("--kmax", type=float, default=S)
    sp.add_argument("--n", type=int, default=S)
    sp.add_argument("--strike", type=_floats, default=S, help="explicit comma-separated strikes; overrides the grid")
    sp.add_argument("--grid-var", dest="grid_var", choices=["k", "x"], default=S,
                    help="grid in log-strike k or log-moneyness x (default x)")
    sp.add_argument("--bbf", action=argparse.BooleanOptionalAction, default=S, help="add the zero-carry column")
    sp.add_argument("--exact", action=argparse.BooleanOptionalAction, default=S, help="add exact CEV implied vols")
    sp.add_argument("--mc", action=argparse.BooleanOptionalAction, default=S, help="add Monte Carlo implied vols")

    sa = sub.add_parser("atm", parents=[common], help="ATM level, normalized skew and Novikov horizon")
    sa.add_argument("--sigmas", type=_floats, default=S, help="comma-separated sigma grid for a normalized ATM table")
    sa.add_argument("--exact", action=argparse.BooleanOptionalAction, default=S)

    sr = sub.add_parser("rate", parents=[common], help="rate function at one or more strikes")
    sr.add_argument("--strike", type=_floats, default=S, help="comma-separated strikes")

    sq = sub.add_parser("path", parents=[common], help="optimal log-price paths")
    sq.add_argument("--strike", type=_floats, default=S)
    sq.add_argument("--n-samples", dest="n_samples", type=int, default=S)

    sv = sub.add_parser("validate", parents=[common], help="run the validation suite")
    sv.add_argument("--mc", action=argparse.BooleanOptionalAction, default=S, help="Monte Carlo gates (default on)")
    sv.add_argument("--slow", action=argparse.BooleanOptionalAction, default=S)
    sv.add_argument("--tol-scale", dest="tol_scale", type=float, default=S,
                    help="multiply every tolerance; values < 1 tighten the gates")
    return parser


def load_config(ns: argparse.Namespace) -> RunConfig:
    values = {}
    if getattr(ns, "config", None):
        try:
            with open(ns.config, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {ns.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(data) - _FIELD_NAMES
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        values.update(data)
    values.update({k: v for k, v in vars(ns).items() if k in _FIELD_NAMES})
    if ns.command == "validate":
        values.setdefault("mc", True)
        values.setdefault("format", "json")
    try:
        cfg = RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    if isinstance(cfg.strike, (int, float)):
        cfg.strike = [float(cfg.strike)]
    cfg.validate()
    return cfg


# Output ------------------------------------------------------------------------


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "" if not math.isfinite(v) else format(float(v), ".17g")
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _json_value(v):
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, (float, np.floating)):
        return float(v) if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    return v


def emit(cfg: RunConfig, command: str, columns, rows, extra_meta=None):
    if cfg.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(row.get(c)) for c in columns])
        text = buf.getvalue()
    else:
        meta = {"command": command, "config": asdict(cfg)}
        if extra_meta:
            meta.update(extra_meta)
        payload = {"meta": meta, "rows": [{c: _json_value(row.get(c)) for c in columns} for row in rows]}
        text = json.dumps(payload, indent=2, allow_nan=False) + "\n"
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# Commands ----------------------------------------------------------------------


def _exact_vol(cfg, mk, K):
    kind = otm_kind(mk, K)
    res = cev_exact_price(cfg.cev_spec(), mk, K, kind)
    for w in res.warnings:
        log.warning("K=%g: %s", K, w)
    return bs_implied_vol(mk, K, res.price, kind)


def _mc_vol(cfg, mk, K, seed):
    kind = otm_kind(mk, K)
    res = mc_price(cfg.vol_model(), mk, K, kind, n_paths=cfg.mc_paths, n_steps=cfg.mc_steps, seed=seed)
    return bs_implied_vol(mk, K, res.price, kind), res.stderr


def cmd_smile(cfg: RunConfig) -> int:
    if cfg.exact and cfg.model != "cev":
        raise ConfigError("--exact needs the cev model")
    mk = cfg.market()
    model = cfg.vol_model()
    columns = ["k", "x", "vol_asymptotic_rho"]
    if cfg.bbf:
        columns.append("vol_bbf")
    if cfg.exact:
        columns.append("vol_exact")
    if cfg.mc:
        columns += ["vol_mc", "mc_price_stderr"]
    columns += ["region", "region3"]
    if cfg.strike:
        ks = [math.log(K / mk.s0) for K in _strikes(cfg, mk)]
        if any(b <= a for a, b in zip(ks, ks[1:])):
            raise ConfigError("strikes must be strictly increasing")
        points = [(k, k - mk.rho, K) for k, K in zip(ks, cfg.strike)]
    else:
        points = []
        for g in cfg.grid():
            # keep the grid variable exact in the output
            x = float(g) if cfg.grid_var == "x" else float(g) - mk.rho
            k = x + mk.rho if cfg.grid_var == "x" else float(g)
            points.append((k, x, mk.s0 * math.exp(k)))
    rows, n_ok = [], 0
    for i, (k, x, K) in enumerate(points):
        row = {"k": k, "x": x}
        try:
            pt = implied_vol_asymptotic(model, mk, K)
            row["vol_asymptotic_rho"] = pt.vol
            row["region"] = pt.region
            row["region3"] = pt.region == "region3"
            n_ok += 1
        except ShortVolError as exc:
            log.warning("asymptotic vol failed at k=%.6g: %s", k, exc)
        for col, fn in (("vol_bbf", lambda: bbf_vol(model, mk, K).vol), ("vol_exact", lambda: _exact_vol(cfg, mk, K))):
            if col in columns:
                try:
                    row[col] = fn()
                except ShortVolError as exc:
                    log.warning("%s failed at k=%.6g: %s", col, k, exc)
        if cfg.mc:
            try:
                row["vol_mc"], row["mc_price_stderr"] = _mc_vol(cfg, mk, K, cfg.seed + i)
            except ShortVolError as exc:
                log.warning("vol_mc failed at k=%.6g: %s", k, exc)
        rows.append(row)
    emit(cfg, "smile", columns, rows)
    if n_ok == 0:
        log.error("no grid point could be evaluated")
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_atm(cfg: RunConfig) -> int:
    mk = cfg.market()
    if cfg.exact and cfg.model != "cev":
        raise ConfigError("--exact needs the cev model")
    sigmas = cfg.sigmas or [cfg.sigma]
    columns = ["sigma", "atm_vol", "atm_vol_normalized", "normalized_skew"]
    if cfg.exact:
        columns += ["atm_vol_exact", "atm_vol_exact_normalized"]
    if cfg.model == "cev":
        columns.append("novikov_horizon")
    rows = []
    for s in sigmas:
        model = cfg.vol_model(s)
        level = float(model.sigma(mk.s0))  # local vol at spot, the zero-carry ATM value
        row = {"sigma": s, "atm_vol": atm_vol_rho(model, mk), "normalized_skew": atm_skew_rho(model, mk)}
        row["atm_vol_normalized"] = row["atm_vol"] / level
        if cfg.model == "cev":
            spec = cfg.cev_spec(s)
            row["normalized_skew_closed"] = cev_atm_skew(spec)
            row["novikov_horizon"] = novikov_horizon(spec, cfg.r)
            if cfg.exact:
                K = mk.forward
                row["atm_vol_exact"] = bs_implied_vol(mk, K, cev_exact_price(spec, mk, K, "call").price, "call")
                row["atm_vol_exact_normalized"] = row["atm_vol_exact"] / level
        rows.append(row)
    if cfg.model == "cev" and cfg.r > 0:
        h = rows[0]["novikov_horizon"]
        log.info("Novikov horizon for r=%g: %s", cfg.r, "unbounded" if math.isinf(h) else f"{h:g}")
    if cfg.format == "csv":
        # inf is meaningful here, keep it instead of blanking
        for row in rows:
            if "novikov_horizon" in row and math.isinf(row["novikov_horizon"]):
                row["novikov_horizon"] = "inf"
    emit(cfg, "atm", columns, rows)
    return EXIT_OK


def _strikes(cfg, mk):
    if not cfg.strike:
        raise ConfigError("--strike is required")
    for K in cfg.strike:
        if not K > 0:
            raise ConfigError(f"strike must be positive, got {K}")
    return cfg.strike


def cmd_rate(cfg: RunConfig) -> int:
    mk = cfg.market()
    model = cfg.vol_model()
    columns = ["K", "k", "x", "I", "C", "region", "branch", "g_star"]
    if cfg.model == "cev":
        columns += ["I_closed", "rel_gap"]
    rows, n_ok = [], 0
    for K in _strikes(cfg, mk):
        k = math.log(K / mk.s0)
        row = {"K": K, "k": k, "x": k - mk.rho}
        try:
            res = rate_function(model, mk, K)
            row.update(I=res.I, C=res.C, region=str(res.region), branch=res.branch, g_star=res.g_star)
            n_ok += 1
        except ShortVolError as exc:
            log.warning("rate function failed at K=%g: %s", K, exc)
        if cfg.model == "cev":
            try:
                closed = cev_rate_closed(cfg.cev_spec(), mk, K).I
                row["I_closed"] = closed
                if "I" in row and closed > 0:
                    row["rel_gap"] = abs(row["I"] - closed) / closed
            except ShortVolError as exc:
                log.warning("closed form failed at K=%g: %s", K, exc)
        rows.append(row)
    emit(cfg, "rate", columns, rows)
    return EXIT_OK if n_ok else EXIT_NUMERIC


def cmd_path(cfg: RunConfig) -> int:
    mk = cfg.market()
    model = cfg.vol_model()
    columns = ["K", "region", "t", "g", "dg"]
    if cfg.model == "cev":
        columns.append("g_closed")
    rows, n_ok = [], 0
    for K in _strikes(cfg, mk):
        try:
            res = rate_function(model, mk, K)
            path = optimal_path(model, mk, K, n_samples=cfg.n_samples, result=res)
        except ShortVolError as exc:
            log.warning("path failed at K=%g: %s", K, exc)
            continue
        closed = cev_optimal_path(cfg.cev_spec(), mk, K, cfg.n_samples) if cfg.model == "cev" else None
        n_ok += 1
        for i in range(len(path.t)):
            row = {"K": K, "region": str(res.region), "t": path.t[i], "g": path.g[i], "dg": path.dg[i]}
            if closed is not None:
                row["g_closed"] = closed.g[i]
            rows.append(row)
    emit(cfg, "path", columns, rows)
    return EXIT_OK if n_ok else EXIT_NUMERIC


def cmd_validate(cfg: RunConfig) -> int:
    from .validation import run_suite

    results = run_suite(include_mc=cfg.mc, include_slow=cfg.slow, tol_scale=cfg.tol_scale)
    for res in results:
        print(res.line(), file=sys.stderr)
    failed = [r.name for r in results if not r.passed and not r.skipped]
    rows = [r.to_dict() for r in results]
    columns = ["name", "passed", "skipped", "value", "tolerance", "detail"]
    # elapsed time is left out so reruns are byte-identical
    emit(cfg, "validate", columns, rows, extra_meta={"passed": not failed, "failed": failed})
    return EXIT_VALIDATION if failed else EXIT_OK


COMMANDS = {"smile": cmd_smile, "atm": cmd_atm, "rate": cmd_rate, "path": cmd_path, "validate": cmd_validate}


def _setup_logging():
    level = os.environ.get("SHORTVOL_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = load_config(ns)
        return COMMANDS[ns.command](cfg)
    except ConfigError as exc:
        print(f"shortvol: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        print(f"shortvol: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"shortvol: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
