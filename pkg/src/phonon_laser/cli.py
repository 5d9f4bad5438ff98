"""Command-line entry point: dynamics, steady-state and sweep runs.

Configuration is a flat ``key = value`` document, one assignment per line,
``#`` starts a comment. Example::

    preset = results-phonon
    mode = dynamics
    t_end = 50
    sample_every = 100

Exit codes: 0 success, 1 configuration error, 2 numerical-invariant or
solver failure, 3 I/O error.
"""
import argparse
import datetime
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__, kernels
from .analysis import flow_decomposition, occupations, thermo_report, total_inversion
from .dynamics import DEFAULT_DT, SimState, initial_state, iter_simulation, master_rhs
from .errors import InvalidInputError, InvariantViolation, SolverError
from .model import PARAM_KEYS, PRESETS, parse_param_value, preset
from .qspace import M, partial_trace
from .steady import lasing_fixed_point, solve, verify_current_relations

MODES = ("dynamics", "steady", "sweep")
FORMATS = ("csv", "json-lines")
SWEEP_VARS = ("deltaT", "lambda", "g", "gamma_sys")
RUN_KEYS = ("mode", "preset", "t_end", "dt", "sample_every", "sweep", "sweep_start",
            "sweep_stop", "sweep_points", "output", "format", "workers", "drive", "amplitudes")
BALANCE_TOL = 1e-10

CONVENTIONS = (
    "units: meV, ps, K, pm; column suffixes carry units",
    "J_X_i_to_j: middle-population flux i->j from term X (H: top-filter exchange, C: bottom-filter exchange)",
    "J_L_12/J_R_12: Gamma1*rho11 - Gamma2*rho22 of the filter (positive = bath excites filter)",
    "Qdot_H absorbed from the hot bath; Qdot_C/Qdot_D released into cold bath/internal reservoir",
    "no photon-mode dynamics: the 3->2 step is carried by the bottom-filter exchange J_C_3to2",
    "steady states freeze (B1, B2) unless amplitudes = self-consistent",
)


class ConfigError(ValueError):
    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass
class RunConfig:
    mode: str
    params: object
    preset: str = None
    t_end: float = 50.0
    dt: float = DEFAULT_DT
    sample_every: int = 100
    sweep: str = "deltaT"
    sweep_start: float = 0.0
    sweep_stop: float = 300.0
    sweep_points: int = 31
    output: str = None
    format: str = "csv"
    workers: int = 1
    drive: bool = True
    amplitudes: str = "frozen"
    overrides: dict = field(default_factory=dict)

    def sweep_values(self):
        if self.sweep_points == 1:
            return np.array([self.sweep_start])
        return np.linspace(self.sweep_start, self.sweep_stop, self.sweep_points)


def _bool(text):
    return parse_param_value("resonant_only", text)


_RUN_PARSERS = {
    "t_end": float, "dt": float, "sample_every": int, "sweep_start": float, "sweep_stop": float,
    "sweep_points": int, "workers": int, "drive": _bool,
}


def parse_config(text, mode=None):
    """Parse a key=value document into a RunConfig (``mode`` overrides the document)."""
    seen = {}
    lines = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(lineno, f"expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in RUN_KEYS and key not in PARAM_KEYS:
            raise ConfigError(lineno, f"unknown key '{key}'")
        if key in seen:
            raise ConfigError(lineno, f"duplicate key '{key}' (first set on line {lines[key]})")
        if not value:
            raise ConfigError(lineno, f"empty value for '{key}'")
        seen[key] = value
        lines[key] = lineno

    if mode is not None:
        seen["mode"] = mode
        lines.setdefault("mode", 0)
    if "mode" not in seen:
        raise ConfigError(0, "'mode' is required (dynamics, steady or sweep)")
    if seen["mode"] not in MODES:
        raise ConfigError(lines["mode"], f"mode must be one of {', '.join(MODES)}")

    kwargs = {"mode": seen["mode"]}
    for key, conv in _RUN_PARSERS.items():
        if key in seen:
            try:
                kwargs[key] = conv(seen[key])
            except ValueError:
                raise ConfigError(lines[key], f"cannot parse {key} = {seen[key]!r}") from None
    for key in ("output",):
        if key in seen:
            kwargs[key] = seen[key]
    for key, allowed in (("format", FORMATS), ("sweep", SWEEP_VARS), ("amplitudes", ("frozen", "self-consistent"))):
        if key in seen:
            if seen[key] not in allowed:
                raise ConfigError(lines[key], f"{key} must be one of {', '.join(allowed)}")
            kwargs[key] = seen[key]

    checks = (
        ("dt", lambda v: v > 0 and math.isfinite(v), "dt must be > 0"),
        ("t_end", lambda v: v >= 0 and math.isfinite(v), "t_end must be finite and >= 0"),
        ("sample_every", lambda v: v >= 1, "sample_every must be >= 1"),
        ("sweep_points", lambda v: v >= 1, "sweep_points must be >= 1"),
        ("sweep_start", math.isfinite, "sweep range must be finite"),
        ("sweep_stop", math.isfinite, "sweep range must be finite"),
        ("workers", lambda v: v >= 1, "workers must be >= 1"),
    )
    for key, ok, msg in checks:
        if key in kwargs and not ok(kwargs[key]):
            raise ConfigError(lines[key], msg)
    if kwargs.get("sweep_points", 31) > 1 and kwargs.get("sweep_start", 0.0) == kwargs.get("sweep_stop", 300.0):
        raise ConfigError(lines.get("sweep_stop", 0), "sweep range is empty")

    name = seen.get("preset", "model-section")
    if name not in PRESETS:
        raise ConfigError(lines.get("preset", 0), f"unknown preset '{name}' (have {', '.join(PRESETS)})")
    changes = {}
    for key in PARAM_KEYS:
        if key in seen:
            try:
                changes[key] = parse_param_value(key, seen[key])
            except ValueError as exc:
                raise ConfigError(lines[key], f"cannot parse {key}: {exc}") from None
    try:
        params = preset(name).replace(**changes)
    except InvalidInputError as exc:
        culprit = [k for k in changes if k in str(exc)]
        raise ConfigError(lines[culprit[0]] if culprit else 0, str(exc)) from None
    return RunConfig(params=params, preset=name, overrides=changes, **kwargs)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return format(float(v), ".17g")


class RecordWriter:
    """Streams records as CSV or JSON lines behind a metadata header."""

    def __init__(self, stream, fmt, meta):
        self.stream = stream
        self.fmt = fmt
        self.fields = None
        if fmt == "csv":
            for key, value in meta.items():
                for item in (value if isinstance(value, (list, tuple)) else [value]):
                    stream.write(f"# {key}: {item}\n")
        else:
            stream.write(json.dumps({"meta": meta}, sort_keys=True) + "\n")

    def write(self, record):
        if self.fields is None:
            self.fields = list(record)
            if self.fmt == "csv":
                self.stream.write(",".join(self.fields) + "\n")
        elif list(record) != self.fields:
            raise ValueError("record fields changed mid-stream")
        if self.fmt == "csv":
            self.stream.write(",".join(_fmt(record[k]) for k in self.fields) + "\n")
        else:
            row = {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in record.items()}
            self.stream.write(json.dumps(row) + "\n")
        self.stream.flush()

    def failed(self, message):
        message = str(message).replace("\n", " ")
        if self.fmt == "csv":
            self.stream.write("FAILED," + message.replace(",", ";") + "\n")
        else:
            self.stream.write(json.dumps({"FAILED": message}) + "\n")
        self.stream.flush()


def emit(records, fmt, stream, meta=None):
    """Write ``records`` (list of dicts) and return the number of characters written."""
    if not records:
        raise ValueError("no records to emit")
    buf = io.StringIO()
    w = RecordWriter(buf, fmt, meta or {})
    for r in records:
        w.write(r)
    text = buf.getvalue()
    stream.write(text)
    return len(text)


def read_records(text):
    """Parse CSV or JSON-lines output back into (meta, rows)."""
    lines = text.splitlines()
    if lines and lines[0].startswith("{"):
        meta = json.loads(lines[0])["meta"]
        rows = [json.loads(l) for l in lines[1:]]
        return meta, [{k: (math.nan if v is None else v) for k, v in r.items()} for r in rows]
    meta = [l[2:] for l in lines if l.startswith("# ")]
    body = [l for l in lines if not l.startswith("#")]
    header = body[0].split(",")
    rows = []
    for l in body[1:]:
        parts = l.split(",")
        if parts[0] == "FAILED":
            rows.append({"FAILED": parts[1] if len(parts) > 1 else ""})
            continue
        rows.append({k: float(v) for k, v in zip(header, parts)})
    return meta, rows


def state_record(state, p, check=True):
    """Observables, currents and thermodynamics of one state as a flat dict."""
    rho = state.rho
    occ = occupations(rho)
    rep = flow_decomposition(state, p)
    if check:
        for name, vals in occ.items():
            if abs(vals.sum() - 1.0) > BALANCE_TOL:
                raise InvariantViolation(f"occupation-sum-{name}", state.t, abs(vals.sum() - 1.0))
        exact = np.real(np.diag(partial_trace(master_rhs(state, p), M)))
        err = float(np.max(np.abs(rep.level_balance() - exact)))
        if err > BALANCE_TOL:
            raise InvariantViolation("per-level-current-balance", state.t, err)
    rec = {}
    for name, vals in occ.items():
        for i, v in enumerate(vals, start=1):
            rec[f"rho{name}_{i}{i}"] = float(v)
    rec["inversion"] = total_inversion(rho)
    rec["B1_re"], rec["B1_im"] = state.B1.real, state.B1.imag
    rec["B2_re"], rec["B2_im"] = state.B2.real, state.B2.imag
    rec["u1_pm"] = state.displacement(1, p.u0)
    rec["u2_pm"] = state.displacement(2, p.u0)
    rec.update(rep.flat())
    rec.update(thermo_report(rep, p).flat())
    return rec


def _metadata(cfg):
    notes = list(PRESETS[cfg.preset].notes) if cfg.preset else []
    if cfg.overrides:
        notes.append("overrides: " + ", ".join(f"{k}={v!r}" for k, v in sorted(cfg.overrides.items())))
    return {
        "program": f"phonon_laser {__version__}",
        "mode": cfg.mode,
        "preset": cfg.preset,
        "backend": kernels.BACKEND,
        "reconstructions": notes,
        "conventions": list(CONVENTIONS),
        "generated_at": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
    }


def _steady_state(p, amplitudes):
    if amplitudes == "self-consistent":
        ss, B = lasing_fixed_point(p)
        return solve(p, B[0], B[1])
    return solve(p)


def steady_record(p, amplitudes="frozen"):
    ss = _steady_state(p, amplitudes)
    rec = {"T_H_K": p.T_H, "T_C_K": p.T_C, "null_dim": ss.null_dim, "residual_per_ps": ss.residual}
    rec.update(state_record(SimState(ss.rho_ss, ss.B1, ss.B2, 0.0), p))
    rep = verify_current_relations(ss, p)
    for i, r in enumerate(rep.relations, start=1):
        rec[f"relation{i}_residual_per_ps"] = r.residual
    for i, r in enumerate(rep.balances, start=1):
        rec[f"balance{i}_residual_per_ps"] = r.residual
    rec["relations_pass"] = rep.passed
    return rec


def sweep_params(p, var, value):
    if var == "deltaT":
        return p.replace(T_H=p.T_C + value)
    if var == "lambda":
        return p.replace(lambda_MT=value, lambda_MB=value)
    if var == "g":
        return p.replace(g=value)
    if var == "gamma_sys":
        return p.replace(gamma_sys12=value, gamma_sys34=value)
    raise InvalidInputError(f"unknown sweep variable '{var}'")


def sweep_point(args):
    p, var, value, amplitudes = args
    q = sweep_params(p, var, value)
    ss = _steady_state(q, amplitudes)
    rep = flow_decomposition(SimState(ss.rho_ss, ss.B1, ss.B2), q)
    th = thermo_report(rep, q)
    return {
        var: float(value), "T_H_K": q.T_H, "T_C_K": q.T_C,
        "J_per_ps": rep.J_uniform, "J_spread_per_ps": rep.J_spread,
        "inversion": total_inversion(ss.rho_ss),
        "Qdot_H_meV_per_ps": th.Qdot_H, "Sdot_meV_per_ps_K": th.Sdot,
        "eta": th.eta, "eta_ideal": th.eta_ideal, "eta_carnot": th.eta_carnot,
        "deltaT_threshold_K": th.deltaT_threshold,
    }


def run_sweep(cfg):
    tasks = [(cfg.params, cfg.sweep, float(v), cfg.amplitudes) for v in cfg.sweep_values()]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            return list(ex.map(sweep_point, tasks))
    return [sweep_point(t) for t in tasks]


def run(cfg, stream):
    """Execute ``cfg`` writing to ``stream``; returns the exit status."""
    writer = RecordWriter(stream, cfg.format, _metadata(cfg))
    try:
        if cfg.mode == "dynamics":
            # drive off is the g = 0 limit: amplitudes decay freely, no back-action
            p = cfg.params if cfg.drive else cfg.params.replace(g=0.0)
            for s in iter_simulation(p, cfg.t_end, cfg.dt, cfg.sample_every, initial_state(p)):
                rec = {"t_ps": s.t}
                rec.update(state_record(s, p))
                writer.write(rec)
        elif cfg.mode == "steady":
            writer.write(steady_record(cfg.params, cfg.amplitudes))
        else:
            for rec in run_sweep(cfg):
                writer.write(rec)
    except (InvariantViolation, SolverError) as exc:
        writer.failed(exc)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def main(argv=None):
    ap = argparse.ArgumentParser(prog="phonon-laser", description=__doc__.split("\n\n")[0])
    ap.add_argument("--config", required=True, help="key = value configuration file")
    ap.add_argument("--mode", choices=MODES, help="override the configured mode")
    ap.add_argument("--out", help="output path (default: configured output or stdout)")
    ap.add_argument("--format", choices=FORMATS, help="output format")
    ap.add_argument("--workers", type=int, help="concurrent sweep workers")
    args = ap.parse_args(argv)

    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    try:
        cfg = parse_config(text, mode=args.mode)
        if args.format:
            cfg.format = args.format
        if args.workers is not None:
            if args.workers < 1:
                raise ConfigError(0, "--workers must be >= 1")
            cfg.workers = args.workers
        if args.out:
            cfg.output = args.out
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    try:
        if cfg.output in (None, "-"):
            return run(cfg, sys.stdout)
        with open(cfg.output, "w", encoding="utf-8", newline="\n") as fh:
            return run(cfg, fh)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
