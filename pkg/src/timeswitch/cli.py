"""Command-line driver.

    timeswitch simulate  --gamma-a 1 --gamma-b 1 --dt 1e-3 --ua X --ub Z --symmetrize
    timeswitch converge  --dt-list 4e-3,2e-3,1e-3 --format csv
    timeswitch timebin   --t-early 1 --t-late 2 --ua X --ub Z
    timeswitch verify    --ua haar --ub haar --seed 7

Settings come from defaults, then an optional JSON ``--config`` file, then
flags. Reports are JSON (single runs) or CSV (tables) and contain no
timing or other run-dependent data, so identical inputs give identical
bytes. Exit codes: 0 ok, 2 bad configuration, 3 truncation/convergence failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, fields
from typing import Any, Optional

import numpy as np

from . import __version__
from .decay_engine import (
    DecayParams,
    DiscretizationError,
    GateSet,
    TruncationError,
    asymptotic_a_first,
    discrete_continuum_check,
    evolve,
    evolve_aggregated,
    fit_convergence_order,
    order_probabilities,
    reduced_sc_state,
)
from .qcore import Ket, Operator, basis, fidelity, haar_random_unitary, hadamard, identity, pauli_x, pauli_y, pauli_z
from .realizations import TimeBinConfig, dominant_ket, symmetrize_timer, time_bin_state, DecouplingError
from .switch_verify import commutation_task, compare, control_pm_probabilities, ideal_switch

EXIT_OK, EXIT_CONFIG, EXIT_TRUNCATION = 0, 2, 3

NAMED_GATES = {"X": pauli_x, "Y": pauli_y, "Z": pauli_z, "H": hadamard}

# units and the relation each output field belongs to
FIELD_INFO = {
    "n_steps": ("steps", "time discretization t_k = t0 + k dt"),
    "p_a_first": ("probability", "A-before-B branch weight"),
    "p_b_first": ("probability", "B-before-A branch weight"),
    "p_incomplete": ("probability", "weight with a decay still pending at t_N"),
    "p_coincident": ("probability", "dropped same-step double-decay weight"),
    "p_a_first_analytic": ("probability", "continuum limit gamma_a / (gamma_a + gamma_b)"),
    "reduced_sc_state": ("dimensionless", "control (x) system state, machine traced out"),
    "purity": ("dimensionless", "Tr rho^2 of the reduced control (x) system state"),
    "fidelity": ("dimensionless", "overlap with the ideal quantum SWITCH state"),
    "p_plus": ("probability", "control measured in |+>, commutation task"),
    "p_minus": ("probability", "control measured in |->, commutation task"),
    "dt": ("time", "step length"),
    "chi_deviation": ("1/sqrt(time)", "max_k |jump amplitude / sqrt(dt) - chi(t_k)|"),
    "p_a_first_error": ("probability", "|p_a_first - continuum limit|"),
    "fidelity_deficit": ("dimensionless", "1 - fidelity to the ideal SWITCH after timer symmetrization"),
    "order_chi_deviation": ("dimensionless", "fitted log-log slope of chi_deviation vs dt"),
    "order_p_a_first_error": ("dimensionless", "fitted log-log slope of p_a_first_error vs dt"),
    "switch_state": ("dimensionless", "composite-control (x) system state from time-bin records"),
    "t_early": ("time", "early time bin"),
    "t_late": ("time", "late time bin"),
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    gamma_a: float = 1.0
    gamma_b: float = 1.0
    dt: float = 1e-3
    t0: float = 0.0
    n_steps: Optional[int] = None
    target_incomplete: float = 1e-4
    system_dim: int = 2
    ua: Any = "X"
    ub: Any = "Z"
    phi: Any = "0"
    symmetrize: bool = False
    enumerate: bool = False
    seed: int = 0
    t_early: float = 1.0
    t_late: float = 2.0
    dt_list: Any = None
    out: Optional[str] = None
    format: Optional[str] = None

    def params(self, dt: float | None = None) -> DecayParams:
        dt = self.dt if dt is None else dt
        try:
            p = DecayParams(self.gamma_a, self.gamma_b, dt, self.n_steps or 0, self.t0)
        except ValueError as e:
            raise ConfigError(str(e)) from e
        if self.n_steps is None:
            p = p.steps_for_incomplete(self.target_incomplete)
        return p

    def gates(self) -> GateSet:
        d = self.system_dim
        try:
            return GateSet(parse_unitary(self.ua, d, self.seed), parse_unitary(self.ub, d, self.seed + 1))
        except ValueError as e:
            raise ConfigError(str(e)) from e

    def phi_ket(self) -> Ket:
        return parse_ket(self.phi, self.system_dim)

    def as_dict(self) -> dict:
        d = asdict(self)
        d.pop("out")
        return d


# --- (de)serialization -------------------------------------------------------

def matrix_to_json(m: np.ndarray, dims) -> dict:
    flat = np.asarray(m, dtype=complex).reshape(-1)
    return {"dims": list(dims), "shape": list(np.shape(m)),
            "data": [[float(z.real), float(z.imag)] for z in flat]}


def _complex_array(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.shape[-1] != 2:
        raise ConfigError("entries must be (re, im) pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def parse_unitary(spec, d: int, seed: int) -> Operator:
    """Named gate, ``haar`` / ``haar:SEED``, or a matrix of (re, im) pairs."""
    if isinstance(spec, str):
        s = spec.strip()
        if s.startswith("[") or s.startswith("{"):
            return parse_unitary(json.loads(s), d, seed)
        key = s.upper()
        if key == "I":
            return identity(d)
        if key.startswith("HAAR"):
            _, _, explicit = s.partition(":")
            return haar_random_unitary(d, int(explicit) if explicit else seed)
        if key in NAMED_GATES:
            if d != 2:
                raise ConfigError(f"gate {s} is a qubit gate but system_dim is {d}")
            return NAMED_GATES[key]()
        raise ConfigError(f"unknown gate {spec!r}")
    if isinstance(spec, dict):
        m = _complex_array(spec["data"]).reshape(spec.get("shape", (d, d)))
    else:
        m = _complex_array(spec)
    if m.shape != (d, d):
        raise ConfigError(f"matrix shape {m.shape} does not match system_dim {d}")
    op = Operator(m)
    if not op.is_unitary(1e-10):
        raise ConfigError("matrix is not unitary")
    return op


def parse_ket(spec, d: int) -> Ket:
    if isinstance(spec, int):
        spec = str(spec)
    if isinstance(spec, str):
        s = spec.strip()
        if s.startswith("[") or s.startswith("{"):
            return parse_ket(json.loads(s), d)
        if s in ("+", "-") and d == 2:
            return Ket(np.array([1, 1 if s == "+" else -1]) / math.sqrt(2))
        try:
            return basis(d, int(s))
        except (ValueError, IndexError) as e:
            raise ConfigError(f"bad phi value {spec!r}: {e}") from e
    data = spec["data"] if isinstance(spec, dict) else spec
    v = _complex_array(data).reshape(-1)
    if v.size != d:
        raise ConfigError(f"phi has {v.size} entries, system_dim is {d}")
    ket = Ket(v)
    if not ket.is_normalized(1e-10):
        raise ConfigError(f"phi is not normalized (norm^2 = {ket.norm_sq():.12g})")
    return ket.normalize()


# --- commands ----------------------------------------------------------------

def _header(command: str, keys) -> dict:
    return {
        "program": "timeswitch",
        "version": __version__,
        "command": command,
        "fields": {k: {"units": FIELD_INFO[k][0], "relation": FIELD_INFO[k][1]} for k in keys},
    }


def cmd_simulate(cfg: RunConfig) -> tuple[dict, str]:
    params = cfg.params()
    gates = cfg.gates()
    phi = cfg.phi_ket()
    t_start = time.perf_counter()
    state = evolve(params, gates, phi) if cfg.enumerate else evolve_aggregated(params, gates, phi)
    probs = order_probabilities(state)
    if cfg.symmetrize:
        state = symmetrize_timer(state)
    rho = reduced_sc_state(state, cfg.target_incomplete)
    target = ideal_switch(gates.u_a, gates.u_b, phi)
    elapsed = time.perf_counter() - t_start
    results = {
        "n_steps": params.n_steps,
        "p_a_first": probs.p_a_first,
        "p_b_first": probs.p_b_first,
        "p_incomplete": probs.p_incomplete,
        "p_coincident": probs.p_coincident,
        "p_a_first_analytic": asymptotic_a_first(params.gamma_a, params.gamma_b),
        "reduced_sc_state": matrix_to_json(rho.entries, rho.dims),
        "purity": rho.purity(),
        "fidelity": fidelity(rho, target),
    }
    report = {"header": _header("simulate", results), "config": cfg.as_dict(), "results": results}
    summary = (f"simulate: N={params.n_steps} p_a_first={probs.p_a_first:.6f} "
               f"p_incomplete={probs.p_incomplete:.2e} purity={results['purity']:.9f} "
               f"fidelity={results['fidelity']:.9f} wall_clock={elapsed:.3f}s")
    return report, summary


def _converge_row(cfg: RunConfig, dt: float) -> dict:
    params = cfg.params(dt)
    gates, phi = cfg.gates(), cfg.phi_ket()
    state = evolve_aggregated(params, gates, phi)
    probs = order_probabilities(state)
    rho = reduced_sc_state(symmetrize_timer(state), cfg.target_incomplete)
    f = fidelity(rho, ideal_switch(gates.u_a, gates.u_b, phi))
    return {
        "dt": dt,
        "n_steps": params.n_steps,
        "chi_deviation": discrete_continuum_check(params),
        "p_a_first_error": abs(probs.p_a_first - asymptotic_a_first(params.gamma_a, params.gamma_b)),
        "fidelity_deficit": max(0.0, 1.0 - f),
    }


def parse_dt_list(raw) -> list[float]:
    if raw is None:
        raise ConfigError("converge needs --dt-list")
    vals = [float(x) for x in raw.split(",")] if isinstance(raw, str) else [float(x) for x in raw]
    if any(b > a for a, b in zip(vals, vals[1:])):
        raise ConfigError(f"dt list must be sorted descending, got {vals}")
    return vals


def cmd_converge(cfg: RunConfig) -> tuple[dict, str]:
    dts = parse_dt_list(cfg.dt_list)
    rows, skipped, warnings = [], [], []
    for dt in dts:
        try:
            rows.append(_converge_row(cfg, dt))
        except ConfigError as e:
            skipped.append({"dt": dt, "reason": str(e)})
    fit = {}
    if len(rows) < 2:
        warnings.append("fewer than two usable step sizes; convergence order not fitted")
    else:
        x = [r["dt"] for r in rows]
        for col in ("chi_deviation", "p_a_first_error"):
            y = [r[col] for r in rows]
            if min(y) > 0:
                fit[f"order_{col}"] = fit_convergence_order(x, y)
    keys = ["dt", "n_steps", "chi_deviation", "p_a_first_error", "fidelity_deficit", *fit]
    report = {"header": _header("converge", keys), "config": cfg.as_dict(), "rows": rows,
              "fit": fit, "skipped": skipped, "warnings": warnings}
    summary = f"converge: {len(rows)} rows, {len(skipped)} skipped, fit={fit}"
    return report, summary


def cmd_timebin(cfg: RunConfig) -> tuple[dict, str]:
    gates, phi = cfg.gates(), cfg.phi_ket()
    try:
        tb = TimeBinConfig(cfg.t_early, cfg.t_late, gates, phi)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    psi = time_bin_state(tb)
    stats = commutation_task(gates.u_a, gates.u_b, phi)
    p_plus, p_minus = control_pm_probabilities(psi)
    results = {
        "t_early": cfg.t_early,
        "t_late": cfg.t_late,
        "switch_state": matrix_to_json(psi.amplitudes, psi.dims),
        "fidelity": fidelity(psi, ideal_switch(gates.u_a, gates.u_b, phi)),
        "p_plus": p_plus,
        "p_minus": p_minus,
    }
    if abs(p_plus - stats.p_plus) > 1e-10:
        raise TruncationError("time-bin control statistics disagree with the ideal SWITCH")
    report = {"header": _header("timebin", results), "config": cfg.as_dict(), "results": results}
    return report, f"timebin: fidelity={results['fidelity']:.12f} p_plus={p_plus:.6f} p_minus={p_minus:.6f}"


def cmd_verify(cfg: RunConfig) -> tuple[dict, str]:
    """Certify the decay and time-bin realizations against the ideal SWITCH."""
    params = cfg.params()
    gates, phi = cfg.gates(), cfg.phi_ket()
    checks = []

    def check(name, value, ok):
        checks.append({"check": name, "value": value, "pass": bool(ok)})

    ordered = evolve_aggregated(params, gates, phi)
    rho = reduced_sc_state(symmetrize_timer(ordered), cfg.target_incomplete)
    res = compare(rho, gates.u_a, gates.u_b, phi)
    equal_rates = params.gamma_a == params.gamma_b
    check("decay_switch_fidelity", res.fidelity, res.fidelity >= 1 - 1e-6 if equal_rates else True)
    check("decay_switch_purity", rho.purity(), rho.purity() >= 1 - 10 * cfg.target_incomplete if equal_rates else True)
    tb = time_bin_state(TimeBinConfig(cfg.t_early, cfg.t_late, gates, phi))
    f_tb = fidelity(tb, res.ideal)
    check("timebin_fidelity", f_tb, 1 - f_tb <= 1e-12)
    try:
        cross = fidelity(tb, dominant_ket(rho))
    except DecouplingError:
        cross = fidelity(rho, tb)
    check("cross_realization_fidelity", cross, cross >= 1 - 1e-6 if equal_rates else True)
    stats = commutation_task(gates.u_a, gates.u_b, phi)
    check("commutation_total", stats.p_plus + stats.p_minus, abs(stats.p_plus + stats.p_minus - 1) <= 1e-12)
    report = {"header": _header("verify", []), "config": cfg.as_dict(), "checks": checks,
              "passed": all(c["pass"] for c in checks)}
    lines = [f"{'PASS' if c['pass'] else 'FAIL'} {c['check']}: {c['value']:.12g}" for c in checks]
    return report, "\n".join(lines)


COMMANDS = {"simulate": cmd_simulate, "converge": cmd_converge, "timebin": cmd_timebin, "verify": cmd_verify}


# --- output ------------------------------------------------------------------

def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    for name, info in report["header"]["fields"].items():
        buf.write(f"# {name}: units={info['units']}; {info['relation']}\n")
    if "rows" in report:
        rows = report["rows"]
        cols = ["dt", "n_steps", "chi_deviation", "p_a_first_error", "fidelity_deficit"]
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([repr(r[c]) for c in cols])
        for k, v in report["fit"].items():
            buf.write(f"# fit {k}={v!r}\n")
        for s in report["skipped"]:
            buf.write(f"# skipped dt={s['dt']!r}: {s['reason']}\n")
        for msg in report["warnings"]:
            buf.write(f"# warning: {msg}\n")
    else:
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["field", "value"])
        items = report.get("results") or {c["check"]: c["value"] for c in report.get("checks", [])}
        for k, v in items.items():
            w.writerow([k, json.dumps(v, sort_keys=True) if isinstance(v, dict) else repr(v)])
    return buf.getvalue()


# --- argument parsing --------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
    common.add_argument("--gamma-a", type=float)
    common.add_argument("--gamma-b", type=float)
    common.add_argument("--dt", type=float)
    common.add_argument("--t0", type=float)
    common.add_argument("--steps", type=int, dest="n_steps")
    common.add_argument("--target-incomplete", type=float)
    common.add_argument("--system-dim", type=int)
    common.add_argument("--ua", help="I, X, Y, Z, H, haar, haar:SEED or a JSON matrix of [re, im] pairs")
    common.add_argument("--ub")
    common.add_argument("--phi", help="basis index, + / -, or a JSON vector of [re, im] pairs")
    common.add_argument("--symmetrize", action="store_true", default=None)
    common.add_argument("--enumerate", action="store_true", default=None,
                        help="use explicit branch enumeration instead of the aggregated path")
    common.add_argument("--seed", type=int)
    common.add_argument("--t-early", type=float)
    common.add_argument("--t-late", type=float)
    common.add_argument("--dt-list", help="comma-separated step sizes, descending")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"))

    parser = argparse.ArgumentParser(prog="timeswitch", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    names = {f.name for f in fields(RunConfig)}
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {args.config}: {e}") from e
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for k, v in data.items():
            setattr(cfg, k, v)
    for k in names:
        v = getattr(args, k, None)
        if v is not None:
            setattr(cfg, k, v)
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args)
        if cfg.format is None:
            cfg.format = "csv" if args.command == "converge" else "json"
        report, summary = COMMANDS[args.command](cfg)
    except (ConfigError, DiscretizationError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (TruncationError, DecouplingError) as e:
        print(f"truncation/convergence failure: {e}", file=sys.stderr)
        return EXIT_TRUNCATION
    text = render(report, cfg.format)
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    print(summary, file=sys.stderr)
    if args.command == "verify" and not report["passed"]:
        return EXIT_TRUNCATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
