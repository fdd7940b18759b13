"""Command-line front end for experiment configs and the pulse library.

Every experiment command reads a JSON config validated against the schema
for that command, runs with a resolved master seed, and writes CSV + JSON
sidecar + manifest into the output directory. Work items (sweep points)
carry pre-assigned inputs, so the thread count changes wall time only,
never the output bytes.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
import traceback
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator

from . import experiments, io
from .circuits import CircuitSpec
from .errgeo import amplitude_sweep_distance
from .experiments import ExperimentResult
from .model import (
    DEFAULT_LATTICE_J,
    LatticeModel,
    TwoQubitModel,
    chain_lattice,
    grid_lattice,
    honeycomb_cell,
    load_topology,
)
from .noise import OneOverFConfig, psd_estimate, ramsey_decay, ramsey_t2
from .optimize import OptimizerConfig, synthesize
from .pulse import (
    find_pulse,
    load_default_library,
    peak_amplitude,
    pulse_area,
    trivial_partner,
)

EXPERIMENT_COMMANDS = (
    "synthesize", "sweep-coupling", "sweep-amplitude", "noise-1f",
    "multiqubit", "zz-gate", "entropy",
)
ALL_COMMANDS = EXPERIMENT_COMMANDS + ("library", "validate")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class ConfigError(Exception):
    """Config or schema problem; maps to exit code 2."""


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _schema_for(command: str) -> dict:
    ref = resources.files("spinctrl") / "schemas" / f"{command}.json"
    return json.loads(ref.read_text(encoding="utf-8"))


def _read_json(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config root must be a JSON object, got {type(data).__name__}")
    return data


def validate_config(path) -> tuple[bool, list[str]]:
    """Check a config file against its command's schema.

    Returns (ok, violations); each violation is a JSON-pointer path plus
    the schema message. Never executes the experiment.
    """
    data = _read_json(path)
    command = data.get("command")
    if command not in EXPERIMENT_COMMANDS:
        return False, [f"/command: {command!r} is not one of {list(EXPERIMENT_COMMANDS)}"]
    validator = Draft202012Validator(_schema_for(command))
    violations = []
    for err in sorted(validator.iter_errors(data), key=lambda e: e.json_path):
        pointer = "/" + "/".join(str(p) for p in err.absolute_path)
        violations.append(f"{pointer}: {err.message}")
    return not violations, violations


def _load_config(path, expected_command: str) -> dict:
    ok, violations = validate_config(path)
    if not ok:
        raise ConfigError("config validation failed:\n  " + "\n  ".join(violations))
    data = _read_json(path)
    if data["command"] != expected_command:
        raise ConfigError(
            f"config is for command {data['command']!r}, invoked as {expected_command!r}")
    return data


def _resolve_threads(arg: int | None) -> int:
    if arg is not None:
        return max(1, arg)
    env = os.environ.get("SPINCTRL_THREADS")
    if env is None:
        return 1
    try:
        return max(1, int(env))
    except ValueError as exc:
        raise ConfigError(f"SPINCTRL_THREADS must be an integer, got {env!r}") from exc


def _parallel_map(fn, items, threads: int) -> list:
    """Apply fn to items, in order, on a pool of the given size.

    Results are merged by item index, so the output is identical for any
    thread count.
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(fn, item) for item in items]
        return [f.result() for f in futures]


def _stitch(parts: list[ExperimentResult], extra_meta: dict | None = None) -> ExperimentResult:
    """Concatenate single-point results from parallel work items."""
    first = parts[0]
    stderr = None
    if first.y_stderr is not None:
        stderr = np.concatenate([p.y_stderr for p in parts])
    meta = dict(first.metadata)
    meta.update(extra_meta or {})
    return ExperimentResult(
        label=first.label,
        x=np.concatenate([p.x for p in parts]),
        y=np.concatenate([p.y for p in parts]),
        x_unit=first.x_unit, y_unit=first.y_unit,
        y_stderr=stderr, metadata=meta, created=_now(),
    )


def _two_qubit_model(config: dict) -> TwoQubitModel:
    m = config["model"]
    return TwoQubitModel(dEz=m["dEz"], J=m.get("J", 0.01))


def _config_pulse(config: dict):
    p = config["pulse"]
    params = find_pulse(load_default_library(), p["gate"], T_ns=p["T_ns"]).params
    if p.get("kind", "robust") == "trivial":
        params = trivial_partner(params)
    return params, p["gate"]


def _build_lattice(config: dict) -> LatticeModel:
    spec = config["lattice"]
    j = config["model"].get("J", DEFAULT_LATTICE_J)
    dez = config["model"]["dEz"]
    if "path" in spec:
        base = load_topology(spec["path"])
        return LatticeModel(base.omegas, base.edges, j, base.beta)
    builders = {
        "chain4": lambda: chain_lattice(4, J=j, detuning=dez),
        "honeycomb6": lambda: honeycomb_cell(J=j, detuning=dez),
        "grid10": lambda: grid_lattice(J=j, detuning=dez),
    }
    return builders[spec["name"]]()


def _run_synthesize(config, seed, threads, out_dir, force):
    opt = dict(config.get("optimizer", {}))
    cfg = OptimizerConfig(seed=seed, **opt)
    model = TwoQubitModel(dEz=config["model"]["dEz"])
    result = synthesize(config["gate"], config["T"], cfg, model=model)
    payload = {
        "command": "synthesize",
        "schema_version": 1,
        "gate": config["gate"],
        "T": config["T"],
        "seed": seed,
        "params": {
            "T": result.params.T,
            "a": [float(v) for v in result.params.a],
            "phi": [float(v) for v in result.params.phi],
        },
        "omega_m": peak_amplitude(result.params),
        "area": pulse_area(result.params),
        "cost_history": [float(c) for c in result.cost_history],
        "final_F": result.final_F,
        "final_D": result.final_D,
        "converged": result.converged,
        "optimizer": opt,
    }
    json_path = Path(out_dir) / "synthesis.json"
    if json_path.exists() and not force:
        raise ConfigError(f"{json_path} exists; rerun with --force to overwrite")
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    json_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                         encoding="utf-8", newline="")
    hist = result.cost_history
    curve = ExperimentResult(
        label="synthesis_cost", x=np.arange(len(hist), dtype=float),
        y=np.asarray(hist), x_unit="iteration", y_unit="cost",
        metadata={"gate": config["gate"], "T": config["T"], "seed": seed},
        created="",
    )
    csv_path, sidecar = io.write_result(curve, out_dir, "synthesis_cost", force=force)
    summary = (f"C={hist[-1]:.4e} F={result.final_F:.6f} "
               f"D={result.final_D:.4e} converged={result.converged}")
    return [json_path, csv_path, sidecar], summary


def _run_sweep_coupling(config, seed, threads, out_dir, force):
    params, gate = _config_pulse(config)
    model = _two_qubit_model(config)
    spn = config.get("steps_per_ns", 40)
    j_list = [float(j) for j in config["J_values"]]
    parts = _parallel_map(
        lambda j: experiments.fidelity_vs_coupling(params, model, [j], gate=gate,
                                                   steps_per_ns=spn),
        j_list, threads)
    result = _stitch(parts, {"J_values": j_list, "seed": seed})
    paths = io.write_result(result, out_dir, "sweep_coupling", force=force)
    summary = f"1-F[{len(j_list)} pts] max={result.y.max():.4e}"
    return list(paths), summary


def _run_sweep_amplitude(config, seed, threads, out_dir, force):
    params, gate = _config_pulse(config)
    model = _two_qubit_model(config)
    g = config["scales"]
    if g.get("spacing", "log") == "log":
        scales = np.logspace(math.log10(g["min"]), math.log10(g["max"]), g["count"])
    else:
        scales = np.linspace(g["min"], g["max"], g["count"])
    sweeps = _parallel_map(
        lambda s: amplitude_sweep_distance(params, model, [s]), scales, threads)
    omega_m = np.concatenate([s.omega_m for s in sweeps])
    distance = np.concatenate([s.distance for s in sweeps])
    order = np.argsort(omega_m)
    result = ExperimentResult(
        label="amplitude_sweep", x=omega_m[order], y=distance[order],
        x_unit="Omega_m_rad_ns", y_unit="D_ns",
        metadata={
            "experiment": "amplitude_sweep",
            "gate": gate,
            "kind": config["pulse"].get("kind", "robust"),
            "model": {"dEz": model.dEz, "J": model.J},
            "scales": [float(s) for s in scales],
            "seed": seed,
        },
        created=_now(),
    )
    paths = io.write_result(result, out_dir, "sweep_amplitude", force=force)
    i_min = int(np.argmin(result.y))
    summary = f"D_min={result.y[i_min]:.4e} at Omega_m={result.x[i_min]:.4f}"
    return list(paths), summary


def _noise_config(config: dict, seed: int) -> OneOverFConfig:
    n = config.get("noise", {})
    kwargs = {}
    if "gamma" in n:
        kwargs["gamma"] = n["gamma"]
    if "f_min_khz" in n:
        kwargs["f_min"] = n["f_min_khz"]
    if "f_max_khz" in n:
        kwargs["f_max"] = n["f_max_khz"]
    if "n_components" in n:
        kwargs["n_components"] = n["n_components"]
    if "amplitude_exponent" in n:
        kwargs["amplitude_exponent"] = n["amplitude_exponent"]
    kwargs["seed"] = n.get("seed", seed)
    return OneOverFConfig(**kwargs)


def _run_noise_1f(config, seed, threads, out_dir, force):
    quantity = config["quantity"]
    ncfg = _noise_config(config, seed)
    realizations = config["realizations"]

    if quantity == "psd":
        est = psd_estimate(ncfg, realizations,
                           duration_ns=config.get("duration_ns", 2.0e6),
                           n_samples=config.get("n_samples", 4096))
        keep = est.freqs_khz > 0
        result = ExperimentResult(
            label="noise_psd", x=est.freqs_khz[keep], y=est.psd[keep],
            x_unit="f_kHz", y_unit="S_rad2_per_ns2_per_kHz",
            metadata={
                "experiment": "noise_psd", "slope": est.slope,
                "fit_band_khz": list(est.fit_band_khz),
                "noise": _noise_meta(ncfg), "realizations": realizations,
            },
            created=_now(),
        )
        paths = io.write_result(result, out_dir, "noise_psd", force=force)
        return list(paths), f"slope={est.slope:.3f}"

    if quantity == "ramsey":
        delays_us = np.asarray(config.get("delays_us",
                                          np.linspace(0.0, 20.0, 81).tolist()))
        delays_ns = delays_us * 1000.0
        coherence = ramsey_decay(ncfg, delays_ns, realizations)
        t2_us = ramsey_t2(ncfg, delays_ns, realizations)
        result = ExperimentResult(
            label="ramsey_decay", x=delays_us, y=coherence,
            x_unit="tau_us", y_unit="coherence",
            metadata={
                "experiment": "ramsey_decay", "t2_us": t2_us,
                "noise": _noise_meta(ncfg), "realizations": realizations,
            },
            created=_now(),
        )
        paths = io.write_result(result, out_dir, "ramsey_decay", force=force)
        return list(paths), f"T2={t2_us:.3f}us"

    if "pulse" not in config:
        raise ConfigError("noise-1f with quantity='infidelity' requires a pulse block")
    if realizations < 100:
        raise ConfigError("quantity='infidelity' requires realizations >= 100")
    params, gate = _config_pulse(config)
    model = _two_qubit_model(config)
    spn = config.get("steps_per_ns", 40)
    if "J_values" in config:
        j_list = [float(j) for j in config["J_values"]]
    else:
        j_list = (peak_amplitude(params) * np.logspace(-3, -1, 9)).tolist()
    parts = _parallel_map(
        lambda j: experiments.fidelity_under_1f(params, model, ncfg, realizations,
                                                j_values=[j], gate=gate,
                                                steps_per_ns=spn),
        j_list, threads)
    result = _stitch(parts, {"J_values": j_list, "seed": seed})
    paths = io.write_result(result, out_dir, "noise_infidelity", force=force)
    return list(paths), f"1-F[{len(j_list)} pts] max={result.y.max():.4e}"


def _noise_meta(ncfg: OneOverFConfig) -> dict:
    return {
        "gamma": ncfg.gamma, "f_min_khz": ncfg.f_min, "f_max_khz": ncfg.f_max,
        "n_components": ncfg.n_components, "seed": ncfg.seed,
        "amplitude_exponent": ncfg.amplitude_exponent,
    }


def _run_multiqubit(config, seed, threads, out_dir, force):
    lat = _build_lattice(config)
    primary = {int(k): v for k, v in config["primary"].items()}
    for q in primary:
        if not 0 <= q < lat.n_qubits:
            raise ConfigError(f"primary qubit {q} outside lattice of {lat.n_qubits} qubits")
    assignment, target = experiments.dressed_assignment(
        lat, primary, gate_time=config.get("gate_time", 50.0),
        kind=config.get("kind", "robust"))
    if "J_values" in config:
        j_list = [float(j) for j in config["J_values"]]
    else:
        j_list = [lat.J]
    spn = config.get("steps_per_ns", 40)
    parts = _parallel_map(
        lambda j: experiments.parallel_gate_fidelity(lat, assignment, target,
                                                     j_values=[j], steps_per_ns=spn),
        j_list, threads)
    result = _stitch(parts, {"J_values": j_list, "seed": seed,
                             "kind": config.get("kind", "robust")})
    paths = io.write_result(result, out_dir, "multiqubit", force=force)
    return list(paths), f"1-F[{len(j_list)} pts] max={result.y.max():.4e}"


def _run_zz_gate(config, seed, threads, out_dir, force):
    lat = _build_lattice(config)
    pair = tuple(config["pair"])
    gate_time = config.get("gate_time", 50.0)
    dressed = config.get("dressed", True)
    if "J_values" in config:
        j_list = [float(j) for j in config["J_values"]]
    else:
        j_list = [lat.J]
    spn = config.get("steps_per_ns", 40)
    parts = _parallel_map(
        lambda j: experiments.zz_gate_fidelity(lat, T=gate_time, pair=pair,
                                               j_values=[j], dressed=dressed,
                                               steps_per_ns=spn),
        j_list, threads)
    extra = {
        "J_values": j_list,
        "seed": seed,
        "conditional_phase": [p.metadata["conditional_phase"][0] for p in parts],
        "target_phase": [p.metadata["target_phase"][0] for p in parts],
    }
    result = _stitch(parts, extra)
    paths = io.write_result(result, out_dir, "zz_gate", force=force)
    chi = extra["conditional_phase"][-1]
    return list(paths), f"1-F max={result.y.max():.4e} chi={chi:.4f}"


def _run_entropy(config, seed, threads, out_dir, force):
    lat = _build_lattice(config)
    c = config.get("circuit", {})
    spec = CircuitSpec(
        depth=c.get("depth", 200),
        gate_time=c.get("gate_time", 50.0),
        pulse_kind=c.get("pulse_kind", "robust"),
        partition=c.get("partition", "even-odd"),
        include_crosstalk=c.get("include_crosstalk", True),
        dt=c.get("dt", 0.2),
    )
    realizations = config["realizations"]
    paths = []
    if config.get("compare", False):
        results = experiments.entropy_comparison(lat, spec, realizations,
                                                 master_seed=seed)
        finals = {}
        for (kind, part), res in sorted(results.items()):
            stem = f"entropy_{kind}_{part.replace('-', '_')}"
            paths.extend(io.write_result(res, out_dir, stem, force=force))
            finals[(kind, part)] = res.y[-1]
        summary = (f"S_final robust={finals[('robust', spec.partition)]:.4f} "
                   f"trivial={finals[('trivial', spec.partition)]:.4f}")
        return paths, summary
    res = experiments.entropy_growth(lat, spec, realizations, master_seed=seed)
    paths.extend(io.write_result(res, out_dir, "entropy", force=force))
    return paths, f"S_final={res.y[-1]:.4f} ({spec.pulse_kind}, {spec.partition})"


_RUNNERS = {
    "synthesize": _run_synthesize,
    "sweep-coupling": _run_sweep_coupling,
    "sweep-amplitude": _run_sweep_amplitude,
    "noise-1f": _run_noise_1f,
    "multiqubit": _run_multiqubit,
    "zz-gate": _run_zz_gate,
    "entropy": _run_entropy,
}


def _run_library(args) -> int:
    entries = load_default_library()
    if args.action == "list":
        print(f"{'gate':8s} {'T_ns':>6s} {'area/pi':>8s} {'Omega_m':>8s} {'Omega_m/dEz':>12s}")
        for e in entries:
            om = peak_amplitude(e.params)
            area = pulse_area(e.params) / math.pi
            print(f"{e.gate:8s} {e.T_ns:6.0f} {area:8.3f} {om:8.4f} {om / 0.2:12.3f}")
        return EXIT_OK
    if args.gate is None or args.T is None:
        raise ConfigError("library show requires --gate and --T")
    entry = find_pulse(entries, args.gate, T_ns=args.T)
    print(f"gate={entry.gate} T={entry.params.T} ns "
          f"area={pulse_area(entry.params) / math.pi:.4f}pi "
          f"Omega_m={peak_amplitude(entry.params):.4f} rad/ns")
    print("a  :", " ".join(repr(float(v)) for v in entry.params.a))
    print("phi:", " ".join(repr(float(v)) for v in entry.params.phi))
    return EXIT_OK


def _dispatch(args) -> int:
    if args.command == "library":
        return _run_library(args)
    if args.command == "validate":
        ok, violations = validate_config(args.config)
        if ok:
            print(f"{args.config}: ok")
            return EXIT_OK
        for v in violations:
            print(v, file=sys.stderr)
        return EXIT_CONFIG

    config = _load_config(args.config, args.command)
    seed = args.seed if args.seed is not None else config.get("seed", 0)
    threads = _resolve_threads(args.threads)
    out_dir = Path(args.out) if args.out else Path("runs") / args.command
    t0 = time.perf_counter()
    outputs, summary = _RUNNERS[args.command](config, seed, threads, out_dir, args.force)
    io.update_manifest(out_dir, args.command, {"config": args.config}, outputs)
    wall = time.perf_counter() - t0
    print(f"{args.command}: {summary} wall={wall:.2f}s out={outputs[0]}")
    return EXIT_OK


def _parse_args(argv):
    parser = argparse.ArgumentParser(
        prog="spinctrl",
        description="Robust control pulses for exchange-coupled spin qubits.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "synthesize": "optimize a pulse for a target gate",
        "sweep-coupling": "gate infidelity vs coupling strength",
        "sweep-amplitude": "error distance vs peak amplitude",
        "noise-1f": "1/f dephasing: gate infidelity, PSD, or Ramsey decay",
        "multiqubit": "parallel gates on a lattice vs coupling",
        "zz-gate": "emergent conditional-phase gate on a lattice pair",
        "entropy": "entanglement growth in random circuits",
    }
    for cmd in EXPERIMENT_COMMANDS:
        p = sub.add_parser(cmd, help=helps[cmd])
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", default=None, help="output directory (default runs/<command>)")
        p.add_argument("--seed", type=int, default=None,
                       help="master seed; overrides the config's seed")
        p.add_argument("--threads", type=int, default=None,
                       help="worker count (default SPINCTRL_THREADS or 1)")
        p.add_argument("--force", action="store_true",
                       help="overwrite existing result files")
    lib = sub.add_parser("library", help="list or inspect bundled pulses")
    lib.add_argument("action", choices=("list", "show"))
    lib.add_argument("--gate", default=None, help="gate label for show")
    lib.add_argument("--T", type=float, default=None, help="duration in ns for show")
    val = sub.add_parser("validate", help="check a config against its schema")
    val.add_argument("--config", required=True)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    args = _parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception:
        traceback.print_exc()
        print("numerical failure; diagnostics above", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
