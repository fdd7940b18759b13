"""Figure-level experiments: fidelity sweeps, parallel gates, ZZ gates,
Euler-decomposed universal control, and entanglement-entropy growth.

Every experiment returns an ExperimentResult whose metadata snapshot (inputs,
seeds, engine settings) is sufficient to reproduce the numbers bit for bit;
timestamps live only in the `created` field, never in the data arrays.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from datetime import datetime, timezone

import numpy as np

from .circuits import CircuitSpec, GATE_SET, draw_gate_tables, evolve_random_circuit
from .model import LatticeModel, TwoQubitModel
from .noise import OneOverFConfig, trajectory_values
from .operators import PAULIS, embed, kron_all, pauli_string
from .propagate import evolve_steps, gate_fidelity, make_grid
from .pulse import (
    PulseParams,
    eval_pulse,
    find_pulse,
    gate_unitary,
    load_default_library,
    peak_amplitude,
    trivial_partner,
)
from .seeding import derive_seeds

_X2 = PAULIS["X"]


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass(frozen=True)
class ExperimentResult:
    """x/y series with units, stderr when ensemble-averaged, and metadata."""

    label: str
    x: np.ndarray
    y: np.ndarray
    x_unit: str
    y_unit: str
    metadata: dict
    y_stderr: np.ndarray | None = None
    created: str = ""

    def __post_init__(self):
        if len(self.x) != len(self.y):
            raise ValueError(f"x and y lengths differ: {len(self.x)} vs {len(self.y)}")


def _pulse_snapshot(pulse: PulseParams) -> dict:
    return {"T": pulse.T, "a": [float(v) for v in pulse.a],
            "phi": [float(v) for v in pulse.phi]}


def _gate_matrix(gate) -> np.ndarray:
    if isinstance(gate, str):
        return gate_unitary(gate)
    angle = float(gate)
    return math.cos(angle / 2.0) * np.eye(2) - 1j * math.sin(angle / 2.0) * _X2


def embedded_target(targets: dict, n_qubits: int) -> np.ndarray:
    """Tensor product of per-qubit gates (identity where unspecified)."""
    factors = []
    for q in range(n_qubits):
        factors.append(_gate_matrix(targets[q]) if q in targets else np.eye(2, dtype=complex))
    return kron_all(factors)


def _two_qubit_step_hamiltonians(model: TwoQubitModel, pulse: PulseParams,
                                 t_mid: np.ndarray,
                                 delta1: np.ndarray | None = None,
                                 delta2: np.ndarray | None = None) -> np.ndarray:
    """Rotating-frame H at each midpoint, optionally with per-qubit Z noise."""
    ix = pauli_string("IX")
    zz = pauli_string("ZZ")
    xz = pauli_string("XZ")
    yz = pauli_string("YZ")
    omega = eval_pulse(pulse, t_mid)
    tan_theta = math.tan(model.theta)
    phase = model.dEz_tilde * t_mid
    hs = (
        0.5 * omega[:, None, None] * ix
        + (model.J / 4.0) * zz
        + (0.5 * tan_theta) * (omega * np.cos(phase))[:, None, None] * xz
        - (0.5 * tan_theta) * (omega * np.sin(phase))[:, None, None] * yz
    )
    if delta1 is not None:
        hs = hs + 0.5 * delta1[:, None, None] * pauli_string("ZI")
    if delta2 is not None:
        hs = hs + 0.5 * delta2[:, None, None] * pauli_string("IZ")
    return hs


def fidelity_vs_coupling(pulse: PulseParams, model: TwoQubitModel, j_values,
                         gate="X_pi", steps_per_ns: int = 40) -> ExperimentResult:
    """Gate infidelity against the always-on coupling strength.

    For each J the full rotating-frame two-qubit Hamiltonian (drive, ZZ,
    and oscillating crosstalk) is propagated and compared to the ideal
    spectator-identity target; x is reported as the dimensionless J/Omega_m.
    """
    j_values = np.asarray(j_values, dtype=float)
    j_cap = 0.2 * model.dEz
    if np.any(j_values < 0) or np.any(j_values > j_cap):
        raise ValueError(f"J values must lie within [0, {j_cap}] rad/ns")
    grid = make_grid(pulse.T, steps_per_ns)
    omega_m = peak_amplitude(pulse)
    target = embedded_target({1: gate}, 2)
    infid = np.empty(j_values.shape)
    for idx, j in enumerate(j_values):
        m = TwoQubitModel(dEz=model.dEz, J=float(j))
        hs = _two_qubit_step_hamiltonians(m, pulse, grid.midpoints)
        u = evolve_steps(hs, grid.dt)
        infid[idx] = 1.0 - gate_fidelity(u, target)
    meta = {
        "experiment": "fidelity_vs_coupling",
        "gate": str(gate),
        "pulse": _pulse_snapshot(pulse),
        "model": {"dEz": model.dEz},
        "J_values": [float(j) for j in j_values],
        "omega_m": omega_m,
        "steps_per_ns": steps_per_ns,
    }
    return ExperimentResult(
        label="infidelity_vs_coupling", x=j_values / omega_m, y=infid,
        x_unit="J/Omega_m", y_unit="1-F", metadata=meta, created=_now(),
    )


def fidelity_under_1f(pulse: PulseParams, model: TwoQubitModel,
                      noise_cfg: OneOverFConfig, realizations: int,
                      j_values=None, gate="X_pi",
                      steps_per_ns: int = 40) -> ExperimentResult:
    """Noise-averaged infidelity versus coupling under 1/f dephasing.

    Each realization adds independent frequency-offset trajectories
    delta_i(t)/2 Z_i to both qubits, held constant across each propagation
    step; the same realization seeds pair every J value.
    """
    if realizations < 100:
        raise ValueError(f"need at least 100 realizations, got {realizations}")
    omega_m = peak_amplitude(pulse)
    if j_values is None:
        j_values = omega_m * np.logspace(-3, -1, 9)
    j_values = np.asarray(j_values, dtype=float)
    grid = make_grid(pulse.T, steps_per_ns)
    t_mid = grid.midpoints
    target = embedded_target({1: gate}, 2)
    seeds = derive_seeds(noise_cfg.seed, 2 * realizations)
    deltas = [
        (trajectory_values(noise_cfg, t_mid, seed=seeds[2 * r]),
         trajectory_values(noise_cfg, t_mid, seed=seeds[2 * r + 1]))
        for r in range(realizations)
    ]
    mean = np.empty(j_values.shape)
    stderr = np.empty(j_values.shape)
    for idx, j in enumerate(j_values):
        m = TwoQubitModel(dEz=model.dEz, J=float(j))
        samples = np.empty(realizations)
        for r, (d1, d2) in enumerate(deltas):
            hs = _two_qubit_step_hamiltonians(m, pulse, t_mid, delta1=d1, delta2=d2)
            u = evolve_steps(hs, grid.dt)
            samples[r] = 1.0 - gate_fidelity(u, target)
        mean[idx] = samples.mean()
        stderr[idx] = samples.std(ddof=1) / math.sqrt(realizations)
    meta = {
        "experiment": "fidelity_under_1f",
        "gate": str(gate),
        "pulse": _pulse_snapshot(pulse),
        "model": {"dEz": model.dEz},
        "noise": {"gamma": noise_cfg.gamma, "f_min_khz": noise_cfg.f_min,
                  "f_max_khz": noise_cfg.f_max, "n_components": noise_cfg.n_components,
                  "seed": noise_cfg.seed,
                  "amplitude_exponent": noise_cfg.amplitude_exponent},
        "realizations": realizations,
        "J_values": [float(j) for j in j_values],
        "omega_m": omega_m,
        "steps_per_ns": steps_per_ns,
    }
    return ExperimentResult(
        label="infidelity_under_1f", x=j_values / omega_m, y=mean,
        x_unit="J/Omega_m", y_unit="1-F", y_stderr=stderr,
        metadata=meta, created=_now(),
    )


def _lattice_step_hamiltonians(lat: LatticeModel, pulses: dict[int, PulseParams],
                               t_mid: np.ndarray) -> np.ndarray:
    """Batch of rotating-frame lattice Hamiltonians at the midpoints."""
    n = lat.n_qubits
    dim = 2 ** n
    hs = np.zeros((t_mid.size, dim, dim), dtype=complex)
    zz = np.zeros((dim, dim), dtype=complex)
    for i, j in lat.edges:
        zz += (lat.J / 4.0) * (embed(PAULIS["Z"], i, n) @ embed(PAULIS["Z"], j, n))
    hs += zz
    for q, pulse in pulses.items():
        hs += (0.5 * eval_pulse(pulse, t_mid))[:, None, None] * embed(PAULIS["X"], q, n)
    for a, b in lat.edges:
        for i, j in ((a, b), (b, a)):
            if j not in pulses:
                continue
            beta = lat.edge_beta(i, j)
            delta = lat.detuning(i, j)
            amp = beta * eval_pulse(pulses[j], t_mid)
            phase = delta * t_mid
            zj = embed(PAULIS["Z"], j, n)
            hs += (amp * np.cos(phase))[:, None, None] * (embed(PAULIS["X"], i, n) @ zj)
            hs += (amp * np.sin(phase))[:, None, None] * (embed(PAULIS["Y"], i, n) @ zj)
    return hs


def dressed_assignment(lat: LatticeModel, primary: dict[int, str],
                       entries=None, gate_time: float = 50.0,
                       kind: str = "robust",
                       dressing_gate: str = "X_2pi") -> tuple[dict, dict]:
    """Pulse assignment implementing gates on `primary` qubits.

    Alternating-pattern protocol: besides the primary gates, idle qubits are
    dressed with identity pulses (X_2pi by default) until every coupled edge
    has at least one driven endpoint, choosing non-adjacent dressers first.
    Returns (assignment qubit -> PulseParams, target qubit -> gate label).
    """
    if entries is None:
        entries = load_default_library()
    if kind not in ("robust", "trivial"):
        raise ValueError(f"kind must be 'robust' or 'trivial', got {kind!r}")

    def pulse_for(gate: str) -> PulseParams:
        params = find_pulse(entries, gate, T_ns=gate_time).params
        return trivial_partner(params) if kind == "trivial" else params

    assignment = {q: pulse_for(g) for q, g in primary.items()}
    target = dict(primary)
    driven = set(primary)

    def uncovered():
        return [e for e in lat.edges if e[0] not in driven and e[1] not in driven]

    while uncovered():
        candidates = sorted(set(q for e in uncovered() for q in e))
        nonadjacent = [q for q in candidates
                       if not any(j in driven for j in lat.neighbors(q))]
        pool = nonadjacent if nonadjacent else candidates
        best = max(pool, key=lambda q: (sum(q in e for e in uncovered()), -q))
        assignment[best] = pulse_for(dressing_gate)
        target[best] = dressing_gate
        driven.add(best)
    return assignment, target


def parallel_gate_fidelity(lattice: LatticeModel, assignment: dict[int, PulseParams],
                           target: dict, j_values=None, omega_m: float | None = None,
                           steps_per_ns: int = 40) -> ExperimentResult:
    """Infidelity of simultaneous single-qubit gates on a lattice vs J.

    Propagates the rotating-frame lattice Hamiltonian (drives, static ZZ,
    and oscillating nearest-neighbor crosstalk) and compares to the ideal
    tensor-product target. Driving two coupled qubits simultaneously is
    allowed but flagged, since it falls outside the alternating pattern.
    """
    if not assignment:
        raise ValueError("assignment must drive at least one qubit")
    durations = {p.T for p in assignment.values()}
    if len(durations) > 1:
        raise ValueError(f"assignment pulses must share a duration, got {sorted(durations)}")
    for i, j in lattice.edges:
        if i in assignment and j in assignment:
            warnings.warn(f"qubits {i} and {j} are coupled and driven simultaneously "
                          "(outside the alternating pattern)", stacklevel=2)
            break
    T = durations.pop()
    grid = make_grid(T, steps_per_ns)
    if omega_m is None:
        omega_m = float(np.mean([peak_amplitude(p) for p in assignment.values()]))
    if j_values is None:
        j_values = omega_m * np.logspace(-3, np.log10(0.2), 9)
    j_values = np.asarray(j_values, dtype=float)
    tgt = embedded_target(target, lattice.n_qubits)
    infid = np.empty(j_values.shape)
    for idx, j in enumerate(j_values):
        lat_j = replace(lattice, J=float(j))
        hs = _lattice_step_hamiltonians(lat_j, assignment, grid.midpoints)
        u = evolve_steps(hs, grid.dt)
        infid[idx] = 1.0 - gate_fidelity(u, tgt)
    meta = {
        "experiment": "parallel_gate_fidelity",
        "lattice": lattice.to_dict(),
        "assignment": {str(q): _pulse_snapshot(p) for q, p in assignment.items()},
        "target": {str(q): str(g) for q, g in target.items()},
        "J_values": [float(j) for j in j_values],
        "omega_m": omega_m,
        "steps_per_ns": steps_per_ns,
    }
    return ExperimentResult(
        label="parallel_gate_infidelity", x=j_values / omega_m, y=infid,
        x_unit="J/Omega_m", y_unit="1-F", metadata=meta, created=_now(),
    )


def conditional_phase(u: np.ndarray, pair: tuple[int, int], n_qubits: int) -> float:
    """ZZ conditional phase chi with U ~ exp(-i chi/2 Z_a Z_b) on the pair.

    Extracted from the diagonal entries with all other qubits spin-up:
    chi = -arg(U_00 U_11 / (U_01 U_10)) / 2 over the pair's bit values.
    """
    a, b = pair
    ba = n_qubits - 1 - a
    bb = n_qubits - 1 - b
    def diag(v_a: int, v_b: int) -> complex:
        idx = (v_a << ba) | (v_b << bb)
        return u[idx, idx]
    ratio = (diag(0, 0) * diag(1, 1)) / (diag(0, 1) * diag(1, 0))
    return float(-np.angle(ratio) / 2.0)


def zz_gate_fidelity(lattice: LatticeModel, T: float = 50.0, pair: tuple[int, int] = (1, 2),
                     j_values=None, dressed: bool = True, entries=None,
                     steps_per_ns: int = 40) -> ExperimentResult:
    """Infidelity of the emergent conditional-phase gate ZZ(JT/2) on a pair.

    The pair idles while (when dressed) the remaining qubits run identity
    X_2pi pulses that echo away their own couplings, leaving the pair edge's
    free evolution exp(-i JT/4 Z_aZ_b) as the target with conditional phase
    JT/2. The undressed variant leaves all spectators idle.
    """
    if entries is None:
        entries = load_default_library()
    a, b = pair
    if tuple(sorted((a, b))) not in lattice.edges:
        raise ValueError(f"pair {pair} is not an edge of the lattice")
    x2pi = find_pulse(entries, "X_2pi", T_ns=T).params
    omega_m = peak_amplitude(x2pi)

    assignment = {}
    if dressed:
        driven = set(pair)  # forbidden to drive; pair edge needs no cover
        def uncovered():
            return [e for e in lattice.edges
                    if set(e) != {a, b} and e[0] not in driven and e[1] not in driven]
        while uncovered():
            candidates = sorted(set(q for e in uncovered() for q in e) - {a, b})
            if not candidates:
                break
            best = max(candidates, key=lambda q: (sum(q in e for e in uncovered()), -q))
            assignment[best] = x2pi
            driven.add(best)

    if j_values is None:
        j_values = omega_m * np.logspace(-3, np.log10(0.2), 9)
    j_values = np.asarray(j_values, dtype=float)
    grid = make_grid(T, steps_per_ns)
    n = lattice.n_qubits
    zzop = embed(PAULIS["Z"], a, n) @ embed(PAULIS["Z"], b, n)
    infid = np.empty(j_values.shape)
    phases = np.empty(j_values.shape)
    for idx, j in enumerate(j_values):
        lat_j = replace(lattice, J=float(j))
        if assignment:
            hs = _lattice_step_hamiltonians(lat_j, assignment, grid.midpoints)
            u = evolve_steps(hs, grid.dt)
        else:
            static = (float(j) / 4.0) * sum(
                embed(PAULIS["Z"], i, n) @ embed(PAULIS["Z"], k, n)
                for i, k in lattice.edges)
            vals, vecs = np.linalg.eigh(static)
            u = (vecs * np.exp(-1j * T * vals)) @ vecs.conj().T
        target = _zz_target(float(j), T, zzop)
        infid[idx] = 1.0 - gate_fidelity(u, target)
        phases[idx] = conditional_phase(u, pair, n)
    meta = {
        "experiment": "zz_gate_fidelity",
        "lattice": lattice.to_dict(),
        "pair": list(pair),
        "dressed": dressed,
        "gate_time": T,
        "J_values": [float(j) for j in j_values],
        "conditional_phase": [float(p) for p in phases],
        "target_phase": [float(j) * T / 2.0 for j in j_values],
        "omega_m": omega_m,
        "steps_per_ns": steps_per_ns,
    }
    return ExperimentResult(
        label="zz_gate_infidelity", x=j_values / omega_m, y=infid,
        x_unit="J/Omega_m", y_unit="1-F", metadata=meta, created=_now(),
    )


def _zz_target(j: float, T: float, zzop: np.ndarray) -> np.ndarray:
    phase = j * T / 4.0
    dim = zzop.shape[0]
    return math.cos(phase) * np.eye(dim) - 1j * math.sin(phase) * zzop


def euler_decompose(target: np.ndarray) -> tuple[float, float, float]:
    """Angles (alpha, beta, lambda) with Z_beta X_pi/2 Z_alpha X_-pi/2 Z_lambda = target.

    The X_pi/2 conjugation turns Z_alpha into Y_-alpha, so this is a ZYZ
    decomposition with middle angle gamma = -alpha. The global phase is
    normalized away first. Branch choices: gamma in [0, pi]; when the
    decomposition is degenerate (gamma = 0 or pi) lambda is set to 0.
    """
    target = np.asarray(target, dtype=complex)
    if target.shape != (2, 2):
        raise ValueError(f"expected a 2x2 unitary, got shape {target.shape}")
    det = np.linalg.det(target)
    if abs(abs(det) - 1.0) > 1e-9:
        raise ValueError("target must be unitary")
    v = target / np.sqrt(det)

    gamma = 2.0 * math.atan2(abs(v[1, 0]), abs(v[0, 0]))
    if abs(v[1, 0]) < 1e-12:
        beta = float(-2.0 * np.angle(v[0, 0]))
        lam = 0.0
    elif abs(v[0, 0]) < 1e-12:
        beta = float(2.0 * np.angle(v[1, 0]))
        lam = 0.0
    else:
        s = float(np.angle(v[0, 0]))   # -(beta + lambda)/2
        d = float(np.angle(v[1, 0]))   # (beta - lambda)/2
        beta = d - s
        lam = -d - s
    alpha = -gamma

    residual = np.linalg.norm(euler_reconstruct(alpha, beta, lam) - v * _phase_align(alpha, beta, lam, v))
    if residual > 1e-10:
        raise RuntimeError(f"decomposition residual {residual:.3e} exceeds 1e-10")
    return alpha, beta, lam


def _z_gate(angle: float) -> np.ndarray:
    return np.diag([np.exp(-1j * angle / 2.0), np.exp(1j * angle / 2.0)])


def _x_gate(angle: float) -> np.ndarray:
    return math.cos(angle / 2.0) * np.eye(2) - 1j * math.sin(angle / 2.0) * _X2


def euler_reconstruct(alpha: float, beta: float, lam: float) -> np.ndarray:
    """Z_beta X_pi/2 Z_alpha X_-pi/2 Z_lambda as a matrix."""
    return (_z_gate(beta) @ _x_gate(math.pi / 2.0) @ _z_gate(alpha)
            @ _x_gate(-math.pi / 2.0) @ _z_gate(lam))


def _phase_align(alpha: float, beta: float, lam: float, v: np.ndarray) -> complex:
    recon = euler_reconstruct(alpha, beta, lam)
    overlap = np.trace(v.conj().T @ recon) / 2.0
    mag = abs(overlap)
    return overlap / mag if mag > 1e-12 else 1.0


def build_pulse_banks(gate_time: float = 50.0, entries=None) -> tuple[dict, dict]:
    """(robust, trivial) gate-label -> PulseParams banks for one gate time."""
    if entries is None:
        entries = load_default_library()
    robust = {g: find_pulse(entries, g, T_ns=gate_time).params for g in GATE_SET}
    trivial = {g: trivial_partner(p) for g, p in robust.items()}
    return robust, trivial


def entropy_growth(lattice: LatticeModel, spec: CircuitSpec, realizations: int,
                   master_seed: int = 0) -> ExperimentResult:
    """Mean bipartite entanglement entropy per layer of random gate circuits.

    All qubits are driven every layer with gates drawn uniformly from the
    spec's gate set; waveforms follow spec.pulse_kind. x is the layer index
    (x=0 is the initial product state) and y the realization-averaged
    entropy in nats for spec.partition.
    """
    if realizations < 1:
        raise ValueError("realizations must be >= 1")
    robust, trivial = build_pulse_banks(spec.gate_time)
    bank = robust if spec.pulse_kind == "robust" else trivial
    tables = draw_gate_tables(master_seed, realizations, spec.depth,
                              lattice.n_qubits, spec.gate_set)
    run = evolve_random_circuit(
        lattice, tables, bank, gate_set=spec.gate_set, gate_time=spec.gate_time,
        dt=spec.dt, include_crosstalk=spec.include_crosstalk,
        partitions=(spec.partition,),
    )
    series = run.entropy[spec.partition]
    y = series.mean(axis=0)
    stderr = (series.std(axis=0, ddof=1) / math.sqrt(realizations)
              if realizations > 1 else np.zeros(series.shape[1]))
    meta = {
        "experiment": "entropy_growth",
        "lattice": lattice.to_dict(),
        "spec": {
            "depth": spec.depth, "gate_time": spec.gate_time,
            "pulse_kind": spec.pulse_kind, "partition": spec.partition,
            "gate_set": list(spec.gate_set),
            "include_crosstalk": spec.include_crosstalk, "dt": spec.dt,
        },
        "realizations": realizations,
        "master_seed": master_seed,
        "norm_drift": run.norm_drift,
    }
    return ExperimentResult(
        label=f"entropy_{spec.pulse_kind}_{spec.partition}",
        x=np.arange(spec.depth + 1, dtype=float), y=y,
        x_unit="layer", y_unit="S_nats", y_stderr=stderr,
        metadata=meta, created=_now(),
    )


def entropy_comparison(lattice: LatticeModel, spec: CircuitSpec, realizations: int,
                       master_seed: int = 0) -> dict:
    """Robust and trivial arms over both partitions with shared gate tables.

    Returns {(pulse_kind, partition): ExperimentResult}. Both arms replay
    identical gate sequences (same derived seeds), isolating the waveform
    family as the only difference.
    """
    robust, trivial = build_pulse_banks(spec.gate_time)
    tables = draw_gate_tables(master_seed, realizations, spec.depth,
                              lattice.n_qubits, spec.gate_set)
    partitions = ("even-odd", "upper-lower")
    out = {}
    for kind, bank in (("robust", robust), ("trivial", trivial)):
        run = evolve_random_circuit(
            lattice, tables, bank, gate_set=spec.gate_set,
            gate_time=spec.gate_time, dt=spec.dt,
            include_crosstalk=spec.include_crosstalk, partitions=partitions,
        )
        for part in partitions:
            series = run.entropy[part]
            y = series.mean(axis=0)
            stderr = (series.std(axis=0, ddof=1) / math.sqrt(realizations)
                      if realizations > 1 else np.zeros(series.shape[1]))
            meta = {
                "experiment": "entropy_comparison",
                "lattice": lattice.to_dict(),
                "pulse_kind": kind,
                "partition": part,
                "depth": spec.depth,
                "gate_time": spec.gate_time,
                "gate_set": list(spec.gate_set),
                "include_crosstalk": spec.include_crosstalk,
                "dt": spec.dt,
                "realizations": realizations,
                "master_seed": master_seed,
                "norm_drift": run.norm_drift,
            }
            out[(kind, part)] = ExperimentResult(
                label=f"entropy_{kind}_{part}",
                x=np.arange(spec.depth + 1, dtype=float), y=y,
                x_unit="layer", y_unit="S_nats", y_stderr=stderr,
                metadata=meta, created=_now(),
            )
    return out
