"""Statevector simulation of random single-qubit-gate circuits on a lattice.

The rotating-frame lattice Hamiltonian splits into a diagonal ZZ part and
per-qubit terms

    B_i(t) = dx_i(t, z) X_i + dy_i(t, z) Y_i,
    dx_i = Omega_i/2 + sum_j beta_ij Omega_j(t) cos(D_ij t) z_j,
    dy_i =             sum_j beta_ij Omega_j(t) sin(D_ij t) z_j,

where z_j = +-1 are the computational values of the neighbors, so each B_i
is block diagonal over the other qubits and applies an exact 2x2 rotation
per amplitude pair. One time step is a palindromic (Strang) product,

    e^(-i D dt/2) [prod_i e^(-i B_i dt/2)] [prod_i reversed] e^(-i D dt/2),

with coefficients frozen at the step midpoint: every factor is exactly
unitary and the global error is O(dt^2). Realizations evolve as a batch
(R, 2^n) since all per-step coefficients vectorize across the batch.

Carrier phases D_ij t use absolute circuit time, keeping simultaneous
drives mutually coherent across layers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import LatticeModel
from .pulse import PulseParams, eval_pulse

GATE_SET = ("X_pi", "X_pi_2", "X_2pi")
DEFAULT_DT = 0.2  # ns

_PARTITIONS = ("even-odd", "upper-lower")


@dataclass(frozen=True)
class CircuitSpec:
    """Random-circuit settings for entropy growth runs.

    gate_set lists the labels each qubit draws from uniformly at every
    layer; pulse_kind selects the waveform family implementing them.
    """

    depth: int = 200
    gate_time: float = 50.0
    pulse_kind: str = "robust"
    partition: str = "even-odd"
    gate_set: tuple = GATE_SET
    include_crosstalk: bool = True
    dt: float = DEFAULT_DT

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError(f"depth must be >= 1, got {self.depth}")
        if self.pulse_kind not in ("robust", "trivial"):
            raise ValueError(f"pulse_kind must be 'robust' or 'trivial', got {self.pulse_kind!r}")
        if self.partition not in _PARTITIONS:
            raise ValueError(f"partition must be one of {_PARTITIONS}, got {self.partition!r}")
        unknown = set(self.gate_set) - set(GATE_SET)
        if unknown:
            raise ValueError(f"gate labels {sorted(unknown)} outside the allowed set {GATE_SET}")
        if not self.gate_set:
            raise ValueError("gate_set must not be empty")
        if self.gate_time <= 0 or self.dt <= 0:
            raise ValueError("gate_time and dt must be positive")


def partition_qubits(partition: str, n_qubits: int) -> tuple[int, ...]:
    """A-side qubit indices for a named bipartition."""
    if partition == "even-odd":
        return tuple(range(0, n_qubits, 2))
    if partition == "upper-lower":
        return tuple(range(n_qubits // 2))
    raise ValueError(f"unknown partition {partition!r}")


def entanglement_entropy(psi: np.ndarray, a_qubits, n_qubits: int) -> np.ndarray:
    """Von Neumann entropy S(rho_A) in nats; batched over leading axes.

    psi has shape (..., 2^n); qubit 0 is the most significant factor.
    """
    psi = np.asarray(psi)
    batch = psi.shape[:-1]
    a = tuple(a_qubits)
    b = tuple(q for q in range(n_qubits) if q not in a)
    tensor = psi.reshape(batch + (2,) * n_qubits)
    nb = len(batch)
    perm = tuple(range(nb)) + tuple(nb + q for q in a) + tuple(nb + q for q in b)
    matrix = np.transpose(tensor, perm).reshape(batch + (2 ** len(a), 2 ** len(b)))
    svals = np.linalg.svd(matrix, compute_uv=False)
    p = svals ** 2
    terms = np.where(p > 1e-300, p * np.log(np.maximum(p, 1e-300)), 0.0)
    return -np.sum(terms, axis=-1)


def draw_gate_tables(master_seed: int, realizations: int, depth: int,
                     n_qubits: int, gate_set=GATE_SET) -> np.ndarray:
    """Gate-label indices of shape (realizations, depth, n_qubits).

    Each realization draws from its own derived seed, so tables are stable
    under changes to the realization count or work distribution.
    """
    from .seeding import derive_seeds

    tables = np.empty((realizations, depth, n_qubits), dtype=np.int64)
    for r, seed in enumerate(derive_seeds(master_seed, realizations)):
        rng = np.random.default_rng(seed)
        tables[r] = rng.integers(0, len(gate_set), size=(depth, n_qubits))
    return tables


def _z_diagonals(n_qubits: int) -> np.ndarray:
    """(n, 2^n) array of Z_i eigenvalues per basis state."""
    idx = np.arange(2 ** n_qubits)
    out = np.empty((n_qubits, 2 ** n_qubits))
    for q in range(n_qubits):
        bit = (idx >> (n_qubits - 1 - q)) & 1
        out[q] = 1.0 - 2.0 * bit
    return out


@dataclass(frozen=True)
class CircuitRun:
    """Per-layer entropies and norm drift for a batch of realizations.

    entropy maps partition name -> array (realizations, depth + 1) whose
    column 0 is the initial (product) state.
    """

    entropy: dict
    norm_drift: float


def evolve_random_circuit(lat: LatticeModel, tables: np.ndarray,
                          pulse_bank: dict[str, PulseParams], gate_set=GATE_SET,
                          gate_time: float = 50.0, dt: float = DEFAULT_DT,
                          include_crosstalk: bool = True,
                          partitions=_PARTITIONS) -> CircuitRun:
    """Run random circuits for a batch of gate tables and record entropies.

    tables has shape (R, depth, n) with entries indexing gate_set; every
    qubit is driven every layer. The initial state is all spins down.
    """
    n = lat.n_qubits
    dim = 2 ** n
    if n > 12:
        raise ValueError(f"statevector engine limited to 12 qubits, got {n}")
    realizations, depth, n_cols = tables.shape
    if n_cols != n:
        raise ValueError(f"tables qubit axis {n_cols} != lattice size {n}")

    steps = max(1, int(round(gate_time / dt)))
    dt = gate_time / steps
    t_mid_local = (np.arange(steps) + 0.5) * dt

    # Waveform bank: (gates, steps) midpoint samples of each pulse.
    wf = np.stack([eval_pulse(pulse_bank[g], t_mid_local) for g in gate_set])

    zdiag = _z_diagonals(n)
    zz_diag = np.zeros(dim)
    for i, j in lat.edges:
        zz_diag += zdiag[i] * zdiag[j]
    diag_half = np.exp(-1j * (dt / 2.0) * (lat.J / 4.0) * zz_diag)

    neighbor_info = {i: [] for i in range(n)}
    if include_crosstalk:
        for a, b in lat.edges:
            for i, j in ((a, b), (b, a)):
                neighbor_info[i].append((j, lat.edge_beta(i, j), lat.detuning(i, j)))

    psi = np.zeros((realizations, dim), dtype=complex)
    psi[:, dim - 1] = 1.0  # all spins down

    part_sets = {p: partition_qubits(p, n) for p in partitions}
    entropy = {p: np.zeros((realizations, depth + 1)) for p in partitions}
    worst_drift = 0.0
    half = dt / 2.0

    for ell in range(depth):
        t0 = ell * gate_time
        omegas = wf[tables[:, ell, :], :]  # (R, n, steps)
        carriers = {}
        for i in range(n):
            for j, beta, delta in neighbor_info[i]:
                phase = delta * (t0 + t_mid_local)
                carriers[(i, j)] = (beta * np.cos(phase), beta * np.sin(phase))

        def rotate(i: int, k: int):
            dx = 0.5 * omegas[:, i, k][:, None] * np.ones((1, dim))
            dy = None
            for j, beta, delta in neighbor_info[i]:
                cos_c, sin_c = carriers[(i, j)]
                amp = omegas[:, j, k]
                dx += (amp * cos_c[k])[:, None] * zdiag[j][None, :]
                term = (amp * sin_c[k])[:, None] * zdiag[j][None, :]
                dy = term if dy is None else dy + term
            if dy is None:
                dy = np.zeros_like(dx)
            bit = n - 1 - i
            shape = (realizations, 2 ** i, 2, 2 ** bit)
            dxp = dx.reshape(shape)[:, :, 0, :]
            dyp = dy.reshape(shape)[:, :, 0, :]
            r = np.hypot(dxp, dyp)
            theta = half * r
            cos_t = np.cos(theta)
            sin_over = np.where(r > 1e-14, np.sin(theta) / np.where(r > 1e-14, r, 1.0), half)
            u = dxp + 1j * dyp
            g = -1j * sin_over
            view = psi.reshape(shape)
            a0 = view[:, :, 0, :].copy()
            b0 = view[:, :, 1, :]
            view[:, :, 0, :] = cos_t * a0 + g * np.conj(u) * b0
            view[:, :, 1, :] = g * u * a0 + cos_t * b0

        for k in range(steps):
            psi *= diag_half[None, :]
            for i in range(n):
                rotate(i, k)
            for i in reversed(range(n)):
                rotate(i, k)
            psi *= diag_half[None, :]

        norms = np.sum(np.abs(psi) ** 2, axis=1)
        worst_drift = max(worst_drift, float(np.max(np.abs(norms - 1.0))))
        for p, qubits in part_sets.items():
            entropy[p][:, ell + 1] = entanglement_entropy(psi, qubits, n)

    return CircuitRun(entropy=entropy, norm_drift=worst_drift)


def bell_pair_state(n_qubits: int, q1: int, q2: int) -> np.ndarray:
    """(|00> + |11>)/sqrt(2) on qubits (q1, q2), all others spin down."""
    dim = 2 ** n_qubits
    psi = np.zeros(dim, dtype=complex)
    base = dim - 1  # all ones
    b1 = n_qubits - 1 - q1
    b2 = n_qubits - 1 - q2
    idx_00 = base & ~(1 << b1) & ~(1 << b2)
    psi[base] = 1.0 / math.sqrt(2.0)
    psi[idx_00] = 1.0 / math.sqrt(2.0)
    return psi
