"""Hamiltonians for exchange-coupled spin qubits and crosstalk extraction.

All frequencies and couplings are angular, in rad/ns. The two-qubit rotating
frame model captures a driven qubit with an always-on exchange coupling J to
a detuned neighbor: the static ZZ backaction stays on, and the drive leaks
onto the neighbor's transition as an oscillating XZ/YZ term whose relative
amplitude is set by the flip-flop mixing angle.

Multiqubit lattices use the isotropic exchange form J/4 (XX + YY + ZZ) in
the lab frame. Crosstalk coefficients for a driven qubit are extracted by a
least-action block diagonalization (the unitary closest to the identity that
brings the static Hamiltonian to block form over spectator configurations),
then expanding the transformed drive operator in the Pauli basis.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .operators import MAX_DENSE_QUBITS, PAULIS, embed, pauli_string
from .pulse import PulseParams, eval_pulse

DEFAULT_DEZ = 0.2       # Zeeman splitting difference of neighbors, rad/ns
# Residual always-on exchange for the bundled lattices (0.4 MHz). Keeping
# J/dEz small preserves the crosstalk hierarchy: three-body terms sit a
# factor ~tan(theta) below nearest-neighbor XZ, so this choice leaves them
# two orders down. Experiment configs override J per run.
DEFAULT_LATTICE_J = 0.0025
OMEGA_BASE = 1.0        # reference qubit frequency for lattices, rad/ns

# Per-site frequency staggers (rad/ns) layered on the two-sublattice split.
# Strictly regular assignments leave pairs of spectator configurations exactly
# degenerate by a reflection-plus-flip symmetry, and those pairs hybridize at
# third order in J, which makes the least-action transform ill posed. The
# staggers lift every same-magnetization diagonal degeneracy well above the
# effective couplings while keeping all nearest-neighbor detunings near 0.2.
FREQUENCY_STAGGER = (
    0.0, 0.0047, 0.0113, 0.0171, 0.0233,
    0.0299, 0.0361, 0.0433, 0.0509, 0.0567,
)


class DegeneracyError(ValueError):
    """Raised when degenerate blocks prevent a unique least-action transform."""


def dressed_splitting(J: float, dEz: float) -> float:
    """Flip-flop-dressed splitting difference sqrt(J^2 + dEz^2)."""
    return float(np.hypot(J, dEz))


def mixing_angle(J: float, dEz: float) -> float:
    """Flip-flop mixing angle theta with tan(2 theta) = J / dEz.

    Computed in half-angle form, theta = arctan(J / (dEz + sqrt(J^2 + dEz^2))),
    which is single-valued and stable for J >= 0.
    """
    if dEz <= 0:
        raise ValueError(f"dEz must be positive, got {dEz}")
    if J < 0:
        raise ValueError(f"J must be non-negative, got {J}")
    return float(np.arctan2(J, dEz + dressed_splitting(J, dEz)))


@dataclass(frozen=True)
class TwoQubitModel:
    """Driven qubit and its exchange-coupled detuned neighbor.

    dEz is the difference of the two Zeeman splittings and J the always-on
    exchange coupling, both in rad/ns. Absolute qubit frequencies drop out
    in the rotating frame and are not tracked here.
    """

    dEz: float = DEFAULT_DEZ
    J: float = 0.01

    def __post_init__(self):
        if self.dEz <= 0:
            raise ValueError(f"dEz must be positive, got {self.dEz}")
        if self.J < 0:
            raise ValueError(f"J must be non-negative, got {self.J}")

    @property
    def theta(self) -> float:
        return mixing_angle(self.J, self.dEz)

    @property
    def dEz_tilde(self) -> float:
        return dressed_splitting(self.J, self.dEz)


def rotating_frame_hamiltonian(model: TwoQubitModel, pulse: PulseParams) -> Callable[[float], np.ndarray]:
    """Two-qubit rotating-frame Hamiltonian for a drive on qubit 2.

    H(t) = Omega(t)/2 IX + J/4 ZZ
         + tan(theta) Omega(t)/2 [cos(dEz~ t) XZ - sin(dEz~ t) YZ]

    Qubit 1 (first tensor factor) is the spectator; the XZ/YZ crosstalk flips
    it with a phase conditioned on the driven qubit.
    """
    ix = pauli_string("IX")
    zz = pauli_string("ZZ")
    xz = pauli_string("XZ")
    yz = pauli_string("YZ")
    tan_theta = np.tan(model.theta)
    splitting = model.dEz_tilde
    j_term = (model.J / 4.0) * zz

    def h(t: float) -> np.ndarray:
        omega = eval_pulse(pulse, t)
        phase = splitting * t
        return (
            (omega / 2.0) * ix
            + j_term
            + tan_theta * (omega / 2.0) * (np.cos(phase) * xz - np.sin(phase) * yz)
        )

    return h


@dataclass(frozen=True)
class NoiseChannel:
    """First-order error channel epsilon * v(t) * op in the driven-qubit frame."""

    label: str
    epsilon: float
    v: Callable[[float], np.ndarray]
    op: np.ndarray


def effective_noise_channels(model: TwoQubitModel, pulse: PulseParams) -> list[NoiseChannel]:
    """The three exchange-induced error channels of the driven qubit.

    Every channel has noise operator Z on the driven qubit; the spectator
    factor of each two-qubit string commutes with the ideal drive and only
    labels the channel. Channels:

      ZZ: epsilon = J/4,        v(t) = 1
      XZ: epsilon = tan(theta)/2, v(t) =  Omega(t) cos(dEz~ t)
      YZ: epsilon = tan(theta)/2, v(t) = -Omega(t) sin(dEz~ t)
    """
    z = PAULIS["Z"]
    tan_theta = np.tan(model.theta)
    splitting = model.dEz_tilde

    def v_static(t):
        return np.ones_like(np.asarray(t, dtype=float))

    def v_cos(t):
        return eval_pulse(pulse, t) * np.cos(splitting * np.asarray(t, dtype=float))

    def v_sin(t):
        return -eval_pulse(pulse, t) * np.sin(splitting * np.asarray(t, dtype=float))

    return [
        NoiseChannel("ZZ", model.J / 4.0, v_static, z),
        NoiseChannel("XZ", tan_theta / 2.0, v_cos, z),
        NoiseChannel("YZ", tan_theta / 2.0, v_sin, z),
    ]


def two_qubit_noise_channels(model: TwoQubitModel, pulse: PulseParams) -> list[NoiseChannel]:
    """Same channels with their full two-qubit noise operators.

    Used to cross-check the single-qubit reduction: the error integrals of
    these four-dimensional channels against the full rotating-frame evolution
    must reproduce the reduced curves.
    """
    reduced = effective_noise_channels(model, pulse)
    return [
        NoiseChannel(ch.label, ch.epsilon, ch.v, pauli_string(ch.label))
        for ch in reduced
    ]


def crosstalk_pair_model(omega1: float, omega2: float, J: float, beta: float | None,
                         pulse: PulseParams) -> Callable[[float], np.ndarray]:
    """Simplified two-qubit crosstalk model for a drive on qubit 2.

    H(t) = Omega(t)/2 X_2 + J/4 Z_1 Z_2
         + beta Omega(t) [cos(D12 t) X_1 + sin(D12 t) Y_1] Z_2

    with D12 = omega2 - omega1. If beta is None it defaults to
    tan(mixing_angle(J, |D12|)) / 2.
    """
    delta = omega2 - omega1
    if beta is None:
        beta = np.tan(mixing_angle(J, abs(delta))) / 2.0
    ix = pauli_string("IX")
    zz = pauli_string("ZZ")
    xz = pauli_string("XZ")
    yz = pauli_string("YZ")
    j_term = (J / 4.0) * zz

    def h(t: float) -> np.ndarray:
        omega = eval_pulse(pulse, t)
        phase = delta * t
        return (
            (omega / 2.0) * ix
            + j_term
            + beta * omega * (np.cos(phase) * xz + np.sin(phase) * yz)
        )

    return h


@dataclass(frozen=True)
class LatticeModel:
    """n-qubit lattice with isotropic exchange on the listed edges.

    omegas are the qubit frequencies (rad/ns), J the shared exchange coupling,
    and beta an optional crosstalk-amplitude override; beta=None applies the
    mixing-angle rule tan(theta_ij)/2 per edge.
    """

    omegas: tuple[float, ...]
    edges: tuple[tuple[int, int], ...]
    J: float
    beta: float | None = None

    def __post_init__(self):
        omegas = tuple(float(w) for w in self.omegas)
        edges = tuple(tuple(sorted((int(i), int(j)))) for i, j in self.edges)
        object.__setattr__(self, "omegas", omegas)
        object.__setattr__(self, "edges", edges)
        n = len(omegas)
        seen = set()
        for i, j in edges:
            if i == j:
                raise ValueError(f"self-coupling on qubit {i}")
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"edge ({i},{j}) out of range for {n} qubits")
            if (i, j) in seen:
                raise ValueError(f"duplicate edge ({i},{j})")
            seen.add((i, j))
        if self.J < 0:
            raise ValueError(f"J must be non-negative, got {self.J}")

    @property
    def n_qubits(self) -> int:
        return len(self.omegas)

    def neighbors(self, i: int) -> tuple[int, ...]:
        out = [j for a, j in self.edges if a == i] + [a for a, j in self.edges if j == i]
        return tuple(sorted(out))

    def detuning(self, i: int, j: int) -> float:
        return self.omegas[j] - self.omegas[i]

    def edge_beta(self, i: int, j: int) -> float:
        if self.beta is not None:
            return self.beta
        return float(np.tan(mixing_angle(self.J, abs(self.detuning(i, j)))) / 2.0)

    def to_dict(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "edges": [list(e) for e in self.edges],
            "omegas": list(self.omegas),
            "J": self.J,
            "beta": self.beta,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LatticeModel":
        n = int(data["n_qubits"])
        omegas = [float(w) for w in data["omegas"]]
        if len(omegas) != n:
            raise ValueError(f"expected {n} omegas, got {len(omegas)}")
        return cls(
            omegas=tuple(omegas),
            edges=tuple((int(i), int(j)) for i, j in data["edges"]),
            J=float(data["J"]),
            beta=None if data.get("beta") is None else float(data["beta"]),
        )


def _staggered_omegas(colors: Sequence[int], detuning: float) -> tuple[float, ...]:
    if len(colors) > len(FREQUENCY_STAGGER):
        raise ValueError(f"no stagger table beyond {len(FREQUENCY_STAGGER)} qubits")
    return tuple(
        OMEGA_BASE + detuning * c + FREQUENCY_STAGGER[i]
        for i, c in enumerate(colors)
    )


def chain_lattice(n: int = 4, J: float = DEFAULT_LATTICE_J,
                  detuning: float = DEFAULT_DEZ, beta: float | None = None) -> LatticeModel:
    """Open chain of n qubits with alternating sublattice frequencies."""
    colors = [i % 2 for i in range(n)]
    edges = tuple((i, i + 1) for i in range(n - 1))
    return LatticeModel(_staggered_omegas(colors, detuning), edges, J, beta)


def honeycomb_cell(J: float = DEFAULT_LATTICE_J, detuning: float = DEFAULT_DEZ,
                   beta: float | None = None) -> LatticeModel:
    """Single honeycomb unit cell: a six-qubit ring."""
    colors = [i % 2 for i in range(6)]
    edges = tuple((i, (i + 1) % 6) for i in range(6))
    return LatticeModel(_staggered_omegas(colors, detuning), edges, J, beta)


def grid_lattice(J: float = DEFAULT_LATTICE_J, detuning: float = DEFAULT_DEZ,
                 beta: float | None = None) -> LatticeModel:
    """Ten-qubit honeycomb-compatible fragment: two rows of five with rungs.

    Qubits 0-4 form the top row, 5-9 the bottom row; rungs at columns 0, 2,
    and 4 close two hexagons (0,1,2,7,6,5) and (2,3,4,9,8,7).
    """
    colors = [(i // 5 + i % 5) % 2 for i in range(10)]
    row_edges = [(i, i + 1) for i in range(4)] + [(i, i + 1) for i in range(5, 9)]
    rungs = [(0, 5), (2, 7), (4, 9)]
    return LatticeModel(_staggered_omegas(colors, detuning), tuple(row_edges + rungs), J, beta)


def load_topology(source) -> LatticeModel:
    """Load a lattice from a JSON file path or a bundled topology name.

    Bundled names: "chain4", "honeycomb6", "grid10".
    """
    name = str(source)
    if name in ("chain4", "honeycomb6", "grid10"):
        text = resources.files("spinctrl.data").joinpath(f"{name}.json").read_text()
    else:
        with open(source) as fh:
            text = fh.read()
    return LatticeModel.from_dict(json.loads(text))


def _check_dense_size(n: int):
    if n > MAX_DENSE_QUBITS:
        raise ValueError(f"dense operators limited to {MAX_DENSE_QUBITS} qubits, got {n}")


def lattice_hamiltonian(lat: LatticeModel) -> np.ndarray:
    """Dense lab-frame static Hamiltonian.

    H0 = -sum_i omega_i/2 Z_i + J/4 sum_edges (X_iX_j + Y_iY_j + Z_iZ_j)
    """
    n = lat.n_qubits
    _check_dense_size(n)
    dim = 2 ** n
    h = np.zeros((dim, dim), dtype=complex)
    for i, w in enumerate(lat.omegas):
        h -= (w / 2.0) * embed(PAULIS["Z"], i, n)
    for i, j in lat.edges:
        for p in ("X", "Y", "Z"):
            h += (lat.J / 4.0) * (embed(PAULIS[p], i, n) @ embed(PAULIS[p], j, n))
    return h


def drive_hamiltonian(lat: LatticeModel, pulses: dict[int, PulseParams]) -> Callable[[float], np.ndarray]:
    """Rotating-frame Hamiltonian for simultaneous drives on a lattice.

    Each driven qubit j contributes its resonant term Omega_j/2 X_j plus, for
    every neighbor i, the crosstalk term

        beta_ij Omega_j(t) [cos(D_ij t) X_i + sin(D_ij t) Y_i] Z_j

    with D_ij = omega_j - omega_i, and the static ZZ part of the exchange is
    kept on all edges. Carrier phases use absolute time, so simultaneous
    drives stay mutually coherent.
    """
    n = lat.n_qubits
    _check_dense_size(n)
    dim = 2 ** n
    zz = np.zeros((dim, dim), dtype=complex)
    for i, j in lat.edges:
        zz += (lat.J / 4.0) * (embed(PAULIS["Z"], i, n) @ embed(PAULIS["Z"], j, n))

    drive_ops = {j: embed(PAULIS["X"], j, n) for j in pulses}
    crosstalk = []  # (spectator XZ, spectator YZ, detuning, beta, source pulse)
    for a, b in lat.edges:
        for i, j in ((a, b), (b, a)):
            if j not in pulses:
                continue
            xi = embed(PAULIS["X"], i, n) @ embed(PAULIS["Z"], j, n)
            yi = embed(PAULIS["Y"], i, n) @ embed(PAULIS["Z"], j, n)
            crosstalk.append((xi, yi, lat.detuning(i, j), lat.edge_beta(i, j), pulses[j]))

    def h(t: float) -> np.ndarray:
        out = zz.copy()
        for j, pulse in pulses.items():
            out += (eval_pulse(pulse, t) / 2.0) * drive_ops[j]
        for xi, yi, delta, beta, pulse in crosstalk:
            amp = beta * eval_pulse(pulse, t)
            phase = delta * t
            out += amp * (np.cos(phase) * xi + np.sin(phase) * yi)
        return out

    return h


@dataclass(frozen=True)
class CrosstalkReport:
    """Pauli content of a transformed drive operator for one driven qubit.

    Coefficients are in rad/ns after normalizing the resonant term to
    omega/2, i.e. the transformed drive reads

        omega/2 X_target + sum_j c2[j] X_j Z_target
                         + sum_(i,j) c3[(i,j)] X_i Z_j Z_target + residual.

    alpha is the raw X_target coefficient relative to omega/2 (the drive
    inhomogeneity factor); leakage and spectrum_error quantify the quality
    of the block diagonalization.

    c2 and c3 carry every extracted Pauli string, including entries whose X
    falls on a distant qubit. Those distant entries measure drive leakage
    through near-resonant same-sublattice pairs (set by the frequency
    stagger), not the nearest-neighbor crosstalk of the effective model;
    restrict to the target's neighbors when comparing against it.
    """

    target: int
    omega: float
    alpha: float
    c2: dict = field(default_factory=dict)
    c3: dict = field(default_factory=dict)
    residual: float = 0.0
    leakage: float = 0.0
    spectrum_error: float = 0.0

    def relative_c2(self) -> dict:
        return {k: v / self.omega for k, v in self.c2.items()}

    def relative_c3(self) -> dict:
        return {k: v / self.omega for k, v in self.c3.items()}


def _spectator_labels(n: int, target: int) -> np.ndarray:
    """Block label of each basis index: the index with the target bit removed."""
    idx = np.arange(2 ** n)
    bit = n - 1 - target  # qubit 0 is the most significant factor
    high = idx >> (bit + 1)
    low = idx & ((1 << bit) - 1)
    return (high << bit) | low


def least_action_transform(h0: np.ndarray, labels: np.ndarray,
                           cluster_tol: float | None = None,
                           min_weight: float = 0.55) -> np.ndarray:
    """Unitary W closest to the identity with W^dag h0 W block diagonal.

    labels assigns each basis index to a block. Eigenvectors are matched to
    basis states by maximum overlap (Hungarian assignment); eigenvalue
    clusters that are degenerate at numerical precision are re-rotated onto
    their claimed basis states (orthogonal Procrustes), which resolves
    symmetry-protected exact degeneracies. If any eigenvector still cannot
    be attributed to a single basis state with weight >= min_weight, the
    blocks genuinely hybridize and a DegeneracyError is raised.
    """
    h0 = np.asarray(h0, dtype=complex)
    if np.max(np.abs(h0 - h0.conj().T)) > 1e-10:
        raise ValueError("h0 must be Hermitian")
    dim = h0.shape[0]
    vals, vecs = np.linalg.eigh(h0)
    scale = max(np.max(np.abs(vals)), 1.0)
    if cluster_tol is None:
        cluster_tol = 1e-9 * scale

    weights = np.abs(vecs) ** 2  # weights[i, k] = |<i|v_k>|^2
    row, col = linear_sum_assignment(-weights.T)  # row = eigenvector, col = basis
    assign = np.empty(dim, dtype=int)
    assign[row] = col

    # Re-mix eigenvectors inside numerically degenerate clusters so each one
    # aligns with its claimed basis state; within a cluster any orthonormal
    # combination is an equally valid eigenbasis.
    start = 0
    for end in range(1, dim + 1):
        if end < dim and vals[end] - vals[end - 1] < cluster_tol:
            continue
        if end - start > 1:
            ks = np.arange(start, end)
            claimed = assign[ks]
            m = vecs[np.ix_(claimed, ks)]
            u, _, vt = np.linalg.svd(m.conj().T)
            q = u @ vt
            vecs[:, ks] = vecs[:, ks] @ q
        start = end

    weights = np.abs(vecs) ** 2
    row, col = linear_sum_assignment(-weights.T)
    assign = np.empty(dim, dtype=int)
    assign[row] = col
    matched = weights.T[row, col]
    if np.min(matched) < min_weight:
        k = int(row[np.argmin(matched)])
        raise DegeneracyError(
            f"eigenvector {k} overlaps its best basis state with weight "
            f"{np.min(matched):.3f} < {min_weight}; blocks hybridize and no "
            "unique least-action transform exists (adjust frequencies)"
        )

    w = np.empty_like(vecs)
    w[:, assign] = vecs
    # Phase convention: positive diagonal, the closest-to-identity gauge.
    diag = np.diag(w).copy()
    diag[np.abs(diag) < 1e-14] = 1.0
    w = w * (np.abs(diag) / diag)[np.newaxis, :]
    return w


def _pauli_coeff(op: np.ndarray, label: str) -> float:
    sigma = pauli_string(label)
    c = np.einsum("ij,ji->", sigma, op) / op.shape[0]
    return float(c.real)


def block_diagonalize(h0: np.ndarray, target: int, omega: float,
                      n_qubits: int | None = None) -> tuple[np.ndarray, CrosstalkReport]:
    """Least-action block diagonalization and crosstalk extraction.

    Brings the static Hamiltonian h0 to block form over the spectator
    configurations of `target` and expands the transformed drive operator
    (omega/2) X_target in the Pauli basis. Returns the transformed static
    Hamiltonian and a CrosstalkReport with the drive inhomogeneity alpha and
    the two- and three-body crosstalk coefficients.
    """
    h0 = np.asarray(h0, dtype=complex)
    dim = h0.shape[0]
    if n_qubits is None:
        n_qubits = int(round(np.log2(dim)))
    if 2 ** n_qubits != dim:
        raise ValueError(f"h0 dimension {dim} is not 2^{n_qubits}")
    if not (0 <= target < n_qubits):
        raise ValueError(f"target {target} out of range for {n_qubits} qubits")

    labels = _spectator_labels(n_qubits, target)
    w = least_action_transform(h0, labels)
    h_tilde = w.conj().T @ h0 @ w

    block_mask = labels[:, None] == labels[None, :]
    leakage = float(np.linalg.norm(np.where(block_mask, 0.0, h_tilde)))
    spectrum_error = float(
        np.max(np.abs(np.linalg.eigvalsh(h_tilde) - np.linalg.eigvalsh(h0)))
    )

    drive = (omega / 2.0) * embed(PAULIS["X"], target, n_qubits)
    d_tilde = w.conj().T @ drive @ w

    def string_with(positions: dict[int, str]) -> str:
        return "".join(positions.get(q, "I") for q in range(n_qubits))

    raw_alpha = _pauli_coeff(d_tilde, string_with({target: "X"}))
    alpha = raw_alpha / (omega / 2.0)
    if abs(alpha) < 1e-12:
        raise DegeneracyError("transformed drive has no resonant component")

    c2 = {}
    extracted_sq = raw_alpha ** 2
    for j in range(n_qubits):
        if j == target:
            continue
        c = _pauli_coeff(d_tilde, string_with({j: "X", target: "Z"}))
        extracted_sq += c ** 2
        c2[j] = c / alpha
    c3 = {}
    for i in range(n_qubits):
        for j in range(n_qubits):
            if len({i, j, target}) < 3:
                continue
            c = _pauli_coeff(d_tilde, string_with({i: "X", j: "Z", target: "Z"}))
            extracted_sq += c ** 2
            c3[(i, j)] = c / alpha
    total_sq = float(np.linalg.norm(d_tilde) ** 2) / dim
    residual = float(np.sqrt(max(total_sq - extracted_sq, 0.0)) / abs(alpha))

    report = CrosstalkReport(
        target=target,
        omega=omega,
        alpha=alpha,
        c2=c2,
        c3=c3,
        residual=residual,
        leakage=leakage,
        spectrum_error=spectrum_error,
    )
    return h_tilde, report
