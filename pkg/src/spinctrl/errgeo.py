"""Error-curve geometry: interaction-picture noise integrals and distances.

A noise term epsilon v(t) V entering alongside an ideal drive U0(t) produces,
to first order, the integrated operator

    K(t) = int_0^t v(tau) U0(tau)^dag V U0(tau) dtau = r(t) . sigma

whose normalized-Pauli coefficient vector r(t) traces a path in the Pauli
frame. The Euclidean norm of r(T), summed over channels, is the error
distance D. (The Frobenius form 2^(-d/2) ||K||_F equals the Euclidean norm
of r because the Pauli strings are orthogonal with ||sigma||_F^2 = 2^d, so
the per-channel vector norm used here is the same quantity.)

Curves are accumulated with the trapezoid rule on the propagation grid,
matching the O(dt^2) accuracy of the midpoint propagator.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from .model import NoiseChannel, TwoQubitModel, effective_noise_channels
from .operators import pauli_basis, pauli_labels
from .propagate import Trajectory, make_grid, x_drive_trajectory
from .pulse import PulseParams, peak_amplitude, stretch_pulse

IMAG_TOL = 1e-10


@dataclass(frozen=True)
class ErrorCurve:
    """Pauli-frame path r(t_k) of one noise channel.

    path has shape (len(times), 4^n) with columns ordered like labels;
    epsilon is the channel strength prefactor (not folded into the path).
    """

    channel: str
    times: np.ndarray
    path: np.ndarray
    labels: tuple
    epsilon: float = 1.0

    @property
    def final(self) -> np.ndarray:
        return self.path[-1]

    @property
    def final_norm(self) -> float:
        return float(np.linalg.norm(self.path[-1]))


def _sample_profile(v, times: np.ndarray) -> np.ndarray:
    if callable(v):
        vals = np.asarray(v(times), dtype=float)
        if vals.shape == ():
            vals = np.full(times.shape, float(vals))
    else:
        vals = np.broadcast_to(np.asarray(v, dtype=float), times.shape).copy()
    if vals.shape != times.shape:
        raise ValueError(f"profile samples shape {vals.shape} != grid shape {times.shape}")
    return vals


def error_curve(traj: Trajectory, v, noise_op: np.ndarray,
                channel: str = "custom", epsilon: float = 1.0) -> ErrorCurve:
    """Integrate one noise channel against an ideal trajectory.

    r(t).sigma = int_0^t v(tau) U0(tau)^dag noise_op U0(tau) dtau, with the
    coefficients extracted by normalized Pauli projection Tr(sigma A)/2^n.
    """
    noise_op = np.asarray(noise_op, dtype=complex)
    if noise_op.shape != (traj.dim, traj.dim):
        raise ValueError(f"noise operator shape {noise_op.shape} != trajectory dim {traj.dim}")
    n = int(round(np.log2(traj.dim)))
    times = traj.grid.nodes
    us = traj.unitaries

    rotated = np.einsum("kji,jl,klm->kim", us.conj(), noise_op, us)
    basis = pauli_basis(n)
    coeffs = np.einsum("nij,kji->kn", basis, rotated) / traj.dim
    worst = float(np.max(np.abs(coeffs.imag)))
    if worst > IMAG_TOL:
        raise ValueError(f"Pauli coefficients have imaginary residue {worst:.3e} > {IMAG_TOL}")

    v_vals = _sample_profile(v, times)
    integrand = v_vals[:, None] * coeffs.real
    path = cumulative_trapezoid(integrand, dx=traj.grid.dt, axis=0, initial=0.0)
    return ErrorCurve(channel=channel, times=times, path=path,
                      labels=pauli_labels(n), epsilon=epsilon)


def channel_curves(traj: Trajectory, channels: list[NoiseChannel]) -> list[ErrorCurve]:
    """Error curves for a list of model noise channels."""
    return [
        error_curve(traj, ch.v, ch.op, channel=ch.label, epsilon=ch.epsilon)
        for ch in channels
    ]


def error_distance(curves: list[ErrorCurve]) -> float:
    """Total error distance D = sum over channels of ||r(T)||.

    Channel prefactors epsilon are deliberately excluded: D is the purely
    geometric distance used in amplitude sweeps. See
    weighted_error_distance for the epsilon-weighted variant.
    """
    if not curves:
        raise ValueError("error_distance requires at least one curve")
    return float(sum(c.final_norm for c in curves))


def weighted_error_distance(curves: list[ErrorCurve]) -> float:
    """Epsilon-weighted distance sum_mu epsilon_mu ||r_mu(T)|| (optimizer cost)."""
    if not curves:
        raise ValueError("weighted_error_distance requires at least one curve")
    return float(sum(c.epsilon * c.final_norm for c in curves))


def first_order_error_unitary(curves: list[ErrorCurve]) -> np.ndarray:
    """First-order error operator I - i sum_mu epsilon_mu r_mu(T).sigma.

    Not unitary; it is the first-order approximant of the exact error
    evolution U0(T)^dag U_noisy(T), accurate to O(epsilon^2).
    """
    if not curves:
        raise ValueError("first_order_error_unitary requires at least one curve")
    m = len(curves[0].labels)
    n = int(round(np.log2(m) / 2))
    basis = pauli_basis(n)
    dim = 2 ** n
    total = np.zeros((dim, dim), dtype=complex)
    for c in curves:
        if len(c.labels) != m:
            raise ValueError("curves have mismatched dimensions")
        total += c.epsilon * np.einsum("n,nij->ij", c.final, basis)
    return np.eye(dim) - 1j * total


def x_drive_error_integrals(phi: np.ndarray, v_vals: np.ndarray, dt: float) -> tuple[float, float]:
    """Final (r_Y, r_Z) for noise operator Z under an ideal X drive.

    With U0 = exp(-i phi(t) X / 2), U0^dag Z U0 = cos(phi) Z + sin(phi) Y,
    so the curve components reduce to scalar quadratures. Used on hot paths;
    agrees with error_curve on the same grid by construction.
    """
    ry = float(trapezoid(v_vals * np.sin(phi), dx=dt))
    rz = float(trapezoid(v_vals * np.cos(phi), dx=dt))
    return ry, rz


@dataclass(frozen=True)
class AmplitudeSweep:
    """Error distance as a function of peak amplitude under area-preserving scaling."""

    scales: np.ndarray
    omega_m: np.ndarray
    distance: np.ndarray


def amplitude_sweep_distance(pulse: PulseParams, model: TwoQubitModel,
                             scales) -> AmplitudeSweep:
    """Sweep D over the area-preserving family Omega -> Omega/a, t -> a t.

    For each scale the stretched pulse is propagated noiselessly and all
    three effective channels are integrated; omega_m records the resulting
    peak amplitude.
    """
    scales = np.asarray(scales, dtype=float)
    if np.any(scales <= 0):
        raise ValueError("scales must be positive")
    omega_m = np.empty(scales.shape)
    distance = np.empty(scales.shape)
    for idx, a in enumerate(scales):
        scaled = stretch_pulse(pulse, float(a))
        traj = x_drive_trajectory(scaled, make_grid(scaled.T))
        curves = channel_curves(traj, effective_noise_channels(model, scaled))
        omega_m[idx] = peak_amplitude(scaled)
        distance[idx] = error_distance(curves)
    return AmplitudeSweep(scales=scales, omega_m=omega_m, distance=distance)
