"""Fourier pulse ansatz, pulse library, and waveform utilities.

A drive waveform is parameterized as

    Omega(t) = sin(pi t / T) * (a0 + sum_{j=1}^{n} a_j cos(2 pi j t / T + phi_j))

with all amplitudes in rad/ns (angular frequency) and t in ns. The sine
envelope guarantees the pulse switches on and off smoothly at t = 0 and
t = T. The bundled library ships nine tabulated robust control pulses
(X_pi, X_pi_2, X_2pi at gate times 250, 180 and 50 ns).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

GATE_ANGLES = {
    "X_pi": math.pi,
    "X_pi_2": math.pi / 2.0,
    "X_2pi": 2.0 * math.pi,
}

_PEAK_SAMPLES = 4096


@dataclass(frozen=True)
class PulseParams:
    """Fourier coefficients of one pulse.

    Parameters
    ----------
    T : float
        Pulse duration in ns.
    a : array_like
        n+1 amplitude coefficients (rad/ns); a[0] is the DC term of the
        envelope-modulated series.
    phi : array_like
        n harmonic phases (rad); phi[j-1] belongs to harmonic j.
    """

    T: float
    a: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", np.atleast_1d(np.asarray(self.a, dtype=float)))
        object.__setattr__(self, "phi", np.atleast_1d(np.asarray(self.phi, dtype=float)) if np.size(self.phi) else np.zeros(0))
        if self.T <= 0:
            raise ValueError(f"pulse duration must be positive, got T={self.T}")
        if self.phi.shape != (self.a.size - 1,):
            raise ValueError(
                f"phase count {self.phi.size} does not match harmonic count {self.a.size - 1}"
            )

    @property
    def n_harmonics(self) -> int:
        return self.a.size - 1


@dataclass(frozen=True)
class PulseLibraryEntry:
    """One tabulated pulse: gate label, amplitude class, and coefficients."""

    gate: str
    relative_amplitude: float
    T_ns: float
    params: PulseParams

    @property
    def angle(self) -> float:
        return GATE_ANGLES[self.gate]


def eval_pulse(params: PulseParams, t) -> np.ndarray | float:
    """Evaluate Omega(t) in rad/ns; t may be a scalar or array (ns)."""
    t_arr = np.asarray(t, dtype=float)
    x = t_arr / params.T
    series = np.full_like(x, params.a[0])
    for j in range(1, params.a.size):
        series = series + params.a[j] * np.cos(2.0 * np.pi * j * x + params.phi[j - 1])
    out = np.sin(np.pi * x) * series
    return out if t_arr.shape else float(out)


def pulse_area(params: PulseParams) -> float:
    """Time integral of Omega over [0, T] (the total rotation angle), exactly.

    Each term integrates in closed form: the DC term contributes
    2 T a0 / pi and harmonic j contributes -2 T a_j cos(phi_j) / (pi (4 j^2 - 1)).
    """
    area = 2.0 * params.T * params.a[0] / np.pi
    for j in range(1, params.a.size):
        area -= (
            2.0 * params.T * params.a[j] * np.cos(params.phi[j - 1])
            / (np.pi * (4.0 * j * j - 1.0))
        )
    return float(area)


def peak_amplitude(params: PulseParams) -> float:
    """max_t |Omega(t)| over [0, T], by dense sampling plus local refinement."""
    grid = np.linspace(0.0, params.T, _PEAK_SAMPLES)
    vals = np.abs(eval_pulse(params, grid))
    k = int(np.argmax(vals))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, _PEAK_SAMPLES - 1)]
    res = minimize_scalar(
        lambda t: -abs(eval_pulse(params, t)), bounds=(lo, hi), method="bounded",
        options={"xatol": 1e-12},
    )
    return float(max(vals[k], -res.fun))


def rescale_pulse(params: PulseParams, cap: float) -> PulseParams:
    """Scale all amplitude coefficients so the peak amplitude equals `cap`.

    Requires cap > 0 and a nonzero waveform.
    """
    if cap <= 0:
        raise ValueError(f"amplitude cap must be positive, got {cap}")
    peak = peak_amplitude(params)
    if peak == 0.0:
        raise ValueError("cannot rescale an identically zero pulse")
    return PulseParams(T=params.T, a=params.a * (cap / peak), phi=params.phi.copy())


def stretch_pulse(params: PulseParams, scale: float) -> PulseParams:
    """Area-preserving scaling Omega -> Omega/scale, t -> scale*t.

    The ansatz family is closed under this map: duration becomes scale*T and
    every amplitude coefficient is divided by scale.
    """
    if scale <= 0:
        raise ValueError(f"scale must be positive, got {scale}")
    return PulseParams(T=params.T * scale, a=params.a / scale, phi=params.phi.copy())


def cosine_pulse(area: float, T: float) -> PulseParams:
    """Single-bump pulse (half-cosine centered at T/2) with the given area.

    This is the n = 0 member of the ansatz, Omega(t) = a0 sin(pi t / T) with
    a0 = area * pi / (2 T). It serves as the non-robust reference pulse.
    """
    return PulseParams(T=T, a=np.array([area * np.pi / (2.0 * T)]), phi=np.zeros(0))


def trivial_partner(params: PulseParams) -> PulseParams:
    """Cosine pulse with the same duration and the same total area as `params`.

    Because the tabulated robust pulses wind through extra full rotations,
    matching the total area (not the area mod 2 pi) keeps the partner's peak
    amplitude comparable, which makes shared J/Omega_m axes meaningful.
    """
    return cosine_pulse(pulse_area(params), params.T)


def gate_unitary(gate: str) -> np.ndarray:
    """2x2 target unitary exp(-i angle X / 2) for a gate label."""
    if gate not in GATE_ANGLES:
        raise ValueError(f"unknown gate label {gate!r}; expected one of {sorted(GATE_ANGLES)}")
    half = GATE_ANGLES[gate] / 2.0
    return np.array(
        [[math.cos(half), -1j * math.sin(half)], [-1j * math.sin(half), math.cos(half)]],
        dtype=complex,
    )


def _entry_from_dict(raw: dict, index: int) -> PulseLibraryEntry:
    where = f"entries[{index}]"
    for key in ("gate", "relative_amplitude", "T_ns", "a", "phi"):
        if key not in raw:
            raise ValueError(f"{where}: missing required field {key!r}")
    gate = raw["gate"]
    if gate not in GATE_ANGLES:
        raise ValueError(f"{where}: unknown gate label {gate!r}; expected one of {sorted(GATE_ANGLES)}")
    a = raw["a"]
    phi = raw["phi"]
    if not isinstance(a, list) or not a:
        raise ValueError(f"{where}: field 'a' must be a non-empty list")
    if not isinstance(phi, list) or len(phi) != len(a) - 1:
        raise ValueError(f"{where}: len(phi)={len(phi)} does not match len(a)-1={len(a)-1}")
    try:
        params = PulseParams(T=float(raw["T_ns"]), a=np.array(a, float), phi=np.array(phi, float))
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{where}: {exc}") from exc
    return PulseLibraryEntry(
        gate=gate,
        relative_amplitude=float(raw["relative_amplitude"]),
        T_ns=float(raw["T_ns"]),
        params=params,
    )


def load_library(path: str | Path) -> list[PulseLibraryEntry]:
    """Load a pulse library JSON file; raises ValueError naming any bad entry."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return _parse_library(doc)


def _parse_library(doc: dict) -> list[PulseLibraryEntry]:
    if not isinstance(doc, dict) or "entries" not in doc:
        raise ValueError("pulse library must be an object with an 'entries' list")
    if not isinstance(doc["entries"], list):
        raise ValueError("'entries' must be a list")
    return [_entry_from_dict(raw, i) for i, raw in enumerate(doc["entries"])]


def save_library(entries: list[PulseLibraryEntry], path: str | Path) -> None:
    """Write entries back to the library JSON format (round-trips exactly)."""
    doc = {
        "units": {
            "amplitude": "rad/ns (angular frequency); relative_amplitude is max|Omega|/dEz with dEz = 0.2 rad/ns",
            "time": "ns",
            "phase": "rad",
        },
        "entries": [
            {
                "gate": e.gate,
                "relative_amplitude": e.relative_amplitude,
                "T_ns": e.T_ns,
                "a": [float(v) for v in e.params.a],
                "phi": [float(v) for v in e.params.phi],
            }
            for e in entries
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_default_library() -> list[PulseLibraryEntry]:
    """The nine bundled robust control pulses."""
    doc = json.loads(
        resources.files("spinctrl.data").joinpath("pulse_library.json").read_text(encoding="utf-8")
    )
    return _parse_library(doc)


def find_pulse(entries: list[PulseLibraryEntry], gate: str, T_ns: float | None = None) -> PulseLibraryEntry:
    """First library entry matching a gate label (and duration, if given)."""
    for e in entries:
        if e.gate == gate and (T_ns is None or e.T_ns == T_ns):
            return e
    raise KeyError(f"no library entry for gate={gate!r}, T_ns={T_ns}")
