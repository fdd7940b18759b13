"""Gradient-descent synthesis of robust control pulses.

The cost is C = (1 - F) + D_eps, where F is the noiseless average gate
fidelity of the capped pulse and D_eps the epsilon-weighted error distance
over the three effective exchange channels. The channel weights use a fixed
reference coupling J_ref = 0.1 dEz so the static ZZ channel and the two
oscillating crosstalk channels stay commensurate while the synthesized pulse
remains robust for any small J.

The loop follows a seven-step protocol: seeded initialization near the
target area, projection onto the amplitude cap, noiseless propagation, cost,
central finite-difference gradient, a backtracking (Armijo) line-search
update, and repeat until C < eta or the iteration budget runs out. Each
channel norm enters the cost through a smooth floor sqrt(|r|^2 + delta^2)
- delta, deforming C by less than 6e-6 while keeping it differentiable
where an error curve closes exactly; line searches start from a
Barzilai-Borwein estimate so progress along narrow valleys does not
collapse with the raw step size.

Descent alone tends to stall in shallow troughs a short parameter distance
from an exact closure point on the cap surface, so a run that ends without
converging finishes with a damped least-squares refinement of the channel
residuals (evaluated on the cap-projected waveform). The refined point is
kept only when it lowers the cost, so the recorded history stays monotone.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import TwoQubitModel, effective_noise_channels
from .propagate import make_grid
from .pulse import GATE_ANGLES, PulseParams, peak_amplitude, rescale_pulse

REFERENCE_J_FACTOR = 0.1
ARMIJO_C1 = 1e-4
MAX_BACKTRACKS = 20
NORM_SMOOTHING = 1e-4
BB_STEP_MIN = 1e-6
BB_STEP_MAX = 1e6

_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)


@dataclass(frozen=True)
class OptimizerConfig:
    """Synthesis settings; amplitude_cap is the peak drive bound u (rad/ns)."""

    eta: float = 1e-4
    max_iters: int = 300
    step_size: float = 1.0
    grad_epsilon: float = 1e-7
    amplitude_cap: float = 0.1
    harmonics: int = 6
    seed: int = 0

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if not 1e-8 <= self.grad_epsilon <= 1e-4:
            raise ValueError(f"grad_epsilon must lie in [1e-8, 1e-4], got {self.grad_epsilon}")
        if self.step_size <= 0:
            raise ValueError(f"step_size must be positive, got {self.step_size}")
        if self.harmonics < 1:
            raise ValueError(f"harmonics must be >= 1, got {self.harmonics}")


@dataclass(frozen=True)
class SynthesisResult:
    """Outcome of a synthesis run; params are post-rescaling (peak = cap)."""

    params: PulseParams
    cost_history: list[float] = field(default_factory=list)
    final_F: float = 1.0
    final_D: float = 0.0
    converged: bool = False


def target_angle(target_gate) -> float:
    """Rotation angle for a gate label or an explicit angle in radians."""
    if isinstance(target_gate, (int, float)) and not isinstance(target_gate, bool):
        return float(target_gate)
    key = str(target_gate).lower().replace("_", "").replace("/", "")
    aliases = {"xpi": math.pi, "xpi2": math.pi / 2.0, "x2pi": 2.0 * math.pi}
    for name, angle in GATE_ANGLES.items():
        aliases[name.lower().replace("_", "")] = angle
    if key not in aliases:
        raise ValueError(f"unknown target gate {target_gate!r}")
    return aliases[key]


def _target_matrix(target) -> np.ndarray:
    """2x2 target unitary from a matrix, a gate label, or an angle."""
    if isinstance(target, np.ndarray):
        if target.shape != (2, 2):
            raise ValueError(f"expected a 2x2 target, got shape {target.shape}")
        return target.astype(complex)
    angle = target_angle(target)
    return math.cos(angle / 2.0) * np.eye(2) - 1j * math.sin(angle / 2.0) * _X


def reference_model(model: TwoQubitModel) -> TwoQubitModel:
    """Model with the cost-weighting coupling J_ref = 0.1 dEz."""
    return TwoQubitModel(dEz=model.dEz, J=REFERENCE_J_FACTOR * model.dEz)


def apply_amplitude_cap(params: PulseParams, cap: float) -> PulseParams:
    """Project a pulse onto the amplitude bound by pure amplitude rescaling.

    The coefficients are scaled so the peak equals the cap exactly
    (protocol step 2). cap <= 0 or an identically zero pulse map to the
    zero pulse of the same duration.
    """
    if cap <= 0 or peak_amplitude(params) == 0.0:
        return PulseParams(T=params.T, a=np.zeros(1), phi=np.zeros(0))
    return rescale_pulse(params, cap)


class _CostEvaluator:
    """Caches the grid, carrier phases, harmonic bases, and target traces.

    The ideal propagator of H0 = Omega(t)/2 X is exp(-i phi(T) X / 2), so the
    fidelity only needs the accumulated angle and the two traces
    Tr(target^dag) and Tr(target^dag X). Waveforms are assembled from cached
    cosine/sine tables so the finite-difference loop never rebuilds them.
    """

    def __init__(self, T: float, target, model: TwoQubitModel):
        tgt = _target_matrix(target)
        self.trace_i = complex(np.trace(tgt.conj().T))
        self.trace_x = complex(np.trace(tgt.conj().T @ _X))
        self.T = T
        self.grid = make_grid(T)
        self.nodes = self.grid.nodes
        self.mids = self.grid.midpoints
        ref = reference_model(model)
        probe = PulseParams(T=T, a=np.zeros(1), phi=np.zeros(0))
        self.epsilons = [ch.epsilon for ch in effective_noise_channels(ref, probe)]
        # Crosstalk weights are already first order in J, so the carrier is
        # evaluated at the bare splitting; the dressed correction enters at
        # O(J^2) and would over-resolve the leading-order error model.
        self.cos_carrier = np.cos(model.dEz * self.nodes)
        self.sin_carrier = np.sin(model.dEz * self.nodes)
        self.env_nodes = np.sin(np.pi * self.nodes / T)
        self.env_mids = np.sin(np.pi * self.mids / T)
        self._bases: dict[int, tuple] = {}

    def _basis(self, n: int) -> tuple:
        cached = self._bases.get(n)
        if cached is None:
            j = np.arange(1, n + 1)[:, None]
            wn = 2.0 * np.pi * j * (self.nodes / self.T)[None, :]
            wm = 2.0 * np.pi * j * (self.mids / self.T)[None, :]
            cached = (np.cos(wn), np.sin(wn), np.cos(wm), np.sin(wm))
            self._bases[n] = cached
        return cached

    def _waveforms(self, a: np.ndarray, phi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Omega sampled at the grid nodes and midpoints."""
        if phi.size == 0:
            return self.env_nodes * a[0], self.env_mids * a[0]
        cos_n, sin_n, cos_m, sin_m = self._basis(phi.size)
        ac = a[1:] * np.cos(phi)
        bs = a[1:] * np.sin(phi)
        series_n = a[0] + ac @ cos_n - bs @ sin_n
        series_m = a[0] + ac @ cos_m - bs @ sin_m
        return self.env_nodes * series_n, self.env_mids * series_m

    def _grid_peak(self, omega_nodes: np.ndarray) -> float:
        """max|Omega| from the node samples with parabolic refinement."""
        vals = np.abs(omega_nodes)
        k = int(np.argmax(vals))
        m = float(vals[k])
        if 0 < k < vals.size - 1:
            d2 = float(vals[k - 1] - 2.0 * vals[k] + vals[k + 1])
            if d2 < 0.0:
                off = float(vals[k + 1] - vals[k - 1])
                m -= off * off / (8.0 * d2)
        return m

    def evaluate_capped(self, params: PulseParams, cap: float):
        """Cap-project then score; returns (C, F, D_geo, D_weighted, capped)."""
        omega_n, omega_m = self._waveforms(params.a, params.phi)
        peak = self._grid_peak(omega_n)
        if cap <= 0 or peak == 0.0:
            zero = PulseParams(T=self.T, a=np.zeros(1), phi=np.zeros(0))
            return (*self._metrics(np.zeros_like(omega_n), np.zeros_like(omega_m)), zero)
        factor = cap / peak
        capped = PulseParams(T=self.T, a=params.a * factor, phi=params.phi.copy())
        return (*self._metrics(omega_n * factor, omega_m * factor), capped)

    def evaluate(self, params: PulseParams) -> tuple[float, float, float, float]:
        """Return (C, F, D_geometric, D_weighted) for an already-capped pulse."""
        omega_n, omega_m = self._waveforms(params.a, params.phi)
        return self._metrics(omega_n, omega_m)

    def _metrics(self, omega_nodes: np.ndarray, omega_mids: np.ndarray):
        dt = self.grid.dt
        phi = np.empty(omega_mids.size + 1)
        phi[0] = 0.0
        np.cumsum(omega_mids * dt, out=phi[1:])
        half = phi[-1] / 2.0
        overlap = math.cos(half) * self.trace_i - 1j * math.sin(half) * self.trace_x
        fidelity = (abs(overlap) ** 2 + 2.0) / 6.0
        sin_phi = np.sin(phi)
        cos_phi = np.cos(phi)
        profiles = (
            None,
            omega_nodes * self.cos_carrier,
            -omega_nodes * self.sin_carrier,
        )

        def _trap(y: np.ndarray) -> float:
            return dt * (float(y.sum()) - 0.5 * (float(y[0]) + float(y[-1])))

        d_geo = 0.0
        d_weighted = 0.0
        for eps, v_vals in zip(self.epsilons, profiles):
            if v_vals is None:
                ry, rz = _trap(sin_phi), _trap(cos_phi)
            else:
                ry, rz = _trap(v_vals * sin_phi), _trap(v_vals * cos_phi)
            norm = math.hypot(ry, rz)
            d_geo += norm
            d_weighted += eps * (math.hypot(norm, NORM_SMOOTHING) - NORM_SMOOTHING)
        return (1.0 - fidelity) + d_weighted, fidelity, d_geo, d_weighted


def _pack(params: PulseParams) -> np.ndarray:
    return np.concatenate([params.a, params.phi])


def _unpack(x: np.ndarray, T: float, n_harmonics: int) -> PulseParams:
    return PulseParams(T=T, a=x[: n_harmonics + 1], phi=x[n_harmonics + 1:])


def cost(params: PulseParams, target, model: TwoQubitModel, cfg: OptimizerConfig) -> float:
    """Composite cost C = (1 - F) + D_eps of the capped pulse."""
    ev = _CostEvaluator(params.T, target, model)
    return ev.evaluate_capped(params, cfg.amplitude_cap)[0]


def gradient(params: PulseParams, target, model: TwoQubitModel, cfg: OptimizerConfig) -> np.ndarray:
    """Central finite-difference gradient of cost over (a_0..a_n, phi_1..phi_n)."""
    ev = _CostEvaluator(params.T, target, model)
    return _gradient_with(ev, params, cfg)


def _gradient_with(ev: _CostEvaluator, params: PulseParams, cfg: OptimizerConfig) -> np.ndarray:
    x0 = _pack(params)
    n = params.n_harmonics
    grad = np.empty(x0.size)
    h = cfg.grad_epsilon
    for k in range(x0.size):
        xp = x0.copy()
        xp[k] += h
        xm = x0.copy()
        xm[k] -= h
        cp = ev.evaluate_capped(_unpack(xp, params.T, n), cfg.amplitude_cap)[0]
        cm = ev.evaluate_capped(_unpack(xm, params.T, n), cfg.amplitude_cap)[0]
        grad[k] = (cp - cm) / (2.0 * h)
    return grad


def initial_params(T: float, angle: float, cfg: OptimizerConfig, rng: np.random.Generator) -> PulseParams:
    """Seeded initialization: area near the target angle, small harmonics."""
    a = np.empty(cfg.harmonics + 1)
    a[0] = (math.pi * angle / (2.0 * T)) * rng.uniform(0.9, 1.1)
    a[1:] = rng.uniform(-0.1, 0.1, size=cfg.harmonics)
    phi = rng.uniform(-0.1, 0.1, size=cfg.harmonics)
    return PulseParams(T=T, a=a, phi=phi)


def close_error_channels(params: PulseParams, target_gate, model: TwoQubitModel | None = None,
                         phase_target: float | None = None) -> PulseParams:
    """Refine a pulse so all three error curves close to machine precision.

    Solves the stacked system {accumulated angle = phase_target, r_mu(T) = 0
    for each channel} by damped least squares, anchored to the input
    coefficients so the nearest closure point is returned. Bundled library
    coefficients are rounded to four digits, which leaves the static channel
    visibly open; this recovers the underlying working pulse. phase_target
    defaults to the realization of the target angle (mod 2 pi) nearest the
    input pulse's own area.

    Raises RuntimeError if the residuals do not close below 1e-9.
    """
    from scipy.optimize import least_squares

    if model is None:
        model = TwoQubitModel()
    angle = target_angle(target_gate)
    ev = _CostEvaluator(params.T, angle, model)
    dt = ev.grid.dt
    if phase_target is None:
        area = float(2.0 * params.T * params.a[0] / np.pi)
        for j in range(1, params.a.size):
            area -= float(2.0 * params.T * params.a[j] * np.cos(params.phi[j - 1])
                          / (np.pi * (4.0 * j * j - 1.0)))
        k = round((area - angle) / (2.0 * math.pi))
        phase_target = angle + 2.0 * math.pi * k

    na = params.a.size
    x0 = np.concatenate([params.a, params.phi])

    def _trap(y: np.ndarray) -> float:
        return dt * (float(y.sum()) - 0.5 * (float(y[0]) + float(y[-1])))

    def residuals(x: np.ndarray) -> np.ndarray:
        omega_n, omega_m = ev._waveforms(x[:na], x[na:])
        phi = np.empty(omega_m.size + 1)
        phi[0] = 0.0
        np.cumsum(omega_m * dt, out=phi[1:])
        sin_phi = np.sin(phi)
        cos_phi = np.cos(phi)
        out = [phi[-1] - phase_target, _trap(sin_phi), _trap(cos_phi)]
        for v in (omega_n * ev.cos_carrier, -omega_n * ev.sin_carrier):
            out.append(_trap(v * sin_phi))
            out.append(_trap(v * cos_phi))
        return np.concatenate([out, 1e-7 * (x - x0)])

    sol = least_squares(residuals, x0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
    closure = residuals(sol.x)[:7]
    if float(np.max(np.abs(closure))) > 1e-9:
        raise RuntimeError(f"error channels did not close: residuals {closure}")
    return PulseParams(T=params.T, a=sol.x[:na], phi=sol.x[na:])


def _stall_refinement(ev: _CostEvaluator, params: PulseParams, cap: float,
                      angle: float) -> PulseParams | None:
    """Closure refinement on the cap surface from a stalled descent point.

    Solves the same stacked residual system as close_error_channels, but
    with every residual evaluated after the cap projection, so the solution
    lies on the surface the line search actually explores. The accumulated
    phase is pinned to the realization of the target angle nearest the
    stalled pulse's own capped area. Returns None when no meaningful
    refinement is possible (zero waveform or degenerate phase target).
    """
    from scipy.optimize import least_squares

    n = params.n_harmonics
    na = n + 1
    x0 = _pack(params)
    dt = ev.grid.dt

    def capped_waveforms(x: np.ndarray):
        omega_n, omega_m = ev._waveforms(x[:na], x[na:])
        peak = ev._grid_peak(omega_n)
        if peak == 0.0:
            return None
        factor = cap / peak
        return omega_n * factor, omega_m * factor

    start = capped_waveforms(x0)
    if start is None:
        return None
    area = float(np.sum(start[1]) * dt)
    k = round((area - angle) / (2.0 * math.pi))
    phase_target = angle + 2.0 * math.pi * k
    if phase_target == 0.0:
        return None

    def _trap(y: np.ndarray) -> float:
        return dt * (float(y.sum()) - 0.5 * (float(y[0]) + float(y[-1])))

    def residuals(x: np.ndarray) -> np.ndarray:
        waves = capped_waveforms(x)
        if waves is None:
            return np.concatenate([np.full(7, 1e3), 1e-7 * (x - x0)])
        omega_n, omega_m = waves
        phi = np.empty(omega_m.size + 1)
        phi[0] = 0.0
        np.cumsum(omega_m * dt, out=phi[1:])
        sin_phi = np.sin(phi)
        cos_phi = np.cos(phi)
        out = [phi[-1] - phase_target, _trap(sin_phi), _trap(cos_phi)]
        for v in (omega_n * ev.cos_carrier, -omega_n * ev.sin_carrier):
            out.append(_trap(v * sin_phi))
            out.append(_trap(v * cos_phi))
        return np.concatenate([out, 1e-7 * (x - x0)])

    sol = least_squares(residuals, x0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
    if not np.all(np.isfinite(sol.x)):
        return None
    return _unpack(sol.x, params.T, n)


def _line_search(ev: _CostEvaluator, x: np.ndarray, grad: np.ndarray, step: float,
                 c_ref: float, T: float, n: int, cfg: OptimizerConfig):
    """Backtracking Armijo search along -grad from x; None if no step passes.

    The sufficient-decrease test uses the realized (cap-projected)
    displacement, so the rescale back onto the amplitude cap cannot defeat
    the test.
    """
    for _ in range(MAX_BACKTRACKS + 1):
        c_trial, f_trial, d_trial, _, trial = ev.evaluate_capped(
            _unpack(x - step * grad, T, n), cfg.amplitude_cap)
        if _pack(trial).size != x.size:
            step *= 0.5
            continue
        moved_sq = float(np.sum((_pack(trial) - x) ** 2))
        if moved_sq > 0.0 and c_trial <= c_ref - (ARMIJO_C1 / step) * moved_sq:
            return (c_trial, trial, f_trial, d_trial)
        step *= 0.5
    return None


def synthesize(target_gate, T: float, cfg: OptimizerConfig,
               model: TwoQubitModel | None = None,
               init: PulseParams | None = None) -> SynthesisResult:
    """Synthesize a robust pulse for an X rotation of duration T ns.

    Runs the full protocol and returns the best-found capped pulse. A run
    is converged when the composite cost drops below cfg.eta. Exhausting
    max_iters or stalling in the line search triggers one closure
    refinement of the channel residuals (kept only if it lowers the cost);
    if the refined cost still sits at or above eta the result carries
    converged=False rather than raising. Passing init warm-starts from an
    existing pulse (its duration must equal T) instead of the seeded
    random initialization.
    """
    if model is None:
        model = TwoQubitModel()
    angle = target_angle(target_gate)
    rng = np.random.default_rng(cfg.seed)
    ev = _CostEvaluator(T, angle, model)

    if init is not None and init.T != T:
        raise ValueError(f"init pulse duration {init.T} differs from T={T}")
    start = init if init is not None else initial_params(T, angle, cfg, rng)
    params = apply_amplitude_cap(start, cfg.amplitude_cap)
    c, f, d_geo, _ = ev.evaluate(params)
    history = [c]
    best = (c, params, f, d_geo)
    if cfg.amplitude_cap <= 0:
        return SynthesisResult(params=params, cost_history=history, final_F=f,
                               final_D=d_geo, converged=False)
    if c < cfg.eta:
        return SynthesisResult(params=params, cost_history=history, final_F=f,
                               final_D=d_geo, converged=True)

    x = _pack(params)
    n = params.n_harmonics
    prev_x = None
    prev_grad = None
    for _ in range(cfg.max_iters):
        grad = _gradient_with(ev, _unpack(x, T, n), cfg)
        if float(np.dot(grad, grad)) == 0.0:
            break
        # Trial step from a Barzilai-Borwein estimate over the last accepted
        # move; the Armijo backtracking still guards every update, and a
        # rejected estimate falls back to the configured base step.
        step0 = cfg.step_size
        if prev_grad is not None:
            s = x - prev_x
            y = grad - prev_grad
            sy = float(np.dot(s, y))
            if sy > 0.0:
                step0 = min(max(float(np.dot(s, s)) / sy, BB_STEP_MIN), BB_STEP_MAX)
        accepted = _line_search(ev, x, grad, step0, history[-1], T, n, cfg)
        if accepted is None:
            # The 20-shrink window spans a fixed dynamic range; continue the
            # geometric sequence in fresh searches before giving up so steep
            # walls (large gradients) cannot end the run prematurely.
            fallback = cfg.step_size
            while accepted is None and fallback > 1e-30:
                if fallback != step0:
                    accepted = _line_search(ev, x, grad, fallback, history[-1], T, n, cfg)
                fallback /= 2.0 ** (MAX_BACKTRACKS + 1)
        if accepted is None:
            break
        c_trial, trial, f_trial, d_trial = accepted
        prev_x = x
        prev_grad = grad
        x = _pack(trial)
        history.append(c_trial)
        if c_trial < best[0]:
            best = accepted
        if c_trial < cfg.eta:
            return SynthesisResult(params=trial, cost_history=history,
                                   final_F=f_trial, final_D=d_trial, converged=True)

    c_best, p_best, f_best, d_best = best
    refined = _stall_refinement(ev, p_best, cfg.amplitude_cap, angle)
    if refined is not None:
        c_r, f_r, d_r, _, capped_r = ev.evaluate_capped(refined, cfg.amplitude_cap)
        if math.isfinite(c_r) and c_r < c_best:
            history.append(c_r)
            return SynthesisResult(params=capped_r, cost_history=history,
                                   final_F=f_r, final_D=d_r,
                                   converged=bool(c_r < cfg.eta))
    return SynthesisResult(params=p_best, cost_history=history, final_F=f_best,
                           final_D=d_best, converged=False)
