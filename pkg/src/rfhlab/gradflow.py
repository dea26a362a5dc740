"""Negative L2 gradient flows of the two action functionals, on loop grids.

Discretization: uniform periodic t-grid with N_t samples and centered
differences for d/dt.  With this pairing the discrete L2 gradient of the
discretized action coincides sample-by-sample with the discretized
analytic gradient:

    free period (x, tau):   ( J (x' - tau X_H(x)),  -integral H(x) dt )
    fixed period (x,eta,zeta): ( J (x' - eta X_H(x)),  zeta' - H(x),  -eta' )

where J is the model's compatible structure (-J_n).  Time stepping is
explicit Euler with Armijo backtracking on the action, or a semi-implicit
variant that solves the linear d/dt terms mode-by-mode in Fourier space.

Both action functionals are strongly indefinite: the linearized flow has
growth rates of both signs up to the grid frequency, so the unfiltered
initial value problem amplifies rounding noise at rate O(N_t) and no
time-stepping scheme can converge a long run in double precision.  The
integrator therefore supports a Fourier cutoff ``freq_cutoff``: with it,
the flow is the exact negative gradient flow of the action restricted to
the span of modes |k| <= freq_cutoff (a Galerkin subspace that contains
the model's critical manifolds), while the stopping criterion and the
structural diagnostics are still evaluated with the full, unprojected
gradient.  ``reduced_hessian`` and ``stable_perturbation`` expose the
second variation on the same subspace so that experiments can start from
perturbations that the flow contracts.

Diagnostics recorded per accepted step: action (non-increasing), full and
flow gradient norms, cumulative discrete energy (trapezoidal quadrature of
<grad, -velocity>, which equals the action drop up to O(ds^2) per unit
flow time), residual of the averaged multiplier ODE etahat' = integral
H(u) dt, drift of the conserved average zetahat, max |H| with the
small-gradient threshold implication, containment in the plateau ball,
and the zeta-spread bound.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .model import ModelSystem

__all__ = [
    "RabinowitzLoop",
    "ExtendedLoop",
    "FlowStep",
    "FlowDiagnostics",
    "IntegrateControls",
    "StepSizeError",
    "DivergenceError",
    "action_rabinowitz",
    "action_extended",
    "gradient_rabinowitz",
    "gradient_extended",
    "grad_norm",
    "integrate",
    "circ_diff",
    "fourier_project",
    "discrete_orbit_loop",
    "discrete_constant_loop",
    "lift_loop",
    "reduced_hessian",
    "stable_perturbation",
    "loop_to_json",
    "loop_from_json",
    "diagnostics_to_csv",
    "DIAG_COLUMNS",
]


class StepSizeError(RuntimeError):
    """Armijo backtracking hit the minimum step without an action decrease."""


class DivergenceError(RuntimeError):
    """The flow produced non-finite values."""


@dataclass(frozen=True)
class RabinowitzLoop:
    """Free-period state: loop samples x (N_t, 2n) and the multiplier tau."""

    x: np.ndarray
    tau: float

    @property
    def nt(self) -> int:
        return self.x.shape[0]


@dataclass(frozen=True)
class ExtendedLoop:
    """Fixed-period state: loop samples x (N_t, 2n), eta (N_t,), zeta (N_t,)."""

    x: np.ndarray
    eta: np.ndarray
    zeta: np.ndarray

    @property
    def nt(self) -> int:
        return self.x.shape[0]

    @property
    def zeta_avg(self) -> float:
        # recomputed on demand, never cached
        return float(np.mean(self.zeta))

    @property
    def eta_avg(self) -> float:
        return float(np.mean(self.eta))


def circ_diff(arr: np.ndarray, nt: int | None = None) -> np.ndarray:
    """Centered difference d/dt on the periodic unit-time grid."""
    n = arr.shape[0] if nt is None else nt
    return (np.roll(arr, -1, axis=0) - np.roll(arr, 1, axis=0)) * (n / 2.0)


def fourier_project(arr: np.ndarray, kmax: int) -> np.ndarray:
    """Zero out Fourier modes with |k| > kmax along the time axis."""
    spec = np.fft.rfft(arr, axis=0)
    spec[kmax + 1:] = 0.0
    return np.fft.irfft(spec, n=arr.shape[0], axis=0)


# -- actions -------------------------------------------------------------------


def _loop_lambda_integral(sys: ModelSystem, x: np.ndarray) -> float:
    """Quadrature of integral x^* lambda with centered differences."""
    return float(np.mean(sys.lam(x, circ_diff(x))))


def _loop_h_integral(sys: ModelSystem, x: np.ndarray) -> float:
    return float(np.mean(sys.hamiltonian(x)))


def action_rabinowitz(sys: ModelSystem, loop: RabinowitzLoop) -> float:
    """Free-period action: integral x^* lambda - tau * integral H(x) dt."""
    return _loop_lambda_integral(sys, loop.x) - loop.tau * _loop_h_integral(sys, loop.x)


def action_extended(sys: ModelSystem, loop: ExtendedLoop) -> float:
    """Fixed-period action: integral x^* lambda - zeta eta' - eta H(x) dt.

    The middle term pairs zeta against the centered difference of eta; on
    the periodic grid it is exactly invariant under zeta -> zeta + const,
    and it vanishes identically when eta is constant, which makes the
    value agree exactly with the free-period action on lifted states.
    """
    mid = float(np.mean(loop.zeta * circ_diff(loop.eta)))
    coupling = float(np.mean(loop.eta * sys.hamiltonian(loop.x)))
    return _loop_lambda_integral(sys, loop.x) - mid - coupling


# -- gradients -----------------------------------------------------------------


def gradient_rabinowitz(sys: ModelSystem, loop: RabinowitzLoop):
    """L2 gradient (J(x' - tau X_H(x)), -integral H dt); exact for the
    discretized action, so it vanishes exactly at discrete critical loops."""
    acs = sys.acs(loop.tau)
    gx = (circ_diff(loop.x) - loop.tau * sys.x_h(loop.x)) @ acs.T
    gtau = -_loop_h_integral(sys, loop.x)
    return gx, gtau


def gradient_extended(sys: ModelSystem, loop: ExtendedLoop):
    """L2 gradient (J(x' - eta X_H(x)), zeta' - H(x), -eta')."""
    eta = loop.eta[:, None]
    acs = sys.acs(loop.eta_avg)
    gx = (circ_diff(loop.x) - eta * sys.x_h(loop.x)) @ acs.T
    geta = circ_diff(loop.zeta) - sys.hamiltonian(loop.x)
    gzeta = -circ_diff(loop.eta)
    return gx, geta, gzeta


def grad_norm(g, nt: int) -> float:
    """Discrete L2 norm of a gradient tuple (loop parts weighted by dt)."""
    if len(g) == 2:  # rabinowitz: (field, scalar)
        gx, gtau = g
        return math.sqrt(float(np.sum(gx * gx)) / nt + gtau * gtau)
    gx, geta, gzeta = g
    return math.sqrt(
        (float(np.sum(gx * gx)) + float(np.sum(geta * geta)) + float(np.sum(gzeta * gzeta))) / nt
    )


def _g_inner(g1, g2, nt: int) -> float:
    if len(g1) == 2:
        return float(np.sum(g1[0] * g2[0])) / nt + g1[1] * g2[1]
    return (
        float(np.sum(g1[0] * g2[0]))
        + float(np.sum(g1[1] * g2[1]))
        + float(np.sum(g1[2] * g2[2]))
    ) / nt


def _project_gradient(g, kmax: int | None):
    if kmax is None:
        return g
    if len(g) == 2:
        return (fourier_project(g[0], kmax), g[1])
    return tuple(fourier_project(a, kmax) for a in g)


def _apply_step(loop, g, ds: float):
    if isinstance(loop, RabinowitzLoop):
        return RabinowitzLoop(x=loop.x - ds * g[0], tau=loop.tau - ds * g[1])
    return ExtendedLoop(
        x=loop.x - ds * g[0], eta=loop.eta - ds * g[1], zeta=loop.zeta - ds * g[2]
    )


def _action(sys, loop) -> float:
    if isinstance(loop, RabinowitzLoop):
        return action_rabinowitz(sys, loop)
    return action_extended(sys, loop)


def _gradient(sys, loop):
    if isinstance(loop, RabinowitzLoop):
        return gradient_rabinowitz(sys, loop)
    return gradient_extended(sys, loop)


# -- semi-implicit linear solves -------------------------------------------------


def _semi_implicit_step(sys, loop, g_explicit, ds: float, kmax: int | None):
    """One step implicit in the linear d/dt terms, explicit in the rest.

    The x equation treats J x' implicitly; the (eta, zeta) pair solves its
    exact discrete Cauchy-Riemann coupling implicitly mode by mode.  The
    pair is indefinite, so the mode solves have a resonance at
    ds * mu_k = 1; callers must keep ds below that (the integrator guards
    it).  This removes the explicit scheme's step restriction from the
    stable side of the spectrum, not the genuine growth of the unstable
    side, which no consistent scheme can remove.
    """
    nt = loop.nt
    mu = np.sin(2.0 * np.pi * np.fft.rfftfreq(nt)) * nt  # centered-diff symbol

    def solve_x(rhs):
        # (I - ds J D) x+ = rhs; per mode, (I - bJ)^{-1} = (I + bJ)/(1 + b^2)
        spec = np.fft.rfft(rhs, axis=0)
        b = (1j * ds * mu)[:, None]
        spec = (spec + b * (spec @ sys.jmat.T)) / (1.0 - (ds * mu)[:, None] ** 2)
        return np.fft.irfft(spec, n=nt, axis=0)

    # the flow reads d_s x = J D x + (multiplier) grad H(x) once the
    # compatible structure -J is folded into the gradient formula
    if isinstance(loop, RabinowitzLoop):
        x_new = solve_x(loop.x + ds * (loop.tau * sys.grad_hamiltonian(loop.x)))
        tau_new = loop.tau - ds * g_explicit[1]
        new = RabinowitzLoop(x=x_new, tau=tau_new)
    else:
        h_of_x = sys.hamiltonian(loop.x)
        x_new = solve_x(loop.x + ds * (loop.eta[:, None] * sys.grad_hamiltonian(loop.x)))
        # (eta, zeta): eta+ = eta + ds(H - D zeta+), zeta+ = zeta + ds D eta+
        eh = np.fft.rfft(loop.eta + ds * h_of_x)
        zh = np.fft.rfft(loop.zeta)
        det = 1.0 - (ds * mu) ** 2
        eta_new_hat = (eh - 1j * ds * mu * zh) / det
        zeta_new_hat = (zh + 1j * ds * mu * eh) / det
        new = ExtendedLoop(
            x=x_new,
            eta=np.fft.irfft(eta_new_hat, n=nt),
            zeta=np.fft.irfft(zeta_new_hat, n=nt),
        )
    if kmax is not None:
        new = _project_loop(new, kmax)
    return new


def _project_loop(loop, kmax: int):
    if isinstance(loop, RabinowitzLoop):
        return RabinowitzLoop(x=fourier_project(loop.x, kmax), tau=loop.tau)
    return ExtendedLoop(
        x=fourier_project(loop.x, kmax),
        eta=fourier_project(loop.eta, kmax),
        zeta=fourier_project(loop.zeta, kmax),
    )


# -- integration -----------------------------------------------------------------


DIAG_COLUMNS = (
    "step", "s", "action", "grad_norm", "energy_cum",
    "eta_avg_residual", "zeta_drift", "max_abs_H", "containment",
)


@dataclass(frozen=True)
class FlowStep:
    step: int
    s: float
    action: float
    grad_norm: float
    energy_cum: float
    eta_avg_residual: float
    zeta_drift: float
    max_abs_h: float
    containment: bool
    lem1_ok: bool
    zeta_spread: float


@dataclass
class FlowDiagnostics:
    rows: list[FlowStep] = field(default_factory=list)
    converged: bool = False
    stop_reason: str = ""
    target_component: str = ""
    energy_total: float = 0.0
    action_start: float = 0.0
    action_end: float = 0.0
    h_sup: float = 0.0

    @property
    def energy_identity_residual(self) -> float:
        return abs(self.energy_total - (self.action_start - self.action_end))

    @property
    def max_eta_residual(self) -> float:
        return max((r.eta_avg_residual for r in self.rows), default=0.0)

    @property
    def max_zeta_drift(self) -> float:
        return max((abs(r.zeta_drift) for r in self.rows), default=0.0)

    @property
    def actions_non_increasing(self) -> bool:
        acts = [r.action for r in self.rows]
        return all(b <= a + 1e-12 for a, b in zip(acts, acts[1:]))

    @property
    def lem1_always(self) -> bool:
        return all(r.lem1_ok for r in self.rows)

    @property
    def contained_always(self) -> bool:
        return all(r.containment for r in self.rows)

    def zeta_spread_bound_ok(self) -> bool:
        bound = 2.0 * math.sqrt(max(self.energy_total, 0.0)) + self.h_sup
        return all(r.zeta_spread <= bound + 1e-9 for r in self.rows)


@dataclass(frozen=True)
class IntegrateControls:
    scheme: str = "explicit"          # "explicit" | "semi-implicit"
    ds0: float = 1e-3
    ds_min: float = 1e-12
    ds_max: float = 5e-2
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    grow: float = 1.3
    eps_stop: float = 1e-7
    max_steps: int = 10**6
    freq_cutoff: int | None = 2
    record_every: int = 1


def _lem1_check(sys: ModelSystem, full_norm: float, max_abs_h: float) -> bool:
    """Threshold implication: small gradient forces |H| below h_thr."""
    threshold = 0.5 * sys.h_thr * min(1.0 / sys.x_h_sup, 1.0)
    if full_norm >= threshold:
        return True
    return max_abs_h < sys.h_thr


def _observe(sys, loop):
    habs = np.abs(sys.hamiltonian(loop.x))
    contained = bool(np.max(np.linalg.norm(loop.x, axis=1)) <= sys.profile.r_plateau + 1e-9)
    if isinstance(loop, ExtendedLoop):
        spread = float(
            math.sqrt(max(np.mean((loop.zeta - loop.zeta_avg) ** 2), 0.0))
        )
    else:
        spread = 0.0
    return float(np.max(habs)), contained, spread


def identify_target(sys: ModelSystem, loop, k_range=(-3, 3)) -> str:
    """Nearest critical component by (action value, |multiplier| bucket)."""
    act = _action(sys, loop)
    tau = loop.tau if isinstance(loop, RabinowitzLoop) else loop.eta_avg
    base = sys.base_period()
    best, best_key = "constants", (abs(act - 0.0), abs(abs(tau) - 0.0))
    for k in range(k_range[0], k_range[1] + 1):
        if k == 0:
            continue
        key = (abs(act - np.pi * k), abs(abs(tau) - abs(k) * base))
        if key < best_key:
            best, best_key = f"orbit{k:+d}", key
    return best


def integrate(sys: ModelSystem, loop0, controls: IntegrateControls = IntegrateControls()):
    """Run the negative gradient flow until the full gradient norm drops
    below controls.eps_stop or the step budget is exhausted.

    Returns (final loop, FlowDiagnostics).  Raises StepSizeError if the
    action cannot be decreased at the minimum step, DivergenceError on
    non-finite values.
    """
    kmax = controls.freq_cutoff
    loop = _project_loop(loop0, kmax) if kmax is not None else loop0
    nt = loop.nt
    zeta0_mean = math.fsum(loop.zeta.tolist()) / nt if isinstance(loop, ExtendedLoop) else 0.0

    diags = FlowDiagnostics(h_sup=float(np.abs(sys.profile.plateau_value())))
    a_cur = _action(sys, loop)
    diags.action_start = a_cur
    g_full = _gradient(sys, loop)
    g_flow = _project_gradient(g_full, kmax)
    ds = controls.ds0
    energy = 0.0
    s_cur = 0.0

    def record(step):
        full_norm = grad_norm(g_full, nt)
        max_h, contained, spread = _observe(sys, loop)
        if isinstance(loop, ExtendedLoop):
            drift = math.fsum(loop.zeta.tolist()) / nt - zeta0_mean
        else:
            drift = 0.0
        diags.rows.append(
            FlowStep(
                step=step, s=s_cur, action=a_cur, grad_norm=full_norm,
                energy_cum=energy, eta_avg_residual=eta_resid, zeta_drift=drift,
                max_abs_h=max_h, containment=contained,
                lem1_ok=_lem1_check(sys, full_norm, max_h), zeta_spread=spread,
            )
        )

    eta_resid = 0.0
    record(0)

    n_accepted = 0
    while n_accepted < controls.max_steps:
        full_norm = grad_norm(g_full, nt)
        if not (np.isfinite(full_norm) and np.isfinite(a_cur)) or abs(a_cur) > 1e100:
            raise DivergenceError(
                f"flow diverged (action {a_cur:.3e}, gradient {full_norm:.3e})"
            )
        if full_norm < controls.eps_stop:
            diags.converged = True
            diags.stop_reason = "gradient below threshold"
            break
        if controls.scheme == "semi-implicit":
            # keep ds*mu well below the mode-solve resonance at 1: the
            # implicit map magnifies the honest unstable rate mu by
            # ln(1/(1-ds*mu))/(ds*mu), about 1.2 at 0.3
            mu_max = 2.0 * np.pi * (kmax if kmax is not None else nt // 2)
            ds = min(ds, 0.3 / max(mu_max, 1e-12))
        flow_sq = _g_inner(g_flow, g_flow, nt)
        accepted = False
        while ds >= controls.ds_min:
            if controls.scheme == "semi-implicit":
                cand = _semi_implicit_step(sys, loop, g_flow, ds, kmax)
            else:
                cand = _apply_step(loop, g_flow, ds)
            a_new = _action(sys, cand)
            if not np.isfinite(a_new):
                raise DivergenceError("action became non-finite; the flow diverged")
            if a_new <= a_cur - controls.armijo_c * ds * flow_sq:
                accepted = True
                break
            ds *= controls.backtrack
        if not accepted:
            raise StepSizeError(
                f"no action decrease at minimum step {controls.ds_min:g} "
                f"(action {a_cur:.12g}, grad {full_norm:.3e})"
            )

        g_full_new = _gradient(sys, cand)
        g_flow_new = _project_gradient(g_full_new, kmax)
        # trapezoidal quadrature of <grad, -velocity> along the accepted chord
        if isinstance(loop, RabinowitzLoop):
            vel = ((cand.x - loop.x) / ds, (cand.tau - loop.tau) / ds)
        else:
            vel = ((cand.x - loop.x) / ds, (cand.eta - loop.eta) / ds,
                   (cand.zeta - loop.zeta) / ds)
        gmid = tuple(0.5 * (a + b) for a, b in zip(g_flow, g_flow_new))
        energy += -ds * _g_inner(gmid, vel, nt)
        if isinstance(loop, ExtendedLoop):
            eta_resid = abs(
                (np.mean(cand.eta) - np.mean(loop.eta)) / ds
                - float(np.mean(sys.hamiltonian(loop.x)))
            )
        else:
            eta_resid = abs(
                (cand.tau - loop.tau) / ds - float(np.mean(sys.hamiltonian(loop.x)))
            )
        loop, a_cur = cand, a_new
        g_full, g_flow = g_full_new, g_flow_new
        s_cur += ds
        n_accepted += 1
        if n_accepted % controls.record_every == 0:
            record(n_accepted)
        ds = min(ds * controls.grow, controls.ds_max)
    else:
        diags.stop_reason = "step budget exhausted"

    if diags.rows and diags.rows[-1].step != n_accepted:
        record(n_accepted)
    diags.energy_total = energy
    diags.action_end = a_cur
    diags.target_component = identify_target(sys, loop)
    return loop, diags


# -- discrete critical loops -------------------------------------------------------


def discrete_orbit_loop(sys: ModelSystem, k: int, nt: int = 256, base=None) -> RabinowitzLoop:
    """The multiplicity-k circle orbit as an exact fixed point of the
    discrete gradient: the sampled unit-sphere loop with the multiplier
    tuned to the centered-difference symbol, tau = sin(2 pi k / N_t) * N_t
    / (k h'(1)) * k ... explicitly tau = sin(2 pi k dt)/(dt h'(1))."""
    if k == 0:
        raise ValueError("k = 0 has no orbit; use discrete_constant_loop")
    t = np.arange(nt) / nt
    if base is None:
        base = np.zeros(sys.dim)
        base[0] = 1.0
    base = np.asarray(base, float)
    base = base / np.linalg.norm(base)
    theta = 2.0 * np.pi * k * t
    x = np.cos(theta)[:, None] * base + np.sin(theta)[:, None] * (sys.jmat @ base)
    dt = 1.0 / nt
    tau = math.sin(2.0 * np.pi * k * dt) / (dt * float(sys.profile.hp(1.0)))
    return RabinowitzLoop(x=x, tau=tau)


def discrete_constant_loop(sys: ModelSystem, point=None, nt: int = 256) -> RabinowitzLoop:
    """A constant loop on the unit sphere with multiplier zero."""
    if point is None:
        point = np.zeros(sys.dim)
        point[0] = 1.0
    point = np.asarray(point, float)
    point = point / np.linalg.norm(point)
    return RabinowitzLoop(x=np.tile(point, (nt, 1)), tau=0.0)


def lift_loop(loop: RabinowitzLoop, sigma: float = 0.0) -> ExtendedLoop:
    """Lift (x, tau) to (x, eta = tau const, zeta = sigma const)."""
    nt = loop.nt
    return ExtendedLoop(
        x=np.array(loop.x), eta=np.full(nt, loop.tau), zeta=np.full(nt, sigma)
    )


# -- reduced second variation --------------------------------------------------------


def _fourier_basis(nt: int, kmax: int) -> np.ndarray:
    """Orthonormal real trig basis (columns) for modes |k| <= kmax."""
    t = np.arange(nt) / nt
    cols = [np.ones(nt)]
    for k in range(1, kmax + 1):
        cols.append(np.sqrt(2.0) * np.cos(2 * np.pi * k * t))
        cols.append(np.sqrt(2.0) * np.sin(2 * np.pi * k * t))
    return np.stack(cols, axis=1)


def _pack_dim(loop, kmax: int) -> int:
    nb = 2 * kmax + 1
    ncomp = loop.x.shape[1]
    if isinstance(loop, RabinowitzLoop):
        return ncomp * nb + 1
    return (ncomp + 2) * nb


def _unpack(loop, vec: np.ndarray, basis: np.ndarray):
    """Tangent vector in the reduced basis -> loop-shaped arrays."""
    nb = basis.shape[1]
    ncomp = loop.x.shape[1]
    dx = basis @ vec[: ncomp * nb].reshape(ncomp, nb).T
    if isinstance(loop, RabinowitzLoop):
        return dx, float(vec[-1])
    deta = basis @ vec[ncomp * nb: (ncomp + 1) * nb]
    dzeta = basis @ vec[(ncomp + 1) * nb:]
    return dx, deta, dzeta


def _pack_gradient(loop, g, basis: np.ndarray) -> np.ndarray:
    nt = basis.shape[0]
    gx_coef = (basis.T @ g[0]) / nt  # orthonormal w.r.t. the mean inner product
    if isinstance(loop, RabinowitzLoop):
        return np.concatenate([gx_coef.T.ravel(), [g[1]]])
    ge = basis.T @ g[1] / nt
    gz = basis.T @ g[2] / nt
    return np.concatenate([gx_coef.T.ravel(), ge, gz])


def _shift(loop, vec, basis, eps):
    d = _unpack(loop, eps * vec, basis)
    if isinstance(loop, RabinowitzLoop):
        return RabinowitzLoop(x=loop.x + d[0], tau=loop.tau + d[1])
    return ExtendedLoop(x=loop.x + d[0], eta=loop.eta + d[1], zeta=loop.zeta + d[2])


def reduced_hessian(sys: ModelSystem, loop, kmax: int = 2, eps: float = 1e-5) -> np.ndarray:
    """Second variation of the action on the |k| <= kmax Fourier subspace.

    Assembled by central differences of the gradient in an orthonormal
    basis of the subspace, then symmetrized; the discrete L2 metric is the
    identity in these coordinates.
    """
    basis = _fourier_basis(loop.nt, kmax)
    dim = _pack_dim(loop, kmax)
    hess = np.empty((dim, dim))
    for j in range(dim):
        e = np.zeros(dim)
        e[j] = 1.0
        gp = _pack_gradient(loop, _gradient(sys, _shift(loop, e, basis, eps)), basis)
        gm = _pack_gradient(loop, _gradient(sys, _shift(loop, e, basis, -eps)), basis)
        hess[:, j] = (gp - gm) / (2 * eps)
    return 0.5 * (hess + hess.T)


def stable_perturbation(
    sys: ModelSystem,
    loop,
    rng: np.random.Generator,
    kmax: int = 1,
    amplitude: float = 3e-6,
    rate_min: float = 2.0,
):
    """Random tangent in the fast-stable cone of the reduced Hessian.

    The flow contracts these directions at rate >= rate_min; starting
    there keeps a run clear of the (genuine) unstable directions of the
    indefinite functional for long enough to converge.  Returns a
    perturbed copy of the loop.
    """
    basis = _fourier_basis(loop.nt, kmax)
    hess = reduced_hessian(sys, loop, kmax=kmax)
    evals, evecs = np.linalg.eigh(hess)
    stable = evecs[:, evals >= rate_min]
    if stable.shape[1] == 0:
        raise ValueError(f"no Hessian directions with rate >= {rate_min}")
    coef = rng.standard_normal(stable.shape[1])
    vec = stable @ (coef / np.linalg.norm(coef))
    return _shift(loop, vec, basis, amplitude)


# -- serialization ----------------------------------------------------------------


def loop_to_json(loop, file=None) -> str:
    if isinstance(loop, RabinowitzLoop):
        payload = {"type": "rabinowitz", "x": loop.x.tolist(), "tau": loop.tau}
    else:
        payload = {
            "type": "extended", "x": loop.x.tolist(),
            "eta": loop.eta.tolist(), "zeta": loop.zeta.tolist(),
        }
    text = json.dumps(payload, sort_keys=True) + "\n"
    if file is not None:
        own = isinstance(file, (str, bytes))
        fh = open(file, "w") if own else file
        try:
            fh.write(text)
        finally:
            if own:
                fh.close()
    return text


def loop_from_json(source):
    if isinstance(source, (str, bytes)) and str(source).lstrip().startswith("{"):
        payload = json.loads(source)
    elif isinstance(source, (str, bytes)):
        with open(source) as fh:
            payload = json.load(fh)
    else:
        payload = json.load(source)
    if payload["type"] == "rabinowitz":
        return RabinowitzLoop(x=np.array(payload["x"], float), tau=float(payload["tau"]))
    return ExtendedLoop(
        x=np.array(payload["x"], float),
        eta=np.array(payload["eta"], float),
        zeta=np.array(payload["zeta"], float),
    )


def diagnostics_to_csv(diags: FlowDiagnostics, file=None, extra_columns=None) -> str:
    """Diagnostics stream: one row per recorded step, spec'd column order."""
    header = ",".join(DIAG_COLUMNS)
    lines = [header]
    for r in diags.rows:
        lines.append(
            ",".join(
                [
                    str(r.step),
                    format(r.s, ".17g"),
                    format(r.action, ".17g"),
                    format(r.grad_norm, ".17g"),
                    format(r.energy_cum, ".17g"),
                    format(r.eta_avg_residual, ".17g"),
                    format(r.zeta_drift, ".17g"),
                    format(r.max_abs_h, ".17g"),
                    "1" if r.containment else "0",
                ]
            )
        )
    text = "\n".join(lines) + "\n"
    if file is not None:
        own = isinstance(file, (str, bytes))
        fh = open(file, "w") if own else file
        try:
            fh.write(text)
        finally:
            if own:
                fh.close()
    return text
