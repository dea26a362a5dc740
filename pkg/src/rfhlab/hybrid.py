"""Coupled half-cylinder problem matching the two gradient flows at s = 0.

A hybrid configuration is a pair: a free-period trajectory v = (u-, eta-)
on (-S, 0] and a fixed-period trajectory u~ = (u+, eta+, zeta+) on [0, S),
coupled by

    u+(0, t) = u-(0, t)   and   eta+(0, t) = kappa * eta-(0)   for all t,

with kappa = 1 the geometric coupling.  Because eta+(0, .) is constant in
t, the two action values agree exactly at the matching time, giving the
chain  A(v(-s)) >= A(v(0)) = A~(u~(0)) >= A~(u~(s))  and the sharp energy
identity  E(v) + E(u~) = A(v(-S)) - A~(u~(S))  up to quadrature error.

``hybrid_relax`` realizes configurations by alternating sweeps: flow the
minus input forward for the horizon, project the coupling (exact, the
constraint is affine), flow the plus side onward.  A half-run freezes once
its gradient drops below the end tolerance; if the plus end is still away
from critical at the horizon, the horizon doubles and the sweep repeats.

``hessian_agreement`` verifies numerically that the second variations of
the two functionals agree on coupled directions (v, rho) vs (v, rho, xi):
the xi terms integrate away when rho is constant in t, so the discrete
values agree to rounding for any loop xi.  ``auto_transversality_check``
examines the linearization at a stationary configuration: the reduced
second variation has kernel spanned by the critical-manifold tangents
(which the Morse data on the quotient pins) plus the sigma-shift, so the
sigma-shift is the only neutral direction of the matching problem itself;
evolved seeds decay or grow according to their spectral side, and
positive-cone seeds have strictly decreasing norm on the plus side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .gradflow import (
    ExtendedLoop,
    RabinowitzLoop,
    _fourier_basis,
    _pack_dim,
    _shift,
    action_extended,
    action_rabinowitz,
    fourier_project,
    grad_norm,
    gradient_extended,
    gradient_rabinowitz,
    lift_loop,
    reduced_hessian,
)
from .model import ModelSystem

__all__ = [
    "HybridState",
    "HybridControls",
    "HybridDiagnostics",
    "AutoTransversalityReport",
    "couple_loops",
    "initial_hybrid_state",
    "hybrid_relax",
    "hessian_agreement",
    "auto_transversality_check",
    "hybrid_diagnostics_to_csv",
    "HYBRID_DIAG_COLUMNS",
]


class CouplingError(RuntimeError):
    """The coupling residual at s = 0 failed to stay at machine size."""


def couple_loops(minus_loop: RabinowitzLoop, zeta_ref: np.ndarray | float, kappa: float = 1.0) -> ExtendedLoop:
    """Project a free-period loop to the coupled fixed-period initial loop."""
    nt = minus_loop.nt
    zeta = np.full(nt, float(zeta_ref)) if np.isscalar(zeta_ref) else np.array(zeta_ref, float)
    return ExtendedLoop(
        x=np.array(minus_loop.x), eta=np.full(nt, kappa * minus_loop.tau), zeta=zeta
    )


@dataclass
class HalfRun:
    """One relaxed half-trajectory with its per-step records."""

    s: list[float] = field(default_factory=list)
    loops: list = field(default_factory=list)
    actions: list[float] = field(default_factory=list)
    grad_norms: list[float] = field(default_factory=list)
    energy_cum: list[float] = field(default_factory=list)
    frozen_from: float | None = None

    @property
    def energy(self) -> float:
        return self.energy_cum[-1] if self.energy_cum else 0.0


@dataclass
class HybridState:
    """Pair of coupled half-trajectories and the horizon."""

    minus: HalfRun
    plus: HalfRun
    horizon: float
    kappa: float = 1.0

    @property
    def minus_end(self) -> RabinowitzLoop:
        return self.minus.loops[-1]

    @property
    def plus_end(self) -> ExtendedLoop:
        return self.plus.loops[-1]

    def coupling_residuals(self) -> tuple[float, float]:
        v0 = self.minus.loops[-1]
        u0 = self.plus.loops[0]
        r_loop = float(np.max(np.abs(u0.x - v0.x)))
        r_eta = float(np.max(np.abs(u0.eta - self.kappa * v0.tau)))
        return r_loop, r_eta


@dataclass(frozen=True)
class HybridControls:
    horizon: float = 20.0
    max_doublings: int = 3
    end_tol: float = 1e-6
    ds0: float = 1e-3
    ds_max: float = 5e-2
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    grow: float = 1.3
    freq_cutoff: int | None = 1
    kappa: float = 1.0


def initial_hybrid_state(
    sys: ModelSystem,
    minus_input: RabinowitzLoop,
    sigma: float = 0.0,
    controls: HybridControls = HybridControls(),
) -> HybridState:
    """Constant-in-s configuration through the given free-period loop.

    The plus side is the coupled lift with zeta = sigma; the coupling
    invariants hold by construction.
    """
    plus0 = couple_loops(minus_input, sigma, controls.kappa)
    minus = HalfRun(
        s=[-controls.horizon], loops=[minus_input],
        actions=[action_rabinowitz(sys, minus_input)],
        grad_norms=[grad_norm(gradient_rabinowitz(sys, minus_input), minus_input.nt)],
        energy_cum=[0.0],
    )
    plus = HalfRun(
        s=[0.0], loops=[plus0],
        actions=[action_extended(sys, plus0)],
        grad_norms=[grad_norm(gradient_extended(sys, plus0), plus0.nt)],
        energy_cum=[0.0],
    )
    return HybridState(minus=minus, plus=plus, horizon=controls.horizon, kappa=controls.kappa)


def _half_flow(sys, loop, s_offset: float, horizon: float, controls: HybridControls) -> HalfRun:
    """Explicit negative-gradient half-run over flow time ``horizon``.

    Records every accepted step; freezes (stops stepping) once the full
    gradient drops below the end tolerance, since past that point the
    trajectory stays within end_tol/rate of the frozen loop.
    """
    kmax = controls.freq_cutoff
    is_rab = isinstance(loop, RabinowitzLoop)
    grad = gradient_rabinowitz if is_rab else gradient_extended
    act = action_rabinowitz if is_rab else action_extended
    nt = loop.nt

    def project(g):
        if kmax is None:
            return g
        if is_rab:
            return (fourier_project(g[0], kmax), g[1])
        return tuple(fourier_project(a, kmax) for a in g)

    def inner(g1, g2):
        if is_rab:
            return float(np.sum(g1[0] * g2[0])) / nt + g1[1] * g2[1]
        return (
            float(np.sum(g1[0] * g2[0])) + float(np.sum(g1[1] * g2[1]))
            + float(np.sum(g1[2] * g2[2]))
        ) / nt

    run = HalfRun()
    a_cur = act(sys, loop)
    g_full = grad(sys, loop)
    g_flow = project(g_full)
    s = 0.0
    run.s.append(s_offset + s)
    run.loops.append(loop)
    run.actions.append(a_cur)
    run.grad_norms.append(grad_norm(g_full, nt))
    run.energy_cum.append(0.0)
    energy = 0.0
    ds = controls.ds0

    while s < horizon:
        if grad_norm(g_full, nt) <= controls.end_tol:
            run.frozen_from = s_offset + s
            break
        flow_sq = inner(g_flow, g_flow)
        accepted = False
        while ds >= 1e-12:
            ds_eff = min(ds, horizon - s)
            if is_rab:
                cand = RabinowitzLoop(x=loop.x - ds_eff * g_flow[0], tau=loop.tau - ds_eff * g_flow[1])
            else:
                cand = ExtendedLoop(
                    x=loop.x - ds_eff * g_flow[0], eta=loop.eta - ds_eff * g_flow[1],
                    zeta=loop.zeta - ds_eff * g_flow[2],
                )
            a_new = act(sys, cand)
            if np.isfinite(a_new) and a_new <= a_cur - controls.armijo_c * ds_eff * flow_sq:
                accepted = True
                break
            ds *= controls.backtrack
        if not accepted:
            raise RuntimeError("half-run could not decrease the action")
        g_full_new = grad(sys, cand)
        g_flow_new = project(g_full_new)
        gmid = tuple(0.5 * (p + q) for p, q in zip(g_flow, g_flow_new))
        if is_rab:
            vel = ((cand.x - loop.x) / ds_eff, (cand.tau - loop.tau) / ds_eff)
        else:
            vel = ((cand.x - loop.x) / ds_eff, (cand.eta - loop.eta) / ds_eff,
                   (cand.zeta - loop.zeta) / ds_eff)
        energy += -ds_eff * inner(gmid, vel)
        loop, a_cur = cand, a_new
        g_full, g_flow = g_full_new, g_flow_new
        s += ds_eff
        run.s.append(s_offset + s)
        run.loops.append(loop)
        run.actions.append(a_cur)
        run.grad_norms.append(grad_norm(g_full, nt))
        run.energy_cum.append(energy)
        ds = min(ds * controls.grow, controls.ds_max)
    return run


@dataclass
class HybridDiagnostics:
    sweeps: int = 0
    horizon: float = 0.0
    coupling_residual_loop: float = 0.0
    coupling_residual_eta: float = 0.0
    mid_action_residual: float = 0.0
    action_chain_ok: bool = False
    energy_minus: float = 0.0
    energy_plus: float = 0.0
    energy_identity_residual: float = 0.0
    end_grad_minus_input: float = 0.0
    end_grad_plus: float = 0.0
    converged: bool = False
    eta_minus_inf: float = 0.0
    eta_plus_inf: float = 0.0
    zeta_spread_inf: float = 0.0
    contained: bool = True


def hybrid_relax(
    sys: ModelSystem,
    state: HybridState,
    controls: HybridControls = HybridControls(),
):
    """Relax a hybrid configuration by alternating half-flows.

    Each sweep flows the stored minus input forward over the horizon,
    re-imposes the coupling at s = 0 exactly, and flows the plus side on.
    The horizon doubles (re-sweeping from the same input) until the plus
    end gradient passes the end tolerance or the doubling budget runs out.

    Returns (relaxed HybridState, HybridDiagnostics).  The action chain
    and the summed-energy identity are checked and recorded; a coupling
    residual above rounding raises CouplingError.
    """
    minus_input = state.minus.loops[0]
    sigma_ref = float(np.mean(state.plus.loops[0].zeta))
    horizon = state.horizon
    kappa = state.kappa

    diags = HybridDiagnostics()
    sweeps = 0
    while True:
        sweeps += 1
        minus = _half_flow(sys, minus_input, -horizon, horizon, controls)
        plus0 = couple_loops(minus.loops[-1], sigma_ref, kappa)
        plus = _half_flow(sys, plus0, 0.0, horizon, controls)
        end_grad = plus.grad_norms[-1]
        if end_grad <= controls.end_tol or sweeps > controls.max_doublings:
            break
        horizon *= 2.0

    out = HybridState(minus=minus, plus=plus, horizon=horizon, kappa=kappa)

    r_loop, r_eta = out.coupling_residuals()
    if max(r_loop, r_eta) > 1e-12:
        raise CouplingError(f"coupling residuals {r_loop:.3e}, {r_eta:.3e} exceed rounding")

    a_minus_end = minus.actions[-1]
    a_plus_start = plus.actions[0]
    chain_ok = (
        all(b <= a + 1e-12 for a, b in zip(minus.actions, minus.actions[1:]))
        and all(b <= a + 1e-12 for a, b in zip(plus.actions, plus.actions[1:]))
    )
    assert chain_ok, "action chain increased along a relaxed half-trajectory"
    mid_res = abs(a_minus_end - a_plus_start) if kappa == 1.0 else float("nan")

    e_m, e_p = minus.energy, plus.energy
    identity_res = abs((e_m + e_p) - (minus.actions[0] - plus.actions[-1]))

    eta_plus_inf = max(float(np.max(np.abs(l.eta))) for l in plus.loops)
    zeta_spread = max(
        float(np.max(np.abs(l.zeta - np.mean(l.zeta)))) for l in plus.loops
    )
    contained = all(
        float(np.max(np.linalg.norm(l.x, axis=1))) <= sys.profile.r_plateau + 1e-9
        for l in list(minus.loops) + list(plus.loops)
    )

    diags.sweeps = sweeps
    diags.horizon = horizon
    diags.coupling_residual_loop = r_loop
    diags.coupling_residual_eta = r_eta
    diags.mid_action_residual = mid_res
    diags.action_chain_ok = chain_ok
    diags.energy_minus = e_m
    diags.energy_plus = e_p
    diags.energy_identity_residual = identity_res
    diags.end_grad_minus_input = minus.grad_norms[0]
    diags.end_grad_plus = plus.grad_norms[-1]
    diags.converged = plus.grad_norms[-1] <= controls.end_tol
    diags.eta_minus_inf = max(abs(l.tau) for l in minus.loops)
    diags.eta_plus_inf = eta_plus_inf
    diags.zeta_spread_inf = zeta_spread
    diags.contained = contained
    return out, diags


# -- second variations ------------------------------------------------------------


def _second_difference(f, eps: float) -> float:
    return (f(eps) - 2.0 * f(0.0) + f(-eps)) / (eps * eps)


def hessian_agreement(
    sys: ModelSystem,
    xhat: RabinowitzLoop,
    sigma: float = 0.0,
    probes=None,
    n_probes: int = 50,
    rng: np.random.Generator | None = None,
    eps: float = 1e-4,
    crit_tol: float = 1e-8,
) -> float:
    """Max discrepancy between the two second variations over probes.

    Each probe is (v, rho, xi): a loop tangent field, a multiplier
    direction, and an arbitrary zeta-direction loop.  The free-period
    functional sees (v, rho); its lift sees (v, rho const, xi).  Both
    second variations are central second differences of the actions;
    the lift's extra terms vanish identically, so the discrepancy is
    rounding noise.  Requires the base point to be critical.
    """
    g = gradient_rabinowitz(sys, xhat)
    if grad_norm(g, xhat.nt) > crit_tol:
        raise ValueError("hessian_agreement requires a critical base point")
    nt = xhat.nt
    lift = lift_loop(xhat, sigma)
    if probes is None:
        rng = rng or np.random.default_rng(0)
        basis = _fourier_basis(nt, 3)
        probes = []
        for _ in range(n_probes):
            v = basis @ rng.standard_normal((basis.shape[1], xhat.x.shape[1]))
            rho = float(rng.standard_normal())
            xi = basis @ rng.standard_normal(basis.shape[1])
            probes.append((v, rho, xi))

    worst = 0.0
    for v, rho, xi in probes:
        def a_free(t):
            return action_rabinowitz(
                sys, RabinowitzLoop(x=xhat.x + t * v, tau=xhat.tau + t * rho)
            )

        def a_lift(t):
            return action_extended(
                sys,
                ExtendedLoop(
                    x=lift.x + t * v, eta=lift.eta + t * rho, zeta=lift.zeta + t * xi
                ),
            )

        q_free = _second_difference(a_free, eps)
        q_lift = _second_difference(a_lift, eps)
        worst = max(worst, abs(q_free - q_lift))
    return worst


# -- automatic transversality at stationary configurations -------------------------


@dataclass
class SeedRecord:
    kind: str
    phi0: float
    dphi0: float
    rate: float


@dataclass
class AutoTransversalityReport:
    kernel_eigenvalues: np.ndarray
    kernel_dim: int
    expected_kernel_dim: int
    rstar_in_kernel: bool
    kernel_spanned_by_manifold_and_rstar: bool
    rstar_only_neutral: bool
    positive_cone_decreasing: bool
    seeds: list[SeedRecord]


def _k_tangent_vectors(sys: ModelSystem, xhat: RabinowitzLoop, basis: np.ndarray) -> np.ndarray:
    """Reduced-coordinate basis of the critical-manifold tangent at the lift.

    For an orbit loop x(t) = rot(theta t) p these are the fields
    rot(theta t) w with w in T_p Sigma; for a constant loop, the constant
    fields tangent to Sigma.  Zero eta and zeta parts.
    """
    nt, nb = basis.shape
    x = xhat.x
    p = x[0] / np.linalg.norm(x[0])
    dim = sys.dim
    # tangent basis of the sphere at p
    tangs = []
    for i in range(dim):
        e = np.zeros(dim)
        e[i] = 1.0
        w = e - np.dot(e, p) * p
        if np.linalg.norm(w) > 1e-8:
            tangs.append(w / np.linalg.norm(w))
    # orthonormalize
    q, _ = np.linalg.qr(np.array(tangs).T)
    tangs = [q[:, i] for i in range(q.shape[1]) if np.linalg.norm(q[:, i]) > 0.5][: dim - 1]

    # transport each tangent along the loop: w(t) = x(t)-frame rotation of w
    cols = []
    cos_t = x @ p            # cos(theta(t)) since |x| = 1
    sin_t = x @ (sys.jmat @ p)
    for w in tangs:
        vw = cos_t[:, None] * w + sin_t[:, None] * (sys.jmat @ w)
        coef = (basis.T @ vw) / nt
        vec = np.concatenate([coef.T.ravel(), np.zeros(2 * nb)])
        cols.append(vec / np.linalg.norm(vec))
    return np.array(cols).T


def auto_transversality_check(
    sys: ModelSystem,
    xhat: RabinowitzLoop,
    sigma: float = 0.0,
    kmax: int = 2,
    n_seeds: int = 6,
    rng: np.random.Generator | None = None,
    s_max: float = 1.0,
    kernel_tol: float = 1e-6,
) -> AutoTransversalityReport:
    """Spectral and dynamical check of the linearized matching problem.

    Builds the reduced second variation of the fixed-period action at the
    stationary lift and verifies: the kernel has the critical manifold's
    dimension plus one; the sigma-shift lies in it; the rest of the kernel
    is tangent to the critical manifold (pinned by the Morse data), so
    after that identification the sigma-shift is the only neutral
    direction.  Evolves seeds under the linearized flow and reports decay
    rates; positive-cone seeds must have strictly decreasing norm.
    """
    rng = rng or np.random.default_rng(0)
    lift = lift_loop(xhat, sigma)
    nt = lift.nt
    basis = _fourier_basis(nt, kmax)
    nb = basis.shape[1]
    hess = reduced_hessian(sys, lift, kmax=kmax)
    evals, evecs = np.linalg.eigh(hess)

    kernel_mask = np.abs(evals) <= kernel_tol
    kernel_dim = int(np.sum(kernel_mask))
    kernel = evecs[:, kernel_mask]

    dim_state = _pack_dim(lift, kmax)
    ncomp = lift.x.shape[1]
    rstar = np.zeros(dim_state)
    rstar[(ncomp + 1) * nb] = 1.0  # constant zeta direction

    h_rstar = float(np.linalg.norm(hess @ rstar))
    rstar_in_kernel = h_rstar <= kernel_tol

    ktang = _k_tangent_vectors(sys, xhat, basis)
    allowed = np.column_stack([ktang, rstar])
    q, _ = np.linalg.qr(allowed)
    resid = kernel - q @ (q.T @ kernel)
    spanned = float(np.max(np.abs(resid))) <= 1e-5 if kernel.size else True
    expected = (sys.dim - 1) + 1
    rstar_only = rstar_in_kernel and spanned and kernel_dim == expected

    # evolve seeds under dz/ds = -H z, phi(s) = |z(s)|^2
    seeds = []

    def evolve(z0, kind):
        c0 = evecs.T @ z0
        phi0 = float(z0 @ z0)
        dphi0 = float(-2.0 * z0 @ (hess @ z0))
        cs = c0 * np.exp(-evals * s_max)
        phi1 = float(cs @ cs)
        rate = 0.0 if phi0 == 0.0 or phi1 == 0.0 else -math.log(phi1 / phi0) / (2 * s_max)
        seeds.append(SeedRecord(kind=kind, phi0=phi0, dphi0=dphi0, rate=rate))

    evolve(np.zeros(dim_state), "zero")
    evolve(rstar, "rstar")
    pos = evecs[:, evals > kernel_tol]
    cone_ok = True
    for _ in range(n_seeds):
        c = rng.standard_normal(pos.shape[1])
        z = pos @ (c / np.linalg.norm(c))
        evolve(z, "positive-cone")
        cone_ok = cone_ok and seeds[-1].dphi0 < 0
    for _ in range(n_seeds):
        z = rng.standard_normal(dim_state)
        evolve(z / np.linalg.norm(z), "random")

    return AutoTransversalityReport(
        kernel_eigenvalues=evals[kernel_mask],
        kernel_dim=kernel_dim,
        expected_kernel_dim=expected,
        rstar_in_kernel=rstar_in_kernel,
        kernel_spanned_by_manifold_and_rstar=spanned,
        rstar_only_neutral=rstar_only,
        positive_cone_decreasing=cone_ok,
        seeds=seeds,
    )


# -- diagnostics stream --------------------------------------------------------------


HYBRID_DIAG_COLUMNS = (
    "side", "step", "s", "action", "grad_norm", "energy_cum",
    "coupling_residual_loop", "coupling_residual_eta",
)


def hybrid_diagnostics_to_csv(state: HybridState, file=None) -> str:
    """Per-sample rows for both halves, with the coupling residual columns."""
    r_loop, r_eta = state.coupling_residuals()
    lines = [",".join(HYBRID_DIAG_COLUMNS)]
    for side, run in (("minus", state.minus), ("plus", state.plus)):
        for i, s in enumerate(run.s):
            lines.append(
                ",".join(
                    [
                        side,
                        str(i),
                        format(s, ".17g"),
                        format(run.actions[i], ".17g"),
                        format(run.grad_norms[i], ".17g"),
                        format(run.energy_cum[i], ".17g"),
                        format(r_loop, ".17g"),
                        format(r_eta, ".17g"),
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
