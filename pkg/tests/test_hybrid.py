import numpy as np
import pytest

from rfhlab.gradflow import (
    ExtendedLoop,
    discrete_constant_loop,
    discrete_orbit_loop,
    lift_loop,
    stable_perturbation,
)
from rfhlab.hybrid import (
    HYBRID_DIAG_COLUMNS,
    HybridControls,
    auto_transversality_check,
    couple_loops,
    hessian_agreement,
    hybrid_diagnostics_to_csv,
    hybrid_relax,
    initial_hybrid_state,
)
from rfhlab.model import make_model

NT = 256


@pytest.fixture(scope="module")
def sys1():
    return make_model(n=1)


@pytest.fixture(scope="module")
def orbit(sys1):
    return discrete_orbit_loop(sys1, 1, NT)


def test_coupling_projection_is_exact(sys1, orbit):
    plus = couple_loops(orbit, 0.7)
    assert np.array_equal(plus.x, orbit.x)
    assert np.all(plus.eta == orbit.tau)
    assert np.all(plus.zeta == 0.7)


def test_stationary_input_is_fixed_point_with_zero_energy(sys1, orbit):
    state = initial_hybrid_state(sys1, orbit, sigma=0.5)
    out, d = hybrid_relax(sys1, state)
    assert d.converged
    assert d.energy_minus == 0.0 and d.energy_plus == 0.0
    assert d.mid_action_residual == 0.0
    assert d.action_chain_ok
    assert np.max(np.abs(out.plus_end.x - orbit.x)) == 0.0
    assert float(np.mean(out.plus_end.zeta)) == pytest.approx(0.5)


def test_mid_action_equality_holds_exactly(sys1, orbit):
    # eta+ (0, .) is constant in t, so the middle quadrature term of the
    # fixed-period action vanishes identically at the matching time
    rng = np.random.default_rng(1)
    pert = stable_perturbation(sys1, orbit, rng, kmax=1, amplitude=3e-6, rate_min=0.5)
    state = initial_hybrid_state(sys1, pert, sigma=0.2)
    out, d = hybrid_relax(sys1, state)
    assert d.mid_action_residual == 0.0
    assert d.coupling_residual_loop == 0.0
    assert d.coupling_residual_eta == 0.0


def test_perturbed_stationary_reconverges_with_identities(sys1, orbit):
    rng = np.random.default_rng(42)
    pert = stable_perturbation(sys1, orbit, rng, kmax=1, amplitude=3e-6, rate_min=0.5)
    state = initial_hybrid_state(sys1, pert, sigma=0.5)
    out, d = hybrid_relax(sys1, state)
    assert d.converged
    assert d.action_chain_ok
    assert d.energy_identity_residual <= 1e-5
    assert d.contained
    # back on the same component, sigma preserved up to the free shift
    assert np.max(np.abs(out.plus_end.x - orbit.x)) <= 1e-5
    assert np.max(np.abs(out.plus_end.eta - orbit.tau)) <= 1e-5
    assert float(np.mean(out.plus_end.zeta)) == pytest.approx(0.5, abs=1e-9)


def test_kappa_coupling_hook(sys1, orbit):
    controls = HybridControls(kappa=0.5)
    state = initial_hybrid_state(sys1, orbit, sigma=0.0, controls=controls)
    assert np.all(state.plus.loops[0].eta == 0.5 * orbit.tau)


def test_hessian_agreement_random_probes(sys1, orbit):
    worst = hessian_agreement(sys1, orbit, sigma=0.3, n_probes=50,
                              rng=np.random.default_rng(2))
    assert worst <= 1e-5


def test_hessian_agreement_trivial_probes(sys1, orbit):
    rng = np.random.default_rng(3)
    nt = orbit.nt
    zero_v = np.zeros_like(orbit.x)
    xi = rng.standard_normal(nt)
    # degenerate direction: both second variations vanish
    assert hessian_agreement(sys1, orbit, 0.3, probes=[(zero_v, 0.0, xi)]) <= 1e-12
    # direction along the critical manifold (phase shift): Morse-Bott kernel
    dx = (np.roll(orbit.x, -1, axis=0) - np.roll(orbit.x, 1, axis=0)) * (nt / 2.0)
    assert hessian_agreement(sys1, orbit, 0.3, probes=[(dx, 0.0, np.zeros(nt))]) <= 1e-5


def test_hessian_agreement_requires_critical_base(sys1, orbit):
    bad = type(orbit)(x=orbit.x * 1.05, tau=orbit.tau)
    with pytest.raises(ValueError):
        hessian_agreement(sys1, bad, probes=[(np.zeros_like(orbit.x), 0.0,
                                              np.zeros(orbit.nt))])


def test_auto_transversality_orbit(sys1, orbit):
    rep = auto_transversality_check(sys1, orbit, sigma=0.2, kmax=2,
                                    rng=np.random.default_rng(4))
    assert rep.kernel_dim == rep.expected_kernel_dim == 2
    assert rep.rstar_in_kernel
    assert rep.kernel_spanned_by_manifold_and_rstar
    assert rep.rstar_only_neutral
    assert rep.positive_cone_decreasing
    zero = [s for s in rep.seeds if s.kind == "zero"][0]
    assert zero.phi0 == 0.0 and zero.dphi0 == 0.0
    rstar = [s for s in rep.seeds if s.kind == "rstar"][0]
    assert abs(rstar.dphi0) <= 1e-9 and abs(rstar.rate) <= 1e-6
    for s in rep.seeds:
        if s.kind == "positive-cone":
            assert s.dphi0 < 0 and s.rate > 0


def test_auto_transversality_constants(sys1):
    rep = auto_transversality_check(sys1, discrete_constant_loop(sys1, nt=NT),
                                    sigma=-0.1, kmax=2,
                                    rng=np.random.default_rng(5))
    assert rep.kernel_dim == 2  # Sigma tangent + sigma line for n = 1
    assert rep.rstar_only_neutral


def test_auto_transversality_higher_dimension():
    sy = make_model(n=2)
    orbit = discrete_orbit_loop(sy, 1, 128)
    rep = auto_transversality_check(sy, orbit, sigma=0.0, kmax=2,
                                    rng=np.random.default_rng(6))
    # kernel = critical-manifold tangents (2n - 1 = 3) plus the sigma line
    assert rep.kernel_dim == rep.expected_kernel_dim == 4
    assert rep.rstar_only_neutral


def test_hybrid_csv_schema(sys1, orbit):
    state = initial_hybrid_state(sys1, orbit, sigma=0.5)
    out, _ = hybrid_relax(sys1, state)
    text = hybrid_diagnostics_to_csv(out)
    lines = text.splitlines()
    assert lines[0] == ",".join(HYBRID_DIAG_COLUMNS)
    sides = {line.split(",")[0] for line in lines[1:]}
    assert sides == {"minus", "plus"}


def test_horizon_doubles_until_plus_end_relaxes(sys1, orbit):
    rng = np.random.default_rng(7)
    pert = stable_perturbation(sys1, orbit, rng, kmax=1, amplitude=3e-6, rate_min=0.5)
    controls = HybridControls(horizon=0.5, max_doublings=6)
    state = initial_hybrid_state(sys1, pert, sigma=0.1, controls=controls)
    out, d = hybrid_relax(sys1, state, controls)
    assert d.converged
    assert d.horizon > 0.5  # at least one doubling happened
    assert d.sweeps >= 2
