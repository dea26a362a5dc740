"""Acceptance suite: one callable per criterion, exact where promised.

Each criterion returns an AcceptanceResult with a pass flag and a details
dict of deterministic values (no timings inside details, so artifact
files built from them are byte-stable for a fixed seed).
"""

from __future__ import annotations

import filecmp
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import gradflow as gf
from . import grading as gr
from . import hybrid as hy
from . import model as mo
from . import rsindex as rsi
from . import z2complex as z2
from .rsindex import HalfInteger
from .symlin import random_symmetric


@dataclass
class AcceptanceResult:
    criterion: int
    name: str
    passed: bool
    elapsed: float
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.criterion}: {self.name} ({self.elapsed:.2f}s)"


def _timed(criterion, name, fn):
    t0 = time.perf_counter()
    passed, details = fn()
    return AcceptanceResult(
        criterion=criterion, name=name, passed=bool(passed),
        elapsed=time.perf_counter() - t0, details=details,
    )


# -- 1: index anchor ------------------------------------------------------------


def criterion_1():
    def run():
        values = {}
        ok = True
        for tau in (-2.0, 1.0, 5.0):
            for hp in (0.5, 1.0, 2.0):
                for hpp in (-1.0, 1.0):
                    v = rsi.rs_index(rsi.theta_path(tau, hp, hpp))
                    values[f"tau={tau},hp={hp},hpp={hpp}"] = v.twice_value
                    ok = ok and v.twice_value == 0
        return ok, {"n_cases": len(values), "all_zero": all(v == 0 for v in values.values())}

    return _timed(1, "unipotent 4x4 path index vanishes on the parameter grid", run)


# -- 2: perturbation shift -------------------------------------------------------


def criterion_2():
    def run():
        base = rsi.theta_path(2.0 * np.pi, 1.0, 1.0)
        i0 = rsi.rs_index(base)
        shifts = {}
        ok = i0.twice_value == 0
        for delta in (1e-3, -1e-3):
            v = rsi.rs_index(rsi.perturbed_path(base, delta))
            shift = (v - i0).twice_value / 2.0
            shifts[f"delta={delta:+.0e}"] = shift
            ok = ok and shift == -np.sign(delta)
        return ok, {"base_index": i0.twice_value / 2.0, **shifts}

    return _timed(2, "generator shift moves the index by -sgn(delta) (dim 2 kernel)", run)


# -- 3: block additivity -----------------------------------------------------------


def _random_block_path(rng):
    kind = rng.integers(0, 3)
    if kind < 2:
        angle = float(rng.uniform(-3 * np.pi, 3 * np.pi))
        return rsi.rotation_path(1, angle, n_samples=385)
    a = random_symmetric(2, rng, 1.0)
    b = random_symmetric(2, rng, 1.0)
    phase = float(rng.uniform(0, 2 * np.pi))
    return rsi.path_from_generator(
        lambda t: a + np.sin(2 * np.pi * t + phase) * b, 2, n_steps=384
    )


def criterion_3(n_pairs: int = 200, seed: int = 0):
    def run():
        rng = np.random.default_rng(seed)
        done = 0
        failures = 0
        attempts = 0
        while done < n_pairs and attempts < 10 * n_pairs:
            attempts += 1
            p1 = _random_block_path(rng)
            p2 = _random_block_path(rng)
            try:
                lhs = rsi.rs_index(rsi.block_diag(p1, p2))
                rhs = rsi.rs_index(p1) + rsi.rs_index(p2)
            except (rsi.IrregularCrossingError, rsi.ResolutionError):
                continue
            if lhs.twice_value != rhs.twice_value:
                failures += 1
            done += 1
        return failures == 0 and done == n_pairs, {
            "pairs": done, "failures": failures, "attempts": attempts,
        }

    return _timed(3, "index additive over block-diagonal joins (200 random pairs)", run)


# -- 4: grading -----------------------------------------------------------------------


def criterion_4():
    def run():
        details = {}
        ok = True
        for n in (1, 2, 3):
            sy = mo.make_model(n=n)
            comps = gr.model_components(sy, ks=(-2, -1, 1, 2))
            const = comps[0]
            ok = ok and gr.mu_K(const) == 1 - n
            details[f"mu_constants_n{n}"] = gr.mu_K(const)
            for c in comps:
                ok = ok and gr.mu_lambda(c) == gr.mu_K(c) - 1
            for g in gr.model_generators(comps):
                ok = ok and g.mu_f == g.mu_f_rf
            details[f"mu_K_orbits_n{n}"] = ",".join(
                str(gr.mu_K(c)) for c in comps[1:]
            )
        return ok, details

    return _timed(4, "constants grading 1-n; mu(Lambda)=mu(K)-1; generator gradings agree", run)


# -- 5: dimension calculus --------------------------------------------------------------


def _random_component(rng, ident: str) -> gr.CriticalComponent:
    n = int(rng.integers(1, 4))
    dim_k = int(rng.integers(0, 2 * n))
    twice = int(rng.integers(-12, 13))
    twice += (twice - (dim_k - 1)) % 2  # make mu(K) and mu(Lambda) integers
    return gr.CriticalComponent(
        id=ident, kind="orbit", action=float(rng.uniform(-5, 5)),
        dim_k=dim_k, n=n, mu_rs=HalfInteger(twice),
    )


def criterion_5(n_cases: int = 100, seed: int = 1):
    def run():
        rng = np.random.default_rng(seed)
        ok = True
        for case in range(n_cases):
            lo_c = _random_component(rng, f"lo{case}")
            up_c = _random_component(rng, f"up{case}")
            lo = gr.GradedGenerator(lo_c, int(rng.integers(0, lo_c.dim_k + 1)))
            up = gr.GradedGenerator(up_c, int(rng.integers(0, up_c.dim_k + 1)))
            for mode in ("extended", "rabinowitz"):
                cross = (
                    gr.cascade_dims(mode, lo, up_c)
                    + gr.cascade_dims(mode, lo_c, up)
                    - gr.cascade_dims(mode, lo_c, up_c)
                )
                ok = ok and cross == gr.cascade_dims(mode, lo, up)
            # matching problem: component-level value minus the Morse
            # codimensions equals the generator-level value
            hybrid_comp = gr.cascade_dims("hybrid", lo_c, up_c)
            hybrid_gen = gr.cascade_dims("hybrid", lo, up)
            corr = (lo_c.dim_k - lo.ind_f) + (up.ind_f + 1)
            ok = ok and hybrid_comp - corr == hybrid_gen
            ok = ok and hybrid_gen == lo.mu_f_rf - up.mu_f
        return ok, {"cases": n_cases}

    return _timed(5, "cascade dimension formulas satisfy the cross identities", run)


# -- 6: hybrid index branch consistency ----------------------------------------------------


def criterion_6(n_cases: int = 100, seed: int = 2):
    def run():
        rng = np.random.default_rng(seed)
        ok = True
        for case in range(n_cases):
            mu_k = int(rng.integers(-8, 9))
            mu_lam = int(rng.integers(-8, 9))
            dim_lam = int(rng.integers(1, 7))
            totals = []
            for sign in (1, -1):
                twice_a = 2 * (mu_k - (0 if sign > 0 else 1))
                nu_w1 = 1
                idx, mk, ml = gr.assemble_hybrid_index(
                    HalfInteger(twice_a + nu_w1), nu_w1,
                    HalfInteger(-2 * mu_lam - dim_lam), dim_lam, sign,
                )
                ok = ok and (mk, ml) == (mu_k, mu_lam)
                totals.append(idx)
            ok = ok and totals[0] == totals[1] == mu_k - mu_lam - dim_lam
        return ok, {"cases": n_cases}

    return _timed(6, "half-cylinder index equal for both regularity-scalar signs", run)


# -- 7: flow structure ------------------------------------------------------------------------


def _flow_run_specs(sy, nt, seed):
    """The 20 randomized perturbed starts: component, flavor, cone, controls."""
    specs = []
    for i in range(8):
        base = gf.lift_loop(gf.discrete_orbit_loop(sy, 1 if i % 2 else -1, nt), sigma=0.1 * i)
        specs.append((base, dict(kmax=1, amplitude=1e-5, rate_min=2.0),
                      gf.IntegrateControls(freq_cutoff=1), seed + 200 + i))
    for i in range(4):
        base = gf.lift_loop(gf.discrete_constant_loop(sy, nt=nt), sigma=-0.2 * i)
        specs.append((base, dict(kmax=1, amplitude=1e-4, rate_min=2.0),
                      gf.IntegrateControls(freq_cutoff=1), seed + 300 + i))
    for i in range(4):
        specs.append((gf.discrete_constant_loop(sy, nt=nt),
                      dict(kmax=1, amplitude=1e-4, rate_min=2.0),
                      gf.IntegrateControls(freq_cutoff=1), seed + 400 + i))
    # the free-period orbit saddle has a single unit-rate stable direction;
    # its rounding-noise floor sits near 3e-7, so these runs stop at 1e-6
    for i in range(4):
        specs.append((gf.discrete_orbit_loop(sy, 1, nt),
                      dict(kmax=1, amplitude=3e-6, rate_min=0.5),
                      gf.IntegrateControls(freq_cutoff=1, eps_stop=1e-6), seed + 500 + i))
    return specs


def criterion_7(seed: int = 0, nt: int = 256):
    def run():
        sy = mo.make_model(n=1)
        ok = True
        worst = {
            "energy_identity": 0.0, "eta_residual": 0.0, "zeta_drift": 0.0,
        }
        n_conv = 0
        for base, cone, controls, s in _flow_run_specs(sy, nt, seed):
            start = gf.stable_perturbation(sy, base, np.random.default_rng(s), **cone)
            _, d = gf.integrate(sy, start, controls)
            run_ok = (
                d.converged
                and d.actions_non_increasing
                and d.energy_identity_residual <= 1e-6
                and d.max_eta_residual <= 1e-6
                and d.max_zeta_drift <= 1e-10
                and d.lem1_always
                and d.contained_always
            )
            ok = ok and run_ok
            n_conv += int(d.converged)
            worst["energy_identity"] = max(worst["energy_identity"], d.energy_identity_residual)
            worst["eta_residual"] = max(worst["eta_residual"], d.max_eta_residual)
            worst["zeta_drift"] = max(worst["zeta_drift"], d.max_zeta_drift)
        details = {"runs": 20, "converged": n_conv}
        details.update({k: format(v, ".3e") for k, v in worst.items()})
        return ok, details

    return _timed(7, "20 perturbed flow runs: descent, energy, ODE, drift, threshold, containment", run)


# -- 8: hybrid stationary ------------------------------------------------------------------------


def criterion_8(seed: int = 0, nt: int = 256):
    def run():
        sy = mo.make_model(n=1)
        orb = gf.discrete_orbit_loop(sy, 1, nt)

        state = hy.initial_hybrid_state(sy, orb, sigma=0.5)
        out, d = hy.hybrid_relax(sy, state)
        fixed_ok = (
            d.converged
            and abs(d.energy_minus) <= 1e-12
            and abs(d.energy_plus) <= 1e-12
            and d.mid_action_residual <= 1e-12
            and float(np.max(np.abs(out.plus_end.x - orb.x))) <= 1e-9
        )

        worst = hy.hessian_agreement(sy, orb, sigma=0.5, n_probes=50,
                                     rng=np.random.default_rng(seed + 1))
        hess_ok = worst <= 1e-5

        rep_orbit = hy.auto_transversality_check(sy, orb, sigma=0.5, kmax=2,
                                                 rng=np.random.default_rng(seed + 2))
        rep_const = hy.auto_transversality_check(
            sy, gf.discrete_constant_loop(sy, nt=nt), sigma=0.5, kmax=2,
            rng=np.random.default_rng(seed + 3),
        )
        neutral_ok = (
            rep_orbit.rstar_only_neutral and rep_orbit.positive_cone_decreasing
            and rep_const.rstar_only_neutral and rep_const.positive_cone_decreasing
        )

        return fixed_ok and hess_ok and neutral_ok, {
            "stationary_energy": format(d.energy_minus + d.energy_plus, ".3e"),
            "hessian_agreement": format(worst, ".3e"),
            "orbit_kernel_dim": rep_orbit.kernel_dim,
            "constants_kernel_dim": rep_const.kernel_dim,
            "rstar_only": rep_orbit.rstar_only_neutral and rep_const.rstar_only_neutral,
        }

    return _timed(8, "stationary matching: fixed point, Hessian equality, sigma-shift only neutral", run)


# -- 9: algebra ------------------------------------------------------------------------------------


def criterion_9(seed: int = 3):
    def run():
        rng = np.random.default_rng(seed)
        ok = True
        for _ in range(50):
            c = z2.random_filtered_complex(rng, n_gens=int(rng.integers(4, 17)))
            good, _ = z2.verify_d_squared(c)
            ok = ok and good
        for _ in range(100):
            n = int(rng.integers(4, 65))
            m = z2.random_triangular(rng, n, density=0.35)
            inv = z2.phi_invert(m)
            _, p = z2.phi_matrix(m)
            _, q = z2.phi_matrix(inv)
            eye = np.eye(n, dtype=np.uint8)
            ok = ok and np.array_equal(z2.gf2_matmul(p, q), eye)
            ok = ok and np.array_equal(z2.gf2_matmul(q, p), eye)
        for _ in range(20):
            c_src = z2.random_filtered_complex(rng, n_gens=12)
            gens = [z2.Generator(g.id, None, g.action) for g in c_src.generators]
            c_src2 = z2.FilteredZ2Complex(gens, list(c_src.pairs))
            m = z2.ChainMapMatrix(gens, [
                (a.id, b.id)
                for a in gens for b in gens
                if a.action > b.action + 1e-9 and rng.random() < 0.3
            ])
            order, p = z2.phi_matrix(m)
            _, dmat = z2.boundary_matrix(c_src2)
            _, q = z2.phi_matrix(z2.phi_invert(m))
            d_conj = z2.gf2_matmul(z2.gf2_matmul(p, dmat), q)
            pairs = [(order[s], order[t]) for t, s in np.argwhere(d_conj == 1)]
            c_tgt = z2.FilteredZ2Complex(gens, pairs)
            good, _ = z2.verify_chain_map(m, c_src2, c_tgt)
            ok = ok and good
        return ok, {"complexes": 50, "inversions": 100, "chain_maps": 20}

    return _timed(9, "Z2 algebra: square-zero boundaries, exact inversion, commuting maps", run)


# -- 10: determinism ---------------------------------------------------------------------------------


QUICK_SET = (1, 2, 4, 5, 6, 9)


def criterion_10(workdir: str, seed: int = 0):
    """Two artifact-writing selftest runs with one seed are byte-identical."""

    def run():
        dirs = []
        for tag in ("run_a", "run_b"):
            out = os.path.join(workdir, tag)
            os.makedirs(out, exist_ok=True)
            results = run_criteria(QUICK_SET, seed=seed)
            write_artifacts(results, out, seed=seed)
            dirs.append(out)
        names = sorted(os.listdir(dirs[0]))
        same = names == sorted(os.listdir(dirs[1]))
        for name in names:
            same = same and filecmp.cmp(
                os.path.join(dirs[0], name), os.path.join(dirs[1], name), shallow=False
            )
        return same, {"artifacts": ",".join(names)}

    return _timed(10, "repeated selftest runs produce byte-identical artifacts", run)


# -- driver -------------------------------------------------------------------------------------------


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
}


def run_criteria(which=None, seed: int = 0):
    """Run the requested criteria (default: all of 1..9) in order."""
    which = sorted(which) if which else sorted(CRITERIA)
    results = []
    for k in which:
        fn = CRITERIA[k]
        if k in (3,):
            results.append(fn(seed=seed))
        elif k in (5,):
            results.append(fn(seed=seed + 1))
        elif k in (6,):
            results.append(fn(seed=seed + 2))
        elif k in (7, 8):
            results.append(fn(seed=seed))
        elif k in (9,):
            results.append(fn(seed=seed + 3))
        else:
            results.append(fn())
    return results


def write_artifacts(results, out_dir: str, seed: int) -> list[str]:
    """Deterministic CSV + JSON report files (no timings inside)."""
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "selftest_report.csv")
    with open(csv_path, "w") as fh:
        fh.write("criterion,name,passed,seed\n")
        for r in results:
            fh.write(f"{r.criterion},{r.name},{int(r.passed)},{seed}\n")
    json_path = os.path.join(out_dir, "selftest_details.json")
    import json

    payload = {
        "seed": seed,
        "results": [
            {
                "criterion": r.criterion,
                "name": r.name,
                "passed": r.passed,
                "details": {k: str(v) for k, v in sorted(r.details.items())},
            }
            for r in results
        ],
    }
    with open(json_path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return [csv_path, json_path]
