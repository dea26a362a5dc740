"""Batch front end: index runs, gradings, flow and matching experiments,
chain algebra, and the acceptance selftest.

Exit codes: 0 success, 2 configuration errors, 3 numerical failures,
4 invariant violations (the violated invariant is named on stderr).
Outputs are byte-identical for identical configuration, seed, and thread
count; CSV uses a header row, '.' decimals, and LF line endings, JSON is
sorted-key.  The environment variable RFHLAB_THREADS caps the worker
count (this build computes within a single worker; the value is validated
and recorded in the run metadata).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import acceptance as acc
from . import gradflow as gf
from . import grading as gr
from . import hybrid as hy
from . import model as mo
from . import rsindex as rsi
from . import z2complex as z2

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_INVARIANT = 4


class ConfigError(ValueError):
    pass


def _threads() -> int:
    raw = os.environ.get("RFHLAB_THREADS", "1")
    try:
        val = int(raw)
    except ValueError as exc:
        raise ConfigError(f"RFHLAB_THREADS must be an integer, got {raw!r}") from exc
    if val < 1:
        raise ConfigError("RFHLAB_THREADS must be >= 1")
    return val


def _kv_floats(pairs, required):
    out = {}
    for item in pairs:
        if "=" not in item:
            raise ConfigError(f"expected key=value, got {item!r}")
        key, val = item.split("=", 1)
        try:
            out[key] = float(val)
        except ValueError as exc:
            raise ConfigError(f"value for {key} is not a number: {val!r}") from exc
    missing = [k for k in required if k not in out]
    if missing:
        raise ConfigError(f"missing parameters: {', '.join(missing)}")
    return out


def _load_model(path: str | None, n: int | None) -> mo.ModelSystem:
    if path:
        return mo.model_from_json(path)
    return mo.make_model(n=n or 1)


def _write_text(path: str | None, text: str):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# -- subcommands ------------------------------------------------------------------


def _cmd_index(args) -> int:
    if args.theta:
        params = _kv_floats(args.params, required=("tau", "hp", "hpp"))
        path = rsi.theta_path(params["tau"], params["hp"], params["hpp"])
    elif args.csv:
        form = rsi.theta_form() if args.form == "theta" else None
        path = rsi.load_path_csv(args.csv, form=form, tol=args.tol)
    else:
        raise ConfigError("index needs --theta with tau= hp= hpp= or --csv PATH")
    if args.delta is not None:
        path = rsi.perturbed_path(path, args.delta)
    value = rsi.rs_index(path)
    print(f"mu_rs = {value}")
    if args.out:
        if args.format == "json":
            _write_text(args.out, json.dumps(
                {"mu_rs": str(value), "twice_value": value.twice_value,
                 "seed": args.seed, "threads": _threads()},
                sort_keys=True, indent=2) + "\n")
        else:
            _write_text(args.out, "mu_rs,twice_value,seed\n"
                        f"{value},{value.twice_value},{args.seed}\n")
    return EXIT_OK


def _cmd_grade(args) -> int:
    if args.constants:
        params = _kv_floats(args.params, required=("n",))
        n = int(params["n"])
        if not 1 <= n <= 3:
            raise ConfigError("supported half-dimensions are n in {1, 2, 3}")
        sy = mo.make_model(n=n)
        comps = gr.model_components(sy, ks=())
        print(f"mu(K) = {gr.mu_K(comps[0])}")
        if args.out:
            _write_text(args.out, gr.index_report_csv(comps))
        return EXIT_OK
    if args.components:
        comps = gr.components_from_json(args.components)
    else:
        sy = _load_model(args.model, args.n)
        ks = tuple(int(s) for s in args.ks.split(",")) if args.ks else (-2, -1, 1, 2)
        comps = gr.model_components(sy, ks=ks)
    report = gr.index_report_csv(comps)
    if args.format == "json":
        rows = [line.split(",") for line in report.strip().splitlines()]
        head, data = rows[0], rows[1:]
        payload = {"seed": args.seed, "threads": _threads(),
                   "components": [dict(zip(head, r)) for r in data]}
        text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    else:
        text = report
    _write_text(args.out, text)
    return EXIT_OK


def _build_start(sy, args):
    nt = args.nt
    rng = np.random.default_rng(args.seed)
    if args.start == "orbit":
        base = gf.discrete_orbit_loop(sy, args.k, nt)
    else:
        base = gf.discrete_constant_loop(sy, nt=nt)
    if args.flavor == "extended":
        base = gf.lift_loop(base, sigma=args.sigma)
    if args.amplitude > 0:
        rate_min = 2.0 if (args.flavor == "extended" or args.start == "constants") else 0.5
        base = gf.stable_perturbation(
            sy, base, rng, kmax=args.cutoff or 1,
            amplitude=args.amplitude, rate_min=rate_min,
        )
    return base


def _cmd_flow(args) -> int:
    sy = _load_model(args.model, args.n)
    if args.loop:
        start = gf.loop_from_json(args.loop)
    else:
        start = _build_start(sy, args)
    controls = gf.IntegrateControls(
        scheme=args.scheme, eps_stop=args.tol, max_steps=args.steps,
        freq_cutoff=args.cutoff,
    )
    loop, diags = gf.integrate(sy, start, controls)
    out_text = gf.diagnostics_to_csv(diags)
    if args.format == "json":
        payload = {
            "seed": args.seed, "threads": _threads(),
            "converged": diags.converged, "stop_reason": diags.stop_reason,
            "target_component": diags.target_component,
            "action_start": diags.action_start, "action_end": diags.action_end,
            "energy_total": diags.energy_total,
            "energy_identity_residual": diags.energy_identity_residual,
        }
        out_text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    _write_text(args.out, out_text)
    if args.snapshot:
        gf.loop_to_json(loop, args.snapshot)
    print(f"flow: converged={diags.converged} target={diags.target_component} "
          f"steps={len(diags.rows) - 1}")
    return EXIT_OK


def _cmd_hybrid(args) -> int:
    sy = _load_model(args.model, args.n)
    rng = np.random.default_rng(args.seed)
    nt = args.nt
    if args.start == "orbit":
        base = gf.discrete_orbit_loop(sy, args.k, nt)
        rate_min = 0.5
    else:
        base = gf.discrete_constant_loop(sy, nt=nt)
        rate_min = 2.0
    if args.amplitude > 0:
        base = gf.stable_perturbation(sy, base, rng, kmax=args.cutoff or 1,
                                      amplitude=args.amplitude, rate_min=rate_min)
    controls = hy.HybridControls(horizon=args.horizon, freq_cutoff=args.cutoff,
                                 kappa=args.kappa)
    state = hy.initial_hybrid_state(sy, base, sigma=args.sigma, controls=controls)
    out, diags = hy.hybrid_relax(sy, state, controls)
    text = hy.hybrid_diagnostics_to_csv(out)
    if args.format == "json":
        payload = {
            "seed": args.seed, "threads": _threads(),
            "converged": diags.converged, "sweeps": diags.sweeps,
            "horizon": diags.horizon,
            "energy_minus": diags.energy_minus, "energy_plus": diags.energy_plus,
            "energy_identity_residual": diags.energy_identity_residual,
            "mid_action_residual": diags.mid_action_residual,
            "action_chain_ok": diags.action_chain_ok,
        }
        text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    _write_text(args.out, text)
    print(f"hybrid: converged={diags.converged} sweeps={diags.sweeps} "
          f"energy={diags.energy_minus + diags.energy_plus:.6g}")
    return EXIT_OK


def _cmd_complex(args) -> int:
    c, m = z2.load_instance(args.instance)
    ok, witness = z2.verify_d_squared(c)
    if not ok:
        print(f"invariant violated: boundary square nonzero at {witness}", file=sys.stderr)
        return EXIT_INVARIANT
    ranks = z2.homology(c)
    lines = ["degree,betti"]
    for k in sorted((k for k in ranks if k is not None)):
        lines.append(f"{k},{ranks[k]}")
    if None in ranks:
        lines.append(f"-,{ranks[None]}")
    text = "\n".join(lines) + "\n"
    if m is not None:
        inv = z2.phi_invert(m)
        _, p = z2.phi_matrix(m)
        _, q = z2.phi_matrix(inv)
        eye = np.eye(p.shape[0], dtype=np.uint8)
        inv_ok = np.array_equal(z2.gf2_matmul(p, q), eye)
        text += f"phi_invertible,{int(inv_ok)}\n"
        if not inv_ok:
            print("invariant violated: chain map failed to invert", file=sys.stderr)
            return EXIT_INVARIANT
    if args.format == "json":
        payload = {"betti": {str(k): v for k, v in ranks.items()},
                   "seed": args.seed, "threads": _threads()}
        text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    _write_text(args.out, text)
    return EXIT_OK


def _cmd_selftest(args) -> int:
    which = None
    if args.only:
        which = sorted(int(s) for s in args.only.split(","))
        bad = [k for k in which if k not in acc.CRITERIA]
        if bad:
            raise ConfigError(f"unknown criteria: {bad}")
    results = acc.run_criteria(which, seed=args.seed)
    for r in results:
        print(r.line())
    if args.out:
        acc.write_artifacts(results, args.out, seed=args.seed)
    if not all(r.passed for r in results):
        return EXIT_NUMERICAL
    return EXIT_OK


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rfhlab",
        description="index calculus, loop-space gradient flows, and Z2 cascade algebra",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--model", help="model system JSON file")
        p.add_argument("--n", type=int, default=1, help="model half-dimension (1..3)")
        p.add_argument("--nt", type=int, default=256, help="loop grid size")
        p.add_argument("--tol", type=float, default=1e-7, help="stop/validation tolerance")
        p.add_argument("--steps", type=int, default=10**6, help="step budget")
        p.add_argument("--seed", type=int, default=0, help="random seed")
        p.add_argument("--out", help="output path (default stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("index", help="half-integer indices of symplectic paths")
    common(p)
    p.add_argument("--theta", action="store_true", help="use the built-in unipotent path")
    p.add_argument("--csv", help="load a path from CSV")
    p.add_argument("--form", choices=("standard", "theta"), default="standard")
    p.add_argument("--delta", type=float, help="perturb the generator by -delta*I first")
    p.add_argument("params", nargs="*", help="key=value parameters (tau= hp= hpp=)")
    p.set_defaults(func=_cmd_index)

    p = sub.add_parser("grade", help="component gradings and dimension reports")
    common(p)
    p.add_argument("--constants", action="store_true", help="grade the constants component")
    p.add_argument("--components", help="component table JSON")
    p.add_argument("--ks", help="orbit multiplicities, comma separated")
    p.add_argument("params", nargs="*", help="key=value parameters (n=)")
    p.set_defaults(func=_cmd_grade)

    p = sub.add_parser("flow", help="negative gradient flow runs with diagnostics")
    common(p)
    p.add_argument("--loop", help="initial loop JSON")
    p.add_argument("--start", choices=("orbit", "constants"), default="orbit")
    p.add_argument("--flavor", choices=("extended", "rabinowitz"), default="extended")
    p.add_argument("--k", type=int, default=1, help="orbit multiplicity")
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--amplitude", type=float, default=1e-5)
    p.add_argument("--cutoff", type=int, default=1, help="Fourier cutoff (stabilizer)")
    p.add_argument("--scheme", choices=("explicit", "semi-implicit"), default="explicit")
    p.add_argument("--snapshot", help="write the final loop as JSON")
    p.set_defaults(func=_cmd_flow)

    p = sub.add_parser("hybrid", help="coupled half-cylinder relaxation")
    common(p)
    p.add_argument("--start", choices=("orbit", "constants"), default="orbit")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--amplitude", type=float, default=0.0)
    p.add_argument("--cutoff", type=int, default=1)
    p.add_argument("--horizon", type=float, default=20.0)
    p.add_argument("--kappa", type=float, default=1.0)
    p.set_defaults(func=_cmd_hybrid)

    p = sub.add_parser("complex", help="verify and reduce a chain-complex instance")
    common(p)
    p.add_argument("--instance", required=True, help="instance file (gen/bnd/phi records)")
    p.set_defaults(func=_cmd_complex)

    p = sub.add_parser("selftest", help="run the acceptance suite")
    common(p)
    p.add_argument("--only", help="comma-separated criterion numbers")
    p.set_defaults(func=_cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _threads()
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (rsi.IrregularCrossingError, rsi.ResolutionError,
            gf.StepSizeError, gf.DivergenceError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (z2.FiltrationError, z2.GradingError, z2.NotInvertibleError,
            gr.IndexArithmeticError, hy.CouplingError) as exc:
        print(f"invariant violated: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
