"""Command line entry point: ``hybridcomp {simulate,sweep,inspect,oracle}``."""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .baselines import METHODS, run_method
from .bcd import FEAS_TOL, InfeasibleInstanceError, complexity_estimate
from .config import PRESETS, ConfigError, SystemConfig, dump_config, get_preset, load_config
from .harness import UsageError, emit_csv, emit_plot, load_sweep, run_sweep
from .model import check_feasibility, energy
from .scenario import build_scenario

EXIT_OK, EXIT_INFEASIBLE, EXIT_CONFIG, EXIT_IO = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which here means "infeasible"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hybridcomp", description="Energy-minimized hybrid AirComp / edge offloading")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--preset", choices=sorted(PRESETS), default="desk")
        sp.add_argument("--config", type=Path, help="YAML overrides on top of the preset")
        sp.add_argument("--out", type=Path, default=Path("out"))

    s = sub.add_parser("simulate", help="solve one scenario with one method")
    common(s)
    s.add_argument("--seed", type=_seed, default=None)
    s.add_argument("--method", choices=METHODS, default="bcd")
    s.add_argument("--no-timing", action="store_true", help="write wall_ms as 0 for byte-stable traces")

    w = sub.add_parser("sweep", help="run a sweep spec file over seeds and methods")
    common(w)
    w.add_argument("spec", type=Path)
    w.add_argument("--jobs", type=int, default=1)
    w.add_argument("--no-timing", action="store_true", help="write wall_ms as 0 for byte-stable CSVs")
    w.add_argument("--no-plot", action="store_true")

    i = sub.add_parser("inspect", help="pretty-print a trace file")
    i.add_argument("trace", type=Path)

    o = sub.add_parser("oracle", help="run the independent reference checks")
    common(o)
    o.add_argument("--seed", type=_seed, default=0)
    o.add_argument("--which", choices=("mse", "eta", "kernel", "tiny", "all"), default="all")
    return p


def _config(args) -> SystemConfig:
    base = get_preset(args.preset)
    return load_config(args.config, base=base) if args.config else base


def cmd_simulate(args) -> int:
    cfg = _config(args)
    seed = cfg.rng_seed if args.seed is None else args.seed
    scenario = build_scenario(cfg, seed)
    args.out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        d, trace = run_method(args.method, cfg, scenario, seed)
    except InfeasibleInstanceError as exc:
        print(f"infeasible instance ({exc.family}): {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    ms = (time.perf_counter() - t0) * 1e3
    e = energy(cfg, d)
    rep = check_feasibility(cfg, scenario, d, tol=FEAS_TOL)
    stem = args.out / f"{args.method}_seed{seed}"
    dump_config(cfg, args.out / "config.yaml")
    scenario.save(stem.with_suffix(".scenario.json"))
    d.save(stem.with_suffix(".decisions.json"))
    trace.to_jsonl(stem.with_suffix(".trace.jsonl"), timing=not args.no_timing)
    summary = {
        "method": args.method, "seed": seed, "energy": e.to_dict(), "feasibility": rep.to_dict(),
        "iterations": trace.iterations, "termination": trace.termination,
        "wall_ms": 0.0 if args.no_timing else ms,
        "complexity": complexity_estimate(cfg, max(trace.iterations, 1)).to_dict(),
    }
    stem.with_suffix(".summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True))
    print(f"{args.method} seed={seed}: E_total={e.total:.6g} J "
          f"(edge {e.e_edge_tran:.4g}, aircomp {e.e_aircomp_tran:.4g}, comp {e.e_comp:.4g}) "
          f"feasible={rep.feasible} iterations={trace.iterations} ({trace.termination})")
    return EXIT_OK if rep.feasible else EXIT_INFEASIBLE


def cmd_sweep(args) -> int:
    cfg = _config(args)
    spec = load_sweep(args.spec)
    args.out.mkdir(parents=True, exist_ok=True)
    rows = run_sweep(cfg, spec, jobs=max(1, args.jobs), timing=not args.no_timing)
    path = emit_csv(rows, args.out / f"sweep_{spec.param}.csv")
    print(f"wrote {len(rows)} rows to {path}")
    if not args.no_plot and any(r.feasible for r in rows):
        svg, script = emit_plot(rows, spec.param, args.out)
        print(f"wrote {svg} and {script}")
    return EXIT_OK


def cmd_inspect(args) -> int:
    try:
        lines = [json.loads(x) for x in args.trace.read_text().splitlines() if x.strip()]
    except json.JSONDecodeError as exc:
        print(f"I/O error: {args.trace} is not a trace file ({exc})", file=sys.stderr)
        return EXIT_IO
    for rec in lines:
        if "termination" in rec:
            print(f"termination: {rec['termination']}")
            continue
        e = rec["energy"]
        worst = max(rec["residuals"], key=rec["residuals"].get)
        status = " ".join(f"{k}={v}" for k, v in sorted(rec["statuses"].items())) or "-"
        print(f"[{rec['method']}] it {rec['iteration']:3d}  E={e['total']:.6e} J  "
              f"feasible={rec['feasible']}  worst={worst}:{rec['residuals'][worst]:.1e}  {status}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    from . import oracles
    from .kernel import ConvexProgram, convex_kernel_minimize
    from .model import mse_analytic, mse_monte_carlo
    from .scenario import stream
    from .subsolvers import eta_closed_form

    cfg = _config(args)
    rng = stream(args.seed, 7)
    ok_all = True
    which = args.which

    if which in ("mse", "eta", "all"):
        small = cfg.replace(num_aircomp_J=3, num_edge_K=2, num_slots_I=1, mse_threshold_zeta=1e9)
        sc = build_scenario(small, args.seed)
        d = _random_decisions(small, rng)
        d.eta[0] = eta_closed_form(sc, d, 0)
        if which in ("mse", "all"):
            mc = mse_monte_carlo(sc, d, 0, 200_000, rng)
            an = mse_analytic(sc, d, 0)
            ok = abs(mc - an) <= 0.02 * an
            ok_all &= ok
            print(f"mse    analytic={an:.6g} monte-carlo={mc:.6g}  {'PASS' if ok else 'FAIL'}")
        if which in ("eta", "all"):
            _, grid = oracles.eta_grid_search(sc, d, 0, d.eta[0])
            an = mse_analytic(sc, d, 0)
            ok = grid >= an - 1e-8
            ok_all &= ok
            print(f"eta    closed-form MSE={an:.6g} best grid MSE={grid:.6g}  {'PASS' if ok else 'FAIL'}")
    if which in ("kernel", "all"):
        P, q, G, h = oracles.random_qp(rng, 4)
        _, ref = oracles.qp_active_set(P, q, G, h)
        prog = ConvexProgram(lambda x: (0.5 * x @ P @ x + q @ x, P @ x + q, P), 4, G=G, h=h)
        res = convex_kernel_minimize(prog, np.zeros(4))
        ok = abs(res.fun - ref) <= 1e-6
        ok_all &= ok
        print(f"kernel interior-point={res.fun:.10g} active-set={ref:.10g}  {'PASS' if ok else 'FAIL'}")
    if which in ("tiny", "all"):
        tiny = cfg.replace(num_slots_I=2, num_aircomp_J=2, num_edge_K=2, horizon_T=cfg.slot_duration * 2)
        sc = build_scenario(tiny, args.seed)
        grid, _ = oracles.brute_force_energy(tiny, sc, points=12)
        try:
            d, _ = run_method("bcd", tiny, sc, args.seed)
            e = energy(tiny, d).total
        except InfeasibleInstanceError:
            e = float("inf")
        ok = e <= grid * 1.05
        ok_all &= ok
        print(f"tiny   bcd={e:.6g} grid={grid:.6g}  {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok_all else 1


def _random_decisions(cfg: SystemConfig, rng):
    from .model import DecisionSet

    J, K, I = cfg.num_aircomp_J, cfg.num_edge_K, cfg.num_slots_I
    d = DecisionSet.zeros(J, K, I)
    d.alpha = rng.dirichlet(np.ones(K), size=I).T
    d.p = rng.uniform(0, cfg.p_max_edge, (K, I))
    d.b = np.sqrt(cfg.p_max_aircomp) * rng.uniform(0.1, 1, (J, I)) * np.exp(2j * np.pi * rng.uniform(size=(J, I)))
    return d


COMMANDS = {"simulate": cmd_simulate, "sweep": cmd_sweep, "inspect": cmd_inspect, "oracle": cmd_oracle}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, UsageError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
