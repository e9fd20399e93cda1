"""Command-line harness: solve, sweep, hard-gen, oracle, verify.

Exit codes for `solve`: 0 when the mode's objective holds, 3 when it
does not (the report is printed either way), 1 on malformed input, 2 on
an infeasible instance (no positive margin in strict mode).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bench, hard_instances, oracle, sweep, verify
from .model import CamdpError, CmdpInstance, InfeasibleInstance


def _add_solve(sub):
    p = sub.add_parser("solve", help="one generative-model solve with report JSON on stdout")
    p.add_argument("--instance", required=True, help="instance JSON path or bench:default")
    p.add_argument("--mode", choices=["relaxed", "strict"], required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--samples", type=int, required=True, help="samples per state-action pair")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--t-ceiling", type=int, default=bench.T_CEILING)
    p.add_argument("--paper-params", action="store_true",
                   help="run the published schedule verbatim (iteration counts explode)")


def _add_sweep(sub):
    p = sub.add_parser("sweep", help="run a (epsilon, N, seed) grid from a key=value spec file")
    p.add_argument("--spec", required=True)


def _add_hard_gen(sub):
    p = sub.add_parser("hard-gen", help="generate a lower-bound instance plus metadata sidecar")
    p.add_argument("--family", choices=["general", "communicating"], required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--params", default="",
                   help="comma-separated key=value generator parameters")


def _add_oracle(sub):
    p = sub.add_parser("oracle", help="solve the occupancy program of an instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--threshold", type=float, default=None)


def _add_verify(sub):
    p = sub.add_parser("verify", help="run a named property suite")
    p.add_argument("--suite", required=True,
                   help="|".join(sorted(verify.SUITES)))
    p.add_argument("--seed", type=int, default=0)


def _parse_kv(text: str) -> dict:
    out = {}
    if not text:
        return out
    for item in text.split(","):
        key, _, val = item.partition("=")
        if not val:
            raise ValueError(f"bad generator parameter {item!r}")
        out[key.strip()] = val.strip()
    return out


def cmd_solve(args) -> int:
    instance = sweep.load_instance(args.instance)
    report = bench.run_solve(
        instance, args.mode, args.epsilon, args.samples, args.seed,
        t_ceiling=args.t_ceiling, paper_params=args.paper_params,
    )
    print(report.to_json())
    return 0 if report.objective_met() else 3


def cmd_sweep(args) -> int:
    spec = sweep.parse_spec(args.spec)
    _, n_failed = sweep.run_sweep(spec)
    total = len(spec.cells())
    print(f"wrote {spec.out}: {total - n_failed}/{total} cells ok", file=sys.stderr)
    return 1 if n_failed == total else 0


def cmd_hard_gen(args) -> int:
    kv = _parse_kv(args.params)
    if args.family == "general":
        params = hard_instances.GeneralHardParams(
            n_states=int(kv.get("n_states", "13")),
            n_actions=int(kv.get("n_actions", "3")),
            B=float(kv.get("B", "5")),
            epsilon=float(kv.get("epsilon", "0.05")),
            zeta=float(kv.get("zeta", "0.25")),
            s_star=int(kv["s_star"]) if "s_star" in kv else None,
            a_star=int(kv["a_star"]) if "a_star" in kv else None,
        )
        instance = hard_instances.build_general_master(params)
        meta = {
            "family": "general",
            "params": {k: getattr(params, k) for k in (
                "n_states", "n_actions", "B", "epsilon", "zeta", "s_star", "a_star")},
            "threshold": hard_instances.HARD_B_THRESHOLD,
            "nominal_zeta": params.zeta,
            "expected_base_optimum": 0.25 if params.s_star is None else None,
        }
    else:
        S = int(kv.get("n_states", "19"))
        A = int(kv.get("n_actions", "4"))
        D = float(kv.get("diameter", "64"))
        eps = float(kv.get("epsilon", "0.05"))
        zeta = float(kv.get("zeta", "0.3"))
        k = int(kv["k"]) if "k" in kv else None
        l = int(kv.get("l", "2"))
        instance = hard_instances.build_communicating_hard(S, A, D, eps, zeta, k, l)
        meta = {
            "family": "communicating",
            "params": {"n_states": S, "n_actions": A, "diameter": D,
                       "epsilon": eps, "zeta": zeta, "k": k, "l": l},
            "nominal_zeta": zeta,
            "constants": hard_instances.communicating_constants(eps, zeta),
            "note": "leaf internals are a best-effort reconstruction",
        }
    instance.save(args.out)
    Path(str(args.out) + ".meta.json").write_text(json.dumps(meta, indent=2), encoding="utf-8")
    print(f"wrote {args.out} and {args.out}.meta.json", file=sys.stderr)
    return 0


def cmd_oracle(args) -> int:
    instance = sweep.load_instance(args.instance)
    sol = oracle.solve_camdp_lp(instance, threshold_override=args.threshold)
    print(sol.to_json())
    return 0


def cmd_verify(args) -> int:
    try:
        results = verify.run_suite(args.suite, seed=args.seed)
    except KeyError:
        print(f"unknown suite {args.suite!r}; choose from {sorted(verify.SUITES)}",
              file=sys.stderr)
        return 1
    failed = [name for name, ok, _ in results if not ok]
    for name, ok, detail in results:
        line = f"{'PASS' if ok else 'FAIL'} {args.suite}:{name}"
        if detail:
            line += f" ({detail})"
        print(line)
    return 1 if failed else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="camdp",
        description="constrained average-reward MDP benchmark harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_solve(sub)
    _add_sweep(sub)
    _add_hard_gen(sub)
    _add_oracle(sub)
    _add_verify(sub)
    args = parser.parse_args(argv)
    handlers = {
        "solve": cmd_solve,
        "sweep": cmd_sweep,
        "hard-gen": cmd_hard_gen,
        "oracle": cmd_oracle,
        "verify": cmd_verify,
    }
    try:
        return handlers[args.command](args)
    except InfeasibleInstance as e:
        print(f"infeasible: {e}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except CamdpError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
