"""Command-line front end.

Every subcommand writes one JSON report.  Exit codes: 0 success, 1 usage
error, 2 input parse error, 3 numerical failure, 4 the algorithm returned
Fail (the report is still written).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
import time

import numpy as np

from . import __version__
from .coherence import coherence_report
from .deflation import rank_k_approx
from .errors import ParseError
from .lowerbound import attack_demo
from .matrix import RectMatrix, SymmetricMatrix, dilate, exact_factorization, matvec
from .mmio import FORMATS, ingest
from .power import PpiConfig, choose_T, ppi, search_C
from .privacy import NoiseLedger, PrivacyBudget, make_rng, private_sigma1_upper
from .sensitivity import mu_k_power_bound, power_gap_estimate

SCHEMA_VERSION = 1
SEED_ENV = "DPSPECTRA_SEED"
# Share of epsilon spent on the private sigma_1 bound when --rounds is omitted.
ROUNDS_EPS_SHARE = 0.1

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_NUMERIC, EXIT_FAIL = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _jsonable(obj):
    """Plain JSON types; non-finite floats become the strings inf, -inf, nan."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isfinite(v):
            return v
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return obj


def dumps_report(report) -> str:
    # json writes floats with repr, the shortest string that round-trips.
    return json.dumps(_jsonable(report), indent=2, allow_nan=False) + "\n"


def write_atomic(path, text):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".dpspectra-", suffix=".json", dir=d)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _entry(text):
    try:
        s, t = (int(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected 's,t' with 1-based integer indices") from None
    return s, t


def _float_list(text):
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help=f"RNG seed (falls back to ${SEED_ENV}, then fresh entropy)")
    common.add_argument("--output", "-o", help="report path (default: stdout)")
    common.add_argument(
        "--unsafe-with-oracle",
        "--with-oracle",
        dest="with_oracle",
        action="store_true",
        help="add exact-oracle comparisons; the report is marked non-private",
    )
    common.add_argument(
        "--unsafe-zero-noise",
        dest="zero_noise",
        action="store_true",
        help="run with epsilon = infinity (no noise); the report is marked non-private",
    )

    mat = argparse.ArgumentParser(add_help=False)
    mat.add_argument("--matrix", required=True, help="Matrix Market (.mtx) or headerless CSV file")
    mat.add_argument("--format", choices=FORMATS, help="input format (guessed from the file when omitted)")

    budget = argparse.ArgumentParser(add_help=False)
    budget.add_argument("--epsilon", type=float, default=1.0)
    budget.add_argument("--delta", type=float, default=1e-6)

    p = _Parser(prog="dpspectra", description="Differentially private spectral approximation tools.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("coherence", parents=[common, mat], help="coherence of the input (non-private)")
    c.add_argument("--k", type=int, action="append", default=[], help="also report mu_k (repeatable)")
    c.add_argument("--include-null", action="store_true", help="count null-space basis columns")

    for name, helptext in (("ppi", "private top eigenvector"), ("rankk", "private rank-k approximation")):
        q = sub.add_parser(name, parents=[common, mat, budget], help=helptext)
        q.add_argument("--rounds", "-T", type=int, help="iteration count (default: from a private sigma_1 bound)")
        q.add_argument("--coherence-bound", "--c", dest="C", type=float, help="coherence bound C (default: n)")
        q.add_argument("--no-gate", action="store_true", help="disable the coherence gate (non-private)")
        if name == "ppi":
            q.add_argument("--search-c", action="store_true", help="search C over 1, 2, 4, ..., n")
        else:
            q.add_argument("--k", type=int, required=True)

    lb = sub.add_parser("lowerbound-demo", parents=[common, budget], help="reconstruction attack on hard instances")
    lb.add_argument("--n", type=int, default=256)
    lb.add_argument("--c", dest="C", type=float, default=16.0)
    lb.add_argument("--trials", type=int, default=20)
    lb.add_argument("--rounds", "-T", type=int)

    sp = sub.add_parser("sensitivity-probe", parents=[common, mat], help="Monte-Carlo power-gap probe (non-private)")
    sp.add_argument("--q", type=int, required=True)
    sp.add_argument("--k", type=int, default=1)
    sp.add_argument("--entry", type=_entry, default=(1, 1), help="perturbed entry 's,t' (1-based)")
    sp.add_argument("--trials", type=int, default=200)

    sw = sub.add_parser("sweep", parents=[common, mat], help="PPI error over an (epsilon, C) grid (uses the oracle)")
    sw.add_argument("--epsilons", type=_float_list, default=[0.5, 1.0, 2.0])
    sw.add_argument("--cs", type=_float_list, default=[4.0, 16.0])
    sw.add_argument("--delta", type=float, default=1e-6)
    sw.add_argument("--rounds", "-T", type=int)
    sw.add_argument("--repeats", type=int, default=1)
    return p


def _resolve_seed(args):
    if args.seed is not None:
        return args.seed, "flag"
    env = os.environ.get(SEED_ENV)
    if env is not None and env.strip():
        try:
            return int(env), "env"
        except ValueError:
            raise UsageError(f"${SEED_ENV} must be an integer, got {env!r}") from None
    return int(np.random.SeedSequence().entropy), "entropy"


def _load(args):
    A = ingest(args.matrix, args.format)
    with open(args.matrix, "rb") as fh:
        digest = hashlib.sha256(fh.read()).hexdigest()
    return A, {"path": args.matrix, "sha256": digest, "shape": list(A.shape), "kind": type(A).__name__}


def _budget(args):
    eps = math.inf if args.zero_noise else args.epsilon
    try:
        return PrivacyBudget(eps, args.delta)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _symmetric_target(A, budget):
    """Symmetric operand and the budget to run it with (halved for the dilation)."""
    if isinstance(A, RectMatrix):
        return dilate(A), PrivacyBudget(budget.epsilon / 2.0, budget.delta / 2.0), True
    return A, budget, False


def _rounds(args, A, budget, rng, ledger):
    """``(T, remaining budget, info)``; spends part of epsilon when T is not given."""
    if args.rounds is not None:
        if args.rounds < 1:
            raise UsageError("--rounds must be >= 1")
        return args.rounds, budget, {"source": "flag"}
    eps_bound = budget.epsilon * ROUNDS_EPS_SHARE
    bound = private_sigma1_upper(np.asarray(A), eps_bound, rng, ledger)
    rest = PrivacyBudget(budget.epsilon - eps_bound, budget.delta) if budget.is_private else budget
    return choose_T(bound), rest, {"source": "private-sigma1-bound", "sigma1_upper": bound, "epsilon_spent": eps_bound}


def _halves(x, m):
    out = {}
    for name, part in (("left", x[:m]), ("right", x[m:])):
        nrm = np.linalg.norm(part)
        out[name] = part / nrm if nrm > 0 else part
    return out


def cmd_coherence(args, rng, ledger):
    A, meta = _load(args)
    rep = coherence_report(A, ks=args.k, include_null=args.include_null)
    return {"input": meta, "private": False}, {"coherence": rep.to_dict()}, None


def cmd_ppi(args, rng, ledger):
    A, meta = _load(args)
    budget = _budget(args)
    S, run_budget, dilated = _symmetric_target(A, budget)
    n = S.n
    T, run_budget, rounds_info = _rounds(args, A, run_budget, rng, ledger)
    gate = not args.no_gate
    resolved = {
        "input": meta,
        "dilated": dilated,
        "budget": {"epsilon": budget.epsilon, "delta": budget.delta},
        "run_budget": {"epsilon": run_budget.epsilon, "delta": run_budget.delta},
        "rounds": T,
        "rounds_info": rounds_info,
        "gate": gate,
        "private": budget.is_private and gate and not args.with_oracle,
    }
    if args.search_c:
        if args.C is not None:
            raise UsageError("--search-c and --coherence-bound are mutually exclusive")
        sr = search_C(S, T, run_budget, rng, ledger=ledger, gate=gate)
        x, traces, C = sr.x, sr.traces, sr.C
        resolved["coherence_bound"] = "search"
        result = {"chosen_C": C, "scores": sr.scores}
    else:
        C = float(n) if args.C is None else args.C
        resolved["coherence_bound"] = C
        try:
            cfg = PpiConfig(T=T, epsilon=run_budget.epsilon, delta=run_budget.delta, C=C)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        x, trace = ppi(S, cfg, rng, gate=gate, ledger=ledger)
        traces = [trace]
        result = {"noise_sigma": cfg.sigma}
    result["traces"] = [t.summary() for t in traces]
    result["status"] = "fail" if x is None else "ok"
    if x is not None:
        result["vector"] = x
        if dilated:
            result.update(_halves(x, A.shape[0]))
        if args.with_oracle:
            F = exact_factorization(S)
            ax = float(np.linalg.norm(matvec(S, x)))
            result["oracle"] = {
                "sigma1": float(F.sigma[0]),
                "ax_norm": ax,
                "error": float(F.sigma[0]) - ax,
                "cosine": abs(float(F.left[:, 0] @ x)),
                "provenance": F.provenance,
            }
    return resolved, result, (EXIT_FAIL if x is None else None)


def cmd_rankk(args, rng, ledger):
    if args.k < 1:
        raise UsageError("--k must be >= 1")
    A, meta = _load(args)
    budget = _budget(args)
    S, run_budget, dilated = _symmetric_target(A, budget)
    if args.k > S.n:
        raise UsageError(f"--k must be <= {S.n}")
    T, run_budget, rounds_info = _rounds(args, A, run_budget, rng, ledger)
    gate = not args.no_gate
    C = float(S.n) if args.C is None else args.C
    resolved = {
        "input": meta,
        "dilated": dilated,
        "k": args.k,
        "budget": {"epsilon": budget.epsilon, "delta": budget.delta},
        "run_budget": {"epsilon": run_budget.epsilon, "delta": run_budget.delta},
        "rounds": T,
        "rounds_info": rounds_info,
        "coherence_bound": C,
        "gate": gate,
        "private": budget.is_private and gate and not args.with_oracle,
    }
    try:
        res = rank_k_approx(S, args.k, T, run_budget, C, rng, gate=gate)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    ledger.extend(res.ledger)
    result = {
        "status": "fail" if res.failed else "ok",
        "failed_stage": res.failed_stage,
        "sigma_hat": res.sigma_hat,
        "vectors": res.vectors,
        "traces": [t.summary() for t in res.traces],
        "stage_budget": list(res.stage_budget),
    }
    if budget.is_private:
        result["composition"] = res.budget_accounting()
    if args.with_oracle and not res.failed:
        F = exact_factorization(S)
        sig = F.sigma
        result["oracle"] = {
            "residual_norm": res.oracle_residual_norm(S.array),
            "sigma_k_plus_1": float(sig[args.k]) if args.k < sig.size else 0.0,
            "sigma1": float(sig[0]),
            "provenance": F.provenance,
        }
    return resolved, result, (EXIT_FAIL if res.failed else None)


def cmd_lowerbound(args, rng, ledger):
    budget = _budget(args)
    n, C = args.n, args.C
    if n < 2 or n % 2:
        raise UsageError("--n must be even and >= 2")
    if not 1 <= C <= n or abs(n / C - round(n / C)) > 1e-12:
        raise UsageError("--c must divide n")
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    if args.rounds is not None and args.rounds < 1:
        raise UsageError("--rounds must be >= 1")
    try:
        rep = attack_demo(n, C, budget.epsilon, budget.delta, args.trials, rng, T=args.rounds)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    resolved = {
        "n": n,
        "C": C,
        "trials": args.trials,
        "budget": {"epsilon": budget.epsilon, "delta": budget.delta},
        # The demo reports accuracy on the secret database, so it is never a private release.
        "private": False,
    }
    return resolved, rep, None


def cmd_sensitivity(args, rng, ledger):
    A, meta = _load(args)
    if not isinstance(A, SymmetricMatrix):
        raise UsageError("sensitivity-probe needs a symmetric matrix")
    s, t = args.entry
    if not (1 <= s <= A.n and 1 <= t <= A.n):
        raise UsageError(f"--entry indices must lie in 1..{A.n}")
    if not 1 <= args.k <= A.n:
        raise UsageError(f"--k must lie in 1..{A.n}")
    try:
        mean, se = power_gap_estimate(A, s - 1, t - 1, args.q, args.trials, rng)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    bound = mu_k_power_bound(A, args.k, args.q)
    resolved = {"input": meta, "q": args.q, "k": args.k, "entry": [s, t], "trials": args.trials, "private": False}
    result = {"estimate": mean, "standard_error": se, **bound, "within_bound": mean <= bound["bound"] + 3 * se}
    return resolved, result, None


def cmd_sweep(args, rng, ledger):
    A, meta = _load(args)
    delta = args.delta
    S, _, dilated = _symmetric_target(A, PrivacyBudget(1.0, delta))
    F = exact_factorization(S)
    s1 = float(F.sigma[0])
    if args.repeats < 1:
        raise UsageError("--repeats must be >= 1")
    T = args.rounds if args.rounds is not None else choose_T(max(s1, 1.0))
    cells = []
    stream = 1
    for eps in args.epsilons:
        for C in args.cs:
            run_eps = math.inf if args.zero_noise else eps
            if dilated:
                run_eps, run_delta = run_eps / 2.0, delta / 2.0
            else:
                run_delta = delta
            try:
                cfg = PpiConfig(T=T, epsilon=run_eps, delta=run_delta, C=C)
            except ValueError as exc:
                raise UsageError(str(exc)) from None
            errors, fails = [], 0
            for _ in range(args.repeats):
                cell_rng = make_rng(args.resolved_seed, stream)
                stream += 1
                x, _trace = ppi(S, cfg, cell_rng)
                if x is None:
                    fails += 1
                    continue
                errors.append(s1 - float(np.linalg.norm(matvec(S, x))))
            cells.append(
                {
                    "epsilon": eps,
                    "C": C,
                    "errors": errors,
                    "median_error": float(np.median(errors)) if errors else None,
                    "fails": fails,
                }
            )
    resolved = {
        "input": meta,
        "dilated": dilated,
        "delta": delta,
        "rounds": T,
        "repeats": args.repeats,
        "epsilons": args.epsilons,
        "cs": args.cs,
        # Errors are measured against the exact top singular value.
        "private": False,
    }
    return resolved, {"sigma1": s1, "provenance": F.provenance, "cells": cells}, None


COMMANDS = {
    "coherence": cmd_coherence,
    "ppi": cmd_ppi,
    "rankk": cmd_rankk,
    "lowerbound-demo": cmd_lowerbound,
    "sensitivity-probe": cmd_sensitivity,
    "sweep": cmd_sweep,
}


def _fail(code, msg):
    print(f"dpspectra: error: {msg}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    t0 = time.perf_counter()
    ledger = NoiseLedger()
    try:
        seed, seed_source = _resolve_seed(args)
        args.resolved_seed = seed
        rng = make_rng(seed, 0)
        resolved, result, code = COMMANDS[args.command](args, rng, ledger)
    except UsageError as exc:
        return _fail(EXIT_USAGE, exc)
    except (ParseError, OSError) as exc:
        return _fail(EXIT_PARSE, exc)
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        return _fail(EXIT_NUMERIC, exc)
    except ValueError as exc:
        # Invalid values that slipped past argument checks, e.g. a non-symmetric
        # matrix where a symmetric one is required.
        return _fail(EXIT_USAGE, exc)
    private = resolved.pop("private") and not args.zero_noise and not args.with_oracle
    report = {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "command": args.command,
        "private": private,
        "config": {
            "seed": seed,
            "seed_source": seed_source,
            "unsafe_zero_noise": args.zero_noise,
            "unsafe_with_oracle": args.with_oracle,
            **resolved,
        },
        "result": result,
        "ledger": ledger.to_dict(),
        "timings": {"wall_seconds": time.perf_counter() - t0},
    }
    text = dumps_report(report)
    if args.output:
        try:
            write_atomic(args.output, text)
        except OSError as exc:
            return _fail(EXIT_PARSE, exc)
    else:
        sys.stdout.write(text)
    return code if code is not None else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
