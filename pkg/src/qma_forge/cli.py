"""``qma-forge``: run protocols and checks, emit one JSON report on stdout.

Exit status is 0 when every check passes, 1 when any check fails and 2 on
usage or configuration errors.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import Callable

import numpy as np

from . import acceptance, protocols, toys
from .errors import QmaForgeError
from .prover_opt import (
    AGREEMENT_TOL,
    ORACLE_MAX_DIM,
    ProductSearchConfig,
    brute_force_product,
    certify_soundness,
    random_acceptance_operator,
    seesaw,
)
from .report import CheckResult, ExperimentReport, check_at_least, check_at_most, check_close, check_true
from .verifier import (
    SystemParams,
    Verifier,
    accept_probability,
    accept_probability_mixed,
    acceptance_operator,
)


class UsageError(Exception):
    pass


def _load_verifier(path: str | None) -> Verifier | None:
    if path is None:
        return None
    with open(path) as fh:
        return Verifier.from_json(json.load(fh))


def _emit(path: str | None, v: Verifier) -> None:
    if path:
        Path(path).write_text(json.dumps(v.to_json()))


def _config(args: argparse.Namespace) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("handler", "out")}


# --- subcommands ----------------------------------------------------------

def cmd_swap_test(args) -> ExperimentReport:
    v = protocols.swap_test_verifier(args.qubits)
    rep = ExperimentReport("swap-test", _config(args), args.seed, acceptance.SWAP_CLAIM)
    for t in range(args.trials):
        rho, sigma = acceptance.random_state_pair(args.qubits, args.seed * 100_003 + t)
        circuit = accept_probability_mixed(v, [rho, sigma])
        rep.results.append(check_close(f"trial {t}", circuit, protocols.swap_test_analytic(rho, sigma), args.tolerance))
    return rep


def cmd_amplify(args) -> ExperimentReport:
    params = SystemParams(1, args.c, args.s)
    amp = protocols.amplify(params, args.q, args.p)
    claim = acceptance.AMPLIFY_CLAIM
    rep = ExperimentReport("amplify", _config(args), args.seed, claim, extra={"amplified": amp.to_json()})
    res = rep.results
    res.append(check_true("N = 2 p q^2", amp.n_attempts == 2 * args.p * args.q**2, claim))
    res.append(check_true("T = ceil(N (c+s)/2)", amp.threshold >= amp.n_attempts * (args.c + args.s) / 2 - 1e-9, claim))
    res.append(check_close("completeness bound", amp.completeness, 1 - 2.0**-args.p, 0.0, claim))
    res.append(check_close("soundness bound", amp.soundness, 2 * args.s / (args.c + args.s), 1e-15, claim))
    honest = protocols.amplified_accept_honest(args.c, amp)
    res.append(check_at_least("binomial honest acceptance at p = c", honest, amp.completeness, claim=claim))
    # full-circuit cross-check of the binomial formula at N <= 3
    base = toys.threshold_verifier(args.c, k=1)
    proof = toys.threshold_honest_proofs(1)
    for n in (2, 3):
        t = int(np.ceil(n * (args.c + args.s) / 2 - 1e-9))
        sim = accept_probability(protocols.parallel_repetition(base, n, t), proof * n)
        res.append(check_close(f"{n}-attempt circuit vs binomial (T={t})", sim, protocols.binomial_tail(n, t, args.c), args.tolerance, claim))
    return rep


def _reduce_once(v: Verifier) -> Verifier:
    if v.k == 3:
        return protocols.reduce_3_to_2(v)
    a, r = protocols.split_proof_count(v.k)
    return protocols.reduce_3kr_to_2kr(v, a, r)


def _oracle_samples(v: Verifier, samples: int) -> int:
    return samples if int(np.prod(v.slot_dims)) <= ORACLE_MAX_DIM else 0


def _reduce_instance(label: str, v: Verifier, args, config: ProductSearchConfig, out: list[CheckResult], extra: dict):
    eps, delta = args.epsilon, args.delta
    bounds = protocols.reduction_bounds(v.k, eps, delta)
    claim = acceptance.REDUCE_CLAIM if v.k == 3 else acceptance.REDUCE_K_CLAIM
    m = acceptance_operator(v)
    best = seesaw(m, m.slot_dims, config)
    w = _reduce_once(v)
    info = {"reduction": bounds.to_json(), "input_product_value": best.value, "input_lambda_max": m.lambda_max}
    if best.value >= 1 - eps - 1e-10:
        a, r = protocols.split_proof_count(v.k)
        p = accept_probability(w, protocols.honest_reduced_proofs(best.proofs, a, r))
        out.append(check_at_least(f"{label}: reduced honest acceptance >= 1 - eps/2", p, 1 - eps / 2, 1e-10, claim))
        if v.k == 3:
            out.append(check_close(f"{label}: reduced honest = 1/2 + p/2", p, 0.5 + best.value / 2, 1e-12, claim))
        info["kind"] = "yes"
    elif certify_soundness(v, 1 - delta, config, brute_samples=_oracle_samples(v, args.trials)).certified:
        info["kind"] = "no"
        if args.certify:
            cert = certify_soundness(w, 1 - delta / 20, config, brute_samples=_oracle_samples(w, args.trials))
            out.append(check_at_most(f"{label}: certificate ({cert.bound_used}) <= 1 - delta/20", cert.value, 1 - delta / 20, claim=claim))
            out.append(check_true(f"{label}: certificate is certified", cert.certified, claim))
            info["certificate"] = cert.to_json()
    else:
        info["kind"] = "neither"
        out.append(check_true(f"{label}: input meets the yes or the no promise", False, claim))
    extra[label] = info
    return w


def cmd_reduce(args) -> ExperimentReport:
    v = _load_verifier(args.input)
    config = ProductSearchConfig(restarts=args.restarts, seed=args.seed)
    rep = ExperimentReport("reduce", _config(args), args.seed, acceptance.REDUCE_CLAIM)
    if v is not None:
        if args.k is not None and args.k != v.k:
            raise UsageError(f"--k {args.k} does not match the verifier's {v.k} proofs")
        w = _reduce_instance("input", v, args, config, rep.results, rep.extra)
        _emit(args.emit, w)
    else:
        k = args.k if args.k is not None else 3
        _reduce_instance("yes toy", toys.threshold_verifier(1 - args.epsilon, k), args, config, rep.results, rep.extra)
        _reduce_instance("no toy", toys.threshold_verifier(1 - args.delta, k), args, config, rep.results, rep.extra)
    return rep


def cmd_reduce_chain(args) -> ExperimentReport:
    v = _load_verifier(args.input)
    if v is None:
        v = toys.threshold_verifier(args.c, args.k if args.k is not None else 3)
    params = SystemParams(v.k, args.c, args.s)
    chain = protocols.reduce_chain(v, params, args.q, args.p)
    rep = ExperimentReport("reduce-chain", _config(args), args.seed, acceptance.REDUCE_K_CLAIM, extra=chain.to_json())
    n = len(chain.stages)
    eps0, delta0 = 1 - chain.amplified.completeness, 1 - chain.amplified.relaxed_soundness
    rep.results.append(check_true("final proof count is 2", chain.verifier.k == 2 or v.k == 2))
    rep.results.append(check_close(f"final eps = eps0 / 2^{n}", chain.final_epsilon, eps0 / 2**n, 1e-15 * eps0))
    rep.results.append(check_close(f"final delta = delta0 / 20^{n}", chain.final_delta, delta0 / 20**n, 1e-15 * delta0))
    for i, stage in enumerate(chain.stages, start=1):
        m = acceptance_operator(stage.constructed)
        rep.results.append(check_true(f"stage {i}: {stage.input_k} -> {stage.output_k} proofs", stage.constructed.k == stage.output_k))
        rep.results.append(check_at_most(f"stage {i}: lambda_max <= 1", m.lambda_max, 1.0, 1e-10))
    _emit(args.emit, chain.verifier)
    return rep


def cmd_concat(args) -> ExperimentReport:
    v = _load_verifier(args.input)
    if v is None:
        v = toys.random_verifier(1, 1, args.k if args.k is not None else 2, args.seed)
    single = protocols.concat_proofs(v)
    claim = acceptance.PERFECT_CLAIM
    rep = ExperimentReport("concat", _config(args), args.seed, claim)
    diff = np.max(np.abs(acceptance_operator(v).matrix - acceptance_operator(single).matrix))
    rep.results.append(check_at_most("acceptance operators equal", float(diff), args.tolerance, claim=claim))
    from .states import make_rng, random_pure_vector

    rng = make_rng(args.seed, 1)
    worst = 0.0
    for _ in range(args.trials):
        proofs = [random_pure_vector(d, rng) for d in v.slot_dims]
        joint = proofs[0]
        for p in proofs[1:]:
            joint = np.kron(joint, p)
        worst = max(worst, abs(accept_probability(v, proofs) - accept_probability(single, [joint])))
    rep.results.append(check_at_most(f"product proofs, both ways (max over {args.trials})", worst, args.tolerance, claim=claim))
    _emit(args.emit, single)
    return rep


def _nqp_checks(label: str, v: Verifier, tol: float) -> tuple[list[CheckResult], dict]:
    single = protocols.concat_proofs(v) if v.k != 1 else v
    m = acceptance_operator(v)
    nqp = protocols.nqp_simulation(single)
    tr = float(np.real(np.trace(m.matrix))) / 2**single.proof_qubits
    claim = acceptance.PERFECT_CLAIM
    checks = [
        check_close(f"{label}: acceptance = tr(M)/2^q", nqp.acceptance, tr, tol, claim),
        check_true(f"{label}: zero verdict matches lambda_max <= 1e-12", nqp.zero_verdict == (m.lambda_max <= 1e-12), claim),
    ]
    return checks, {"acceptance": nqp.acceptance, "zero_verdict": nqp.zero_verdict, "lambda_max": m.lambda_max}


def cmd_nqp_sim(args) -> ExperimentReport:
    rep = ExperimentReport("nqp-sim", _config(args), args.seed, acceptance.PERFECT_CLAIM)
    v = _load_verifier(args.input)
    if v is not None:
        checks, info = _nqp_checks("input", v, args.tolerance)
        rep.results += checks
        rep.extra["input"] = info
        return rep
    k = args.k if args.k is not None else 2
    for t in range(args.trials):
        maker = toys.never_accept_verifier if t % 4 >= 2 else toys.random_verifier
        checks, info = _nqp_checks(f"trial {t}", maker(1, 1, k, args.seed * 1000 + t), args.tolerance)
        rep.results += checks
        rep.extra[f"trial {t}"] = info
    return rep


def cmd_optimize(args) -> ExperimentReport:
    v = _load_verifier(args.input)
    if v is not None:
        m = acceptance_operator(v)
    else:
        dims = [args.dim] * (args.k if args.k is not None else 2)
        m = random_acceptance_operator(dims, args.seed)
    dims = list(m.slot_dims)
    config = ProductSearchConfig(restarts=args.restarts, seed=args.seed)
    out = seesaw(m, dims, config)
    claim = acceptance.OPT_CLAIM
    rep = ExperimentReport("optimize", _config(args), args.seed, claim)
    mono = all(bool(np.all(np.diff(tr) >= -1e-12)) for tr in out.traces)
    rep.results.append(check_true("see-saw monotone on every trace", mono, claim))
    rep.results.append(check_at_most("see-saw value <= lambda_max", out.value, m.lambda_max, 1e-9, claim))
    rep.extra.update(value=out.value, lambda_max=m.lambda_max, restart_values=out.restart_values, slot_dims=dims)
    if args.trials > 0 and int(np.prod(dims)) <= ORACLE_MAX_DIM:
        brute = brute_force_product(m, dims, args.trials, args.seed, profile_last=True)
        rep.results.append(check_close("brute-force oracle agrees with see-saw", brute, out.value, AGREEMENT_TOL, claim))
        rep.extra["brute_force_value"] = brute
    if args.certify and v is not None:
        threshold = args.threshold if args.threshold is not None else 1 - args.delta
        cert = certify_soundness(v, threshold, config)
        rep.results.append(check_true(f"soundness certified at {threshold!r} ({cert.bound_used})", cert.certified, claim))
        rep.extra["certificate"] = cert.to_json()
    return rep


def cmd_indist(args) -> ExperimentReport:
    rep = ExperimentReport("indist", _config(args), args.seed, acceptance.INDIST_CLAIM)
    rep.results = acceptance.indist_checks(args.dim, args.seed, args.trials, args.trials)
    return rep


def cmd_all(args) -> ExperimentReport:
    rep = ExperimentReport("all", _config(args), args.seed, "full acceptance suite")
    for name, fn in acceptance.CRITERIA.items():
        results = fn(args.seed)
        for r in results:
            r.name = f"[{name}] {r.name}"
        rep.results += results
        rep.extra[name] = all(r.passed for r in results)
    return rep


# --- argument parsing -----------------------------------------------------

def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the report here instead of stdout")
    return p


def _add(sub, name: str, handler: Callable, help: str, **defaults) -> argparse.ArgumentParser:
    p = sub.add_parser(name, parents=[_common()], help=help, description=help)
    p.set_defaults(handler=handler)
    if "trials" in defaults:
        p.add_argument("--trials", type=int, default=defaults["trials"])
    if "tolerance" in defaults:
        p.add_argument("--tolerance", type=float, default=defaults["tolerance"])
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qma-forge", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = _add(sub, "swap-test", cmd_swap_test, "controlled-swap test vs 1/2 + tr(rho sigma)/2", trials=200, tolerance=1e-12)
    p.add_argument("--qubits", type=int, default=2)

    p = _add(sub, "amplify", cmd_amplify, "parallel-repetition bound arithmetic", tolerance=1e-10)
    p.add_argument("--c", type=float, default=2 / 3)
    p.add_argument("--s", type=float, default=1 / 3)
    p.add_argument("--q", type=int, default=3)
    p.add_argument("--p", type=int, default=10)

    p = _add(sub, "reduce", cmd_reduce, "one (3k+r) -> (2k+r) proof reduction", trials=10**6)
    p.add_argument("--in", dest="input")
    p.add_argument("--k", type=int)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--delta", type=float, default=0.6)
    p.add_argument("--restarts", type=int, default=32)
    p.add_argument("--certify", action="store_true")
    p.add_argument("--emit", help="write the reduced verifier JSON here")

    p = _add(sub, "reduce-chain", cmd_reduce_chain, "amplify, then reduce down to two proofs")
    p.add_argument("--in", dest="input")
    p.add_argument("--k", type=int)
    p.add_argument("--c", type=float, default=2 / 3)
    p.add_argument("--s", type=float, default=1 / 3)
    p.add_argument("--q", type=int, default=3)
    p.add_argument("--p", type=int, default=10)
    p.add_argument("--emit", help="write the final verifier JSON here")

    p = _add(sub, "concat", cmd_concat, "fuse all proofs into a single proof register", trials=20, tolerance=1e-14)
    p.add_argument("--in", dest="input")
    p.add_argument("--k", type=int)
    p.add_argument("--emit", help="write the single-proof verifier JSON here")

    p = _add(sub, "nqp-sim", cmd_nqp_sim, "uniform-superposition simulation of a single-proof verifier", trials=50, tolerance=1e-12)
    p.add_argument("--in", dest="input")
    p.add_argument("--k", type=int)

    p = _add(sub, "optimize", cmd_optimize, "see-saw search for the best product proofs", trials=100_000)
    p.add_argument("--in", dest="input")
    p.add_argument("--k", type=int)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--certify", action="store_true")
    p.add_argument("--delta", type=float, default=0.6)
    p.add_argument("--threshold", type=float)

    p = _add(sub, "indist", cmd_indist, "product vs maximally entangled ensembles", trials=100)
    p.add_argument("--dim", type=int, default=2)

    _add(sub, "all", cmd_all, "run the full acceptance suite")
    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    t0 = time.perf_counter()
    try:
        rep = args.handler(args)
    except (UsageError, QmaForgeError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"qma-forge {args.subcommand}: {exc}", file=sys.stderr)
        return 2
    rep.wall_time = time.perf_counter() - t0
    text = json.dumps(rep.to_json())
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")
    return 0 if rep.passed else 1


def main() -> None:
    sys.exit(run())
