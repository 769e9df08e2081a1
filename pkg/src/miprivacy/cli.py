"""Command line front end.

    miprivacy design  --config cfg.json [--out report.json]
    miprivacy compare --config cfg.json --out table.csv [--grid-step 1e-3] [--utility renyi:0.5]
    miprivacy verify  --config cfg.json [--mechanism report.json] [--out checks.json]
    miprivacy measure --config cfg.json

Exit codes: 0 ok, 2 invalid input, 3 perturbation leaves the simplex,
4 solver failure, 5 a verification check failed.
"""

import argparse
import csv
import io
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from ._validation import check_mechanism
from .binary import BinarySolution, solve_binary_renyi
from .config import grid_spec, hypothesis_sets, load_config, sweep_fractions, utility_of
from .design import design
from .exceptions import (
    DimensionTooLarge, MIPrivacyError, NegativeEntry, NoConvergence, NumericalFailure, ValidationError,
)
from .exponents import DEFAULT_TRIALS, mechanism_exponent_check
from .mechanism import EitProblem, effective_leakage, leakages, perturbation_radius
from .measures import (
    chi_squared_divergence, entropy, hellinger_divergence, mutual_information, relative_entropy,
    renyi_divergence,
)
from .oracle import COLUMNS, compare_protocol

log = logging.getLogger("miprivacy")

EXIT_OK, EXIT_INVALID, EXIT_NEGATIVE, EXIT_SOLVER, EXIT_CHECK = 0, 2, 3, 4, 5


def _problem(cfg, P):
    kw = {}
    if "reference" in cfg:
        kw["reference"] = np.asarray(cfg["reference"], dtype=float)
    b = cfg.get("budgets", {"fraction": 1e-3})
    if "bits" in b:
        return EitProblem(P, np.asarray(b["bits"], dtype=float), **kw)
    return EitProblem.from_fraction(P, b["fraction"], **kw)


def _floats(x):
    return np.asarray(x, dtype=float).tolist()


def _exact_utilities(P, W):
    out = P @ W
    return [relative_entropy(o, out[0]) for o in out[1:]]


def design_report(problem, utility="kl"):
    """Structured description of the designed mechanism."""
    sol, W, method = design(problem)
    P = problem.hypotheses
    rep = {
        "method": method,
        "hypotheses": _floats(P),
        "budgets_bits": _floats(problem.budgets),
        "mechanism": _floats(W),
        "n_outputs": int(W.shape[1]),
        "leakage_bits": _floats(leakages(P, W)),
        "effective_leakage_bits": effective_leakage(P, W),
        "exact_utility_bits": float(min(_exact_utilities(P, W))),
    }
    if isinstance(sol, BinarySolution):
        rep.update(
            case=sol.case.value,
            a_star=_floats(sol.a_star),
            v=_floats(sol.v),
            eta=_floats(sol.eta),
            predicted_utility_bits=sol.predicted_utility,
            reference=_floats(sol.reference),
            perturbation_radius=perturbation_radius(W, sol.reference),
            kkt_residuals={k: float(v) for k, v in sol.kkt_residuals.items()},
        )
        if method == "collinear":
            rep["note"] = "Bernoulli hypotheses: collinear differences, closed form over all budgets"
            rep["minimizing_index"] = int(sol.minimizing_index)
            rep["active_set"] = [int(i) for i in sol.active_set]
        if utility != "kl" and problem.m == 2:
            rs = solve_binary_renyi(problem, utility)
            rep["renyi"] = {"alpha": utility.alpha, "utility_bits": rs.renyi_utility, "ratio": rs.renyi_ratio}
    else:
        rep.update(
            rank=int(sol.rank),
            eigenvalues=_floats(sol.eigvals),
            predicted_utility_bits=sol.utility_bits,
            gap=float(sol.gap),
            duals=_floats(sol.duals),
            iterations=int(sol.iterations),
        )
    return rep


def _write_text(text, out):
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    d = os.path.dirname(out)
    if d:
        os.makedirs(d, exist_ok=True)
    with open(out, "w", newline="") as fh:
        fh.write(text)


def _json(obj):
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def rows_to_csv(rows):
    """CSV text with the fixed column order and 12 significant digits."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([r[c] if isinstance(r[c], str) else "%.12g" % r[c] for c in COLUMNS])
    return buf.getvalue()


def cmd_design(cfg, args):
    u = utility_of(cfg, args.utility)
    reports = {name: design_report(_problem(cfg, P), u) for name, P in hypothesis_sets(cfg)}
    if len(reports) == 1:
        reports = next(iter(reports.values()))
    _write_text(_json(reports), args.out or cfg.get("output"))
    return EXIT_OK


def cmd_compare(cfg, args):
    u = utility_of(cfg, args.utility)
    grid = grid_spec(cfg, args.grid_step)
    fractions = sweep_fractions(cfg)
    sets = hypothesis_sets(cfg)
    out = args.out or cfg.get("output")
    for name, P in sets:
        rows = compare_protocol(P, fractions, u, grid, cfg.get("reference"), workers=cfg.get("workers", 1))
        text = rows_to_csv(rows)
        if len(sets) > 1:
            if out is None:
                raise ValidationError("several hypothesis sets need --out pointing at a directory")
            _write_text(text, os.path.join(out, f"{name}.csv"))
        else:
            _write_text(text, out)
    return EXIT_OK


def _load_mechanism(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read mechanism {path}: {exc}") from None
    if isinstance(data, dict):
        data = data.get("mechanism")
    if data is None:
        raise ValidationError(f"{path} holds no mechanism")
    return check_mechanism(np.asarray(data, dtype=float), "mechanism")


def verify_checks(P, W, ns, deltas, tolerance, seed, trials=DEFAULT_TRIALS):
    """Exponent checks of ``p_k W`` against ``p_1 W`` for every ``k >= 2``."""
    W = check_mechanism(W, "mechanism")
    if W.shape[0] != P.shape[1]:
        raise ValidationError(f"mechanism has {W.shape[0]} rows for {P.shape[1]} source symbols")
    out = P @ W
    checks = []
    for k in range(1, P.shape[0]):
        D = relative_entropy(out[k], out[0])
        for n in ns:
            for delta in deltas:
                r = mechanism_exponent_check(P[0], P[k], W, n, delta, seed=seed, trials=trials)
                entry = dict(k=k + 1, n=int(n), delta=float(delta), method=r.method,
                             exponent=r.exponent, divergence=D, beta2=r.beta2)
                if r.ci is not None:
                    entry["beta2_ci"] = list(r.ci)
                if r.method == "exact":
                    checks.append(dict(entry, check="beta1_equals_delta", value=r.beta1,
                                       passed=bool(abs(r.beta1 - delta) <= 1e-12)))
                if D > 0:
                    gap = abs(r.exponent - D) / D
                    checks.append(dict(entry, check="stein_relative_gap", value=gap, tolerance=tolerance,
                                       passed=bool(gap <= tolerance)))
                else:
                    # identical outputs: any test has beta1 + beta2 = 1
                    bound = -np.log2(1.0 - delta) / n
                    checks.append(dict(entry, check="zero_divergence_exponent", value=r.exponent, bound=bound,
                                       passed=bool(r.exponent <= bound + 1e-12)))
    return checks


def cmd_verify(cfg, args):
    v = cfg.get("verify", {})
    ns = v.get("n", [10000])
    deltas = v.get("delta", [0.05, 0.2])
    tol = v.get("tolerance", 0.15)
    trials = v.get("trials", DEFAULT_TRIALS)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    report = {}
    for name, P in hypothesis_sets(cfg):
        if args.mechanism:
            W = _load_mechanism(args.mechanism)
        elif "mechanism" in v:
            W = check_mechanism(np.asarray(v["mechanism"], dtype=float), "mechanism")
        else:
            _, W, _ = design(_problem(cfg, P))
        checks = verify_checks(P, W, ns, deltas, tol, seed, trials)
        report[name] = {"mechanism": _floats(W), "checks": checks,
                        "passed": all(c["passed"] for c in checks)}
    ok = all(r["passed"] for r in report.values())
    if len(report) == 1:
        report = next(iter(report.values()))
    _write_text(_json(report), args.out or cfg.get("output"))
    return EXIT_OK if ok else EXIT_CHECK


def cmd_measure(cfg, args):
    m = cfg.get("measure")
    if m is None:
        raise ValidationError("config needs a 'measure' section")
    p = np.asarray(m["p"], dtype=float)
    res = {"entropy_bits": entropy(p)}
    alpha = m.get("alpha")
    if alpha is None and args.utility and args.utility != "kl":
        alpha = utility_of(cfg, args.utility).alpha
    if "q" in m:
        q = np.asarray(m["q"], dtype=float)
        res["relative_entropy_bits"] = relative_entropy(p, q)
        if np.all(q > 0):
            res["chi_squared_half"] = chi_squared_divergence(p, q)
        if alpha is not None:
            res["alpha"] = float(alpha)
            res["renyi_bits"] = renyi_divergence(p, q, alpha)
            res["hellinger"] = hellinger_divergence(p, q, alpha)
    if "W" in m:
        res["mutual_information_bits"] = mutual_information(p, np.asarray(m["W"], dtype=float))
    _write_text(_json(res), args.out or cfg.get("output"))
    return EXIT_OK


COMMANDS = {"design": cmd_design, "compare": cmd_compare, "verify": cmd_verify, "measure": cmd_measure}


def build_parser():
    ap = argparse.ArgumentParser(prog="miprivacy", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON experiment config")
        sp.add_argument("--out", help="output path (stdout when omitted)")
        sp.add_argument("--seed", type=int, help="seed for Monte Carlo checks")
        sp.add_argument("--grid-step", type=float, help="oracle grid resolution")
        sp.add_argument("--utility", help="kl or renyi:<alpha>")
        sp.add_argument("-v", "--verbose", action="store_true")
        if name == "verify":
            sp.add_argument("--mechanism", help="JSON file with a mechanism matrix or a design report")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg["seed"] = args.seed
        return COMMANDS[args.command](cfg, args)
    except NegativeEntry as exc:
        log.error("negative entry: %s", exc)
        return EXIT_NEGATIVE
    except (NoConvergence, NumericalFailure) as exc:
        log.error("solver failure: %s", exc)
        return EXIT_SOLVER
    except (ValidationError, DimensionTooLarge, MIPrivacyError) as exc:
        log.error("invalid input: %s", exc)
        return EXIT_INVALID


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
