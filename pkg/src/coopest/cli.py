"""Command-line driver: ``coopest {analyze,design,simulate,report}``.

Every command reads a scenario file, writes JSON artifacts into the output
directory and prints its report on stdout; diagnostics go to stderr.

Exit codes
----------
0  success
1  malformed scenario, unreadable or missing artifact
2  necessary condition violated (undetectable iSCC, agent without in-neighbours)
3  a configured verification check failed
4  a simulation diverged
5  Francis regulator equations not solvable
6  game Riccati equation without admissible solution
7  estimator LMIs infeasible (or solver failure at the requested level)
8  ``--strict`` and at least one warning was emitted
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import scenario as scn
from .errors import (
    CoopestError,
    DimensionMismatch,
    Infeasible,
    IsolatedAgent,
    NoSolution,
    NoStabilizingSolution,
    NonFiniteState,
    NotPositiveDefinite,
    NumericalFailure,
    ScenarioError,
    SingularP,
)
from .graph import degrees, scc_decompose
from .model import check_iscc_detectability, local_stacks
from .regulation import ExosystemSpec, RegulatorDesign, design_regulator
from .scenario import matrix_from_json, matrix_to_json
from .sim import (
    dissipation_slack,
    evaluate_estimation_inequality,
    evaluate_sync_inequality,
    lyapunov_decay_ratio,
    simulate_closed_loop,
    simulate_estimation,
)
from .synthesis import (
    EstimatorBank,
    SynthesisParams,
    default_global_weight,
    design_at_gamma,
    minimize_centralized_gamma,
    minimize_gamma,
)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NECESSARY = 2
EXIT_CHECK = 3
EXIT_DIVERGED = 4
EXIT_FRANCIS = 5
EXIT_RICCATI = 6
EXIT_LMI = 7
EXIT_STRICT = 8

ANALYSIS_FILE = "analysis.json"
DESIGN_FILE = "design.json"
VERIFICATION_FILE = "verification.json"
REPORT_FILE = "report.json"
DESIGN_FORMAT = "coopest-design/1"

DECAY_TOL = 1e-6
DISSIPATION_TOL = 1e-6
TAIL_FRACTION = 0.1

log = logging.getLogger("coopest.cli")


class _Exit(Exception):
    def __init__(self, code, message=None):
        self.code = code
        super().__init__(message or "")


class _WarningCounter(logging.Handler):
    def __init__(self):
        super().__init__(level=logging.WARNING)
        self.records = []

    def emit(self, record):
        self.records.append(record.getMessage())


# ---------------------------------------------------------------- io helpers


def atomic_write_text(path, text):
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_json(path, obj):
    atomic_write_text(path, json.dumps(obj, indent=2, allow_nan=True) + "\n")


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise _Exit(EXIT_INPUT, f"missing artifact: {path}") from None
    except json.JSONDecodeError as exc:
        raise _Exit(EXIT_INPUT, f"{path}: not valid JSON ({exc.msg} at line {exc.lineno})") from None


def _complex_list(zs):
    return [[float(z.real), float(z.imag)] for z in zs]


def design_fingerprint(scen):
    """Hash of the scenario sections a design depends on."""
    doc = scn.to_dict(scen)
    keep = {k: doc[k] for k in ("network", "estimator", "regulator") if k in doc}
    return hashlib.sha256(json.dumps(keep, sort_keys=True).encode()).hexdigest()


# ---------------------------------------------------------- design artifacts


def bank_to_json(bank):
    agents = []
    for s, P, L, K, F, G, W, margin in zip(
        bank.stacks, bank.P, bank.L, bank.K, bank.F, bank.G, bank.params.W, bank.margins
    ):
        agents.append(
            {
                "k": s.k,
                "neighbors": list(s.neighbors),
                "P": matrix_to_json(P),
                "L": matrix_to_json(L),
                "K": matrix_to_json(K),
                "F": matrix_to_json(F),
                "G": matrix_to_json(G),
                "W": matrix_to_json(W),
                "margin": float(margin),
                "condition_number_P": float(np.linalg.cond(P)),
            }
        )
    return {
        "gamma": float(bank.gamma),
        "alpha": bank.params.alpha,
        "pi": list(bank.params.pi),
        "eps": bank.params.eps,
        "status": bank.status,
        "agents": agents,
    }


def bank_from_json(doc, net):
    stacks = local_stacks(net)
    agents = doc["agents"]
    if [a["k"] for a in agents] != [s.k for s in stacks]:
        raise _Exit(EXIT_INPUT, "design artifact does not match the scenario's agents")

    def mats(name):
        return [matrix_from_json(a[name], f"estimator.agents[{i}].{name}") for i, a in enumerate(agents)]

    params = SynthesisParams(alpha=doc["alpha"], pi=doc["pi"], W=mats("W"), gamma=doc["gamma"], eps=doc["eps"])
    return EstimatorBank(
        stacks, mats("P"), mats("L"), mats("K"), mats("F"), mats("G"), doc["gamma"], params,
        doc["status"], [a["margin"] for a in agents],
    )


def regulator_to_json(reg, net):
    return {
        "S": matrix_to_json(reg.exo.S),
        "Gamma": matrix_to_json(reg.exo.Gamma),
        "mu": reg.mu,
        "lambda": reg.lambda_gain,
        "q_max": reg.q_max,
        "kappa": reg.kappa,
        "theta": reg.theta,
        "agents": [
            {
                "Pi": matrix_to_json(Pi),
                "Lambda": matrix_to_json(Lam),
                "X": matrix_to_json(X),
                "H": matrix_to_json(H),
                "R": matrix_to_json(R),
                "francis_residuals": [float(r) for r in fr],
                "riccati_residual": float(rr),
                "closed_loop_eigenvalues": _complex_list(np.linalg.eigvals(a.A + a.B @ H)),
            }
            for a, Pi, Lam, X, H, R, fr, rr in zip(
                net.agents, reg.Pi, reg.Lambda, reg.X, reg.H, reg.R, reg.francis_residuals, reg.riccati_residuals
            )
        ],
    }


def regulator_from_json(doc):
    exo = ExosystemSpec(matrix_from_json(doc["S"], "regulator.S"), matrix_from_json(doc["Gamma"], "regulator.Gamma"))

    def mats(name):
        return [matrix_from_json(a[name], f"regulator.agents[{i}].{name}") for i, a in enumerate(doc["agents"])]

    return RegulatorDesign(
        exo, mats("Pi"), mats("Lambda"), mats("X"), mats("H"), mats("R"), doc["mu"], doc["lambda"],
        doc["q_max"], doc["kappa"], doc["theta"],
        [tuple(a["francis_residuals"]) for a in doc["agents"]], [a["riccati_residual"] for a in doc["agents"]],
    )


# ------------------------------------------------------------------ commands


def _out_dir(args, scen=None):
    if args.out:
        return Path(args.out)
    if scen is not None:
        return Path(scen.output.dir)
    return Path("out")


def analysis_report(scen):
    net = scen.network
    p, q = degrees(net.graph)
    scc = scc_decompose(net.graph)
    det = check_iscc_detectability(net)
    isolated = [k for k in range(1, net.N + 1) if p[k - 1] == 0]
    return {
        "graph": {
            "n_vertices": net.graph.n_vertices,
            "edges": [list(e) for e in net.graph.edges],
            "in_degrees": [int(v) for v in p],
            "out_degrees": [int(v) for v in q],
            "sccs": [
                {"vertices": sorted(c), "independent": ind} for c, ind in zip(scc.components, scc.is_independent)
            ],
            "agents_without_in_neighbors": isolated,
        },
        "detectability": det.to_dict(),
        "necessary_condition_holds": det.passed and not isolated,
    }


def cmd_analyze(args):
    scen = scn.load(args.scenario)
    report = analysis_report(scen)
    report["provenance"] = _provenance(args, scen)
    atomic_write_json(_out_dir(args, scen) / ANALYSIS_FILE, report)
    print(json.dumps(report, indent=2))
    if not report["necessary_condition_holds"]:
        bad = [c["vertices"] for c in report["detectability"]["isccs"] if not c["detectable"]]
        msg = f"undetectable iSCCs: {bad}" if bad else ""
        if report["graph"]["agents_without_in_neighbors"]:
            msg += f" agents without in-neighbours: {report['graph']['agents_without_in_neighbors']}"
        raise _Exit(EXIT_NECESSARY, f"necessary condition fails; {msg.strip()}")
    return EXIT_OK


def _estimator_weights(scen, stacks, reg):
    est = scen.estimator
    if est.W == scn.W_FROM_REGULATOR:
        return reg.weights(scen.network, stacks)
    if est.W == scn.W_SELF_IDENTITY:
        return SynthesisParams.uniform(stacks, est.alpha, 1.0).W
    return list(est.W)


def run_design(scen, gamma=None):
    """Regulator (if configured) then estimator synthesis; returns the artifact dict."""
    net = scen.network
    timing = {}
    analysis = analysis_report(scen)
    if not analysis["necessary_condition_holds"]:
        raise _Exit(EXIT_NECESSARY, "necessary condition fails; run 'analyze' for details")
    stacks = local_stacks(net)

    reg = None
    if scen.regulator is not None:
        r = scen.regulator
        t0 = time.perf_counter()
        exo = ExosystemSpec(r.S, r.Gamma)
        try:
            reg = design_regulator(net, exo, list(r.R), r.mu, r.lambda_gain)
        except NoSolution as exc:
            raise _Exit(EXIT_FRANCIS, f"Francis equations: {exc}") from None
        except (NoStabilizingSolution, NotPositiveDefinite) as exc:
            raise _Exit(EXIT_RICCATI, f"Riccati equation: {exc}") from None
        timing["regulator_s"] = time.perf_counter() - t0

    est = scen.estimator
    params = SynthesisParams(alpha=est.alpha, pi=est.pi, W=_estimator_weights(scen, stacks, reg), eps=est.eps)
    t0 = time.perf_counter()
    fixed = gamma if gamma is not None else (None if est.gamma == "minimize" else est.gamma)
    try:
        if fixed is None:
            g, bank = minimize_gamma(net, stacks, params, bracket=est.bracket, rtol=est.rtol)
        else:
            bank = design_at_gamma(net, params, fixed, stacks)
            g = fixed
    except (Infeasible, NumericalFailure, SingularP) as exc:
        raise _Exit(EXIT_LMI, f"estimator LMIs: {exc}") from None
    timing["estimator_s"] = time.perf_counter() - t0

    central = None
    if est.centralized:
        t0 = time.perf_counter()
        try:
            gc, _ = minimize_centralized_gamma(net, default_global_weight(net, params), bracket=est.bracket, rtol=est.rtol)
            central = {"gamma": float(gc)}
        except Infeasible as exc:
            central = {"gamma": None, "reason": str(exc)}
        timing["centralized_s"] = time.perf_counter() - t0

    if reg is not None:
        reg.set_gamma(g)
    return {
        "format": DESIGN_FORMAT,
        "scenario_fingerprint": design_fingerprint(scen),
        "mode": "minimize" if fixed is None else "fixed",
        "estimator": bank_to_json(bank),
        "centralized": central,
        "regulator": None if reg is None else regulator_to_json(reg, net),
        "timing": timing,
    }


def cmd_design(args):
    scen = scn.load(args.scenario)
    artifact = run_design(scen, args.gamma)
    artifact["provenance"] = _provenance(args, scen)
    atomic_write_json(_out_dir(args, scen) / DESIGN_FILE, artifact)
    summary = {
        "gamma": artifact["estimator"]["gamma"],
        "mode": artifact["mode"],
        "centralized_gamma": None if artifact["centralized"] is None else artifact["centralized"]["gamma"],
        "kappa": None if artifact["regulator"] is None else artifact["regulator"]["kappa"],
        "theta": None if artifact["regulator"] is None else artifact["regulator"]["theta"],
        "condition_numbers_P": [a["condition_number_P"] for a in artifact["estimator"]["agents"]],
        "timing": artifact["timing"],
    }
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def load_design(scen, out):
    doc = _read_json(out / DESIGN_FILE)
    if doc.get("format") != DESIGN_FORMAT:
        raise _Exit(EXIT_INPUT, f"{out / DESIGN_FILE}: unknown design format {doc.get('format')!r}")
    if doc.get("scenario_fingerprint") != design_fingerprint(scen):
        raise _Exit(EXIT_INPUT, "design artifact was produced from a different scenario; rerun 'design'")
    bank = bank_from_json(doc["estimator"], scen.network)
    reg = None if doc.get("regulator") is None else regulator_from_json(doc["regulator"])
    return bank, reg


def _tail(values, t):
    start = t[-1] - TAIL_FRACTION * (t[-1] - t[0])
    return values[t >= start]


def run_checks(trace, spec, bank, reg, sim):
    results = {}
    for check in spec.checks:
        if check == "estimation_inequality":
            results[check] = evaluate_estimation_inequality(trace, bank).to_dict()
        elif check == "sync_inequality":
            results[check] = evaluate_sync_inequality(trace, reg, bank).to_dict()
        elif check == "sync_tail":
            spread = trace.output_spread()
            final = float(spread[-1])
            results[check] = {
                "final_spread": final,
                "peak_spread": float(spread.max()),
                "tail_max_spread": float(_tail(spread, trace.t).max()),
                "threshold": sim.sync_threshold,
                "holds": final < sim.sync_threshold,
            }
        elif check == "zeta_consensus":
            dis = np.linalg.norm(trace.zeta_disagreement, axis=1)
            tail = float(_tail(dis, trace.t).max())
            results[check] = {"tail_norm": tail, "threshold": sim.consensus_threshold, "holds": tail < sim.consensus_threshold}
        elif check == "lyapunov_decay":
            ratio = float(lyapunov_decay_ratio(trace, bank).max())
            results[check] = {"max_ratio": ratio, "tolerance": DECAY_TOL, "holds": ratio <= 1 + DECAY_TOL}
        elif check == "dissipation":
            slack = float(dissipation_slack(trace, bank).min())
            results[check] = {"min_slack": slack, "tolerance": DISSIPATION_TOL, "holds": slack >= -DISSIPATION_TOL}
    return results


def cmd_simulate(args):
    scen = scn.load(args.scenario)
    if scen.simulation is None:
        raise _Exit(EXIT_INPUT, "scenario has no simulation section")
    out = _out_dir(args, scen)
    bank, reg = load_design(scen, out)
    if args.debug_zero_K:
        log.warning("debug: every coupling gain K^(k) replaced by zero")
        bank = bank.with_gains(K=[np.zeros_like(K) for K in bank.K])
    seed = scen.simulation.seed if args.seed is None else args.seed
    runs = []
    for name, spec, cfg in scen.expanded_runs(seed):
        t0 = time.perf_counter()
        entry = {"name": name, "mode": spec.mode, "xi": cfg.xi.to_dict(), "eta": cfg.eta.to_dict()}
        try:
            if spec.mode == "estimation":
                trace = simulate_estimation(scen.network, bank, cfg)
            else:
                if reg is None:
                    raise _Exit(EXIT_INPUT, "closed-loop run needs a regulator design")
                trace = simulate_closed_loop(scen.network, bank, reg, cfg)
        except NonFiniteState as exc:
            entry.update(status="diverged", diverged_at=exc.t, message=str(exc))
            print(f"run {name}: diverged at t={exc.t:g}", file=sys.stderr)
            runs.append(entry)
            continue
        checks = run_checks(trace, spec, bank, reg, scen.simulation)
        ok = all(c["holds"] for c in checks.values())
        entry.update(
            status="ok" if ok else "violated",
            substeps=trace.substeps,
            integrals={k: float(v[-1]) for k, v in trace.integrals.items()},
            I0=trace.I0,
            eps0_cost=trace.eps0_cost,
            checks=checks,
            seconds=time.perf_counter() - t0,
        )
        if scen.output.traces:
            path = out / "traces" / f"{name}.csv"
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
            os.close(fd)
            trace.to_csv(tmp)
            os.replace(tmp, path)
            entry["trace"] = str(path.relative_to(out))
        for c, res in checks.items():
            if not res["holds"]:
                detail = f"lhs={res['lhs']:.6g} rhs={res['rhs']:.6g}" if "lhs" in res else json.dumps(res)
                print(f"run {name}: check {c} violated ({detail})", file=sys.stderr)
        runs.append(entry)
    doc = {
        "seed": seed,
        "debug_zero_K": bool(args.debug_zero_K),
        "runs": runs,
        "provenance": _provenance(args, scen),
    }
    atomic_write_json(out / VERIFICATION_FILE, doc)
    print(json.dumps({"seed": seed, "runs": [{"name": r["name"], "status": r["status"]} for r in runs]}, indent=2))
    if any(r["status"] == "diverged" for r in runs):
        return EXIT_DIVERGED
    if any(r["status"] == "violated" for r in runs):
        return EXIT_CHECK
    return EXIT_OK


def read_trace_csv(path):
    """Header list and data matrix (possibly with zero rows) of a trace CSV."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, [])
        rows = [[float(v) for v in row] for row in reader if row]
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return header, data


def aggregate_trace(header, data):
    """Per-agent estimation-error norms and output spread over time."""
    idx = {h: i for i, h in enumerate(header)}
    agents = sorted({int(h.split("[")[1].split("]")[0]) for h in header if h.startswith("e[")})
    names = ["t"] + [f"err_norm[{k}]" for k in agents] + ["output_spread"]
    if data.shape[0] == 0:
        return names, np.zeros((0, len(names)))
    cols = [data[:, idx["t"]]]
    for k in agents:
        sel = [i for h, i in idx.items() if h.startswith(f"e[{k}][")]
        cols.append(np.linalg.norm(data[:, sel], axis=1))
    ys = [[i for h, i in idx.items() if h == f"y[{k}]" or h.startswith(f"y[{k}][")] for k in agents]
    Y = np.stack([data[:, s] for s in ys], axis=1)
    diff = Y[:, :, None, :] - Y[:, None, :, :]
    cols.append(np.sqrt(np.sum(diff**2, axis=-1)).max(axis=(1, 2)))
    return names, np.column_stack(cols)


def cmd_report(args):
    scen = scn.load(args.scenario) if args.scenario else None
    out = _out_dir(args, scen)
    required = [out / ANALYSIS_FILE, out / DESIGN_FILE, out / VERIFICATION_FILE]
    missing = [str(p) for p in required if not p.exists()]
    if not missing:
        verification = _read_json(out / VERIFICATION_FILE)
        missing += [str(out / r["trace"]) for r in verification["runs"] if "trace" in r and not (out / r["trace"]).exists()]
    if missing:
        raise _Exit(EXIT_INPUT, "missing artifacts:\n  " + "\n  ".join(missing))
    analysis = _read_json(out / ANALYSIS_FILE)
    design = _read_json(out / DESIGN_FILE)

    runs = []
    for r in verification["runs"]:
        item = {"name": r["name"], "mode": r["mode"], "status": r["status"]}
        if "checks" in r:
            item["checks"] = {c: v["holds"] for c, v in r["checks"].items()}
        if "trace" in r:
            header, data = read_trace_csv(out / r["trace"])
            names, agg = aggregate_trace(header, data)
            agg_path = out / "aggregates" / f"{r['name']}.csv"
            lines = [",".join(names)] + [",".join(repr(float(v)) for v in row) for row in agg]
            atomic_write_text(agg_path, "\n".join(lines) + "\n")
            item["aggregate"] = str(agg_path.relative_to(out))
            item["n_samples"] = int(data.shape[0])
            if data.shape[0]:
                item["final_output_spread"] = float(agg[-1, -1])
                item["max_final_error_norm"] = float(agg[-1, 1:-1].max())
        runs.append(item)

    reg = design.get("regulator")
    central = design.get("centralized")
    report = {
        "necessary_condition_holds": analysis["necessary_condition_holds"],
        "gamma": design["estimator"]["gamma"],
        "design_mode": design["mode"],
        "centralized_gamma": None if central is None else central["gamma"],
        "kappa": None if reg is None else reg["kappa"],
        "theta": None if reg is None else reg["theta"],
        "runs": runs,
        "all_checks_hold": all(r["status"] == "ok" for r in runs),
    }
    atomic_write_json(out / REPORT_FILE, report)

    lines = [f"necessary condition (iSCC detectability): {'pass' if report['necessary_condition_holds'] else 'FAIL'}"]
    lines.append(f"estimator performance level gamma ({report['design_mode']}): {report['gamma']:.4f}")
    if report["centralized_gamma"] is not None:
        lines.append(f"centralized baseline gamma: {report['centralized_gamma']:.4f}")
    if reg is not None:
        lines.append(f"synchronization bounds: kappa = {reg['kappa']:.4f}, theta = {reg['theta']:.4f}")
    for r in runs:
        checks = ", ".join(f"{c}={'ok' if h else 'FAIL'}" for c, h in r.get("checks", {}).items())
        lines.append(f"run {r['name']:<28} {r['status']:<9} {checks}")
    print("\n".join(lines))
    return EXIT_OK


def _provenance(args, scen):
    return {
        "tool": "coopest",
        "version": __version__,
        "command": args.command,
        "scenario": str(args.scenario) if getattr(args, "scenario", None) else None,
        "scenario_name": None if scen is None else scen.name,
        "seed": getattr(args, "seed", None),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }


# ---------------------------------------------------------------------- main


def build_parser():
    parser = argparse.ArgumentParser(prog="coopest", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenario_required=True):
        p.add_argument("--scenario", required=scenario_required, help="scenario JSON file")
        p.add_argument("--out", help="output directory (default: the scenario's output.dir)")
        p.add_argument("--strict", action="store_true", help="treat warnings as errors (exit 8)")
        p.add_argument("-v", "--verbose", action="count", default=0)

    common(sub.add_parser("analyze", help="graph decomposition and detectability"))
    p = sub.add_parser("design", help="regulator and estimator synthesis")
    common(p)
    p.add_argument("--gamma", type=float, help="feasibility at this level instead of minimization")
    p = sub.add_parser("simulate", help="run the configured simulations and checks")
    common(p)
    p.add_argument("--seed", type=int, help="override the scenario's base seed")
    p.add_argument("--debug-zero-K", dest="debug_zero_K", action="store_true", help="replace all coupling gains by zero")
    common(sub.add_parser("report", help="summarize artifacts and write plot-ready aggregates"), scenario_required=False)
    return parser


COMMANDS = {"analyze": cmd_analyze, "design": cmd_design, "simulate": cmd_simulate, "report": cmd_report}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    counter = _WarningCounter()
    root = logging.getLogger("coopest")
    root.addHandler(counter)
    try:
        code = COMMANDS[args.command](args)
    except _Exit as exc:
        if str(exc):
            print(f"error: {exc}", file=sys.stderr)
        code = exc.code
    except ScenarioError as exc:
        print(f"error: malformed scenario: {exc}", file=sys.stderr)
        code = EXIT_INPUT
    except IsolatedAgent as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_NECESSARY
    except (DimensionMismatch, ValueError) as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        code = EXIT_INPUT
    except CoopestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_INPUT
    finally:
        root.removeHandler(counter)
    if code == EXIT_OK and args.strict and counter.records:
        print(f"error: --strict and {len(counter.records)} warning(s) emitted", file=sys.stderr)
        code = EXIT_STRICT
    return code


if __name__ == "__main__":
    sys.exit(main())
