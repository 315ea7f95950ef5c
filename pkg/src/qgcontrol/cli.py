"""Command-line front end: spectra, gap reports, operators, moment problems,
steering experiments, rank checks, and run summaries.

Every command writes its artifacts under --out-dir together with an
append-only run record (runs.jsonl).  Artifact files contain no timestamps and
all randomness flows through --seed, so identical configuration and seed
reproduce identical bytes.

Exit codes: 0 ok, 1 internal error, 2 input error, 3 hypothesis failed,
4 steering diverged.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, dynamics, fields, gaps, moments, spectra, steering
from .graphs import GraphError, load_graph, ratio_analysis

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2
EXIT_HYPOTHESIS = 3
EXIT_DIVERGED = 4


def _config_hash(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, default=repr).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _record_run(out_dir: Path, command: str, config: dict, outputs: list[str], t0: float) -> None:
    record = {
        "command": command,
        "config_hash": _config_hash(config),
        "config": config,
        "outputs": outputs,
        "started": t0,
        "finished": time.time(),
        "version": __version__,
    }
    with open(out_dir / "runs.jsonl", "a") as fh:
        fh.write(json.dumps(record, sort_keys=True, default=repr) + "\n")


def _apply_threads(n: int | None) -> None:
    if not n:
        return
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(limits=n)
    except ImportError:  # pragma: no cover - depends on environment
        pass


def _load_graph_checked(path: str):
    p = Path(path)
    if not p.exists():
        raise GraphError(f"graph file {path} does not exist")
    return load_graph(p)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_spectrum(args, out_dir: Path) -> int:
    g = _load_graph_checked(args.graph)
    basis = spectra.compute_spectrum(g, args.K)
    csv_path = out_dir / "spectrum.csv"
    spectra.spectrum_to_csv(basis, csv_path)
    c1, c2 = spectra.weyl_fit(basis.lambdas) if args.K >= 2 else (float("nan"),) * 2
    weyl_path = out_dir / "weyl.json"
    _write_json(
        weyl_path,
        {
            "K": basis.K,
            "lambda_1": repr(float(basis.lambdas[0])),
            "weyl_C1": repr(c1),
            "weyl_C2": repr(c2),
        },
    )
    print(f"spectrum: K={basis.K} lambda_1={basis.lambdas[0]:.10g} -> {csv_path}")
    return EXIT_OK


def cmd_gaps(args, out_dir: Path) -> int:
    g = _load_graph_checked(args.graph)
    basis = spectra.compute_spectrum(g, args.K)
    distinct, collapse = gaps.collapse_multiplicities(basis.lambdas)
    if args.M is not None:
        report = gaps.fit_gap_constants(distinct, args.M, collapse_map=collapse)
    else:
        report = gaps.best_gap_report(distinct, collapse_map=collapse)
    ratios = ratio_analysis([e.length for e in g.edges])
    payload = report.to_dict()
    payload["lengths_declared"] = ratios.declared
    payload["ratios_irrational"] = ratios.ratios_irrational
    payload["rational_ratio_pairs"] = [list(p) for p in ratios.rational_ratio_pairs]
    out_path = out_dir / "gaps.json"
    _write_json(out_path, payload)
    failed = bool(report.violations) or ratios.ratios_irrational is False
    print(
        f"gaps: M={report.M} delta={report.delta:.6g} d~={report.d_tilde} "
        f"C={report.C_fit:.6g} violations={len(report.violations)} -> {out_path}"
    )
    return EXIT_HYPOTHESIS if failed else EXIT_OK


def _field_for(args, g):
    if args.field in fields.FIELD_PRESETS:
        return fields.FIELD_PRESETS[args.field](g)
    doc = json.loads(Path(args.field).read_text())
    return fields.field_from_doc(doc, g)


def cmd_operator(args, out_dir: Path) -> int:
    g = _load_graph_checked(args.graph)
    basis = spectra.compute_spectrum(g, args.K)
    field = _field_for(args, g)
    B = fields.matrix_elements(field, basis)
    mat_path = out_dir / "operator.csv"
    with open(mat_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["j", "k", "re", "im"])
        for j in range(B.K):
            for k in range(B.K):
                writer.writerow(
                    [j + 1, k + 1, repr(float(B.matrix[j, k].real)), repr(float(B.matrix[j, k].imag))]
                )
    c_fit, violations = fields.coupling_decay_fit(B, args.exponent)
    resonances = fields.resonance_collision_check(B, basis.lambdas, tol=args.tol)
    checks = {
        "K": B.K,
        "coupling_exponent": args.exponent,
        "coupling_C": repr(c_fit),
        "coupling_violations": violations,
        "resonance_tol": repr(args.tol),
        "resonance_failures": [list(map(list, q)) for q in resonances],
    }
    if field.kind == "multiplication":
        defects = fields.field_vertex_defects(field, g, max_order=0)
        checks["vertex_defects"] = {
            v: [[repr(float(a)), repr(float(b))] for a, b in rows] for v, rows in defects.items()
        }
    checks_path = out_dir / "operator_checks.json"
    _write_json(checks_path, checks)
    print(
        f"operator: K={B.K} coupling_C={c_fit:.6g} "
        f"violations={len(violations)} resonance_failures={len(resonances)}"
    )
    failed = bool(violations) or bool(resonances)
    return EXIT_HYPOTHESIS if failed else EXIT_OK


def cmd_moments(args, out_dir: Path) -> int:
    cfg = json.loads(Path(args.config).read_text())
    T = float(cfg["T"])
    if "frequencies" in cfg:
        freqs = np.array(cfg["frequencies"], dtype=float)
        targets = np.array(cfg["targets_re"], dtype=float) + 1j * np.array(
            cfg.get("targets_im", np.zeros(len(freqs))), dtype=float
        )
    else:
        g = _load_graph_checked(cfg["graph"])
        basis = spectra.compute_spectrum(g, int(cfg["K"]))
        freqs = basis.lambdas - basis.lambdas[0]
        rng = np.random.default_rng(args.seed)
        decay = float(cfg.get("target_decay", 1.0))
        targets = (rng.standard_normal(len(freqs)) + 1j * rng.standard_normal(len(freqs)))
        targets /= np.arange(1, len(freqs) + 1, dtype=float) ** decay
        targets[0] = targets[0].real
    problem = moments.MomentProblem(frequencies=freqs, targets=targets, horizon=T)
    signal = moments.solve_moments(problem)
    achieved = moments.signal_moments(signal, freqs)
    residual = float(np.linalg.norm(achieved - targets))
    signal.write_csv(out_dir / "control.csv")
    signal.write_json(out_dir / "control.json")
    _write_json(
        out_dir / "moments_check.json",
        {
            "residual": repr(residual),
            "cond": repr(signal.condition_number),
            "max_imag": repr(signal.max_imag()),
        },
    )
    print(f"moments: residual={residual:.3e} cond={signal.condition_number:.3e}")
    return EXIT_OK


def _phase_aligned_target(K: int, s: float, eps: float, rng, decay: float = 1.0):
    """Random tangent target at graded distance ~eps from the ground state,
    phase-aligned so the first component stays real."""
    xi = rng.standard_normal(K) + 1j * rng.standard_normal(K)
    xi /= np.arange(1, K + 1, dtype=float) ** (s + decay)
    xi[0] = 0.0
    norm = dynamics.graded_norm(xi, s)
    xi *= 0.9 * eps / norm if eps > 0 else 0.0
    target = xi.astype(complex)
    target[0] = np.sqrt(max(0.0, 1.0 - float(np.linalg.norm(xi)) ** 2))
    return target


def cmd_steer(args, out_dir: Path) -> int:
    cfg = json.loads(Path(args.config).read_text())
    g = _load_graph_checked(cfg["graph"])
    K = int(cfg.get("K", 30))
    basis = spectra.compute_spectrum(g, K)
    field_name = cfg.get("field", "star-quartic")
    field = fields.FIELD_PRESETS[field_name](g) if field_name in fields.FIELD_PRESETS else (
        fields.field_from_doc(cfg["field"], g)
    )
    B = fields.matrix_elements(field, basis)
    distinct, _ = gaps.collapse_multiplicities(basis.lambdas)
    gap_report = gaps.best_gap_report(distinct)
    T = float(cfg["T"]) if cfg.get("T") else 4.0 * np.pi / gap_report.delta
    eps = float(cfg.get("epsilon", 1e-3))
    s = float(cfg.get("s", 4.1))
    max_iters = int(cfg.get("max_iters", 5))
    steps = int(cfg.get("steps_per_leg", 8192))
    seed = int(cfg.get("seed", args.seed))
    rng = np.random.default_rng(seed)
    target = _phase_aligned_target(K, s, eps, rng, decay=float(cfg.get("target_decay", 1.0)))
    problem = steering.SteeringProblem(
        basis=basis, coupling=B, horizon=T, target=target, eps=eps, s=s,
        delta=gap_report.delta,
    )
    result = steering.steer(problem, max_iters, steps_per_leg=steps)
    history = {
        "errors": [repr(e) for e in result.errors],
        "converged": result.converged,
        "diverged": result.diverged,
        "iterations": result.iterations,
        "T": repr(T),
        "K": K,
        "epsilon": repr(eps),
        "s": repr(s),
        "seed": seed,
    }
    _write_json(out_dir / "history.json", history)
    with open(out_dir / "error_history.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "error"])
        for i, e in enumerate(result.errors):
            writer.writerow([i, repr(float(e))])
    with open(out_dir / "control_t_u.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "u"])
        for leg, control in enumerate(result.controls):
            t, u = control.sample(2048)
            for ti, ui in zip(t, u):
                writer.writerow([repr(float(leg * T + ti)), repr(float(ui.real))])
    for leg, control in enumerate(result.controls, start=1):
        control.write_json(out_dir / f"control_leg{leg}.json")
    summary = {
        "final_error": repr(result.errors[-1]),
        "legs": result.iterations,
        "total_time": repr(T * result.iterations),
    }
    _write_json(out_dir / "trajectory_summary.json", summary)
    print(
        f"steer: errors={['%.3e' % e for e in result.errors]} "
        f"converged={result.converged} diverged={result.diverged}"
    )
    return EXIT_OK if result.converged else EXIT_DIVERGED


def cmd_lie_rank(args, out_dir: Path) -> int:
    g = _load_graph_checked(args.graph)
    basis = spectra.compute_spectrum(g, args.K)
    field = _field_for(args, g)
    B = fields.matrix_elements(field, basis)
    pairs = steering.resonant_pairs(basis.lambdas, B, args.n1, tol=args.tol)
    genset = steering.LieGeneratorSet(args.n1, tuple(pairs))
    rank = steering.lie_rank(genset)
    full = args.n1**2 - 1
    payload = {
        "n1": args.n1,
        "pairs": [list(p) for p in pairs],
        "rank": rank,
        "full_dimension": full,
        "controllable": rank == full,
    }
    _write_json(out_dir / "lie_rank.json", payload)
    print(f"lie-rank: pairs={len(pairs)} rank={rank}/{full}")
    return EXIT_OK


def cmd_report(args, out_dir: Path) -> int:
    path = out_dir / "runs.jsonl"
    if not path.exists():
        print("no runs recorded", file=sys.stderr)
        return EXIT_INPUT
    lines = [json.loads(line) for line in path.read_text().splitlines() if line.strip()]
    report_path = out_dir / "report.md"
    with open(report_path, "w") as fh:
        fh.write("# Run summary\n\n")
        fh.write("| # | command | config hash | outputs |\n|---|---|---|---|\n")
        for i, rec in enumerate(lines, start=1):
            fh.write(
                f"| {i} | {rec['command']} | {rec['config_hash']} | "
                f"{', '.join(rec['outputs'])} |\n"
            )
    print(f"report: {len(lines)} runs -> {report_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing and dispatch
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qgcontrol",
        description="Metric-graph spectra, gap certificates, and bilinear control synthesis.",
    )
    parser.add_argument("--seed", type=int, default=0, help="seed for all randomness")
    parser.add_argument("--out-dir", default=".", help="artifact directory")
    parser.add_argument("--threads", type=int, default=None, help="BLAS thread cap")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="eigenvalues and eigenfunction coefficients")
    p.add_argument("graph")
    p.add_argument("-K", type=int, default=10)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("gaps", help="spectral gap constants and declared-ratio flags")
    p.add_argument("graph")
    p.add_argument("-K", type=int, default=200)
    p.add_argument("-M", type=int, default=None)
    p.set_defaults(func=cmd_gaps)

    p = sub.add_parser("operator", help="control-operator matrix and coupling checks")
    p.add_argument("graph")
    p.add_argument("--field", default="star-quartic")
    p.add_argument("-K", type=int, default=40)
    p.add_argument("--exponent", type=float, default=4.1)
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_operator)

    p = sub.add_parser("moments", help="solve a trigonometric moment problem")
    p.add_argument("config")
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("steer", help="local steering experiment")
    p.add_argument("config")
    p.set_defaults(func=cmd_steer)

    p = sub.add_parser("lie-rank", help="rank of the admissible rotation algebra")
    p.add_argument("graph")
    p.add_argument("--field", default="star-quartic")
    p.add_argument("--n1", type=int, default=4)
    p.add_argument("-K", type=int, default=12)
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_lie_rank)

    p = sub.add_parser("report", help="summarize recorded runs")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    t0 = time.time()
    out_dir = Path(args.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        _apply_threads(args.threads)
        before = {p.name for p in out_dir.iterdir()}
        code = args.func(args, out_dir)
        outputs = sorted(
            p.name
            for p in out_dir.iterdir()
            if p.name not in before and p.name != "runs.jsonl"
        )
        config = {
            k: v for k, v in vars(args).items() if k not in ("func",) and v is not None
        }
        _record_run(out_dir, args.command, config, outputs, t0)
        return code
    except (GraphError, fields.FieldError, json.JSONDecodeError, FileNotFoundError, KeyError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (
        spectra.SpectralError,
        gaps.GapHypothesisError,
        moments.MomentError,
        steering.SteeringError,
    ) as exc:
        print(f"hypothesis failed: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
