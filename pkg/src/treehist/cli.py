"""Command-line front end: experiment sweeps to CSV with JSON sidecars.

Subcommands: delta, pointer, lg, stats, moments, validate.  Every CSV is
accompanied by a sidecar (same path, .json) holding the resolved
configuration, package version, and wall time; deterministic paths rerun
bit-identically for a fixed seed.  Exit codes: 0 success, 1 validation
failure, 2 bad arguments.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, moments, oracle, stats
from .algebra import Z, ModelParams, build_isometry, scaling_data, v_super, v_super_like
from .histories import GridSpec, delta_probe, fine_grained_probe, marginal_distribution, single_time_distribution
from .leggett_garg import LGConfig, keldysh_correlator, lg_scan
from .pointer import completeness_check, conditional_state, ensemble_sample
from .stats import encoding_covariance, freezing_distribution, predict_delta_scaling, sample_histories


def parse_theta(text: str) -> float:
    """Angle in radians, or in units of pi with a 'pi' suffix ('0.15pi')."""
    text = text.strip().lower()
    if text.endswith("pi"):
        return float(text[:-2]) * math.pi
    return float(text)


def parse_range(text: str) -> list[int]:
    """'2..10' -> [2, ..., 10]; a single integer is a one-element range."""
    if ".." in text:
        lo, hi = text.split("..", 1)
        lo, hi = int(lo), int(hi)
        if hi < lo:
            raise ValueError(f"empty range {text!r}")
        return list(range(lo, hi + 1))
    return [int(text)]


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_sidecar(path: Path, config: dict, wall_time: float) -> None:
    sidecar = path.with_suffix(".json")
    payload = {"config": config, "version": __version__, "wall_time_s": wall_time}
    with open(sidecar, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _grid(args, gamma: float) -> GridSpec:
    n_w = args.n_w if args.n_w else 4096
    if args.w_max:
        return GridSpec(n_w=n_w, w_max=args.w_max)
    default = GridSpec.for_gamma(gamma)
    return GridSpec(n_w=n_w, w_max=default.w_max)


def _parallel_map(fn, items, threads: int):
    """Ordered map over sweep points; MC inside each point is single-threaded."""
    if threads <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def cmd_delta(args) -> int:
    params = ModelParams(theta=args.theta, gamma=args.gamma)
    grid = _grid(args, args.gamma)
    taus = parse_range(args.tau)
    windows = parse_range(args.L)
    points = [(tau, L) for tau in taus for L in windows]

    def run(point):
        tau, window = point
        if args.fine_grained is not None:
            result = fine_grained_probe(params, tau, tau + window, args.fine_grained, grid, args.samples, args.seed)
        else:
            result = delta_probe(params, tau, tau + window, grid, args.samples, args.seed)
        return [tau, window, result.l1, result.stderr, predict_delta_scaling(params, tau, window)]

    rows = _parallel_map(run, points, args.threads)
    write_csv(args.out, ["tau", "L", "l1", "stderr", "prediction"], rows)
    return 0


def cmd_pointer(args) -> int:
    params = ModelParams(theta=args.theta, gamma=args.gamma)
    grid = _grid(args, args.gamma)
    samples = ensemble_sample(params, args.t, grid, args.count, args.seed)
    rows = [[s.m, s.p, *s.bloch, s.purity] for s in samples]
    write_csv(args.out, ["m", "p", "bloch_x", "bloch_y", "bloch_z", "purity"], rows)
    table = single_time_distribution(params, args.t, grid)
    residual = completeness_check(table)
    density_rows = []
    for idx in range(len(table.n)):
        if table.density[idx] <= 1e-12:
            continue
        ps = conditional_state(table, float(table.n[idx]))
        density_rows.append([ps.m, ps.p, *ps.bloch, ps.purity, residual])
    density_path = args.out.with_name(args.out.stem + "_density" + args.out.suffix)
    write_csv(density_path, ["m", "p", "bloch_x", "bloch_y", "bloch_z", "purity", "completeness"], density_rows)
    return 0


def cmd_lg(args) -> int:
    params = ModelParams(theta=args.theta, gamma=args.gamma)
    t_values = parse_range(args.t_range)
    rows_dicts = lg_scan(params, args.t_m, range(t_values[0], t_values[-1] + 1))
    rows = [[r["t"], r["C12"], r["C23"], r["C34"], r["C14"], r["LG"]] for r in rows_dicts]
    write_csv(args.out, ["t", "C12", "C23", "C34", "C14", "LG"], rows)
    return 0


def cmd_stats(args) -> int:
    params = ModelParams(theta=args.theta, gamma=args.gamma)
    if args.kind == "covariance":
        rows = [[dt, encoding_covariance(params, dt), -(params.x - 0.5) * dt] for dt in range(args.dt_max + 1)]
        write_csv(args.out, ["dt", "covariance", "log2_asymptote"], rows)
    elif args.kind == "freezing":
        grid = _grid(args, args.gamma)
        table = freezing_distribution(params, grid)
        rows = [[n, p] for n, p in zip(table.n, table.density)]
        write_csv(args.out, ["m", "density"], rows)
    else:
        seqs = sample_histories(params, args.length, args.count, args.seed)
        rows = [[h, t, seqs[h, t]] for h in range(args.count) for t in range(args.length)]
        write_csv(args.out, ["history", "step", "m"], rows)
    return 0


def cmd_moments(args) -> int:
    params = ModelParams(theta=args.theta, gamma=args.gamma)
    frac = moments.FractionSpec(mode=args.fraction, t0=args.t0)
    rows = []
    for t in parse_range(args.t_range):
        mu_t, eta2_t = moments.fraction_moments(params, t, frac, Z)
        rows.append([t, mu_t, eta2_t, mu_t / math.sqrt(eta2_t), moments.eta_squared_asymptotic(params, t)])
    write_csv(args.out, ["t", "mu", "eta_squared", "signal_to_noise", "eta_squared_asymptotic"], rows)
    return 0


def _validate_checks(theta_error: float):
    """Oracle-vs-fast-path comparisons at small depth plus algebra identities.

    theta_error perturbs the fast path only, to prove the harness detects
    disagreement.
    """
    checks = []
    rng = np.random.default_rng(20240901)

    def check(name, value, tol):
        checks.append((name, float(value), float(tol), bool(value <= tol)))

    thetas = rng.uniform(0.02, math.pi / 2 - 0.02, size=20)
    worst_iso = 0.0
    worst_scaling = 0.0
    for theta in thetas:
        if abs(theta - math.pi / 4) < 1e-3:
            theta += 2e-3
        p = ModelParams(theta=theta)
        v = build_isometry(p)
        sd = scaling_data(p)
        worst_iso = max(
            worst_iso,
            np.abs(v.conj().T @ v - np.eye(2)).max(),
            np.abs(v @ np.array([[0, 1], [1, 0]]) - np.kron([[0, 1], [1, 0]], [[0, 1], [1, 0]]) @ v).max(),
        )
        left = v_super_like(v, sd.o_x, np.eye(2)) - math.cos(theta) * sd.o_x
        fused = v_super_like(v, sd.o_x, sd.o_x) - sd.c_xx_0 * np.eye(2) + math.sin(theta) ** 2 * sd.o_eps
        worst_scaling = max(worst_scaling, np.abs(left).max(), np.abs(fused).max())
    check("isometry+Z2 identities (20 thetas)", worst_iso, 1e-12)
    check("scaling relation + xx fusion (20 thetas)", worst_scaling, 1e-12)

    for theta in (0.15 * math.pi, 0.3 * math.pi):
        fast = ModelParams(theta=theta + theta_error, gamma=0.1)
        worst_mom = 0.0
        for t in (1, 2, 3):
            st = oracle.oracle_evolve(theta, t)
            mu_or, eta2_or = oracle.magnetization_moments(st)
            worst_mom = max(
                worst_mom,
                abs(mu_or - moments.mu(fast, t, Z)) / abs(mu_or),
                abs(eta2_or - moments.eta_squared(fast, t)) / eta2_or,
            )
        check(f"moments vs oracle (theta={theta / math.pi:.2f}pi, t<=3)", worst_mom, 1e-10)

        grid = GridSpec.for_gamma(0.1, n_w=1024)
        table = single_time_distribution(fast, 3, grid)
        st3 = oracle.oracle_evolve(theta, 3)
        reference = oracle.single_time_density(st3, table.n, 0.1)
        check(f"single-time vs oracle (theta={theta / math.pi:.2f}pi, T=3)", np.abs(table.density - reference).max(), 1e-6)

        q_or = oracle.conditional_states(st3, table.n, 0.1)
        check(
            f"conditional states vs oracle (theta={theta / math.pi:.2f}pi)",
            np.abs(q_or - np.transpose(table.q, (0, 2, 1)) / 2).max(),
            1e-6,
        )

        mar = marginal_distribution(fast, 2, 3, grid, samples=600, seed=17)
        m2_axis = np.linspace(-6, 6, 512)
        ref = np.zeros_like(table.n)
        v_mat = oracle._isometry_matrix(theta)
        base = oracle.oracle_evolve(theta, 2)
        for m2 in m2_axis:
            s2 = oracle.oracle_kraus(base, m2, 0.1)
            s3 = oracle.OracleState(theta, 3, oracle._apply_layer(s2.amps, 4, v_mat))
            ref += oracle.single_time_density(s3, table.n, 0.1)
        ref *= m2_axis[1] - m2_axis[0]
        pulls = np.abs(mar.density - ref) / (mar.stderr + 1e-14)
        check(f"marginal vs oracle (theta={theta / math.pi:.2f}pi, 3 sigma)", pulls.max() / 3.0, 1.0)

        worst_keldysh = 0.0
        for _ in range(3):
            vec = rng.normal(size=3)
            vec /= np.linalg.norm(vec)
            q = vec[0] * np.array([[0, 1], [1, 0]], dtype=complex) + vec[1] * np.array(
                [[0, -1j], [1j, 0]]
            ) + vec[2] * np.array([[1, 0], [0, -1]], dtype=complex)
            for s, t in ((1, 2), (2, 4)):
                worst_keldysh = max(
                    worst_keldysh,
                    abs(keldysh_correlator(fast, s, t, q) - oracle.keldysh_oracle(theta, s, t, q)),
                )
        check(f"Keldysh correlator vs oracle (theta={theta / math.pi:.2f}pi)", worst_keldysh, 1e-10)
    return checks


def cmd_validate(args) -> int:
    checks = _validate_checks(args.inject_theta_error)
    failed = [c for c in checks if not c[3]]
    for name, value, tol, ok in checks:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {value:.3e} (tolerance {tol:.0e})")
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="treehist", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True):
        p.add_argument("--config", type=Path, default=None, help="JSON file whose entries override flags")
        p.add_argument("--theta", type=parse_theta, default=0.15 * math.pi, help="radians, or multiples of pi with 'pi' suffix")
        p.add_argument("--gamma", type=float, default=0.1)
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--n-w", dest="n_w", type=int, default=0, help="override grid size")
        p.add_argument("--w-max", dest="w_max", type=float, default=0.0, help="override grid cutoff")
        if needs_out:
            p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("delta", help="L1 disturbance probe sweeps")
    common(p)
    p.add_argument("--tau", required=True, help="e.g. 2..10 or 6")
    p.add_argument("--L", required=True, help="window length(s), e.g. 3 or 2..4")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--fine-grained", dest="fine_grained", type=float, default=None, help="absolute precision gamma_abs")
    p.set_defaults(fn=cmd_delta)

    p = sub.add_parser("pointer", help="pointer-state ensemble and outcome density")
    common(p)
    p.add_argument("--t", type=int, default=20)
    p.add_argument("--count", type=int, default=400)
    p.set_defaults(fn=cmd_pointer)

    p = sub.add_parser("lg", help="Leggett-Garg scan")
    common(p)
    p.add_argument("--t-m", dest="t_m", type=int, default=8)
    p.add_argument("--t-range", dest="t_range", default="1..16")
    p.set_defaults(fn=cmd_lg)

    p = sub.add_parser("stats", help="history-statistics outputs")
    common(p)
    p.add_argument("--kind", choices=("covariance", "freezing", "histories"), required=True)
    p.add_argument("--dt-max", dest="dt_max", type=int, default=12)
    p.add_argument("--length", type=int, default=24)
    p.add_argument("--count", type=int, default=5)
    p.set_defaults(fn=cmd_stats)

    p = sub.add_parser("moments", help="signal/noise moments vs depth")
    common(p)
    p.add_argument("--t-range", dest="t_range", default="1..20")
    p.add_argument("--fraction", choices=("full", "compact_subtree", "dilute"), default="full")
    p.add_argument("--t0", type=int, default=0)
    p.set_defaults(fn=cmd_moments)

    p = sub.add_parser("validate", help="oracle cross-validation suite")
    common(p, needs_out=False)
    p.add_argument("--inject-theta-error", dest="inject_theta_error", type=float, default=0.0,
                   help="perturb the fast path to confirm detection (self-test)")
    p.set_defaults(fn=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None) is not None:
        overrides = json.loads(Path(args.config).read_text())
        for key, value in overrides.items():
            key = key.replace("-", "_")
            if not hasattr(args, key):
                parser.error(f"unknown config key {key!r}")
            if key == "theta" and isinstance(value, str):
                value = parse_theta(value)
            if key == "out":
                value = Path(value)
            setattr(args, key, value)
    started = time.time()
    try:
        code = args.fn(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if getattr(args, "out", None) is not None and code == 0:
        config = {
            k: (str(v) if isinstance(v, Path) else v)
            for k, v in vars(args).items()
            if k not in ("fn", "config") and v is not None
        }
        write_sidecar(args.out, config, time.time() - started)
    return code


if __name__ == "__main__":
    sys.exit(main())
