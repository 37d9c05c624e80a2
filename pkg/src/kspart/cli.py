"""Command-line entry point: simulate, threebody, sweep, rescale and check.

Exit codes are 0 on success, 1 for configuration errors and 2 for
numerical failures. ``KSPART_OUT_DIR`` overrides the output directory of a
config file; an explicit ``--out-dir`` overrides both.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import threebody as tb
from .blowup import BlowUpReport, detect_blowup_sets, nested_membership
from .diagnostics import stability_constants
from .dynamics import IntegratorConfig, Trajectory, integrate
from .io import (ConfigError, RunConfig, build_initial, load_config, parse_initial,
                 read_trajectory_csv, rescaled_header, write_csv, write_diagnostics_csv,
                 write_json, write_trajectory_csv)
from .model import (IndexWindow, OrderingError, ParticleState, RungError, SingularityError,
                    critical_ladder, energy, log_hls_functional)
from .rescaled import (RescaledSeries, RigidityReport, check_conditions_r1_r6,
                       local_rescaled_energy, local_rescaled_gradient, rescaled_energy,
                       to_rescaled)

log = logging.getLogger("kspart")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2
OUT_DIR_ENV = "KSPART_OUT_DIR"
NUMERIC_ERRORS = (FloatingPointError, SingularityError, OrderingError, ArithmeticError,
                  RuntimeError)
# frames closer to the blow-up time than this fraction of it are dropped
# before rescaling: there t is no longer resolved against T - t
RESCALE_CUTOFF = 1e-8


def window_alpha(n: int, chi: float, size: int) -> float:
    """Collapse rate of a contiguous set of `size` particles."""
    return (size - 1) * (chi * size / (n + 1) - 1.0)


@dataclass
class SimulationResult:
    config: RunConfig
    trajectory: Trajectory
    report: BlowUpReport | None = None
    window: IndexWindow | None = None
    series: RescaledSeries | None = None
    rigidity: RigidityReport | None = None
    notes: list[str] = field(default_factory=list)

    def summary(self) -> dict:
        ladder = critical_ladder(self.config.n, self.config.chi)
        out = {"stop_reason": self.trajectory.stop_reason,
               "n_steps": self.trajectory.n_steps,
               "t_final": float(self.trajectory.times[-1]),
               "t_hat": None, "method": None, "sets": [],
               "k_expected": ladder.k_star, "quantization": False,
               "constants": None, "partial": self.trajectory.stop_reason == "step_underflow",
               "notes": list(self.notes)}
        if self.report is not None:
            out.update(self.report.as_dict())
        k = ladder.k_star
        if k is not None:
            try:
                out["constants"] = stability_constants(self.config.n, self.config.chi,
                                                       k).as_dict()
            except RungError:
                pass
        if self.rigidity is not None:
            out["rescaled"] = {"window": self.window.as_list(),
                               "alpha": self.series.alpha,
                               **self.rigidity.as_dict()}
        return out


def _membership_eps(cfg: RunConfig) -> float | None:
    if cfg.initial.get("kind") == "clustered":
        return float(cfg.initial["eps"])
    return cfg.initial.get("membership_eps")


def diagnostics_rows(res: SimulationResult):
    """Per-frame rows matching `io.DIAGNOSTICS_HEADER`.

    The inner window is the largest detected blow-up set or, without one,
    the size-``k`` window of least variance in the last frame. The HLS
    column is the smallest log-HLS value over all windows of the inner size.
    """
    traj, cfg = res.trajectory, res.config
    x = traj.positions
    n = traj.n
    win = res.window
    if win is None:
        k = critical_ladder(n, cfg.chi).k_star
        if k is not None and k >= 2:
            var = [np.var(x[-1, s:s + k]) for s in range(n - k + 1)]
            s = int(np.argmin(var))
            win = IndexWindow(s + 1, s + k)
    member = None
    eps = _membership_eps(cfg)
    if eps is not None and win is not None:
        try:
            const = stability_constants(n, cfg.chi, win.size)
            member = nested_membership(traj, const, float(eps))
        except RungError:
            member = None
    xc = x - x.mean(axis=1, keepdims=True)
    pi2_total = np.sum(xc ** 2, axis=1)
    for m, t in enumerate(traj.times):
        row = x[m]
        e = energy(ParticleState(row, cfg.chi))
        if win is None:
            yield [t, e, pi2_total[m], None, None, None, None, None]
            continue
        xi = row[win.sl]
        outer = win.outer_mask(n)
        pi2_in = float(np.sum((xi - xi.mean()) ** 2))
        if outer.any():
            d = row[outer][:, None] - xi[None, :]
            h2, h4 = float(np.sum(d ** -2.0)), float(np.sum(d ** -4.0))
        else:
            h2 = h4 = None
        k = win.size
        hls = (min(log_hls_functional(row[s:s + k]) for s in range(n - k + 1))
               if k >= 2 else None)
        flag = None if member is None else bool(member[m])
        yield [t, e, pi2_total[m], pi2_in, h2, h4, hls, flag]


def rescaled_rows(series: RescaledSeries, window: IndexWindow):
    chi, a = series.chi, series.alpha
    for tau, y in zip(series.tau, series.y):
        yield ([tau] + y.tolist()
               + [rescaled_energy(y, chi, a), local_rescaled_energy(y, window, chi, a),
                  float(np.linalg.norm(local_rescaled_gradient(y, window, chi, a)))])


def analyze_collapse(traj: Trajectory, res: SimulationResult) -> None:
    """Detect blow-up sets, rescale about the largest one and check R1-R6."""
    report = detect_blowup_sets(traj, t_hat_method="variance_linear_fit")
    res.report = report
    main = max(report.sets, key=lambda s: s.size)
    res.window = main.window
    a = window_alpha(traj.n, traj.chi, main.size)
    if not a > 0:
        res.notes.append(f"set of size {main.size} has non-positive rate; no rescaling")
        return
    keep = traj.times < report.t_hat * (1.0 - RESCALE_CUTOFF)
    sub = Trajectory(traj.times[keep], traj.positions[keep], traj.chi, traj.stop_reason,
                     traj.gap_stop, traj.n_steps)
    if len(sub) < 10:
        res.notes.append("fewer than 10 frames before the blow-up time; no rescaling")
        return
    res.series = to_rescaled(sub, main.window, report.t_hat, main.x_bar, a)
    res.rigidity = check_conditions_r1_r6(res.series)


def simulate(cfg: RunConfig) -> SimulationResult:
    x0 = build_initial(cfg)
    traj = integrate(ParticleState(x0, cfg.chi), cfg.integrator)
    res = SimulationResult(cfg, traj)
    if traj.stop_reason == "gap_collapse":
        analyze_collapse(traj, res)
    return res


def run_simulate(cfg: RunConfig) -> int:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        res = simulate(cfg)
    except ConfigError:
        raise
    except NUMERIC_ERRORS as exc:
        write_json(out / "report.json", {"status": "failed", "partial": True,
                                         "error": str(exc), "config": cfg.to_dict()})
        log.error("integration failed: %s", exc)
        return EXIT_NUMERIC
    if cfg.outputs["trajectory"]:
        write_trajectory_csv(out / "trajectory.csv", res.trajectory)
    if cfg.outputs["diagnostics"]:
        write_diagnostics_csv(out / "diagnostics.csv", diagnostics_rows(res))
    if cfg.outputs["rescaled"] and res.series is not None:
        write_csv(out / "rescaled.csv", rescaled_header(res.trajectory.n),
                  rescaled_rows(res.series, res.window))
    summary = res.summary()
    summary["status"] = "partial" if summary["partial"] else "ok"
    summary["config"] = cfg.to_dict()
    if cfg.outputs["report"]:
        write_json(out / "report.json", summary)
    print(f"stop_reason={summary['stop_reason']} t_hat={summary['t_hat']} "
          f"sets={[s['window'] for s in summary['sets']]} "
          f"quantization={summary['quantization']}")
    return EXIT_NUMERIC if summary["partial"] else EXIT_OK


# ---------------------------------------------------------------- threebody

THREEBODY_MODES = ("portrait", "fixed-points", "liouville", "pair")


def run_threebody(chi: float, mode: str, out_dir, portrait_kind: str = "v") -> int:
    if mode not in THREEBODY_MODES:
        raise ConfigError(f"mode must be one of {THREEBODY_MODES}")
    if not chi > 0:
        raise ConfigError("chi must be positive")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    regime = tb.classify_regime(chi)
    if mode in ("fixed-points", "liouville") and regime not in (
            "triple_symmetric", "triple_asymmetric"):
        raise ConfigError(f"mode {mode} needs 4/3 < chi < 2 off the rungs; regime is {regime}")
    if mode == "pair" and regime != "pair":
        raise ConfigError(f"mode pair needs chi > 2; regime is {regime}")
    if mode == "fixed-points":
        fps = tb.fixed_points(chi)
        d = fps.as_dict()
        d["restricted_eigenvalues"] = [tb.restricted_eigenvalue(p, chi) for p in fps.points]
        d["attractors"] = [list(p) for p in fps.attractors()]
        write_json(out / "fixed_points.json", d)
        print(f"regime={regime} merged={fps.merged} points={fps.points}")
    elif mode == "portrait":
        rows = tb.portrait(chi, portrait_kind)
        write_csv(out / "portrait.csv", ["kind", "index", "x1", "x2", "dx1", "dx2"],
                  ([r[0]] + list(r[1:]) for r in rows))
        print(f"wrote {len(rows)} portrait rows")
    elif mode == "liouville":
        verdict = tb.liouville_check(chi)
        write_json(out / "liouville.json", verdict.as_dict())
        print(f"liouville ok={verdict.ok}")
        if not verdict.ok:
            return EXIT_NUMERIC
    else:
        pa = tb.pair_collapse_analysis(chi)
        write_json(out / "pair.json", pa.as_dict())
        write_csv(out / "pair_path.csv", ["tau", "v1", "v2"], zip(pa.tau, pa.v1, pa.v2))
        print(f"eigenvalues={pa.eigenvalues} v1_final={pa.v1_final} "
              f"escape_rate={pa.escape_rate}")
    return EXIT_OK


# -------------------------------------------------------------------- sweep

SYMMETRY_TOL = 1e-9


def is_mirror_symmetric(x: np.ndarray, tol: float = SYMMETRY_TOL) -> bool:
    xc = x - x.mean()
    return bool(np.max(np.abs(xc + xc[::-1])) <= tol * np.ptp(x))


def _sweep_cell(args) -> dict:
    """One grid cell; runs in a worker process and writes its own file."""
    index, n, chi, seeds, k, include_symmetric, out_dir, gap_stop_rel = args
    ladder = critical_ladder(n, chi)
    k_exp = k if k is not None else ladder.k_star
    runs, failures = [], []
    starts = [(int(s), np.sort(np.random.default_rng(int(s)).uniform(-0.5, 0.5, n)))
              for s in seeds]
    if include_symmetric:
        starts.append((None, np.linspace(-0.5, 0.5, n)))
    for seed, x0 in starts:
        try:
            g0 = float(np.diff(x0).min())
            cfg = IntegratorConfig(gap_stop=gap_stop_rel * g0, t_max=100.0)
            traj = integrate(ParticleState(x0, chi), cfg)
            if traj.stop_reason != "gap_collapse":
                failures.append({"seed": seed, "error": traj.stop_reason})
                continue
            rep = detect_blowup_sets(traj, ladder=ladder)
            sizes = [s.size for s in rep.sets]
            runs.append({"seed": seed, "symmetric": is_mirror_symmetric(x0),
                         "sizes": sizes, "t_hat": rep.t_hat,
                         "quantized": k_exp is not None and all(z == k_exp for z in sizes)})
        except (ValueError, *NUMERIC_ERRORS) as exc:
            failures.append({"seed": seed, "error": str(exc)})
    asym = [r for r in runs if not r["symmetric"]]
    cell = {"index": index, "n": n, "chi": chi, "k_expected": k_exp,
            "regime": ("subcritical" if not ladder.supercritical else
                       "rung" if ladder.on_rung else "supercritical"),
            "seeds": len(seeds), "completed": len(asym),
            # no rate on a rung, where no set size is expected
            "quantization_rate": (float(np.mean([r["quantized"] for r in asym]))
                                  if asym and k_exp is not None else None),
            "symmetric_runs": [r for r in runs if r["symmetric"]],
            "runs": runs, "failures": failures}
    if out_dir is not None:
        write_json(Path(out_dir) / f"cell_{index:04d}.json", cell)
    return cell


def run_sweep(n: int, chis, seed_count: int, master_seed: int = 0, k: int | None = None,
              workers: int = 1, include_symmetric: bool = False, out_dir=None,
              gap_stop_rel: float = 1e-4) -> dict:
    """Quantization rates over a grid of chi values.

    Seeds for cell ``i`` come from ``SeedSequence([master_seed, i])`` so the
    output depends only on the arguments, not on the worker count.
    """
    chis = [float(c) for c in chis]
    tasks = []
    for i, chi in enumerate(chis):
        seeds = np.random.SeedSequence([master_seed, i]).generate_state(seed_count).tolist()
        tasks.append((i, n, chi, seeds, k, include_symmetric,
                      None if out_dir is None else str(out_dir), gap_stop_rel))
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(_sweep_cell, tasks))
    else:
        cells = [_sweep_cell(t) for t in tasks]
    agg = {"n": n, "master_seed": master_seed, "seeds_per_cell": seed_count,
           "cells": [{key: c[key] for key in ("chi", "k_expected", "regime", "seeds",
                                              "completed", "quantization_rate")}
                     | {"failures": len(c["failures"]),
                        "symmetric_sizes": [r["sizes"] for r in c["symmetric_runs"]]}
                     for c in cells]}
    if out_dir is not None:
        write_json(Path(out_dir) / "aggregate.json", agg)
    return agg


# ------------------------------------------------------------------ rescale

def run_rescale(trajectory_path, chi: float, out_dir, t_hat=None, x_bar=None,
                window=None, alpha=None) -> int:
    try:
        times, pos = read_trajectory_csv(trajectory_path)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read trajectory: {exc}") from exc
    traj = Trajectory(times, pos, float(chi), "gap_collapse", 0.0, len(times))
    if window is None or t_hat is None:
        rep = detect_blowup_sets(traj, t_hat_method="variance_linear_fit")
        main = max(rep.sets, key=lambda s: s.size)
        window = window or main.window
        t_hat = rep.t_hat if t_hat is None else t_hat
    window.check(traj.n)
    if x_bar is None:
        x_bar = float(pos[-1, window.sl].mean())
    if alpha is None:
        alpha = window_alpha(traj.n, chi, window.size)
    keep = times < t_hat * (1.0 - RESCALE_CUTOFF)
    sub = Trajectory(times[keep], pos[keep], float(chi), "gap_collapse", 0.0)
    series = to_rescaled(sub, window, t_hat, x_bar, alpha)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "rescaled.csv", rescaled_header(traj.n), rescaled_rows(series, window))
    rig = check_conditions_r1_r6(series)
    write_json(out / "rigidity.json", {"window": window.as_list(), "t_hat": t_hat,
                                       "x_bar": x_bar, "alpha": alpha, **rig.as_dict()})
    print(f"R1-R6 hold: {rig.all_hold} tail_oscillation={rig.tail_oscillation:.3e}")
    return EXIT_OK


# ------------------------------------------------------------------- parser

def _out_dir(args, default=None) -> str:
    if args.out_dir:
        return args.out_dir
    return os.environ.get(OUT_DIR_ENV) or default or "out"


def _window(text: str | None) -> IndexWindow | None:
    if text is None:
        return None
    try:
        q, p = (int(v) for v in text.split(","))
        return IndexWindow(q, p)
    except ValueError as exc:
        raise ConfigError(f"window must be 'q,p' with 1 <= q <= p: {exc}") from exc


def _sim_config(args) -> RunConfig:
    if args.config:
        cfg = load_config(args.config)
        if args.n is not None or args.chi is not None:
            raise ConfigError("give either --config or --n/--chi, not both")
    else:
        if args.n is None or args.chi is None:
            raise ConfigError("--n and --chi are required without --config")
        integ = {"t_max": args.t_max, "method": args.method}
        if args.gap_stop is not None:
            integ["gap_stop"] = args.gap_stop
        cfg = RunConfig.from_dict({"n": args.n, "chi": args.chi,
                                   "initial": parse_initial(args.initial),
                                   "integrator": integ})
    cfg.out_dir = _out_dir(args, cfg.out_dir if args.config else None)
    return cfg


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kspart", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="integrate one configuration")
    s.add_argument("--config", help="JSON run configuration")
    s.add_argument("--n", type=int)
    s.add_argument("--chi", type=float)
    s.add_argument("--initial", default="symmetric",
                   help="symmetric | random:seed=S | clustered:k=K,eps=E | x1,x2,...")
    s.add_argument("--t-max", type=float, default=10.0)
    s.add_argument("--gap-stop", type=float)
    s.add_argument("--method", default="auto", choices=["auto", "radau", "dopri"])
    s.add_argument("--out-dir")

    t = sub.add_parser("threebody", help="three-particle reduced dynamics")
    t.add_argument("--chi", type=float, required=True)
    t.add_argument("--mode", choices=THREEBODY_MODES, required=True)
    t.add_argument("--portrait-kind", choices=["u", "v"], default="v")
    t.add_argument("--out-dir")

    w = sub.add_parser("sweep", help="quantization rates over a chi grid")
    w.add_argument("--n", type=int, required=True)
    w.add_argument("--chi", type=float, nargs="*", default=None, help="explicit grid")
    w.add_argument("--chi-min", type=float)
    w.add_argument("--chi-max", type=float)
    w.add_argument("--chi-count", type=int, default=0)
    w.add_argument("--seeds", type=int, default=50)
    w.add_argument("--master-seed", type=int, default=0)
    w.add_argument("--k", type=int, help="expected set size (default: from the ladder)")
    w.add_argument("--workers", type=int, default=1)
    w.add_argument("--include-symmetric", action="store_true")
    w.add_argument("--out-dir")

    r = sub.add_parser("rescale", help="rescale a saved trajectory")
    r.add_argument("--trajectory", required=True)
    r.add_argument("--chi", type=float, required=True)
    r.add_argument("--t-hat", type=float)
    r.add_argument("--x-bar", type=float)
    r.add_argument("--window", help="q,p (1-based, inclusive)")
    r.add_argument("--alpha", type=float)
    r.add_argument("--out-dir")

    c = sub.add_parser("check", help="run the invariant suites")
    c.add_argument("--seed", type=int, default=0)
    return p


def _sweep_grid(args) -> list[float]:
    grid = list(args.chi or [])
    if args.chi_count:
        if args.chi_min is None or args.chi_max is None:
            raise ConfigError("--chi-count needs --chi-min and --chi-max")
        grid += np.linspace(args.chi_min, args.chi_max, args.chi_count).tolist()
    if any(not c > 0 for c in grid):
        raise ConfigError("chi values must be positive")
    return grid


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # usage errors are configuration errors; --help exits cleanly
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "simulate":
            return run_simulate(_sim_config(args))
        if args.command == "threebody":
            return run_threebody(args.chi, args.mode, _out_dir(args), args.portrait_kind)
        if args.command == "sweep":
            if args.n < 2 or args.seeds < 0 or args.workers < 1:
                raise ConfigError("need n >= 2, seeds >= 0 and workers >= 1")
            agg = run_sweep(args.n, _sweep_grid(args), args.seeds, args.master_seed,
                            args.k, args.workers, args.include_symmetric, _out_dir(args))
            for c in agg["cells"]:
                print(f"chi={c['chi']:.6g} k={c['k_expected']} rate={c['quantization_rate']} "
                      f"failures={c['failures']}")
            return EXIT_OK
        if args.command == "rescale":
            return run_rescale(args.trajectory, args.chi, _out_dir(args), args.t_hat,
                               args.x_bar, _window(args.window), args.alpha)
        from .checks import run_checks
        results = run_checks(seed=args.seed)
        for name, ok, detail in results:
            print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_NUMERIC
    except (ConfigError, RungError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, *NUMERIC_ERRORS) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
