"""Command-line front end.

One JSON config file drives each run; the handful of global flags override
config values.  All outputs are deterministic given the config (timestamps
are kept out of the result payloads), so reruns are byte-identical.

Exit codes: 0 success, 1 usage/parse error, 2 domain/validation failure,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from .diagnostics import (
    BLScheme,
    ProbeScheme,
    cluster_classify,
    el_residual,
    gamma_trace,
    support_diameter,
)
from .energy import (
    discrete_energy,
    load_configuration_csv,
    save_configuration_csv,
)
from .errors import NumericalError, UsageError, ValidationError
from .io import DEFAULT_SEED, dump_report, load_json_config, measure_from_config
from .kernels import CheckScheme, check_assumptions, kernel_from_config
from .minimizer import (
    InitSpec,
    MinimizeSettings,
    RepairSettings,
    StepRule,
    minimize,
)
from .quantizer import quantize
from .svg import line_chart_svg, scatter_svg


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse's default exit code is 2; we use 1
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="rieszmin",
                     description="interaction-energy experiments from config files")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON config file")
    common.add_argument("--seed", type=int, default=None, help="override config seed")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--threads", type=int, default=None,
                        help="worker hint; results are identical for any value")
    common.add_argument("--svg", action="store_true", help="emit SVG plots (2-d only)")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("check-kernel", parents=[common],
                   help="run the kernel assumption checks")
    sub.add_parser("quantize", parents=[common],
                   help="quantize a measure into n points")
    sub.add_parser("minimize", parents=[common],
                   help="multi-start minimization of the discrete energy")
    sub.add_parser("trace", parents=[common],
                   help="quantize along an n schedule and trace energies")
    diag = sub.add_parser("diagnose", parents=[common],
                          help="optimality and clustering diagnostics")
    diag.add_argument("configuration", nargs="?", default=None,
                      help="configuration CSV (falls back to config key)")
    return parser


def _setup(args):
    config = load_json_config(args.config)
    seed = args.seed if args.seed is not None else int(config.get("seed", DEFAULT_SEED))
    out_dir = args.out or config.get("out", ".")
    os.makedirs(out_dir, exist_ok=True)
    base_dir = os.path.dirname(os.path.abspath(args.config))
    return config, seed, out_dir, base_dir


def _kernel(config, base_dir):
    if "kernel" not in config:
        raise UsageError("config is missing the 'kernel' block")
    return kernel_from_config(config["kernel"], base_dir)


def _measure(config, base_dir, key="measure", required=True):
    if key not in config:
        if required:
            raise UsageError(f"config is missing the '{key}' block")
        return None
    return measure_from_config(config[key], base_dir)


def _minimize_settings(config, seed, kernel=None, base_dir=".") -> MinimizeSettings:
    block = dict(config.get("minimize", {}))
    init_block = dict(block.get("init", {}))
    kind = init_block.get("kind", "random-gaussian")
    if kind == "quantizer-seeded":
        init = InitSpec(kind=kind, measure=measure_from_config(init_block["measure"], base_dir))
    elif kind == "user":
        start = load_configuration_csv(os.path.join(base_dir, init_block["path"]))
        init = InitSpec(kind=kind, config=start)
    else:
        init = InitSpec(kind=kind, scale=float(init_block.get("scale", 1.0)))
    step_block = dict(block.get("step", {}))
    step = StepRule(
        initial=float(step_block.get("initial", 1.0)),
        shrink=float(step_block.get("shrink", 0.5)),
        sufficient_decrease=float(step_block.get("sufficient_decrease", 1e-4)),
    )
    repair_block = block.get("repair", {})
    repair = None
    if repair_block is not None:
        repair_block = dict(repair_block)
        repair = RepairSettings(
            bulk_radius_quantile=float(repair_block.get("bulk_radius_quantile", 0.5)),
            far_factor=float(repair_block.get("far_factor", 1.5)),
            grid_side=repair_block.get("grid_side"),
        )
    return MinimizeSettings(
        restarts=int(block.get("restarts", 16)),
        max_iters=int(block.get("max_iters", 2000)),
        grad_tol=float(block.get("grad_tol", 1e-9)),
        init=init,
        step=step,
        repair=repair,
        repair_period=int(block.get("repair_period", 50)),
        seed=seed,
    )


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _cmd_check_kernel(args) -> int:
    config, seed, out_dir, base_dir = _setup(args)
    kernel = _kernel(config, base_dir)
    witness = _measure(config, base_dir, key="witness", required=False)
    scheme_block = dict(config.get("check_scheme", {}))
    scheme = CheckScheme(seed=seed, **scheme_block) if scheme_block else CheckScheme(seed=seed)
    report = check_assumptions(kernel, witness, scheme)
    for line in (
        f"lower bound        : {report.h1_lower_bound:.6g} "
        f"({'finite' if report.h1_lower_bound_finite else 'UNBOUNDED'})",
        f"local integrability: {'pass' if report.h1_local_integrability else 'FAIL'}"
        + (f" (int |g| over B1 = {report.h1_integral_abs:.6g})"
           if report.h1_integral_abs is not None else ""),
        f"liminf at infinity : {report.h2_liminf_at_infinity:.6g} "
        f"({'pass' if report.h2_pass else 'FAIL'})",
        f"monotone near 0    : "
        + {True: "pass", False: "FAIL", None: "skipped (no radius declared)"}[
            report.h3_monotone_near_origin],
        (f"witness energy     : {report.h4_witness_energy:.6g} "
         f"+- {report.h4_std_error:.2g} ({'pass' if report.h4_pass else 'FAIL'})")
        if report.h4_witness_energy is not None else "witness energy     : (no witness)",
        f"overall            : {'PASS' if report.passed else 'FAIL'}",
    ):
        print(line)
    dump_report(report.as_dict(), os.path.join(out_dir, "assumptions.json"))
    return 0 if report.passed else 2


def _cmd_quantize(args) -> int:
    config, seed, out_dir, base_dir = _setup(args)
    measure = _measure(config, base_dir)
    kernel = kernel_from_config(config["kernel"], base_dir) if "kernel" in config else None
    if "n" not in config:
        raise UsageError("config is missing 'n'")
    block = dict(config.get("quantize", {}))
    result = quantize(measure, int(config["n"]), kernel,
                      strategy=block.get("strategy", "hybrid" if kernel else "conditional-mean"),
                      k=int(block.get("k", 32)), seed=seed)
    save_configuration_csv(result.config, os.path.join(out_dir, "quantized.csv"))
    sidecar = result.sidecar()
    if kernel is not None:
        sidecar["energy"] = discrete_energy(result.config, kernel).as_dict()
    dump_report(sidecar, os.path.join(out_dir, "quantize.json"))
    print(f"quantized {result.config.n} points (l={result.split_count}, "
          f"dropped={result.dropped}) -> {out_dir}/quantized.csv")
    if args.svg and measure.dim == 2:
        with open(os.path.join(out_dir, "quantized.svg"), "w") as fh:
            fh.write(scatter_svg(result.config.points, title="quantized configuration"))
    return 0


def _cmd_minimize(args) -> int:
    config, seed, out_dir, base_dir = _setup(args)
    kernel = _kernel(config, base_dir)
    if "n" not in config:
        raise UsageError("config is missing 'n'")
    n = int(config["n"])
    dim = int(config.get("dim", kernel.dim))
    settings = _minimize_settings(config, seed, kernel, base_dir)
    result = minimize(kernel, n, dim, settings)
    save_configuration_csv(result.config, os.path.join(out_dir, "minimized.csv"))
    dump_report(result.as_dict(), os.path.join(out_dir, "minimize.json"))
    with open(os.path.join(out_dir, "history.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["energy", "grad_norm"])
        for energy, gnorm in result.history:
            writer.writerow([f"{energy:.17g}", f"{gnorm:.17g}"])
    print(f"n={n}: energy {result.energy:.12g}, grad norm {result.grad_norm:.3g}, "
          f"{'converged' if result.converged else 'max iterations reached'} "
          f"after {result.iterations} iterations")
    if args.svg and dim == 2:
        with open(os.path.join(out_dir, "minimized.svg"), "w") as fh:
            fh.write(scatter_svg(result.config.points, title="minimizer"))
    return 0


def _cmd_trace(args) -> int:
    config, seed, out_dir, base_dir = _setup(args)
    kernel = _kernel(config, base_dir)
    measure = _measure(config, base_dir)
    n_list = config.get("n_list")
    if not n_list:
        raise UsageError("config must provide a nonempty 'n_list'")
    block = dict(config.get("trace", {}))
    settings = _minimize_settings(config, seed, kernel, base_dir)
    trace = gamma_trace(
        kernel, measure, [int(n) for n in n_list],
        with_minimization=bool(block.get("with_minimization", False)),
        strategy=block.get("strategy", "hybrid"),
        draws=int(block.get("k", 32)),
        seed=seed,
        minimize_settings=settings,
        mc_samples=int(block.get("mc_samples", 200_000)),
    )
    csv_path = os.path.join(out_dir, "trace.csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "energy_quantized", "energy_minimized",
                         "bl_distance", "diameter"])
        for row in trace.rows:
            writer.writerow([
                row.n,
                f"{row.energy_quantized:.17g}",
                "" if row.energy_minimized is None else f"{row.energy_minimized:.17g}",
                f"{row.bl_distance:.17g}",
                f"{row.diameter:.17g}",
            ])
    dump_report(trace.as_dict(), os.path.join(out_dir, "trace.json"))
    print(f"trace over n={list(map(int, n_list))}: target energy "
          f"{trace.target_energy:.6g} +- {trace.target_std_error:.2g}")
    for row in trace.rows:
        print(f"  n={row.n:6d}  quantized {row.energy_quantized:+.6f}  "
              f"bl {row.bl_distance:.5f}  diameter {row.diameter:.4f}")
    if args.svg and measure.dim == 2:
        series = {"quantized": [r.energy_quantized for r in trace.rows]}
        if any(r.energy_minimized is not None for r in trace.rows):
            series["minimized"] = [r.energy_minimized for r in trace.rows]
        with open(os.path.join(out_dir, "trace.svg"), "w") as fh:
            fh.write(line_chart_svg([r.n for r in trace.rows], series,
                                    title="energy vs n (log2 n)"))
    return 0


def _cmd_diagnose(args) -> int:
    config, seed, out_dir, base_dir = _setup(args)
    kernel = _kernel(config, base_dir)
    cfg_path = args.configuration or config.get("configuration")
    if not cfg_path:
        raise UsageError("diagnose needs a configuration CSV (argument or config key)")
    cfg = load_configuration_csv(cfg_path)
    diag_block = dict(config.get("diagnostics", {}))
    probe = ProbeScheme(seed=seed)
    el = el_residual(cfg, kernel, probe)
    clusters = cluster_classify(cfg, float(diag_block.get("gap_factor", 5.0)))
    payload = {
        "el": el.as_dict(),
        "clusters": clusters.as_dict(),
        "support_diameter": support_diameter(cfg),
        "energy": discrete_energy(cfg, kernel).as_dict(),
    }
    dump_report(payload, os.path.join(out_dir, "diagnose.json"))
    print(f"potential spread {el.potential_spread:.6g}, mean {el.mean_potential:.6g}")
    print(f"classification: {clusters.classification} "
          f"(largest fraction {clusters.largest_fraction:.3f})")
    if args.svg and cfg.dim == 2:
        labels = np.zeros(cfg.n, dtype=int)
        for idx, cluster in enumerate(clusters.clusters):
            labels[cluster.indices] = idx
        with open(os.path.join(out_dir, "diagnose.svg"), "w") as fh:
            fh.write(scatter_svg(cfg.points, labels=labels.tolist(),
                                 title=clusters.classification))
    return 0


_COMMANDS = {
    "check-kernel": _cmd_check_kernel,
    "quantize": _cmd_quantize,
    "minimize": _cmd_minimize,
    "trace": _cmd_trace,
    "diagnose": _cmd_diagnose,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
