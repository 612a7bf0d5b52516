"""Configuration-driven experiment runner.

Every subcommand reads one JSON config (a preset name may seed the defaults),
applies dotted-path --set overrides, writes CSV outputs plus a manifest into
--out, and is bit-reproducible: identical configs produce identical CSVs.
A manifest can be passed back as --config to re-run its experiment.

Exit codes: 0 pass, 1 certification/assertion failure, 2 usage error.
"""

import argparse
import concurrent.futures
import csv
import json
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .gronwall import calibrate, calibration_ratio, certify
from .lyapunov import decay_check, lyapunov_spectrum, norm_independence_check
from .presets import Problem, build, build_driver, build_operators, get_preset
from .rough_core import max_chen_defect, rho_gamma
from .solver import convergence_study, solve_mild
from .volterra_noise import (check_K1_K2, cm_check, kernel_holder_exponent,
                             parse_kernel, sample_volterra)

SUBCOMMANDS = ("noise", "lift-check", "kernel-check", "cm-check", "solve",
               "convergence", "gronwall", "lyapunov", "norm-independence",
               "decay")

DEFAULTS = {
    "seed": 0,
    "gronwall": {"C": None, "train_seeds": 100, "eval_seeds": 200, "factor": 1.5},
    "lyapunov": {"k": 3, "renorm_every": 16, "burn_steps": 0, "init": "axes"},
    "norm_independence": {"k": 2, "alpha_list": [0.0, 0.25], "renorm_every": 16},
    "cm": {"gamma_p": 0.8, "eta_t": 0.2, "n_samples": 100, "n_grid": 256},
    "decay": {"offset": 1e-3, "fit": [0.2, 0.95], "k": 1, "renorm_every": 16},
    "convergence": {"levels": [512, 1024, 2048, 4096]},
    "noise_out": {"n_fine": 1024, "d": 1},
}


class ConfigError(Exception):
    pass


def _merge(base, override):
    out = dict(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def _set_path(cfg, dotted, raw):
    keys = dotted.split(".")
    node = cfg
    for k in keys[:-1]:
        node = node.setdefault(k, {})
    try:
        node[keys[-1]] = json.loads(raw)
    except json.JSONDecodeError:
        node[keys[-1]] = raw


def load_config(path, overrides):
    with open(path) as fh:
        cfg = json.load(fh)
    if "config" in cfg and "version" in cfg:  # a manifest; unwrap
        cfg = cfg["config"]
    if "preset" in cfg:
        preset = asdict(get_preset(cfg["preset"]))
        preset.pop("name")
        cfg = _merge({"problem": preset}, cfg)
    cfg = _merge(DEFAULTS, cfg)
    for item in overrides or ():
        key, _, raw = item.partition("=")
        if not raw:
            raise ConfigError(f"--set needs key=value, got {item!r}")
        _set_path(cfg, key, raw)
    return cfg


def build_problem(cfg, need_gronwall=False):
    spec = cfg.get("problem")
    if spec is None:
        raise ConfigError("config key 'problem' missing (or give a 'preset')")
    try:
        problem = Problem(name=cfg.get("preset", "custom"),
                          **{k: tuple(v) if k == "mu" else v for k, v in spec.items()})
    except TypeError as exc:
        raise ConfigError(f"bad problem key: {exc}") from None
    if not (1.0 / 3.0 < problem.gamma <= 0.5):
        raise ConfigError("problem.gamma must lie in (1/3, 1/2]")
    if need_gronwall and not problem.sigma < (1.0 - problem.gamma) / 2.0:
        raise ConfigError("problem.sigma must satisfy sigma < (1-gamma)/2 "
                          "for bound/moment features")
    return problem


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_manifest(outdir, cfg, outputs, summary, t_start):
    manifest = {
        "config": cfg,
        "version": __version__,
        "outputs": sorted(outputs),
        "summary": summary,
        "wall_time_s": time.time() - t_start,
    }
    with open(outdir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, default=float, sort_keys=True)
    return manifest


# ---------------------------------------------------------------------------
# subcommand implementations, each returning (exit_code, outputs, summary)

def cmd_noise(cfg, outdir):
    spec = cfg["noise_out"]
    kernel = parse_kernel(spec.get("kernel", cfg.get("problem", {}).get("kernel", "ou:a=-1.0")))
    sample = sample_volterra_cfg(kernel, spec, cfg)
    rows = [[t] + list(v) for t, v in zip(sample.path.times, sample.path.values)]
    header = ["t"] + [f"V{i + 1}" for i in range(sample.d)]
    write_csv(outdir / "noise.csv", header, rows)
    return 0, ["noise.csv"], {"kernel": kernel.spec_string(), "n": sample.path.n}


def sample_volterra_cfg(kernel, spec, cfg):
    return sample_volterra(kernel, int(spec.get("n_fine", 1024)),
                           float(spec.get("T", 1.0)), cfg["seed"],
                           int(spec.get("d", 1)))


def cmd_lift_check(cfg, outdir):
    problem = build_problem(cfg)
    rp = build_driver(problem, cfg["seed"])
    defect = max_chen_defect(rp)
    rho = rho_gamma(rp)
    write_csv(outdir / "lift_check.csv", ["quantity", "value"],
              [["max_chen_defect", defect], ["rho_gamma", rho],
               ["n", rp.n], ["d", rp.d]])
    passed = defect < 1e-10
    return (0 if passed else 1), ["lift_check.csv"], {"max_chen_defect": defect,
                                                      "passed": bool(passed)}


def cmd_kernel_check(cfg, outdir):
    problem = build_problem(cfg)
    kernel = parse_kernel(problem.kernel)
    rep = check_K1_K2(kernel, problem.gamma)
    fitted = kernel_holder_exponent(kernel)
    write_csv(outdir / "kernel_check.csv", ["quantity", "value"],
              [["exponent_K1", rep["exponent_K1"]], ["exponent_K2", rep["exponent_K2"]],
               ["target", rep.get("target", float("nan"))],
               ["l2_modulus_slope", fitted], ["pass", int(rep["pass"])]])
    return (0 if rep["pass"] else 1), ["kernel_check.csv"], rep | {"slope": fitted}


def cmd_cm_check(cfg, outdir):
    problem = build_problem(cfg)
    kernel = parse_kernel(problem.kernel)
    spec = cfg["cm"]
    rep = cm_check(kernel, spec["gamma_p"], spec["eta_t"], spec["n_samples"],
                   cfg["seed"], n_grid=spec["n_grid"])
    rows = [[i, r, s] for i, (r, s) in enumerate(zip(rep["ratios"], rep["sobolev_ratios"]))]
    write_csv(outdir / "cm_check.csv", ["sample", "w_ratio", "sobolev_ratio"], rows)
    summary = {k: rep[k] for k in ("max_ratio", "max_sobolev_ratio", "n_grid")}
    return 0, ["cm_check.csv"], summary


def cmd_solve(cfg, outdir):
    problem = build_problem(cfg)
    gen, nl, rp, u0, norm = build(problem, cfg["seed"])
    res = solve_mild(gen, nl, rp, u0)
    header = ["t"] + [f"u{i + 1}" for i in range(gen.m)]
    rows = [[t] + list(v) for t, v in zip(rp.times, res.values)]
    write_csv(outdir / "solution.csv", header, rows)
    comp = res.norm_components(norm)
    return 0, ["solution.csv"], {"norm_components": comp.as_dict(),
                                 "steps": res.diagnostics["steps"]}


def cmd_convergence(cfg, outdir):
    problem = build_problem(cfg)
    levels = cfg["convergence"]["levels"]
    fine = problem.with_(n=max(levels))
    gen, nl, rp, u0, _ = build(fine, cfg["seed"])
    rep = convergence_study(gen, nl, u0, rp, levels)
    rows = [[n, rep["errors"][n]] for n in levels[:-1]]
    write_csv(outdir / "convergence.csv", ["n", "terminal_error"], rows)
    passed = rep["monotone"] and rep["order"] > 0
    summary = {"order": rep["order"], "monotone": rep["monotone"]}
    return (0 if passed else 1), ["convergence.csv"], summary


def _gronwall_instance(args):
    problem, seed = args
    gen, nl, norm = build_operators(problem)
    rp = build_driver(problem, seed)
    res = solve_mild(gen, nl, rp, np.full(problem.m, problem.u0_scale))
    return res, rp, norm


def cmd_gronwall(cfg, outdir, jobs=1):
    problem = build_problem(cfg, need_gronwall=True)
    spec = cfg["gronwall"]
    train = range(spec["train_seeds"])
    held = range(spec["train_seeds"], spec["train_seeds"] + spec["eval_seeds"])

    def run_many(seeds, fn):
        tasks = [(problem, s) for s in seeds]
        if jobs > 1:
            with concurrent.futures.ProcessPoolExecutor(jobs) as pool:
                inst = list(pool.map(_gronwall_instance, tasks))
        else:
            inst = [_gronwall_instance(t) for t in tasks]
        return [fn(*i) for i in inst]

    if spec["C"] is None:
        ratios = run_many(train, lambda res, rp, norm: calibration_ratio(res, rp, norm))
        C = calibrate(ratios, factor=spec["factor"])
    else:
        C = float(spec["C"])
    reports = run_many(held, lambda res, rp, norm: certify(res, rp, norm, C,
                                                           calibrated_C=C))
    rows = [[s, r.norm_total, r.log_bound, r.log10_margin, int(r.passed)]
            for s, r in zip(held, reports)]
    write_csv(outdir / "gronwall.csv",
              ["seed", "norm_total", "log_bound", "log10_margin", "passed"], rows)
    n_fail = sum(not r.passed for r in reports)
    worst = min(reports, key=lambda r: r.log10_margin)
    norms = np.array([r.norm_total for r in reports])
    # finite-sample stand-in for the moment bounds: empirical L^p means of the
    # certified norms over the held-out family
    moments = {f"L{p}": float(np.mean(norms**p) ** (1.0 / p)) for p in (1, 2, 4, 8)}
    summary = {"C": C, "eval_seeds": len(reports), "failures": n_fail,
               "min_log10_margin": worst.log10_margin,
               "norm_moments": moments,
               "constants": worst.as_dict()["constants"]}
    print(f"certification: C={C:.8g} failures={n_fail}/{len(reports)} "
          f"min log10 margin={worst.log10_margin:.3f}")
    print(f"worst-case norm components: {worst.components!r}")
    return (0 if n_fail == 0 else 1), ["gronwall.csv"], summary


def cmd_lyapunov(cfg, outdir):
    problem = build_problem(cfg, need_gronwall=True)
    spec = cfg["lyapunov"]
    gen, nl, rp, u0, norm = build(problem, cfg["seed"])
    est = lyapunov_spectrum(gen, nl, rp, u0, spec["k"], spec["renorm_every"],
                            norm, burn_steps=spec["burn_steps"], init=spec["init"])
    header = (["t"] + [f"lambda{i + 1}" for i in range(spec["k"])] + ["log_vol"])
    rows = [[t] + list(r) + [lv] for t, r, lv in
            zip(est.checkpoint_times, est.running, est.log_vol)]
    write_csv(outdir / "lyapunov.csv", header, rows)
    summary = {"lambdas": [float(l) for l in est.lambdas],
               "clusters": est.clusters, "vol_slope": est.vol_slope,
               "sum_lambdas": est.sum_lambdas, "alpha": est.alpha}
    return 0, ["lyapunov.csv"], summary


def cmd_norm_independence(cfg, outdir):
    problem = build_problem(cfg, need_gronwall=True)
    spec = cfg["norm_independence"]
    gen, nl, rp, u0, _ = build(problem, cfg["seed"])
    rep = norm_independence_check(gen, nl, rp, u0, spec["k"], spec["alpha_list"],
                                  spec["renorm_every"])
    rows = [[a] + [float(l) for l in rep["spectra"][a].lambdas]
            for a in spec["alpha_list"]]
    header = ["alpha"] + [f"lambda{i + 1}" for i in range(spec["k"])]
    write_csv(outdir / "norm_independence.csv", header, rows)
    summary = {"max_deviation": rep["max_deviation"]}
    return 0, ["norm_independence.csv"], summary


def cmd_decay(cfg, outdir):
    problem = build_problem(cfg, need_gronwall=True)
    spec = cfg["decay"]
    gen, nl, rp, u0, norm = build(problem, cfg["seed"])
    est = lyapunov_spectrum(gen, nl, rp, u0, spec["k"], spec["renorm_every"], norm)
    lam1 = float(est.lambdas[0])
    if lam1 >= 0.0:
        raise ConfigError("decay check needs a contractive problem (lambda_1 < 0)")
    rng = np.random.default_rng(cfg["seed"] + 1)
    direction = rng.standard_normal(problem.m)
    direction /= np.linalg.norm(direction)
    rep = decay_check(gen, nl, rp, u0, u0 + spec["offset"] * direction, norm,
                      fit_window=tuple(spec["fit"]))
    if rep.get("skipped"):
        return 0, [], {"skipped": True, "reason": rep["reason"]}
    rows = list(zip(rep["times"], rep["separation"]))
    write_csv(outdir / "decay.csv", ["t", "separation"], rows)
    passed = rep["rate"] <= lam1 + 0.1
    summary = {"rate": rep["rate"], "lambda1": lam1, "passed": bool(passed)}
    return (0 if passed else 1), ["decay.csv"], summary


def main(argv=None):
    parser = argparse.ArgumentParser(prog="roughpde", description=__doc__)
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="JSON config or manifest")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--set", action="append", metavar="KEY=VAL",
                        help="dotted-path config override")
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args(argv)
    t_start = time.time()
    try:
        cfg = load_config(args.config, args.set)
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        if args.subcommand == "gronwall":
            code, outputs, summary = cmd_gronwall(cfg, outdir, jobs=args.jobs)
        else:
            handler = {
                "noise": cmd_noise, "lift-check": cmd_lift_check,
                "kernel-check": cmd_kernel_check, "cm-check": cmd_cm_check,
                "solve": cmd_solve, "convergence": cmd_convergence,
                "lyapunov": cmd_lyapunov,
                "norm-independence": cmd_norm_independence, "decay": cmd_decay,
            }[args.subcommand]
            code, outputs, summary = handler(cfg, outdir)
        write_manifest(outdir, cfg, outputs, summary, t_start)
    except (ConfigError, FileNotFoundError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(summary, default=float, sort_keys=True))
    return code


if __name__ == "__main__":
    sys.exit(main())
