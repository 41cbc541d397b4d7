"""
Command line interface: ``simulate <scenario> --config file [--set k=v ...] [--out dir]``.

Every scenario writes plain CSV/JSON data files (no timestamps, fixed column
and row order, floats printed with 17 significant digits) and a
``manifest.json`` holding the sha256 of each file together with the resolved
configuration.  Exit status: 0 on success, 2 when the acceptance suite has a
failing criterion, 1 on any error.
"""
import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from .config import SCENARIOS, load_config, parse_filter
from .errors import ConfigError
from .mie import ResonatorSpec, spectrum_scan
from .poles import cached_poles

SCENARIO_HELP = {
    "spectrum": "resonance spectrum 1/I_M(k) per l and the scattering cross-section",
    "poles": "pole catalog of the window and the emitter couplings",
    "portraits": "|u|^2 of selected pseudomodes on an (r, theta) grid",
    "dynamics": "full pseudomode evolution of the emitter and mode populations",
    "two_mode": "two-pseudomode reduction against the full evolution",
    "fieldmap": "retarded field intensity on an (r, ct) grid",
    "oracle_compare": "finite-box continuum evolution against the pseudomode evolution",
    "acceptance": "run the acceptance suite and write its table",
}


# ----------------------------------------------------------------------------
# Output helpers
# ----------------------------------------------------------------------------

def write_csv(path, header, data):
    data = np.asarray(data, dtype=float)
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in data:
            fh.write(",".join(format(float(v), ".17g") for v in row) + "\n")


def write_json(path, obj):
    with open(path, "w", newline="\n") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out_dir, scenario, config, files):
    entries = [{"file": name, "sha256": sha256(Path(out_dir) / name)} for name in sorted(files)]
    write_json(Path(out_dir) / "manifest.json", {"scenario": scenario, "config": config, "files": entries})


# ----------------------------------------------------------------------------
# Shared setup
# ----------------------------------------------------------------------------

def resonator(cfg):
    return ResonatorSpec(cfg["resonator"]["radius"], cfg["resonator"]["index"])


def _cache_dir(cfg):
    text = cfg["cache"]["dir"].strip()
    if text in ("", "none"):
        return None
    return Path(text).expanduser()


def pole_catalog(cfg):
    w = cfg["window"]
    return cached_poles(resonator(cfg), w["l_max"], w["re_max"], w["im_min"], w["re_min"], _cache_dir(cfg))


def pseudomode_set(cfg, poles=None):
    """Pseudomodes for the configured emitter, with omega0 tuned when requested."""
    from .dynamics import tune_omega0
    from .pseudomodes import EmitterSpec, build_pseudomodes
    spec = resonator(cfg)
    if poles is None:
        poles = pole_catalog(cfg)
    em = cfg["emitter"]
    target = tuple(em["tune_target"])
    omega0 = em["omega0"]
    start = poles.get(*target).omega if omega0 == "tuned" else omega0
    pm = build_pseudomodes(spec, poles, EmitterSpec(em["r_emit"], em["dipole"], start))
    if omega0 == "tuned":
        excluded = (target, (5, 4)) if target != (5, 4) else (target,)
        pm = pm.with_omega0(tune_omega0(pm, target, excluded, em["lamb_convention"]))
    return pm


def _linear_grid(t_max, n):
    return np.linspace(0.0, t_max, n)


# ----------------------------------------------------------------------------
# Scenarios
# ----------------------------------------------------------------------------

def scenario_spectrum(cfg, out):
    spec = resonator(cfg)
    s = cfg["spectrum"]
    k = np.linspace(s["k_min"], s["k_max"], s["n_k"])
    ls = list(range(1, s["l_max"] + 1))
    scan = spectrum_scan(spec, ls, k)
    write_csv(out / "spectrum_inv_IM.csv", ["k"] + [f"l{l}" for l in ls] + ["total"],
              np.column_stack([k, scan["inv_IM"].T, scan["inv_IM_total"]]))
    write_csv(out / "spectrum_cross_section.csv", ["k"] + [f"l{l}" for l in ls] + ["total"],
              np.column_stack([k, scan["sigma_terms"].T, scan["sigma_total"]]))
    return ["spectrum_inv_IM.csv", "spectrum_cross_section.csv"]


def scenario_poles(cfg, out):
    poles = pole_catalog(cfg)
    rows = poles.records()
    write_csv(out / "poles.csv", ["l", "n", "re_z", "im_z", "residual"],
              [[r["l"], r["n"], r["re_z"], r["im_z"], r["residual"]] for r in rows])
    files = ["poles.csv"]
    if cfg["emitter"]["dipole"] > 0:
        pm = pseudomode_set(cfg, poles)
        rows = pm.records()
        write_csv(out / "couplings.csv", ["l", "n", "re_z", "im_z", "re_gbar", "im_gbar", "abs_gbar"],
                  [[r[c] for c in ("l", "n", "re_z", "im_z", "re_gbar", "im_gbar", "abs_gbar")] for r in rows])
        files.append("couplings.csv")
    write_json(out / "poles_summary.json", {"count": len(poles), "window": poles.window,
                                            "max_residual": max((p.residual for p in poles), default=0.0)})
    files.append("poles_summary.json")
    print(f"{len(poles)} poles in the window")
    return files


def scenario_portraits(cfg, out):
    from .fields import pseudomode_portrait
    p = cfg["portraits"]
    pm = pseudomode_set(cfg)
    r = np.linspace(0.0, p["r_max"], p["n_r"])[1:]
    theta = np.linspace(0.0, np.pi, p["n_theta"])
    files = []
    for l, n in p["labels"]:
        img = pseudomode_portrait(pm, (l, n), r, theta)
        rr, tt = np.meshgrid(r, theta, indexing="ij")
        name = f"portrait_{l}_{n}.csv"
        write_csv(out / name, ["r", "theta", "abs2_u"], np.column_stack([rr.ravel(), tt.ravel(), img.ravel()]))
        files.append(name)
    return files


def _evolve_full(cfg, pm):
    from .dynamics import assemble_generator, evolve
    d = cfg["dynamics"]
    t = _linear_grid(d["t_max"], d["n_t"])
    return evolve(assemble_generator(None, pm), t, frame="rotating", method=d["method"])


def scenario_dynamics(cfg, out):
    from .dynamics import classify_markovianity, fit_decay_rate, oscillation_period
    from .errors import WindowTooShortError
    pm = pseudomode_set(cfg)
    traj = _evolve_full(cfg, pm)
    pop = traj.population
    modes = traj.mode_populations
    target = tuple(cfg["emitter"]["tune_target"])
    named = [lab for lab in (target, (5, 4)) if lab in traj.labels]
    named = list(dict.fromkeys(named))
    rest = [i for i, lab in enumerate(traj.labels) if lab not in named]
    cols = [traj.t, pop] + [modes[traj.index(lab)] for lab in named]
    header = ["ct", "abs2_c0"] + [f"abs2_b_{l}_{n}" for l, n in named] + ["max_background", "sum_background"]
    cols += [modes[rest].max(axis=0) if rest else 0 * pop, modes[rest].sum(axis=0) if rest else 0 * pop]
    write_csv(out / "dynamics.csv", header, np.column_stack(cols))
    # Background populations of every mode on a thinned grid; modes.csv tags them by gamma.
    step = max(1, (len(traj.t) - 1) // max(cfg["dynamics"]["background_rows"] - 1, 1))
    idx = np.arange(0, len(traj.t), step)
    write_csv(out / "dynamics_modes.csv", ["ct"] + [f"abs2_b_{l}_{n}" for l, n in traj.labels],
              np.column_stack([traj.t[idx], modes[:, idx].T]))
    write_csv(out / "modes.csv", ["l", "n", "omega", "gamma", "abs_gbar"],
              [[l, n, z.real, -z.imag, abs(g)] for (l, n), z, g in zip(traj.labels, pm.z, pm.gbar)])
    summary = {"omega0": pm.emitter.omega0, "dipole": pm.emitter.dipole, "r_emit": pm.emitter.r_emit,
               "dimension": 1 + len(pm), "path": traj.path, "condition": traj.cond,
               "max_background": float(modes[rest].max()) if rest else 0.0}
    try:
        summary["period"] = oscillation_period(traj.t, pop)
    except WindowTooShortError:
        summary["period"] = None
    try:
        summary["gamma0"] = fit_decay_rate(traj.t, pop)
    except WindowTooShortError:
        summary["gamma0"] = None
    files = ["dynamics.csv", "dynamics_modes.csv", "modes.csv"]
    if cfg["dynamics"]["classify"]:
        gamma0, recs = classify_markovianity(traj, pm, tol=cfg["dynamics"]["classify_tol"])
        kinds = {"adiabatic-following": 0, "free-ringing": 1, "strong-coupled": 2}
        write_csv(out / "markov.csv", ["l", "n", "gamma_ratio", "class", "adiabatic_residual", "free_residual"],
                  [[r["label"][0], r["label"][1], r["gamma_ratio"], kinds[r["classification"]],
                    r["adiabatic_residual"], r["free_residual"]] for r in recs])
        summary["markov_gamma0"] = gamma0
        summary["markov_counts"] = {k: sum(r["classification"] == k for r in recs) for k in kinds}
        summary["markov_class_codes"] = kinds
        files.append("markov.csv")
    write_json(out / "dynamics_summary.json", summary)
    files.append("dynamics_summary.json")
    if summary["period"]:
        print(f"oscillation period c T = {summary['period']:.6g} um")
    return files


def scenario_two_mode(cfg, out):
    from .dynamics import two_mode_approx
    pm = pseudomode_set(cfg)
    full = _evolve_full(cfg, pm)
    keep = [tuple(k) for k in cfg["two_mode"]["keep"]]
    red, shift = two_mode_approx(pm, keep, full.t, cfg["emitter"]["lamb_convention"])
    modes = full.mode_populations
    rest = [i for i, lab in enumerate(full.labels) if lab not in keep]
    cols = [full.t, full.population, red.population]
    header = ["ct", "abs2_c0_full", "abs2_c0_reduced"]
    for lab in keep:
        cols += [modes[full.index(lab)], red.mode_populations[red.index(lab)]]
        header += [f"abs2_b_{lab[0]}_{lab[1]}_full", f"abs2_b_{lab[0]}_{lab[1]}_reduced"]
    cols.append(modes[rest].max(axis=0) if rest else 0 * full.population)
    header.append("max_off_resonant")
    write_csv(out / "two_mode.csv", header, np.column_stack(cols))
    write_json(out / "two_mode_summary.json", {"lamb_shift": [shift.real, shift.imag],
                                               "omega0": pm.emitter.omega0, "keep": keep})
    return ["two_mode.csv", "two_mode_summary.json"]


def scenario_fieldmap(cfg, out):
    from .fields import intensity_map, light_cone_leakage
    f = cfg["fieldmap"]
    pm = pseudomode_set(cfg)
    from .dynamics import assemble_generator, evolve
    r = np.linspace(f["r_min"], f["r_max"], f["n_r"])
    t = _linear_grid(f["t_max"], f["n_t"])
    traj = evolve(assemble_generator(None, pm), t)
    fmap = intensity_map(r, t, traj, pm, parse_filter(f["filter"]), convention=f["delay"])
    write_csv(out / "fieldmap.csv", ["r", "ct", "intensity"], fmap.records())
    leak = light_cone_leakage(fmap, pm.spec, pm.emitter.r_emit)
    write_json(out / "fieldmap_summary.json", {"filter": f["filter"], "delay": f["delay"],
                                               "max_intensity": float(fmap.intensity.max()),
                                               "light_cone_leakage": leak})
    return ["fieldmap.csv", "fieldmap_summary.json"]


def scenario_oracle_compare(cfg, out):
    from .dynamics import assemble_generator, evolve
    from .oracle import compare_c0, discretize_box, oracle_evolve
    o = cfg["oracle"]
    pm = pseudomode_set(cfg)
    spec = pm.spec
    t = _linear_grid(o["t_max"], o["n_t"])
    boxes = [discretize_box(spec, pm.emitter, l, o["box_radius"], o["k_max"]) for l in range(1, o["l_max"] + 1)]
    res = oracle_evolve(pm.emitter, boxes, t)
    traj = evolve(assemble_generator(None, pm), t)
    rel, dev = compare_c0(res, traj)
    write_csv(out / "oracle_compare.csv",
              ["ct", "re_c0_oracle", "im_c0_oracle", "re_c0_pseudomode", "im_c0_pseudomode", "abs_difference"],
              np.column_stack([t, res.c0.real, res.c0.imag, traj.c0.real, traj.c0.imag, np.abs(res.c0 - traj.c0)]))
    write_json(out / "oracle_summary.json", {"box_modes": res.n_modes, "norm_error": res.norm_error,
                                             "max_relative_error": rel, "relative_deviation_error": dev})
    print(f"max relative error of c0: {rel:.3e}; oracle norm error {res.norm_error:.1e}")
    return ["oracle_compare.csv", "oracle_summary.json"]


def scenario_acceptance(cfg, out):
    from .acceptance import AcceptanceContext, format_table, run_acceptance
    ctx = AcceptanceContext(resonator(cfg), cache_dir=_cache_dir(cfg))
    results = run_acceptance(ctx)
    print(format_table(results))
    write_json(out / "acceptance.json", [r.as_dict() for r in results])
    return ["acceptance.json"], all(r.passed for r in results)


RUNNERS = {
    "spectrum": scenario_spectrum,
    "poles": scenario_poles,
    "portraits": scenario_portraits,
    "dynamics": scenario_dynamics,
    "two_mode": scenario_two_mode,
    "fieldmap": scenario_fieldmap,
    "oracle_compare": scenario_oracle_compare,
    "acceptance": scenario_acceptance,
}


def run_scenario(scenario, cfg, out_dir=None):
    """Run one scenario; returns ``(exit_status, files)``."""
    if scenario not in RUNNERS:
        raise ConfigError(f"unknown scenario {scenario!r}; choose from {', '.join(SCENARIOS)}")
    out = Path(out_dir if out_dir is not None else cfg["output"]["dir"])
    out.mkdir(parents=True, exist_ok=True)
    result = RUNNERS[scenario](cfg, out)
    status = 0
    if isinstance(result, tuple):
        files, ok = result
        status = 0 if ok else 2
    else:
        files = result
    write_manifest(out, scenario, cfg, files)
    return status, files


def build_parser():
    ap = argparse.ArgumentParser(prog="simulate", description="Pseudomode simulations of an emitter near a dielectric sphere")
    ap.add_argument("scenario", nargs="?", help="scenario to run (see --list-scenarios)")
    ap.add_argument("--config", help="TOML configuration file")
    ap.add_argument("--preset", help="built-in parameter set: d10, d100 or d1e4")
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                    help="override one key, e.g. --set emitter.dipole=100")
    ap.add_argument("--out", help="output directory (overrides output.dir)")
    ap.add_argument("--list-scenarios", action="store_true", help="list scenarios and exit")
    ap.add_argument("--acceptance", action="store_true", help="run the acceptance suite")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.list_scenarios:
        for name in SCENARIOS:
            print(f"{name:15s} {SCENARIO_HELP[name]}")
        return 0
    scenario = "acceptance" if args.acceptance else args.scenario
    try:
        if scenario is None:
            raise ConfigError("no scenario given (try --list-scenarios)")
        preset = args.preset
        if args.config is None and preset is None:
            if scenario != "acceptance":
                raise ConfigError("give --config FILE or --preset NAME")
            preset = "d10"
        cfg = load_config(args.config, args.overrides, preset)
        status, files = run_scenario(scenario, cfg, args.out)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # surfaced verbatim with a nonzero status
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    out = args.out if args.out is not None else cfg["output"]["dir"]
    print(f"wrote {len(files)} files and manifest.json to {out}")
    return status


if __name__ == "__main__":
    sys.exit(main())
