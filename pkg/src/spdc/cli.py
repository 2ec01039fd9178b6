"""Command-line front end: ``spdc <command> --config FILE [--seed N] [--out DIR]``."""

from __future__ import annotations

import argparse
import copy
import sys
from pathlib import Path

import numpy as np

from . import analysis, config
from .dispersion import (
    BIBO,
    CrystalConfig,
    extraordinary_index,
    sellmeier_index,
    solve_phase_matching_angle,
)
from .errors import SPDCError
from .gaussian import calibrate_gain_scale, squeezing_db, supermode_variances, takagi_factorize
from .io import code_version, write_csv, write_json
from .jsa import phase_matching_matrix, build_jsa
from .modes import (
    ClusterGraph,
    FrexelSpec,
    build_frexels,
    mode_covariance_from_coupling,
    optimize_frexel_permutation,
    optimize_frexel_phases,
    permute_covariance,
)
from .optimizer import FitnessSpec, ShaperObjective, evolve, reduce_phases, shaper_evo_config
from .pump import (
    ShaperConfig,
    apply_chirp,
    build_grid,
    gaussian_pump,
    pump_power_weight,
    shaped_pump,
    sigma_omega_from_fwhm,
)

N_PROFILE_MODES = 10


# ---------------------------------------------------------------------------
# setup shared by the commands


class Setup:
    """Physical objects resolved from a config."""

    def __init__(self, cfg):
        self.cfg = cfg
        cr = cfg["crystal"]
        lam_p = cr["pump_wavelength"]
        theta = cr["theta"]
        if theta is None:
            theta = solve_phase_matching_angle(lam_p, BIBO)
        self.crystal = CrystalConfig(cr["length"], theta, lam_p)
        self.sigma = sigma_omega_from_fwhm(cfg["pump"]["fwhm"], lam_p)
        self.grid = build_grid(2.0 * lam_p, cfg["grid"]["halfwidth_sigmas"], self.sigma, cfg["grid"]["n_points"])
        self.base = apply_chirp(gaussian_pump(self.grid, cfg["pump"]["fwhm"], lam_p), cfg["pump"]["phi2"])
        self.shaper = shaper_from_config(cfg.get("shaper"))
        self._pm = None

    @property
    def phase_matching(self):
        if self._pm is None:
            self._pm = phase_matching_matrix(self.grid, self.crystal, BIBO)
        return self._pm

    @property
    def pump(self):
        return self.base if self.shaper is None else shaped_pump(self.base, self.shaper)

    def coupling(self, pump=None):
        pump = self.pump if pump is None else pump
        return build_jsa(self.grid, pump, self.crystal, BIBO, phase_matching=self.phase_matching).L


def shaper_from_config(block, default_window=3.0):
    if block is None:
        return None
    shaper = ShaperConfig(block["n_control"], block["window_sigmas"])
    if block["u"] != "identity":
        shaper = shaper.with_params(block["u"])
    return shaper


def cluster_objects(cfg, grid):
    block = cfg["cluster"]
    graph = ClusterGraph.from_json(block["graph"])
    fx = block["frexels"]
    if fx["edges"] is not None:
        spec = FrexelSpec(np.asarray(fx["edges"], dtype=float), center_wavelength=fx["center_wavelength"],
                          fwhm=fx["fwhm"])
    else:
        spec = FrexelSpec.symmetric(fx["n_bands"], fx["red_wavelength"], fx["center_wavelength"], fwhm=fx["fwhm"])
    if spec.n_bands != graph.n_nodes:
        raise config.ConfigError("cluster.frexels must define one band per graph node")
    return graph, spec, build_frexels(spec, grid)


def phase_options(cfg, seed):
    opts = dict(cfg["cluster"]["phase"]) if "cluster" in cfg else {}
    opts["seed"] = seed
    return opts


# ---------------------------------------------------------------------------
# commands; each returns (summary dict, {name: path})


def cmd_phase_match(cfg, out, seed):
    lam_p = cfg["crystal"]["pump_wavelength"]
    theta = solve_phase_matching_angle(lam_p, BIBO)
    lam_um = lam_p * 1e6
    residual = abs(extraordinary_index(2 * lam_um, theta, BIBO) - sellmeier_index("x", lam_um, BIBO))
    rows = []
    for lam in (lam_um, 2 * lam_um):
        rows.append([lam * 1e-6] + [sellmeier_index(a, lam, BIBO) for a in "xyz"]
                    + [extraordinary_index(lam, theta, BIBO)])
    files = {"indices": write_csv(out / "indices.csv", ["wavelength_m", "n_x", "n_y", "n_z", "n_e_theta"], rows)}
    summary = {"theta_rad": theta, "theta_deg": float(np.degrees(theta)), "residual": float(residual),
               "pump_wavelength_m": lam_p}
    print(f"theta* = {theta:.10f} rad ({np.degrees(theta):.6f} deg), residual {residual:.3e}")
    return summary, files


def _profile_rows(grid, modes, k):
    rows = []
    cols = []
    for j in range(k):
        delay, v = analysis.subtract_linear_phase(modes.V[j], grid.omegas, omega_ref=grid.omega0_signal)
        cols.append((np.abs(v), np.angle(v), delay))
    for i, w in enumerate(grid.omegas):
        row = [w, grid.wavelengths[i]]
        for amp, ph, _ in cols:
            row += [amp[i], ph[i]]
        rows.append(row)
    header = ["omega_rad_s", "wavelength_m"]
    for j in range(k):
        header += [f"amp_{j + 1}", f"phase_{j + 1}"]
    return header, rows, [c[2] for c in cols]


def cmd_supermodes(cfg, out, seed):
    st = Setup(cfg)
    L = st.coupling()
    modes = takagi_factorize(L)
    eta_t = calibrate_gain_scale(modes, cfg["calibration"]["target_db"])
    _, var_p = supermode_variances(modes, eta_t)
    g = modes.gains
    gain_rows = [[j + 1, g[j], g[j] / g[0], squeezing_db(var_p[j])] for j in range(g.size)]
    files = {"gains": write_csv(out / "gains.csv", ["index", "gain", "gain_normalized", "squeezing_db"], gain_rows)}
    k = min(N_PROFILE_MODES, g.size)
    header, rows, delays = _profile_rows(st.grid, modes, k)
    files["supermodes"] = write_csv(out / "supermodes.csv", header, rows)
    summary = {
        "theta_rad": st.crystal.theta,
        "eta_t": eta_t,
        "leading_db": squeezing_db(var_p[0]),
        "n_above_0p9": int(np.sum(g > 0.9 * g[0])),
        "gap": float(g[0] / g[1]) if g.size > 1 and g[1] > 0 else None,
        "schmidt_number": analysis.schmidt_number(g),
        "total_gain": float(np.sum(g**2)),
        "delays_s": delays,
        "congruence_residual": modes.congruence_residual(),
    }
    if st.shaper is not None:
        summary["power_weight"] = pump_power_weight(st.shaper, st.base)
    print(f"leading squeezing {summary['leading_db']:.2f} dB, {summary['n_above_0p9']} gains above 0.9 x leading")
    return summary, files


def cmd_chirp_scan(cfg, out, seed):
    st = Setup(cfg)
    block = cfg["chirp_scan"]
    res = analysis.chirp_scan(st.base, st.phase_matching, block["stretches"], top=block["top"],
                              near_max_fraction=block["near_max_fraction"])
    header = ["stretch", "phi2_s2", "lead_chirped", "lead_unchirped", "total_chirped", "total_unchirped",
              "near_max_chirped", "near_max_unchirped"]
    rows = [[getattr(r, h) for h in ("stretch", "phi2", "lead_chirped", "lead_unchirped", "total_chirped",
                                     "total_unchirped", "near_max_chirped", "near_max_unchirped")] for r in res.rows]
    files = {"scan": write_csv(out / "chirp_scan.csv", header, rows)}
    top = len(res.rows[0].top_chirped)
    gain_rows = []
    for r in res.rows:
        for j in range(top):
            gain_rows.append([r.stretch, j + 1, r.top_chirped[j], r.top_unchirped[j]])
    files["gains"] = write_csv(out / "chirp_gains.csv", ["stretch", "index", "chirped", "unchirped"], gain_rows)
    tot = res.column("total_chirped")
    summary = {"lead_reference": res.lead_reference,
               "total_chirped_rel_spread": float(np.ptp(tot) / tot[0]),
               "total_unchirped_increasing": bool(np.all(np.diff(res.column("total_unchirped")) > 0))}
    return summary, files


def _frexel_covariance(st, cfg, L):
    svd = np.linalg.svd(L)
    eta_t = cfg["calibration"]["target_db"] * np.log(10.0) / (20.0 * svd[1][0])
    graph, spec, frexels = cluster_objects(cfg, st.grid)
    return graph, frexels, eta_t, mode_covariance_from_coupling(None, eta_t, frexels, svd=svd)


def cmd_cluster(cfg, out, seed):
    st = Setup(cfg)
    graph, frexels, eta_t, gamma = _frexel_covariance(st, cfg, st.coupling())
    popts = phase_options(cfg, seed)
    perm_cfg = cfg["cluster"]["permutation"]
    trivial = optimize_frexel_phases(gamma, graph, **popts)
    files = {}
    if perm_cfg == "search":
        res = optimize_frexel_permutation(gamma, graph, **popts)
        perm, best = res.perm, res.phases
        files["permutations"] = write_csv(out / "permutations.csv", ["permutation", "mean_variance"],
                                          [["-".join(map(str, p)), v] for p, v in res.table])
    else:
        perm = tuple(perm_cfg)
        best = optimize_frexel_phases(permute_covariance(gamma, perm), graph, **popts)
    rows = [[j, perm[j], best.variances[j], squeezing_db(best.variances[j]), best.thetas[j]]
            for j in range(graph.n_nodes)]
    files["nullifiers"] = write_csv(out / "nullifiers.csv", ["node", "frexel", "variance", "squeezing_db", "theta"],
                                    rows)
    summary = {"eta_t": eta_t, "trivial_mean_variance": trivial.mean_variance, "best_permutation": list(perm),
               "best_mean_variance": best.mean_variance, "best_mean_db": squeezing_db(best.mean_variance)}
    print(f"trivial {trivial.mean_variance:.4f}; best permutation {perm} -> {best.mean_variance:.4f}")
    return summary, files


def cmd_squeezing_scan(cfg, out, seed):
    st = Setup(cfg)
    graph, spec, frexels = cluster_objects(cfg, st.grid)
    block = cfg["squeezing_scan"]
    perm = None if block["permutation"] is None else tuple(block["permutation"])
    rows = analysis.squeezing_scan(st.coupling(), frexels, graph, block["db_values"], perm=perm,
                                   phase_kwargs=phase_options(cfg, seed))
    csv_rows = [[r.eta_t, r.leading_db, r.mean_variance] + list(r.variances) for r in rows]
    header = ["eta_t", "leading_db", "mean_variance"] + [f"variance_{j}" for j in range(graph.n_nodes)]
    files = {"scan": write_csv(out / "squeezing_scan.csv", header, csv_rows)}
    return analysis.scan_summary(rows), files


def cmd_optimize(cfg, out, seed):
    st = Setup(cfg)
    block = cfg["optimize"]
    fitness = FitnessSpec.from_dict(block["fitness"])
    shaper = st.shaper if st.shaper is not None else ShaperConfig()
    kwargs = {}
    if fitness.needs_cluster:
        if "cluster" not in cfg:
            raise config.ConfigError("nullifier fitness needs the 'cluster' block")
        graph, spec, frexels = cluster_objects(cfg, st.grid)
        kwargs = {"frexels": frexels, "graph": graph, "perm": block["permutation"],
                  "target_db": cfg["calibration"]["target_db"]}
    objective = ShaperObjective(fitness, st.phase_matching, st.base, shaper, **kwargs)
    evo = block["evo"]
    ec = shaper_evo_config(shaper, amplitude_scale=evo["amplitude_scale"], phase_scale=evo["phase_scale"],
                           sigma0=evo["sigma0"], max_generations=evo["max_generations"], seed=seed,
                           population=evo["population"], parents=evo["parents"],
                           history_blend=evo["history_blend"])
    start = objective.metrics(shaper.u)
    res = evolve(objective, ec, maximize=fitness.maximize, x0=shaper.u)
    best = reduce_phases(shaper.with_params(res.best_u))
    m = objective.metrics(best.u)
    files = {}
    nodes = best.control_frequencies(st.base.omega0, st.base.sigma_omega)
    files["profile"] = write_csv(out / "best_profile.csv", ["control", "omega_rad_s", "amplitude", "phase"],
                                 [[j, nodes[j], best.amplitude_controls[j], best.phase_controls[j]]
                                  for j in range(best.n_control)])
    pump = shaped_pump(st.base, best)
    files["pump"] = write_csv(out / "best_pump.csv", ["omega_rad_s", "amplitude", "phase"],
                              [[w, abs(a), np.angle(a)] for w, a in zip(pump.axis, pump.amplitudes)])
    files["history"] = write_csv(out / "history.csv", ["generation", "best", "mean", "sigma"],
                                 [[h.generation, h.best, h.mean, h.sigma] for h in res.history])
    files["gains"] = write_csv(out / "best_gains.csv", ["index", "gain_normalized"],
                               [[j + 1, g / m.gains[0]] for j, g in enumerate(m.gains)])
    summary = {
        "fitness": fitness.to_dict(),
        "best_value": res.best_value,
        "start_value": start.value,
        "power_weight": m.power_weight,
        "gap": m.gap,
        "n_above_0p9": m.n_flat,
        "schmidt_number": analysis.schmidt_number(m.gains),
        "generations": len(res.history),
        "evaluations": res.n_evaluations,
        "stop_reason": res.stop_reason,
        "best_u": best.u,
    }
    if m.nullifier_variances is not None:
        summary["nullifier_variances"] = m.nullifier_variances
        summary["mean_nullifier_variance"] = float(np.mean(m.nullifier_variances))
        summary["start_mean_nullifier_variance"] = float(np.mean(start.nullifier_variances))
        summary["improvement_db"] = squeezing_db(summary["mean_nullifier_variance"]) - squeezing_db(
            summary["start_mean_nullifier_variance"])
    print(f"best {res.best_value:.6g} (start {start.value:.6g}), power weight {m.power_weight:.3f}")
    return summary, files


COMMANDS = {
    "phase-match": cmd_phase_match,
    "supermodes": cmd_supermodes,
    "chirp-scan": cmd_chirp_scan,
    "optimize": cmd_optimize,
    "cluster": cmd_cluster,
    "squeezing-scan": cmd_squeezing_scan,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="spdc", description=__doc__)
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", type=Path, help="JSON run configuration (defaults if omitted)")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    return parser


def run(argv=None):
    """Execute one command; returns the process exit code."""
    args = build_parser().parse_args(argv)
    try:
        cfg = config.load(args.config) if args.config else config.resolve({})
        if args.seed is not None:
            if args.seed < 0:
                raise config.ConfigError("seed must be non-negative")
            cfg["seed"] = args.seed
        config.require(cfg, args.command)
        out = args.out
        out.mkdir(parents=True, exist_ok=True)
        summary, files = COMMANDS[args.command](copy.deepcopy(cfg), out, cfg["seed"])
        files["summary"] = write_json(out / "summary.json", summary)
        write_json(out / "manifest.json", {
            "command": args.command,
            "config": cfg,
            "seed": cfg["seed"],
            "version": code_version(),
            "outputs": {k: Path(v).name for k, v in files.items()},
        })
    except (SPDCError, ValueError) as exc:
        print(f"spdc {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
