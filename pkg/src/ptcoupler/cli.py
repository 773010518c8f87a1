"""Command-line interface: parameter parsing, runs, and CSV/JSON serialisation.

Configuration comes from a flat key=value file plus command-line overrides
(flags win over the file).  Every output consists of a CSV data file and a JSON
metadata sidecar that embeds the fully resolved configuration, so a run is
reproducible from its own artifact.

Exit codes: 0 success, 1 validation failure, 2 bad input, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .fock import DensityMatrix, TwoModeBasis, occupation_labels, superposition_state, fock_state
from .floquet import (
    PTPhase,
    broken_thresholds,
    classify_pt,
    monodromy_2x2,
    monodromy_full,
    occupation_trajectories,
    phase_diagram,
    sector_block,
)
from .loss import mean_loss, profile_for_target
from .oracle import oracle_monodromy
from .reservoir import (
    analytic_decay,
    config_for_target,
    full_system_comparison,
    recurrence_estimate,
    simulate_array,
)
from .superops import CouplerParams, commutator_table

__all__ = ["main"]


class ConfigError(Exception):
    """Invalid configuration values; reported with exit code 2."""


# key -> (type, default, help)
_SHARED = {
    "kappa": (float, 1.0, "coupler rate (unit scale)"),
    "gamma_max": (float, 0.25, "peak loss rate in units of kappa"),
    "omega": (float, 2.0, "loss modulation frequency in units of kappa"),
    "min_ratio": (float, 1e-3, "gamma_min/gamma_max target of the profile"),
    "nmax": (int, 3, "total-photon truncation"),
    "tol": (float, 1e-10, "relative ODE tolerance"),
    "eps_split": (float, 1e-4, "Lyapunov splitting threshold in units of kappa"),
    "jobs": (int, 0, "worker processes for the sweep (0 = all cores)"),
    "out": (str, None, "output CSV path"),
}

_PER_COMMAND = {
    "phase-diagram": {
        "omega_min": (float, 0.2, "lower modulation frequency, units of kappa"),
        "omega_max": (float, 3.0, "upper modulation frequency, units of kappa"),
        "gbar_min": (float, 0.01, "lower peak loss, units of kappa"),
        "gbar_max": (float, 2.5, "upper peak loss, units of kappa"),
        "n_omega": (int, 141, "frequency grid points"),
        "n_gamma": (int, 125, "loss grid points"),
    },
    "evolve": {
        "state": (str, "superposition:3", "input state: superposition:N | fock:M,H | amps:c0,c1,..."),
        "zmax": (float, None, "propagation span (default 10 periods)"),
        "samples": (int, 401, "output samples"),
    },
    "reservoir": {
        "kappa": (float, 0.0, "system-system coupling in units of kappa_b (0 = single guide)"),
        "gamma_max": (float, 0.125, "peak loss rate in units of kappa_b"),
        "omega": (float, 1.0, "modulation frequency in units of kappa_b"),
        "n_bath": (int, 200, "number of chain guides"),
        "kappa_b": (float, 1.0, "chain coupling (unit scale of the array)"),
        "zmax": (float, None, "simulation span (default: recurrence length)"),
        "dz_out": (float, 0.25, "output sampling step"),
    },
    "validate": {
        "seed": (int, 95123, "seed for the random sum-rule points"),
    },
    "coeffs": {
        "samples": (int, 129, "samples per integration segment"),
    },
}


def _parse_config_file(path):
    values = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for ln, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{ln}: expected key=value, got {raw.strip()!r}")
                key, val = (s.strip() for s in line.split("=", 1))
                values[key.replace("-", "_")] = val
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return values


def _resolve(command, args):
    schema = dict(_SHARED)
    schema.update(_PER_COMMAND.get(command, {}))
    resolved = {key: default for key, (_, default, _h) in schema.items()}
    if args.config:
        for key, raw in _parse_config_file(args.config).items():
            if key not in schema:
                raise ConfigError(f"unknown config key {key!r} for command {command!r}")
            typ = schema[key][0]
            try:
                resolved[key] = typ(raw)
            except ValueError as exc:
                raise ConfigError(f"config key {key!r}: cannot parse {raw!r} as {typ.__name__}") from exc
    for key in schema:
        val = getattr(args, key, None)
        if val is not None:
            resolved[key] = val

    if command == "reservoir":
        if resolved["kappa"] < 0:
            raise ConfigError(f"kappa must be non-negative, got {resolved['kappa']}")
    elif resolved["kappa"] <= 0:
        raise ConfigError(f"kappa must be positive, got {resolved['kappa']}")
    if resolved["gamma_max"] <= 0:
        raise ConfigError(f"gamma_max must be positive, got {resolved['gamma_max']}")
    if resolved["omega"] <= 0:
        raise ConfigError(f"omega must be positive, got {resolved['omega']}")
    if not 0 < resolved["min_ratio"] < 1:
        raise ConfigError(f"min_ratio must lie in (0, 1), got {resolved['min_ratio']}")
    if resolved["nmax"] < 0:
        raise ConfigError(f"nmax must be non-negative, got {resolved['nmax']}")
    if resolved["tol"] <= 0:
        raise ConfigError(f"tol must be positive, got {resolved['tol']}")
    if resolved["out"] is None:
        suffix = ".json" if command == "validate" else ".csv"
        resolved["out"] = f"{command.replace('-', '_')}{suffix}"
    if resolved["jobs"] == 0:
        resolved["jobs"] = os.cpu_count() or 1
    return resolved


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def _write_csv(path, header, rows):
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(_fmt(x) for x in row) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write output {path}: {exc}") from exc


def _write_sidecar(path, command, config, extras, wall_time):
    meta = {
        "command": command,
        "version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "wall_time_s": wall_time,
        "config": {k: config[k] for k in sorted(config)},
    }
    meta.update(extras)
    sidecar = f"{path}.meta.json"
    try:
        with open(sidecar, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write metadata {sidecar}: {exc}") from exc


def _profile(cfg):
    return profile_for_target(
        cfg["gamma_max"] * cfg["kappa"], cfg["omega"] * cfg["kappa"], cfg["min_ratio"]
    )


def _parse_state(spec, basis):
    kind, _, arg = spec.partition(":")
    if kind == "superposition":
        try:
            return superposition_state(basis, int(arg))
        except ValueError as exc:
            raise ConfigError(f"bad state {spec!r}: {exc}") from exc
    if kind == "fock":
        try:
            m, h = (int(s) for s in arg.split(","))
            return fock_state(basis, m, h)
        except ValueError as exc:
            raise ConfigError(f"bad state {spec!r}: {exc}") from exc
    if kind == "amps":
        try:
            amps = np.array([complex(s) for s in arg.split(",")], dtype=complex)
        except ValueError as exc:
            raise ConfigError(f"bad state {spec!r}: {exc}") from exc
        if amps.shape != (basis.dim,):
            raise ConfigError(
                f"state {spec!r}: expected {basis.dim} amplitudes, got {len(amps)}"
            )
        nrm = np.linalg.norm(amps)
        if nrm == 0:
            raise ConfigError(f"state {spec!r} has zero norm")
        amps = amps / nrm
        return DensityMatrix(basis, np.outer(amps, amps.conj()))
    raise ConfigError(f"unknown state kind {spec!r}")


def cmd_phase_diagram(cfg) -> int:
    start = time.perf_counter()
    diagram = phase_diagram(
        omega_range=(cfg["omega_min"] * cfg["kappa"], cfg["omega_max"] * cfg["kappa"]),
        gbar_range=(cfg["gbar_min"] * cfg["kappa"], cfg["gbar_max"] * cfg["kappa"]),
        n_omega=cfg["n_omega"],
        n_gamma=cfg["n_gamma"],
        kappa=cfg["kappa"],
        min_ratio=cfg["min_ratio"],
        eps_split=cfg["eps_split"] * cfg["kappa"],
        rtol=cfg["tol"],
        atol=cfg["tol"] * 1e-2,
        jobs=cfg["jobs"],
    )
    rows = []
    for i, w in enumerate(diagram.omega_grid):
        for j, g in enumerate(diagram.gbar_grid):
            label = PTPhase.BROKEN.value if diagram.broken[i, j] else PTPhase.SYMMETRIC.value
            rows.append((w / cfg["kappa"], g / cfg["kappa"], label, diagram.splitting[i, j]))
    _write_csv(cfg["out"], ["omega_over_kappa", "gbar_over_kappa", "classification", "splitting"], rows)
    extras = {
        "grid": diagram.metadata,
        "failures": diagram.failures,
        "thresholds_per_omega": broken_thresholds(diagram).tolist(),
    }
    _write_sidecar(cfg["out"], "phase-diagram", cfg, extras, time.perf_counter() - start)
    print(f"wrote {len(rows)} grid points to {cfg['out']}")
    return 0


def cmd_evolve(cfg) -> int:
    start = time.perf_counter()
    basis = TwoModeBasis(cfg["nmax"])
    profile = _profile(cfg)
    params = CouplerParams(kappa=cfg["kappa"], loss=profile)
    rho0 = _parse_state(cfg["state"], basis)
    zmax = 10.0 * profile.period if cfg["zmax"] is None else cfg["zmax"]
    if zmax < 0:
        raise ConfigError(f"zmax must be non-negative, got {zmax}")
    samples = 1 if zmax == 0.0 else cfg["samples"]
    table = occupation_trajectories(
        params, rho0, zmax, samples, rtol=cfg["tol"], atol=cfg["tol"] * 1e-2
    )
    header = ["z"] + [f"P_{n}_{h}" for n, h in table.labels] + ["trace"]
    rows = [
        [table.z[k], *table.values[k], table.trace[k]] for k in range(len(table.z))
    ]
    _write_csv(cfg["out"], header, rows)
    extras = {
        "profile": {"B": profile.B, "beta": profile.beta, "omega": profile.omega},
        "period": profile.period,
        "mean_loss": mean_loss(profile),
    }
    _write_sidecar(cfg["out"], "evolve", cfg, extras, time.perf_counter() - start)
    print(f"wrote {len(rows)} samples to {cfg['out']}")
    return 0


def cmd_reservoir(cfg) -> int:
    start = time.perf_counter()
    rcfg = config_for_target(
        gamma_max=cfg["gamma_max"] * cfg["kappa_b"],
        omega=cfg["omega"] * cfg["kappa_b"],
        n_bath=cfg["n_bath"],
        kappa_b=cfg["kappa_b"],
        kappa=cfg["kappa"] * cfg["kappa_b"],
        min_ratio=cfg["min_ratio"],
        z_max=cfg["zmax"],
        dz_out=cfg["dz_out"],
    )
    extras = {"recurrence_cutoff": recurrence_estimate(rcfg), "array": {
        "n_bath": rcfg.n_bath, "B": rcfg.B, "beta": rcfg.beta,
        "omega": rcfg.omega, "kappa": rcfg.kappa, "kappa_b": rcfg.kappa_b,
    }}
    if rcfg.kappa > 0.0:
        report = full_system_comparison(rcfg, rtol=cfg["tol"], atol=cfg["tol"] * 1e-2)
        zs, pop, ana, rel = (
            report.z,
            report.array_population,
            report.lindblad_population,
            report.relative_deviation,
        )
        extras["max_deviation_before_cutoff"] = report.max_deviation_before_cutoff
    else:
        traj = simulate_array(rcfg, initial=0, rtol=cfg["tol"], atol=cfg["tol"] * 1e-2)
        decay = analytic_decay(rcfg, trajectory=traj)
        zs, pop, ana = traj.z, traj.system_population, decay.curve
        rel = np.abs(pop - ana) / np.maximum(ana, 1e-300)
        cut = zs <= recurrence_estimate(rcfg)
        extras["fit_constant"] = decay.constant
        extras["fit_window"] = decay.fit_window
        extras["fit_method"] = decay.method
        extras["max_deviation_before_cutoff"] = float(np.max(rel[cut]))
    rows = list(zip(zs, pop, ana, rel))
    _write_csv(cfg["out"], ["z", "population", "analytic", "rel_deviation"], rows)
    _write_sidecar(cfg["out"], "reservoir", cfg, extras, time.perf_counter() - start)
    print(
        f"wrote {len(rows)} samples to {cfg['out']} "
        f"(max pre-recurrence deviation {extras['max_deviation_before_cutoff']:.3%})"
    )
    return 0


def _validation_checks(cfg):
    """(name, residual, threshold) rows for the on-demand validation suite."""
    checks = []
    basis = TwoModeBasis(cfg["nmax"])
    rtol = cfg["tol"]
    atol = rtol * 1e-2

    report = commutator_table(basis)
    checks.append(("commutator-table", report.max_residual, 1e-12))

    points = [(0.25, 1.5), (0.25, 2.0)]
    for gbar, omega in points:
        profile = profile_for_target(gbar * cfg["kappa"], omega * cfg["kappa"], cfg["min_ratio"])
        params = CouplerParams(kappa=cfg["kappa"], loss=profile)
        wn = monodromy_full(params, basis, rtol=rtol, atol=atol)
        orc = oracle_monodromy(params, basis, rtol=min(rtol, 1e-11), atol=min(atol, 1e-13))
        diff = float(np.max(np.abs(wn.monodromy - orc.toarray())))
        checks.append((f"oracle-match(gbar={gbar},omega={omega})", diff, 1e-8))

        two = monodromy_2x2(params, rtol=min(rtol, 1e-10), atol=min(atol, 1e-12))
        lam = np.exp(two.exponents * two.period)
        worst = 0.0
        for n in range(1, min(3, cfg["nmax"]) + 1):
            block = sector_block(wn.monodromy, basis, n, n)
            got = np.sort_complex(np.linalg.eigvals(block))
            kets = [lam[0] ** k * lam[1] ** (n - k) for k in range(n + 1)]
            want = np.sort_complex(np.array([a * np.conj(b) for a in kets for b in kets]))
            worst = max(worst, float(np.max(np.abs(got - want))))
        checks.append((f"sector-products(gbar={gbar},omega={omega})", worst, 1e-7))

    rng = np.random.default_rng(cfg["seed"])
    worst = 0.0
    for _ in range(50):
        gbar = rng.uniform(0.05, 2.5)
        omega = rng.uniform(0.3, 3.0)
        profile = profile_for_target(gbar * cfg["kappa"], omega * cfg["kappa"], cfg["min_ratio"])
        params = CouplerParams(kappa=cfg["kappa"], loss=profile)
        res = monodromy_2x2(params, rtol=min(rtol, 1e-11), atol=1e-13)
        worst = max(worst, abs(np.sum(res.lyapunov) + mean_loss(profile)))
    checks.append(("floquet-sum-rule(50 random points)", worst, 1e-8))
    return checks


def cmd_validate(cfg) -> int:
    start = time.perf_counter()
    checks = _validation_checks(cfg)
    all_pass = True
    rows = []
    for name, residual, threshold in checks:
        ok = residual <= threshold
        all_pass &= ok
        rows.append({"name": name, "residual": residual, "threshold": threshold, "passed": bool(ok)})
        print(f"{'PASS' if ok else 'FAIL'}  {name}: residual {residual:.3e} (threshold {threshold:.1e})")
    out = cfg["out"] if cfg["out"].endswith(".json") else cfg["out"] + ".json"
    try:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(
                {
                    "passed": all_pass,
                    "checks": rows,
                    "config": {k: cfg[k] for k in sorted(cfg)},
                    "wall_time_s": time.perf_counter() - start,
                    "version": __version__,
                },
                fh,
                indent=2,
                sort_keys=True,
            )
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write report {out}: {exc}") from exc
    print(("all checks passed" if all_pass else "validation FAILED") + f"; report: {out}")
    return 0 if all_pass else 1


def cmd_coeffs(cfg) -> int:
    start = time.perf_counter()
    from .weinorman import propagator

    basis = TwoModeBasis(cfg["nmax"])
    profile = _profile(cfg)
    params = CouplerParams(kappa=cfg["kappa"], loss=profile)
    prop = propagator(params, profile.period, basis, rtol=cfg["tol"], atol=cfg["tol"] * 1e-2)
    header = ["z", "segment"]
    for name in ("f_plus", "f_zero", "f_minus", "a1", "a2", "a3", "a4", "a5", "a6"):
        header += [f"re_{name}", f"im_{name}"]
    rows = []
    for seg_idx, seg in enumerate(prop.segments):
        sl2, solv = seg.sl2, seg.solvable
        if sl2 is None or solv is None:
            continue
        zs = sl2.z
        series = [sl2.f_plus, sl2.f_zero, sl2.f_minus]
        solv_interp = [
            np.interp(zs, solv.z, arr) for arr in (solv.a1, solv.a2, solv.a3, solv.a4, solv.a5, solv.a6)
        ]
        series += solv_interp
        for k, z in enumerate(zs):
            row = [z, seg_idx]
            for arr in series:
                row += [arr[k].real, arr[k].imag]
            rows.append(row)
    _write_csv(cfg["out"], header, rows)
    extras = {
        "segments": [[seg.z0, seg.z1] for seg in prop.segments],
        "profile": {"B": profile.B, "beta": profile.beta, "omega": profile.omega},
    }
    _write_sidecar(cfg["out"], "coeffs", cfg, extras, time.perf_counter() - start)
    print(f"wrote {len(rows)} coefficient samples to {cfg['out']}")
    return 0


_COMMANDS = {
    "phase-diagram": (cmd_phase_diagram, "classify the modulation-frequency / peak-loss grid"),
    "evolve": (cmd_evolve, "propagate a state and record occupations"),
    "reservoir": (cmd_reservoir, "simulate the waveguide-array loss model"),
    "validate": (cmd_validate, "run the cross-validation suite"),
    "coeffs": (cmd_coeffs, "dump the propagator expansion coefficients over one period"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ptcoupler",
        description="Simulator for a coupler with periodically modulated loss.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for command, (_func, help_text) in _COMMANDS.items():
        p = sub.add_parser(command, help=help_text)
        p.add_argument("--config", help="flat key=value configuration file")
        schema = dict(_SHARED)
        schema.update(_PER_COMMAND.get(command, {}))
        for key, (typ, default, key_help) in schema.items():
            flag = "--" + key.replace("_", "-")
            p.add_argument(flag, type=typ, default=None, help=f"{key_help} (default {default})")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    func = _COMMANDS[args.command][0]
    try:
        cfg = _resolve(args.command, args)
        return func(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
