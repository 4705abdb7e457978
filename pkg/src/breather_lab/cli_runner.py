"""Config parsing, experiment orchestration, and deterministic file output.

Configs are TOML with tables [model], [grid], [magnetic], [experiment] and
[run]; unknown keys anywhere are errors, so typos cannot silently fall
back to defaults.  Each experiment writes CSV bulk data plus a JSON
report into the output directory, and a manifest listing every file with
a content hash.  Identical configs reproduce bit-identical outputs; the
only timestamp lives in the manifest.

Exit codes: 0 success, 2 config error, 3 numerical failure (with a
partial-results marker in the manifest).
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import __version__
from .breather_field import (
    MeasureSpec,
    increment_centers,
    omega_to_json,
    potential_on_grid,
    sample_omega,
    shift_all,
    w_indicator,
)
from .eigensolve import (
    SmoothSwitch,
    eigen_lowest,
    smooth_switch_deriv,
    smooth_switch_eval,
    spectrum_csv,
)
from .grid_operator import GridSpec, MagneticSpec, assemble_hamiltonian, converged_mask
from .ssf_lab import (
    krein_check,
    singular_bound,
    spectral_shift,
    ssf_ft_integral,
    veff_singular_values,
)
from .ucp_probe import UcpConstants, fit_ucp_exponents, lifting_check, ucp_constant
from .wegner_mc import (
    WegnerParams,
    derive_sample_seed,
    hoelder_fit,
    ids_estimate,
    wegner_expectation,
)

EXPERIMENT_KINDS = ("spectrum", "ucp", "lifting", "ssf", "wegner", "ids")

THREADS_ENV = "BREATHER_LAB_THREADS"


class ConfigError(ValueError):
    """Configuration problem, attributed to a key path where possible."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully validated experiment description; all defaults materialized."""

    dim: int
    shape: str
    measure: MeasureSpec
    L_list: tuple[int, ...]
    n_h: int
    magnetic: MagneticSpec
    kind: str
    b: float | None
    E: float | None
    eps_list: tuple[float, ...] | None
    delta: float | None
    delta_list: tuple[float, ...] | None
    E_grid: tuple[float, ...] | None
    E0: float | None
    n_samples: int | None
    kappa: float | None
    M: float | None
    master_seed: int
    threads: int
    out_dir: str

    def constants(self) -> UcpConstants | None:
        if self.kappa is None:
            return None
        return UcpConstants(
            kappa=self.kappa, M=self.M, fit_window=(), residual=math.nan, b=self.b
        )


def _take(table: dict, section: str, key: str, default=None, required=False):
    if key in table:
        return table.pop(key)
    if required:
        raise ConfigError(f"missing required key {section}.{key}")
    return default


def _reject_unknown(table: dict, section: str):
    if table:
        key = sorted(table)[0]
        raise ConfigError(f"unknown key {section}.{key}")


def _as_float_tuple(value, path: str) -> tuple[float, ...]:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{path} must be a nonempty list of numbers")
    return tuple(float(v) for v in value)


def parse_config(source: str | Path) -> ExperimentConfig:
    """Parse and validate a TOML config from a path or from inline text."""
    path = Path(source)
    try:
        is_file = path.is_file()
    except OSError:
        is_file = False
    text = path.read_text() if is_file else str(source)
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML syntax error: {exc}") from exc

    known_tables = {"model", "grid", "magnetic", "experiment", "run"}
    for key in raw:
        if key not in known_tables:
            raise ConfigError(f"unknown key {key}")

    model = dict(raw.get("model", {}))
    dim = int(_take(model, "model", "dim", default=1))
    shape = _take(model, "model", "shape", default="ball")
    omega_minus = float(_take(model, "model", "omega_minus", required=True))
    omega_plus = float(_take(model, "model", "omega_plus", required=True))
    density = _take(model, "model", "density", default="uniform")
    slope = float(_take(model, "model", "slope", default=0.0))
    _reject_unknown(model, "model")
    if shape not in ("ball", "cube"):
        raise ConfigError(f"model.shape must be 'ball' or 'cube', got {shape!r}")
    try:
        measure = MeasureSpec(
            omega_minus=omega_minus,
            omega_plus=omega_plus,
            density=density,
            slope=slope,
        )
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from exc

    grid_tab = dict(raw.get("grid", {}))
    L = _take(grid_tab, "grid", "L")
    L_list = _take(grid_tab, "grid", "L_list")
    n_h = int(_take(grid_tab, "grid", "n_h", default=16))
    _reject_unknown(grid_tab, "grid")
    if (L is None) == (L_list is None):
        raise ConfigError("grid: exactly one of L and L_list is required")
    sides = tuple(int(v) for v in ([L] if L is not None else L_list))
    try:
        for side in sides:
            GridSpec(d=dim, L=side, n_h=n_h)
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from exc

    mag_tab = dict(raw.get("magnetic", {}))
    mag_kind = _take(mag_tab, "magnetic", "kind", default="none")
    strength = float(_take(mag_tab, "magnetic", "strength", default=0.0))
    _reject_unknown(mag_tab, "magnetic")
    try:
        magnetic = MagneticSpec(kind=mag_kind, strength=strength)
    except ValueError as exc:
        raise ConfigError(f"magnetic: {exc}") from exc

    exp = dict(raw.get("experiment", {}))
    kind = _take(exp, "experiment", "kind", required=True)
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError(
            f"experiment.kind must be one of {', '.join(EXPERIMENT_KINDS)}"
        )
    b = _take(exp, "experiment", "b")
    b = None if b is None else float(b)
    E = _take(exp, "experiment", "E")
    E = None if E is None else float(E)
    eps = _take(exp, "experiment", "eps")
    eps_list = _take(exp, "experiment", "eps_list")
    if eps is not None and eps_list is not None:
        raise ConfigError("experiment: give either eps or eps_list, not both")
    eps_tuple = None
    if eps is not None:
        eps_tuple = (float(eps),)
    elif eps_list is not None:
        eps_tuple = _as_float_tuple(eps_list, "experiment.eps_list")
    delta = _take(exp, "experiment", "delta")
    delta = None if delta is None else float(delta)
    delta_list = _take(exp, "experiment", "delta_list")
    if delta_list is not None:
        delta_list = _as_float_tuple(delta_list, "experiment.delta_list")
    E_grid = _take(exp, "experiment", "E_grid")
    if E_grid is not None:
        E_grid = _as_float_tuple(E_grid, "experiment.E_grid")
    E0 = _take(exp, "experiment", "E0")
    E0 = None if E0 is None else float(E0)
    n_samples = _take(exp, "experiment", "n_samples")
    n_samples = None if n_samples is None else int(n_samples)
    kappa = _take(exp, "experiment", "kappa")
    kappa = None if kappa is None else float(kappa)
    m_exp = _take(exp, "experiment", "M")
    m_exp = None if m_exp is None else float(m_exp)
    _reject_unknown(exp, "experiment")

    run = dict(raw.get("run", {}))
    master_seed = int(_take(run, "run", "master_seed", default=0))
    threads = _take(run, "run", "threads")
    out_dir = _take(run, "run", "out_dir", default="out")
    _reject_unknown(run, "run")
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1"))
    threads = int(threads)
    if threads < 1:
        raise ConfigError("run.threads must be >= 1")
    if master_seed < 0:
        raise ConfigError("run.master_seed must be nonnegative")

    config = ExperimentConfig(
        dim=dim,
        shape=shape,
        measure=measure,
        L_list=sides,
        n_h=n_h,
        magnetic=magnetic,
        kind=kind,
        b=b,
        E=E,
        eps_list=eps_tuple,
        delta=delta,
        delta_list=delta_list,
        E_grid=E_grid,
        E0=E0,
        n_samples=n_samples,
        kappa=kappa,
        M=m_exp,
        master_seed=master_seed,
        threads=threads,
        out_dir=str(out_dir),
    )
    _validate_experiment(config)
    return config


def _require(config: ExperimentConfig, field_name: str):
    if getattr(config, field_name) is None:
        raise ConfigError(
            f"experiment.{field_name} is required for kind {config.kind!r}"
        )


def _validate_experiment(config: ExperimentConfig):
    kind = config.kind
    if (config.kappa is None) != (config.M is None):
        raise ConfigError("experiment: kappa and M must be given together")
    if kind in ("spectrum", "ucp", "lifting", "ssf", "wegner"):
        _require(config, "b")
    if kind in ("ucp", "lifting"):
        _require(config, "delta_list")
    if kind == "ssf":
        _require(config, "delta")
    if kind == "wegner":
        _require(config, "E")
        _require(config, "n_samples")
        if config.eps_list is None:
            raise ConfigError("experiment.eps (or eps_list) is required for wegner")
        constants = None
        if config.kappa is not None:
            try:
                constants = config.constants()
            except ValueError as exc:
                raise ConfigError(f"experiment: {exc}") from exc
        for eps in config.eps_list:
            if config.E + eps > config.b - 1.0:
                raise ConfigError(
                    f"experiment: window [E - eps, E + eps] with eps {eps} "
                    f"leaves (-inf, b - 1]"
                )
            if constants is not None:
                from .wegner_mc import epsilon_max

                emax = epsilon_max(constants, config.measure.omega_plus)
                if eps > emax:
                    raise ConfigError(
                        f"experiment.eps_list: eps {eps} exceeds epsilon_max "
                        f"{emax} for the supplied constants"
                    )
    if kind == "ids":
        if config.E_grid is None:
            raise ConfigError("experiment.E_grid is required for ids")
        _require(config, "n_samples")
    if kind in ("ucp", "lifting", "ssf"):
        deltas = config.delta_list if config.delta is None else (config.delta,)
        for dv in deltas or ():
            if config.measure.omega_plus + dv > 0.5 + 1e-9:
                raise ConfigError(
                    f"experiment: shift {dv} pushes omega_plus past 1/2"
                )


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise TypeError(f"cannot serialize {type(value)}")


def serialize_config(config: ExperimentConfig) -> str:
    """Canonical TOML for a config; parse(serialize(c)) == c."""
    sections: dict[str, dict] = {
        "model": {
            "dim": config.dim,
            "shape": config.shape,
            "omega_minus": config.measure.omega_minus,
            "omega_plus": config.measure.omega_plus,
            "density": config.measure.density,
            "slope": config.measure.slope,
        },
        "grid": {"L_list": list(config.L_list), "n_h": config.n_h},
        "magnetic": {
            "kind": config.magnetic.kind,
            "strength": config.magnetic.strength,
        },
        "experiment": {"kind": config.kind},
        "run": {
            "master_seed": config.master_seed,
            "threads": config.threads,
            "out_dir": config.out_dir,
        },
    }
    exp = sections["experiment"]
    for key in ("b", "E", "delta", "E0", "n_samples", "kappa", "M"):
        value = getattr(config, key)
        if value is not None:
            exp[key] = value
    for key, toml_key in (
        ("eps_list", "eps_list"),
        ("delta_list", "delta_list"),
        ("E_grid", "E_grid"),
    ):
        value = getattr(config, key)
        if value is not None:
            exp[toml_key] = list(value)
    lines = []
    for section, table in sections.items():
        lines.append(f"[{section}]")
        for key, value in table.items():
            lines.append(f"{key} = {_toml_value(value)}")
        lines.append("")
    return "\n".join(lines)


def _fmt(value: float) -> str:
    return repr(float(value))


def _write(out_dir: Path, name: str, content: str, files: dict):
    path = out_dir / name
    path.write_text(content)
    files[name] = hashlib.sha256(content.encode()).hexdigest()


def _json_dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def _grid(config: ExperimentConfig, L: int) -> GridSpec:
    return GridSpec(d=config.dim, L=L, n_h=config.n_h)


def _run_spectrum(config: ExperimentConfig, out_dir: Path, files: dict):
    L = config.L_list[0]
    grid = _grid(config, L)
    omega = sample_omega(config.measure, L, config.master_seed, config.dim)
    v = potential_on_grid(omega, config.shape, grid)
    h = assemble_hamiltonian(grid, v, config.magnetic)
    spectrum = eigen_lowest(h, config.b)
    below = spectrum.eigenvalues[spectrum.eigenvalues <= config.b]
    _write(out_dir, "omega.json", omega_to_json(omega) + "\n", files)
    _write(out_dir, "spectrum.csv", spectrum_csv(spectrum), files)
    report = {
        "L": L,
        "b": config.b,
        "n_eigenvalues_below_b": int(below.size),
        "n_converged": int(np.sum(converged_mask(below, grid))),
        "convergence_cutoff": 0.1 / grid.h**2,
    }
    _write(out_dir, "report.json", _json_dump(report), files)


def _ucp_samples(config: ExperimentConfig):
    """Draw (radius, observed constant) samples over L_list x delta_list."""
    n_draws = config.n_samples or 3
    rows = []
    counter = 0
    for L in config.L_list:
        grid = _grid(config, L)
        for delta in config.delta_list:
            for _ in range(n_draws):
                counter += 1
                seed = derive_sample_seed(config.master_seed, counter)
                omega = sample_omega(config.measure, L, seed, config.dim)
                shifted = shift_all(omega, delta)
                v = potential_on_grid(shifted, config.shape, grid)
                h = assemble_hamiltonian(grid, v, config.magnetic)
                w = w_indicator(increment_centers(omega, delta), grid)
                c_obs = ucp_constant(h, config.b, w)
                # constants at roundoff scale mean the Gram was singular
                # (fewer grid points in W than eigenvectors below b): a
                # resolution artifact, not a UCP observation
                if c_obs is not None and c_obs > 1e-12:
                    rows.append((L, delta, seed, 0.5 * delta, c_obs))
    return rows


def _run_ucp(config: ExperimentConfig, out_dir: Path, files: dict):
    rows = _ucp_samples(config)
    lines = ["L,delta,seed,radius,c_obs"]
    for L, delta, seed, radius, c_obs in rows:
        lines.append(f"{L},{_fmt(delta)},{seed},{_fmt(radius)},{_fmt(c_obs)}")
    _write(out_dir, "ucp_samples.csv", "\n".join(lines) + "\n", files)
    constants = fit_ucp_exponents(
        [(radius, c) for _, _, _, radius, c in rows], config.b
    )
    report = {
        "kappa": constants.kappa,
        "M": constants.M,
        "fit_window": list(constants.fit_window),
        "residual": constants.residual,
        "b": constants.b,
    }
    _write(out_dir, "ucp_fit.json", _json_dump(report), files)
    return constants


def _run_lifting(config: ExperimentConfig, out_dir: Path, files: dict):
    constants = config.constants() or _run_ucp(config, out_dir, files)
    lines = [
        "L,delta,seed,index,lam_before,lam_after,monotonicity_margin,lifting_margin"
    ]
    margins = []
    counter = 10**6  # disjoint from the ucp sample seeds
    for L in config.L_list:
        grid = _grid(config, L)
        for delta in config.delta_list:
            counter += 1
            seed = derive_sample_seed(config.master_seed, counter)
            omega = sample_omega(config.measure, L, seed, config.dim)
            records = lifting_check(
                omega, delta, constants, config.b, grid, config.shape,
                config.magnetic,
            )
            for r in records:
                margins.append(r.lifting_margin)
                lines.append(
                    f"{L},{_fmt(delta)},{seed},{r.index},{_fmt(r.lam_before)},"
                    f"{_fmt(r.lam_after)},{_fmt(r.monotonicity_margin)},"
                    f"{_fmt(r.lifting_margin)}"
                )
    _write(out_dir, "lifting_margins.csv", "\n".join(lines) + "\n", files)
    margins = np.array(margins) if margins else np.empty(0)
    report = {
        "kappa": constants.kappa,
        "M": constants.M,
        "n_margins": int(margins.size),
        "min_lifting_margin": float(margins.min()) if margins.size else None,
        "fraction_nonnegative": float(np.mean(margins >= 0.0))
        if margins.size
        else None,
    }
    _write(out_dir, "lifting_report.json", _json_dump(report), files)


def _run_ssf(config: ExperimentConfig, out_dir: Path, files: dict):
    L = config.L_list[0]
    grid = _grid(config, L)
    omega = sample_omega(config.measure, L, config.master_seed, config.dim)
    v0 = potential_on_grid(omega, config.shape, grid)
    v1 = potential_on_grid(shift_all(omega, config.delta), config.shape, grid)
    h0 = assemble_hamiltonian(grid, v0, config.magnetic)
    h1 = assemble_hamiltonian(grid, v1, config.magnetic)
    spec0 = eigen_lowest(h0, math.inf)
    spec1 = eigen_lowest(h1, math.inf)
    xi = spectral_shift(spec0, spec1)
    lines = ["breakpoint,value"]
    for bp, val in zip(xi.breakpoints, xi.values[1:]):
        lines.append(f"{_fmt(bp)},{int(val)}")
    _write(out_dir, "ssf.csv", "\n".join(lines) + "\n", files)

    switch = SmoothSwitch(1.0)
    center = config.b - 1.0
    lhs, rhs, gap = krein_check(
        h0,
        h1,
        lambda x: smooth_switch_eval(switch, np.asarray(x) - center),
        lambda x: smooth_switch_deriv(switch, np.asarray(x) - center),
        config.b,
    )
    mu = veff_singular_values(h0, h1)
    sv_lines = ["n,mu_n,decay_bound"]
    for n in range(1, len(mu) + 1):
        bound = singular_bound(n, config.dim) if n > 4**config.dim else ""
        sv_lines.append(f"{n},{_fmt(mu.mu(n))},{bound and _fmt(bound)}")
    _write(out_dir, "veff_singular_values.csv", "\n".join(sv_lines) + "\n", files)
    t = 1.0 / 32.0
    ft_value = ssf_ft_integral(xi, config.b, t, config.dim)
    k1 = 2.0 * 32**config.dim * math.factorial(config.dim + 1)
    report = {
        "krein_lhs": lhs,
        "krein_rhs": rhs,
        "krein_gap": gap,
        "ft_integral_T": config.b,
        "ft_integral": ft_value,
        "ft_bound_K1_eT": k1 * math.exp(config.b),
    }
    _write(out_dir, "ssf_report.json", _json_dump(report), files)


def _run_wegner(config: ExperimentConfig, out_dir: Path, files: dict):
    constants = config.constants()
    cells = []
    for L in config.L_list:
        for eps in config.eps_list:
            params = WegnerParams(
                b=config.b,
                E=config.E,
                epsilon=eps,
                measure=config.measure,
                shape=config.shape,
                grid=_grid(config, L),
                n_samples=config.n_samples,
                master_seed=config.master_seed,
                constants=constants,
                magnetic=config.magnetic,
            )
            report = wegner_expectation(params, threads=config.threads)
            name = f"wegner_samples_L{L}_eps{_fmt(eps)}.csv"
            lines = ["sample_index,seed_derived,trace_count"]
            for i in range(report.counts.size):
                lines.append(
                    f"{i + 1},{int(report.seeds[i])},{int(report.counts[i])}"
                )
            _write(out_dir, name, "\n".join(lines) + "\n", files)
            cells.append(
                {
                    "L": int(L),
                    "d": config.dim,
                    "E": config.E,
                    "eps": eps,
                    "b": config.b,
                    "n_samples": config.n_samples,
                    "master_seed": config.master_seed,
                    "mean": report.mean,
                    "stderr": report.stderr,
                    "rhs_bound": report.rhs_bound,
                    "excluded": report.excluded,
                    "per_sample_csv_path": name,
                }
            )
    _write(out_dir, "wegner_report.json", _json_dump({"cells": cells}), files)


def _run_ids(config: ExperimentConfig, out_dir: Path, files: dict):
    table = ids_estimate(
        config.L_list,
        config.E_grid,
        config.measure,
        config.shape,
        config.n_h,
        config.n_samples,
        config.master_seed,
        d=config.dim,
        magnetic=config.magnetic,
    )
    for L in config.L_list:
        lines = ["E,ids,stderr"]
        for p in table:
            if p.L == L:
                lines.append(f"{_fmt(p.E)},{_fmt(p.mean)},{_fmt(p.stderr)}")
        _write(out_dir, f"ids_L{L}.csv", "\n".join(lines) + "\n", files)
    lines = ["E," + ",".join(f"ids_L{L},stderr_L{L}" for L in config.L_list)]
    for e in config.E_grid:
        cols = [_fmt(e)]
        for L in config.L_list:
            p = next(q for q in table if q.L == L and q.E == e)
            cols += [_fmt(p.mean), _fmt(p.stderr)]
        lines.append(",".join(cols))
    _write(out_dir, "ids_scaling.csv", "\n".join(lines) + "\n", files)
    report = {"L_list": list(config.L_list)}
    if config.E0 is not None:
        try:
            fit = hoelder_fit(table, config.E0)
        except ValueError as exc:
            # the IDS curves are still valid; report the unusable fit
            report["hoelder"] = {"E0": config.E0, "error": str(exc)}
        else:
            report["hoelder"] = {
                "E0": config.E0,
                "slope": fit.slope,
                "below_resolution": fit.below_resolution,
            }
    _write(out_dir, "ids_report.json", _json_dump(report), files)


_RUNNERS = {
    "spectrum": _run_spectrum,
    "ucp": _run_ucp,
    "lifting": _run_lifting,
    "ssf": _run_ssf,
    "wegner": _run_wegner,
    "ids": _run_ids,
}


def run_experiment(config: ExperimentConfig) -> int:
    """Run one experiment; writes outputs and a manifest, returns the exit
    code (0 success, 3 numerical failure with a partial manifest)."""
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files: dict[str, str] = {}
    partial = False
    error = None
    try:
        _RUNNERS[config.kind](config, out_dir, files)
    except ConfigError:
        raise
    except Exception as exc:  # numerical failure: record and report
        partial = True
        error = f"{type(exc).__name__}: {exc}"
    manifest = {
        "version": __version__,
        "experiment": config.kind,
        "master_seed": config.master_seed,
        "config_sha256": hashlib.sha256(serialize_config(config).encode()).hexdigest(),
        "files": files,
        "partial_results": partial,
        "error": error,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    (out_dir / "manifest.json").write_text(_json_dump(manifest))
    if partial:
        print(f"numerical failure: {error}", file=sys.stderr)
        return 3
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="breather-lab",
        description="Random breather box experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in EXPERIMENT_KINDS:
        p = sub.add_parser(kind, help=f"run a {kind} experiment")
        p.add_argument("--config", required=True, help="TOML config path")
        p.add_argument("--out", help="output directory override")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--threads", type=int, help="worker thread override")
    args = parser.parse_args(argv)

    try:
        config = parse_config(args.config)
        if config.kind != args.command:
            raise ConfigError(
                f"config is for experiment {config.kind!r}, "
                f"subcommand was {args.command!r}"
            )
        updates = {}
        if args.out is not None:
            updates["out_dir"] = args.out
        if args.seed is not None:
            updates["master_seed"] = args.seed
        if args.threads is not None:
            updates["threads"] = args.threads
        if updates:
            config = dataclasses.replace(config, **updates)
            _validate_experiment(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return run_experiment(config)


if __name__ == "__main__":
    sys.exit(main())
