"""Experiment orchestration: validated configs, named presets, seeded runs,
refinement studies and plot-ready data export."""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .core import Field, make_grid2d, make_uniform_grid
from .errors import ConfigInvalidError, MissingArtifactError, NudgeDAError
from .interpolant import apply, build
from .io import read_csv, read_json, write_csv, write_json
from .models import euler1d_system, euler2d_system, scalar_system
from .moments import RecoveryConfig, close_periodic, export_moment_set, run_rte_recovery
from .nudge import NudgeConfig, fitted_decay_rate, run_nudge
from .numerics import ssprk3_step, weno5_derivative
from .reference import Observer, rte_initial_data, solve_reference, solve_rte_kinetic

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
PANEL_TIMES = (0.0, 0.5, 1.0, 1.5)
PLOT_KINDS = ("state-snapshots", "force-snapshots", "error-history", "moment-panels")
CONVERGENCE_KINDS = ("weno", "ssprk", "kernel")

_HYDRO = {"mu": 3.0, "N": 800, "N_ob": 150, "T": 1.5, "sigma_factor": 1.0, "noise_eps": 0.0,
          "seed": 0, "cfl": 0.7, "record_every": 1}

DEFAULTS: dict[str, dict] = {
    "scalar": dict(_HYDRO),
    "euler1d": dict(_HYDRO, mu=5.0, N=600, kappa=1.0, gamma=1.4),
    "euler2d": dict(_HYDRO, mu=8.0, N=180, N_ob=60, T=1.0, kappa=0.5, gamma=1.2, record_every=5,
                    store_every=1),
    "rte-moments": {"mu": 6.0, "N": 300, "N_ref": 600, "N_ob": 60, "T": 1.0, "sigma_a": 1.0,
                    "sigma_s": 1.0, "n_observed": 1, "N_target": 4, "n_velocity": 15,
                    "cfl": 0.5, "kinetic_dt_ratio": 0.5, "sigma_factor": 1.0,
                    "noise_eps": 0.0, "seed": 0, "record_every": 10},
    "noise-study": dict(_HYDRO, noise_eps=1e-4, sigma_factors=[1.0, 2.0, 3.0]),
    "sparsity-study": dict(_HYDRO, N_obs=[30, 90, 150]),
    "convergence": {"kind": "weno", "levels": 3},
}
EXPERIMENTS = tuple(DEFAULTS)

_POSITIVE = {"mu", "N", "N_ob", "T", "sigma_factor", "cfl", "kappa", "N_ref", "n_velocity",
             "kinetic_dt_ratio", "record_every", "store_every", "N_target", "levels"}
_NONNEGATIVE = {"noise_eps", "seed", "sigma_a", "sigma_s", "n_observed"}

PRESETS: dict[str, tuple[str, dict]] = {
    "scalar-sec3.1": ("scalar", {}),
    "euler1d-sec3.2": ("euler1d", {}),
    "euler2d-sec3.3": ("euler2d", {}),
    "rte-thin-sec4.3": ("rte-moments", {"sigma_a": 1.0, "sigma_s": 1.0}),
    "rte-thick-sec4.3": ("rte-moments", {"sigma_a": 10.0, "sigma_s": 10.0}),
}


# --------------------------------------------------------------------------- configuration


def _coerce(key: str, value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigInvalidError(f"parameter {key!r} must be a boolean")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or float(value) != int(value):
            raise ConfigInvalidError(f"parameter {key!r} must be an integer, got {value!r}")
        return int(value)
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigInvalidError(f"parameter {key!r} must be a number, got {value!r}")
        return float(value)
    if isinstance(default, list):
        if not isinstance(value, (list, tuple)) or not value:
            raise ConfigInvalidError(f"parameter {key!r} must be a non-empty list")
        return [_coerce(key, v, default[0]) for v in value]
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigInvalidError(f"parameter {key!r} must be a string")
        return value
    return value


def _check_value(key: str, value) -> None:
    values = value if isinstance(value, list) else [value]
    for v in values:
        if isinstance(v, str):
            continue
        if not math.isfinite(v):
            raise ConfigInvalidError(f"parameter {key!r} must be finite")
        if key in _POSITIVE and not v > 0:
            raise ConfigInvalidError(f"parameter {key!r} must be positive, got {v!r}")
        if key in _NONNEGATIVE and v < 0:
            raise ConfigInvalidError(f"parameter {key!r} must be non-negative, got {v!r}")
    if key == "gamma" and not value > 1:
        raise ConfigInvalidError("gamma must exceed 1")
    if key == "cfl" and value > 1:
        raise ConfigInvalidError("cfl must not exceed 1")


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment with its full (default-completed) parameter map."""

    experiment: str
    parameters: dict = field(default_factory=dict)
    output_dir: str = "runs/out"
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigInvalidError(f"unsupported schema_version {self.schema_version!r}")
        if self.experiment not in DEFAULTS:
            raise ConfigInvalidError(f"unknown experiment {self.experiment!r}; "
                                     f"expected one of {', '.join(EXPERIMENTS)}")
        defaults = DEFAULTS[self.experiment]
        unknown = sorted(set(self.parameters) - set(defaults))
        if unknown:
            raise ConfigInvalidError(f"unknown parameter(s) for {self.experiment}: {', '.join(unknown)}")
        params = {k: _coerce(k, self.parameters.get(k, v), v) for k, v in defaults.items()}
        for k, v in params.items():
            _check_value(k, v)
        if self.experiment == "convergence":
            if params["kind"] not in CONVERGENCE_KINDS:
                raise ConfigInvalidError(f"unknown convergence kind {params['kind']!r}")
            if params["levels"] < 3:
                raise ConfigInvalidError("convergence studies need at least 3 levels")
        if self.experiment == "rte-moments" and not params["n_observed"] <= params["N_target"]:
            raise ConfigInvalidError("need n_observed <= N_target")
        object.__setattr__(self, "parameters", params)
        object.__setattr__(self, "output_dir", str(self.output_dir))

    def to_dict(self) -> dict:
        return {"schema_version": self.schema_version, "experiment": self.experiment,
                "parameters": dict(self.parameters), "output_dir": self.output_dir}

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigInvalidError("config must be a JSON object")
        unknown = sorted(set(d) - {"schema_version", "experiment", "parameters", "output_dir"})
        if unknown:
            raise ConfigInvalidError(f"unknown config key(s): {', '.join(unknown)}")
        if "schema_version" not in d:
            raise ConfigInvalidError("config is missing schema_version")
        if "experiment" not in d:
            raise ConfigInvalidError("config is missing experiment")
        return cls(d["experiment"], dict(d.get("parameters", {})), d.get("output_dir", "runs/out"),
                   d["schema_version"])

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            return cls.from_dict(read_json(path))
        except json.JSONDecodeError as exc:
            raise ConfigInvalidError(f"{path}: {exc}") from exc

    def with_overrides(self, **params) -> "ExperimentConfig":
        return ExperimentConfig(self.experiment, {**self.parameters, **params}, self.output_dir)


def preset(name: str, output_dir: str | None = None, **overrides) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigInvalidError(f"unknown preset {name!r}; expected one of {', '.join(PRESETS)}")
    experiment, params = PRESETS[name]
    return ExperimentConfig(experiment, {**params, **overrides}, output_dir or f"runs/{name}")


def parse_override(text: str) -> tuple[str, object]:
    """``key=value`` with the value read as JSON when possible."""
    if "=" not in text:
        raise ConfigInvalidError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


# --------------------------------------------------------------------------- reports


@dataclass
class RunReport:
    config: dict
    terminal_errors: dict = field(default_factory=dict)
    decay_rates: dict = field(default_factory=dict)
    wall_time: float = 0.0
    files: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def output_dir(self) -> Path:
        return Path(self.config["output_dir"])

    def missing_files(self) -> list[str]:
        return [f for f in self.files if not (self.output_dir / f).exists()]

    def write(self, path=None) -> Path:
        path = Path(path) if path else self.output_dir / "report.json"
        return write_json(path, asdict(self))

    @classmethod
    def read(cls, path) -> "RunReport":
        path = Path(path)
        if not path.exists():
            raise MissingArtifactError(f"report {path} not found")
        return cls(**read_json(path))


def _rel(paths, root: Path) -> list[str]:
    return sorted(str(Path(p).resolve().relative_to(root.resolve())) for p in paths)


def _panel_name(kind: str, t: float) -> str:
    return f"{kind}_t{t:g}.csv"


# --------------------------------------------------------------------------- hydrodynamic runs


def _hydro_setup(experiment: str, p: dict):
    """System, grids, truth initial data and nudged initial guess."""
    if experiment == "scalar" or experiment in ("noise-study", "sparsity-study"):
        spec = scalar_system()
        grid = make_uniform_grid(0.0, 2 * np.pi, p["N"])
        x = grid.nodes
        u0 = -0.8 * np.sin(x) + 0.4 * np.sin(2 * x) + 0.02 * np.cos(10 * x)
        return spec, grid, u0[None, :], np.zeros((1, grid.n)), (0.0, 2 * np.pi)
    if experiment == "euler1d":
        spec = euler1d_system(p["kappa"], p["gamma"])
        grid = make_uniform_grid(0.0, 4.0, p["N"])
        rho = 1.0 + 0.2 * np.sin(np.pi * grid.nodes)
        V0 = np.stack([np.ones(grid.n), 0.5 * np.ones(grid.n)])
        return spec, grid, np.stack([rho, rho]), V0, (0.0, 4.0)
    if experiment == "euler2d":
        spec = euler2d_system(p["kappa"], p["gamma"])
        grid = make_grid2d(-1.0, 1.0, p["N"], -1.0, 1.0, p["N"])
        X, Y = grid.meshgrid()
        rho = 1.0 + 0.4 * np.sin(np.pi * X) * np.cos(np.pi * Y)
        one = np.ones(grid.shape)
        return spec, grid, np.stack([rho, rho, 0.5 * rho]), np.stack([one, one, 0.5 * one]), (-1.0, 1.0)
    raise ConfigInvalidError(f"{experiment} is not a hydrodynamic experiment")


def _obs_grid(grid, n_ob: int, lo: float, hi: float):
    if grid.dim == 1:
        return make_uniform_grid(lo, hi, n_ob)
    return make_grid2d(lo, hi, n_ob, lo, hi, n_ob)


def _field_columns(grid, parts: dict, labels=None):
    if grid.dim == 1:
        names, cols = ["x"], [grid.nodes]
    else:
        X, Y = grid.meshgrid()
        names, cols = ["x", "y"], [X.ravel(), Y.ravel()]
    for prefix, arr in parts.items():
        for k in range(arr.shape[0]):
            names.append(f"{prefix}_c{labels[k] if labels else k}")
            cols.append(arr[k].ravel())
    return names, cols


def _run_hydro(experiment: str, p: dict, out: Path) -> tuple[dict, dict, list, dict]:
    spec, grid, U0, V0, (lo, hi) = _hydro_setup(experiment, p)
    T = p["T"]
    traj = solve_reference(spec, Field(grid, U0), T, cfl=p["cfl"], store_every=p.get("store_every", 1))
    og = _obs_grid(grid, p["N_ob"], lo, hi)
    sigma = p["sigma_factor"] * max(ax.dx for ax in og.axes)
    interp = build(og, grid, sigma=sigma)
    observer = Observer(traj, og, noise_eps=p["noise_eps"], seed=p["seed"])
    cfg = NudgeConfig(p["mu"], interp, cfl=p["cfl"])
    panels = [t for t in PANEL_TIMES if t <= T + 1e-12]
    if T not in panels:
        panels.append(T)
    captured = {}

    def grab(state):
        for s in panels:
            if abs(state.t - s) <= 1e-12 * max(1.0, T):
                captured[s] = (state.V.values.copy(), state.G_tilde.values.copy())

    state, hist = run_nudge(cfg, spec, observer, Field(grid, V0), T=T, truth=None,
                            record_every=p["record_every"], stop_times=panels, on_step=grab)
    files = [hist.to_csv(out / "history.csv")]
    comps = list(spec.force_components)
    for s in panels:
        V, G = captured[s]
        truth_u = traj.state_at(s)
        truth_g = traj.force_at(s)
        names, cols = _field_columns(grid, {"truth": truth_u, "nudged": V})
        files.append(write_csv(out / "fields" / _panel_name("state", s), names, cols))
        names, cols = _field_columns(grid, {"truth": truth_g[comps], "nudged": G[comps]}, comps)
        files.append(write_csv(out / "fields" / _panel_name("force", s), names, cols))
    terminal = hist.at(T)
    t_arr = hist["t"]
    decay = {}
    for k in range(spec.n_components):
        decay[f"state_err_L1_c{k}"] = fitted_decay_rate(t_arr, hist[f"state_err_L1_c{k}"],
                                                        0.2, min(0.8, T))
    details = {"steps": state.step, "reference_steps": traj.params["steps"], "sigma": sigma,
               "panel_times": panels, "dim": grid.dim, "force_components": comps,
               "n_components": spec.n_components}
    return terminal, decay, files, details


def _top_third_energy(g: np.ndarray) -> float:
    """Energy in the upper third of resolved Fourier modes of a periodic signal."""
    c = np.fft.rfft(g) / g.size
    kmax = c.size - 1
    return float(np.sum(np.abs(c[int(np.ceil(2 * kmax / 3)):]) ** 2))


def _run_noise_study(p: dict, out: Path):
    terminal, decay, files, energies = {}, {}, [], []
    for f in p["sigma_factors"]:
        sub = dict(p, sigma_factor=f)
        sub_out = out / f"sigma{f:g}"
        t_err, _, sub_files, det = _run_hydro("noise-study", sub, sub_out)
        files += sub_files
        header, data = read_csv(sub_out / "fields" / _panel_name("force", p["T"]))
        x, truth, rec = data[:, 0], data[:, 1], data[:, 2]
        files.append(write_csv(out / f"force_recovery_sigma{f:g}.csv",
                               ["x", "truth_force", "recovered_force"], [x, truth, rec]))
        energies.append(_top_third_energy(rec))
        terminal[f"sigma{f:g}"] = t_err
    files.append(write_csv(out / "spectral_energy.csv", ["sigma_factor", "top_third_energy"],
                           [p["sigma_factors"], energies]))
    return terminal, decay, files, {"top_third_energy": dict(zip([f"{f:g}" for f in p["sigma_factors"]],
                                                                energies))}


def _run_sparsity_study(p: dict, out: Path):
    terminal, files, state_errs, force_errs = {}, [], [], []
    for n_ob in p["N_obs"]:
        sub = dict(p, N_ob=n_ob)
        t_err, _, sub_files, _ = _run_hydro("sparsity-study", sub, out / f"nob{n_ob}")
        files += sub_files
        terminal[f"nob{n_ob}"] = t_err
        state_errs.append(t_err["state_err_L1_c0"])
        force_errs.append(t_err["force_err_rel_L1_c0"])
    files.append(write_csv(out / "sparsity.csv", ["N_ob", "state_err_L1", "force_err_rel_L1"],
                           [p["N_obs"], state_errs, force_errs]))
    return terminal, {}, files, {"bounded": bool(np.all(np.isfinite(state_errs)))}


def _run_rte(p: dict, out: Path):
    kin_grid = make_uniform_grid(0.0, 1.0, p["N_ref"])
    comp = make_uniform_grid(0.0, 1.0, p["N"])
    obs_grid = make_uniform_grid(0.0, 1.0, p["N_ob"])
    T = p["T"]
    n_mom = p["N_target"] + 2
    traj = solve_rte_kinetic(rte_initial_data, p["sigma_a"], p["sigma_s"], kin_grid,
                             n_velocity=p["n_velocity"], T=T, dt_ratio=p["kinetic_dt_ratio"],
                             n_moments=n_mom, store_grid=comp)
    cfg = RecoveryConfig(n_observed=p["n_observed"], N_target=p["N_target"], mu=p["mu"],
                         obs_grid=obs_grid, sigma_a=p["sigma_a"], sigma_s=p["sigma_s"],
                         comp_grid=comp, sigma=p["sigma_factor"] * obs_grid.dx, cfl=p["cfl"],
                         noise_eps=p["noise_eps"], seed=p["seed"], record_every=p["record_every"])
    panels = sorted({t for t in PANEL_TIMES if t <= T + 1e-12} | {T})
    final, hist = run_rte_recovery(cfg, traj, T, snapshot_times=panels)
    files = [hist.to_csv(out / "history.csv")]
    files += export_moment_set(final, out / "moments", params=p)
    for ms in final.snapshots:
        truth = close_periodic(traj.state_at(ms.t)[:n_mom])
        names = ["x"] + [f"truth_m{k}" for k in range(n_mom)] + [f"nudged_m{k}" for k in range(n_mom)]
        cols = [ms.grid.nodes] + list(truth) + list(ms.values())
        files.append(write_csv(out / "fields" / _panel_name("moments", ms.t), names, cols))
    terminal = hist.at(T)
    t_arr = hist["t"]
    decay = {f"moment_err_L1_m{k}": fitted_decay_rate(t_arr, hist[f"moment_err_L1_m{k}"],
                                                      2.0 / p["mu"], T) for k in range(n_mom)}
    details = {"kinetic_steps": traj.params["steps"], "panel_times": [s.t for s in final.snapshots],
               "n_moments": n_mom, "n_observed": p["n_observed"]}
    return terminal, decay, files, details


# --------------------------------------------------------------------------- convergence


def _fit_order(params, errors) -> float:
    return float(np.polyfit(np.log(params), np.log(errors), 1)[0])


def convergence_study(kind: str, levels: int = 3) -> dict:
    """Refinement sweep for one building block; returns params, errors and order.

    ``param`` is the quantity the error scales with (dx, dt or sigma), so the
    fitted slope is the observed order.
    """
    if kind not in CONVERGENCE_KINDS:
        raise ConfigInvalidError(f"unknown convergence kind {kind!r}")
    if levels < 3:
        raise ConfigInvalidError("convergence studies need at least 3 levels")
    params, errors = [], []
    if kind == "weno":
        # advective flux derivative of a smooth periodic profile
        for lev in range(levels):
            n = 40 * 2 ** lev
            grid = make_uniform_grid(0.0, 1.0, n)
            x = grid.nodes
            u = np.sin(2 * np.pi * x)
            d = weno5_derivative(u, lambda v: v, 1.0, grid.dx)
            params.append(grid.dx)
            errors.append(float(np.max(np.abs(d - 2 * np.pi * np.cos(2 * np.pi * x)))))
    elif kind == "ssprk":
        for lev in range(levels):
            dt = 0.1 / 2 ** lev
            u, t = 1.0, 0.0
            for _ in range(int(round(1.0 / dt))):
                u = ssprk3_step(np.array(u), lambda s, v: -v, t, dt)
                t += dt
            params.append(dt)
            errors.append(float(abs(u - np.exp(-1.0))))
    else:
        # Nadaraya-Watson bias at the kinks of |sin x| from dense observations
        grid = make_uniform_grid(0.0, 2 * np.pi, 4000)
        f = np.abs(np.sin(grid.nodes))
        for lev in range(levels):
            sigma = 0.2 / 2 ** lev
            interp = build(grid, grid, sigma=sigma)
            fit = apply(interp, f).values[0]
            params.append(sigma)
            errors.append(float(np.max(np.abs(fit - f))))
    return {"kind": kind, "levels": levels, "params": params, "errors": errors,
            "order": _fit_order(params, errors)}


def run_convergence(kind: str, levels: int = 3, output_dir=None) -> RunReport:
    cfg = ExperimentConfig("convergence", {"kind": kind, "levels": levels},
                           output_dir or f"runs/convergence-{kind}")
    return run_experiment(cfg)


# --------------------------------------------------------------------------- dispatch


def run_experiment(cfg: ExperimentConfig) -> RunReport:
    """Run one experiment, write its CSVs, manifest and ``report.json``."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    p = cfg.parameters
    t0 = time.perf_counter()
    try:
        if cfg.experiment in ("scalar", "euler1d", "euler2d"):
            terminal, decay, files, details = _run_hydro(cfg.experiment, p, out)
        elif cfg.experiment == "rte-moments":
            terminal, decay, files, details = _run_rte(p, out)
        elif cfg.experiment == "noise-study":
            terminal, decay, files, details = _run_noise_study(p, out)
        elif cfg.experiment == "sparsity-study":
            terminal, decay, files, details = _run_sparsity_study(p, out)
        else:
            res = convergence_study(p["kind"], p["levels"])
            files = [write_csv(out / f"convergence_{p['kind']}.csv", ["level", "param", "error"],
                               [np.arange(p["levels"]), res["params"], res["errors"]])]
            terminal, decay = {"finest_error": res["errors"][-1]}, {"order": res["order"]}
            details = res
    except NudgeDAError as exc:
        raise type(exc)(f"{cfg.experiment} experiment failed: {exc}") from exc
    wall = time.perf_counter() - t0
    manifest = {"experiment": cfg.experiment, "parameters": p, "files": _rel(files, out),
                "schema_version": SCHEMA_VERSION}
    files.append(write_json(out / "manifest.json", manifest))
    report = RunReport(cfg.to_dict(), terminal, decay, wall, _rel(files, out) + ["report.json"], details)
    report.write()
    log.info("%s finished in %.1f s", cfg.experiment, wall)
    return report


# --------------------------------------------------------------------------- plot data


def _require(path: Path) -> Path:
    if not path.exists():
        raise MissingArtifactError(f"run artifact {path} is missing")
    return path


def _slice_rows(header, data, dim):
    """2D fields are cut along the grid row nearest y = 0."""
    if dim == 1:
        return header, data
    y = data[:, 1]
    y0 = y[np.argmin(np.abs(y))]
    keep = data[np.isclose(y, y0, rtol=0.0, atol=1e-12)]
    return [header[0]] + header[2:], np.column_stack([keep[:, 0], keep[:, 2:]])


def emit_plot_data(report: RunReport, what: str, out_dir=None) -> list[Path]:
    """Plot-ready CSVs for one figure kind from a finished run."""
    if what not in PLOT_KINDS:
        raise ConfigInvalidError(f"unknown plot data kind {what!r}; expected one of {', '.join(PLOT_KINDS)}")
    root = report.output_dir
    dest = Path(out_dir) if out_dir else root / "plotdata"
    details = report.details
    files = []
    if what == "error-history":
        header, data = read_csv(_require(root / "history.csv"))
        names, cols = ["t"], [data[:, 0]]
        for j, name in enumerate(header[1:], start=1):
            col = data[:, j]
            names += [name, f"log10_{name}"]
            with np.errstate(divide="ignore", invalid="ignore"):
                cols += [col, np.where(col > 0, np.log10(np.abs(col)), np.nan)]
        return [write_csv(dest / "error_history.csv", names, cols)]
    if what == "moment-panels":
        if report.config["experiment"] != "rte-moments":
            raise MissingArtifactError("moment panels need an rte-moments run")
        T = report.config["parameters"]["T"]
        header, data = read_csv(_require(root / "fields" / _panel_name("moments", T)))
        n = details["n_moments"]
        for k in range(n):
            files.append(write_csv(dest / f"moment_m{k}_t{T:g}.csv", ["x", "truth", "nudged"],
                                   [data[:, 0], data[:, 1 + k], data[:, 1 + n + k]]))
        return files
    if report.config["experiment"] not in ("scalar", "euler1d", "euler2d"):
        raise MissingArtifactError(f"{what} needs a scalar or Euler run")
    kind = "state" if what == "state-snapshots" else "force"
    for t in details["panel_times"]:
        if t not in PANEL_TIMES:
            continue
        header, data = read_csv(_require(root / "fields" / _panel_name(kind, t)))
        header, data = _slice_rows(header, data, details["dim"])
        files.append(write_csv(dest / _panel_name(kind, t), header, list(data.T)))
    return files
