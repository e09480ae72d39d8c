import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

import config
from db_config import connect
from exceptions import AvgSampError, ConfigError, Diverged, InvalidKernel
from kernels import AverageKernel, Profile, SamplingScheme, check_nyquist_condition, check_oversampled_condition
from pw_core import PWFunction, eval_pw, local_average, wsk_reconstruct, zak_supremum, zak_transform
from recon_nyquist import GuardBandWindow, KernelGrid, build_kernel, check_decay, decay_constant, reconstruct, tail_bound
from recon_oversampled import OversampledOperator, iterate_reconstruct, sampled_averages
from services.results_service import ResultService
from spectral import flat_band_measure
from stochastic_recon import (MIN_TRIALS, TruncationExperiment, aliasing_error, empirical_aliasing, empirical_mse,
                              oversampled_path_mse, wsk_path_mse)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ASSERTION = 2


@dataclass(frozen=True)
class Param:
    default: Any
    kind: type = float
    minimum: Optional[float] = None
    maximum: Optional[float] = None
    choices: Sequence[str] = ()
    help: str = ""

    def parse(self, name: str, value: Any) -> Any:
        if self.kind is list:
            if not isinstance(value, (list, tuple)) or not value:
                raise ConfigError(name, f"expected a non-empty list, got {value!r}")
            return [self._number(name, v) for v in value]
        if self.kind is str:
            value = str(value)
            if self.choices and value not in self.choices:
                raise ConfigError(name, f"must be one of {', '.join(self.choices)}, got {value!r}")
            return value
        return self._number(name, value)

    def _number(self, name: str, value: Any):
        cast = int if self.kind is int else float
        if isinstance(value, bool):
            raise ConfigError(name, f"expected a number, got {value!r}")
        try:
            number = cast(value)
        except (TypeError, ValueError):
            raise ConfigError(name, f"expected {cast.__name__}, got {value!r}") from None
        if cast is int and number != float(value):
            raise ConfigError(name, f"expected an integer, got {value!r}")
        if self.minimum is not None and number < self.minimum:
            raise ConfigError(name, f"must be >= {self.minimum}, got {number}")
        if self.maximum is not None and number > self.maximum:
            raise ConfigError(name, f"must be <= {self.maximum}, got {number}")
        return number

    def schema(self) -> dict:
        out = {"default": self.default, "type": self.kind.__name__}
        if self.minimum is not None:
            out["minimum"] = self.minimum
        if self.maximum is not None:
            out["maximum"] = self.maximum
        if self.choices:
            out["choices"] = list(self.choices)
        if self.help:
            out["help"] = self.help
        return out


PROFILES = tuple(p.value for p in Profile)
GUARD_EDGE = 0.8 * np.pi

_KERNEL = {
    "profile": Param("box", str, choices=PROFILES),
    "a": Param(0.15, minimum=0.0, help="left extent of the kernel support"),
    "b": Param(0.15, minimum=0.0, help="right extent of the kernel support"),
}
_WINDOW = {
    "omega": Param(GUARD_EDGE, minimum=1e-6, maximum=np.pi - 1e-6, help="inner edge of the guard band"),
    "p": Param(3, int, minimum=2, maximum=12, help="window smoothness"),
}


@dataclass(frozen=True)
class Experiment:
    claim: str
    params: Dict[str, Param]
    runner: Callable[["ExperimentConfig"], "Outcome"] = field(repr=False, default=None)


@dataclass
class Outcome:
    rows: List[dict]
    summary: List[str]
    verdict: bool


@dataclass
class ExperimentConfig:
    kind: str
    params: Dict[str, Any]
    out: str = config.OUT_DIR
    seed: int = 0
    threads: int = config.THREADS
    db: Optional[str] = config.DATABASE_URL

    def echo(self) -> dict:
        return {"kind": self.kind, "seed": self.seed, "params": self.params}


def _generator(params: dict) -> AverageKernel:
    return AverageKernel(0.0, params["a"], params["b"], Profile(params["profile"]))


def _random_functions(rng: np.random.Generator, count: int, terms: int, omega: float, spread: int) -> List[PWFunction]:
    out = []
    for _ in range(count):
        indices = rng.choice(np.arange(-spread, spread + 1), size=terms, replace=False)
        out.append(PWFunction.from_arrays(np.sort(indices), rng.standard_normal(terms), omega))
    return out


def run_kernel_report(cfg: ExperimentConfig) -> Outcome:
    params = cfg.params
    u = _generator(params)
    window = GuardBandWindow(params["omega"], params["p"])
    kernel = build_kernel(u, window, KernelGrid(half_width=params["half_width"]))
    rows, summary = [], []
    for t in params["t_values"]:
        decay = decay_constant(u, window, t)
        ratio = check_decay(kernel, decay, params["n_max"])
        rows.append({"t": t, "p": decay.p, "C_p": decay.constant, "worst_ratio": ratio,
                     "satisfied": ratio <= 1.0 + 1e-9})
        summary.append(f"kernel-report t={t:g}: C_p={decay.constant:.6e} worst |s(t-n)||n|^p / C_p = {ratio:.4f}")
    summary.append(f"kernel-report frame bounds A={kernel.bounds.lower:.6f} B={kernel.bounds.upper:.6f}, "
                   f"nyquist condition {'holds' if check_nyquist_condition(u.a, u.b) else 'fails'}")
    return Outcome(rows, summary, all(r["satisfied"] for r in rows))


def run_nyquist_recon(cfg: ExperimentConfig) -> Outcome:
    params = cfg.params
    u = _generator(params)
    window = GuardBandWindow(params["omega"], params["p"])
    N = params["N"]
    t = np.linspace(params["t_min"], params["t_max"], params["t_points"])
    grid = KernelGrid.for_truncation(N, float(np.abs(t).max()))
    windowed = build_kernel(u, window, grid)
    plain = build_kernel(u, None, grid)
    decays = [decay_constant(u, window, float(s)) for s in t]

    rng = np.random.default_rng(cfg.seed)
    functions = _random_functions(rng, params["functions"], params["terms"], params["omega"] / np.pi, params["spread"])
    n = np.arange(-N, N + 1)
    rows, summary, verdict = [], [], True
    for index, f in enumerate(functions):
        averages = {int(i): local_average(f, u.shifted(float(i))) for i in n}
        truth = eval_pw(f, t)
        err_windowed = np.abs(reconstruct(averages, windowed, t, N) - truth)
        err_plain = np.abs(reconstruct(averages, plain, t, N) - truth)
        samples = dict(zip(n.tolist(), eval_pw(f, n.astype(float)).tolist()))
        err_wsk = np.abs(wsk_reconstruct(samples, 1.0, t, N) - truth)
        amplitude = float(np.sum(np.abs(f.values)))
        bounds = np.array([tail_bound(d, N, amplitude) for d in decays])
        within = bool(np.all(err_windowed <= bounds)) and float(err_windowed.max()) < params["tolerance"]
        verdict = verdict and within
        rows.append({"function": index, "windowed_error": float(err_windowed.max()),
                     "window_free_error": float(err_plain.max()), "wsk_error": float(err_wsk.max()),
                     "min_tail_bound": float(bounds.min()), "satisfied": within})
        summary.append(f"nyquist-recon f{index}: windowed {err_windowed.max():.2e} "
                       f"window-free {err_plain.max():.2e} wsk {err_wsk.max():.2e} ({'ok' if within else 'FAIL'})")
    return Outcome(rows, summary, verdict)


def _read_scheme(path: str) -> SamplingScheme:
    try:
        with open(path) as handle:
            return SamplingScheme.from_dict(json.load(handle))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError("scheme", f"cannot read {path}: {exc}") from None
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ConfigError("scheme", f"{path} is not a sampling scheme: {exc}") from None


def _read_averages(path: str) -> Dict[int, float]:
    try:
        with open(path, newline="") as handle:
            return {int(row["n"]): float(row["value"]) for row in csv.DictReader(handle)}
    except OSError as exc:
        raise ConfigError("averages", f"cannot read {path}: {exc}") from None
    except (KeyError, TypeError, ValueError) as exc:
        # rows need integer n and numeric value columns
        raise ConfigError("averages", f"{path} is not an averages table: {exc!r}") from None


def _path_row(params: dict, scheme: SamplingScheme, cfg: ExperimentConfig) -> Optional[dict]:
    """Stationary paths through the same scheme, next to point sampling on the same grid."""
    trials = params["path_trials"]
    if not trials:
        return None
    omega = params["omega"]
    model = flat_band_measure(params["path_band"] * np.pi * omega, 1.0, params["path_atoms"])
    op = OversampledOperator(scheme, omega)
    N = int(np.max(np.abs(op.indices)))
    baseline = wsk_path_mse(model, op.grid, N, trials, cfg.seed, omega, cfg.threads)
    guarantee = check_oversampled_condition(scheme, omega)
    try:
        report = oversampled_path_mse(model, scheme, omega, trials, cfg.seed, cfg.threads,
                                      params["tol"], params["max_iter"])
    except Diverged as exc:
        return {"function": "paths", "iterations": len(exc.history), "guarantee": guarantee,
                "wsk_mse": baseline.mse, "wsk_exact_mse": baseline.exact_mse, "satisfied": not guarantee}
    return {"function": "paths", "iterations": report.n, "guarantee": guarantee,
            "path_mse": report.mse, "path_stderr": report.stderr, "path_exact_mse": report.exact_mse,
            "wsk_mse": baseline.mse, "wsk_exact_mse": baseline.exact_mse,
            "satisfied": report.satisfied is not False}


def run_oversampled_recon(cfg: ExperimentConfig) -> Outcome:
    params = cfg.params
    omega = params["omega"]
    if params["scheme"]:
        if not params["averages"]:
            raise ConfigError("averages", "a scheme file needs its averages CSV")
        scheme = _read_scheme(params["scheme"])
        state = iterate_reconstruct(_read_averages(params["averages"]), scheme, omega,
                                    params["tol"], params["max_iter"])
        rows = [{"n": int(i), "coefficient": float(c)} for i, c in zip(state.estimate.indices, state.estimate.values)]
        summary = [f"oversampled-recon: {state.iterations} iterations, gamma={state.gamma:.4f}, "
                   f"converged={state.converged}, guarantee={state.guarantee}"]
        return Outcome(rows, summary, state.converged or not state.guarantee)

    if params["a"] != params["b"]:
        raise ConfigError("b", "oversampled kernels are symmetric, a and b must match")
    if 0 < params["path_trials"] < MIN_TRIALS:
        raise ConfigError("path_trials", f"must be 0 or at least {MIN_TRIALS}, got {params['path_trials']}")
    span = params["span"]
    scheme = SamplingScheme.uniform(-span, span, params["gap"], params["a"] + params["b"], Profile(params["profile"]))
    guarantee = check_oversampled_condition(scheme, omega)
    rng = np.random.default_rng(cfg.seed)
    functions = _random_functions(rng, params["functions"], params["terms"], omega, params["spread"])
    check = np.arange(-2 * params["spread"], 2 * params["spread"] + 1)
    rows, summary, verdict = [], [], True
    for index, f in enumerate(functions):
        averages = sampled_averages(f, scheme)
        try:
            state = iterate_reconstruct(averages, scheme, omega, params["tol"], params["max_iter"])
        except Diverged as exc:
            rows.append({"function": index, "iterations": len(exc.history), "gamma": None,
                         "coefficient_error": None, "converged": False, "guarantee": guarantee,
                         "satisfied": not guarantee})
            summary.append(f"oversampled-recon f{index}: diverged after {len(exc.history)} iterations")
            verdict = verdict and not guarantee
            continue
        error = float(np.max(np.abs(state.estimate.dense(check) - f.dense(check))))
        ok = (error < params["coefficient_tol"] and state.gamma < 1) or not guarantee
        verdict = verdict and ok
        rows.append({"function": index, "iterations": state.iterations, "gamma": state.gamma,
                     "coefficient_error": error, "converged": state.converged, "guarantee": guarantee,
                     "satisfied": ok})
        summary.append(f"oversampled-recon f{index}: {state.iterations} iterations, gamma={state.gamma:.4f}, "
                       f"coefficient error {error:.2e}, guarantee={guarantee}")
    path = _path_row(params, scheme, cfg)
    if path is not None:
        rows.append(path)
        verdict = verdict and path["satisfied"]
        summary.append(f"oversampled-recon paths: mse={path.get('path_mse')} wsk mse={path['wsk_mse']:.3e} "
                       f"after {path['iterations']} iterations")
    return Outcome(rows, summary, verdict)


def _non_increasing(reports) -> bool:
    return all(b.mse <= a.mse + 3 * (a.stderr + b.stderr) for a, b in zip(reports, reports[1:]))


def run_truncation_bound(cfg: ExperimentConfig) -> Outcome:
    params = cfg.params
    if params["edge"] > params["omega"]:
        raise ConfigError("edge", f"must be <= omega ({params['omega']:.6f}) for the truncation bound to apply")
    model = flat_band_measure(params["edge"], params["power"], params["atoms"])
    u = _generator(params)
    window = GuardBandWindow(params["omega"], params["p"])
    kernel = build_kernel(u, window, KernelGrid(half_width=10.0))
    exp = TruncationExperiment(model, kernel, params["t"], tuple(int(n) for n in params["n_values"]),
                               params["trials"], cfg.seed)
    reports = empirical_mse(exp, cfg.threads)
    rows = [{"N": r.n, "mse": r.mse, "stderr": r.stderr, "bound": r.bound, "satisfied": r.satisfied,
             "slope": r.slope, "exact_mse": r.exact_mse, "looseness": r.looseness} for r in reports]
    summary = [f"truncation-bound N={r.n}: mse={r.mse:.4e} ± {r.stderr:.1e} bound={r.bound:.4e} "
               f"({'ok' if r.satisfied else 'VIOLATED'})" for r in reports]
    monotone = _non_increasing(reports)
    summary.append(f"truncation-bound slope={reports[0].slope} monotone={monotone}")
    return Outcome(rows, summary, all(r.satisfied for r in reports) and monotone)


def run_aliasing(cfg: ExperimentConfig) -> Outcome:
    params = cfg.params
    model = flat_band_measure(params["edge"], params["power"], params["atoms"])
    kernel = build_kernel(_generator(params), None, KernelGrid(half_width=10.0))
    report = empirical_aliasing(model, kernel, params["t"], params["N"], params["trials"], cfg.seed, cfg.threads)
    formula = aliasing_error(model)
    row = {"N": report.n, "mse": report.mse, "stderr": report.stderr, "aliasing_error": formula,
           "allowance": report.allowance, "exact_mse": report.exact_mse, "satisfied": report.satisfied}
    summary = [f"aliasing: mse={report.mse:.4e} ± {report.stderr:.1e} formula={formula:.4e} "
               f"allowance={report.allowance:.1e} ({'ok' if report.satisfied else 'VIOLATED'})"]
    return Outcome([row], summary, report.satisfied)


def run_zak_check(cfg: ExperimentConfig) -> Outcome:
    params = cfg.params
    M = params["M"]
    xi = np.linspace(-np.pi, np.pi, params["xi_points"])
    deviation = float(np.max(np.abs(np.abs(zak_transform("sinc", 0.0, xi, M)) - 1.0)))
    supremum = zak_supremum("sinc_derivative", np.linspace(0.0, 1.0, params["t_points"]),
                            np.linspace(-np.pi, np.pi, params["sup_xi_points"]), M)
    rows = [
        {"metric": "max_abs_zak_sinc_t0_minus_1", "value": deviation, "target": 0.0,
         "satisfied": deviation < 1e-12},
        {"metric": "sup_abs_zak_sinc_derivative", "value": supremum, "target": float(np.pi),
         "satisfied": 0.98 * np.pi <= supremum <= 1.02 * np.pi},
    ]
    summary = [f"zak-check |Z_sinc(0,xi)| max deviation from 1: {deviation:.2e}",
               f"zak-check sup|Z_sinc'| = {supremum:.6f} vs pi = {np.pi:.6f}"]
    return Outcome(rows, summary, all(r["satisfied"] for r in rows))


EXPERIMENTS: Dict[str, Experiment] = {
    "kernel-report": Experiment(
        "|s(t - n)| |n|^p <= C_p(t) = (1/2pi) ∫ |(θ(ξ) exp(-itξ) / û(ξ))^(p)| dξ for n != 0",
        {**_KERNEL, **_WINDOW,
         "t_values": Param([0.0, 0.37, 0.7], list),
         "n_max": Param(500, int, minimum=1, maximum=5000),
         "half_width": Param(20.0, minimum=1.0)},
        run_kernel_report),
    "nyquist-recon": Experiment(
        "f(t) = sum_n <f, u(. - n)> s(t - n) for f band-limited inside the guard band; "
        "tail below 2 C_p(t) N^(1-p) / (p - 1)",
        {**_KERNEL, **_WINDOW,
         "N": Param(60, int, minimum=1, maximum=1000),
         "functions": Param(10, int, minimum=1),
         "terms": Param(5, int, minimum=1),
         "spread": Param(5, int, minimum=1),
         "t_min": Param(-5.0),
         "t_max": Param(5.0),
         "t_points": Param(21, int, minimum=2),
         "tolerance": Param(1e-4, minimum=0.0)},
        run_nyquist_recon),
    "oversampled-recon": Experiment(
        "average samples with gaps at most δ < 1/(sqrt(2) pi omega) determine f in PW_{pi omega}",
        {**_KERNEL,
         "a": Param(0.05, minimum=0.0),
         "b": Param(0.05, minimum=0.0),
         "omega": Param(1.0, minimum=1e-6),
         "gap": Param(0.2, minimum=1e-3),
         "span": Param(20.0, minimum=1.0),
         "functions": Param(3, int, minimum=1),
         "terms": Param(5, int, minimum=1),
         "spread": Param(4, int, minimum=1),
         "tol": Param(1e-10, minimum=0.0),
         "max_iter": Param(200, int, minimum=1),
         "coefficient_tol": Param(1e-8, minimum=0.0),
         "scheme": Param("", str, help="scheme JSON; reconstructs its averages CSV instead of random functions"),
         "averages": Param("", str, help="averages CSV with columns n, value"),
         "path_trials": Param(500, int, minimum=0, help="stationary paths through the generated scheme, 0 skips them"),
         "path_band": Param(0.8, minimum=1e-6, maximum=1.0, help="path spectrum edge as a fraction of pi omega"),
         "path_atoms": Param(64, int, minimum=2)},
        run_oversampled_recon),
    "truncation-bound": Experiment(
        "E|X(t) - X_N(t)|^2 <= 4 R_X(0) C_p(t)^2 / ((p - 1)^2 N^(2(p - 1)))",
        {**_KERNEL, **_WINDOW,
         "p": Param(2, int, minimum=2, maximum=12),
         "edge": Param(GUARD_EDGE, minimum=1e-6),
         "power": Param(1.0, minimum=1e-12),
         "atoms": Param(256, int, minimum=2),
         "t": Param(0.37),
         "n_values": Param([4, 8, 16, 32], list),
         "trials": Param(config.TRIALS, int, minimum=100)},
        run_truncation_bound),
    "aliasing": Experiment(
        "E|X(t) - PX(t)|^2 = ∫_{|λ|>pi} F(dλ)",
        {**_KERNEL,
         "edge": Param(2 * np.pi, minimum=1e-6),
         "power": Param(1.0, minimum=1e-12),
         "atoms": Param(4096, int, minimum=2),
         "t": Param(0.37),
         "N": Param(200, int, minimum=1, maximum=5000),
         "trials": Param(config.TRIALS, int, minimum=100)},
        run_aliasing),
    "zak-check": Experiment(
        "|Z_sinc(0, ξ)| = 1 and sup |Z_sinc'(t, ξ)| = pi",
        {"M": Param(10_000, int, minimum=1),
         "xi_points": Param(1024, int, minimum=2),
         "t_points": Param(33, int, minimum=2),
         "sup_xi_points": Param(65, int, minimum=2)},
        run_zak_check),
}


def list_experiments(machine: bool = False) -> str:
    if machine:
        catalog = {kind: {"claim": e.claim, "params": {k: p.schema() for k, p in e.params.items()}}
                   for kind, e in EXPERIMENTS.items()}
        return json.dumps(catalog, indent=2, sort_keys=True)
    lines = []
    for kind, e in EXPERIMENTS.items():
        lines.append(f"{kind}: {e.claim}")
        for name, p in e.params.items():
            lines.append(f"    {name} ({p.kind.__name__}, default {p.default})")
    return "\n".join(lines)


def _parse_override(item: str):
    if "=" not in item:
        raise ConfigError(item, "overrides are written key=value")
    key, raw = item.split("=", 1)
    try:
        return key.strip(), json.loads(raw)
    except json.JSONDecodeError:
        return key.strip(), raw


def load_config(kind: str, path: Optional[str] = None, overrides: Sequence[str] = (), seed: Optional[int] = None,
                out: Optional[str] = None, threads: Optional[int] = None, db: Optional[str] = None) -> ExperimentConfig:
    """Environment defaults, then the JSON file, then flags; every parameter checked against its schema."""
    if kind not in EXPERIMENTS:
        raise ConfigError("kind", f"must be one of {', '.join(EXPERIMENTS)}, got {kind!r}")
    schema = EXPERIMENTS[kind].params
    data: Dict[str, Any] = {}
    if path:
        try:
            with open(path) as handle:
                data = json.load(handle)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError("config", f"cannot read {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config", "the config file must hold a JSON object")
    cfg = ExperimentConfig(kind, {})
    raw = {k: v for k, v in data.items() if k not in ("kind", "seed", "out", "threads", "db", "params")}
    raw.update(data.get("params", {}))
    raw.update(dict(_parse_override(item) for item in overrides))

    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(unknown[0], f"unknown parameter for {kind}")
    cfg.params = {name: param.parse(name, raw.get(name, param.default)) for name, param in schema.items()}

    cfg.seed = int(seed if seed is not None else data.get("seed", 0))
    if cfg.seed < 0:
        raise ConfigError("seed", f"must be >= 0, got {cfg.seed}")
    cfg.out = out or data.get("out", config.OUT_DIR)
    cfg.threads = int(threads if threads is not None else data.get("threads", config.THREADS))
    if cfg.threads < 1:
        raise ConfigError("threads", f"must be >= 1, got {cfg.threads}")
    cfg.db = db or data.get("db", config.DATABASE_URL)
    return cfg


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(rows: List[dict]) -> str:
    columns = list(dict.fromkeys(key for row in rows for key in row))
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(c)) for c in columns])
    return buffer.getvalue()


def write_outputs(cfg: ExperimentConfig, outcome: Outcome, stamp: Optional[str] = None) -> Dict[str, str]:
    os.makedirs(cfg.out, exist_ok=True)
    stamp = stamp or datetime.now().strftime("%Y%m%dT%H%M%S")
    base = os.path.join(cfg.out, f"{cfg.kind}-{stamp}")
    document = {"config": cfg.echo(), "version": config.VERSION, "rows": outcome.rows,
                "summary": outcome.summary, "verdict": outcome.verdict}
    with open(base + ".csv", "w", newline="") as handle:
        handle.write(rows_to_csv(outcome.rows))
    with open(base + ".json", "w") as handle:
        handle.write(json.dumps(document, indent=2, sort_keys=True, default=_json_default) + "\n")
    return {"csv": base + ".csv", "json": base + ".json"}


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"cannot serialize {type(value).__name__}")


def _record(cfg: ExperimentConfig, outcome: Outcome) -> None:
    session_factory = connect(cfg.db)
    with session_factory() as session:
        rows = json.loads(json.dumps(outcome.rows, default=_json_default))
        ResultService(session).record_run(cfg.kind, cfg.seed, config.VERSION, cfg.echo(), rows,
                                          summary="\n".join(outcome.summary),
                                          status="ok" if outcome.verdict else "failed", threads=cfg.threads)


def run(cfg: ExperimentConfig) -> int:
    """Run one experiment, write its CSV and JSON, and return the exit status."""
    experiment = EXPERIMENTS[cfg.kind]
    logger.info(f"Running {cfg.kind} with seed {cfg.seed} on {cfg.threads} threads")
    try:
        outcome = experiment.runner(cfg)
    except (ConfigError, InvalidKernel) as exc:
        logger.error(f"Invalid {cfg.kind} configuration: {exc}")
        print(f"{cfg.kind}: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AvgSampError:
        logger.exception(f"{cfg.kind} failed")
        return EXIT_USAGE

    paths = write_outputs(cfg, outcome)
    for line in outcome.summary:
        print(line)
    logger.info(f"Wrote {paths['csv']} and {paths['json']}")
    if cfg.db:
        _record(cfg, outcome)
    return EXIT_OK if outcome.verdict else EXIT_ASSERTION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="avgsamp", description="Average-sampling reconstruction experiments")
    sub = parser.add_subparsers(dest="kind", required=True)
    listing = sub.add_parser("list", help="show the experiment catalog")
    listing.add_argument("--json", action="store_true", help="machine-readable schema")
    for kind, experiment in EXPERIMENTS.items():
        command = sub.add_parser(kind, help=experiment.claim)
        command.add_argument("--config", help="JSON config file")
        command.add_argument("--seed", type=int)
        command.add_argument("--out")
        command.add_argument("--threads", type=int)
        command.add_argument("--db", help="SQLAlchemy URL of the run ledger")
        command.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", dest="overrides")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    config.setup_logging()
    args = build_parser().parse_args(argv)
    if args.kind == "list":
        print(list_experiments(args.json))
        return EXIT_OK
    try:
        cfg = load_config(args.kind, args.config, args.overrides, args.seed, args.out, args.threads, args.db)
    except ConfigError as exc:
        print(f"{args.kind}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return run(cfg)


if __name__ == '__main__':
    sys.exit(main())
