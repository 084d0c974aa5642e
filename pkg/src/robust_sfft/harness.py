"""Experiment runner: validated configs, seeded trials, CSV and JSON reports.

Every trial derives its own generators from (seed, role, trial), so a run is a
pure function of its config. Files carry no timing data and are written with
fixed formatting, which makes repeated runs byte-identical.
"""

from __future__ import annotations

import copy
import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .boolean_sfft import BooleanSfftConfig, boolean_sfft
from .granular import (
    GranularConfig,
    anticoncentration_probe,
    counterexample_signal,
    counterexample_threshold,
    granular_amplitudes,
    granular_decode,
)
from .lab import (
    FamilySampler,
    ell1_deviation,
    ell2_deviation,
    family_f_membership,
    isolation_rate,
    pilot_sample_size,
)
from .lowdeg import LowDegConfig, MonomialBasis, recover_low_degree
from .oracles import NoiseParams, NoisyOracle
from .rng import derive_rng
from .spectral import BooleanSpectrum, TorusSpectrum
from .torus_sfft import TorusSfftConfig, torus_sfft

log = logging.getLogger(__name__)

ALGORITHMS = (
    "boolean-recover",
    "torus-recover",
    "lowdeg-recover",
    "granular-recover",
    "concentration-check",
    "anticoncentration",
)

NOISE_DEFAULTS = {
    "rho": 0.0,
    "epsilon": 0.0,
    "model": "random",
    "inlier_strategy": "uniform",
    "outlier_strategy": "large-constant",
}

# committed constants; the acceptance suite runs with these
PARAM_DEFAULTS = {
    "boolean-recover": {
        "n": 10, "k": 4, "eta": 1.0, "delta": 0.2, "ell": 7,
        "sample_constant": 0.04, "refit_constant": 0.1, "max_sweep": 20,
        "prune": 0.5, "lp_method": "highs", "coeff_tolerance": None,
    },
    "torus-recover": {
        "F": 1024, "k": 3, "eta": 1.0, "delta": 0.25, "prime_floor": None,
        "prime_pool_size": 10, "sample_constant": 0.03, "refit_constant": 2.0,
        "max_sweep": 10, "prune": 0.5, "lp_method": "highs", "coeff_tolerance": None,
    },
    "lowdeg-recover": {
        "n": 8, "d": 1, "eta": 0.1, "delta": 0.01, "sample_constant": 0.05,
        "lp_method": "highs", "error_bound": None,
    },
    "granular-recover": {
        "F": 8, "k": 2, "eta": 0.5, "delta": 0.2, "sample_constant": 2.0,
        "separation_grid": 1024,
    },
    "concentration-check": {
        "claim": "ell1", "kind": "k-sparse", "domain": "boolean", "n": 10, "F": 64,
        "k": 4, "d": 1, "m": None, "ell": None, "threshold": None,
    },
    "anticoncentration": {"k": 10, "alpha": 0.5, "grid": 2**14},
}

RECOVERY_COLUMNS = [
    "trial", "success", "support_exact", "linf_error", "l2_error",
    "queries", "outliers", "min_separation", "status",
]
CONCENTRATION_COLUMNS = ["claim", "m", "trials", "p50", "p95", "max", "rate", "pass"]
ANTICONCENTRATION_COLUMNS = ["k", "alpha", "grid", "tau", "fraction", "pass"]

CONCENTRATION_THRESHOLDS = {"ell1": 0.25, "ell2": 0.25, "isolation": 0.99, "family": 1.0}


class ConfigError(ValueError):
    pass


def load_schema() -> dict:
    text = resources.files("robust_sfft").joinpath("experiment.schema.json").read_text()
    return json.loads(text)


def validate_config(raw: dict) -> None:
    import jsonschema

    try:
        jsonschema.validate(raw, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None


@dataclass
class ExperimentConfig:
    algorithm: str
    name: str = "experiment"
    trials: int = 1
    seed: int = 0
    workers: int = 1
    output_dir: str | None = None
    noise: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        """Validate against the schema and fill in defaults."""
        validate_config(raw)
        data = copy.deepcopy(raw)
        algorithm = data["algorithm"]
        params = dict(PARAM_DEFAULTS[algorithm])
        params.update(data.get("params", {}))
        noise = dict(NOISE_DEFAULTS)
        noise.update(data.get("noise", {}))
        return cls(
            algorithm=algorithm,
            name=data.get("name", algorithm),
            trials=data.get("trials", 1),
            seed=data.get("seed", 0),
            workers=data.get("workers", 1),
            output_dir=data.get("output_dir"),
            noise=noise,
            params=params,
            thresholds=data.get("thresholds", {}),
        )

    def to_dict(self) -> dict:
        return asdict(self)


def trial_seed(seed: int, role: str, trial: int) -> int:
    return int(derive_rng(seed, role, trial).integers(0, 2**31 - 1))


# -- ground truth ------------------------------------------------------------------


def truth_generator(domain: str, k: int | None = None, eta: float = 1.0, seed: int = 0,
                    n: int = 10, F: int = 64, d: int | None = None,
                    granular: bool = False):
    """Random ground truth with every coefficient magnitude in [eta, 2 eta].

    boolean: k distinct frequencies on {0,1}^n, random signs. torus: k
    distinct frequencies in [-F, F], random phases; granular mode snaps real
    and imaginary parts to eta * Z and redraws until sum |v|^2 <= 1.
    degree: every character of weight <= d on {0,1}^n, random signs.
    """
    rng = derive_rng(seed, "truth", domain)
    if domain == "boolean":
        if k is None or not 1 <= k <= 2**n:
            raise ValueError(f"k must lie in [1, 2^{n}]")
        freqs = rng.choice(2**n, size=k, replace=False)
        mags = rng.uniform(eta, 2 * eta, size=k) * rng.choice([-1.0, 1.0], size=k)
        return BooleanSpectrum(n, dict(zip(freqs.tolist(), mags)))
    if domain == "degree":
        basis = MonomialBasis(n, 0 if d is None else d)
        mags = rng.uniform(eta, 2 * eta, size=len(basis)) * rng.choice([-1.0, 1.0], size=len(basis))
        return basis.spectrum(mags)
    if domain != "torus":
        raise ValueError(f"unknown domain {domain!r}")
    if k is None or not 1 <= k <= 2 * F + 1:
        raise ValueError(f"k must lie in [1, {2 * F + 1}]")
    freqs = rng.choice(np.arange(-F, F + 1), size=k, replace=False)
    if not granular:
        mags = rng.uniform(eta, 2 * eta, size=k)
        phases = np.exp(2j * np.pi * rng.random(k))
        return TorusSpectrum(F, dict(zip(freqs.tolist(), mags * phases)))
    if not granular_amplitudes(eta):
        raise ValueError(f"no granular amplitude fits the unit ball at eta={eta}")
    for _ in range(10_000):
        raw = rng.uniform(eta, 2 * eta, size=k) * np.exp(2j * np.pi * rng.random(k))
        snapped = eta * (np.round(raw.real / eta) + 1j * np.round(raw.imag / eta))
        if np.all(snapped != 0) and np.sum(np.abs(snapped) ** 2) <= 1 + 1e-12:
            return TorusSpectrum(F, dict(zip(freqs.tolist(), snapped)))
    raise ValueError(f"could not draw {k} granular amplitudes within the unit ball")


# -- per-trial reports ---------------------------------------------------------------


@dataclass
class RecoveryReport:
    trial: int
    success: bool
    support_exact: bool
    linf_error: float | None
    l2_error: float | None
    queries: int
    outliers: int
    min_separation: float | None = None
    status: str = "ok"
    error: str | None = None
    runtime: float = 0.0
    extra: dict = field(default_factory=dict)

    def row(self) -> dict:
        return {c: getattr(self, c) for c in RECOVERY_COLUMNS}


def _errors(truth, found) -> tuple[float, float]:
    keys = set(truth.support) | set(found.support)
    diffs = np.array([abs(truth[x] - found[x]) for x in keys]) if keys else np.zeros(1)
    return float(diffs.max()), float(np.linalg.norm(diffs))


def _noise(cfg: ExperimentConfig, trial: int) -> NoiseParams:
    return NoiseParams(seed=trial_seed(cfg.seed, "noise", trial), **cfg.noise)


def _run_boolean(cfg, trial):
    p = cfg.params
    truth = truth_generator("boolean", p["k"], p["eta"], trial_seed(cfg.seed, "truth", trial), n=p["n"])
    oracle = NoisyOracle(truth, _noise(cfg, trial))
    alg = BooleanSfftConfig(
        k=p["k"], delta=p["delta"], eta=p["eta"], ell=p["ell"],
        sample_constant=p["sample_constant"], refit_constant=p["refit_constant"],
        max_sweep=p["max_sweep"], prune=p["prune"], lp_method=p["lp_method"],
        seed=trial_seed(cfg.seed, "algorithm", trial),
    )
    found = boolean_sfft(oracle, p["n"], alg).spectrum
    tol = p["coeff_tolerance"] if p["coeff_tolerance"] is not None else p["eta"] / 3
    return truth, found, oracle, tol, {}


def _run_torus(cfg, trial):
    p = cfg.params
    truth = truth_generator("torus", p["k"], p["eta"], trial_seed(cfg.seed, "truth", trial), F=p["F"])
    oracle = NoisyOracle(truth, _noise(cfg, trial))
    alg = TorusSfftConfig(
        F=p["F"], k=p["k"], delta=p["delta"], eta=p["eta"], prime_floor=p["prime_floor"],
        prime_pool_size=p["prime_pool_size"], sample_constant=p["sample_constant"],
        refit_constant=p["refit_constant"], max_sweep=p["max_sweep"], prune=p["prune"],
        lp_method=p["lp_method"], seed=trial_seed(cfg.seed, "algorithm", trial),
    )
    res = torus_sfft(oracle, alg)
    B = res.diagnostics["B"]
    extra = {"B": B, "hash_min_gap": res.diagnostics["hash_min_gap"],
             "separation_target": res.diagnostics["separation_target"]}
    return truth, res.spectrum, oracle, p["coeff_tolerance"], extra


def _run_lowdeg(cfg, trial):
    p = cfg.params
    truth = truth_generator("degree", eta=p["eta"], seed=trial_seed(cfg.seed, "truth", trial),
                            n=p["n"], d=p["d"])
    oracle = NoisyOracle(truth, _noise(cfg, trial))
    alg = LowDegConfig(n=p["n"], d=p["d"], delta=p["delta"], epsilon=cfg.noise["epsilon"],
                       sample_constant=p["sample_constant"], lp_method=p["lp_method"],
                       seed=trial_seed(cfg.seed, "algorithm", trial))
    found = recover_low_degree(oracle, alg).spectrum
    bound = p["error_bound"]
    if bound is None:
        bound = max(10 * cfg.noise["epsilon"] / p["delta"], 1e-8)
    return truth, found, oracle, bound, {}


def _run_granular(cfg, trial):
    p = cfg.params
    truth = truth_generator("torus", p["k"], p["eta"], trial_seed(cfg.seed, "truth", trial),
                            F=p["F"], granular=True)
    oracle = NoisyOracle(truth, _noise(cfg, trial))
    eps = cfg.noise["epsilon"] if cfg.noise["epsilon"] > 0 else 1e-4
    alg = GranularConfig(F=p["F"], k=p["k"], eta=p["eta"], delta=p["delta"], epsilon=eps,
                         sample_constant=p["sample_constant"],
                         separation_grid=p["separation_grid"],
                         seed=trial_seed(cfg.seed, "algorithm", trial))
    res = granular_decode(oracle, alg)
    extra = {k: v for k, v in res.diagnostics.items() if k.startswith("separation")}
    return truth, res.spectrum, oracle, 1e-12, extra


RUNNERS = {
    "boolean-recover": _run_boolean,
    "torus-recover": _run_torus,
    "lowdeg-recover": _run_lowdeg,
    "granular-recover": _run_granular,
}


def run_trial(cfg: ExperimentConfig, trial: int) -> RecoveryReport:
    """One seeded trial. Failures inside the algorithm are recorded, not raised."""
    start = time.perf_counter()
    try:
        truth, found, oracle, tol, extra = RUNNERS[cfg.algorithm](cfg, trial)
    except Exception as exc:  # noqa: BLE001 - per-trial failures are data
        log.info("trial %d failed: %s", trial, exc)
        return RecoveryReport(trial, False, False, None, None, 0, 0, status="error",
                              error=f"{type(exc).__name__}: {exc}",
                              runtime=time.perf_counter() - start)
    linf, l2 = _errors(truth, found)
    exact = set(truth.support) == set(found.support)
    success = exact and (tol is None or linf <= tol)
    if cfg.algorithm == "lowdeg-recover":
        # every character of weight <= d is present; the bound is the criterion
        success = linf <= tol
    stats = oracle.stats
    return RecoveryReport(
        trial, bool(success), bool(exact), linf, l2, stats.query_count, stats.outlier_count,
        stats.min_separation, runtime=time.perf_counter() - start, extra=extra,
    )


# -- non-recovery checks -------------------------------------------------------------


def _concentration_rows(cfg: ExperimentConfig) -> tuple[list[dict], dict]:
    p = cfg.params
    claim = p["claim"]
    threshold = p["threshold"] if p["threshold"] is not None else CONCENTRATION_THRESHOLDS[claim]
    if claim == "isolation":
        rep = isolation_rate(p["domain"], p["k"], cfg.trials, cfg.seed, n=p["n"], ell=p["ell"], F=p["F"])
        row = {"claim": claim, "m": None, "trials": cfg.trials, "p50": None, "p95": None,
               "max": None, "rate": rep.rate, "pass": rep.rate >= threshold}
        return [row], {"rate": rep.rate, "passed": row["pass"]}
    sampler = FamilySampler(p["kind"], p["domain"], n=p["n"], F=p["F"], k=p["k"], d=p["d"], seed=cfg.seed)
    if claim == "family":
        members = [family_f_membership(sampler.member(t), p["k"]).member for t in range(cfg.trials)]
        rate = sum(members) / len(members)
        row = {"claim": claim, "m": None, "trials": cfg.trials, "p50": None, "p95": None,
               "max": None, "rate": rate, "pass": rate >= threshold}
        return [row], {"rate": rate, "passed": row["pass"]}
    m = p["m"] if p["m"] is not None else pilot_sample_size(p["k"], sampler.size)
    fn = ell1_deviation if claim == "ell1" else ell2_deviation
    rows, reports = [], []
    for size in (m, 2 * m):
        rep = fn(sampler, size, cfg.trials, cfg.seed)
        reports.append(rep)
        row = rep.row(threshold)
        row["rate"] = None
        rows.append(row)
    small, large = reports
    se = math.hypot(small.stderr, large.stderr)
    monotone = large.mean <= small.mean + 3 * se
    return rows, {"passed": bool(rows[0]["pass"] and monotone), "monotone": bool(monotone),
                  "mean_deviation": [small.mean, large.mean]}


def _anticoncentration_rows(cfg: ExperimentConfig) -> tuple[list[dict], dict]:
    p = cfg.params
    tau = counterexample_threshold(p["k"], p["alpha"])
    fraction = anticoncentration_probe(counterexample_signal(p["k"]), tau, p["grid"])
    row = {"k": p["k"], "alpha": p["alpha"], "grid": p["grid"], "tau": tau,
           "fraction": fraction, "pass": fraction >= p["alpha"]}
    return [row], {"passed": row["pass"]}


# -- output -----------------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    return str(value)


def to_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def jsonable(value):
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else str(v)
    return value


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    columns: list[str]
    rows: list[dict]
    summary: dict
    reports: list[RecoveryReport] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.summary.get("passed", True))

    def csv(self) -> str:
        return to_csv(self.rows, self.columns)

    def json(self) -> str:
        body = {"config": self.config.to_dict(), "summary": self.summary}
        if self.reports:
            body["trials"] = [
                {**r.row(), "error": r.error, "extra": r.extra} for r in self.reports
            ]
        else:
            body["rows"] = self.rows
        return json.dumps(jsonable(body), indent=2, sort_keys=True) + "\n"

    def write(self, directory: str | Path) -> tuple[Path, Path]:
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / f"{self.config.name}.csv"
        json_path = out / f"{self.config.name}.json"
        csv_path.write_text(self.csv())
        json_path.write_text(self.json())
        return csv_path, json_path


def _summarize(cfg: ExperimentConfig, reports: list[RecoveryReport]) -> dict:
    ok = [r for r in reports if r.status == "ok"]
    errs = np.array([r.linf_error for r in ok]) if ok else np.zeros(0)
    rate = sum(r.success for r in reports) / len(reports)
    summary = {
        "trials": len(reports),
        "successes": sum(r.success for r in reports),
        "success_rate": rate,
        "support_exact": sum(r.support_exact for r in reports),
        "errors": len(reports) - len(ok),
        "linf_p50": float(np.percentile(errs, 50)) if errs.size else None,
        "linf_p95": float(np.percentile(errs, 95)) if errs.size else None,
        "linf_max": float(errs.max()) if errs.size else None,
        "mean_queries": float(np.mean([r.queries for r in reports])),
    }
    if "success_rate" in cfg.thresholds:
        summary["passed"] = rate >= cfg.thresholds["success_rate"]
    return summary


def _trial_job(args):
    cfg, trial = args
    return run_trial(cfg, trial)


def run_experiment(cfg: ExperimentConfig | dict, write: bool = True) -> ExperimentResult:
    """Run every trial, aggregate, and write ``<name>.csv`` / ``<name>.json``
    when the config names an output directory."""
    if isinstance(cfg, dict):
        cfg = ExperimentConfig.from_dict(cfg)
    if cfg.algorithm == "concentration-check":
        rows, summary = _concentration_rows(cfg)
        result = ExperimentResult(cfg, CONCENTRATION_COLUMNS, rows, summary)
    elif cfg.algorithm == "anticoncentration":
        rows, summary = _anticoncentration_rows(cfg)
        result = ExperimentResult(cfg, ANTICONCENTRATION_COLUMNS, rows, summary)
    else:
        jobs = [(cfg, t) for t in range(cfg.trials)]
        if cfg.workers > 1:
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                reports = list(pool.map(_trial_job, jobs))
        else:
            reports = [_trial_job(j) for j in jobs]
        reports.sort(key=lambda r: r.trial)
        result = ExperimentResult(cfg, RECOVERY_COLUMNS, [r.row() for r in reports],
                                  _summarize(cfg, reports), reports)
    if write and cfg.output_dir:
        result.write(cfg.output_dir)
    return result
