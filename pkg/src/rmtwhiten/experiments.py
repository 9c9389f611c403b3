"""Monte Carlo sweeps over the SNR ``1/sigma2`` and their CSV output.

Every replicate draws from its own generator, seeded from
``(seed, stream, snr index, replicate index)``, and results are aggregated in
grid order, so the output does not depend on the number of worker threads.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from . import gmm, spiked, tensor3
from .errors import (ConfigError, DegenerateMapError, DegenerateSpectrumError,
                     NumericalError, RmtWhitenError)
from .linalg import match_permutation, sub_seed
from .whitening import (corrected_from_spectrum, eigvec_alignment, empirical_spectrum,
                        residual_alignment, standard_from_spectrum, whitened_dots)

CSV_HEADER = ["snr", "sigma2", "quantity", "index_i", "index_j", "method",
              "empirical_mean", "empirical_std", "theoretical_value",
              "replicates_used", "failures"]
MODES = ("alignment", "estimation", "theory")
METHODS = ("standard", "corrected")

# seed streams
_MEANS, _DATA, _DECOMP = 0, 1, 2

_RECOVERABLE = (DegenerateMapError, DegenerateSpectrumError, NumericalError)


@dataclass(frozen=True)
class SnrGrid:
    min: float
    max: float
    points: int
    spacing: str = "log"

    def values(self) -> np.ndarray:
        if self.spacing == "log":
            return np.geomspace(self.min, self.max, self.points)
        return np.linspace(self.min, self.max, self.points)


@dataclass(frozen=True)
class ExperimentConfig:
    K: int
    P: int
    N: int
    weights: tuple
    mean_gram: tuple
    snr_grid: SnrGrid
    replicates: int = 1
    seed: int = 0
    mode: str = "alignment"
    methods: tuple = METHODS
    coefficient_variant: str = tensor3.DEFAULT_VARIANT
    output_path: str | None = None

    @property
    def c(self) -> float:
        return self.P / self.N

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        missing = {"K", "P", "N", "weights", "mean_gram", "snr_grid"} - set(raw)
        if missing:
            raise ConfigError(f"missing config fields: {sorted(missing)}")
        try:
            grid_raw = dict(raw["snr_grid"])
            grid = SnrGrid(float(grid_raw.pop("min")), float(grid_raw.pop("max")),
                           int(grid_raw.pop("points")), str(grid_raw.pop("spacing", "log")))
            if grid_raw:
                raise ConfigError(f"unknown snr_grid fields: {sorted(grid_raw)}")
            cfg = cls(
                K=int(raw["K"]), P=int(raw["P"]), N=int(raw["N"]),
                weights=tuple(float(w) for w in raw["weights"]),
                mean_gram=tuple(tuple(float(x) for x in row) for row in raw["mean_gram"]),
                snr_grid=grid,
                replicates=int(raw.get("replicates", 1)),
                seed=int(raw.get("seed", 0)),
                mode=str(raw.get("mode", "alignment")),
                methods=tuple(raw.get("methods", METHODS)),
                coefficient_variant=str(raw.get("coefficient_variant", tensor3.DEFAULT_VARIANT)),
                output_path=raw.get("output_path"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"malformed config: {exc}") from exc
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, path: str | os.PathLike) -> "ExperimentConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(raw)

    def validate(self):
        K = self.K
        if K < 1 or K > tensor3.MAX_K:
            raise ConfigError(f"K must be in 1..{tensor3.MAX_K}")
        if self.P < K or self.N <= K:
            raise ConfigError("need P >= K and N > K")
        if len(self.weights) != K:
            raise ConfigError("weights must have K entries")
        w = np.array(self.weights)
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ConfigError("weights must be positive and sum to 1")
        gram = np.array(self.mean_gram)
        if gram.shape != (K, K) or not np.allclose(gram, gram.T):
            raise ConfigError("mean_gram must be a symmetric K x K matrix")
        if np.linalg.eigvalsh(gram)[0] <= 0:
            raise ConfigError("mean_gram must be positive definite")
        g = self.snr_grid
        if g.min <= 0 or g.max < g.min:
            raise ConfigError("snr_grid needs 0 < min <= max")
        if g.points < 1 or (self.mode != "theory" and g.points < 2):
            raise ConfigError("snr_grid.points must be >= 2 for sweeps")
        if g.spacing not in ("log", "linear"):
            raise ConfigError("snr_grid.spacing must be 'log' or 'linear'")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if not self.methods or any(m not in METHODS for m in self.methods):
            raise ConfigError(f"methods must be a non-empty subset of {METHODS}")
        if self.coefficient_variant not in tensor3.VARIANTS:
            raise ConfigError(f"coefficient_variant must be one of {tensor3.VARIANTS}")

    def with_overrides(self, **kw) -> "ExperimentConfig":
        d = {**self.__dict__, **{k: v for k, v in kw.items() if v is not None}}
        cfg = ExperimentConfig(**d)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        d = asdict(self)
        d["weights"] = list(self.weights)
        d["mean_gram"] = [list(r) for r in self.mean_gram]
        d["methods"] = list(self.methods)
        return d


@dataclass
class SweepRecord:
    snr: float
    sigma2: float
    quantity: str
    index_i: int
    index_j: int
    method: str
    empirical_mean: float | None = None
    empirical_std: float | None = None
    theoretical_value: float | None = None
    replicates_used: int = 0
    failures: int = 0

    @property
    def deviation(self) -> float | None:
        if self.empirical_mean is None or self.theoretical_value is None:
            return None
        return abs(self.empirical_mean - self.theoretical_value)


@dataclass
class SweepResult:
    records: list
    config: ExperimentConfig
    failures: int = 0
    meta: dict = field(default_factory=dict)


# --- helpers ---------------------------------------------------------------

def _theory(x) -> float | None:
    x = float(x)
    return None if math.isnan(x) else x


def _params(cfg: ExperimentConfig, rep: int, sigma2: float) -> gmm.GmmParams:
    # mean geometry depends on the replicate only, so curves share it across SNRs
    means = gmm.means_from_gram(cfg.P, np.array(cfg.mean_gram), sub_seed(cfg.seed, _MEANS, rep))
    return gmm.GmmParams(np.array(cfg.weights), means, sigma2)


def _run_tasks(fn: Callable, tasks: list, threads: int) -> list:
    if threads <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks))


def _aggregate(samples: list, shape) -> tuple[np.ndarray, np.ndarray]:
    arr = np.array(samples, dtype=float).reshape((len(samples),) + shape)
    mean = arr.mean(axis=0)
    std = arr.std(axis=0, ddof=1) if len(samples) > 1 else np.zeros(shape)
    return mean, std


def _pairs(K: int, diagonal: bool) -> Iterable[tuple[int, int]]:
    for i in range(K):
        for j in range(i if diagonal else i + 1, K):
            yield i, j


# --- alignment ---------------------------------------------------------------

def _alignment_replicate(cfg: ExperimentConfig, task) -> dict:
    s_idx, rep, snr = task
    params = _params(cfg, rep, 1.0 / snr)
    X, _ = gmm.sample(params, cfg.N, sub_seed(cfg.seed, _DATA, s_idx, rep))
    spec = gmm.population_spectrum(params)
    sigma2_hat, eig = empirical_spectrum(X, cfg.K)
    out = {"zeta": eigvec_alignment(eig.vectors, spec.U)}
    builders = {"standard": standard_from_spectrum, "corrected": corrected_from_spectrum}
    for method in cfg.methods:
        try:
            wmap = builders[method](sigma2_hat, eig, cfg.c)
        except _RECOVERABLE:
            out[method] = None
            continue
        out[method] = {"rho": residual_alignment(wmap, params.means),
                       "dot": whitened_dots(wmap, params.means)}
    return out


def _theory_for(cfg: ExperimentConfig, sigma2: float):
    params = _params(cfg, 0, sigma2)
    spec = gmm.population_spectrum(params)
    infos = [spiked.spike_forward(float(l), sigma2, cfg.c) for l in spec.ell]
    std = spiked.predicted_alignment(spec, params.means, sigma2, cfg.c)
    cor = spiked.predicted_corrected_dots(spec, params.means, cfg.c)
    return spec, infos, {"standard": std, "corrected": cor}


def run_alignment_sweep(cfg: ExperimentConfig, threads: int = 1) -> SweepResult:
    snrs = cfg.snr_grid.values()
    tasks = [(s, r, float(snr)) for s, snr in enumerate(snrs) for r in range(cfg.replicates)]
    results = _run_tasks(lambda t: _alignment_replicate(cfg, t), tasks, threads)
    K = cfg.K
    records, total_fail = [], 0
    for s, snr in enumerate(snrs):
        sigma2 = 1.0 / snr
        block = results[s * cfg.replicates:(s + 1) * cfg.replicates]
        _, infos, theory = _theory_for(cfg, sigma2)
        for method in cfg.methods:
            ok = [b for b in block if b[method] is not None]
            fails = len(block) - len(ok)
            total_fail += fails
            base = dict(snr=float(snr), sigma2=sigma2, method=method,
                        replicates_used=len(ok), failures=fails)
            if not ok:
                mz = sz = np.full(K, math.nan)
                mr = sr = md = sd = ma = sa = np.full((K, K), math.nan)
            else:
                mz, sz = _aggregate([b["zeta"] for b in ok], (K,))
                mr, sr = _aggregate([b[method]["rho"] for b in ok], (K, K))
                md, sd = _aggregate([b[method]["dot"] for b in ok], (K, K))
                ma, sa = _aggregate([np.abs(b[method]["dot"]) for b in ok], (K, K))
            G, rho = theory[method]
            for k in range(K):
                records.append(SweepRecord(quantity="zeta", index_i=k, index_j=-1,
                                           empirical_mean=float(mz[k]), empirical_std=float(sz[k]),
                                           theoretical_value=infos[k].zeta, **base))
            for i, j in _pairs(K, diagonal=False):
                records.append(SweepRecord(quantity="rho", index_i=i, index_j=j,
                                           empirical_mean=float(mr[i, j]), empirical_std=float(sr[i, j]),
                                           theoretical_value=_theory(rho[i, j]), **base))
                records.append(SweepRecord(quantity="abs_dot", index_i=i, index_j=j,
                                           empirical_mean=float(ma[i, j]), empirical_std=float(sa[i, j]),
                                           theoretical_value=abs(float(G[i, j])), **base))
            for i, j in _pairs(K, diagonal=True):
                records.append(SweepRecord(quantity="dot", index_i=i, index_j=j,
                                           empirical_mean=float(md[i, j]), empirical_std=float(sd[i, j]),
                                           theoretical_value=float(G[i, j]), **base))
    return SweepResult(records, cfg, total_fail, _meta(cfg))


# --- estimation --------------------------------------------------------------

def _estimation_replicate(cfg: ExperimentConfig, task) -> dict:
    s_idx, rep, snr = task
    params = _params(cfg, rep, 1.0 / snr)
    X, _ = gmm.sample(params, 2 * cfg.N, sub_seed(cfg.seed, _DATA, s_idx, rep))
    targets = list(params.means.T)
    out = {}
    for method in cfg.methods:
        try:
            res = tensor3.learn_gmm(X, cfg.K, method == "corrected", cfg.coefficient_variant,
                                    seed=sub_seed(cfg.seed, _DECOMP, s_idx, rep))
        except _RECOVERABLE:
            out[method] = None
            continue
        _, errors = match_permutation(list(res.means.T), targets)
        out[method] = errors
    return out


def run_estimation_sweep(cfg: ExperimentConfig, threads: int = 1) -> SweepResult:
    snrs = cfg.snr_grid.values()
    tasks = [(s, r, float(snr)) for s, snr in enumerate(snrs) for r in range(cfg.replicates)]
    results = _run_tasks(lambda t: _estimation_replicate(cfg, t), tasks, threads)
    K = cfg.K
    records, total_fail = [], 0
    for s, snr in enumerate(snrs):
        block = results[s * cfg.replicates:(s + 1) * cfg.replicates]
        for method in cfg.methods:
            ok = [b[method] for b in block if b[method] is not None]
            fails = len(block) - len(ok)
            total_fail += fails
            base = dict(snr=float(snr), sigma2=1.0 / snr, method=method,
                        replicates_used=len(ok), failures=fails)
            if ok:
                me, se = _aggregate(ok, (K,))
                ma, sa = _aggregate([e.mean() for e in ok], ())
            else:
                me = se = np.full(K, math.nan)
                ma = sa = np.array(math.nan)
            for k in range(K):
                records.append(SweepRecord(quantity="sq_error", index_i=k, index_j=-1,
                                           empirical_mean=float(me[k]), empirical_std=float(se[k]), **base))
            records.append(SweepRecord(quantity="sq_error_avg", index_i=-1, index_j=-1,
                                       empirical_mean=float(ma), empirical_std=float(sa), **base))
    return SweepResult(records, cfg, total_fail, _meta(cfg))


# --- theory --------------------------------------------------------------------

def emit_theory(cfg: ExperimentConfig) -> SweepResult:
    records = []
    for snr in cfg.snr_grid.values():
        sigma2 = 1.0 / snr
        _, infos, theory = _theory_for(cfg, sigma2)
        G, rho = theory["standard"]
        base = dict(snr=float(snr), sigma2=sigma2, method="theory")
        for k, info in enumerate(infos):
            records.append(SweepRecord(quantity="zeta", index_i=k, index_j=-1,
                                       theoretical_value=info.zeta, **base))
            records.append(SweepRecord(quantity="lambda_tilde", index_i=k, index_j=-1,
                                       theoretical_value=info.lambda_tilde, **base))
        for i, j in _pairs(cfg.K, diagonal=False):
            records.append(SweepRecord(quantity="rho", index_i=i, index_j=j,
                                       theoretical_value=_theory(rho[i, j]), **base))
        for i, j in _pairs(cfg.K, diagonal=True):
            records.append(SweepRecord(quantity="dot", index_i=i, index_j=j,
                                       theoretical_value=float(G[i, j]), **base))
    for k, s_star in enumerate(critical_snrs(cfg)):
        records.append(SweepRecord(snr=float(s_star), sigma2=1.0 / s_star, quantity="critical_snr",
                                   index_i=k, index_j=-1, method="theory",
                                   theoretical_value=float(s_star)))
    return SweepResult(records, cfg, 0, _meta(cfg))


def critical_snrs(cfg: ExperimentConfig) -> np.ndarray:
    params = _params(cfg, 0, 1.0)
    return spiked.critical_snr(gmm.population_spectrum(params).gamma, cfg.c)


def _meta(cfg: ExperimentConfig) -> dict:
    return {
        "config": cfg.to_dict(),
        "coefficient_variant": cfg.coefficient_variant,
        "default_coefficient_variant": tensor3.DEFAULT_VARIANT,
        "aspect_ratio": cfg.c,
        "critical_snr": [float(s) for s in critical_snrs(cfg)],
    }


def run(cfg: ExperimentConfig, threads: int = 1) -> SweepResult:
    if cfg.mode == "theory":
        return emit_theory(cfg)
    if cfg.mode == "alignment":
        return run_alignment_sweep(cfg, threads)
    return run_estimation_sweep(cfg, threads)


# --- output --------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def records_to_csv(records: Iterable[SweepRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in records:
        writer.writerow([_fmt(getattr(r, name)) for name in CSV_HEADER])
    return buf.getvalue()


def write_csv(records: Iterable[SweepRecord], path: str | os.PathLike) -> None:
    Path(path).write_text(records_to_csv(records), encoding="utf-8", newline="")


def read_csv(path: str | os.PathLike) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))
