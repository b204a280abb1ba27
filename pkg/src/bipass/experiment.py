"""Batch experiment runner: config parsing, sweeps, presets, oracle checks.

Configs are flat ``key = value`` text with dotted section names, so any
language can read and write them. A run is a cartesian product of noise
sweep values and repeat indices; every row derives its own seed from the
master seed, goes into results.csv, and can be reproduced in isolation.
The summary table is computed from the written CSV, never from a second
in-memory path, so the two can not drift apart.
"""

from __future__ import annotations

import dataclasses
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, grad_check
from .bifilter import FilterParams, admm_bifilter, admm_one_step_closed_form, degenerate_filter
from .data import Dataset, load_dataset, sbm_generate, split_edges
from .graphs import Graph, normalized_laplacian
from .metrics import aggregate_runs
from .model import ModelConfig, build_learnable_L2, init_params, model_forward
from .noise import NoiseSpec
from .rng import derive_seed, stream
from .spectral import exact_smoother, solve_sylvester
from .training import TrainConfig, TrainingDiverged, train

TASKS = ("node_classification", "link_prediction")
ARCHS = ("bigcn", "gcn")


class ConfigError(ValueError):
    """Invalid experiment configuration (maps to exit code 2)."""


# -- flat config format --------------------------------------------------------

_INT = ("dataset.sbm.communities", "dataset.sbm.per_community", "dataset.sbm.d",
        "dataset.sbm.feature_blocks", "model.hidden", "model.embed", "model.k",
        "train.max_epochs", "train.patience", "train.eval_every", "runs", "seed")
_FLOAT = ("dataset.sbm.p_in", "dataset.sbm.p_out", "dataset.sbm.sigma",
          "dataset.sbm.mean_scale", "model.p", "model.lambda",
          "model.l1_reg_weight", "train.learning_rate", "train.weight_decay",
          "train.dropout")
_STR = ("task", "dataset.path", "model.arch", "model.l2_mode", "noise.case", "out")
_LIST = ("noise.sweep",)

KNOWN_KEYS = frozenset(_INT + _FLOAT + _STR + _LIST)


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; '#' starts a comment; errors carry line numbers."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (part.strip() for part in line.partition("="))
        if sep != "=" or not key or not value:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    return raw


def _coerce(key: str, value: str):
    try:
        if key in _INT:
            return int(value)
        if key in _FLOAT:
            return float(value)
        if key in _LIST:
            return tuple(float(part) for part in value.split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {value!r}") from None
    return value


@dataclass(frozen=True)
class SbmParams:
    communities: int = 4
    per_community: int = 100
    p_in: float = 0.03
    p_out: float = 0.012
    d: int = 32
    feature_blocks: int = 8
    sigma: float = 0.8
    mean_scale: float = 1.3


@dataclass(frozen=True)
class ExperimentConfig:
    task: str = "node_classification"
    dataset_path: str | None = None
    sbm: SbmParams | None = None
    arch: str = "bigcn"
    hidden: int = 16
    embed: int = 16
    p: float = 3.0
    lam: float = 1.8
    k: int = 2
    l2_mode: str = "learnable"
    l1_reg_weight: float = 1e-4
    train: TrainConfig = TrainConfig()
    noise_case: str | None = None
    sweep: tuple = ()
    runs: int = 10
    seed: int = 0
    out: str = "results"

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}")
        if self.arch not in ARCHS:
            raise ConfigError(f"model.arch must be one of {ARCHS}")
        if (self.dataset_path is None) == (self.sbm is None):
            raise ConfigError("exactly one of dataset.path and dataset.sbm.* is required")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if self.hidden < 1 or self.embed < 1:
            raise ConfigError("model.hidden and model.embed must be positive")
        if (self.noise_case is None) != (len(self.sweep) == 0):
            raise ConfigError("noise.case and noise.sweep must be given together")
        for value in self.sweep:
            # range validation is NoiseSpec's; surface violations as config errors
            try:
                NoiseSpec(self.noise_case, value, seed=0)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None

    @property
    def filter_params(self) -> FilterParams:
        lam_i = self.lam * (1.0 + self.p) / 2.0
        return FilterParams(lambda1=lam_i, lambda2=lam_i, p=self.p, k=self.k)


def config_from_flat(raw: dict) -> ExperimentConfig:
    """Build a validated ExperimentConfig from parsed key/value pairs."""
    values = {key: _coerce(key, value) for key, value in raw.items()}
    sbm_keys = {k: v for k, v in values.items() if k.startswith("dataset.sbm.")}
    sbm = None
    if sbm_keys:
        sbm = SbmParams(**{k.rsplit(".", 1)[1]: v for k, v in sbm_keys.items()})
    train_keys = {k.rsplit(".", 1)[1]: v for k, v in values.items() if k.startswith("train.")}
    if values.get("task") == "link_prediction":
        train_keys.setdefault("max_epochs", 100)
    train_keys.setdefault("patience", min(100, train_keys.get("max_epochs", 1000)))
    try:
        train_cfg = TrainConfig(**train_keys)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    kwargs = dict(
        task=values.get("task", "node_classification"),
        dataset_path=values.get("dataset.path"),
        sbm=sbm,
        arch=values.get("model.arch", "bigcn"),
        hidden=values.get("model.hidden", 16),
        embed=values.get("model.embed", 16),
        p=values.get("model.p", 3.0),
        lam=values.get("model.lambda", 1.8),
        k=values.get("model.k", 2),
        l2_mode=values.get("model.l2_mode", "learnable"),
        l1_reg_weight=values.get("model.l1_reg_weight", 1e-4),
        train=train_cfg,
        noise_case=values.get("noise.case"),
        sweep=values.get("noise.sweep", ()),
        runs=values.get("runs", 10),
        seed=values.get("seed", 0),
        out=values.get("out", "results"),
    )
    return ExperimentConfig(**kwargs)


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return config_from_flat(parse_config_text(text))


# -- experiment execution ------------------------------------------------------


def _row_dataset(config: ExperimentConfig, row_seed: int) -> Dataset:
    if config.dataset_path is not None:
        try:
            return load_dataset(config.dataset_path)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"dataset.path: {exc}") from None
    s = config.sbm
    return sbm_generate(s.communities, s.per_community, s.p_in, s.p_out, s.d,
                        s.feature_blocks, s.sigma,
                        seed=derive_seed(row_seed, "data"),
                        mean_scale=s.mean_scale)


def _execute_row(config: ExperimentConfig, sweep_value, row_seed: int) -> float:
    """Train one (sweep value, run) cell and return its test metric.

    The row seed is shared by every sweep value of the same run, so a
    sweep varies only the injected noise on one fixed dataset; dataset,
    noise, split and training streams are derived sub-seeds.
    """
    ds = _row_dataset(config, row_seed)
    if sweep_value is not None:
        spec = NoiseSpec(config.noise_case, sweep_value, derive_seed(row_seed, "noise"))
        features, graph = spec.apply(ds.features, ds.graph)
        ds = Dataset(graph, features, ds.labels, ds.masks, ds.num_classes)
    out_dim = ds.num_classes if config.task == "node_classification" else config.embed
    model = ModelConfig((ds.d, config.hidden, out_dim), config.filter_params,
                        l2_mode=config.l2_mode, l1_reg_weight=config.l1_reg_weight)
    tc = dataclasses.replace(config.train, seed=derive_seed(row_seed, "train"))
    split = None
    if config.task == "link_prediction":
        split = split_edges(ds.graph, seed=derive_seed(row_seed, "split"))
    result = train(model, ds, tc, split=split, baseline=(config.arch == "gcn"))
    return result.test_metric


def _format_sweep(sweep_value) -> str:
    return "none" if sweep_value is None else f"{sweep_value:g}"


def _worker_count() -> int:
    raw = os.environ.get("BIFILTER_THREADS", "1")
    try:
        count = int(raw)
    except ValueError:
        raise ConfigError(f"BIFILTER_THREADS must be an integer, got {raw!r}") from None
    return max(1, count)


def write_results_csv(path, rows) -> None:
    lines = ["sweep_value,run,seed,metric"]
    for sweep_value, run, seed, metric in rows:
        lines.append(f"{_format_sweep(sweep_value)},{run},{seed},{metric:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


def summarize_csv(csv_path) -> str:
    """Aggregate the written CSV into a markdown table.

    Reads the rows back from disk so the summary can only ever reflect
    what results.csv actually says.
    """
    lines = Path(csv_path).read_text().splitlines()
    groups: dict = {}
    for line in lines[1:]:
        sweep_value, _, _, metric = line.split(",")
        groups.setdefault(sweep_value, []).append(float(metric))
    out = ["# Experiment summary", "", "| sweep value | test metric | runs |",
           "| --- | --- | --- |"]
    for sweep_value, metrics in groups.items():
        report = aggregate_runs(metrics, name="test metric")
        out.append(f"| {sweep_value} | {report.mean:.4f} +/- {report.std:.4f} | {report.runs} |")
    return "\n".join(out) + "\n"


def run_experiment(config: ExperimentConfig) -> dict:
    """Run the sweep-by-runs grid; write results.csv and summary.md.

    Rows execute in a worker pool capped by BIFILTER_THREADS (default 1)
    and are collected in deterministic (sweep, run) order. On divergence
    the rows finished before the failing cell are still written out, then
    the error propagates.
    """
    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    sweep_values = list(config.sweep) if config.sweep else [None]
    jobs = [(sv, run) for sv in sweep_values for run in range(config.runs)]
    seeds = {(sv, run): derive_seed(config.seed, "run", run) for sv, run in jobs}
    csv_path = out_dir / "results.csv"
    summary_path = out_dir / "summary.md"
    rows = []
    with ThreadPoolExecutor(max_workers=_worker_count()) as pool:
        futures = [(sv, run, pool.submit(_execute_row, config, sv, seeds[(sv, run)]))
                   for sv, run in jobs]
        try:
            for sv, run, future in futures:
                rows.append((sv, run, seeds[(sv, run)], future.result()))
        except TrainingDiverged:
            write_results_csv(csv_path, rows)
            summary_path.write_text(summarize_csv(csv_path))
            raise
    write_results_csv(csv_path, rows)
    summary_path.write_text(summarize_csv(csv_path))
    return {"results": csv_path, "summary": summary_path, "rows": rows}


# -- presets -------------------------------------------------------------------

PRESETS = {
    "citation-noise": {
        "model.p": "3", "model.lambda": "1.8", "model.hidden": "16", "model.k": "2",
    },
    "amz-comp-noise": {
        "model.p": "2.5", "model.lambda": "1", "model.hidden": "16", "model.k": "2",
    },
    "amz-photos-noise": {
        "model.p": "1.5", "model.lambda": "0.8", "model.hidden": "16", "model.k": "2",
    },
    "cora-structure": {
        "model.p": "0.1", "model.lambda": "0.8", "model.hidden": "16", "model.k": "2",
        "noise.case": "structure_mistakes",
    },
    "pubmed-structure": {
        "model.p": "0.1", "model.lambda": "0.8", "model.hidden": "16", "model.k": "2",
        "noise.case": "structure_mistakes",
    },
    "citeseer-structure": {
        "model.p": "0.05", "model.lambda": "0.8", "model.hidden": "16", "model.k": "2",
        "noise.case": "structure_mistakes",
    },
    "co-purchase-structure": {
        "model.p": "0.1", "model.lambda": "1", "model.hidden": "16", "model.k": "2",
        "noise.case": "structure_mistakes",
    },
    "linkpred": {
        "task": "link_prediction", "model.p": "8.5", "model.lambda": "1.2",
        "model.hidden": "32", "model.k": "2",
        "train.max_epochs": "100", "train.eval_every": "10",
    },
    "sbm-desk": {
        "task": "node_classification",
        "dataset.sbm.communities": "4", "dataset.sbm.per_community": "100",
        "dataset.sbm.p_in": "0.03", "dataset.sbm.p_out": "0.012",
        "dataset.sbm.d": "32", "dataset.sbm.feature_blocks": "8",
        "dataset.sbm.sigma": "0.8", "dataset.sbm.mean_scale": "1.3",
        "model.p": "3", "model.lambda": "0.5", "model.hidden": "16", "model.k": "2",
        "model.l2_mode": "learnable", "model.l1_reg_weight": "0.01",
        "train.max_epochs": "400", "train.patience": "100",
        "runs": "10",
    },
}

PRESET_NOTES = {
    "citation-noise": "feature-noise sweeps on citation graphs",
    "amz-comp-noise": "feature-noise sweeps on the computers co-purchase graph",
    "amz-photos-noise": "feature-noise sweeps on the photos co-purchase graph",
    "cora-structure": "edge-flip sweeps; the low p=0.1 setting is applied across"
                      " structural error ratios, not noise levels (the source"
                      " wording is ambiguous between the two cases)",
    "pubmed-structure": "edge-flip sweeps; same low-p reading as cora-structure",
    "citeseer-structure": "edge-flip sweeps; same low-p reading as cora-structure",
    "co-purchase-structure": "edge-flip sweeps; same low-p reading as cora-structure",
    "linkpred": "link prediction on any dataset; fixed across benchmarks",
    "sbm-desk": "synthetic 400-node benchmark with planted feature blocks",
}


def preset(name: str) -> dict:
    """Named hyperparameter fragment, pasteable into a config file."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; known: {', '.join(sorted(PRESETS))}")
    return dict(PRESETS[name])


# -- oracle checks -------------------------------------------------------------


@dataclass(frozen=True)
class OracleResult:
    name: str
    residual: float
    tol: float

    @property
    def ok(self) -> bool:
        return self.residual < self.tol


def _random_instance(gen, n, d):
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if gen.random() < 0.5]
    if not edges:
        edges = [(0, 1)]
    g1 = Graph.from_edges(n, edges)
    edges2 = [(i, j) for i in range(d) for j in range(i + 1, d) if gen.random() < 0.5]
    if not edges2:
        edges2 = [(0, 1)]
    g2 = Graph.from_edges(d, edges2)
    L1 = normalized_laplacian(g1)
    L2 = normalized_laplacian(g2).toarray()
    F = gen.standard_normal((n, d))
    return L1, L2, F


def _check_sylvester_equivalence() -> OracleResult:
    """Exact-variant ADMM fixpoint against the Kronecker brute-force solve."""
    gen = stream(2024, "oracle", "sylvester")
    worst = 0.0
    for p in (1.0, 3.0):
        for lam in (0.5, 1.0):
            L1, L2, F = _random_instance(gen, 6, 4)
            params = FilterParams(lambda1=lam, lambda2=lam, p=p, k=400, variant="exact")
            y, _ = admm_bifilter(F, L1, L2, params)
            ref = solve_sylvester(L1, L2, lam, lam, F)
            worst = max(worst, np.linalg.norm(y - ref) / np.linalg.norm(ref))
    return OracleResult("sylvester-equivalence", worst, 1e-6)


def _check_one_step_closed_form() -> OracleResult:
    """Taylor k=1 recursion against the independently derived closed form."""
    gen = stream(2024, "oracle", "one-step")
    worst = 0.0
    for _ in range(10):
        L1, L2, F = _random_instance(gen, 6, 4)
        params = FilterParams(lambda1=0.4, lambda2=0.3, p=2.0, k=1)
        y, _ = admm_bifilter(F, L1, L2, params)
        cf1, cf2 = admm_one_step_closed_form(F, L1, L2, params)
        worst = max(worst, float(np.max(np.abs(y - (cf1 + cf2) / 2.0))))
    return OracleResult("one-step-closed-form", worst, 1e-12)


def _check_degeneration_identity() -> OracleResult:
    """L2 = I collapses the two-sided solve to a single-direction smoother."""
    gen = stream(2024, "oracle", "degeneration")
    worst = 0.0
    for _ in range(5):
        L1, _, F = _random_instance(gen, 6, 4)
        lam1, lam2 = 0.9, 0.7
        y = degenerate_filter(F, L1, lam1, lam2)
        ref = solve_sylvester(L1, np.eye(4), lam1, lam2, F)
        worst = max(worst, float(np.max(np.abs(y - ref))))
    return OracleResult("degeneration-identity", worst, 1e-10)


def _check_low_pass() -> OracleResult:
    """Rayleigh quotient of the exact smoother never exceeds the input's."""
    gen = stream(2024, "oracle", "lowpass")
    worst = -np.inf
    for _ in range(30):
        L1, _, _ = _random_instance(gen, 8, 4)
        x = gen.standard_normal((8, 1))
        y = exact_smoother(L1, 1.5, x)
        L = L1.toarray()

        def rayleigh(v):
            v = v.ravel()
            return float(v @ L @ v) / float(v @ v)

        worst = max(worst, rayleigh(y) - rayleigh(x))
    return OracleResult("low-pass-rayleigh", worst, 1e-12)


def _check_autodiff_primitives() -> OracleResult:
    """Finite-difference checks for a representative primitive battery."""
    gen = stream(2024, "oracle", "autodiff")
    worst = 0.0
    a = gen.standard_normal((4, 3))
    b = gen.standard_normal((3, 4))

    def matmul_loss(tape, x, y):
        return ad.total_sum(ad.matmul(x, y))

    def sigmoid_loss(tape, x):
        return ad.total_sum(ad.sigmoid(x))

    def softmax_loss(tape, x):
        return ad.total_sum(ad.mul(ad.row_softmax(x), tape.constant(np.arange(12.0).reshape(4, 3))))

    def sym_loss(tape, x):
        return ad.total_sum(ad.sym_normalize(x))

    worst = max(worst, grad_check(matmul_loss, [a, b]))
    worst = max(worst, grad_check(sigmoid_loss, [a]))
    worst = max(worst, grad_check(softmax_loss, [a]))
    pos = np.abs(gen.standard_normal((4, 4))) + 0.5
    np.fill_diagonal(pos, 0.0)
    worst = max(worst, grad_check(sym_loss, [pos]))
    return OracleResult("autodiff-primitives", worst, 1e-6)


def _check_model_gradient() -> OracleResult:
    """Full two-layer filtered-model loss against finite differences."""
    gen = stream(2024, "oracle", "model")
    g = Graph.from_edges(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5)])
    L1 = normalized_laplacian(g)
    X = gen.standard_normal((6, 4))
    labels = np.array([0, 1, 0, 1, 0, 1])
    config = ModelConfig((4, 3, 2), FilterParams(lambda1=0.5, lambda2=0.5, p=2.0, k=2),
                         l2_mode="learnable", dropout=0.0)
    params = init_params(config, seed=1)
    params[0]["U"] = 0.3 * gen.standard_normal((4, 4))
    params[1]["U"] = 0.3 * gen.standard_normal((3, 3))

    def loss(tape, *flat):
        wrapped = [{"W": flat[0], "U": flat[1]}, {"W": flat[2], "U": flat[3]}]
        out, _ = model_forward(tape, X, L1, wrapped, config, mode="eval")
        return ad.cross_entropy_logits(out, labels)

    flat = [params[0]["W"], params[0]["U"], params[1]["W"], params[1]["U"]]
    return OracleResult("model-gradient", grad_check(loss, flat), 1e-4)


def _check_learnable_l2_values() -> OracleResult:
    """Hand-derived value: U = 0 at d = 3 gives off-diagonals of -0.5."""
    tape = Tape()
    U = tape.variable(np.zeros((3, 3)))
    L2 = build_learnable_L2(U)
    expected = np.array([[1.0, -0.5, -0.5], [-0.5, 1.0, -0.5], [-0.5, -0.5, 1.0]])
    return OracleResult("learnable-l2-hand-value", float(np.max(np.abs(L2.value - expected))), 1e-12)


ORACLE_FAMILIES = (
    _check_sylvester_equivalence,
    _check_one_step_closed_form,
    _check_degeneration_identity,
    _check_low_pass,
    _check_autodiff_primitives,
    _check_model_gradient,
    _check_learnable_l2_values,
)


def oracle_check(emit=print) -> list:
    """Run every registered oracle family; report one line per check."""
    results = []
    for family in ORACLE_FAMILIES:
        result = family()
        results.append(result)
        status = "PASS" if result.ok else "FAIL"
        emit(f"{status} {result.name}: residual {result.residual:.3e} (tol {result.tol:g})")
    return results
