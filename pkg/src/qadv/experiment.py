"""Experiment orchestration: config parsing, the reproduction harness, and
result persistence (CSV + JSON + SVG).

For each training-set size T the harness Monte-Carlos the true clean and
adversarial generalization errors of the configured POVM (reported as the
mean of |population - empirical| over dataset draws, since the signed mean is
zero for a fixed POVM), estimates clean and adversarial Rademacher-based
uniform deviation bounds on the same draws, and evaluates the closed-form
bounds.  Identical config and seed give byte-identical CSV and JSON; wall
time goes to a separate .meta.json sidecar.
"""

from __future__ import annotations

import csv
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .attack import AttackSpec
from .bounds import BoundInputs, adv_bound_general, adv_bound_p1, adv_bound_pinf, banchi_bound, renyi2_mi
from .embed import DataSpec, EmbeddingSpec, bloch_vector, eigen_floor, embed_states, quantized_prior, sample_dataset
from .errors import ValidationError
from .estimate import (
    AdvSupOptions,
    DEFAULT_NUM_DATASETS,
    DEFAULT_NUM_SIGMA,
    empirical_risk,
    population_risk,
    sigma_sup_means,
    uniform_deviation_bound,
)
from .io import fmt_float, write_json
from .qmat import Povm, validate_povm
from .seeding import substream
from .svgplot import write_curves_svg
from .train import TrainConfig, adversarial_train

CSV_COLUMNS = [
    "T",
    "g_clean",
    "g_clean_stderr",
    "g_adv",
    "g_adv_stderr",
    "udb_clean",
    "udb_adv",
    "bound_banchi",
    "bound_adv",
    "bound_general",
    "I2",
    "Delta",
    "valid_regime",
]

_POVM_SOURCES = ("fixed_computational", "file", "trained")


@dataclass(frozen=True)
class MCConfig:
    num_datasets: int = DEFAULT_NUM_DATASETS
    num_sigma: int = DEFAULT_NUM_SIGMA
    seed: int | None = None


@dataclass(frozen=True)
class OutputPaths:
    csv_path: str = "experiment.csv"
    json_path: str = "experiment.json"
    svg_path: str = "experiment.svg"


@dataclass(frozen=True)
class ExperimentConfig:
    embedding: EmbeddingSpec = field(default_factory=EmbeddingSpec)
    data: DataSpec = field(default_factory=DataSpec)
    povm_source: str = "fixed_computational"
    povm_path: str | None = None
    train_size: int = 200  # only for povm_source = "trained"
    t_grid: tuple[int, ...] = (25, 50, 100, 200, 400, 800)
    train_attack: AttackSpec = field(default_factory=lambda: AttackSpec(p=1, epsilon=0.08))
    test_attack: AttackSpec | None = None  # defaults to train_attack
    delta: float = 0.8
    delta_floor: float | None = None  # Assumption-1 floor override; default q/d
    confidence_log_base: str = "e"
    mc: MCConfig = field(default_factory=MCConfig)
    outputs: OutputPaths = field(default_factory=OutputPaths)
    adv_opts: AdvSupOptions = field(default_factory=AdvSupOptions)

    def __post_init__(self):
        if self.povm_source not in _POVM_SOURCES:
            raise ValidationError(f"povm source must be one of {_POVM_SOURCES}")
        if list(self.t_grid) != sorted(set(self.t_grid)) or not self.t_grid:
            raise ValidationError("T_grid must be nonempty and strictly increasing")
        if not (0.0 < self.delta < 1.0):
            raise ValidationError("delta must lie in (0, 1)")

    def resolved_test_attack(self) -> AttackSpec:
        return self.test_attack if self.test_attack is not None else self.train_attack


def _parse_p(raw) -> float:
    if isinstance(raw, str):
        if raw.strip().lower() in ("inf", "infinity", "oo"):
            return math.inf
        return float(raw)
    return float(raw)


def _attack_from_table(table: dict) -> AttackSpec:
    return AttackSpec(
        p=_parse_p(table.get("p", 1)),
        epsilon=float(table.get("epsilon", 0.0)),
        solver=table.get("solver", "auto"),
    )


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    """Build an ExperimentConfig from a TOML file plus flat overrides."""
    p = Path(path)
    if not p.exists():
        raise ValidationError(f"config file not found: {p}")
    try:
        raw = tomllib.loads(p.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"invalid TOML in {p}: {exc}")
    return config_from_dict(raw, overrides)


def config_from_dict(raw: dict, overrides: dict | None = None) -> ExperimentConfig:
    emb = raw.get("embedding", {})
    dat = raw.get("data", {})
    pov = raw.get("povm", {})
    bnd = raw.get("bound", {})
    exp = raw.get("experiment", {})
    mc = raw.get("mc", {})
    out = raw.get("outputs", {})
    cfg = ExperimentConfig(
        embedding=EmbeddingSpec(
            theta=tuple(emb.get("theta", (math.pi / 4,) * 3)),
            q=float(emb.get("q", 0.05)),
            dim=int(emb.get("dim", 2)),
        ),
        data=DataSpec(
            num_classes=int(dat.get("num_classes", 2)),
            class_std=float(dat.get("class_std", 1.0)),
            quant_lo=float(dat.get("quant_lo", -6.0)),
            quant_hi=float(dat.get("quant_hi", 6.0)),
            quant_step=float(dat.get("quant_step", 0.01)),
        ),
        povm_source=pov.get("source", "fixed_computational"),
        povm_path=pov.get("path"),
        train_size=int(pov.get("train_size", 200)),
        t_grid=tuple(int(t) for t in exp.get("T_grid", (25, 50, 100, 200, 400, 800))),
        train_attack=_attack_from_table(raw.get("attack", {})),
        test_attack=_attack_from_table(raw["test_attack"]) if "test_attack" in raw else None,
        delta=float(bnd.get("delta", 0.8)),
        delta_floor=float(bnd["Delta"]) if "Delta" in bnd else None,
        confidence_log_base=str(bnd.get("confidence_log_base", "e")),
        mc=MCConfig(
            num_datasets=int(mc.get("num_datasets", DEFAULT_NUM_DATASETS)),
            num_sigma=int(mc.get("num_sigma", DEFAULT_NUM_SIGMA)),
            seed=int(mc["seed"]) if "seed" in mc else None,
        ),
        outputs=OutputPaths(
            csv_path=out.get("csv_path", "experiment.csv"),
            json_path=out.get("json_path", "experiment.json"),
            svg_path=out.get("svg_path", "experiment.svg"),
        ),
    )
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "seed":
            cfg = replace(cfg, mc=replace(cfg.mc, seed=int(value)))
        elif key in ("csv_path", "json_path", "svg_path"):
            cfg = replace(cfg, outputs=replace(cfg.outputs, **{key: value}))
        elif key == "out_dir":
            cfg = replace(
                cfg,
                outputs=OutputPaths(
                    csv_path=str(Path(value) / Path(cfg.outputs.csv_path).name),
                    json_path=str(Path(value) / Path(cfg.outputs.json_path).name),
                    svg_path=str(Path(value) / Path(cfg.outputs.svg_path).name),
                ),
            )
        else:
            cfg = replace(cfg, **{key: value})
    return cfg


def worker_count(num_tasks: int) -> int:
    cap = os.environ.get("QADV_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(limit, num_tasks))


def fixed_computational_povm(dim: int = 2, num_classes: int = 2) -> Povm:
    if num_classes != dim:
        raise ValidationError("the computational-basis POVM needs K = d")
    elements = []
    for c in range(num_classes):
        e = np.zeros((dim, dim), dtype=np.complex128)
        e[c, c] = 1.0
        elements.append(e)
    return validate_povm(elements)


def _resolve_povm(cfg: ExperimentConfig, seed: int) -> Povm:
    if cfg.povm_source == "fixed_computational":
        return fixed_computational_povm(cfg.embedding.dim, cfg.data.num_classes)
    if cfg.povm_source == "file":
        from .io import load_povm

        if not cfg.povm_path:
            raise ValidationError("povm source 'file' needs povm.path")
        return load_povm(cfg.povm_path)
    train_ds = sample_dataset(cfg.data, cfg.train_size, seed=0, rng=substream(seed, 999_983))
    result = adversarial_train(
        train_ds, cfg.embedding, TrainConfig(attack=cfg.train_attack, seed=seed)
    )
    return result.povm


@dataclass(frozen=True)
class ExperimentResult:
    rows: tuple[dict, ...]
    metadata: dict


def _evaluate_T(cfg: ExperimentConfig, povm: Povm, t_index: int, T: int, seed: int,
                shared: dict) -> dict:
    attack = cfg.resolved_test_attack()
    g_clean = np.zeros(cfg.mc.num_datasets)
    g_adv = np.zeros(cfg.mc.num_datasets)
    r_clean = np.zeros(cfg.mc.num_datasets)
    r_adv = np.zeros(cfg.mc.num_datasets)
    for i in range(cfg.mc.num_datasets):
        rng = substream(seed, t_index, i)
        ds = sample_dataset(cfg.data, T, seed=0, rng=rng)
        g_clean[i] = shared["pop_clean"] - empirical_risk(povm, ds, cfg.embedding)
        g_adv[i] = shared["pop_adv"] - empirical_risk(povm, ds, cfg.embedding, attack)
        blochs = bloch_vector(embed_states(cfg.embedding, ds.xs))
        r_clean[i], r_adv[i] = sigma_sup_means(
            blochs, ds.labels, rng, cfg.mc.num_sigma, attack, cfg.adv_opts
        )
    n = cfg.mc.num_datasets
    sem = lambda a: float(a.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    inputs = BoundInputs(
        K=cfg.data.num_classes, T=T, delta=cfg.delta, d=cfg.embedding.dim,
        Delta=shared["delta_eff"], I2=shared["i2"],
    )
    base = banchi_bound(inputs, cfg.confidence_log_base)
    if attack.p == 1.0:
        adv_report = adv_bound_p1(inputs, attack.epsilon, cfg.confidence_log_base)
    else:
        adv_report = adv_bound_pinf(inputs, attack.epsilon, cfg.confidence_log_base)
    general = adv_bound_general(inputs, attack.epsilon, attack.p, cfg.confidence_log_base)
    abs_clean = np.abs(g_clean)
    abs_adv = np.abs(g_adv)
    return {
        "T": T,
        "g_clean": float(abs_clean.mean()),
        "g_clean_stderr": sem(abs_clean),
        "g_adv": float(abs_adv.mean()),
        "g_adv_stderr": sem(abs_adv),
        "udb_clean": uniform_deviation_bound(float(r_clean.mean()), T, cfg.delta),
        "udb_adv": uniform_deviation_bound(float(r_adv.mean()), T, cfg.delta),
        "bound_banchi": base,
        "bound_adv": adv_report.total,
        "bound_general": general.total,
        "I2": shared["i2"],
        "Delta": shared["delta_eff"],
        "valid_regime": adv_report.valid,
    }


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run the harness and write CSV/JSON/SVG (plus a wall-time sidecar)."""
    if cfg.mc.seed is None:
        raise ValidationError("experiment needs a seed ([mc].seed or --seed)")
    started = time.time()
    out = cfg.outputs
    for path in (out.csv_path, out.json_path, out.svg_path):
        parent = Path(path).resolve().parent
        if not parent.exists():
            raise OSError(f"output directory does not exist: {parent}")
        if not os.access(parent, os.W_OK):
            raise OSError(f"output directory is not writable: {parent}")
    seed = int(cfg.mc.seed)
    povm = _resolve_povm(cfg, seed)
    prior = quantized_prior(cfg.data)
    grid_states = embed_states(cfg.embedding, prior.xs)
    i2 = renyi2_mi(prior.marginal, grid_states)
    floor_computed = eigen_floor(cfg.embedding, cfg.data)
    delta_eff = cfg.delta_floor if cfg.delta_floor is not None else floor_computed
    attack = cfg.resolved_test_attack()
    shared = {
        "i2": i2,
        "delta_eff": delta_eff,
        "pop_clean": population_risk(povm, cfg.embedding, cfg.data),
        "pop_adv": population_risk(povm, cfg.embedding, cfg.data, attack),
    }
    tasks = list(enumerate(cfg.t_grid))
    with ThreadPoolExecutor(max_workers=worker_count(len(tasks))) as pool:
        futures = {
            T: pool.submit(_evaluate_T, cfg, povm, ti, T, seed, shared) for ti, T in tasks
        }
        rows = tuple(futures[T].result() for T in cfg.t_grid)
    from . import __version__  # late import: this module is part of the package init

    metadata = {
        "version": __version__,
        "seed": seed,
        "config": config_to_dict(cfg),
        "I2_bits": i2,
        "Delta_computed_q_over_d": floor_computed,
        "Delta_effective": delta_eff,
        "population_risk_clean": shared["pop_clean"],
        "population_risk_adversarial": shared["pop_adv"],
        "gen_error_convention": "mean_absolute",
        "num_grid_points": int(prior.xs.shape[0]),
    }
    _write_outputs(cfg, rows, metadata)
    meta_path = Path(out.json_path).with_suffix(".meta.json")
    write_json(meta_path, {"wall_time_s": time.time() - started})
    return ExperimentResult(rows=rows, metadata=metadata)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    def attack_dict(a: AttackSpec | None):
        if a is None:
            return None
        return {"p": "inf" if math.isinf(a.p) else a.p, "epsilon": a.epsilon, "solver": a.solver}

    return {
        "embedding": {"theta": list(cfg.embedding.theta), "q": cfg.embedding.q, "dim": cfg.embedding.dim},
        "data": {
            "num_classes": cfg.data.num_classes,
            "class_std": cfg.data.class_std,
            "quant_lo": cfg.data.quant_lo,
            "quant_hi": cfg.data.quant_hi,
            "quant_step": cfg.data.quant_step,
        },
        "povm": {"source": cfg.povm_source, "path": cfg.povm_path},
        "attack": attack_dict(cfg.train_attack),
        "test_attack": attack_dict(cfg.resolved_test_attack()),
        "bound": {
            "delta": cfg.delta,
            "Delta_override": cfg.delta_floor,
            "confidence_log_base": cfg.confidence_log_base,
        },
        "experiment": {"T_grid": list(cfg.t_grid)},
        "mc": {
            "num_datasets": cfg.mc.num_datasets,
            "num_sigma": cfg.mc.num_sigma,
            "seed": cfg.mc.seed,
        },
        "outputs": {
            "csv_path": cfg.outputs.csv_path,
            "json_path": cfg.outputs.json_path,
            "svg_path": cfg.outputs.svg_path,
        },
    }


def _write_outputs(cfg: ExperimentConfig, rows, metadata: dict) -> None:
    out = cfg.outputs
    with open(out.csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_cell(row[c]) for c in CSV_COLUMNS])
    write_json(out.json_path, {"metadata": metadata, "rows": list(rows)})
    render_svg_from_rows(out.svg_path, rows)


def _cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return fmt_float(v)
    return v


def render_svg_from_rows(path, rows) -> None:
    """The SVG is a pure function of the CSV rows."""
    xs = [row["T"] for row in rows]
    bound_col = "bound_adv" if rows and rows[0]["valid_regime"] else "bound_general"
    series = [
        ("measured E|G| (clean)", [row["g_clean"] for row in rows]),
        ("measured E|G| (adversarial)", [row["g_adv"] for row in rows]),
        ("uniform deviation bound (clean)", [row["udb_clean"] for row in rows]),
        ("uniform deviation bound (adv)", [row["udb_adv"] for row in rows]),
        ("base bound", [row["bound_banchi"] for row in rows]),
        ("adversarial bound", [row[bound_col] for row in rows]),
    ]
    write_curves_svg(path, xs, series, title="generalization errors and bounds",
                     ylabel="error / bound")


def render_svg_from_csv(csv_path, svg_path) -> None:
    """Re-render the plot from a previously written CSV."""
    with open(csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for raw in reader:
            row = {k: (float(v) if k not in ("T", "valid_regime") else v) for k, v in raw.items()}
            row["T"] = int(raw["T"])
            row["valid_regime"] = raw["valid_regime"] == "true"
            rows.append(row)
    render_svg_from_rows(svg_path, rows)
