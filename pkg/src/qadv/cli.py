"""Command-line harness.

Subcommands: ``bound``, ``mi``, ``attack``, ``rademacher``, ``train``,
``experiment``.  Every subcommand accepts ``--config <path>`` (TOML) with
flag overrides; ``--seed`` is mandatory for the stochastic ones.  Exit codes:
0 success, 1 usage error, 2 validation error, 3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .attack import AttackSpec, adversarial_loss
from .bounds import BoundInputs, adv_bound_general, adv_bound_p1, adv_bound_pinf, banchi_bound, renyi2_mi
from .embed import DataSpec, Dataset, EmbeddingSpec, eigen_floor, embed_states, quantized_prior
from .errors import ConvergenceError, ValidationError
from .estimate import (
    DEFAULT_NUM_DATASETS,
    DEFAULT_NUM_SIGMA,
    DatasetSampler,
    rademacher_adversarial,
    rademacher_exact_binary,
)
from .experiment import ExperimentConfig, config_from_dict, load_config, run_experiment
from .io import complex_to_pairs, load_povm, load_state, povm_to_dict, write_json
from .train import TrainConfig, adversarial_train


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract here is exit 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _parse_p(raw: str) -> float:
    if raw.strip().lower() in ("inf", "infinity", "oo"):
        return math.inf
    value = float(raw)
    if value not in (1.0,):
        raise ValidationError(f"attack order must be 1 or inf, got {raw}")
    return value


def _emit(obj: dict, out: str | None) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _load_cfg(args) -> ExperimentConfig:
    if getattr(args, "config", None):
        return load_config(args.config)
    return config_from_dict({})


def _specs_from_cfg(cfg: ExperimentConfig) -> tuple[EmbeddingSpec, DataSpec]:
    return cfg.embedding, cfg.data


def _cmd_bound(args) -> int:
    cfg = _load_cfg(args)
    delta_floor = args.Delta
    if delta_floor is None:
        delta_floor = cfg.delta_floor if cfg.delta_floor is not None else 0.0
    inputs = BoundInputs(
        K=args.K if args.K is not None else cfg.data.num_classes,
        T=args.T,
        delta=args.delta if args.delta is not None else cfg.delta,
        d=args.d if args.d is not None else cfg.embedding.dim,
        Delta=delta_floor,
        I2=args.I2,
    )
    base_key = args.confidence_log_base or cfg.confidence_log_base
    report: dict = {"base": banchi_bound(inputs, base_key)}
    if args.epsilon is not None:
        p = _parse_p(args.p) if args.p else 1.0
        adv = adv_bound_p1(inputs, args.epsilon, base_key) if p == 1.0 else adv_bound_pinf(
            inputs, args.epsilon, base_key
        )
        general = adv_bound_general(inputs, args.epsilon, p, base_key)
        report.update(
            {
                "increment": adv.adversarial_increment,
                "total": adv.total,
                "valid": adv.valid,
                "validity_reason": adv.validity_reason,
                "general_increment": general.adversarial_increment,
                "general_total": general.total,
            }
        )
    _emit(report, args.out)
    return 0


def _cmd_mi(args) -> int:
    cfg = _load_cfg(args)
    embedding, data = _specs_from_cfg(cfg)
    if args.theta:
        parts = [float(v) for v in args.theta.split(",")]
        embedding = EmbeddingSpec(theta=tuple(parts), q=embedding.q, dim=embedding.dim)
    if args.q is not None:
        embedding = EmbeddingSpec(theta=embedding.theta, q=args.q, dim=embedding.dim)
    prior = quantized_prior(data)
    states = embed_states(embedding, prior.xs)
    i2 = renyi2_mi(prior.marginal, states)
    _emit(
        {
            "I2_bits": i2,
            "Delta_q_over_d": eigen_floor(embedding, data),
            "num_grid_points": int(prior.xs.shape[0]),
        },
        args.out,
    )
    return 0


def _cmd_attack(args) -> int:
    povm = load_povm(args.povm)
    state = load_state(args.state)
    spec = AttackSpec(p=_parse_p(args.p), epsilon=args.epsilon, solver=args.solver)
    result = adversarial_loss(povm, state, args.label, spec)
    _emit(
        {
            "loss": result.loss,
            "gain": result.gain,
            "solver_used": result.solver_used,
            "feasibility_slack": result.feasibility_slack,
            "converged": result.converged,
            "lambda_star": complex_to_pairs(result.lambda_star.mat),
        },
        args.out,
    )
    return 0 if result.converged else 3


def _cmd_rademacher(args) -> int:
    cfg = _load_cfg(args)
    embedding, data = _specs_from_cfg(cfg)
    sampler = DatasetSampler(embedding=embedding, data=data, T=args.T)
    rows = []
    if args.epsilon is not None and args.epsilon > 0:
        spec = AttackSpec(p=_parse_p(args.p), epsilon=args.epsilon)
        res = rademacher_adversarial(
            spec, sampler, args.num_datasets, args.seed, args.num_sigma
        )
        rows.append((res.estimate, args.epsilon, args.p))
        rows.append((res.clean, 0.0, ""))
    else:
        est = rademacher_exact_binary(sampler, args.num_datasets, args.seed, args.num_sigma)
        rows.append((est, 0.0, ""))
    def _write(stream):
        writer = csv.writer(stream)
        writer.writerow(["T", "mode", "value", "stderr", "num_sigma", "num_datasets", "epsilon", "p"])
        for est, eps, p in rows:
            writer.writerow([args.T, est.mode, repr(est.value), repr(est.stderr),
                             est.num_sigma, est.num_datasets, repr(float(eps)), p])

    if args.out:
        with open(args.out, "w", newline="") as fh:
            _write(fh)
    else:
        _write(sys.stdout)
    return 0


def _cmd_train(args) -> int:
    cfg = _load_cfg(args)
    embedding, _ = _specs_from_cfg(cfg)
    dataset = Dataset.load_csv(args.data)
    attack = AttackSpec(p=_parse_p(args.p), epsilon=args.epsilon)
    tc = TrainConfig(
        attack=attack,
        max_outer_iters=args.max_outer_iters,
        step_size=args.step_size,
        num_restarts=args.num_restarts,
        seed=args.seed,
        convergence_tol=args.convergence_tol,
    )
    result = adversarial_train(dataset, embedding, tc)
    write_json(args.out_povm, povm_to_dict(result.povm))
    with open(args.out_curve, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "adversarial_training_risk"])
        for it, risk in result.curve:
            writer.writerow([it, repr(risk)])
    return 0


def _cmd_experiment(args) -> int:
    overrides = {
        "seed": args.seed,
        "csv_path": args.csv,
        "json_path": args.json,
        "svg_path": args.svg,
        "out_dir": args.out_dir,
    }
    cfg = load_config(args.config, overrides)
    run_experiment(cfg)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qadv", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add_common(p):
        p.add_argument("--config", help="TOML config supplying defaults")
        p.add_argument("--out", help="write JSON/CSV here instead of stdout")

    p = sub.add_parser("bound", help="evaluate the closed-form bounds")
    add_common(p)
    p.add_argument("--I2", type=float, required=True, help="Renyi-2 mutual information (bits)")
    p.add_argument("--K", type=int)
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--delta", type=float)
    p.add_argument("--d", type=int)
    p.add_argument("--Delta", type=float, help="Assumption floor for validity checks")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--p", help="attack order: 1 or inf")
    p.add_argument("--confidence-log-base", choices=["e", "2"], dest="confidence_log_base")
    p.set_defaults(func=_cmd_bound)

    p = sub.add_parser("mi", help="Renyi-2 mutual information of the embedding ensemble")
    add_common(p)
    p.add_argument("--theta", help="comma-separated rotation angles")
    p.add_argument("--q", type=float, help="depolarization strength")
    p.set_defaults(func=_cmd_mi)

    p = sub.add_parser("attack", help="solve one worst-case perturbation")
    add_common(p)
    p.add_argument("--state", required=True, help="density matrix JSON ([re, im] pairs)")
    p.add_argument("--povm", required=True, help="POVM JSON")
    p.add_argument("--label", type=int, required=True)
    p.add_argument("--p", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--solver", default="auto",
                   choices=["auto", "closed_form", "numerical", "brute_force", "qubit_exact"])
    p.set_defaults(func=_cmd_attack)

    p = sub.add_parser("rademacher", help="estimate Rademacher complexities")
    add_common(p)
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--p", default="1")
    p.add_argument("--num-datasets", type=int, default=DEFAULT_NUM_DATASETS, dest="num_datasets")
    p.add_argument("--num-sigma", type=int, default=DEFAULT_NUM_SIGMA, dest="num_sigma")
    p.set_defaults(func=_cmd_rademacher)

    p = sub.add_parser("train", help="adversarially train a POVM")
    add_common(p)
    p.add_argument("--data", required=True, help="dataset CSV with header x,c")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--p", default="1")
    p.add_argument("--max-outer-iters", type=int, default=150, dest="max_outer_iters")
    p.add_argument("--step-size", type=float, default=0.1, dest="step_size")
    p.add_argument("--num-restarts", type=int, default=4, dest="num_restarts")
    p.add_argument("--convergence-tol", type=float, default=1e-6, dest="convergence_tol")
    p.add_argument("--out-povm", default="povm.json", dest="out_povm")
    p.add_argument("--out-curve", default="training_curve.csv", dest="out_curve")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("experiment", help="run the full reproduction harness")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, help="overrides [mc].seed")
    p.add_argument("--csv", help="override CSV output path")
    p.add_argument("--json", help="override JSON output path")
    p.add_argument("--svg", help="override SVG output path")
    p.add_argument("--out-dir", dest="out_dir", help="redirect all outputs into a directory")
    p.set_defaults(func=_cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"did not converge: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
