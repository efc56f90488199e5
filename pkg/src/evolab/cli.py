"""Command-line front end: one subcommand per experiment.

Every run resolves a flat key=value config (file < command line), executes
one experiment, and leaves a self-contained run directory: the resolved
config, a manifest with input checksums, the result CSVs, and SVG charts
rendered from the same data. Re-running from a manifest reproduces the
CSVs byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import landscape, mathx
from .data import Dataset, load_mnist_dir
from .errors import ConfigError, FormatError, InputError, NumericError
from .nn.model import ModelConfig, build_model, flatten, param_count
from .optim import (GoeaConfig, SgdConfig, TrainTrace, goea_fitness_builder,
                    goea_train, sgd_train)
from .svgplot import Series, histogram_series, line_plot

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

OUTPUT_ROOT_ENV = "EVOLAB_OUT"
MNIST_DIR_ENV = "MNIST_DIR"

# documented defaults for the hyperparameter abbreviation grammar
GRAMMAR_DEFAULTS = {
    "DO": 0.1, "DI": 0.1, "LM": 8, "LW": 24,
    "B": 32, "E": 10, "ED": 0.01, "POP": 20,
}
GRAMMAR_CONFIG_KEYS = {
    "DO": "dropout", "DI": "input_dropout", "LM": "latent_maps",
    "LW": "linear_width", "B": "batch_size", "E": "epochs",
    "ED": "edit_distance", "POP": "population",
}
_INT_PARAMS = {"LM", "LW", "B", "E", "POP"}


def parse_hyperparam_grammar(text: str) -> dict[str, float | int]:
    """Resolve an abbreviation string like "-DO; LWx2; B:4" to config values.

    Supported token forms, relative to the documented defaults:
    ``-P`` (set to 0), ``P:V`` (absolute), ``PxF`` (multiply), ``P/F``
    (divide), and the grouped form ``P1/P2:V1/V2``. Returns a mapping of
    config field names to values.
    """
    out: dict[str, float | int] = {}
    tokens = [t.strip() for chunk in text.split(";") for t in chunk.split(",")]
    tokens = [t for t in tokens if t]
    for pos, raw in enumerate(tokens, start=1):
        tok = raw.replace(" ", "")
        try:
            for param, value in _parse_token(tok):
                out[GRAMMAR_CONFIG_KEYS[param]] = value
        except ConfigError as exc:
            raise ConfigError(f"token {pos} {raw!r}: {exc}") from None
    return out


def _coerce(param: str, value: float) -> float | int:
    if param in _INT_PARAMS:
        if value != int(value):
            raise ConfigError(f"{param} must be an integer, got {value}")
        return int(value)
    return value


def _parse_token(tok: str) -> list[tuple[str, float | int]]:
    params = sorted(GRAMMAR_DEFAULTS, key=len, reverse=True)
    if tok.startswith("-"):
        name = tok[1:]
        if name not in GRAMMAR_DEFAULTS:
            raise ConfigError(f"unknown parameter {name!r}")
        return [(name, _coerce(name, 0))]
    if ":" in tok:
        lhs, rhs = tok.split(":", 1)
        names = lhs.split("/")
        values = rhs.split("/")
        if any(n not in GRAMMAR_DEFAULTS for n in names):
            bad = next(n for n in names if n not in GRAMMAR_DEFAULTS)
            raise ConfigError(f"unknown parameter {bad!r}")
        if len(names) != len(values):
            raise ConfigError(
                f"{len(names)} parameters but {len(values)} values"
            )
        try:
            parsed = [float(v) for v in values]
        except ValueError:
            raise ConfigError(f"non-numeric value in {tok!r}") from None
        return [(n, _coerce(n, v)) for n, v in zip(names, parsed)]
    for name in params:
        if tok.startswith(name) and len(tok) > len(name):
            op, factor_text = tok[len(name)], tok[len(name) + 1 :]
            if op not in ("x", "/"):
                raise ConfigError(f"bad modifier {op!r}; use one of x / : -")
            try:
                factor = float(factor_text)
            except ValueError:
                raise ConfigError(f"non-numeric factor {factor_text!r}") from None
            if op == "/" and factor == 0:
                raise ConfigError("division by zero")
            base = GRAMMAR_DEFAULTS[name]
            value = base * factor if op == "x" else base / factor
            return [(name, _coerce(name, value))]
    raise ConfigError("unrecognized token")


# --------------------------------------------------------------------------
# configuration plumbing

BASE_KEYS = {
    "seed": "1", "mnist_dir": "", "out_dir": "", "occluded": "",
    "latent_maps": "8", "linear_width": "24", "dropout": "0.1",
    "input_dropout": "0.1", "learning_rate": "0.002", "batch_size": "32",
    "epochs": "10", "include_timing": "0",
}

COMMAND_KEYS: dict[str, dict[str, str]] = {
    "train-sgd": {},
    "train-goea": {
        "edit_distance": "0.01", "population": "20", "generations": "100",
        "acceptance": "sequential", "fitness_subset_size": "2048",
        "target_accuracy": "",
    },
    "goea-sweep": {
        "eps_grid": "0.005,0.01,0.02", "pop_grid": "4,20,50",
        "generations": "50", "fitness_subset_size": "2048",
        "acceptance": "sequential",
    },
    "angles": {
        "train_epochs": "3", "batch_sizes": "4,16,64,256,1024",
        "pairs_per_size": "45",
    },
    "flatness": {
        "archetype": "", "hyperparams": "", "grid_points": "41",
        "sampling_replicas": "5", "full_replicas": "1", "subset_size": "2048",
    },
    "mutations": {
        "samples": "200", "scale": "1.0", "subset_size": "2048",
        "train_epochs": "10",
    },
    "valid-angles": {
        "n_samples": "100", "eps": "0.01", "subset_size": "2048",
        "train_epochs": "3",
    },
    "limit-equiv": {
        "n_list": "1,4,16,64,256", "trials": "20", "eps": "",
        "subset_size": "512", "train_epochs": "1",
    },
    "transfer": {
        "fine_tune_epochs": "5", "flatness_every_epoch": "0",
        "subset_size": "2048",
    },
    "robustness": {
        "fractions": "0.1,0.25,0.5", "repeats": "3", "train_epochs": "10",
        "subset_size": "2048", "archetype": "", "hyperparams": "",
    },
    "cap-sweep": {
        "alphas": "5,15,30,45,60,75,90", "dims": "2,3,10,100,9854",
    },
}

_NO_DATA_COMMANDS = {"cap-sweep"}


def resolve_config(
    command: str,
    file_pairs: dict[str, str],
    cli_pairs: dict[str, str],
) -> dict[str, str]:
    """Merge defaults < config file < command line; reject unknown keys."""
    known = dict(BASE_KEYS)
    known.update(COMMAND_KEYS[command])
    merged = dict(known)
    for source, pairs in (("config file", file_pairs), ("command line", cli_pairs)):
        for key, value in pairs.items():
            if key not in known:
                raise ConfigError(f"unknown key {key!r} ({source}) for {command}")
            merged[key] = value
    if merged.get("archetype"):
        try:
            mc, sc = landscape.archetype(merged["archetype"])
        except InputError as exc:
            raise ConfigError(str(exc)) from None
        merged.update({
            "latent_maps": str(mc.latent_maps), "linear_width": str(mc.linear_width),
            "dropout": repr(mc.dropout), "input_dropout": repr(mc.input_dropout),
            "batch_size": str(sc.batch_size),
        })
    if merged.get("hyperparams"):
        for field, value in parse_hyperparam_grammar(merged["hyperparams"]).items():
            if field in merged:
                merged[field] = repr(value)
    return merged


def parse_pairs(items: list[str]) -> dict[str, str]:
    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not KEY=VALUE")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def read_config_file(path: str | Path) -> dict[str, str]:
    out = {}
    for i, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{i}: expected KEY=VALUE, got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _occluded_set(text: str) -> frozenset[int]:
    text = text.strip()
    if not text:
        return frozenset()
    try:
        return frozenset(int(t) for t in text.split(",") if t.strip() != "")
    except ValueError:
        raise ConfigError(f"occluded must be comma-separated ints, got {text!r}")


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip() != ""]


def _float_list(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip() != ""]


def _model_config(cfg: dict[str, str]) -> ModelConfig:
    return ModelConfig(
        latent_maps=int(cfg["latent_maps"]),
        linear_width=int(cfg["linear_width"]),
        dropout=float(cfg["dropout"]),
        input_dropout=float(cfg["input_dropout"]),
    )


def _sgd_config(cfg: dict[str, str], epochs_key: str = "epochs") -> SgdConfig:
    return SgdConfig(
        learning_rate=float(cfg["learning_rate"]),
        batch_size=int(cfg["batch_size"]),
        epochs=int(cfg[epochs_key]),
    )


def _load_data(cfg: dict[str, str]) -> tuple[Dataset, Dataset]:
    root = cfg["mnist_dir"] or os.environ.get(MNIST_DIR_ENV, "")
    if not root:
        raise InputError(
            "no dataset directory: pass mnist_dir=... or set $" + MNIST_DIR_ENV
        )
    return load_mnist_dir(root)


def _eval_subset(data: Dataset, size: int, seed: int) -> Dataset:
    if size >= data.n:
        return data
    pick = np.random.default_rng((seed, 90)).choice(data.n, size, replace=False)
    return data.take(np.sort(pick))


# --------------------------------------------------------------------------
# run directory + manifest


class RunDir:
    def __init__(self, root: Path, tag: str):
        path = root / tag
        n = 1
        while path.exists():
            n += 1
            path = root / f"{tag}-{n}"
        path.mkdir(parents=True)
        self.path = path
        self.outputs: list[str] = []

    def csv_path(self, name: str) -> Path:
        self.outputs.append(name)
        return self.path / name

    def svg_path(self, name: str) -> Path:
        self.outputs.append(name)
        return self.path / name


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        return repr(v)
    return str(v)


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_run_metadata(
    run: RunDir, command: str, cfg: dict[str, str], elapsed: float
) -> None:
    lines = [f"{k}={cfg[k]}" for k in sorted(cfg)]
    (run.path / "config.txt").write_text("\n".join(lines) + "\n")
    checksums = {}
    root = cfg.get("mnist_dir") or os.environ.get(MNIST_DIR_ENV, "")
    if root and command not in _NO_DATA_COMMANDS:
        for p in sorted(Path(root).glob("*ubyte*")):
            checksums[p.name] = _sha256(p)
    manifest = {
        "experiment": command,
        "config": {k: cfg[k] for k in sorted(cfg)},
        "input_checksums": checksums,
        "outputs": sorted(run.outputs) + ["config.txt"],
        "elapsed_seconds": round(elapsed, 3),
    }
    (run.path / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


# --------------------------------------------------------------------------
# experiment implementations (one per subcommand)


def _trace_artifacts(run: RunDir, trace: TrainTrace, cfg: dict[str, str],
                     name: str) -> None:
    trace.to_csv(run.csv_path(f"{name}.csv"),
                 include_timing=cfg["include_timing"] == "1")
    steps = [r.step for r in trace.rows]
    losses = [r.loss for r in trace.rows]
    series = [Series("loss", steps, losses)]
    acc_pts = [(r.step, r.accuracy) for r in trace.rows if not math.isnan(r.accuracy)]
    if acc_pts:
        series.append(Series("accuracy", [p[0] for p in acc_pts],
                             [p[1] for p in acc_pts]))
    line_plot(run.svg_path(f"{name}.svg"), series,
              title=name, xlabel="step", ylabel="loss / accuracy")


def cmd_train_sgd(run: RunDir, cfg: dict[str, str]) -> None:
    train, test = _load_data(cfg)
    occ = _occluded_set(cfg["occluded"])
    seed = int(cfg["seed"])
    model = build_model(_model_config(cfg), seed)
    trained, trace = sgd_train(model, train, _sgd_config(cfg), occ,
                               rng=np.random.default_rng((seed, 1)),
                               eval_data=test)
    _trace_artifacts(run, trace, cfg, "sgd-trace")
    print(f"final test accuracy: {trace.final_accuracy():.4f}")


def _goea_config(cfg: dict[str, str], seed: int) -> GoeaConfig:
    subset = cfg["fitness_subset_size"]
    return GoeaConfig(
        edit_distance=float(cfg["edit_distance"]),
        population=int(cfg["population"]),
        generations=int(cfg["generations"]),
        master_seed=seed,
        acceptance=cfg["acceptance"],
        fitness_subset_size="full" if subset == "full" else int(subset),
    )


def cmd_train_goea(run: RunDir, cfg: dict[str, str]) -> None:
    train, _ = _load_data(cfg)
    occ = _occluded_set(cfg["occluded"])
    seed = int(cfg["seed"])
    mc = _model_config(cfg)
    gc = _goea_config(cfg, seed)
    fitness = goea_fitness_builder(train, occ, gc.fitness_subset_size,
                                   seed, mc)
    model = build_model(mc, seed)
    stop = None
    if cfg["target_accuracy"]:
        target = float(cfg["target_accuracy"])
        stop = lambda gen, loss, acc: acc >= target
    trained, trace = goea_train(model, fitness, gc, on_generation=stop)
    _trace_artifacts(run, trace, cfg, "goea-trace")
    print(f"final fitness-subset accuracy: {trace.final_accuracy():.4f}")


def cmd_goea_sweep(run: RunDir, cfg: dict[str, str]) -> None:
    train, _ = _load_data(cfg)
    occ = _occluded_set(cfg["occluded"])
    seed = int(cfg["seed"])
    mc = _model_config(cfg)
    subset = cfg["fitness_subset_size"]
    subset = "full" if subset == "full" else int(subset)
    fitness = goea_fitness_builder(train, occ, subset, seed, mc)
    model = build_model(mc, seed)
    rows = []
    series: dict[int, tuple[list[float], list[float]]] = {}
    for pop in _int_list(cfg["pop_grid"]):
        xs, ys = series.setdefault(pop, ([], []))
        for eps in _float_list(cfg["eps_grid"]):
            gc = GoeaConfig(edit_distance=eps, population=pop,
                            generations=int(cfg["generations"]),
                            master_seed=seed, acceptance=cfg["acceptance"],
                            fitness_subset_size=subset)
            _, trace = goea_train(model, fitness, gc)
            accepted = sum(bool(r.accepted) for r in trace.rows[1:])
            final_loss = trace.accepted_losses()[-1]
            rows.append([eps, pop, final_loss, trace.final_accuracy(),
                         accepted / (len(trace.rows) - 1)])
            xs.append(eps)
            ys.append(final_loss)
    write_csv(run.csv_path("goea-sweep.csv"),
              ["edit_distance", "population", "final_loss", "final_accuracy",
               "accepted_rate"], rows)
    line_plot(run.svg_path("goea-sweep.svg"),
              [Series(f"N={p}", xs, ys) for p, (xs, ys) in sorted(series.items())],
              title="greedy search sweep", xlabel="edit distance",
              ylabel="final loss")


def cmd_angles(run: RunDir, cfg: dict[str, str]) -> None:
    train, test = _load_data(cfg)
    occ = _occluded_set(cfg["occluded"])
    seed = int(cfg["seed"])
    model = build_model(_model_config(cfg), seed)
    model, _ = sgd_train(model, train, _sgd_config(cfg, "train_epochs"), occ,
                         rng=np.random.default_rng((seed, 1)))
    result = landscape.minibatch_angle_experiment(
        model, train, _int_list(cfg["batch_sizes"]),
        int(cfg["pairs_per_size"]), rng=np.random.default_rng((seed, 2)),
        occluded=occ)
    rows = [[b, float(a)] for b, s in sorted(result.items()) for a in s.angles]
    write_csv(run.csv_path("angles.csv"), ["batch_size", "angle_degrees"], rows)
    line_plot(run.svg_path("angles.svg"),
              [histogram_series(s.angles, 5.0, f"B={b}", lo=0.0, hi=180.0)
               for b, s in sorted(result.items())],
              title="gradient angles between disjoint minibatches",
              xlabel="angle (degrees)", ylabel="pair count")


def cmd_flatness(run: RunDir, cfg: dict[str, str]) -> None:
    train, test = _load_data(cfg)
    occ = _occluded_set(cfg["occluded"])
    seed = int(cfg["seed"])
    mc = _model_config(cfg)
    sc = _sgd_config(cfg)
    grid = np.linspace(-1.0, 1.0, int(cfg["grid_points"]))
    subset = _eval_subset(test, int(cfg["subset_size"]), seed)
    rows = []
    med_series = []
    for replica in range(1, int(cfg["full_replicas"]) + 1):
        model = build_model(mc, (seed, replica))
        model, _ = sgd_train(model, train, sc, occ,
                             rng=np.random.default_rng((seed, replica, 1)))
        sweep = landscape.flatness_sweep(
            model, subset, occ, grid, int(cfg["sampling_replicas"]),
            rng=np.random.default_rng((seed, replica, 2)))
        for r in range(sweep.losses.shape[0]):
            for j, t in enumerate(sweep.grid):
                rows.append([replica, r + 1, float(t),
                             float(sweep.losses[r, j]),
                             float(sweep.accuracies[r, j])])
        med_series.append(Series(
            f"replica {replica}", list(sweep.grid),
            list(np.median(sweep.losses, axis=0))))
    write_csv(run.csv_path("flatness.csv"),
              ["full_replica", "sampling_replica", "t", "loss", "accuracy"],
              rows)
    line_plot(run.svg_path("flatness.svg"), med_series,
              title="loss along filter-normalized directions",
              xlabel="t (filter-norm units)", ylabel="loss (median)")


def cmd_mutations(run: RunDir, cfg: dict[str, str]) -> None:
    train, test = _load_data(cfg)
    occ = _occluded_set(cfg["occluded"])
    seed = int(cfg["seed"])
    mc = _model_config(cfg)
    subset = _eval_subset(test, int(cfg["subset_size"]), seed)
    contexts = []
    init_model = build_model(mc, seed)
    contexts.append(("random_init", init_model))
    if int(cfg["train_epochs"]) > 0:
        trained, _ = sgd_train(init_model, train,
                               _sgd_config(cfg, "train_epochs"), occ,
                               rng=np.random.default_rng((seed, 1)))
        contexts.append(("optimum", trained))
    rows = []
    fractions = []
    for tag, model in contexts:
        sweep = landscape.mutation_sweep(
            model, subset, occ, int(cfg["samples"]),
            rng=np.random.default_rng((seed, 2)), scale=float(cfg["scale"]),
            context=tag)
        for rec in sweep.records:
            rows.append([tag, rec.d_loss, rec.d_accuracy, int(rec.beneficial)])
        fractions.append((tag, sweep.beneficial_fraction()))
        print(f"{tag}: beneficial fraction {sweep.beneficial_fraction():.3f}")
    write_csv(run.csv_path("mutations.csv"),
              ["context", "d_loss", "d_accuracy", "beneficial"], rows)
    line_plot(run.svg_path("mutations.svg"),
              [Series(tag, list(range(len(group))), sorted(group))
               for tag, group in (
                   (t, [r[1] for r in rows if r[0] == t]) for t, _ in fractions)],
              title="loss change under random mutations",
              xlabel="sample (sorted)", ylabel="loss change")


def cmd_valid_angles(run: RunDir, cfg: dict[str, str]) -> None:
    train, test = _load_data(cfg)
    occ = _occluded_set(cfg["occluded"])
    seed = int(cfg["seed"])
    model = build_model(_model_config(cfg), seed)
    if int(cfg["train_epochs"]) > 0:
        model, _ = sgd_train(model, train, _sgd_config(cfg, "train_epochs"),
                             occ, rng=np.random.default_rng((seed, 1)))
    subset = _eval_subset(train, int(cfg["subset_size"]), seed)
    res = landscape.valid_vector_angles(
        model, subset, occ, int(cfg["n_samples"]), float(cfg["eps"]),
        rng=np.random.default_rng((seed, 2)))
    rows = [["all", float(a)] for a in res.all.angles]
    rows += [["beneficial", float(a)] for a in res.beneficial.angles]
    write_csv(run.csv_path("valid-angles.csv"), ["set", "angle_degrees"], rows)
    series = [histogram_series(res.all.angles, 5.0, "all", lo=0.0, hi=180.0)]
    if res.beneficial.angles.size:
        series.append(histogram_series(res.beneficial.angles, 5.0,
                                       "beneficial", lo=0.0, hi=180.0))
    line_plot(run.svg_path("valid-angles.svg"), series,
              title="pairwise angles of update vectors",
              xlabel="angle (degrees)", ylabel="pair count")
    if res.ks is not None:
        print(f"KS D={res.ks[0]:.4f} p={res.ks[1]:.4f}")
    else:
        print(f"KS skipped: {res.status}")


def cmd_limit_equiv(run: RunDir, cfg: dict[str, str]) -> None:
    train, _ = _load_data(cfg)
    occ = _occluded_set(cfg["occluded"])
    seed = int(cfg["seed"])
    model = build_model(_model_config(cfg), seed)
    if int(cfg["train_epochs"]) > 0:
        model, _ = sgd_train(model, train, _sgd_config(cfg, "train_epochs"),
                             occ, rng=np.random.default_rng((seed, 1)))
    subset = _eval_subset(train, int(cfg["subset_size"]), seed)
    eps = float(cfg["eps"]) if cfg["eps"] else None
    res = landscape.limit_equivalence(
        model, subset, _int_list(cfg["n_list"]), eps, int(cfg["trials"]),
        rng=np.random.default_rng((seed, 2)), occluded=occ)
    ns = sorted(res.mean_angles)
    rows = [[n, res.mean_angles[n]] for n in ns]
    write_csv(run.csv_path("limit-equiv.csv"),
              ["population", "mean_angle_to_descent"], rows)
    line_plot(run.svg_path("limit-equiv.svg"),
              [Series("mean angle", ns, [res.mean_angles[n] for n in ns])],
              title="best-of-N direction vs. descent gradient",
              xlabel="population N", ylabel="mean angle (degrees)")
    for n in ns:
        print(f"N={n}: mean angle {res.mean_angles[n]:.2f}")


def cmd_transfer(run: RunDir, cfg: dict[str, str]) -> None:
    train, test = _load_data(cfg)
    occ = _occluded_set(cfg["occluded"]) or landscape.TRANSFER_OCCLUSION
    seed = int(cfg["seed"])
    trace = landscape.transfer_run(
        _model_config(cfg), _sgd_config(cfg), train, test, occ,
        int(cfg["fine_tune_epochs"]),
        flatness_every_epoch=cfg["flatness_every_epoch"] == "1",
        rng=np.random.default_rng((seed, 1)), init_seed=seed,
        sweep_data=_eval_subset(test, int(cfg["subset_size"]), seed))
    rows = [[r.phase, r.epoch, r.loss, r.acc_known, r.acc_revealed, r.acc_all]
            for r in trace.rows]
    write_csv(run.csv_path("transfer.csv"),
              ["phase", "epoch", "loss", "acc_known", "acc_revealed", "acc_all"],
              rows)
    idx = list(range(1, len(trace.rows) + 1))
    line_plot(run.svg_path("transfer.svg"),
              [Series("all classes", idx, [r.acc_all for r in trace.rows]),
               Series("known classes", idx, [r.acc_known for r in trace.rows]),
               Series("revealed classes", idx,
                      [r.acc_revealed for r in trace.rows])],
              title="occlusion transfer phases",
              xlabel="evaluation point", ylabel="accuracy")
    if trace.sweeps:
        srows = []
        for k, sweep in enumerate(trace.sweeps, start=1):
            for r in range(sweep.losses.shape[0]):
                for j, t in enumerate(sweep.grid):
                    srows.append([k, r + 1, float(t), float(sweep.losses[r, j]),
                                  float(sweep.accuracies[r, j])])
        write_csv(run.csv_path("transfer-flatness.csv"),
                  ["fine_tune_epoch", "sampling_replica", "t", "loss",
                   "accuracy"], srows)
    last_occ = [r for r in trace.rows if r.phase == "occluded_training"][-1]
    last = trace.rows[-1]
    print(f"phase-1 all-class accuracy: {last_occ.acc_all:.4f}")
    print(f"final all-class accuracy: {last.acc_all:.4f}")


def cmd_robustness(run: RunDir, cfg: dict[str, str]) -> None:
    train, test = _load_data(cfg)
    occ = _occluded_set(cfg["occluded"])
    seed = int(cfg["seed"])
    model = build_model(_model_config(cfg), seed)
    if int(cfg["train_epochs"]) > 0:
        model, _ = sgd_train(model, train, _sgd_config(cfg, "train_epochs"),
                             occ, rng=np.random.default_rng((seed, 1)))
    subset = _eval_subset(test, int(cfg["subset_size"]), seed)
    fractions = _float_list(cfg["fractions"])
    res = landscape.robustness_eval(
        model, subset, occ, fractions, rng=np.random.default_rng((seed, 2)),
        repeats=int(cfg["repeats"]))
    rows = [["baseline", 0.0, res.baseline]]
    rows += [[mode, f, acc] for (mode, f), acc in sorted(res.accuracies.items())]
    write_csv(run.csv_path("robustness.csv"),
              ["mode", "fraction", "accuracy"], rows)
    by_mode: dict[str, tuple[list[float], list[float]]] = {}
    for (mode, f), acc in sorted(res.accuracies.items()):
        xs, ys = by_mode.setdefault(mode, ([0.0], [res.baseline]))
        if f > 0:
            xs.append(f)
            ys.append(acc)
    line_plot(run.svg_path("robustness.svg"),
              [Series(m, xs, ys) for m, (xs, ys) in sorted(by_mode.items())],
              title="accuracy under corruption",
              xlabel="corrupted fraction", ylabel="accuracy")
    for (mode, f), acc in sorted(res.accuracies.items()):
        print(f"{mode} {f:g}: accuracy {acc:.4f}")


def cmd_cap_sweep(run: RunDir, cfg: dict[str, str]) -> None:
    alphas = _float_list(cfg["alphas"])
    dims = _int_list(cfg["dims"])
    table = mathx.cap_sweep(alphas, dims)
    write_csv(run.csv_path("cap-sweep.csv"),
              ["alpha_degrees", "dim", "cap_fraction"],
              [[a, n, f] for a, n, f in table])
    series = []
    for n in dims:
        xs = [a for a, d, _ in table if d == n]
        ys = [f for a, d, f in table if d == n]
        series.append(Series(f"n={n}", xs, ys))
    line_plot(run.svg_path("cap-sweep.svg"), series,
              title="hypersphere cap fraction",
              xlabel="colatitude (degrees)", ylabel="fraction of sphere")


COMMANDS = {
    "train-sgd": cmd_train_sgd,
    "train-goea": cmd_train_goea,
    "goea-sweep": cmd_goea_sweep,
    "angles": cmd_angles,
    "flatness": cmd_flatness,
    "mutations": cmd_mutations,
    "valid-angles": cmd_valid_angles,
    "limit-equiv": cmd_limit_equiv,
    "transfer": cmd_transfer,
    "robustness": cmd_robustness,
    "cap-sweep": cmd_cap_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evolab",
        description="Train small ConvNets by gradient or greedy random "
                    "search and probe the loss landscape around them.",
    )
    sub = parser.add_subparsers(dest="command", required=False)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("overrides", nargs="*", metavar="KEY=VALUE",
                       help="config overrides (highest precedence)")
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--out", help="output root directory "
                                     f"(default $"f"{OUTPUT_ROOT_ENV} or ./runs)")
        p.add_argument("--resolve-only", action="store_true",
                       help="print the resolved config and exit")
    parser.add_argument("--from-manifest", metavar="MANIFEST",
                        help="re-run the experiment recorded in a manifest")
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0

    try:
        if args.from_manifest:
            manifest = json.loads(Path(args.from_manifest).read_text())
            command = manifest.get("experiment")
            if command not in COMMANDS:
                raise ConfigError(f"manifest names unknown experiment {command!r}")
            cfg = dict(manifest.get("config", {}))
            out_root = getattr(args, "out", None)
        else:
            command = args.command
            if command is None:
                parser.print_usage(sys.stderr)
                return EXIT_USAGE
            file_pairs = read_config_file(args.config) if args.config else {}
            cfg = resolve_config(command, file_pairs, parse_pairs(args.overrides))
            out_root = args.out
        if not args.from_manifest and args.resolve_only:
            for key in sorted(cfg):
                print(f"{key}={cfg[key]}")
            return EXIT_OK
        root = Path(out_root or cfg.get("out_dir")
                    or os.environ.get(OUTPUT_ROOT_ENV, "runs"))
        run = RunDir(root, f"{command}-seed{cfg.get('seed', '1')}")
        t0 = time.perf_counter()
        try:
            COMMANDS[command](run, cfg)
        except BaseException:
            if not any(run.path.iterdir()):
                run.path.rmdir()
            raise
        write_run_metadata(run, command, cfg, time.perf_counter() - t0)
        print(f"run directory: {run.path}")
        return EXIT_OK
    except (ConfigError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InputError, FormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # malformed numeric values in config land here (e.g. alphas=x)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
