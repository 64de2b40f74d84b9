"""Experiment driver: config parsing, the train + prune loop, reports and
checkpoints.

Per epoch: train every batch, run a pruning round when the epoch hits the
pruning window (epoch % gap == 0 and epoch <= epochs - recovery_tail), then
evaluate and append a report row. With a recovery tail configured, the final
epoch ends with a hard re-zeroize of the last round's selection, so the
shipped checkpoint is sparse. Everything is seeded; identical configs produce
byte-identical reports and checkpoints.
"""

import argparse
import csv
import json
import struct
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import metrics, nn
from .data import batches, load_mnist
from .pruning import PruneConfig, PruneMask, scsp_step, zeroize_filters
from .spectral import SpectralConfig, default_n_clusters

DESK_TRAIN_SUBSET = 10000

CHECKPOINT_MAGIC = b"SCSPCKPT"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    """Corrupt, truncated, or architecture-incompatible checkpoint."""


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str = "scsp"  # "baseline" disables pruning
    data_dir: str = "data/mnist"
    out_dir: str = "out"
    full_mnist: bool = False
    train: nn.TrainConfig = field(default_factory=nn.TrainConfig)
    prune: PruneConfig = field(default_factory=lambda: PruneConfig(recovery_tail_epochs=2))
    bandwidth: float = 1.0
    reduce_dimension: bool = False
    embed_dim: int = 0
    n_clusters: dict = field(default_factory=dict)  # layer name -> override
    spectral_per_layer: dict = field(default_factory=dict)  # layer name -> field dict

    def __post_init__(self):
        if self.mode not in ("baseline", "scsp"):
            raise ValueError(f"mode must be baseline or scsp, got {self.mode!r}")


@dataclass(frozen=True)
class EpochReport:
    epoch: int
    train_loss: float
    test_accuracy: float
    layer_sparsity: dict  # layer name -> nonzero fraction of its weights
    param_sparsity: float  # model-level
    effective_flops: int
    pruned_flops_pct: float
    pruned_flops_pct_local: float  # without cross-layer C_in propagation
    pruned_groups: dict  # layer name -> group ids zeroized this epoch


def load_config(path):
    with open(path) as f:
        raw = json.load(f)
    return config_from_dict(raw)


def config_from_dict(raw):
    train_raw = raw.get("train", {})
    prune_raw = raw.get("prune", {})
    train = nn.TrainConfig(
        learning_rate=train_raw.get("learning_rate", 0.07),
        epochs=train_raw.get("epochs", 5),
        batch_size=train_raw.get("batch_size", 64),
        seed=train_raw.get("seed", 0),
    )
    prune = PruneConfig(
        prune_rate_per_layer=prune_raw.get("rate", 0.2),
        pruning_gap=prune_raw.get("gap", 1),
        p_norm=prune_raw.get("p_norm", 2.0),
        recovery_tail_epochs=prune_raw.get("recovery_tail_epochs", 2),
    )
    return ExperimentConfig(
        mode=raw.get("mode", "scsp"),
        data_dir=raw.get("data_dir", "data/mnist"),
        out_dir=raw.get("out_dir", "out"),
        full_mnist=raw.get("full_mnist", False),
        train=train,
        prune=prune,
        bandwidth=raw.get("bandwidth", 1.0),
        reduce_dimension=raw.get("reduce_dimension", False),
        embed_dim=raw.get("embed_dim", 0),
        n_clusters=dict(raw.get("n_clusters", {})),
        spectral_per_layer=dict(raw.get("spectral_per_layer", {})),
    )


def spectral_configs(state, cfg):
    """Per-prunable-layer SpectralConfig: class-count heuristic plus optional
    per-layer overrides, keyed by conv1/conv2/fc1... names. `n_clusters` maps
    a name to a cluster count; `spectral_per_layer` maps a name to any subset
    of the SpectralConfig fields."""
    names = nn.layer_names(state.specs)
    out = {}
    for layer_id in state.prunable_layer_ids():
        name = names[layer_id]
        fields = {
            "bandwidth": cfg.bandwidth,
            "n_clusters": cfg.n_clusters.get(
                name, default_n_clusters(state.specs[layer_id].n_filters)
            ),
            "reduce_dimension": cfg.reduce_dimension,
            "embed_dim": cfg.embed_dim,
        }
        fields.update(cfg.spectral_per_layer.get(name, {}))
        out[layer_id] = SpectralConfig(**fields)
    return out


def _last_fc_layer(specs):
    return max(i for i, s in enumerate(specs) if s.kind == nn.FC)


def run_experiment(cfg, initial_state=None, first_epoch=1):
    """Run the configured experiment; returns (rows, final_state).

    Writes report.csv / report.json and checkpoint.bin under cfg.out_dir.
    Passing a checkpointed state plus the next epoch index resumes a run:
    batch order and clustering seeds are keyed on (seed, epoch), so the
    resumed rows match an uninterrupted run's rows bitwise.
    """
    data_dir = Path(cfg.data_dir)
    if not data_dir.exists():
        raise FileNotFoundError(f"data directory {data_dir} does not exist")
    train_ds = load_mnist(data_dir, train=True)
    test_ds = load_mnist(data_dir, train=False)
    if not cfg.full_mnist:
        train_ds = train_ds.take(DESK_TRAIN_SUBSET)

    state = initial_state if initial_state is not None else nn.init_network(cfg.train.seed)
    names = nn.layer_names(state.specs)
    spec_cfgs = spectral_configs(state, cfg)
    # the last FC maps features to classes and is never pruned
    prune_cfg = replace(
        cfg.prune, skip_layers=cfg.prune.skip_layers | {_last_fc_layer(state.specs)}
    )

    prune_window_end = cfg.train.epochs - prune_cfg.recovery_tail_epochs
    if cfg.mode == "scsp" and first_epoch > prune_window_end and prune_cfg.recovery_tail_epochs > 0:
        # the final hard zeroize needs a selection made by a pruning round
        # within this process; resuming past the window would lose it
        raise ValueError(
            f"cannot resume at epoch {first_epoch}: the pruning window ended at "
            f"epoch {prune_window_end} and the final selection is not in the checkpoint"
        )
    rows = []
    last_records = None
    for epoch in range(first_epoch, cfg.train.epochs + 1):
        losses = []
        for images, labels in batches(
            train_ds, cfg.train.batch_size, cfg.train.seed, shuffle=True, epoch=epoch
        ):
            logits, cache = nn.forward(state, images)
            grads, loss = nn.backward(state, cache, labels)
            if not np.isfinite(loss):
                raise RuntimeError(f"non-finite loss {loss} at epoch {epoch}")
            nn.sgd_step(state, grads, cfg.train.learning_rate)
            losses.append(loss)

        pruned_groups = {names[i]: [] for i in state.prunable_layer_ids()}
        if cfg.mode == "scsp" and epoch % prune_cfg.pruning_gap == 0 and epoch <= prune_window_end:
            step_seed = int(np.random.SeedSequence([cfg.train.seed, epoch]).generate_state(1)[0])
            _, records = scsp_step(state, spec_cfgs, prune_cfg, step_seed)
            last_records = records
            for rec in records:
                pruned_groups[names[rec.layer_id]] = rec.pruned_group_ids

        if (
            cfg.mode == "scsp"
            and epoch == cfg.train.epochs
            and prune_cfg.recovery_tail_epochs > 0
            and last_records
        ):
            # ship the last selection: hard re-zeroize after the recovery tail
            for rec in last_records:
                zeroize_filters(state, rec.layer_id, rec.pruned_filters)
                pruned_groups[names[rec.layer_id]] = rec.pruned_group_ids

        accuracy = nn.evaluate(state, test_ds.images, test_ds.labels)
        _, totals = metrics.effective_network_flops(state)
        _, totals_local = metrics.effective_network_flops(state, propagate_in_channels=False)
        rows.append(
            EpochReport(
                epoch=epoch,
                train_loss=round(float(np.mean(losses)), 6),
                test_accuracy=round(accuracy, 6),
                layer_sparsity={
                    names[i]: round(metrics.sparsity(state.weights[i]), 6)
                    for i in state.parameter_layer_ids()
                },
                param_sparsity=round(metrics.network_sparsity(state), 6),
                effective_flops=totals["effective_flops"],
                pruned_flops_pct=round(totals["pruned_flops_pct"], 6),
                pruned_flops_pct_local=round(totals_local["pruned_flops_pct"], 6),
                pruned_groups=pruned_groups,
            )
        )

    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    emit_report(rows, out_dir / "report.csv", out_dir / "report.json")
    save_checkpoint(state, out_dir / "checkpoint.bin")
    return rows, state


# ---------------------------------------------------------------------------
# reports

def _row_dict(row):
    d = {
        "epoch": row.epoch,
        "train_loss": row.train_loss,
        "test_accuracy": row.test_accuracy,
    }
    for name, value in sorted(row.layer_sparsity.items()):
        d[f"sparsity_{name}"] = value
    d["param_sparsity"] = row.param_sparsity
    d["effective_flops"] = row.effective_flops
    d["pruned_flops_pct"] = row.pruned_flops_pct
    d["pruned_flops_pct_local"] = row.pruned_flops_pct_local
    for name, ids in sorted(row.pruned_groups.items()):
        d[f"pruned_groups_{name}"] = "|".join(str(g) for g in ids)
    return d


_CSV_HEADER = [
    "epoch",
    "train_loss",
    "test_accuracy",
    "sparsity_conv1",
    "sparsity_conv2",
    "sparsity_fc1",
    "sparsity_fc2",
    "param_sparsity",
    "effective_flops",
    "pruned_flops_pct",
    "pruned_flops_pct_local",
    "pruned_groups_conv1",
    "pruned_groups_conv2",
    "pruned_groups_fc1",
]


def emit_report(rows, csv_path, json_path):
    """Write the epoch rows as CSV and as a JSON mirror (list of row dicts).

    Reals carry 6 decimal places; the CSV header is fixed.
    """
    dicts = [_row_dict(r) for r in rows]
    header = list(dicts[0].keys()) if dicts else list(_CSV_HEADER)
    with open(csv_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for d in dicts:
            writer.writerow(
                [f"{v:.6f}" if isinstance(v, float) else v for v in d.values()]
            )
    with open(json_path, "w") as f:
        json.dump(dicts, f, indent=2, sort_keys=False)
        f.write("\n")


# ---------------------------------------------------------------------------
# checkpoints

def _spec_dict(s):
    return {k: getattr(s, k) for k in (
        "kind", "prunable", "kernel", "in_channels", "out_channels",
        "stride", "padding", "window", "fan_in", "fan_out",
    )}


def save_checkpoint(state, path):
    """Binary container: magic, version, JSON header (specs, seed, masks as
    hex-packed bit arrays, per-layer shapes), then little-endian float64
    weight+bias payloads in spec order. load(save(s)) is bitwise exact."""
    header = {
        "rng_seed": state.rng_seed,
        "specs": [_spec_dict(s) for s in state.specs],
        "masks": {
            str(i): {
                "n": int(m.active.size),
                "bits": np.packbits(m.active).tobytes().hex(),
                "last_pruned_groups": list(m.last_pruned_groups),
            }
            for i, m in sorted(state.masks.items())
        },
        "params": [
            {
                "layer_id": i,
                "weight_shape": list(state.weights[i].shape),
                "bias_shape": list(state.biases[i].shape),
            }
            for i in state.parameter_layer_ids()
        ],
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", CHECKPOINT_VERSION))
        f.write(struct.pack("<Q", len(blob)))
        f.write(blob)
        for i in state.parameter_layer_ids():
            f.write(np.ascontiguousarray(state.weights[i], dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(state.biases[i], dtype="<f8").tobytes())


def load_checkpoint(path, expected_specs=None):
    raw = Path(path).read_bytes()
    if len(raw) < 20 or raw[:8] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    (version,) = struct.unpack("<I", raw[8:12])
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    (header_len,) = struct.unpack("<Q", raw[12:20])
    if len(raw) < 20 + header_len:
        raise CheckpointError(f"{path}: truncated header")
    header = json.loads(raw[20 : 20 + header_len])
    specs = tuple(nn.LayerSpec(**d) for d in header["specs"])
    if expected_specs is not None and tuple(expected_specs) != specs:
        raise CheckpointError(f"{path}: architecture does not match expected specs")

    offset = 20 + header_len
    weights, biases = {}, {}
    for p in header["params"]:
        i = p["layer_id"]
        w_shape, b_shape = tuple(p["weight_shape"]), tuple(p["bias_shape"])
        w_bytes = int(np.prod(w_shape)) * 8
        b_bytes = int(np.prod(b_shape)) * 8
        if offset + w_bytes + b_bytes > len(raw):
            raise CheckpointError(f"{path}: truncated payload at layer {i}")
        weights[i] = np.frombuffer(raw, dtype="<f8", count=int(np.prod(w_shape)), offset=offset).reshape(w_shape).copy()
        offset += w_bytes
        biases[i] = np.frombuffer(raw, dtype="<f8", count=int(np.prod(b_shape)), offset=offset).reshape(b_shape).copy()
        offset += b_bytes
    if offset != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - offset} trailing bytes")

    masks = {}
    for key, m in header["masks"].items():
        i = int(key)
        bits = np.unpackbits(np.frombuffer(bytes.fromhex(m["bits"]), dtype=np.uint8))
        masks[i] = PruneMask(
            layer_id=i,
            active=bits[: m["n"]].astype(bool),
            last_pruned_groups=list(m["last_pruned_groups"]),
        )
    return nn.NetworkState(
        specs=specs, weights=weights, biases=biases, masks=masks, rng_seed=header["rng_seed"]
    )


# ---------------------------------------------------------------------------
# entry point

def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="scsp",
        description="Train a small CNN with spectral-clustering soft filter pruning.",
    )
    parser.add_argument("--config", type=Path, help="JSON experiment config")
    parser.add_argument("--seed", type=int, help="override training seed")
    parser.add_argument("--epochs", type=int, help="override epoch count")
    parser.add_argument("--prune-rate", type=float, help="override per-layer prune rate")
    parser.add_argument("--gap", type=int, help="override pruning gap (epochs)")
    parser.add_argument("--out", type=Path, help="override output directory")
    parser.add_argument(
        "--full-mnist", action="store_true", help="train on the full set, not the 10k subset"
    )
    args = parser.parse_args(argv)

    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg = replace(cfg, train=replace(cfg.train, seed=args.seed))
    if args.epochs is not None:
        cfg = replace(cfg, train=replace(cfg.train, epochs=args.epochs))
    if args.prune_rate is not None:
        cfg = replace(cfg, prune=replace(cfg.prune, prune_rate_per_layer=args.prune_rate))
    if args.gap is not None:
        cfg = replace(cfg, prune=replace(cfg.prune, pruning_gap=args.gap))
    if args.out is not None:
        cfg = replace(cfg, out_dir=str(args.out))
    if args.full_mnist:
        cfg = replace(cfg, full_mnist=True)

    try:
        rows, _ = run_experiment(cfg)
    except (FileNotFoundError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for row in rows:
        print(
            f"epoch {row.epoch}: loss {row.train_loss:.4f} "
            f"acc {row.test_accuracy:.4f} sparsity {row.param_sparsity:.4f} "
            f"pruned-flops {row.pruned_flops_pct:.2f}%"
        )
    print(f"reports and checkpoint written to {cfg.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
