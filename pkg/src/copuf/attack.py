"""
Modeling-attack orchestration: hook datasets to feature maps, run the
trainer, and collect a self-describing report.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

from .crpio import CrpSet
from .features import feature_map_for, ff_features, plain_features
from .mlp import MlpConfig, MlpModel, accuracy, init_model, train_arrays


@dataclass
class AttackReport:
    """Result record for one training run.  ``config`` echoes the fully
    resolved training configuration; ``datasets`` holds the content
    fingerprints of train/validation/test sets."""

    test_accuracy: float
    best_val_accuracy: float
    best_epoch: int
    train_loss_curve: list[float]
    val_accuracy_curve: list[float]
    wall_seconds: float
    config: dict
    datasets: dict = field(default_factory=dict)
    feature_map: str = "plain"

    def to_dict(self) -> dict:
        return asdict(self)


def resolve_feature_map(name: str, end_positions=()):
    """Feature map by name: ``plain`` or ``ff`` (requires end positions)."""
    if name == "plain":
        return plain_features
    if name == "ff":
        ends = tuple(end_positions)
        return lambda c: ff_features(c, ends)
    raise ValueError(f"unknown feature map {name!r}")


def train(model: MlpModel, train_set: CrpSet, val_set: CrpSet, feature_map, cfg: MlpConfig):
    """Train on a CRP dataset; returns (best model, AttackReport without
    test accuracy, which ``evaluate`` fills in separately)."""
    Xtr = feature_map(train_set.challenges)
    Xva = feature_map(val_set.challenges)
    best, hist = train_arrays(model, Xtr, train_set.responses, Xva, val_set.responses, cfg)
    report = AttackReport(
        test_accuracy=float("nan"),
        best_val_accuracy=hist.best_val_accuracy,
        best_epoch=hist.best_epoch,
        train_loss_curve=hist.train_loss,
        val_accuracy_curve=hist.val_accuracy,
        wall_seconds=hist.wall_seconds,
        config=asdict(cfg),
        datasets={"train": train_set.sha256(), "val": val_set.sha256()},
    )
    return best, report


def evaluate(model: MlpModel, test_set: CrpSet, feature_map) -> float:
    """Accuracy on records never seen in training or validation."""
    X = feature_map(test_set.challenges)
    return accuracy(model, X, test_set.responses)


def run_attack(
    inst,
    train_set: CrpSet,
    val_set: CrpSet,
    test_set: CrpSet,
    cfg: MlpConfig,
    feature_map=None,
    feature_name: str | None = None,
) -> tuple[MlpModel, AttackReport]:
    """End-to-end attack against one instance's datasets.

    The feature map defaults to the attacker model for the architecture
    (sub-challenge transform for feed-forward designs, plain transform
    otherwise).
    """
    if feature_map is None:
        feature_map, dim = feature_map_for(inst)
        if cfg.input_dim != dim:
            raise ValueError(f"config input_dim {cfg.input_dim} != feature dim {dim}")
    model = init_model(cfg)
    best, report = train(model, train_set, val_set, feature_map, cfg)
    report.test_accuracy = evaluate(best, test_set, feature_map)
    report.datasets["test"] = test_set.sha256()
    if feature_name:
        report.feature_map = feature_name
    return best, report


def best_of(runs: int, base_seed: int, run_fn) -> tuple[MlpModel, AttackReport, list[float]]:
    """Multi-start runner: repeat an attack with derived seeds and keep
    the model with the best test accuracy.  ``run_fn(seed)`` must return
    (model, AttackReport)."""
    if runs < 1:
        raise ValueError("runs must be >= 1")
    results = []
    for i in range(runs):
        results.append(run_fn(base_seed + i))
    accs = [rep.test_accuracy for _, rep in results]
    best_idx = max(range(runs), key=lambda i: accs[i])
    model, report = results[best_idx]
    return model, report, accs
