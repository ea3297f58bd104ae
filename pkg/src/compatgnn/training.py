"""Run configuration and the shared training protocol.

One protocol serves every model: train on the train split, track
validation accuracy each epoch, snapshot parameters on strict
improvement, stop after `patience` non-improving epochs, report test
accuracy at the best snapshot. The compatibility-guided model refreshes
its estimator state on the same improvement events, so the estimate in
play always corresponds to the best parameters seen so far.
"""

import dataclasses
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericalError, TrainingDiverged
from .autodiff import backward, zero_grads
from .model import CompatGNN, CompatModelConfig, estimate_cm
from .mp import PRESETS, MessagePassingModel, ModelSpec, build_preset
from .optim import Adam
from .rng import make_rng

MODEL_NAMES = ("compatgnn",) + PRESETS


@dataclass
class RunConfig:
    model: str = "compatgnn"
    dataset: str = ""
    split_ids: list = field(default_factory=lambda: [0])
    seed: int = 0
    lr: float = 0.01
    weight_decay: float = 0.0
    patience: int = 200
    dropout: float = 0.0
    lambda_: float = 0.0
    layers: int = 2
    nhidden: int = 64
    relu_variant: bool = None
    structure_info: bool = False
    max_epochs: int = 1000
    max_hop: int = 2

    def validate(self):
        if self.lr < 0 or self.weight_decay < 0 or self.lambda_ < 0:
            raise ConfigError("lr, weight_decay and lambda must be non-negative")
        if self.patience < 1 or self.max_epochs < 1:
            raise ConfigError("patience and max_epochs must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.layers < 0 or self.nhidden < 1:
            raise ConfigError("layers must be >= 0 and nhidden >= 1")
        if not self.split_ids:
            raise ConfigError("split_ids must not be empty")

    _JSON_KEYS = {"model", "dataset", "split_ids", "seed", "lr", "weight_decay",
                  "patience", "dropout", "lambda", "layers", "nhidden",
                  "relu_variant", "structure_info", "max_epochs", "max_hop"}

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["lambda"] = d.pop("lambda_")
        return d

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - cls._JSON_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        if "lambda" in d:
            d["lambda_"] = d.pop("lambda")
        try:
            cfg = cls(**d)
        except TypeError as exc:
            raise ConfigError(f"bad config: {exc}") from None
        cfg.validate()
        return cfg


def build_model(config, graph, seed):
    """Instantiate the model a RunConfig names: the compatibility model, a
    preset, or a model-spec JSON path."""
    name = config.model
    if name == "compatgnn":
        cfg = CompatModelConfig(
            hidden_dim=config.nhidden,
            n_layers=config.layers,
            dropout=config.dropout,
            relu_before_aggregate=bool(config.relu_variant),
            structure_info=config.structure_info,
            dis_weight=config.lambda_,
        )
        return CompatGNN(cfg, graph, seed=seed)
    if name in PRESETS:
        spec = build_preset(name, n_layers=config.layers,
                            hidden_dim=config.nhidden, dropout=config.dropout,
                            relu_before_aggregate=config.relu_variant,
                            max_hop=config.max_hop)
        return MessagePassingModel(spec, graph, seed=seed)
    if name.endswith(".json") and os.path.exists(name):
        with open(name, "r", encoding="utf-8") as fh:
            spec = ModelSpec.from_json(fh.read())
        return MessagePassingModel(spec, graph, seed=seed)
    raise ConfigError(f"unknown model {name!r}: expected one of {MODEL_NAMES} "
                      "or a model-spec JSON path")


def accuracy(logits_value, labels, idx):
    idx = np.asarray(idx, dtype=np.int64)
    pred = np.argmax(logits_value[idx], axis=1)
    return float(np.mean(pred == labels[idx]))


@dataclass
class RunResult:
    config: dict
    seed: int
    split_id: int
    best_epoch: int
    val_curve: list
    loss_curve: list
    test_accuracy: float
    epoch_ms: list
    refresh_epochs: list
    test_idx: list
    test_predictions: list
    test_degrees: list
    test_labels: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    diverged: bool = False

    def to_json(self):
        return json.dumps(dataclasses.asdict(self), indent=2)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))


def train_model(graph, split, config, seed, split_id=0, model=None):
    """Run the full protocol once; returns a RunResult.

    A pre-built model may be passed in (ablation studies); by default the
    model is built from the config. Raises TrainingDiverged (with the
    partial log attached) if any forward or gradient turns non-finite.
    """
    config.validate()
    if model is None:
        model = build_model(config, graph, seed)
    drop_rng = make_rng(seed, "dropout")

    is_compat = isinstance(model, CompatGNN)
    if is_compat:
        model.bind_prototypes(split.train)
        c0 = model.bootstrap_soft_labels(split.train)
        model.set_estimate(estimate_cm(graph, c0, epoch=-1), c0)

    opt = Adam(model.params, lr=config.lr, weight_decay=config.weight_decay)
    best_val = -np.inf
    best_epoch = -1
    best_state = None
    wait = 0
    val_curve, loss_curve, epoch_ms, refresh_epochs = [], [], [], []

    def partial(diverged):
        return RunResult(config=config.to_dict(), seed=seed, split_id=split_id,
                         best_epoch=best_epoch, val_curve=list(val_curve),
                         loss_curve=list(loss_curve), test_accuracy=float("nan"),
                         epoch_ms=list(epoch_ms), refresh_epochs=list(refresh_epochs),
                         test_idx=split.test.tolist(), test_predictions=[],
                         test_degrees=graph.degrees[split.test].tolist(),
                         test_labels=graph.labels[split.test].tolist(),
                         metadata={}, diverged=diverged)

    for epoch in range(config.max_epochs):
        t0 = time.perf_counter()
        try:
            zero_grads(model.params)
            out = model.forward(train=True, rng=drop_rng)
            loss = model.loss(out, split.train)
            backward(loss)
            opt.step()
            eval_out = model.forward(train=False)
        except NumericalError as exc:
            raise TrainingDiverged(f"epoch {epoch}: {exc}", partial(True)) from None
        loss_curve.append(loss.item())
        val_acc = accuracy(eval_out.logits.value, graph.labels, split.valid)
        val_curve.append(val_acc)
        if val_acc > best_val:
            best_val = val_acc
            best_epoch = epoch
            wait = 0
            best_state = {k: p.value.copy() for k, p in model.params.items()}
            if is_compat:
                model.on_validation_improved(eval_out, split.train, epoch)
                refresh_epochs.append(epoch)
        else:
            wait += 1
        epoch_ms.append((time.perf_counter() - t0) * 1000.0)
        if wait >= config.patience:
            break

    if best_state is not None:
        for k, p in model.params.items():
            p.value = best_state[k]
    final_out = model.forward(train=False)
    test_acc = accuracy(final_out.logits.value, graph.labels, split.test)
    preds = np.argmax(final_out.logits.value[split.test], axis=1)

    return RunResult(
        config=config.to_dict(), seed=seed, split_id=split_id,
        best_epoch=best_epoch, val_curve=val_curve, loss_curve=loss_curve,
        test_accuracy=test_acc, epoch_ms=epoch_ms, refresh_epochs=refresh_epochs,
        test_idx=split.test.tolist(), test_predictions=preds.tolist(),
        test_degrees=graph.degrees[split.test].tolist(),
        test_labels=graph.labels[split.test].tolist(),
        metadata=model.run_metadata(), diverged=False)
