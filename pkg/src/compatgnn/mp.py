"""Unified message-passing algebra.

One layer computes, per channel r,

    Z_r = (A_r (.) B_r) Z W_r

where A_r is a neighborhood indicator (who may send messages), B_r an
aggregation guidance (how much each message counts), and W_r an optional
channel weight. Channels are merged by COMBINE, layer outputs by FUSE.
Classic architectures are single points in this space; see PRESETS.

A ModelSpec is declarative data (JSON round-trippable) so the CLI can
declare custom stacks without code.
"""

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, NumericalError
from .graph import Graph
from .rng import make_rng
from . import autodiff as ad
from .autodiff import (SparseMatrix, add, add_bias, concat_cols, constant,
                       dropout, glorot, matmul, relu, row_scale, row_softmax,
                       scale, scalar_scale, sigmoid, slice_cols, spmm)
from .sparse import (add_self_loops, khop_adjacency, knn_feature_graph,
                     row_normalize, sym_normalize)

INDICATOR_KINDS = ("identity", "raw", "raw_self_loop", "khop", "feature_knn",
                   "full", "supplementary")
GUIDANCE_KINDS = ("identity", "deg_avg_row", "deg_avg_sym", "high_pass", "constant")
COMBINE_KINDS = ("add", "weighted_add", "ada_add", "cat")
FUSE_KINDS = ("last", "cat", "ada_add")
PRESETS = ("mlp", "gcn", "mixhop", "h2gcn", "gprgnn", "acmgcn")


@dataclass(frozen=True)
class ChannelSpec:
    """One (indicator, guidance, weight) triple.

    weight: "own" for a fresh matrix, "identity" for weightless, any other
    string names a shared-weight group.
    """
    indicator: str
    guidance: str
    k: int = None
    weight: str = "own"

    def validate(self):
        if self.indicator not in INDICATOR_KINDS:
            raise ConfigError(f"unknown indicator {self.indicator!r}")
        if self.guidance not in GUIDANCE_KINDS:
            raise ConfigError(f"unknown guidance {self.guidance!r}")
        if self.indicator in ("khop", "feature_knn") and (self.k is None or self.k < 1):
            raise ConfigError(f"indicator {self.indicator!r} needs a positive k")
        if self.indicator == "supplementary" or self.guidance == "constant":
            raise ConfigError(
                f"{self.indicator}/{self.guidance} channels are bound by the "
                "prototype-aware model, not the generic stack")


@dataclass
class LayerSpec:
    channels: list
    combine: str = "add"
    combine_weights: list = None
    ada_degree_column: bool = False

    def validate(self):
        if not self.channels:
            raise ConfigError("layer needs at least one channel")
        for ch in self.channels:
            ch.validate()
        if self.combine not in COMBINE_KINDS:
            raise ConfigError(f"unknown combine {self.combine!r}")
        if self.combine == "weighted_add":
            if (self.combine_weights is None
                    or len(self.combine_weights) != len(self.channels)):
                raise ConfigError("weighted_add needs one weight per channel")


@dataclass
class ModelSpec:
    layers: list
    hidden_dim: int = 64
    dropout: float = 0.0
    relu_before_aggregate: bool = False
    fuse: str = "last"
    classifier: str = "linear"

    def validate(self):
        if self.hidden_dim < 1:
            raise ConfigError("hidden_dim must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.fuse not in FUSE_KINDS:
            raise ConfigError(f"unknown fuse {self.fuse!r}")
        if self.classifier not in ("linear", "mlp"):
            raise ConfigError(f"unknown classifier {self.classifier!r}")
        for layer in self.layers:
            layer.validate()

    def to_dict(self):
        return {
            "hidden_dim": self.hidden_dim,
            "dropout": self.dropout,
            "relu_before_aggregate": self.relu_before_aggregate,
            "fuse": self.fuse,
            "classifier": self.classifier,
            "layers": [{
                "combine": l.combine,
                "combine_weights": l.combine_weights,
                "ada_degree_column": l.ada_degree_column,
                "channels": [{"indicator": c.indicator, "guidance": c.guidance,
                              "k": c.k, "weight": c.weight} for c in l.channels],
            } for l in self.layers],
        }

    @classmethod
    def from_dict(cls, d):
        try:
            layers = [LayerSpec(
                channels=[ChannelSpec(indicator=c["indicator"], guidance=c["guidance"],
                                      k=c.get("k"), weight=c.get("weight", "own"))
                          for c in l["channels"]],
                combine=l.get("combine", "add"),
                combine_weights=l.get("combine_weights"),
                ada_degree_column=l.get("ada_degree_column", False),
            ) for l in d["layers"]]
            spec = cls(layers=layers,
                       hidden_dim=d.get("hidden_dim", 64),
                       dropout=d.get("dropout", 0.0),
                       relu_before_aggregate=d.get("relu_before_aggregate", False),
                       fuse=d.get("fuse", "last"),
                       classifier=d.get("classifier", "linear"))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed model spec: {exc}") from None
        spec.validate()
        return spec

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"model spec is not valid JSON: {exc}") from None
        return cls.from_dict(d)


# ---------------------------------------------------------------------------
# channel realization

def realize_indicator(g, kind, k=None):
    """Indicator support as scipy CSR; identity returns None (short-circuit)."""
    if kind == "identity":
        return None
    if kind == "raw":
        return g.adjacency()
    if kind == "raw_self_loop":
        return add_self_loops(g)
    if kind == "khop":
        return khop_adjacency(g, k)
    if kind == "feature_knn":
        return knn_feature_graph(g, k)
    if kind == "full":
        return sp.csr_matrix(np.ones((g.n_nodes, g.n_nodes)))
    raise ConfigError(f"indicator {kind!r} cannot be realized without prototype context")


def realize_guidance(indicator, kind, n_nodes):
    """Apply guidance over the indicator support; returns the fused product."""
    if kind == "identity":
        if indicator is not None:
            raise ConfigError("identity guidance pairs only with the identity indicator")
        return None
    if indicator is None:
        raise ConfigError(f"guidance {kind!r} needs a non-identity indicator")
    if kind == "deg_avg_row":
        return row_normalize(indicator)
    if kind == "deg_avg_sym":
        return sym_normalize(indicator)
    if kind == "high_pass":
        return (sp.eye(n_nodes, format="csr") - sym_normalize(indicator)).tocsr()
    raise ConfigError(f"guidance {kind!r} cannot be realized without prototype context")


def realize_channel(g, ch):
    """(indicator, guidance) -> None | SparseMatrix, ready for aggregate()."""
    ind = realize_indicator(g, ch.indicator, ch.k)
    fused = realize_guidance(ind, ch.guidance, g.n_nodes)
    return None if fused is None else SparseMatrix(fused)


def aggregate(realized, z, w=None):
    """(A (.) B) Z W as SpMM; identity channel short-circuits to Z W."""
    t = z if realized is None else spmm(realized, z)
    return t if w is None else matmul(t, w)


# ---------------------------------------------------------------------------
# adaptive channel weighting (shared with the prototype-aware model)

def init_ada_params(rng, n_channels, width, degree_column):
    in_dim = n_channels * width + (1 if degree_column else 0)
    return {
        "w_att": ad.tensor(glorot(rng, (in_dim, n_channels)), requires_grad=True),
        "b_att": ad.tensor(np.zeros((1, n_channels)), requires_grad=True),
        "w_mix": ad.tensor(glorot(rng, (n_channels, n_channels)), requires_grad=True),
        "b_mix": ad.tensor(np.zeros((1, n_channels)), requires_grad=True),
    }


def ada_weights(channel_outs, extra_cols, p):
    """Row-wise softmax channel weights from the concatenated channel outputs."""
    att_in = concat_cols(list(channel_outs) + list(extra_cols))
    h = sigmoid(add_bias(matmul(att_in, p["w_att"]), p["b_att"]))
    return row_softmax(add_bias(matmul(h, p["w_mix"]), p["b_mix"]))


def ada_combine(channel_outs, alpha):
    out = None
    for r, z in enumerate(channel_outs):
        term = row_scale(slice_cols(alpha, r, r + 1), z)
        out = term if out is None else add(out, term)
    return out


def forced_alpha_tensor(force_alpha, n_rows):
    alpha = np.asarray(force_alpha, dtype=np.float64).reshape(1, -1)
    return constant(np.repeat(alpha, n_rows, axis=0))


# ---------------------------------------------------------------------------
# the generic model

@dataclass
class ForwardOutput:
    logits: object
    fused: object
    reps: list


class MessagePassingModel:
    """A ModelSpec bound to a graph: realized channels plus parameters.

    force_alpha (debug): overrides every ada_add combine with fixed channel
    weights. fuse_override (debug): overrides the fuse stage.
    """

    def __init__(self, spec, graph, n_classes=None, seed=0):
        spec.validate()
        if not isinstance(graph, Graph):
            raise ConfigError("MessagePassingModel needs a Graph")
        self.spec = spec
        self.graph = graph
        self.n_classes = graph.n_classes if n_classes is None else n_classes
        self.force_alpha = None
        self.fuse_override = None
        rng = _param_rng(seed)
        d_r = spec.hidden_dim

        self._realized = {}
        self.params = {}
        shared_shapes = {}

        self.params["encoder.w"] = ad.tensor(
            glorot(rng, (graph.d_f, d_r)), requires_grad=True)
        width = d_r
        self._widths = [width]
        for li, layer in enumerate(spec.layers, start=1):
            ch_widths = []
            for cj, ch in enumerate(layer.channels):
                self._realized[(li, cj)] = realize_channel(graph, ch)
                if ch.weight == "own":
                    self.params[f"layer{li}.ch{cj}.w"] = ad.tensor(
                        glorot(rng, (width, d_r)), requires_grad=True)
                    ch_widths.append(d_r)
                elif ch.weight == "identity":
                    ch_widths.append(width)
                else:
                    key = f"shared.{ch.weight}.w"
                    if key in self.params:
                        if shared_shapes[key] != (width, d_r):
                            raise ConfigError(
                                f"shared weight group {ch.weight!r} reused at "
                                f"incompatible width {width}")
                    else:
                        self.params[key] = ad.tensor(
                            glorot(rng, (width, d_r)), requires_grad=True)
                        shared_shapes[key] = (width, d_r)
                    ch_widths.append(d_r)
            if layer.combine == "cat":
                width = sum(ch_widths)
            else:
                if len(set(ch_widths)) > 1:
                    raise ConfigError(
                        f"combine {layer.combine!r} needs equal channel widths, "
                        f"got {ch_widths}")
                width = ch_widths[0]
                if layer.combine == "ada_add":
                    p = init_ada_params(rng, len(layer.channels), width,
                                        layer.ada_degree_column)
                    for k, v in p.items():
                        self.params[f"layer{li}.ada.{k}"] = v
            self._widths.append(width)

        if spec.fuse == "cat":
            fused_width = sum(self._widths)
        elif spec.fuse == "last":
            fused_width = self._widths[-1]
        else:  # ada_add over layer outputs
            if len(set(self._widths)) > 1:
                raise ConfigError("ada_add fuse needs equal layer widths")
            fused_width = self._widths[0]
            n_reps = len(self._widths)
            self.params["fuse.gamma"] = ad.tensor(
                np.full((n_reps, 1), 1.0 / n_reps), requires_grad=True)
        self.fused_width = fused_width

        k = self.n_classes
        if spec.classifier == "linear":
            self.params["cla.w"] = ad.tensor(glorot(rng, (fused_width, k)),
                                             requires_grad=True)
            self.params["cla.b"] = ad.tensor(np.zeros((1, k)), requires_grad=True)
        else:
            self.params["cla.w1"] = ad.tensor(glorot(rng, (fused_width, d_r)),
                                              requires_grad=True)
            self.params["cla.b1"] = ad.tensor(np.zeros((1, d_r)), requires_grad=True)
            self.params["cla.w2"] = ad.tensor(glorot(rng, (d_r, k)), requires_grad=True)
            self.params["cla.b2"] = ad.tensor(np.zeros((1, k)), requires_grad=True)

        self._deg_col = constant(graph.degrees.astype(np.float64).reshape(-1, 1))

    def _channel_weight(self, li, cj, ch):
        if ch.weight == "own":
            return self.params[f"layer{li}.ch{cj}.w"]
        if ch.weight == "identity":
            return None
        return self.params[f"shared.{ch.weight}.w"]

    def _combine(self, li, layer, outs):
        if layer.combine == "add":
            z = outs[0]
            for t in outs[1:]:
                z = add(z, t)
            return z
        if layer.combine == "weighted_add":
            z = None
            for t, w in zip(outs, layer.combine_weights):
                term = scale(t, w)
                z = term if z is None else add(z, term)
            return z
        if layer.combine == "cat":
            return concat_cols(outs)
        # ada_add
        if self.force_alpha is not None:
            alpha = forced_alpha_tensor(self.force_alpha, outs[0].shape[0])
        else:
            extra = [self._deg_col] if layer.ada_degree_column else []
            p = {k: self.params[f"layer{li}.ada.{k}"]
                 for k in ("w_att", "b_att", "w_mix", "b_mix")}
            alpha = ada_weights(outs, extra, p)
        return ada_combine(outs, alpha)

    def _fuse(self, reps):
        mode = self.fuse_override or self.spec.fuse
        if mode == "last":
            return reps[-1]
        if mode == "cat":
            return concat_cols(reps)
        gamma = self.params["fuse.gamma"]
        z = None
        for l, rep in enumerate(reps):
            term = scalar_scale(rep, ad.gather_rows(gamma, [l]))
            z = term if z is None else add(z, term)
        return z

    def _classify(self, zf):
        p = self.params
        if self.spec.classifier == "linear":
            return add_bias(matmul(zf, p["cla.w"]), p["cla.b"])
        h = relu(add_bias(matmul(zf, p["cla.w1"]), p["cla.b1"]))
        return add_bias(matmul(h, p["cla.w2"]), p["cla.b2"])

    def forward(self, train=False, rng=None):
        spec = self.spec
        z = matmul(constant(self.graph.features), self.params["encoder.w"])
        z = dropout(z, spec.dropout, rng, train)
        reps = [z]
        for li, layer in enumerate(spec.layers, start=1):
            try:
                zin = relu(z) if spec.relu_before_aggregate else z
                outs = [aggregate(self._realized[(li, cj)], zin,
                                  self._channel_weight(li, cj, ch))
                        for cj, ch in enumerate(layer.channels)]
                zl = self._combine(li, layer, outs)
                if not spec.relu_before_aggregate:
                    zl = relu(zl)
                zl = dropout(zl, spec.dropout, rng, train)
            except NumericalError as exc:
                raise NumericalError(f"layer {li}: {exc}") from exc
            reps.append(zl)
            z = zl
        zf = self._fuse(reps)
        return ForwardOutput(logits=self._classify(zf), fused=zf, reps=reps)

    def loss(self, out, train_idx):
        return ad.masked_cross_entropy(out.logits, self.graph.labels, train_idx)

    def on_validation_improved(self, eval_out):
        pass

    def run_metadata(self):
        return {}


def _param_rng(seed):
    return make_rng(seed, "params")


# ---------------------------------------------------------------------------
# presets

def build_preset(name, n_layers=2, hidden_dim=64, dropout=0.0,
                 relu_before_aggregate=None, max_hop=2, classifier="linear"):
    """ModelSpec for a named classic architecture."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {PRESETS}")
    if n_layers < 0 or (n_layers == 0 and name != "mlp"):
        raise ConfigError(f"preset {name!r} needs n_layers >= 1")

    def layer(channels, **kw):
        return LayerSpec(channels=channels, **kw)

    relu_default = False
    if name == "mlp":
        layers = [layer([ChannelSpec("identity", "identity")])
                  for _ in range(n_layers)]
        fuse = "last"
    elif name == "gcn":
        layers = [layer([ChannelSpec("raw_self_loop", "deg_avg_sym")])
                  for _ in range(n_layers)]
        fuse = "last"
    elif name == "mixhop":
        if max_hop < 2:
            raise ConfigError("mixhop needs max_hop >= 2")
        chans = [ChannelSpec("identity", "identity"),
                 ChannelSpec("raw", "deg_avg_sym")]
        chans += [ChannelSpec("khop", "deg_avg_sym", k=j)
                  for j in range(2, max_hop + 1)]
        layers = [layer(list(chans), combine="cat") for _ in range(n_layers)]
        fuse = "last"
    elif name == "h2gcn":
        chans = [ChannelSpec("raw", "deg_avg_sym", weight="identity"),
                 ChannelSpec("khop", "deg_avg_sym", k=2, weight="identity")]
        layers = [layer(list(chans), combine="cat") for _ in range(n_layers)]
        fuse = "cat"
    elif name == "gprgnn":
        layers = [layer([ChannelSpec("raw_self_loop", "deg_avg_sym",
                                     weight="identity")])
                  for _ in range(n_layers)]
        fuse = "ada_add"
    else:  # acmgcn
        chans = [ChannelSpec("identity", "identity"),
                 ChannelSpec("raw_self_loop", "deg_avg_sym"),
                 ChannelSpec("raw_self_loop", "high_pass")]
        layers = [layer(list(chans), combine="ada_add") for _ in range(n_layers)]
        fuse = "last"
        relu_default = True

    spec = ModelSpec(layers=layers, hidden_dim=hidden_dim, dropout=dropout,
                     relu_before_aggregate=(relu_default if relu_before_aggregate is None
                                            else relu_before_aggregate),
                     fuse=fuse, classifier=classifier)
    spec.validate()
    return spec
