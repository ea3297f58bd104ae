"""Compatibility-guided message passing with class prototypes.

The model estimates a class-to-class compatibility matrix from its own
predictions during training and uses it to route messages from K virtual
prototype nodes into every real node (the "supplementary" channel). The
estimator weighs each node's vote by prediction confidence and by a
degree-based reliability score, so sparse or uncertain neighborhoods
don't poison the estimate.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, NumericalError
from .metrics import CompatibilityMatrix, l1_normalize_rows
from .rng import make_rng
from .sparse import row_normalize, sym_normalize
from . import autodiff as ad
from .autodiff import (SparseMatrix, add, add_bias, concat_cols, constant,
                       cosine, dropout, gather_rows, glorot, matmul, relu,
                       scale, spmm)
from .mp import ada_weights, ada_combine, forced_alpha_tensor, init_ada_params


# ---------------------------------------------------------------------------
# prototypes

def build_prototypes(g, train_idx):
    """K x d_f prototype features: L1-normalized mean of each class's
    training feature rows. Every class must be represented."""
    train_idx = np.asarray(train_idx, dtype=np.int64)
    k = g.n_classes
    protos = np.zeros((k, g.d_f))
    labels = g.labels[train_idx]
    missing = []
    for c in range(k):
        rows = g.features[train_idx[labels == c]]
        if len(rows) == 0:
            missing.append(c)
            continue
        protos[c] = rows.mean(axis=0)
    if missing:
        raise DataError(f"classes {missing} have no training nodes; "
                        "prototypes need at least one per class")
    protos, _ = l1_normalize_rows(protos)
    return protos


# ---------------------------------------------------------------------------
# estimator ingredients

def confidence(soft_labels, tol=1e-6):
    """Prediction confidence per node: log K minus the row entropy
    (natural log), clamped into [0, log K]. Uniform rows score 0,
    one-hot rows score log K."""
    c = np.asarray(soft_labels, dtype=np.float64)
    k = c.shape[1]
    if np.any(c < -tol):
        bad = int(np.argwhere(c < -tol)[0][0])
        raise DataError(f"soft label row {bad} has negative mass")
    sums = c.sum(axis=1)
    off = np.abs(sums - 1.0)
    if np.any(off > tol):
        bad = int(np.argmax(off))
        raise DataError(f"soft label row {bad} sums to {sums[bad]}, expected 1")
    safe = np.where(c > 0, c, 1.0)
    entropy = -(np.where(c > 0, c, 0.0) * np.log(safe)).sum(axis=1)
    return np.clip(np.log(k) - entropy, 0.0, np.log(k))


def degree_weight(degrees, k):
    """Reliability of a node's neighborhood evidence as a function of its
    degree d and the class count K: d/2K up to K, 1/4 + d/4K up to 3K,
    then 1. Continuous and non-decreasing, with values in [0, 1]."""
    if k < 1:
        raise ConfigError("degree_weight needs k >= 1")
    d = np.asarray(degrees, dtype=np.float64)
    low = d / (2.0 * k)
    mid = 0.25 + d / (4.0 * k)
    return np.where(d <= k, low, np.where(d <= 3 * k, mid, 1.0))


@dataclass
class CMEstimate:
    """A compatibility estimate plus the evidence weights behind it."""
    matrix: CompatibilityMatrix
    confidence: np.ndarray
    degree_weights: np.ndarray
    epoch: int = -1


def estimate_cm(g, soft_labels, degree_weights=None, epoch=-1):
    """Estimate the compatibility matrix from soft predictions.

    Semantic neighborhoods are built from confidence-scaled predictions;
    class rows are convex combinations of those neighborhoods, weighted by
    confidence times degree reliability. Nodes with no evidence (isolated,
    or no confident neighbor) are excluded so rows stay stochastic; rows
    with no mass at all fall back to uniform and are flagged.
    """
    c_hat = np.asarray(soft_labels, dtype=np.float64)
    if c_hat.shape != (g.n_nodes, g.n_classes):
        raise DataError(f"soft labels must be ({g.n_nodes}, {g.n_classes}), "
                        f"got {c_hat.shape}")
    g_conf = confidence(c_hat)
    if degree_weights is None:
        w_deg = degree_weight(g.degrees, g.n_classes)
    else:
        w_deg = np.asarray(degree_weights, dtype=np.float64)

    scaled = g_conf[:, None] * c_hat
    c_nb, _ = l1_normalize_rows(g.adjacency() @ scaled)

    votes = w_deg[:, None] * scaled
    # no neighborhood evidence => no vote (keeps rows stochastic)
    votes = votes * (c_nb.sum(axis=1) > 0)[:, None]
    if not np.any(votes):
        raise DataError("all estimator weights are zero (uniform predictions "
                        "everywhere?); train longer or seed with ground truth rows")
    norm_votes, _ = l1_normalize_rows(votes.T)
    cm = CompatibilityMatrix.from_unnormalized(norm_votes @ c_nb)
    return CMEstimate(matrix=cm, confidence=g_conf, degree_weights=w_deg, epoch=epoch)


def supplementary_guidance(soft_labels, cm):
    """Per-node desired neighborhood profile: soft labels routed through the
    compatibility matrix (N x K, row-stochastic when inputs are)."""
    c_hat = np.asarray(soft_labels, dtype=np.float64)
    m = cm.m if isinstance(cm, CompatibilityMatrix) else np.asarray(cm)
    if c_hat.shape[1] != m.shape[0]:
        raise DataError(f"soft labels have {c_hat.shape[1]} classes, matrix {m.shape}")
    return c_hat @ m


# ---------------------------------------------------------------------------
# the model

@dataclass
class CompatModelConfig:
    hidden_dim: int = 64
    n_layers: int = 2
    dropout: float = 0.0
    relu_before_aggregate: bool = False
    structure_info: bool = False
    raw_sym_norm: bool = False   # symmetric instead of row normalization of A
    dis_weight: float = 0.0      # weight of the prototype discrimination loss
    dis_enabled: bool = True     # hard ablation switch for the loss term

    def validate(self):
        if self.hidden_dim < 1 or self.n_layers < 1:
            raise ConfigError("hidden_dim and n_layers must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.dis_weight < 0:
            raise ConfigError("dis_weight must be non-negative")


class CompatGNN:
    """Three channels per layer: self, degree-averaged neighborhood, and a
    prototype channel guided by the estimated compatibility matrix. The K
    prototypes propagate through the identical layers (zero adjacency, the
    compatibility matrix as their own guidance) so their representations
    live in the same space as node representations. Layer outputs are
    adaptively weighted per node and all depths are concatenated for the
    classifier."""

    def __init__(self, cfg, graph, seed=0):
        cfg.validate()
        if graph.n_classes < 2:
            raise ConfigError("model needs at least 2 classes")
        self.cfg = cfg
        self.graph = graph
        self.n_classes = graph.n_classes
        self.force_alpha = None
        self.fuse_override = None

        norm = sym_normalize if cfg.raw_sym_norm else row_normalize
        self.a_hat = SparseMatrix(norm(graph))
        self._deg_col = constant(graph.degrees.astype(np.float64).reshape(-1, 1))
        self._proto_zero_col = constant(np.zeros((graph.n_classes, 1)))

        rng = make_rng(seed, "params")
        d_r = cfg.hidden_dim
        self.params = {}
        if cfg.structure_info:
            self.params["encoder.w_x"] = ad.tensor(glorot(rng, (graph.d_f, d_r)),
                                                   requires_grad=True)
            self.params["encoder.w_a"] = ad.tensor(glorot(rng, (graph.n_nodes, d_r)),
                                                   requires_grad=True)
            self.params["encoder.w0"] = ad.tensor(glorot(rng, (2 * d_r, d_r)),
                                                  requires_grad=True)
        else:
            self.params["encoder.w0"] = ad.tensor(glorot(rng, (graph.d_f, d_r)),
                                                  requires_grad=True)
        for li in range(1, cfg.n_layers + 1):
            for cj in range(3):
                self.params[f"layer{li}.ch{cj}.w"] = ad.tensor(
                    glorot(rng, (d_r, d_r)), requires_grad=True)
            for k, v in init_ada_params(rng, 3, d_r, degree_column=True).items():
                self.params[f"layer{li}.ada.{k}"] = v
        fused = (cfg.n_layers + 1) * d_r
        self.params["cla.w1"] = ad.tensor(glorot(rng, (fused, d_r)), requires_grad=True)
        self.params["cla.b1"] = ad.tensor(np.zeros((1, d_r)), requires_grad=True)
        self.params["cla.w2"] = ad.tensor(glorot(rng, (d_r, self.n_classes)),
                                          requires_grad=True)
        self.params["cla.b2"] = ad.tensor(np.zeros((1, self.n_classes)),
                                          requires_grad=True)

        # estimator state, refreshed by the training protocol
        self.prototypes = None      # K x d_f ndarray
        self.cm = None              # CMEstimate
        self.sup_guidance = None    # N x K ndarray

    # -- estimator state ----------------------------------------------------

    def bind_prototypes(self, train_idx):
        self.prototypes = build_prototypes(self.graph, train_idx)

    def set_estimate(self, est, soft_labels):
        self.cm = est
        self.sup_guidance = supplementary_guidance(soft_labels, est.matrix)

    def bootstrap_soft_labels(self, train_idx):
        """Uniform rows everywhere except ground-truth one-hot training rows."""
        n, k = self.graph.n_nodes, self.n_classes
        c_hat = np.full((n, k), 1.0 / k)
        train_idx = np.asarray(train_idx, dtype=np.int64)
        c_hat[train_idx] = 0.0
        c_hat[train_idx, self.graph.labels[train_idx]] = 1.0
        return c_hat

    # -- forward ------------------------------------------------------------

    def _encode(self, x_const, struct_op, rng, train):
        cfg = self.cfg
        if cfg.structure_info:
            zx = matmul(x_const, self.params["encoder.w_x"])
            za = struct_op(self.params["encoder.w_a"])
            z = matmul(concat_cols([zx, za]), self.params["encoder.w0"])
        else:
            z = matmul(x_const, self.params["encoder.w0"])
        return dropout(z, cfg.dropout, rng, train)

    def forward(self, train=False, rng=None):
        if self.prototypes is None or self.sup_guidance is None:
            raise ConfigError("model state not initialized: call bind_prototypes() "
                              "and set_estimate() first")
        cfg = self.cfg
        k = self.n_classes
        b_sup = constant(self.sup_guidance)
        b_sup_proto = constant(self.cm.matrix.m)
        zero_struct = constant(np.zeros((k, cfg.hidden_dim)))

        z = self._encode(constant(self.graph.features),
                         lambda w: spmm(self.a_hat, w), rng, train)
        zp = self._encode(constant(self.prototypes),
                          lambda w: zero_struct, rng, train)
        reps, reps_p = [z], [zp]
        for li in range(1, cfg.n_layers + 1):
            try:
                z, zp = self._layer(li, z, zp, b_sup, b_sup_proto, rng, train)
            except NumericalError as exc:
                raise NumericalError(f"layer {li}: {exc}") from None
            reps.append(z)
            reps_p.append(zp)
        if self.fuse_override == "last":
            zf, zfp = reps[-1], reps_p[-1]
        else:
            zf, zfp = concat_cols(reps), concat_cols(reps_p)
        logits = self._classify(zf)
        logits_p = self._classify(zfp)
        return ModelOutput(logits=logits, fused=zf, proto_fused=zfp,
                           proto_logits=logits_p, reps=reps, proto_reps=reps_p)

    def _layer(self, li, z, zp, b_sup, b_sup_proto, rng, train):
        cfg = self.cfg
        p = self.params
        zin = relu(z) if cfg.relu_before_aggregate else z
        zpin = relu(zp) if cfg.relu_before_aggregate else zp

        w0, w1, w2 = (p[f"layer{li}.ch{j}.w"] for j in range(3))
        c0 = matmul(zin, w0)
        c1 = spmm(self.a_hat, matmul(zin, w1))
        proto_msg = matmul(zpin, w2)            # K x d_r, shared by both targets
        c2 = matmul(b_sup, proto_msg)

        p0 = matmul(zpin, w0)
        p1 = constant(np.zeros((self.n_classes, cfg.hidden_dim)))  # zero adjacency
        p2 = matmul(b_sup_proto, proto_msg)

        ada = {key: p[f"layer{li}.ada.{key}"]
               for key in ("w_att", "b_att", "w_mix", "b_mix")}
        if self.force_alpha is not None:
            alpha = forced_alpha_tensor(self.force_alpha, z.shape[0])
            alpha_p = forced_alpha_tensor(self.force_alpha, self.n_classes)
        else:
            alpha = ada_weights([c0, c1, c2], [self._deg_col], ada)
            alpha_p = ada_weights([p0, p1, p2], [self._proto_zero_col], ada)
        z_out = ada_combine([c0, c1, c2], alpha)
        zp_out = ada_combine([p0, p1, p2], alpha_p)

        if not cfg.relu_before_aggregate:
            z_out, zp_out = relu(z_out), relu(zp_out)
        z_out = dropout(z_out, cfg.dropout, rng, train)
        zp_out = dropout(zp_out, cfg.dropout, rng, train)
        return z_out, zp_out

    def _classify(self, zf):
        p = self.params
        h = relu(add_bias(matmul(zf, p["cla.w1"]), p["cla.b1"]))
        return add_bias(matmul(h, p["cla.w2"]), p["cla.b2"])

    # -- losses ---------------------------------------------------------------

    def discrimination_loss(self, out):
        """Sum of pairwise cosine similarities between the prototypes' desired
        messages (ordered pairs, i != j). Lower means the compatibility rows
        route distinguishable signals."""
        v = matmul(constant(self.cm.matrix.m), out.proto_fused)
        total = None
        for i in range(self.n_classes):
            vi = gather_rows(v, [i])
            for j in range(i + 1, self.n_classes):
                c = cosine(vi, gather_rows(v, [j]))
                total = c if total is None else add(total, c)
        if total is None:
            return constant(np.zeros((1, 1)))
        return scale(total, 2.0)   # ordered pairs: each unordered pair twice

    def loss(self, out, train_idx):
        ce = ad.masked_cross_entropy(out.logits, self.graph.labels, train_idx)
        if not self.cfg.dis_enabled:
            return ce
        return add(ce, scale(self.discrimination_loss(out), self.cfg.dis_weight))

    def on_validation_improved(self, eval_out, train_idx, epoch):
        """Refresh soft labels, the estimate, and the guidance matrices."""
        soft = _softmax_rows(eval_out.logits.value)
        train_idx = np.asarray(train_idx, dtype=np.int64)
        soft[train_idx] = 0.0
        soft[train_idx, self.graph.labels[train_idx]] = 1.0
        est = estimate_cm(self.graph, soft, epoch=epoch)
        self.set_estimate(est, soft)

    def run_metadata(self):
        g = self.cm.confidence
        return {
            "cm_estimate": self.cm.matrix.m.tolist(),
            "cm_uniform_rows": self.cm.matrix.uniform_rows.tolist(),
            "confidence_stats": {"min": float(g.min()), "mean": float(g.mean()),
                                 "max": float(g.max())},
        }


@dataclass
class ModelOutput:
    logits: object
    fused: object
    proto_fused: object
    proto_logits: object
    reps: list = field(default_factory=list)
    proto_reps: list = field(default_factory=list)


def _softmax_rows(x):
    e = np.exp(x - x.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)
