"""Graph container and dataset directory IO.

A Graph is an immutable node-classified graph in CSR form. The base
structure never carries self-loops or duplicate entries; operations that
need self-loops add them explicitly. Undirected graphs store both (u,v)
and (v,u).

Dataset directory layout:

    meta.json        {"name", "n_nodes", "n_classes", "d_f", "directed"}
    edges.tsv        u<TAB>v per line, 0-indexed, one line per edge
    labels.tsv       one integer per line (-1 = unlabeled)
    features.tsv     n_nodes lines of d_f floats, or
    features.f32     magic b"GF32", u64-LE rows, u64-LE cols, row-major f32-LE
    splits/split_<k>.json   {"train": [...], "valid": [...], "test": [...]}
"""

import json
import os
import struct
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DataError
from .rng import make_rng

FEATURES_MAGIC = b"GF32"

SPLIT_FRACTIONS = (0.48, 0.32, 0.20)


class Graph:
    """Immutable CSR graph with per-node features and class labels."""

    def __init__(self, indptr, indices, features, labels, n_classes,
                 directed=False, name="graph", validate=True):
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(indices, dtype=np.int64)
        self.features = np.ascontiguousarray(features, dtype=np.float64)
        self.labels = np.ascontiguousarray(labels, dtype=np.int64)
        self.n_classes = int(n_classes)
        self.directed = bool(directed)
        self.name = str(name)
        self.n_nodes = len(self.indptr) - 1
        for arr in (self.indptr, self.indices, self.features, self.labels):
            arr.setflags(write=False)
        self._adj = None
        if validate:
            self._validate()

    def _validate(self):
        n = self.n_nodes
        if n < 0 or self.indptr[0] != 0 or self.indptr[-1] != len(self.indices):
            raise DataError("malformed CSR index pointers")
        if np.any(np.diff(self.indptr) < 0):
            raise DataError("CSR row offsets must be non-decreasing")
        if len(self.indices) and (self.indices.min() < 0 or self.indices.max() >= n):
            raise DataError("edge endpoint out of range")
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise DataError(f"features shape {self.features.shape} does not match {n} nodes")
        if self.labels.shape != (n,):
            raise DataError(f"expected {n} labels, got {self.labels.shape}")
        if self.n_classes < 1:
            raise DataError("n_classes must be >= 1")
        bad = (self.labels < -1) | (self.labels >= self.n_classes)
        if np.any(bad):
            i = int(np.where(bad)[0][0])
            raise DataError(
                f"label {self.labels[i]} at node {i} outside [0, {self.n_classes})")
        # per-row: strictly increasing columns => sorted, no duplicates
        for i in range(n):
            row = self.indices[self.indptr[i]:self.indptr[i + 1]]
            if row.size:
                if np.any(np.diff(row) <= 0):
                    raise DataError(f"row {i} has duplicate or unsorted neighbors")
                if np.any(row == i):
                    raise DataError(f"self-loop stored at node {i}")
        if not self.directed:
            a = self.adjacency()
            if (a != a.T).nnz != 0:
                raise DataError("undirected graph has asymmetric adjacency")

    @property
    def degrees(self):
        """Out-degree per node (== degree for undirected graphs)."""
        return np.diff(self.indptr)

    @property
    def n_edges(self):
        """Edge count as reported: undirected pairs once, directed entries as stored."""
        nnz = len(self.indices)
        return nnz if self.directed else nnz // 2

    @property
    def d_f(self):
        return self.features.shape[1]

    def adjacency(self):
        """Binary adjacency as scipy CSR (cached)."""
        if self._adj is None:
            data = np.ones(len(self.indices), dtype=np.float64)
            self._adj = sp.csr_matrix(
                (data, self.indices.copy(), self.indptr.copy()),
                shape=(self.n_nodes, self.n_nodes))
        return self._adj

    def neighbors(self, i):
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def onehot_labels(self):
        """N x K one-hot label matrix; unlabeled nodes get zero rows."""
        c = np.zeros((self.n_nodes, self.n_classes))
        mask = self.labels >= 0
        c[np.where(mask)[0], self.labels[mask]] = 1.0
        return c

    def with_structure(self, indptr, indices, directed=None):
        """Same nodes/features/labels over a different edge structure."""
        return Graph(indptr, indices, self.features, self.labels, self.n_classes,
                     directed=self.directed if directed is None else directed,
                     name=self.name)

    @classmethod
    def from_edges(cls, n_nodes, edges, features, labels, n_classes,
                   directed=False, name="graph"):
        """Build from an iterable of (u, v) pairs.

        Self-loops are dropped and duplicates collapsed; undirected input is
        symmetrized regardless of which orientation each pair arrives in.
        """
        e = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= n_nodes):
            bad = e[(e < 0).any(axis=1) | (e >= n_nodes).any(axis=1)][0]
            raise DataError(f"edge {tuple(bad)} endpoint outside [0, {n_nodes})")
        e = e[e[:, 0] != e[:, 1]]
        if not directed and len(e):
            e = np.concatenate([e, e[:, ::-1]], axis=0)
        indptr, indices = _edges_to_csr(n_nodes, e)
        return cls(indptr, indices, features, labels, n_classes,
                   directed=directed, name=name)

    def __repr__(self):
        kind = "directed" if self.directed else "undirected"
        return (f"Graph({self.name!r}, n={self.n_nodes}, edges={self.n_edges}, "
                f"K={self.n_classes}, d_f={self.d_f}, {kind})")


def _edges_to_csr(n_nodes, e):
    """Dedup an edge array into sorted CSR (indptr, indices)."""
    if len(e) == 0:
        return np.zeros(n_nodes + 1, dtype=np.int64), np.zeros(0, dtype=np.int64)
    order = np.lexsort((e[:, 1], e[:, 0]))
    e = e[order]
    keep = np.ones(len(e), dtype=bool)
    keep[1:] = np.any(e[1:] != e[:-1], axis=1)
    e = e[keep]
    indptr = np.zeros(n_nodes + 1, dtype=np.int64)
    np.add.at(indptr, e[:, 0] + 1, 1)
    np.cumsum(indptr, out=indptr)
    return indptr, e[:, 1].copy()


def permute_graph(g, perm):
    """Relabel nodes: new node perm[i] is old node i. Returns a new Graph."""
    perm = np.asarray(perm, dtype=np.int64)
    n = g.n_nodes
    if sorted(perm.tolist()) != list(range(n)):
        raise DataError("perm must be a permutation of range(n_nodes)")
    src = np.repeat(np.arange(n), np.diff(g.indptr))
    e = np.stack([perm[src], perm[g.indices]], axis=1)
    indptr, indices = _edges_to_csr(n, e)
    inv = np.empty(n, dtype=np.int64)
    inv[perm] = np.arange(n)
    return Graph(indptr, indices, g.features[inv], g.labels[inv], g.n_classes,
                 directed=g.directed, name=g.name)


# ---------------------------------------------------------------------------
# dataset directory IO

def _read_tsv_ints(path, n_cols):
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t") if "\t" in line else line.split()
            if len(parts) != n_cols:
                raise DataError(f"{path}:{ln}: expected {n_cols} fields, got {len(parts)}")
            try:
                rows.append([int(p) for p in parts])
            except ValueError:
                raise DataError(f"{path}:{ln}: non-integer field in {line!r}") from None
    return np.asarray(rows, dtype=np.int64).reshape(-1, n_cols)


def _read_features_tsv(path):
    try:
        x = np.loadtxt(path, dtype=np.float64, delimiter="\t", ndmin=2)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    return x


def read_features_f32(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != FEATURES_MAGIC:
            raise DataError(f"{path}: bad magic {magic!r}, expected {FEATURES_MAGIC!r}")
        header = fh.read(16)
        if len(header) != 16:
            raise DataError(f"{path}: truncated header")
        rows, cols = struct.unpack("<QQ", header)
        x = np.fromfile(fh, dtype="<f4", count=rows * cols)
    if x.size != rows * cols:
        raise DataError(f"{path}: expected {rows * cols} values, found {x.size}")
    return x.reshape(rows, cols).astype(np.float64)


def write_features_f32(path, x):
    x = np.asarray(x)
    with open(path, "wb") as fh:
        fh.write(FEATURES_MAGIC)
        fh.write(struct.pack("<QQ", x.shape[0], x.shape[1]))
        fh.write(np.ascontiguousarray(x, dtype="<f4").tobytes())


def load_dataset(path):
    """Read a dataset directory into a validated Graph."""
    meta_path = os.path.join(path, "meta.json")
    if not os.path.exists(meta_path):
        raise DataError(f"{meta_path}: not found")
    with open(meta_path, "r", encoding="utf-8") as fh:
        try:
            meta = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{meta_path}: {exc}") from None
    for key in ("name", "n_nodes", "n_classes", "d_f", "directed"):
        if key not in meta:
            raise DataError(f"{meta_path}: missing key {key!r}")
    n, k, d_f = int(meta["n_nodes"]), int(meta["n_classes"]), int(meta["d_f"])

    edges = _read_tsv_ints(os.path.join(path, "edges.tsv"), 2)
    labels = _read_tsv_ints(os.path.join(path, "labels.tsv"), 1).ravel()
    if len(labels) != n:
        raise DataError(f"labels.tsv has {len(labels)} rows, meta says {n}")

    f32 = os.path.join(path, "features.f32")
    tsv = os.path.join(path, "features.tsv")
    if os.path.exists(f32):
        x = read_features_f32(f32)
    elif os.path.exists(tsv):
        x = _read_features_tsv(tsv)
    else:
        raise DataError(f"{path}: neither features.f32 nor features.tsv present")
    if x.shape != (n, d_f):
        raise DataError(f"features shape {x.shape}, meta says ({n}, {d_f})")

    return Graph.from_edges(n, edges, x, labels, k,
                            directed=bool(meta["directed"]), name=meta["name"])


def save_dataset(g, path, features_format="f32"):
    """Write a Graph as a dataset directory (round-trips with load_dataset)."""
    os.makedirs(path, exist_ok=True)
    meta = {"name": g.name, "n_nodes": g.n_nodes, "n_classes": g.n_classes,
            "d_f": g.d_f, "directed": g.directed}
    with open(os.path.join(path, "meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    src = np.repeat(np.arange(g.n_nodes), np.diff(g.indptr))
    pairs = np.stack([src, g.indices], axis=1)
    if not g.directed:
        pairs = pairs[pairs[:, 0] < pairs[:, 1]]
    with open(os.path.join(path, "edges.tsv"), "w", encoding="utf-8") as fh:
        for u, v in pairs:
            fh.write(f"{u}\t{v}\n")
    with open(os.path.join(path, "labels.tsv"), "w", encoding="utf-8") as fh:
        for y in g.labels:
            fh.write(f"{y}\n")
    if features_format == "f32":
        write_features_f32(os.path.join(path, "features.f32"), g.features)
    elif features_format == "tsv":
        np.savetxt(os.path.join(path, "features.tsv"), g.features, delimiter="\t")
    else:
        raise DataError(f"unknown features format {features_format!r}")


# ---------------------------------------------------------------------------
# splits

@dataclass
class Split:
    """Disjoint train/valid/test node index sets."""
    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        self.train = np.asarray(self.train, dtype=np.int64)
        self.valid = np.asarray(self.valid, dtype=np.int64)
        self.test = np.asarray(self.test, dtype=np.int64)
        all_idx = np.concatenate([self.train, self.valid, self.test])
        if len(np.unique(all_idx)) != len(all_idx):
            raise DataError("split parts overlap")

    @property
    def n_total(self):
        return len(self.train) + len(self.valid) + len(self.test)


def generate_splits(g, n_splits, seed):
    """48/32/20 train/valid/test node splits, one Philox stream per split id."""
    n = g.n_nodes
    if n < 10:
        raise DataError(f"need at least 10 nodes to split, got {n}")
    splits = []
    for i in range(n_splits):
        perm = make_rng(seed, "split", i).permutation(n)
        n_train = int(round(SPLIT_FRACTIONS[0] * n))
        n_valid = int(round(SPLIT_FRACTIONS[1] * n))
        splits.append(Split(train=perm[:n_train],
                            valid=perm[n_train:n_train + n_valid],
                            test=perm[n_train + n_valid:]))
    return splits


def save_splits(splits, path):
    os.makedirs(path, exist_ok=True)
    for i, s in enumerate(splits):
        payload = {"train": s.train.tolist(), "valid": s.valid.tolist(),
                   "test": s.test.tolist()}
        with open(os.path.join(path, f"split_{i}.json"), "w", encoding="utf-8") as fh:
            json.dump(payload, fh)
            fh.write("\n")


def load_split(path):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: {exc}") from None
    for key in ("train", "valid", "test"):
        if key not in payload:
            raise DataError(f"{path}: missing key {key!r}")
    return Split(train=payload["train"], valid=payload["valid"], test=payload["test"])


def load_splits(dataset_path):
    """All splits/split_<k>.json under a dataset directory, ordered by k."""
    split_dir = os.path.join(dataset_path, "splits")
    if not os.path.isdir(split_dir):
        raise DataError(f"{split_dir}: not found")
    names = sorted(os.listdir(split_dir))
    out = []
    for name in names:
        if name.startswith("split_") and name.endswith(".json"):
            out.append((int(name[len("split_"):-len(".json")]),
                        load_split(os.path.join(split_dir, name))))
    out.sort(key=lambda t: t[0])
    if not out:
        raise DataError(f"{split_dir}: no split_<k>.json files")
    return [s for _, s in out]
