"""Rebuild citation benchmarks from the upstream pickled shard format.

The upstream distribution ships each dataset as eight files:

    ind.<name>.x           csr matrix, features of the labeled training nodes
    ind.<name>.y           one-hot labels for x
    ind.<name>.allx        csr matrix, features of every non-test node (x is its prefix)
    ind.<name>.ally        one-hot labels for allx
    ind.<name>.tx          csr matrix, features of the listed test nodes
    ind.<name>.ty          one-hot labels for tx
    ind.<name>.graph       adjacency dict {node: [neighbor, ...]}
    ind.<name>.test.index  text file, one test node id per line

Node ids 0 .. allx_rows-1 form the non-test block; the test block runs
from there through max(test index). tx/ty rows appear in the order the
index file lists them, so each row is placed at its listed id. Ids
inside the test block that the index file never lists (citeseer has
fifteen) have no feature or label row anywhere in the shards; they are
emitted as zero-filled, unlabeled, maskless nodes so the graph keeps
its full node count.

Output is the five-file text dataset directory: meta.txt (n=/d=/classes=),
edges.txt (one "u v" per undirected edge, u < v, sorted), features.txt
(one whitespace-separated row per node, round-trip float precision),
labels.txt (integer per node, -1 for unlabeled), masks.txt
(train/val/test/none per node). Conversion is deterministic: the same
shards always produce byte-identical files.
"""

from __future__ import annotations

import pickle
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

PICKLED_SHARDS = ("x", "y", "tx", "ty", "allx", "ally", "graph")

# Standard split sizes: the first len(y) nodes train, the next 500 validate.
VAL_SIZE = 500

# name -> (nodes, undirected edges, feature dim, classes), the published counts
EXPECTED_STATS = {
    "cora": (2708, 5278, 1433, 7),
    "citeseer": (3327, 4552, 3703, 6),
    "pubmed": (19717, 44324, 500, 3),
}


def _dense(mat) -> np.ndarray:
    if sp.issparse(mat):
        return mat.toarray().astype(float)
    return np.asarray(mat, dtype=float)


@dataclass(frozen=True)
class RawPlanetoidBundle:
    """The eight upstream shards of one dataset, dimension-checked."""

    x: np.ndarray
    y: np.ndarray
    tx: np.ndarray
    ty: np.ndarray
    allx: np.ndarray
    ally: np.ndarray
    graph: dict
    test_index: np.ndarray

    def __post_init__(self):
        for shard in ("x", "y", "tx", "ty", "allx", "ally"):
            if getattr(self, shard).ndim != 2:
                raise ValueError(f"shard {shard} must be 2-d")
        if {self.x.shape[1], self.tx.shape[1]} != {self.allx.shape[1]}:
            raise ValueError(
                "feature shards disagree on width: "
                f"x {self.x.shape}, tx {self.tx.shape}, allx {self.allx.shape}")
        if {self.y.shape[1], self.ty.shape[1]} != {self.ally.shape[1]}:
            raise ValueError(
                "label shards disagree on width: "
                f"y {self.y.shape}, ty {self.ty.shape}, ally {self.ally.shape}")
        for feat, lab in (("x", "y"), ("tx", "ty"), ("allx", "ally")):
            if getattr(self, feat).shape[0] != getattr(self, lab).shape[0]:
                raise ValueError(f"{feat} and {lab} disagree on row count")
        if self.x.shape[0] > self.allx.shape[0]:
            raise ValueError("x must be a prefix of allx")
        idx = self.test_index
        if idx.size == 0:
            raise ValueError("empty test index")
        if idx.size != self.tx.shape[0]:
            raise ValueError(f"{idx.size} test indices for {self.tx.shape[0]} tx rows")
        if np.unique(idx).size != idx.size:
            raise ValueError("duplicate test indices")
        if int(idx.min()) < self.allx.shape[0]:
            raise ValueError(
                f"test index {int(idx.min())} falls inside the non-test block "
                f"(allx has {self.allx.shape[0]} rows)")

    @property
    def n(self) -> int:
        """Total nodes: the non-test block plus the test block it precedes."""
        return int(self.test_index.max()) + 1


def load_bundle(raw_dir, name: str) -> RawPlanetoidBundle:
    """Read and validate the ind.<name>.* shards under raw_dir.

    Missing files raise FileNotFoundError naming the shard; shards whose
    dimensions disagree raise ValueError. Pickles are decoded with
    latin1 so the original python2 serializations load unchanged.
    """
    raw_dir = Path(raw_dir)
    shards = {}
    for shard in PICKLED_SHARDS:
        path = raw_dir / f"ind.{name}.{shard}"
        if not path.is_file():
            raise FileNotFoundError(f"missing shard {path.name} in {raw_dir}")
        with path.open("rb") as fh:
            shards[shard] = pickle.load(fh, encoding="latin1")
    index_path = raw_dir / f"ind.{name}.test.index"
    if not index_path.is_file():
        raise FileNotFoundError(f"missing shard {index_path.name} in {raw_dir}")
    try:
        test_index = np.array([int(tok) for tok in index_path.read_text().split()], dtype=int)
    except ValueError:
        raise ValueError(f"{index_path.name}: test indices must be integers") from None
    return RawPlanetoidBundle(
        x=_dense(shards["x"]),
        y=np.asarray(shards["y"]),
        tx=_dense(shards["tx"]),
        ty=np.asarray(shards["ty"]),
        allx=_dense(shards["allx"]),
        ally=np.asarray(shards["ally"]),
        graph=dict(shards["graph"]),
        test_index=test_index,
    )


def _assemble(bundle: RawPlanetoidBundle):
    """Place every row at its node id and derive labels, masks, and edges."""
    n, n_known = bundle.n, bundle.allx.shape[0]
    order = bundle.test_index  # tx/ty rows follow the index-file order

    features = np.zeros((n, bundle.allx.shape[1]))
    onehot = np.zeros((n, bundle.ally.shape[1]))
    features[:n_known] = bundle.allx
    onehot[:n_known] = bundle.ally
    features[order] = bundle.tx
    onehot[order] = bundle.ty

    # Unlisted test-block ids keep all-zero one-hot rows: label them -1.
    labels = np.where(onehot.any(axis=1), onehot.argmax(axis=1), -1)

    masks = np.full(n, "none", dtype=object)
    n_train = bundle.y.shape[0]
    masks[:n_train] = "train"
    masks[n_train:min(n_train + VAL_SIZE, n_known)] = "val"
    masks[order] = "test"

    pairs = set()
    for u, neighbors in bundle.graph.items():
        for v in neighbors:
            a, b = int(u), int(v)
            if not (0 <= a < n and 0 <= b < n):
                raise ValueError(f"graph edge ({a}, {b}) outside 0..{n - 1}")
            if a != b:
                pairs.add((a, b) if a < b else (b, a))

    isolated = n - n_known - order.size
    return features, labels, masks, sorted(pairs), isolated


def convert(raw_dir, name: str, out_dir) -> Path:
    """Convert the ind.<name>.* shards into a text dataset directory.

    Writes meta.txt, edges.txt, features.txt, labels.txt and masks.txt
    into out_dir (created if needed) and returns out_dir. Edges are
    symmetrized, deduplicated, stripped of self-loops, and listed once
    each with u < v.
    """
    bundle = load_bundle(raw_dir, name)
    features, labels, masks, edges, _ = _assemble(bundle)
    n, d = features.shape

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "meta.txt").write_text(f"n={n}\nd={d}\nclasses={bundle.ally.shape[1]}\n")
    (out_dir / "edges.txt").write_text("".join(f"{u} {v}\n" for u, v in edges))
    (out_dir / "features.txt").write_text(
        "".join(" ".join(f"{value:.17g}" for value in row) + "\n" for row in features))
    (out_dir / "labels.txt").write_text("".join(f"{label}\n" for label in labels))
    (out_dir / "masks.txt").write_text("".join(f"{mask}\n" for mask in masks))
    return out_dir


@dataclass(frozen=True)
class VerifyReport:
    """Outcome of checking a converted directory against known counts."""

    found: tuple        # (nodes, edges, features, classes) measured from the files
    expected: tuple
    isolated: int       # zero-filled rows with no label and no split: the unlisted ids
    mismatches: tuple   # human-readable differences, empty when everything agrees

    @property
    def ok(self) -> bool:
        return not self.mismatches

    def lines(self) -> list[str]:
        out = []
        for what, got, want in zip(("nodes", "edges", "features", "classes"),
                                   self.found, self.expected):
            flag = "" if got == want else "  <-- MISMATCH"
            out.append(f"{what}: found {got}, expected {want}{flag}")
        out.append(f"isolated zero-filled rows: {self.isolated}")
        return out


def verify(out_dir, expected_stats) -> VerifyReport:
    """Measure node/edge/feature/class counts from a converted directory.

    expected_stats is (nodes, edges, features, classes), typically an
    EXPECTED_STATS entry. Counts are measured from the data files
    themselves, so a tampered file shows up as a mismatch even when
    meta.txt still carries the original numbers; internal disagreements
    between the files are reported as mismatches too.
    """
    out_dir = Path(out_dir)
    meta = {}
    for line in (out_dir / "meta.txt").read_text().splitlines():
        key, _, value = line.partition("=")
        meta[key] = int(value)
    edge_lines = (out_dir / "edges.txt").read_text().splitlines()
    feature_lines = (out_dir / "features.txt").read_text().splitlines()
    labels = [int(line) for line in (out_dir / "labels.txt").read_text().splitlines()]
    mask_lines = (out_dir / "masks.txt").read_text().splitlines()

    widths = {len(line.split()) for line in feature_lines}
    found = (
        len(feature_lines),
        len(edge_lines),
        widths.pop() if len(widths) == 1 else -1,
        max(labels, default=-1) + 1,
    )

    mismatches = []
    for what, got, want in zip(("node count", "edge count", "feature count", "class count"),
                               found, tuple(expected_stats)):
        if got != want:
            mismatches.append(f"{what}: found {got}, expected {want}")
    consistency = (
        ("labels.txt rows", len(labels), found[0]),
        ("masks.txt rows", len(mask_lines), found[0]),
        ("meta.txt n", meta.get("n"), found[0]),
        ("meta.txt d", meta.get("d"), found[2]),
        ("meta.txt classes", meta.get("classes"), found[3]),
    )
    for what, got, want in consistency:
        if got != want:
            mismatches.append(f"{what}: {got} disagrees with measured {want}")

    isolated = sum(
        mask == "none" and label == -1 and set(line.split()) == {"0"}
        for mask, label, line in zip(mask_lines, labels, feature_lines)
    )
    return VerifyReport(found, tuple(expected_stats), isolated, tuple(mismatches))
