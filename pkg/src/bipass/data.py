"""Dataset I/O, synthetic benchmark generation, and edge splits.

Dataset directories are plain text (UTF-8, LF, 0-indexed nodes):

    meta.txt      "n=<int>", "d=<int>", "classes=<int>" on three lines
    edges.txt     one undirected edge "u v" per line, u < v, unique
    features.txt  n lines of d space-separated decimal reals
    labels.txt    n lines, integer class or -1 for unlabeled
    masks.txt     n lines, one of train|val|test|none

Checkpoints are binary for bit-exactness: magic "BGCN", a little-endian
u32 format version, then for each parameter a u32 name length, the name
bytes, u32 rows, u32 cols, and the row-major float64 payload.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graphs import Graph
from .rng import stream

MASK_NAMES = ("train", "val", "test", "none")
CHECKPOINT_MAGIC = b"BGCN"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class Dataset:
    graph: Graph
    features: np.ndarray
    labels: np.ndarray
    masks: np.ndarray  # per-node strings from MASK_NAMES
    num_classes: int

    def __post_init__(self):
        n = self.graph.n
        if self.features.shape[0] != n:
            raise ValueError(f"{self.features.shape[0]} feature rows for {n} nodes")
        if self.labels.shape != (n,) or self.masks.shape != (n,):
            raise ValueError("labels and masks must have one entry per node")
        bad = ~np.isin(self.masks, MASK_NAMES)
        if bad.any():
            raise ValueError(f"unknown mask value {self.masks[bad][0]!r}")
        labeled = self.labels >= 0
        if labeled.any() and self.labels[labeled].max() >= self.num_classes:
            raise ValueError("label outside [0, num_classes)")
        if np.any((self.masks != "none") & ~labeled):
            raise ValueError("split nodes must be labeled")

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def mask(self, name: str) -> np.ndarray:
        if name not in MASK_NAMES:
            raise ValueError(f"unknown mask {name!r}")
        return self.masks == name


def _parse_meta(path: Path) -> dict:
    meta = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        key, sep, value = line.partition("=")
        if sep != "=" or key not in ("n", "d", "classes"):
            raise ValueError(f"{path.name}:{lineno}: expected n=/d=/classes=, got {line!r}")
        try:
            meta[key] = int(value)
        except ValueError:
            raise ValueError(f"{path.name}:{lineno}: {value!r} is not an integer") from None
    for key in ("n", "d", "classes"):
        if key not in meta:
            raise ValueError(f"{path.name}: missing {key}=")
    return meta


def load_dataset(directory) -> Dataset:
    """Read and validate a dataset directory; errors carry line numbers."""
    directory = Path(directory)
    for name in ("meta.txt", "edges.txt", "features.txt", "labels.txt", "masks.txt"):
        if not (directory / name).is_file():
            raise FileNotFoundError(f"missing {name} in {directory}")
    meta = _parse_meta(directory / "meta.txt")
    n, d = meta["n"], meta["d"]

    edges, seen = [], set()
    for lineno, line in enumerate((directory / "edges.txt").read_text().splitlines(), 1):
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"edges.txt:{lineno}: expected 'u v', got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise ValueError(f"edges.txt:{lineno}: non-integer endpoint in {line!r}") from None
        if not 0 <= u < v < n:
            raise ValueError(f"edges.txt:{lineno}: edge ({u}, {v}) violates 0 <= u < v < n={n}")
        if (u, v) in seen:
            raise ValueError(f"edges.txt:{lineno}: duplicate edge ({u}, {v})")
        seen.add((u, v))
        edges.append((u, v))

    lines = (directory / "features.txt").read_text().splitlines()
    if len(lines) != n:
        raise ValueError(f"features.txt: {len(lines)} rows, meta says n={n}")
    features = np.empty((n, d))
    for lineno, line in enumerate(lines, 1):
        parts = line.split()
        if len(parts) != d:
            raise ValueError(f"features.txt:{lineno}: {len(parts)} values, meta says d={d}")
        try:
            features[lineno - 1] = [float(p) for p in parts]
        except ValueError:
            raise ValueError(f"features.txt:{lineno}: malformed real number") from None

    lines = (directory / "labels.txt").read_text().splitlines()
    if len(lines) != n:
        raise ValueError(f"labels.txt: {len(lines)} rows, meta says n={n}")
    try:
        labels = np.array([int(line) for line in lines])
    except ValueError:
        raise ValueError("labels.txt: labels must be integers") from None

    lines = (directory / "masks.txt").read_text().splitlines()
    if len(lines) != n:
        raise ValueError(f"masks.txt: {len(lines)} rows, meta says n={n}")
    masks = np.array(lines)

    return Dataset(Graph.from_edges(n, edges), features, labels, masks, meta["classes"])


def save_dataset(ds: Dataset, directory) -> None:
    """Write the five-file text format; floats use round-trip precision."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "meta.txt").write_text(
        f"n={ds.n}\nd={ds.d}\nclasses={ds.num_classes}\n"
    )
    (directory / "edges.txt").write_text(
        "".join(f"{u} {v}\n" for u, v in ds.graph.edges())
    )
    (directory / "features.txt").write_text(
        "".join(" ".join(f"{x:.17g}" for x in row) + "\n" for row in ds.features)
    )
    (directory / "labels.txt").write_text("".join(f"{l}\n" for l in ds.labels))
    (directory / "masks.txt").write_text("".join(f"{m}\n" for m in ds.masks))


def sbm_generate(k: int, per_community: int, p_in: float, p_out: float, d: int,
                 feature_blocks: int, sigma: float, seed: int,
                 mean_scale: float = 1.0,
                 mask_fractions=(0.05, 0.15, 0.80)) -> Dataset:
    """Stochastic block model with a planted feature-correlation structure.

    Nodes split into k equal communities; same-community pairs connect
    with p_in, others with p_out. Feature columns are partitioned into
    `feature_blocks` groups of redundant measurements: every column in a
    group carries the same per-class mean and the same per-node latent
    factor, plus its own independent N(0, sigma^2) noise. Columns inside
    a group are therefore genuinely correlated, and averaging a group
    suppresses noise without washing out the class signal, so a feature
    graph has something real to find. Masks are stratified per community.
    """
    if not (0.0 <= p_out < p_in <= 1.0):
        raise ValueError("need 0 <= p_out < p_in <= 1")
    if k < 2 or per_community < 2 or d < feature_blocks or feature_blocks < 1:
        raise ValueError("invalid sbm shape")
    if abs(sum(mask_fractions) - 1.0) > 1e-9:
        raise ValueError("mask fractions must sum to 1")
    n = k * per_community
    labels = np.repeat(np.arange(k), per_community)

    gen = stream(seed, "sbm", "edges")
    iu, ju = np.triu_indices(n, 1)
    prob = np.where(labels[iu] == labels[ju], p_in, p_out)
    hit = gen.random(iu.size) < prob
    edges = list(zip(iu[hit].tolist(), ju[hit].tolist()))
    graph = Graph.from_edges(n, edges)

    gen = stream(seed, "sbm", "features")
    block_of = np.arange(d) % feature_blocks
    means = gen.normal(0.0, mean_scale, size=(k, feature_blocks))
    latent = gen.standard_normal((n, feature_blocks))
    features = (means[labels][:, block_of] + latent[:, block_of]
                + gen.normal(0.0, sigma, size=(n, d)))

    gen = stream(seed, "sbm", "masks")
    masks = np.full(n, "none", dtype="<U5")
    n_train = max(1, int(round(mask_fractions[0] * per_community)))
    n_val = max(1, int(round(mask_fractions[1] * per_community)))
    for c in range(k):
        members = gen.permutation(np.flatnonzero(labels == c))
        masks[members[:n_train]] = "train"
        masks[members[n_train:n_train + n_val]] = "val"
        masks[members[n_train + n_val:]] = "test"

    return Dataset(graph, features, labels, masks, k)


@dataclass(frozen=True)
class EdgeSplit:
    message_graph: Graph
    train_pos: np.ndarray
    val_pos: np.ndarray
    test_pos: np.ndarray
    val_neg: np.ndarray
    test_neg: np.ndarray


def split_edges(g: Graph, ratios=(0.85, 0.05, 0.10), seed: int = 0) -> EdgeSplit:
    """Partition edges into message/train, val, test positives plus negatives.

    The message graph keeps only the train positives, so held-out edges
    are invisible during propagation. One negative (a uniformly sampled
    non-edge of the full graph) accompanies each val/test positive.
    """
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("ratios must be three non-negative numbers summing to 1")
    edges = np.array(g.edges(), dtype=np.int64).reshape(-1, 2)
    m = len(edges)
    gen = stream(seed, "edge_split")
    order = gen.permutation(m)
    n_val = int(ratios[1] * m)
    n_test = int(ratios[2] * m)
    n_train = m - n_val - n_test
    if n_train < 1 or (ratios[1] > 0 and n_val < 1) or (ratios[2] > 0 and n_test < 1):
        raise ValueError(f"graph with {m} edges is too small for ratios {ratios}")
    train_pos = edges[order[:n_train]]
    val_pos = edges[order[n_train:n_train + n_val]]
    test_pos = edges[order[n_train + n_val:]]

    existing = {(int(u), int(v)) for u, v in edges}
    max_pairs = g.n * (g.n - 1) // 2
    need = n_val + n_test
    if max_pairs - m < need:
        raise ValueError("not enough non-edges to sample negatives")
    negatives, taken = [], set()
    while len(negatives) < need:
        u = int(gen.integers(0, g.n))
        v = int(gen.integers(0, g.n))
        if u == v:
            continue
        if u > v:
            u, v = v, u
        if (u, v) in existing or (u, v) in taken:
            continue
        taken.add((u, v))
        negatives.append((u, v))
    negatives = np.array(negatives, dtype=np.int64)
    return EdgeSplit(
        message_graph=Graph.from_edges(g.n, [tuple(e) for e in train_pos]),
        train_pos=train_pos,
        val_pos=val_pos,
        test_pos=test_pos,
        val_neg=negatives[:n_val],
        test_neg=negatives[n_val:],
    )


def save_checkpoint(params: list, path) -> None:
    """Write layer parameters; names are '<layer>.<name>' in layer order."""
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        for l, layer in enumerate(params):
            for name in sorted(layer):
                full = f"{l}.{name}".encode()
                value = np.ascontiguousarray(layer[name], dtype="<f8")
                if value.ndim != 2:
                    raise ValueError(f"parameter {full!r} is not a matrix")
                fh.write(struct.pack("<I", len(full)))
                fh.write(full)
                fh.write(struct.pack("<II", value.shape[0], value.shape[1]))
                fh.write(value.tobytes())


def load_checkpoint(path) -> list:
    """Read a checkpoint back into the list-of-dicts layer structure."""
    blob = Path(path).read_bytes()
    if blob[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"bad checkpoint magic {blob[:4]!r}")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"checkpoint version {version}, expected {CHECKPOINT_VERSION}")
    offset, layers = 8, {}
    while offset < len(blob):
        try:
            (name_len,) = struct.unpack_from("<I", blob, offset)
            offset += 4
            if offset + name_len > len(blob):
                raise struct.error("name runs past end of file")
            name = blob[offset:offset + name_len].decode()
            offset += name_len
            rows, cols = struct.unpack_from("<II", blob, offset)
            offset += 8
            count = rows * cols
            if offset + 8 * count > len(blob):
                raise struct.error("payload runs past end of file")
            value = np.frombuffer(blob, dtype="<f8", count=count, offset=offset)
            offset += 8 * count
        except (struct.error, UnicodeDecodeError) as exc:
            raise ValueError(f"truncated or corrupt checkpoint: {exc}") from None
        layer_no, _, pname = name.partition(".")
        layers.setdefault(int(layer_no), {})[pname] = value.reshape(rows, cols).copy()
    return [layers[i] for i in sorted(layers)]
