"""Conversion contract tests on small synthesized shard bundles."""

import pickle

import numpy as np
import pytest
import scipy.sparse as sp

from planetoid_converter.cli import main
from planetoid_converter.convert import EXPECTED_STATS, convert, load_bundle, verify

OUT_FILES = ("meta.txt", "edges.txt", "features.txt", "labels.txt", "masks.txt")


def onehot(labels, classes):
    return np.eye(classes, dtype=int)[list(labels)]


# Ten nodes: ids 0..5 are the non-test block (first 2 train, rest val),
# ids 6, 7, 9 are listed test nodes (in scrambled file order), id 8 is an
# unlisted hole in the test block. Feature rows encode their node id so
# placement is checkable. The graph carries a duplicate entry (0-1), a
# self-loop (2-2) and a one-directional edge (3-4).
DEFAULTS = dict(
    allx=np.array([[i, i + 0.5, 2.0 * i, 1.0] for i in range(6)]),
    ally=onehot([0, 1, 2, 0, 1, 2], 3),
    tx=np.array([[100.0 + t, float(t), 0.0, 5.0] for t in (9, 6, 7)]),
    ty=onehot([2, 0, 1], 3),
    n_train=2,
    graph={0: [1, 1, 2], 1: [0], 2: [0, 2], 3: [4], 6: [9], 8: [], 9: [6]},
    test_index=[9, 6, 7],
)
TOY_STATS = (10, 4, 4, 3)


def write_raw(raw_dir, name="toynet", **overrides):
    """Write one synthetic shard bundle the way the upstream files are laid out."""
    parts = {**DEFAULTS, **overrides}
    raw_dir.mkdir(parents=True, exist_ok=True)
    shards = {
        "x": sp.csr_matrix(parts["allx"][: parts["n_train"]]),
        "y": parts["ally"][: parts["n_train"]],
        "tx": sp.csr_matrix(parts["tx"]),
        "ty": parts["ty"],
        "allx": sp.csr_matrix(parts["allx"]),
        "ally": parts["ally"],
        "graph": parts["graph"],
    }
    for shard, obj in shards.items():
        with (raw_dir / f"ind.{name}.{shard}").open("wb") as fh:
            pickle.dump(obj, fh, protocol=2)  # the upstream files are python2 pickles
    (raw_dir / f"ind.{name}.test.index").write_text(
        "".join(f"{i}\n" for i in parts["test_index"]))
    return raw_dir


@pytest.fixture
def converted(tmp_path):
    raw = write_raw(tmp_path / "raw")
    return convert(raw, "toynet", tmp_path / "out")


class TestConvert:
    def test_rows_placed_at_listed_ids(self, converted):
        feats = np.array([[float(v) for v in line.split()]
                          for line in (converted / "features.txt").read_text().splitlines()])
        assert feats.shape == (10, 4)
        np.testing.assert_array_equal(feats[:6], DEFAULTS["allx"])
        np.testing.assert_array_equal(feats[9], DEFAULTS["tx"][0])
        np.testing.assert_array_equal(feats[6], DEFAULTS["tx"][1])
        np.testing.assert_array_equal(feats[7], DEFAULTS["tx"][2])
        np.testing.assert_array_equal(feats[8], np.zeros(4))

    def test_labels_follow_rows_and_holes_get_minus_one(self, converted):
        labels = [int(line) for line in (converted / "labels.txt").read_text().splitlines()]
        assert labels == [0, 1, 2, 0, 1, 2, 0, 1, -1, 2]

    def test_masks_train_val_test_none(self, converted):
        masks = (converted / "masks.txt").read_text().splitlines()
        assert masks == ["train", "train", "val", "val", "val", "val",
                         "test", "test", "none", "test"]

    def test_edges_deduped_symmetrized_sorted(self, converted):
        assert (converted / "edges.txt").read_text().splitlines() == \
            ["0 1", "0 2", "3 4", "6 9"]

    def test_meta_counts(self, converted):
        assert (converted / "meta.txt").read_text() == "n=10\nd=4\nclasses=3\n"

    def test_reconversion_is_byte_identical(self, tmp_path):
        raw = write_raw(tmp_path / "raw")
        first = convert(raw, "toynet", tmp_path / "a")
        second = convert(raw, "toynet", tmp_path / "b")
        for name in OUT_FILES:
            assert (first / name).read_bytes() == (second / name).read_bytes()

    def test_round_trip_loads_in_the_consumer(self, converted):
        data = pytest.importorskip(
            "bipass.data", reason="consumer package not installed here")
        ds = data.load_dataset(converted)
        assert (ds.n, ds.graph.n_edges, ds.d, ds.num_classes) == TOY_STATS
        assert ds.labels[8] == -1 and ds.masks[8] == "none"


class TestVerify:
    def test_ok_report_counts_the_hole(self, converted):
        report = verify(converted, TOY_STATS)
        assert report.ok
        assert report.found == TOY_STATS
        assert report.isolated == 1
        assert any("isolated" in line for line in report.lines())

    def test_full_span_index_leaves_no_holes(self, tmp_path):
        raw = write_raw(
            tmp_path / "raw",
            tx=np.array([[100.0 + t, float(t), 0.0, 5.0] for t in (8, 6, 9, 7)]),
            ty=onehot([0, 1, 2, 0], 3),
            test_index=[8, 6, 9, 7],
        )
        out = convert(raw, "toynet", tmp_path / "out")
        report = verify(out, TOY_STATS)
        assert report.ok and report.isolated == 0
        masks = (out / "masks.txt").read_text().splitlines()
        assert masks.count("none") == 0 and masks.count("test") == 4

    def test_tampered_edge_file_is_a_count_mismatch(self, converted):
        lines = (converted / "edges.txt").read_text().splitlines()
        (converted / "edges.txt").write_text("".join(f"{l}\n" for l in lines[:-1]))
        report = verify(converted, TOY_STATS)
        assert not report.ok
        assert any(m.startswith("edge count") for m in report.mismatches)
        assert "MISMATCH" in "\n".join(report.lines())

    def test_file_disagreement_is_reported_not_raised(self, converted):
        lines = (converted / "labels.txt").read_text().splitlines()
        (converted / "labels.txt").write_text("".join(f"{l}\n" for l in lines[:-1]))
        report = verify(converted, TOY_STATS)
        assert not report.ok
        assert any("labels.txt rows" in m for m in report.mismatches)

    def test_published_counts_table(self):
        assert sorted(EXPECTED_STATS) == ["citeseer", "cora", "pubmed"]
        assert EXPECTED_STATS["cora"] == (2708, 5278, 1433, 7)
        assert EXPECTED_STATS["citeseer"] == (3327, 4552, 3703, 6)
        assert EXPECTED_STATS["pubmed"] == (19717, 44324, 500, 3)


class TestBundleValidation:
    def test_missing_shard_names_the_file(self, tmp_path):
        raw = write_raw(tmp_path / "raw")
        (raw / "ind.toynet.allx").unlink()
        with pytest.raises(FileNotFoundError, match="ind.toynet.allx"):
            load_bundle(raw, "toynet")

    def test_missing_test_index(self, tmp_path):
        raw = write_raw(tmp_path / "raw")
        (raw / "ind.toynet.test.index").unlink()
        with pytest.raises(FileNotFoundError, match="test.index"):
            load_bundle(raw, "toynet")

    def test_non_integer_test_index(self, tmp_path):
        raw = write_raw(tmp_path / "raw")
        (raw / "ind.toynet.test.index").write_text("9\nsix\n7\n")
        with pytest.raises(ValueError, match="must be integers"):
            load_bundle(raw, "toynet")

    def test_feature_width_disagreement(self, tmp_path):
        raw = write_raw(tmp_path / "raw", tx=np.ones((3, 5)))
        with pytest.raises(ValueError, match="feature shards disagree"):
            load_bundle(raw, "toynet")

    def test_label_width_disagreement(self, tmp_path):
        raw = write_raw(tmp_path / "raw", ty=onehot([2, 0, 1], 4))
        with pytest.raises(ValueError, match="label shards disagree"):
            load_bundle(raw, "toynet")

    def test_index_count_must_match_tx_rows(self, tmp_path):
        raw = write_raw(tmp_path / "raw", test_index=[9, 6])
        with pytest.raises(ValueError, match="test indices for"):
            load_bundle(raw, "toynet")

    def test_duplicate_test_index(self, tmp_path):
        raw = write_raw(tmp_path / "raw", test_index=[9, 6, 6])
        with pytest.raises(ValueError, match="duplicate"):
            load_bundle(raw, "toynet")

    def test_index_inside_the_non_test_block(self, tmp_path):
        raw = write_raw(tmp_path / "raw", test_index=[9, 6, 3])
        with pytest.raises(ValueError, match="non-test block"):
            load_bundle(raw, "toynet")

    def test_empty_test_index(self, tmp_path):
        raw = write_raw(tmp_path / "raw", tx=np.zeros((0, 4)),
                        ty=np.zeros((0, 3), dtype=int), test_index=[])
        with pytest.raises(ValueError, match="empty test index"):
            load_bundle(raw, "toynet")

    def test_x_must_be_a_prefix_of_allx(self, tmp_path):
        raw = write_raw(tmp_path / "raw")
        with (raw / "ind.toynet.x").open("wb") as fh:
            pickle.dump(sp.csr_matrix(np.zeros((7, 4))), fh, protocol=2)
        with (raw / "ind.toynet.y").open("wb") as fh:
            pickle.dump(onehot([0] * 7, 3), fh, protocol=2)
        with pytest.raises(ValueError, match="prefix of allx"):
            load_bundle(raw, "toynet")

    def test_out_of_range_graph_edge(self, tmp_path):
        raw = write_raw(tmp_path / "raw", graph={0: [12]})
        with pytest.raises(ValueError, match="outside"):
            convert(raw, "toynet", tmp_path / "out")


class TestCli:
    def test_convert_success(self, tmp_path, capsys):
        raw = write_raw(tmp_path / "raw")
        assert main([str(raw), "toynet", str(tmp_path / "out")]) == 0
        printed = capsys.readouterr().out
        assert "converted toynet" in printed
        assert "no published counts" in printed
        for name in OUT_FILES:
            assert (tmp_path / "out" / name).is_file()

    def test_missing_raw_dir_exits_nonzero(self, tmp_path, capsys):
        assert main([str(tmp_path / "nope"), "toynet", str(tmp_path / "out")]) == 1
        assert capsys.readouterr().err.startswith("error:")

    def test_known_name_with_toy_counts_fails_the_check(self, tmp_path, capsys):
        raw = write_raw(tmp_path / "raw", name="cora")
        assert main([str(raw), "cora", str(tmp_path / "out")]) == 1
        captured = capsys.readouterr()
        assert "MISMATCH" in captured.out
        assert "published counts" in captured.err
