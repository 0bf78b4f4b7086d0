import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ids_adv import data, mlp
from ids_adv.errors import (
    EmptyDataset,
    EmptySplit,
    InvalidConfig,
    IoFailure,
    MissingLabelColumn,
    RaggedRow,
    ShapeMismatch,
)


def write_csv(tmp_path, text, name="flows.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadCsv:
    def test_basic_parse(self, tmp_path):
        path = write_csv(tmp_path, "f1,f2,Label\n1,2,BENIGN\n3,4,DDoS\n5,6,BENIGN\n")
        table = data.load_csv(path, "Label")
        assert table.header == ["f1", "f2", "Label"]
        assert table.n_rows == 3
        assert table.rows[1] == ["3", "4", "DDoS"]
        assert table.label_column == "Label"

    def test_missing_label_column(self, tmp_path):
        path = write_csv(tmp_path, "f1,f2,Class\n1,2,BENIGN\n")
        with pytest.raises(MissingLabelColumn):
            data.load_csv(path, "Label")

    def test_ragged_row(self, tmp_path):
        path = write_csv(tmp_path, "f1,f2,Label\n1,2,BENIGN\n3,4\n")
        with pytest.raises(RaggedRow):
            data.load_csv(path, "Label")

    def test_io_failure(self, tmp_path):
        with pytest.raises(IoFailure):
            data.load_csv(tmp_path / "absent.csv", "Label")

    def test_header_whitespace_stripped(self, tmp_path):
        # flow exporters pad header names inconsistently
        path = write_csv(tmp_path, " f1, Label\n1,BENIGN\n")
        table = data.load_csv(path, "Label")
        assert table.header == ["f1", "Label"]


class TestClean:
    def test_drops_infinity(self, tmp_path):
        path = write_csv(
            tmp_path, "rate,Label\nInfinity,DDoS\n1.5,BENIGN\n-Infinity,DDoS\nNaN,DDoS\n,DDoS\n"
        )
        table = data.clean(data.load_csv(path, "Label"))
        assert table.n_rows == 1
        assert table.rows[0][0] == "1.5"

    def test_identity_on_finite(self, tmp_path):
        path = write_csv(tmp_path, "f1,f2,Label\n1,2,BENIGN\n3,4e-2,DDoS\n")
        original = data.load_csv(path, "Label")
        cleaned = data.clean(original)
        assert cleaned.rows == original.rows

    def test_all_rows_bad(self, tmp_path):
        path = write_csv(tmp_path, "f1,Label\nNaN,BENIGN\nNaN,DDoS\n")
        with pytest.raises(EmptyDataset):
            data.clean(data.load_csv(path, "Label"))

    def test_non_numeric_token_dropped(self, tmp_path):
        path = write_csv(tmp_path, "f1,f2,Label\n1,2,BENIGN\noops,3,DDoS\n")
        table = data.clean(data.load_csv(path, "Label"))
        assert table.n_rows == 1

    def test_label_column_exempt(self, tmp_path):
        # labels are text; only feature cells disqualify a row
        path = write_csv(tmp_path, "f1,Label\n1,DoS Hulk\n2,BENIGN\n")
        table = data.clean(data.load_csv(path, "Label"))
        assert table.n_rows == 2


class TestEncodeLabels:
    def test_definitions(self, tmp_path):
        path = write_csv(tmp_path, "f1,Label\n1,BENIGN\n2,DDoS\n3, benign \n")
        table = data.load_csv(path, "Label")
        assert data.encode_labels(table).tolist() == [0, 1, 0]

    def test_custom_benign_token(self, tmp_path):
        path = write_csv(tmp_path, "f1,Label\n1,normal\n2,attack\n")
        table = data.load_csv(path, "Label")
        assert data.encode_labels(table, benign_token="Normal").tolist() == [0, 1]

    def test_build_dataset(self, tmp_path):
        path = write_csv(tmp_path, "f1,f2,Label\n1,2,BENIGN\n3,4,DDoS\n")
        ds = data.build_dataset(data.load_csv(path, "Label"))
        assert ds.X.tolist() == [[1.0, 2.0], [3.0, 4.0]]
        assert ds.y.tolist() == [0, 1]
        assert ds.feature_names == ["f1", "f2"]

    @given(st.lists(st.text(min_size=0, max_size=12), min_size=1, max_size=20))
    def test_labels_always_binary(self, tokens):
        table = data.RawTable(
            header=["f1", "Label"],
            rows=[["1.0", tok] for tok in tokens],
            label_column="Label",
        )
        labels = data.encode_labels(table, benign_token="BENIGN")
        assert set(labels.tolist()) <= {0, 1}
        for tok, lab in zip(tokens, labels):
            assert lab == (0 if tok.strip().casefold() == "benign" else 1)


class TestScaleMinmax:
    def test_fit_column(self):
        X = np.array([[0.0], [5.0], [10.0]])
        out, params = data.scale_minmax(X)
        assert out.ravel().tolist() == [0.0, 0.5, 1.0]
        assert params.minimum[0] == 0.0 and params.maximum[0] == 10.0

    def test_constant_column(self):
        out, _ = data.scale_minmax(np.array([[7.0], [7.0]]))
        assert out.ravel().tolist() == [0.0, 0.0]

    def test_transform_clips(self):
        _, params = data.scale_minmax(np.array([[0.0], [10.0]]))
        out, _ = data.scale_minmax(np.array([[12.0]]), params)
        assert out[0, 0] == 1.0

    def test_shape_mismatch(self):
        _, params = data.scale_minmax(np.array([[0.0, 1.0], [1.0, 2.0]]))
        with pytest.raises(ShapeMismatch):
            data.scale_minmax(np.array([[1.0]]), params)

    @given(
        st.lists(
            st.lists(st.floats(-1e6, 1e6), min_size=3, max_size=3),
            min_size=1,
            max_size=20,
        )
    )
    def test_fit_output_in_unit_box_and_idempotent(self, rows):
        X = np.array(rows)
        out, params = data.scale_minmax(X)
        assert np.all(out >= 0.0) and np.all(out <= 1.0)
        again, _ = data.scale_minmax(X, params)
        assert np.array_equal(out, again)


class TestSplit:
    def test_sizes(self):
        ds = data.synth_generate(50, 3, 1.0, seed=0)  # 100 rows
        tr, va, te = data.split(ds, data.SplitSpec(0.6, 0.2, 0.2, seed=42))
        assert (tr.n, va.n, te.n) == (60, 20, 20)

    def test_deterministic(self):
        ds = data.synth_generate(50, 3, 1.0, seed=0)
        spec = data.SplitSpec(0.6, 0.2, 0.2, seed=42)
        a = data.split(ds, spec)
        b = data.split(ds, spec)
        for part_a, part_b in zip(a, b):
            assert np.array_equal(part_a.X, part_b.X)
            assert np.array_equal(part_a.y, part_b.y)

    def test_partition_is_disjoint_and_exhaustive(self):
        ds = data.synth_generate(40, 4, 2.0, seed=3)
        # tag each row uniquely through an extra feature value
        ds.X[:, 0] = np.arange(ds.n) / ds.n
        tr, va, te = data.split(ds, data.SplitSpec(0.5, 0.25, 0.25, seed=9))
        seen = np.concatenate([tr.X[:, 0], va.X[:, 0], te.X[:, 0]])
        assert len(np.unique(seen)) == ds.n

    def test_carries_metadata(self):
        ds = data.synth_generate(20, 3, 1.0, seed=1)
        tr, va, te = data.split(ds, data.SplitSpec(0.5, 0.25, 0.25, seed=2))
        for part in (tr, va, te):
            assert part.feature_names == ds.feature_names
            assert part.scaler is ds.scaler

    def test_empty_split(self):
        ds = data.synth_generate(1, 3, 1.0, seed=1)  # 2 rows
        with pytest.raises(EmptySplit):
            data.split(ds, data.SplitSpec(0.5, 0.25, 0.25, seed=0))

    def test_bad_fractions(self):
        with pytest.raises(EmptySplit):
            data.SplitSpec(0.7, 0.3, 0.0)
        with pytest.raises(InvalidConfig):
            data.SplitSpec(0.5, 0.3, 0.3)


class TestSynthGenerate:
    def test_bitwise_deterministic(self):
        a = data.synth_generate(500, 10, 4.0, seed=7)
        b = data.synth_generate(500, 10, 4.0, seed=7)
        assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)

    def test_scaled_and_labeled(self):
        ds = data.synth_generate(100, 5, 3.0, seed=2)
        assert ds.X.min() >= 0.0 and ds.X.max() <= 1.0
        assert set(np.unique(ds.y)) == {0, 1}
        assert ds.scaler is not None and ds.scaler.n_features == 5

    def test_zero_separation_untrainable(self):
        # identically distributed classes: accuracy stays near chance
        ds = data.synth_generate(300, 10, 0.0, seed=5)
        tr, va, te = data.split(ds, data.SplitSpec(0.6, 0.2, 0.2, seed=6))
        model, _ = mlp.train(
            mlp.init([10, 20, 1], seed=1),
            tr,
            mlp.TrainConfig(learning_rate=0.003, epochs=15, batch_size=64, seed=2),
            validation=va,
        )
        acc = float(np.mean(mlp.predict(model, te.X) == te.y))
        assert 0.4 <= acc <= 0.6

    def test_wide_separation_linearly_separable(self):
        pytest.importorskip("sklearn")
        from sklearn.linear_model import LogisticRegression

        ds = data.synth_generate(300, 10, 6.0, seed=8)
        probe = LogisticRegression(max_iter=1000).fit(ds.X, ds.y)
        assert probe.score(ds.X, ds.y) >= 0.99

    def test_validation(self):
        with pytest.raises(InvalidConfig):
            data.synth_generate(0, 10, 1.0, seed=0)
        with pytest.raises(InvalidConfig):
            data.synth_generate(10, 1, 1.0, seed=0)


class TestPipelineInvariant:
    def test_clean_scale_unit_box(self, tmp_path):
        rng = np.random.default_rng(4)
        lines = ["a,b,Label"]
        for i in range(50):
            cell = "Infinity" if i % 7 == 0 else f"{rng.normal():.6f}"
            lines.append(f"{cell},{rng.uniform(-5, 5):.6f},{'BENIGN' if i % 2 else 'DoS'}")
        path = write_csv(tmp_path, "\n".join(lines) + "\n")
        table = data.clean(data.load_csv(path, "Label"))
        ds = data.build_dataset(table)
        scaled, _ = data.scale_minmax(ds.X)
        assert np.isfinite(scaled).all()
        assert scaled.min() >= 0.0 and scaled.max() <= 1.0
