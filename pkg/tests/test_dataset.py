# tests/test_dataset.py
import numpy as np
import pytest

from samples.dataset import LabeledDataset, SamplingScheme, load_csv, load_points, shuffle_for_iid, write_csv, write_points
from utils.errors import DegenerateDataError, IngestionError, SchemaError


def test_load_csv_four_rows(write_rows):
    path = write_rows("x1,x2,label\n0,1,0\n1,2,0\n2,3,1\n3,4,1\n")
    data = load_csv(path)
    assert (data.n, data.dim, data.n0, data.n1) == (4, 2, 2, 2)
    assert data.scheme == SamplingScheme.SEPARATE
    np.testing.assert_array_equal(data.features[:, 1], [1, 2, 3, 4])


def test_label_column_can_sit_anywhere(write_rows):
    path = write_rows("y,a,b\n1,0.5,1.5\n0,2.5,3.5\n")
    data = load_csv(path, label_column="y")
    np.testing.assert_array_equal(data.labels, [1, 0])
    np.testing.assert_array_equal(data.features, [[0.5, 1.5], [2.5, 3.5]])


def test_non_binary_label_is_schema_error(write_rows):
    path = write_rows("x1,label\n0,0\n1,2\n")
    with pytest.raises(SchemaError, match="row 1"):
        load_csv(path)


def test_missing_feature_names_row_and_column(write_rows):
    path = write_rows("x1,x2,label\n0,1,0\n1,NaN,1\n")
    with pytest.raises(IngestionError) as err:
        load_csv(path)
    assert err.value.row == 1
    assert err.value.column == "x2"


def test_empty_cell_is_ingestion_error(write_rows):
    path = write_rows("x1,label\n0,0\n,1\n")
    with pytest.raises(IngestionError) as err:
        load_csv(path)
    assert err.value.row == 1


def test_missing_label_column(write_rows):
    with pytest.raises(SchemaError, match="label column"):
        load_csv(write_rows("x1,x2\n0,1\n"))


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_csv(tmp_path / "absent.csv")


def test_write_then_load_preserves_features(tmp_path):
    rng = np.random.default_rng(0)
    data = LabeledDataset(rng.standard_normal((7, 3)) * 1e5, np.array([0, 1, 0, 1, 1, 0, 0]))
    write_csv(data, tmp_path / "out.csv")
    back = load_csv(tmp_path / "out.csv")
    np.testing.assert_array_equal(back.features, data.features)
    np.testing.assert_array_equal(back.labels, data.labels)


def test_dataset_is_read_only():
    data = LabeledDataset(np.zeros((3, 2)), np.array([0, 1, 1]))
    with pytest.raises(ValueError):
        data.features[0, 0] = 1.0


def test_dataset_rejects_bad_shapes_and_values():
    with pytest.raises(SchemaError):
        LabeledDataset(np.zeros((3, 2)), np.array([0, 1]))
    with pytest.raises(SchemaError):
        LabeledDataset(np.zeros((2, 1)), np.array([0, 3]))
    with pytest.raises(IngestionError):
        LabeledDataset(np.array([[0.0], [np.inf]]), np.array([0, 1]))


def test_require_both_classes():
    with pytest.raises(DegenerateDataError):
        LabeledDataset(np.zeros((3, 1)), np.array([1, 1, 1])).require_both_classes()
    with pytest.raises(DegenerateDataError):
        LabeledDataset(np.zeros((1, 1)), np.array([1])).require_both_classes()


def test_pi1_hat(small_data):
    assert small_data.pi1_hat == 0.5


def test_shuffle_single_row_is_identity():
    data = LabeledDataset(np.array([[1.5, -2.0]]), np.array([1]))
    shuffled = shuffle_for_iid(data, seed=3)
    np.testing.assert_array_equal(shuffled.features, data.features)
    np.testing.assert_array_equal(shuffled.labels, data.labels)


def test_shuffle_keeps_pairs_and_is_deterministic(shifted_data):
    a = shuffle_for_iid(shifted_data, seed=9)
    b = shuffle_for_iid(shifted_data, seed=9)
    np.testing.assert_array_equal(a.features, b.features)
    # Each (feature, label) pair survives the shuffle.
    original = {tuple(row) + (int(y),) for row, y in zip(shifted_data.features, shifted_data.labels)}
    shuffled = {tuple(row) + (int(y),) for row, y in zip(a.features, a.labels)}
    assert original == shuffled


def test_points_round_trip_drops_id(tmp_path):
    points = np.array([[0.1, 0.2], [1.0, -3.0], [2.5, 7.0]])
    write_points(points, tmp_path / "points.csv")
    header = (tmp_path / "points.csv").read_text(encoding="utf-8").splitlines()[0]
    assert header == "point_id,x1,x2"
    np.testing.assert_array_equal(load_points(tmp_path / "points.csv"), points)


def test_load_points_ignores_label_column(write_rows):
    points = load_points(write_rows("x1,label\n1.0,0\n2.0,1\n", name="pts.csv"))
    np.testing.assert_array_equal(points, [[1.0], [2.0]])


def test_load_points_bad_value(write_rows):
    with pytest.raises(IngestionError):
        load_points(write_rows("x1\n1.0\nabc\n", name="pts.csv"))
