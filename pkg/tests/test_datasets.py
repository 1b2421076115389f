"""Delimited-text ingestion: detection, validation, label mapping."""

import pytest
from numpy.testing import assert_allclose

from covproj import ConfigError, DatasetFormatError, load_dataset, load_matrix, load_vector


class TestLoadDataset:
    def test_comma_with_header(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,b,label\n1,2,x\n3,4,y\n5,6,x\n")
        data, names = load_dataset(path, "label")
        assert names == ["a", "b"]
        assert data.z.tolist() == [1, 2, 1]
        assert_allclose(data.X, [[1, 2], [3, 4], [5, 6]])

    def test_tab_delimiter_detected(self, tmp_path):
        path = tmp_path / "d.tsv"
        path.write_text("a\tlabel\n1.5\t1\n2.5\t2\n")
        data, _ = load_dataset(path, "label")
        assert_allclose(data.X.ravel(), [1.5, 2.5])

    def test_numeric_labels_sorted_numerically(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,label\n1,10\n2,9\n")
        data, _ = load_dataset(path, "label")
        assert data.z.tolist() == [2, 1]

    def test_nan_rejected_with_line_number(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,label\n1,1\nnan,2\n")
        with pytest.raises(DatasetFormatError) as err:
            load_dataset(path, "label")
        assert "line 3" in str(err.value)

    def test_non_numeric_rejected_with_line_number(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,label\n1,1\n2,2\nfoo,1\n")
        with pytest.raises(DatasetFormatError) as err:
            load_dataset(path, "label")
        assert "line 4" in str(err.value)

    def test_ragged_row_rejected(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,b,label\n1,2,1\n3,1\n")
        with pytest.raises(DatasetFormatError) as err:
            load_dataset(path, "label")
        assert "line 3" in str(err.value)

    def test_label_column_must_exist(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ConfigError):
            load_dataset(path, "label")

    def test_header_required_for_label_selection(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("1,2\n3,4\n")
        with pytest.raises(ConfigError):
            load_dataset(path, "label")

    def test_exactly_two_label_values(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,label\n1,1\n2,2\n3,3\n")
        with pytest.raises(DatasetFormatError):
            load_dataset(path, "label")

    def test_missing_file(self, tmp_path):
        with pytest.raises(DatasetFormatError):
            load_dataset(tmp_path / "absent.csv", "label")


class TestLoadMatrixAndVector:
    def test_matrix_headerless(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("2.0,0.5\n0.5,1.0\n")
        m = load_matrix(path)
        assert_allclose(m.entries, [[2.0, 0.5], [0.5, 1.0]])

    def test_matrix_must_be_square(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("1,0,0\n0,1,0\n")
        from covproj import NotSquareError

        with pytest.raises(NotSquareError):
            load_matrix(path)

    def test_vector_row_or_column(self, tmp_path):
        row = tmp_path / "r.csv"
        row.write_text("1,2,3\n")
        col = tmp_path / "c.csv"
        col.write_text("1\n2\n3\n")
        assert_allclose(load_vector(row), [1, 2, 3])
        assert_allclose(load_vector(col), [1, 2, 3])

    def test_vector_shape_rejected(self, tmp_path):
        path = tmp_path / "v.csv"
        path.write_text("1,2\n3,4\n")
        with pytest.raises(DatasetFormatError):
            load_vector(path)
