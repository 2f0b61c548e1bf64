import numpy as np
import pytest
from src.core.errors import InvalidSeries, SeriesReadError
from src.core.series_io import format_series, read_series, write_series


class TestReadSeries:
    def test_plain_column(self, tmp_path):
        path = tmp_path / 'x.txt'
        path.write_text("1.5\n-2\n3e-1\n")
        np.testing.assert_array_equal(read_series(str(path)).values, [1.5, -2.0, 0.3])

    def test_header_comments_and_extra_columns(self, tmp_path):
        path = tmp_path / 'x.csv'
        path.write_text("# generated\nvalue,weight\n1.0,9\n\n2.0,8\n3.0,7\n")
        np.testing.assert_array_equal(read_series(str(path)).values, [1.0, 2.0, 3.0])

    def test_missing_file(self, tmp_path):
        with pytest.raises(SeriesReadError) as excinfo:
            read_series(str(tmp_path / 'missing.csv'))
        assert excinfo.value.exit_code == 2

    def test_non_numeric_value(self, tmp_path):
        path = tmp_path / 'x.txt'
        path.write_text("1.0\nabc\n3.0\n")
        with pytest.raises(InvalidSeries, match="row 2"):
            read_series(str(path))

    def test_non_finite_value(self, tmp_path):
        path = tmp_path / 'x.txt'
        path.write_text("1.0\ninf\n3.0\n")
        with pytest.raises(InvalidSeries):
            read_series(str(path))

    def test_latin1_bytes(self, tmp_path):
        path = tmp_path / 'x.txt'
        path.write_bytes(b'valor\xe9\n1.0\n2.0\n')
        with pytest.raises(InvalidSeries, match="UTF-8") as excinfo:
            read_series(str(path))
        assert excinfo.value.exit_code == 2

    def test_empty_file(self, tmp_path):
        path = tmp_path / 'x.txt'
        path.write_text("# nothing here\n")
        with pytest.raises(InvalidSeries):
            read_series(str(path))


class TestWriteSeries:
    def test_metadata_header(self):
        text = format_series([1.0, 0.1], {'kind': 'farima', 'd': 0.3})
        assert text.splitlines() == ['# kind: farima', '# d: 0.3', '1.0', '0.1']

    def test_values_survive_exactly(self, tmp_path):
        values = np.random.default_rng(3).standard_normal(50)
        path = tmp_path / 'out' / 'series.txt'
        write_series(str(path), values, {'seed': 3})
        np.testing.assert_array_equal(read_series(str(path)).values, values)
