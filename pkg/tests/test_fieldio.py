"""Tests for field and profile CSV files."""

import json

import numpy as np
import pytest

from macorner.errors import FieldFormatError
from macorner.fieldio import meta_path_for, read_field, write_field, write_profile
from macorner.model import Q_HALF
from macorner.types import GridShape
from tests.conftest import make_grid, sample_quadratic


@pytest.fixture
def field_csv(tmp_path):
    """A sampled q with its sidecar on disk."""
    path = tmp_path / "field.csv"
    write_field(sample_quadratic(Q_HALF, make_grid(R=1.0), c=0.75, t=0.25), path)
    return path


class TestWriteField:
    """Tests for write_field."""

    def test_writes_csv_and_sidecar(self, tmp_path):
        """Both files exist and the CSV starts with the header."""
        paths = write_field(sample_quadratic(Q_HALF), tmp_path / "out" / "u.csv")
        assert [p.name for p in paths] == ["u.csv", "u.meta.json"]
        assert paths[0].read_text().splitlines()[0] == "x1,x2,u"

    def test_sidecar_uses_lambda_key(self, tmp_path):
        """The rescaling factor is stored under "lambda"."""
        field = sample_quadratic(Q_HALF, lam=0.25)
        _, meta_path = write_field(field, tmp_path / "u.csv")
        meta = json.loads(meta_path.read_text())
        assert meta["lambda"] == 0.25
        assert "report_id" not in meta

    def test_sidecar_always_has_c_and_t(self, tmp_path):
        """A field without c or t still writes both keys as null."""
        _, meta_path = write_field(sample_quadratic(Q_HALF), tmp_path / "u.csv")
        meta = json.loads(meta_path.read_text())
        assert meta["c"] is None
        assert meta["t"] is None
        assert read_field(tmp_path / "u.csv").meta.c is None

    def test_sidecar_records_c_and_t(self, field_csv):
        """Known values of c and t are written as numbers."""
        meta = json.loads(meta_path_for(field_csv).read_text())
        assert meta["c"] == 0.75
        assert meta["t"] == 0.25

    def test_only_active_nodes(self, tmp_path):
        """Exterior nodes of a quarter disc are not written."""
        grid = make_grid(R=1.0, shape=GridShape.QUARTER_DISC)
        path, _ = write_field(sample_quadratic(Q_HALF, grid), tmp_path / "u.csv")
        rows = path.read_text().splitlines()[1:]
        assert len(rows) == int(grid.active_mask.sum())


class TestReadField:
    """Tests for read_field."""

    def test_round_trip(self, field_csv):
        """Values and metadata survive a write and a read."""
        u = read_field(field_csv)
        grid = make_grid(R=1.0)
        assert u.grid == grid
        np.testing.assert_array_equal(u.values, Q_HALF(*grid.mesh))
        assert u.meta.c == 0.75
        assert u.meta.t == 0.25

    def test_lambda_round_trip(self, tmp_path):
        """The lambda alias is read back into the metadata."""
        path = tmp_path / "u.csv"
        write_field(sample_quadratic(Q_HALF, lam=0.5), path)
        assert read_field(path).meta.lam == 0.5

    def test_missing_sidecar(self, field_csv):
        """Should raise FieldFormatError without the sidecar."""
        meta_path_for(field_csv).unlink()
        with pytest.raises(FieldFormatError, match="sidecar"):
            read_field(field_csv)

    def test_missing_csv(self, field_csv):
        """Should raise FieldFormatError when the CSV is gone."""
        field_csv.unlink()
        with pytest.raises(FieldFormatError):
            read_field(field_csv)

    def test_truncated_rows(self, field_csv):
        """Should raise FieldFormatError when active nodes are missing."""
        lines = field_csv.read_text().splitlines()
        field_csv.write_text("\n".join(lines[:-3]) + "\n")
        with pytest.raises(FieldFormatError, match="missing 3"):
            read_field(field_csv)

    def test_bad_header(self, field_csv):
        """Should raise FieldFormatError for a wrong header."""
        lines = field_csv.read_text().splitlines()
        field_csv.write_text("\n".join(["x,y,value", *lines[1:]]) + "\n")
        with pytest.raises(FieldFormatError, match="header"):
            read_field(field_csv)

    def test_non_numeric_value(self, field_csv):
        """Should raise FieldFormatError for a non-numeric entry."""
        lines = field_csv.read_text().splitlines()
        lines[1] = "0,0,abc"
        field_csv.write_text("\n".join(lines) + "\n")
        with pytest.raises(FieldFormatError, match="non-numeric"):
            read_field(field_csv)

    def test_off_lattice_row(self, field_csv):
        """Should raise FieldFormatError for a point off the lattice."""
        lines = field_csv.read_text().splitlines()
        lines[1] = "0.3,0,0.045"
        field_csv.write_text("\n".join(lines) + "\n")
        with pytest.raises(FieldFormatError, match="not an active node"):
            read_field(field_csv)

    def test_invalid_sidecar(self, field_csv):
        """Should raise FieldFormatError for a sidecar without h."""
        meta_path_for(field_csv).write_text(json.dumps({"R": 1.0}))
        with pytest.raises(FieldFormatError, match="invalid metadata"):
            read_field(field_csv)


class TestWriteProfile:
    """Tests for write_profile."""

    def test_rows(self, tmp_path):
        """Writes a header and one row per sample."""
        path = write_profile([(0.5, -0.5), (1.0, -0.25)], tmp_path / "p.csv")
        assert path.read_text().splitlines() == ["r,value", "0.5,-0.5", "1,-0.25"]
