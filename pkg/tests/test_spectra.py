import csv
import itertools
import math

import numpy as np
import pytest

from gaugepeps import fpeps as fp
from gaugepeps import spectra as spc
from gaugepeps.exact import DimensionCapError
from gaugepeps.lattice import LatticeGeometry

P = fp.SiteTensorParams(t=0.8, y=0.3 + 0.4j, z=-0.5 + 0.2j)


def _direct_cylinder_norm(n_columns, n_y, n):
    geom = LatticeGeometry(n_columns, n_y, "periodic-y")
    peps = fp.FPEPS(geom, P)
    total = 0.0
    for digits in itertools.product(range(n), repeat=geom.n_links):
        total += math.exp(peps.log_weight(2 * np.pi * np.array(digits) / n))
    return total / n ** geom.n_links


def test_open_cylinder_matches_direct_sum():
    assert spc.open_cylinder_norm(P, 2, 2, 3).real == pytest.approx(_direct_cylinder_norm(2, 2, 3), rel=1e-10)


def test_correlators_explicit_vs_spectral():
    chk = spc.correlator_check(P, n_y=2, n=3, max_l=4)
    assert chk.max_deviation <= 1e-8
    assert 0 <= chk.gap_ratio < 1


def test_correlators_decay_with_gap():
    chk = spc.correlator_check(P, n_y=2, n=3, max_l=5, a=spc.Insertion("n", 0), b=spc.Insertion("n", 1))
    mags = np.abs(chk.explicit)
    assert mags[-1] <= mags[0] * chk.gap_ratio ** 3 * 10 + 1e-14


def test_leading_spectrum_order():
    M = np.diag([0.1, -2.0, 1.0, 0.5])
    assert np.allclose(spc.leading_spectrum(M, 3), [-2.0, 1.0, 0.5])
    with pytest.raises(ValueError):
        spc.leading_spectrum(M, 5)


def test_gap_and_correlation_length_edge_cases():
    assert spc.gap_ratio(np.diag([2.0, 1.0])) == pytest.approx(0.5)
    assert spc.correlation_length(np.diag([2.0, 1.0])) == pytest.approx(1 / math.log(2))
    assert spc.correlation_length(np.diag([1.0, 0.0, 0.0])) == 0.0
    assert spc.correlation_length(np.diag([1.0, -1.0])) == math.inf


def test_transfer_operator_shape_and_finite():
    op = spc.build_transfer(P, n_y=2, n=3)
    assert op.dim == (4 ** 2) ** 2
    assert np.all(np.isfinite(op.matrix))


def test_pure_gauge_point_is_gapped():
    row = spc.emit_transfer_row(fp.SiteTensorParams(t=0.0, y=0.3 + 0.4j, z=-0.5 + 0.2j), 2, 3)
    assert row["t"] == 0.0 and 0 <= row["gap_ratio"] < 1


def test_dimension_cap():
    with pytest.raises(DimensionCapError):
        spc.TransferBuilder(P, n_y=4, n=3)


def test_insertion_validation():
    with pytest.raises(ValueError):
        spc.Insertion("E", 0)


def test_write_rows(tmp_path):
    row = spc.emit_transfer_row(P, 2, 3)
    spc.write_rows(tmp_path / "s.csv", [row])
    with open(tmp_path / "s.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == list(spc.SCAN_FIELDS) and len(rows) == 1
    assert float(rows[0]["gap_ratio"]) == pytest.approx(row["gap_ratio"], rel=1e-14)
