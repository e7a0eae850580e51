import numpy as np
import pytest

from dreminertia import EstimatorConfig, estimate_series
from dreminertia.csvio import (CsvFormatError, emit_csv, infer_unit, ingest_csv, read_table,
                               write_table)
from dreminertia.model import MeasurementSeries


def write(path, text):
    path.write_text(text)
    return path


def test_three_row_file(tmp_path):
    p = write(tmp_path / "m.csv", "t,f_av,p_pfc_tot,p_e_pfc\n"
                                  "0.000,1.0,0.0,0.498\n"
                                  "0.001,0.9999,0.0001,0.498\n"
                                  "0.002,0.9998,0.0002,0.499\n")
    s = ingest_csv(p)
    assert len(s) == 3
    assert s.t.tolist() == [0.0, 0.001, 0.002]
    assert s.omega_av.tolist() == [1.0, 0.9999, 0.9998]
    assert s.p_pfc_tot.tolist() == [0.0, 0.0001, 0.0002]
    assert s.p_e_pfc.tolist() == [0.498, 0.498, 0.499]


def test_hz_file_converted(tmp_path):
    p = write(tmp_path / "m.csv", "t,f_av,p_pfc_tot,p_e_pfc\n0,50.0,0,0.5\n0.001,49.95,0,0.5\n")
    s = ingest_csv(p)
    assert s.omega_av == pytest.approx([1.0, 0.999], rel=1e-15)


def test_header_mismatch_names_expected(tmp_path):
    p = write(tmp_path / "m.csv", "time,f,p1,p2\n0,1,0,0\n")
    with pytest.raises(CsvFormatError, match="t,f_av,p_pfc_tot,p_e_pfc") as exc:
        ingest_csv(p)
    assert exc.value.line == 1


def test_malformed_row_reports_line(tmp_path):
    p = write(tmp_path / "m.csv", "t,f_av,p_pfc_tot,p_e_pfc\n0,1,0,0\n0.001,1,abc,0\n")
    with pytest.raises(CsvFormatError) as exc:
        ingest_csv(p)
    assert exc.value.line == 3
    p = write(tmp_path / "m2.csv", "t,f_av,p_pfc_tot,p_e_pfc\n0,1,0,0\n0.001,1,0\n")
    with pytest.raises(CsvFormatError) as exc:
        ingest_csv(p)
    assert exc.value.line == 3


def test_nonuniform_spacing_rejected(tmp_path):
    p = write(tmp_path / "m.csv", "t,f_av,p_pfc_tot,p_e_pfc\n0,1,0,0\n0.001,1,0,0\n0.0021,1,0,0\n")
    with pytest.raises(CsvFormatError, match="spacing") as exc:
        ingest_csv(p)
    assert exc.value.line == 4
    p = write(tmp_path / "m2.csv", "t,f_av,p_pfc_tot,p_e_pfc\n0,1,0,0\n0,1,0,0\n")
    with pytest.raises(CsvFormatError, match="increasing"):
        ingest_csv(p)


def test_spacing_tolerance(tmp_path):
    p = write(tmp_path / "m.csv", "t,f_av,p_pfc_tot,p_e_pfc\n0,1,0,0\n0.001,1,0,0\n0.0020000000005,1,0,0\n")
    assert len(ingest_csv(p)) == 3


def test_unit_ambiguity(tmp_path):
    p = write(tmp_path / "m.csv", "t,f_av,p_pfc_tot,p_e_pfc\n0,10.0,0,0\n0.001,10.0,0,0\n")
    with pytest.raises(CsvFormatError, match="ambiguous"):
        ingest_csv(p)
    s = ingest_csv(p, unit="pu")
    assert s.omega_av[0] == 10.0
    assert infer_unit(np.array([0.99, 1.01])) == "pu"
    assert infer_unit(np.array([49.9, 50.1])) == "hz"


def test_empty_file(tmp_path):
    p = write(tmp_path / "m.csv", "")
    with pytest.raises(CsvFormatError):
        ingest_csv(p)


def test_round_trip_bit_exact(tmp_path, nominal_data):
    series, _ = nominal_data
    p = tmp_path / "rt.csv"
    emit_csv(series, p)
    back = ingest_csv(p)
    for a, b in [(series.t, back.t), (series.omega_av, back.omega_av),
                 (series.p_pfc_tot, back.p_pfc_tot), (series.p_e_pfc, back.p_e_pfc)]:
        assert np.array_equal(a, b)


def test_round_trip_random_values(tmp_path):
    rng = np.random.default_rng(5)
    n = 500
    s = MeasurementSeries(np.arange(n) * 1e-3, 1 + 1e-3 * rng.normal(size=n),
                          rng.normal(size=n) * 1e-17, rng.uniform(-1, 1, n))
    emit_csv(s, tmp_path / "r.csv")
    back = ingest_csv(tmp_path / "r.csv")
    assert np.array_equal(s.omega_av, back.omega_av)
    assert np.array_equal(s.p_pfc_tot, back.p_pfc_tot)


def test_hz_and_pu_give_same_estimates(tmp_path, nominal_data):
    series, _ = nominal_data
    short = MeasurementSeries(*(c[:15000] for c in (series.t, series.omega_av, series.p_pfc_tot,
                                                   series.p_e_pfc)))
    emit_csv(short, tmp_path / "pu.csv", unit="pu")
    emit_csv(short, tmp_path / "hz.csv", unit="hz")
    a = estimate_series(ingest_csv(tmp_path / "pu.csv"), EstimatorConfig())
    b = estimate_series(ingest_csv(tmp_path / "hz.csv"), EstimatorConfig())
    assert np.max(np.abs(a.eta_hat / b.eta_hat - 1)) <= 1e-12


def test_write_table_decimation_keeps_last(tmp_path):
    t = np.arange(10.0)
    write_table(tmp_path / "d.csv", ("t", "v"), [t, 2 * t], decimate=4)
    header, data = read_table(tmp_path / "d.csv")
    assert header == ["t", "v"]
    assert data[:, 0].tolist() == [0.0, 4.0, 8.0, 9.0]
    with pytest.raises(ValueError):
        write_table(tmp_path / "x.csv", ("a", "b"), [t, t[:3]])
