import numpy as np
import pytest

from slicequad.telemetry import IoError, SchemaMismatch, SimLog, read_log, schema, write_log


def _log(rng, n=20):
    l = 5
    data = rng.normal(size=(n, len(schema(l)))) * 10 ** rng.uniform(-8, 8, size=(n, 1))
    data[:, 0] = np.arange(n) * 1e-3
    return SimLog(data, l)


def test_round_trip_is_exact(tmp_path, rng):
    log = _log(rng)
    write_log(log, tmp_path / "a.csv")
    back = read_log(tmp_path / "a.csv")
    assert back.equals(log)
    write_log(back, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_header_mismatch(tmp_path, rng):
    write_log(_log(rng), tmp_path / "a.csv")
    text = (tmp_path / "a.csv").read_text().replace("psi", "psy", 1)
    (tmp_path / "b.csv").write_text(text)
    with pytest.raises(SchemaMismatch):
        read_log(tmp_path / "b.csv")


def test_truncated_file_names_the_row(tmp_path, rng):
    write_log(_log(rng, 10), tmp_path / "a.csv")
    raw = (tmp_path / "a.csv").read_bytes()
    (tmp_path / "cut.csv").write_bytes(raw[:-40])
    with pytest.raises(IoError, match="row 9"):
        read_log(tmp_path / "cut.csv")


def test_missing_and_empty_files(tmp_path):
    with pytest.raises(IoError):
        read_log(tmp_path / "nope.csv")
    (tmp_path / "empty.csv").write_text("")
    with pytest.raises(IoError):
        read_log(tmp_path / "empty.csv")
    with pytest.raises(IoError):
        write_log(SimLog(np.zeros((0, len(schema(5)))), 5), tmp_path / "no_dir" / "x.csv")
