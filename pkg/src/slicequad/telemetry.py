"""Per-tick telemetry table and its CSV form.

The column set is fixed for a given number of RBF neurons ``l``; every
float is written with 17 significant digits so a write/read round trip is
exact.
"""

import csv

import numpy as np


class IoError(OSError):
    pass


class SchemaMismatch(ValueError):
    pass


def _v(prefix, n=3):
    return ["%s%d" % (prefix, i + 1) for i in range(n)]


def _m(prefix):
    return ["%s%d%d" % (prefix, i + 1, j + 1) for i in range(3) for j in range(3)]


def schema(l=5):
    """Column names, in order, for a log with ``l`` neurons per slice."""
    cols = ["t"]
    cols += _v("x") + _v("v") + _m("R") + _v("Omega")
    cols += _v("xd") + _v("vd") + _v("ad") + _v("b1d") + _m("Rc") + _v("Omegac") + _v("Omegacdot")
    cols += _v("ex") + _v("ev") + _v("eR") + _v("eOmega") + ["psi"]
    cols += _v("Fd") + _v("Md") + ["fd", "f"] + _v("M") + ["df"] + _v("dM") + _v("T", 4)
    cols += _v("mhat") + _v("Jhat")
    cols += ["wx%d_%d" % (j + 1, i + 1) for j in range(3) for i in range(l)]
    cols += ["wR%d_%d" % (j + 1, i + 1) for j in range(3) for i in range(l)]
    cols += _v("wnx") + _v("wnR")
    cols += _v("phibx") + _v("phibR") + _v("phix") + _v("phiR")
    cols += ["V", "V_R", "V_x", "V_e", "V_Rs", "V_s", "clamped"]
    return cols


class SimLog:
    """Column-addressable telemetry table.

    ``data`` is an ``(n, k)`` float array; ``log["ex1"]`` returns one column
    and ``log.block("ex")`` the (n, 3) group ``ex1..ex3``.
    """

    def __init__(self, data, l=5):
        self.l = int(l)
        self.columns = schema(self.l)
        self.index = {c: i for i, c in enumerate(self.columns)}
        data = np.asarray(data, dtype=float)
        if data.ndim != 2 or data.shape[1] != len(self.columns):
            raise SchemaMismatch("expected %d columns, got shape %s" % (len(self.columns), data.shape))
        self.data = data

    def __len__(self):
        return self.data.shape[0]

    def __getitem__(self, name):
        return self.data[:, self.index[name]]

    def block(self, prefix, n=3):
        i = self.index[prefix + "1"]
        return self.data[:, i:i + n]

    def matrix(self, prefix):
        i = self.index[prefix + "11"]
        return self.data[:, i:i + 9].reshape(-1, 3, 3)

    def weights(self, kind):
        """Full weight history ``(n, 3, l)`` for ``kind`` in ``{"x", "R"}``."""
        i = self.index["w%s1_1" % kind]
        return self.data[:, i:i + 3 * self.l].reshape(-1, 3, self.l)

    def set(self, name, values):
        self.data[:, self.index[name]] = values

    @property
    def t(self):
        return self.data[:, 0]

    def slice(self, mask):
        return SimLog(self.data[mask], self.l)

    def equals(self, other):
        return (self.l == other.l and self.data.shape == other.data.shape
                and np.array_equal(self.data, other.data, equal_nan=True))


def write_log(log, path):
    """Write ``log`` as CSV with a header row and 17 significant digits."""
    try:
        with open(path, "w", encoding="ascii", newline="") as fh:
            fh.write(",".join(log.columns) + "\n")
            np.savetxt(fh, log.data, fmt="%.17g", delimiter=",")
    except OSError as exc:
        raise IoError("cannot write %s: %s" % (path, exc)) from None


def read_log(path):
    """Read a CSV written by :func:`write_log`.

    Raises ``SchemaMismatch`` when the header is not a known schema and
    ``IoError`` (naming the data row) when a row is short or unreadable.
    """
    try:
        with open(path, "r", encoding="ascii", newline="") as fh:
            text = fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        raise IoError("cannot read %s: %s" % (path, exc)) from None
    lines = text.splitlines()
    if not lines:
        raise IoError("%s is empty" % path)
    header = next(csv.reader(lines[:1]))
    l = sum(1 for c in header if c.startswith("wx1_"))
    if l < 1 or header != schema(l):
        raise SchemaMismatch("%s: header does not match the telemetry schema" % path)
    k = len(header)
    n = len(lines) - 1
    if n > 0 and not text.endswith("\n"):
        # every row is newline-terminated, so a missing one means a cut-off write
        raise IoError("%s: data row %d is truncated" % (path, n - 1))
    data = np.empty((n, k))
    for i, row in enumerate(csv.reader(lines[1:])):
        if len(row) != k:
            raise IoError("%s: data row %d has %d fields, expected %d" % (path, i, len(row), k))
        try:
            data[i] = [float(x) for x in row]
        except ValueError:
            raise IoError("%s: data row %d has an unreadable field" % (path, i)) from None
    return SimLog(data, l)
