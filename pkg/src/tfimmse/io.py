"""CSV and JSON serialization.

Floats are written with ``repr`` so every value round-trips bit for bit.
JSON is written with sorted keys and a trailing newline; no file carries a
timestamp, so identical inputs give identical bytes.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Union

import numpy as np

from .errors import ShapeError
from .signals import Signal, SpectralDensity
from .tfa import TFDist

PathLike = Union[str, Path]


def _f(v) -> str:
    return repr(float(v))


def _complex(re, im) -> np.ndarray:
    # re + 1j * im would not preserve signed zeros
    out = np.empty(np.shape(re), dtype=np.complex128)
    out.real = re
    out.imag = im
    return out


def dumps_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=True) + "\n"


def _write(path: PathLike, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8", newline="")


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header is not None:
        w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# -- Signal --------------------------------------------------------------------


def signal_to_csv(x: Signal) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sample_rate", _f(x.sample_rate), "t0", _f(x.t0)])
    w.writerow(["index", "re", "im"])
    for i, v in enumerate(x.samples):
        w.writerow([i, _f(v.real), _f(v.imag)])
    return buf.getvalue()


def signal_from_csv(text: str) -> Signal:
    rows = list(csv.reader(io.StringIO(text)))
    if len(rows) < 2 or rows[0][0] != "sample_rate" or rows[1] != ["index", "re", "im"]:
        raise ShapeError("not a signal CSV")
    fs, t0 = float(rows[0][1]), float(rows[0][3])
    data = np.array([[float(r[1]), float(r[2])] for r in rows[2:]])
    return Signal(_complex(data[:, 0], data[:, 1]), fs, t0)


def signal_to_json(x: Signal) -> str:
    return dumps_json({"sample_rate": float(x.sample_rate), "t0": float(x.t0),
                       "re": [float(v) for v in x.samples.real], "im": [float(v) for v in x.samples.imag]})


def signal_from_json(text: str) -> Signal:
    d = json.loads(text)
    return Signal(_complex(d["re"], d["im"]), d["sample_rate"], d.get("t0", 0.0))


# -- TFDist --------------------------------------------------------------------


def tfdist_to_csv(w: TFDist) -> str:
    t, f = np.meshgrid(w.time_axis, w.freq_axis, indexing="ij")
    rows = ([_f(a), _f(b), _f(v.real), _f(v.imag)]
            for a, b, v in zip(t.ravel(), f.ravel(), w.values.ravel()))
    return _csv_text(["time", "freq", "re", "im"], rows)


def tfdist_from_csv(text: str, kind: str = "auto") -> TFDist:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["time", "freq", "re", "im"]:
        raise ShapeError("not a time-frequency CSV")
    a = np.array([[float(v) for v in r] for r in rows[1:]])
    t = np.unique(a[:, 0])
    f = np.unique(a[:, 1])
    if t.size * f.size != a.shape[0]:
        raise ShapeError("time-frequency CSV is not a full grid")
    vals = _complex(a[:, 2], a[:, 3]).reshape(t.size, f.size)
    return TFDist(vals, t, f, kind)


def tfdist_to_json(w: TFDist) -> str:
    return dumps_json({"kind": w.kind, "time": [float(v) for v in w.time_axis],
                       "freq": [float(v) for v in w.freq_axis],
                       "re": w.values.real.tolist(), "im": w.values.imag.tolist()})


def tfdist_from_json(text: str) -> TFDist:
    d = json.loads(text)
    return TFDist(_complex(d["re"], d["im"]), d["time"], d["freq"], d["kind"])


# -- SpectralDensity -----------------------------------------------------------


def psd_to_csv(s: SpectralDensity) -> str:
    return _csv_text(["freq", "value"], ([_f(a), _f(b)] for a, b in zip(s.freqs, s.values)))


def psd_from_csv(text: str) -> SpectralDensity:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["freq", "value"]:
        raise ShapeError("not a spectral density CSV")
    a = np.array([[float(v) for v in r] for r in rows[1:]])
    return SpectralDensity(a[:, 0], a[:, 1])


# -- reports -------------------------------------------------------------------


def immse_report_to_csv(report) -> str:
    return _csv_text(report.columns(), ([_f(v) for v in row] for row in report.rows()))


def immse_report_to_json(report) -> str:
    return dumps_json(report.to_dict())


def tf_report_to_csv(report) -> str:
    rows = []
    se = (report.bootstrap or {}).get("term_stderr")
    for i, t in enumerate(report.terms):
        rows.append([t.index, t.sign, "*".join(t.numerator_spec), t.band, _f(t.value.real), _f(t.value.imag),
                     _f(se[i]) if se else ""])
    rows.append(["total", "", "", "", _f(report.total.real), _f(report.total.imag),
                 _f(report.bootstrap["total_stderr"]) if report.bootstrap else ""])
    rows.append(["reduced_" + report.reduction, "", "", "", _f(report.reduced_total.real),
                 _f(report.reduced_total.imag), ""])
    return _csv_text(["index", "sign", "numerator", "band", "re", "im", "bootstrap_stderr"], rows)


def tf_report_to_json(report) -> str:
    return dumps_json(report.to_dict())


def write_text(path: PathLike, text: str) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    _write(p, text)
    return p
