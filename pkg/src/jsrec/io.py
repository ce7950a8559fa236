"""Problem files, JSON reports and CSV traces.

Problem files are JSON objects::

    {"m": .., "N": .., "omega": .., "A": [[..], ..], "u": [[..], ..],
     "ground_truth": [[..], ..] (optional), "meta": {"seed": .., "spec": {..}}}

Floats are written with 17 significant digits in exponent form, which
reads back to the identical double. Non-finite values become ``null`` in
JSON and ``nan``/``inf`` in CSV. Every file is written to a temporary
sibling and renamed into place.
"""

from __future__ import annotations

import json
import math
import os
import re
import tempfile

import numpy as np

from ._core import ConfigurationError, check_matrix
from .problems import ProblemInstance, ProblemSpec


_FLOAT_TOKEN = re.compile(r'"\\u0001f([^"\\]*)\\u0001"')


def _float_text(v):
    return format(v, ".16e")


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        # strict JSON has no inf/nan
        # placeholder swapped for a bare number after encoding
        return f"\x01f{_float_text(v)}\x01" if math.isfinite(v) else None
    return obj


def atomic_write(path, text):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(obj):
    text = json.dumps(_plain(obj), indent=2, sort_keys=True, allow_nan=False)
    return _FLOAT_TOKEN.sub(r"\1", text) + "\n"


def write_json(path, obj):
    atomic_write(path, dumps(obj))


def fmt(v):
    """Lossless text form of a number for CSV cells."""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    return _float_text(v) if math.isfinite(v) else repr(v)


def write_csv(path, header, rows):
    lines = [",".join(header)]
    lines.extend(",".join(fmt(v) for v in r) for r in rows)
    atomic_write(path, "\n".join(lines) + "\n")


def problem_to_dict(inst):
    m, n = inst.A.shape
    meta = {"tail_energy": inst.tail_energy}
    if inst.spec is not None:
        meta["seed"] = inst.spec.seed
        meta["spec"] = inst.spec.to_dict()
    d = {"m": m, "N": n, "omega": inst.u.shape[1], "A": inst.A, "u": inst.u, "meta": meta}
    if inst.ground_truth is not None:
        d["ground_truth"] = inst.ground_truth
    return d


def save_problem(path, inst):
    write_json(path, problem_to_dict(inst))


def problem_from_dict(d):
    try:
        m, n, omega = int(d["m"]), int(d["N"]), int(d["omega"])
        A = check_matrix(np.array(d["A"], dtype=np.float64).reshape(m, n), "A")
        u = check_matrix(np.array(d["u"], dtype=np.float64).reshape(m, omega), "u")
        gt = d.get("ground_truth")
        if gt is not None:
            gt = check_matrix(np.array(gt, dtype=np.float64).reshape(n, omega), "ground_truth")
        meta = d.get("meta") or {}
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"malformed problem file: {exc}") from exc
    spec = ProblemSpec(**meta["spec"]) if "spec" in meta else None
    return ProblemInstance(A=A, u=u, ground_truth=gt,
                           tail_energy=float(meta.get("tail_energy", 0.0)), spec=spec)


def load_problem(path):
    """Read a problem file. ``OSError`` and ``json.JSONDecodeError`` propagate."""
    with open(path) as fh:
        return problem_from_dict(json.load(fh))
