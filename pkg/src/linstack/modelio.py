"""Versioned plain-text persistence for trained combiners.

Layout (one item per line)::

    linstack-model 1
    variant cws
    shape 25 3
    labels 3
    "class_1"
    ...
    weights 75
    <one float per line, row-major, repr precision>
    bias 0
    end

``repr`` of a float round-trips exactly, so a reloaded model reproduces
the original combine outputs bit for bit.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .core import CWS, LSG, WS, Combiner, CombinerModel

MAGIC = "linstack-model"
VERSION = 1


class ModelFormatError(ValueError):
    pass


def atomic_write_text(path, text: str) -> None:
    """Write via a temporary sibling and rename, so readers never see partial files."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(model: CombinerModel, labels=None) -> str:
    if not isinstance(model, (WS, CWS, LSG)):
        raise TypeError(f"not a combiner model: {type(model).__name__}")
    variant = model.combiner
    m, n = model.shape
    labels = [str(v) for v in (labels if labels is not None else range(1, n + 1))]
    if len(labels) != n:
        raise ValueError(f"{len(labels)} labels for {n} classes")
    w = np.asarray(model.weights, dtype=float).ravel()
    b = np.asarray(model.b, dtype=float).ravel() if variant is Combiner.LSG else np.zeros(0)
    lines = [f"{MAGIC} {VERSION}", f"variant {variant.value}", f"shape {m} {n}", f"labels {n}"]
    lines += [json.dumps(s) for s in labels]
    lines.append(f"weights {w.size}")
    lines += [repr(float(v)) for v in w]
    lines.append(f"bias {b.size}")
    lines += [repr(float(v)) for v in b]
    lines.append("end")
    return "\n".join(lines) + "\n"


def save_model(model: CombinerModel, path, labels=None) -> None:
    atomic_write_text(path, dumps(model, labels))


class _Reader:
    def __init__(self, text, source):
        self.lines = text.splitlines()
        self.pos = 0
        self.source = source

    def fail(self, msg):
        raise ModelFormatError(f"{self.source}: {msg}")

    def header(self, name, n_fields):
        if self.pos >= len(self.lines):
            self.fail(f"missing section {name!r} (file truncated)")
        parts = self.lines[self.pos].split()
        if not parts or parts[0] != name:
            self.fail(f"line {self.pos + 1}: expected section {name!r}, found {self.lines[self.pos]!r}")
        if len(parts) != n_fields + 1:
            self.fail(f"line {self.pos + 1}: section {name!r} takes {n_fields} field(s)")
        self.pos += 1
        return parts[1:]

    def body(self, name, count):
        if self.pos + count > len(self.lines):
            self.fail(f"section {name!r} truncated: expected {count} entries")
        out = self.lines[self.pos : self.pos + count]
        self.pos += count
        return out


def _int(reader, s, what):
    try:
        v = int(s)
    except ValueError:
        reader.fail(f"{what} is not an integer: {s!r}")
    if v < 0:
        reader.fail(f"{what} is negative")
    return v


def _floats(reader, rows, what):
    try:
        return np.array([float(r) for r in rows], dtype=float)
    except ValueError as exc:
        reader.fail(f"bad number in {what}: {exc}")


def loads(text: str, source="<string>"):
    """Parse a saved model; returns ``(model, labels)``."""
    r = _Reader(text, source)
    if not r.lines:
        r.fail(f"missing section {MAGIC!r} (empty file)")
    (version,) = r.header(MAGIC, 1)
    if version != str(VERSION):
        r.fail(f"unsupported format version {version} (this build reads version {VERSION})")
    (tag,) = r.header("variant", 1)
    try:
        variant = Combiner(tag)
    except ValueError:
        r.fail(f"unknown variant {tag!r}")
    m, n = (_int(r, s, "shape") for s in r.header("shape", 2))
    n_labels = _int(r, r.header("labels", 1)[0], "label count")
    if n_labels != n:
        r.fail(f"dimension corruption: {n_labels} labels for N={n}")
    try:
        labels = tuple(str(json.loads(s)) for s in r.body("labels", n_labels))
    except json.JSONDecodeError:
        r.fail("malformed label entry")
    expect = {Combiner.WS: m, Combiner.CWS: m * n, Combiner.LSG: n * m * n}[variant]
    n_w = _int(r, r.header("weights", 1)[0], "weight count")
    if n_w != expect:
        r.fail(f"dimension corruption: {n_w} weights, {variant.value} with M={m}, N={n} needs {expect}")
    w = _floats(r, r.body("weights", n_w), "weights")
    n_b = _int(r, r.header("bias", 1)[0], "bias count")
    if n_b != (n if variant is Combiner.LSG else 0):
        r.fail(f"dimension corruption: bias of length {n_b} for variant {variant.value}")
    b = _floats(r, r.body("bias", n_b), "bias")
    r.header("end", 0)
    if any(line.strip() for line in r.lines[r.pos :]):
        r.fail(f"line {r.pos + 1}: trailing content after 'end'")
    if variant is Combiner.WS:
        model = WS(w, n)
    elif variant is Combiner.CWS:
        model = CWS(w.reshape(m, n))
    else:
        model = LSG(w.reshape(n, m * n), b)
    return model, labels


def load_model(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError:
        raise ModelFormatError(f"{path}: not a text model file") from None
    return loads(text, str(path))
