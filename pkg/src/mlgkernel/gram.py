"""Gram matrix container and its comma-separated file format.

A Gram file is a block of ``# key=value`` header lines followed by ``M``
rows of ``M`` comma-separated values written with ``repr`` precision, so a
file round-trips exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError


@dataclass
class GramMatrix:
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def size(self):
        return self.values.shape[0]

    def min_max_eigenvalues(self):
        w = np.linalg.eigvalsh(0.5 * (self.values + self.values.T))
        return float(w[0]), float(w[-1])

    def is_psd(self, rtol=1e-8):
        lo, hi = self.min_max_eigenvalues()
        return lo >= -rtol * max(hi, 0.0)


def _fmt_value(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return " ".join(_fmt_value(x) for x in v)
    return str(v)


def format_gram(gram, header_keys=None):
    lines = []
    keys = header_keys if header_keys is not None else list(gram.metadata)
    for k in keys:
        lines.append(f"# {k}={_fmt_value(gram.metadata[k])}")
    for row in gram.values:
        lines.append(",".join(repr(float(x)) for x in row))
    return "\n".join(lines) + "\n"


def write_gram(path, gram, header_keys=None):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(format_gram(gram, header_keys))


def read_gram(path):
    meta = {}
    rows = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, sep, value = line[1:].strip().partition("=")
                if sep:
                    meta[key.strip()] = value.strip()
                continue
            try:
                rows.append([float(x) for x in line.split(",")])
            except ValueError as exc:
                raise InvalidInputError(f"{path}:{lineno}: {exc}") from None
    values = np.array(rows, dtype=float)
    if values.size and values.shape[0] != values.shape[1]:
        raise InvalidInputError(f"{path}: Gram matrix is not square ({values.shape})")
    return GramMatrix(values=values.reshape(len(rows), len(rows)), metadata=meta)
