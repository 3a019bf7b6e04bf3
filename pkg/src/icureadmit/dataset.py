"""Labeled sparse datasets and their on-disk text format.

Rows are stored in a CSR matrix. Files use the svmlight layout with
0-based feature indices and the row id as a trailing comment::

    # dimension 2241
    1 3:0.25 17:0.968 # 100231

Floats are written with ``repr`` so a load/save round trip is exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ContractError, ParseError
from .text import SparseVector


@dataclass
class Dataset:
    matrix: sp.csr_matrix
    labels: np.ndarray
    row_ids: Optional[np.ndarray] = None

    def __post_init__(self):
        self.matrix = sp.csr_matrix(self.matrix, dtype=np.float64)
        self.matrix.sort_indices()
        self.labels = np.asarray(self.labels, dtype=bool)
        if self.matrix.shape[0] != len(self.labels):
            raise ContractError(
                f"{self.matrix.shape[0]} vectors but {len(self.labels)} labels"
            )
        if self.row_ids is not None:
            self.row_ids = np.asarray(self.row_ids, dtype=np.int64)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return self.matrix.shape[0]

    @property
    def vectors(self) -> list[SparseVector]:
        return [self.vector(i) for i in range(len(self))]

    def vector(self, i: int) -> SparseVector:
        lo, hi = self.matrix.indptr[i], self.matrix.indptr[i + 1]
        return SparseVector(
            tuple(int(j) for j in self.matrix.indices[lo:hi]),
            tuple(float(v) for v in self.matrix.data[lo:hi]),
            self.dimension,
        )

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(
            self.matrix[rows],
            self.labels[rows],
            None if self.row_ids is None else self.row_ids[rows],
        )

    @classmethod
    def from_vectors(
        cls, vectors: Sequence[SparseVector], labels, dimension: Optional[int] = None, row_ids=None
    ) -> "Dataset":
        if dimension is None:
            if not vectors:
                raise ContractError("dimension required for an empty dataset")
            dimension = vectors[0].dimension
        indptr = [0]
        indices: list[int] = []
        data: list[float] = []
        for v in vectors:
            if v.dimension != dimension:
                raise ContractError(f"vector dimension {v.dimension} != dataset dimension {dimension}")
            indices.extend(v.indices)
            data.extend(v.values)
            indptr.append(len(indices))
        m = sp.csr_matrix(
            (np.array(data, dtype=np.float64), np.array(indices, dtype=np.int64), np.array(indptr)),
            shape=(len(vectors), dimension),
        )
        return cls(m, labels, row_ids)


def write_dataset(data: Dataset, fh) -> None:
    m = data.matrix
    fh.write(f"# dimension {data.dimension}\n")
    for i in range(len(data)):
        lo, hi = m.indptr[i], m.indptr[i + 1]
        parts = ["1" if data.labels[i] else "0"]
        parts.extend(f"{int(j)}:{float(v)!r}" for j, v in zip(m.indices[lo:hi], m.data[lo:hi]))
        if data.row_ids is not None:
            parts.append(f"# {int(data.row_ids[i])}")
        fh.write(" ".join(parts))
        fh.write("\n")


def read_dataset(fh, *, source=None) -> Dataset:
    dimension = None
    labels, row_ids = [], []
    indptr, indices, values = [0], [], []
    for lineno, line in enumerate(fh, start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition(" ")
            if key == "dimension":
                dimension = int(value)
            continue
        body, _, comment = line.partition("#")
        fields = body.split()
        try:
            labels.append(fields[0] == "1")
            for item in fields[1:]:
                j, v = item.split(":")
                indices.append(int(j))
                values.append(float(v))
            if comment.strip():
                row_ids.append(int(comment))
        except (ValueError, IndexError) as exc:
            raise ParseError(f"bad dataset line: {exc}", row=lineno, source=source) from None
        indptr.append(len(indices))
    if dimension is None:
        raise ParseError("missing '# dimension' header", source=source)
    if indices and max(indices) >= dimension:
        raise ParseError("feature index exceeds declared dimension", source=source)
    m = sp.csr_matrix(
        (np.array(values, dtype=np.float64), np.array(indices, dtype=np.int64), np.array(indptr)),
        shape=(len(labels), dimension),
    )
    return Dataset(m, labels, row_ids if len(row_ids) == len(labels) and row_ids else None)
