"""Standardized conic programs.

A program minimizes ``c @ x + const`` subject to affine cone memberships
``A @ x + b in K`` for K one of

* ``nonneg``: the nonnegative orthant,
* ``soc``: ``{(u0, u1): u0 >= ||u1||}``,
* ``rsoc``: ``{(u0, u1, u2): 2 u0 u1 >= ||u2||^2, u0, u1 >= 0}``,

plus optional elementwise variable bounds.  Decision-vector slices carry
names so callers can pull out blocks of the solution.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np
import scipy.sparse as sp

CONE_KINDS = ("nonneg", "soc", "rsoc")


def _f(v) -> str:
    # repr of a builtin float round-trips exactly
    return repr(float(v))


@dataclass
class ConeBlock:
    kind: str
    A: sp.csr_matrix
    b: np.ndarray
    name: str = ""

    def __post_init__(self):
        if self.kind not in CONE_KINDS:
            raise ValueError(f"unknown cone kind {self.kind!r}")
        self.A = sp.csr_matrix(self.A, dtype=float)
        self.b = np.asarray(self.b, dtype=float).ravel()
        if self.A.shape[0] != self.b.shape[0]:
            raise ValueError(f"block {self.name!r}: A has {self.A.shape[0]} rows, b has {self.b.shape[0]}")
        minrows = {"nonneg": 1, "soc": 1, "rsoc": 2}[self.kind]
        if self.A.shape[0] < minrows:
            raise ValueError(f"block {self.name!r}: {self.kind} needs at least {minrows} rows")

    @property
    def rows(self) -> int:
        return self.A.shape[0]


@dataclass
class ConicProgram:
    n: int
    c: np.ndarray
    blocks: list[ConeBlock] = field(default_factory=list)
    const: float = 0.0
    slices: dict[str, slice] = field(default_factory=dict)
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        if self.c.shape[0] != self.n:
            raise ValueError(f"objective has length {self.c.shape[0]}, expected {self.n}")
        for arr in ("lb", "ub"):
            v = getattr(self, arr)
            if v is not None:
                v = np.asarray(v, dtype=float).ravel()
                if v.shape[0] != self.n:
                    raise ValueError(f"{arr} has length {v.shape[0]}, expected {self.n}")
                setattr(self, arr, v)

    def add(self, kind: str, A, b, name: str = "") -> ConeBlock:
        blk = ConeBlock(kind, A, b, name)
        if blk.A.shape[1] != self.n:
            raise ValueError(f"block {name!r} has {blk.A.shape[1]} columns, expected {self.n}")
        self.blocks.append(blk)
        return blk

    def validate(self) -> None:
        for blk in self.blocks:
            if blk.A.shape[1] != self.n:
                raise ValueError(f"block {blk.name!r} has {blk.A.shape[1]} columns, expected {self.n}")
        for name, sl in self.slices.items():
            start, stop, _ = sl.indices(self.n)
            if sl.stop is not None and sl.stop > self.n:
                raise ValueError(f"slice {name!r} exceeds decision vector")
        if not np.all(np.isfinite(self.c)):
            raise ValueError("objective has non-finite entries")

    def objective(self, x: np.ndarray) -> float:
        return float(self.c @ x + self.const)

    def violation(self, x: np.ndarray) -> float:
        """Largest cone-membership violation of ``x`` (0 if feasible)."""
        worst = 0.0
        for blk in self.blocks:
            u = blk.A @ x + blk.b
            if blk.kind == "nonneg":
                v = -u.min()
            elif blk.kind == "soc":
                v = np.linalg.norm(u[1:]) - u[0]
            else:
                v = max(-u[0], -u[1], math.sqrt(max(u[2:] @ u[2:], 0.0)) - math.sqrt(max(2 * u[0] * u[1], 0.0)))
            worst = max(worst, v)
        if self.lb is not None:
            worst = max(worst, float(np.max(self.lb - x, initial=0.0)))
        if self.ub is not None:
            worst = max(worst, float(np.max(x - self.ub, initial=0.0)))
        return worst

    def part(self, x: np.ndarray, name: str) -> np.ndarray:
        return x[self.slices[name]]

    # -- plain-text dump -------------------------------------------------

    def dump(self, fh: TextIO | None = None) -> str:
        out = io.StringIO()
        w = out.write
        w("CONICPROGRAM 1\n")
        w(f"N {self.n}\n")
        w(f"CONST {_f(self.const)}\n")
        for name, sl in self.slices.items():
            w(f"SLICE {name} {sl.start} {sl.stop}\n")
        nz = np.flatnonzero(self.c)
        w(f"OBJ {len(nz)}\n")
        for i in nz:
            w(f"{i} {_f(self.c[i])}\n")
        for tag, arr in (("LB", self.lb), ("UB", self.ub)):
            if arr is not None:
                fin = np.flatnonzero(np.isfinite(arr))
                w(f"{tag} {len(fin)}\n")
                for i in fin:
                    w(f"{i} {_f(arr[i])}\n")
        for blk in self.blocks:
            coo = blk.A.tocoo()
            w(f"BLOCK {blk.kind} {blk.rows} {coo.nnz} {blk.name or '-'}\n")
            for r, col, v in zip(coo.row, coo.col, coo.data):
                w(f"{r} {col} {_f(v)}\n")
            for v in blk.b:
                w(f"{_f(v)}\n")
        w("END\n")
        text = out.getvalue()
        if fh is not None:
            fh.write(text)
        return text

    @classmethod
    def load(cls, src: str | TextIO) -> "ConicProgram":
        text = src if isinstance(src, str) else src.read()
        lines = iter(enumerate(text.splitlines(), 1))

        def nxt():
            for ln, raw in lines:
                raw = raw.strip()
                if raw:
                    return ln, raw.split()
            raise ValueError("unexpected end of conic program dump")

        ln, tok = nxt()
        if tok[:2] != ["CONICPROGRAM", "1"]:
            raise ValueError(f"line {ln}: not a conic program dump")
        n = None
        const = 0.0
        slices: dict[str, slice] = {}
        c = None
        bounds: dict[str, np.ndarray] = {}
        blocks: list[ConeBlock] = []
        while True:
            ln, tok = nxt()
            key = tok[0]
            try:
                if key == "END":
                    break
                if key == "N":
                    n = int(tok[1])
                    c = np.zeros(n)
                elif key == "CONST":
                    const = float(tok[1])
                elif key == "SLICE":
                    slices[tok[1]] = slice(int(tok[2]), int(tok[3]))
                elif key == "OBJ":
                    for _ in range(int(tok[1])):
                        _, (i, v) = nxt()
                        c[int(i)] = float(v)
                elif key in ("LB", "UB"):
                    arr = np.full(n, -np.inf if key == "LB" else np.inf)
                    for _ in range(int(tok[1])):
                        _, (i, v) = nxt()
                        arr[int(i)] = float(v)
                    bounds[key.lower()] = arr
                elif key == "BLOCK":
                    kind, rows, nnz, name = tok[1], int(tok[2]), int(tok[3]), tok[4]
                    r = np.empty(nnz, dtype=int)
                    col = np.empty(nnz, dtype=int)
                    val = np.empty(nnz)
                    for j in range(nnz):
                        _, t = nxt()
                        r[j], col[j], val[j] = int(t[0]), int(t[1]), float(t[2])
                    b = np.array([float(nxt()[1][0]) for _ in range(rows)])
                    A = sp.csr_matrix((val, (r, col)), shape=(rows, n))
                    blocks.append(ConeBlock(kind, A, b, "" if name == "-" else name))
                else:
                    raise ValueError(f"unknown record {key!r}")
            except (IndexError, TypeError) as exc:
                raise ValueError(f"line {ln}: malformed {key} record") from exc
        if n is None:
            raise ValueError("dump lacks an N record")
        return cls(n=n, c=c, blocks=blocks, const=const, slices=slices,
                   lb=bounds.get("lb"), ub=bounds.get("ub"))
