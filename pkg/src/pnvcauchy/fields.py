"""Tensor-field containers and pointwise multilinear algebra.

Components are stored in the coordinate basis with component axes leading.
Index kinds are spelled as strings, one letter per slot: ``"u"`` for an
upper (contravariant) slot and ``"d"`` for a lower one, so a Weingarten
operator W^i_j is ``"ud"`` and a second fundamental form is ``"dd"``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .chart import ChartSpec
from .errors import EmptyMask, SingularMetric, SlotOutOfRange

POSDEF_RTOL = 1e-12
SINGULAR_RTOL = 1e-14


class Symmetry(str, Enum):
    NONE = "none"
    SYM2 = "sym2"
    ANTISYM2 = "antisym2"


@dataclass
class TensorField:
    spec: ChartSpec
    data: np.ndarray
    kinds: str = ""
    symmetry: Symmetry = Symmetry.NONE
    metric: bool = False

    def __post_init__(self):
        expected = (self.spec.dim,) * len(self.kinds) + tuple(self.spec.points)
        if self.data.shape != expected:
            raise ValueError(f"component array has shape {self.data.shape}, expected {expected}")

    @property
    def valence(self) -> tuple[int, int]:
        return self.kinds.count("u"), self.kinds.count("d")


def _grid_last(a: np.ndarray, nidx: int) -> np.ndarray:
    """Move the ``nidx`` leading component axes to the end."""
    return np.moveaxis(a, tuple(range(nidx)), tuple(range(a.ndim - nidx, a.ndim)))


def _grid_first(a: np.ndarray, nidx: int) -> np.ndarray:
    return np.moveaxis(a, tuple(range(a.ndim - nidx, a.ndim)), tuple(range(nidx)))


def symmetrize(h: np.ndarray) -> np.ndarray:
    return 0.5 * (h + np.swapaxes(h, 0, 1))


def antisymmetric_part(h: np.ndarray) -> np.ndarray:
    return 0.5 * (h - np.swapaxes(h, 0, 1))


def metric_inverse(g: np.ndarray, check: bool = True) -> np.ndarray:
    """Nodewise inverse of a metric with components ``g[i, j, *grid]``.

    With ``check`` the metric must be positive definite (eigenvalues above
    ``1e-12 * max|g|``); otherwise only non-singularity is required, which is
    what Lorentzian metrics need.
    """
    n = g.shape[0]
    m = _grid_last(g, 2)
    scale = float(np.max(np.abs(m))) if m.size else 1.0
    if check:
        eig = np.linalg.eigvalsh(m)
        bad = eig[..., 0] <= POSDEF_RTOL * scale
        if np.any(bad):
            node = tuple(int(i) for i in np.argwhere(bad)[0])
            raise SingularMetric("metric is not positive definite", node)
    det = np.linalg.det(m)
    bad = np.abs(det) <= SINGULAR_RTOL * scale**n
    if np.any(bad):
        node = tuple(int(i) for i in np.argwhere(bad)[0])
        raise SingularMetric("metric determinant vanishes", node)
    inv = _grid_first(np.linalg.inv(m), 2)
    return symmetrize(inv)


def min_eigenvalue(g: np.ndarray) -> float:
    return float(np.min(np.linalg.eigvalsh(_grid_last(g, 2))))


def _contract_slot(T: np.ndarray, M: np.ndarray, slot: int) -> np.ndarray:
    # out[..., a, ...] = M[a, b] T[..., b, ...] with a at position `slot`
    Tm = np.moveaxis(T, slot, 0)
    out = np.einsum("ab...,b...->a...", M, Tm)
    return np.moveaxis(out, 0, slot)


def lower_index(T: np.ndarray, g: np.ndarray, slot: int, kinds: str) -> tuple[np.ndarray, str]:
    """Lower the upper index in ``slot``; returns the new array and kinds."""
    if not 0 <= slot < len(kinds) or kinds[slot] != "u":
        raise SlotOutOfRange(f"slot {slot} is not an upper slot of '{kinds}'")
    return _contract_slot(T, g, slot), kinds[:slot] + "d" + kinds[slot + 1:]


def raise_index(T: np.ndarray, ginv: np.ndarray, slot: int, kinds: str) -> tuple[np.ndarray, str]:
    """Raise the lower index in ``slot`` with the inverse metric."""
    if not 0 <= slot < len(kinds) or kinds[slot] != "d":
        raise SlotOutOfRange(f"slot {slot} is not a lower slot of '{kinds}'")
    return _contract_slot(T, ginv, slot), kinds[:slot] + "u" + kinds[slot + 1:]


def sharp(h: np.ndarray, ginv: np.ndarray) -> np.ndarray:
    """Endomorphism h^♯ with g(X, h^♯ Y) = h(X, Y): components (h^♯)^a_b = g^{ac} h_{cb}."""
    return np.einsum("ac...,cb...->ab...", ginv, h)


def pointwise_norm2(T: np.ndarray, g: np.ndarray, ginv: np.ndarray, kinds: str) -> np.ndarray:
    """Squared g-norm at each node (all slots contracted with g or g^{-1})."""
    low, up = T, T
    for slot, k in enumerate(kinds):
        if k == "u":
            low = _contract_slot(low, g, slot)
        else:
            up = _contract_slot(up, ginv, slot)
    return np.sum(low * up, axis=tuple(range(len(kinds)))) if kinds else T * T


def field_norm(T: np.ndarray, g: np.ndarray, ginv: np.ndarray, kinds: str,
               kind: str = "linf", mask: np.ndarray | None = None) -> float:
    """LINF: max pointwise g-norm; L2: sqrt of the mean squared pointwise norm.

    The L2 value is a plain node average, i.e. the rectangle/trapezoid
    quadrature on a periodic grid, without the volume density.
    """
    n2 = np.maximum(pointwise_norm2(T, g, ginv, kinds), 0.0)
    if mask is not None:
        if not np.any(mask):
            raise EmptyMask("mask selects no nodes")
        n2 = n2[np.broadcast_to(mask, n2.shape)]
    if kind.lower() == "linf":
        return float(np.sqrt(np.max(n2)))
    if kind.lower() == "l2":
        return float(np.sqrt(np.mean(n2)))
    raise ValueError(f"unknown norm kind {kind!r}")


def component_norms(R: np.ndarray, nidx: int, mask: np.ndarray | None = None) -> tuple[float, float]:
    """(L-inf, L2) of a residual using the Euclidean norm of its components.

    Used for residual reports, where fields may live on Lorentzian blocks and
    a metric norm would be indefinite.
    """
    R = np.asarray(R)
    sq = np.abs(R) ** 2
    if nidx:
        sq = np.sum(sq, axis=tuple(range(nidx)))
    if mask is not None:
        if not np.any(mask):
            raise EmptyMask("mask selects no nodes")
        sq = sq[np.broadcast_to(mask, sq.shape)]
    if sq.size == 0:
        raise EmptyMask("empty residual")
    return float(np.sqrt(np.max(sq))), float(np.sqrt(np.mean(sq)))


# --- grid dump format -------------------------------------------------------

def dump_field(path: str | Path, field: TensorField, extra: dict | None = None) -> None:
    """Write one JSON header line followed by little-endian float64 data.

    Complex fields are written as interleaved (re, im) pairs.
    """
    data = np.ascontiguousarray(field.data)
    is_complex = np.iscomplexobj(data)
    header = {
        "format": "pnv-grid-dump",
        "version": 1,
        "chart": field.spec.to_dict(),
        "kinds": field.kinds,
        "valence": list(field.valence),
        "symmetry": field.symmetry.value,
        "metric": field.metric,
        "shape": list(data.shape),
        "component_order": "row-major over (components..., grid...)",
        "complex": is_complex,
        "dtype": "<f8",
    }
    if extra:
        header["extra"] = extra
    raw = data.astype("<c16" if is_complex else "<f8").view("<f8")
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        fh.write(raw.tobytes(order="C"))


def load_field(path: str | Path) -> tuple[TensorField, dict]:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        payload = fh.read()
    arr = np.frombuffer(payload, dtype="<f8")
    if header.get("complex"):
        arr = arr.view("<c16")
    arr = arr.reshape(header["shape"]).copy()
    spec = ChartSpec.from_dict(header["chart"])
    tf = TensorField(spec, arr, header["kinds"], Symmetry(header["symmetry"]), header["metric"])
    return tf, header
