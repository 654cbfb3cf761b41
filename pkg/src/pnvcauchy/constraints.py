"""Residuals of the constraint equations on a single slice."""

from __future__ import annotations

import numpy as np

from .chart import interior_mask
from .fields import antisymmetric_part, component_norms, field_norm
from .geometry import Geometry, build_geometry, trace, trace_dnabla
from .report import ResidualEntry, ResidualReport

DEFAULT_C = 100.0
NORM_RTOL = 1e-10
MASK_WIDTH = 2

# generators whose W is a Codazzi tensor
CODAZZI_GENERATORS = {"flat", "circle_codazzi", "open_codazzi"}


def _geo(data, geo: Geometry | None) -> Geometry:
    return geo if geo is not None else build_geometry(data.chart, data.g)


def vector_constraint_residual(data, geo: Geometry | None = None) -> np.ndarray:
    """``R[a, i] = (∇_i U)^a + u W^a_i``, i.e. ∇U + uW as an endomorphism."""
    geo = _geo(data, geo)
    nab = geo.nabla(data.U, "u")
    return np.swapaxes(nab, 0, 1) + data.u * data.W


def norm_constraint_residual(data) -> np.ndarray:
    return np.einsum("i...,ij...,j...->...", data.U, data.g, data.U) - data.u**2


def codazzi_residual(data, geo: Geometry | None = None) -> np.ndarray:
    """d^∇W with every slot lowered, which is d^∇ of II = g(W·, ·)."""
    geo = _geo(data, geo)
    return geo.dnabla(data.II)


def w_symmetry_residual(data) -> np.ndarray:
    return 2.0 * antisymmetric_part(data.II)


def ricci_flat_constraint_residuals(geo: Geometry, II: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(scal − |II|² + (tr II)², d tr II + div II)."""
    W = np.einsum("ac...,cb...->ab...", geo.ginv, II)
    normII2 = np.einsum("ab...,ba...->...", W, W)
    trII = trace(II, geo.ginv)
    ham = geo.scal - normII2 + trII**2
    mom = geo.chart.grad(trII) + geo.divergence(II)
    return ham, mom


def trace_dnabla_form(geo: Geometry, II: np.ndarray) -> np.ndarray:
    return trace_dnabla(geo.dnabla(II), geo.ginv)


def data_scale(data) -> float:
    u = float(np.max(np.abs(data.u)))
    w = float(np.max(np.abs(data.W)))
    return max(1.0, u) * max(1.0, w)


def constraint_report(data, C: float = DEFAULT_C, ricci_flat_enforced: bool = False,
                      codazzi_enforced: bool | None = None) -> ResidualReport:
    """Evaluate every slice constraint on the interior mask.

    The null-vector constraints (vector, norm, W symmetry) are always
    enforced.  The Codazzi condition is enforced for generators that promise
    it; the Ricci-flat constraints only on request, since PNV data need not
    satisfy them.
    """
    chart = data.chart
    geo = build_geometry(chart, data.g)
    mask = interior_mask(chart, MASK_WIDTH)
    h4 = chart.h**4
    scale = data_scale(data)
    tol = C * h4 * scale
    if codazzi_enforced is None:
        codazzi_enforced = data.provenance.get("generator") in CODAZZI_GENERATORS

    rep = ResidualReport("constraints")
    vc = vector_constraint_residual(data, geo)
    rep.add(ResidualEntry("vector_constraint",
                          field_norm(vc, geo.g, geo.ginv, "ud", "linf", mask),
                          field_norm(vc, geo.g, geo.ginv, "ud", "l2", mask), tol))
    nc = norm_constraint_residual(data)
    rep.add(ResidualEntry("norm_constraint", *component_norms(nc, 0, mask),
                          NORM_RTOL * float(np.max(data.u**2))))
    ws = w_symmetry_residual(data)
    rep.add(ResidualEntry("w_symmetry", *component_norms(ws, 2, mask), max(tol, 1e-12)))
    cz = codazzi_residual(data, geo)
    rep.add(ResidualEntry("codazzi", *component_norms(cz, 3, mask), tol, enforced=codazzi_enforced))
    ham, mom = ricci_flat_constraint_residuals(geo, data.II)
    rep.add(ResidualEntry("ricci_flat_hamiltonian", *component_norms(ham, 0, mask), tol,
                          enforced=ricci_flat_enforced))
    rep.add(ResidualEntry("ricci_flat_momentum", *component_norms(mom, 1, mask), tol,
                          enforced=ricci_flat_enforced))
    return rep
