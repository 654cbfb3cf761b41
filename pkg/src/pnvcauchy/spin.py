"""Spinor calculus on surfaces and on 3D Lorentzian blocks.

Representations (fixed constants):

* Riemannian, dimension 2: ``e1 = diag(i, −i)``, ``e2 = [[0, 1], [−1, 0]]``
  with e_j·e_j = −1.  The unit spinor ``v = (1, 0)`` satisfies e1·v = i v.
  Hermitian product (φ, ψ) = ψᴴφ.
* Lorentzian, dimension 1+2: ``T = [[0, 1], [1, 0]]`` with T·T = +1
  (matching ḡ(T, T) = −1 under X·X = −ḡ(X, X)), and E_j = −i T e_j so that
  slice and ambient Clifford actions are related by e_j·φ = i T·E_j·φ.
  Pairing ⟨ψ, χ⟩ = χᴴ T ψ.

Frames are obtained by Gram–Schmidt from the coordinate fields (∂1 first).
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidSpec, NonRealCurrent
from .geometry import Geometry, build_geometry, orthonormal_frame_2d
from .report import ResidualEntry, ResidualReport

E1 = np.array([[1j, 0], [0, -1j]])
E2 = np.array([[0, 1], [-1, 0]], dtype=complex)
RIEMANN_GENERATORS = (E1, E2)
V_UNIT = np.array([1.0 + 0j, 0.0])

T_GEN = np.array([[0, 1], [1, 0]], dtype=complex)
LORENTZ_GENERATORS = (T_GEN, -1j * T_GEN @ E1, -1j * T_GEN @ E2)
LORENTZ_SIGNS = (-1.0, 1.0, 1.0)   # ḡ(s_a, s_a)

CURRENT_RTOL = 1e-12


def clifford_relations_defect() -> float:
    """Max deviation from s_a s_b + s_b s_a = −2 ḡ(s_a, s_b) over both representations."""
    I = np.eye(2)
    worst = 0.0
    for a, A in enumerate(RIEMANN_GENERATORS):
        for b, B in enumerate(RIEMANN_GENERATORS):
            worst = max(worst, np.max(np.abs(A @ B + B @ A + 2.0 * (a == b) * I)))
    for a, A in enumerate(LORENTZ_GENERATORS):
        for b, B in enumerate(LORENTZ_GENERATORS):
            target = -2.0 * LORENTZ_SIGNS[a] * (a == b) * I
            worst = max(worst, np.max(np.abs(A @ B + B @ A - target)))
    return float(worst)


def _act(M: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Constant 2×2 matrix acting on a spinor field psi[s, *grid]."""
    return np.einsum("st,t...->s...", M, psi)


def _act_field(coeffs: np.ndarray, gens, psi: np.ndarray) -> np.ndarray:
    """Σ_a coeffs[a] · gens[a] · psi with coefficient fields."""
    out = np.zeros(psi.shape, dtype=complex)
    for c, M in zip(coeffs, gens):
        out = out + c * _act(M, psi)
    return out


# --- surfaces -----------------------------------------------------------------

def frame_components(E: np.ndarray, g: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Frame coefficients g(X, e_a) of a vector field X."""
    gX = np.einsum("ij...,j...->i...", g, X)
    return np.einsum("ai...,i...->a...", E, gX)


def clifford_2d(E: np.ndarray, g: np.ndarray, X: np.ndarray, psi: np.ndarray) -> np.ndarray:
    return _act_field(frame_components(E, g, X), RIEMANN_GENERATORS, psi)


def spin_connection_2d(geo: Geometry) -> tuple[np.ndarray, np.ndarray]:
    """Frame and ω₁₂(∂_i) = g(∇_i e1, e2)."""
    E = orthonormal_frame_2d(geo.g)
    nab_e1 = geo.nabla(E[0], "u")                    # [i, a] = (∇_i e1)^a
    w12 = np.einsum("ia...,ab...,b...->i...", nab_e1, geo.g, E[1])
    return E, w12


def spinor_derivative_2d(geo: Geometry, psi: np.ndarray, E=None, w12=None) -> np.ndarray:
    """``out[i] = ∇^S_{∂_i} ψ = ∂_i ψ + ½ ω₁₂(∂_i) e1·e2·ψ``."""
    if E is None or w12 is None:
        E, w12 = spin_connection_2d(geo)
    e12psi = _act(E1 @ E2, psi)
    return np.stack([geo.chart.d(psi, i) + 0.5 * w12[i] * e12psi for i in range(2)])


def dirac_current(psi: np.ndarray, g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(U_ψ, u_ψ) with g(U_ψ, e_j) = −i(e_j·ψ, ψ) and u_ψ = ‖ψ‖²."""
    E = orthonormal_frame_2d(g)
    comps = np.stack([-1j * np.einsum("s...,st,t...->...", psi.conj(), M, psi) for M in RIEMANN_GENERATORS])
    u = np.real(np.einsum("s...,s...->...", psi.conj(), psi))
    scale = max(1.0, float(np.max(np.abs(u))))
    if np.max(np.abs(comps.imag)) > CURRENT_RTOL * scale:
        raise NonRealCurrent(f"Dirac current has imaginary part {np.max(np.abs(comps.imag)):.3e}")
    U = np.einsum("a...,ai...->i...", comps.real, E)
    return U, u


def w_killing_residual(geo: Geometry, psi: np.ndarray, W: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(∇^S_{e_j}φ − (i/2) W(e_j)·φ for j = 1, 2;  U_φ·φ − i u_φ φ)."""
    E, w12 = spin_connection_2d(geo)
    nab = spinor_derivative_2d(geo, psi, E, w12)
    first = []
    for j in range(2):
        nab_j = np.einsum("i...,is...->s...", E[j], nab)
        WEj = np.einsum("ab...,b...->a...", W, E[j])
        first.append(nab_j - 0.5j * clifford_2d(E, geo.g, WEj, psi))
    U, u = dirac_current(psi, geo.g)
    second = clifford_2d(E, geo.g, U, psi) - 1j * u * psi
    return np.stack(first), second


def killing_consequence_residuals(geo: Geometry, psi: np.ndarray, W: np.ndarray) -> dict:
    """Identities implied by an imaginary W-Killing spinor, as residual fields."""
    E, w12 = spin_connection_2d(geo)
    U, u = dirac_current(psi, geo.g)
    II = np.einsum("ca...,cb...->ab...", geo.g, W)
    du = geo.chart.grad(u)
    IIU = np.einsum("xy...,y...->x...", II, U)
    nabU = geo.nabla(U, "u")
    nabII = geo.nabla(II, "dd")
    D = nabII - np.swapaxes(nabII, 0, 1)
    nab = spinor_derivative_2d(geo, psi, E, w12)
    dirac = np.zeros(psi.shape, dtype=complex)
    for j in range(2):
        nab_j = np.einsum("i...,is...->s...", E[j], nab)
        dirac = dirac + _act(RIEMANN_GENERATORS[j], nab_j)
    trW = np.einsum("aa...->...", W)
    WU = np.einsum("ab...,b...->a...", W, U)
    WW = np.einsum("ax...,ab...,by...->xy...", W, geo.g, W)   # g(WX, WY)
    hess = geo.hessian(u)
    return {
        "du": du + IIU,                                                   # X(u) + g(WX, U)
        "nabla_U": np.swapaxes(nabU, 0, 1) + u * W,                       # ∇U + uW
        "dirac": dirac + 0.5j * trW * psi,                                # Dφ + (i/2) tr W φ
        "grad_u": WU + geo.grad(u),                                       # W(U) + grad u
        "dW_U": np.einsum("xya...,a...->xy...", D, U),                    # g(d^∇W(X,Y), U)
        "hess_u": hess + np.einsum("xya...,a...->xy...", nabII, U) - u * WW,
    }


def spin_report(chart, g: np.ndarray, psi: np.ndarray, W: np.ndarray, tol: float | None = None,
                mask=None) -> ResidualReport:
    from .fields import component_norms
    geo = build_geometry(chart, g)
    first, second = w_killing_residual(geo, psi, W)
    cons = killing_consequence_residuals(geo, psi, W)
    rep = ResidualReport("spin_constraints")
    rep.add(ResidualEntry("killing_equation", *component_norms(first, 2, mask), tol))
    rep.add(ResidualEntry("current_action", *component_norms(second, 1, mask), tol))
    nidx = {"du": 1, "nabla_U": 2, "dirac": 1, "grad_u": 1, "dW_U": 2, "hess_u": 2}
    for name, arr in cons.items():
        rep.add(ResidualEntry(name, *component_norms(arr, nidx[name], mask), tol))
    return rep


# --- Lorentzian blocks ----------------------------------------------------------

def lorentz_frame(block) -> np.ndarray:
    """Frame (T, e1, e2) of the block as (3, 3, L, *grid) coordinate components."""
    if block.n != 2:
        raise InvalidSpec("spinor extension needs a 2D spatial chart")
    lam = block.lam
    F = np.zeros((3, 3) + lam.shape)
    F[0, 0] = 1.0 / lam
    E = orthonormal_frame_2d(block.g)
    F[1, 1:] = E[0]
    F[2, 1:] = E[1]
    return F


def spin_connection_3d(block, F: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Frame and ``Om[μ]``, the 2×2 matrix Ω(∂_μ) = ¼ Σ ε_a ε_b ω_ab(∂_μ) s_a s_b."""
    geo = block.geometry
    F = lorentz_frame(block) if F is None else F
    nabF = np.stack([geo.nabla(F[a], "u") for a in range(3)])        # [a, μ, ν]
    omega = np.einsum("amn...,np...,bp...->abm...", nabF, block.gbar, F)   # ω_ab(∂_μ)
    shape = omega.shape[3:]
    Om = np.zeros((3, 2, 2) + shape, dtype=complex)
    for a in range(3):
        for b in range(3):
            if a == b:
                continue
            M = LORENTZ_SIGNS[a] * LORENTZ_SIGNS[b] * 0.25 * (LORENTZ_GENERATORS[a] @ LORENTZ_GENERATORS[b])
            Om = Om + np.einsum("st,m...->mst...", M, omega[a, b])
    return F, Om


def embed_slice_spinor(phi0: np.ndarray) -> np.ndarray:
    """Slice spinors are used unchanged as ambient spinors; e_j·φ = iT·E_j·φ by construction."""
    return np.asarray(phi0, dtype=complex).copy()


def _interp_half(A: np.ndarray, j: int) -> np.ndarray:
    """Cubic Lagrange value at level j + ½ from neighbouring levels (axis 2 after the 2×2 block)."""
    L = A.shape[2]
    if 1 <= j <= L - 3:
        idx, w = (j - 1, j, j + 1, j + 2), (-1 / 16, 9 / 16, 9 / 16, -1 / 16)
    elif j == 0:
        idx, w = (0, 1, 2, 3), (5 / 16, 15 / 16, -5 / 16, 1 / 16)
    else:
        idx, w = (L - 4, L - 3, L - 2, L - 1), (1 / 16, -5 / 16, 15 / 16, 5 / 16)
    return sum(wk * A[:, :, i] for wk, i in zip(w, idx))


def transport(Omt: np.ndarray, phi0: np.ndarray, dt: float, backward: bool = False) -> np.ndarray:
    """Integrate ∂_t φ = −Ω(∂_t) φ with RK4 across all levels.

    ``Omt`` has shape (2, 2, L, *grid).  Returns φ on every level, shape
    (2, L, *grid).  With ``backward`` the integration starts at the last level.
    """
    L = Omt.shape[2]
    out = np.zeros((2, L) + Omt.shape[3:], dtype=complex)

    def f(M, p):
        return -np.einsum("st...,t...->s...", M, p)

    order = range(L - 1, 0, -1) if backward else range(L - 1)
    start = L - 1 if backward else 0
    out[:, start] = phi0
    h = -dt if backward else dt
    for j in order:
        jn = j - 1 if backward else j + 1
        lo = min(j, jn)
        Mh = _interp_half(Omt, lo)
        M0, M1 = Omt[:, :, j], Omt[:, :, jn]
        p = out[:, j]
        k1 = f(M0, p)
        k2 = f(Mh, p + 0.5 * h * k1)
        k3 = f(Mh, p + 0.5 * h * k2)
        k4 = f(M1, p + h * k3)
        out[:, jn] = p + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
    return out


def extend_spinor(block, phi0: np.ndarray) -> np.ndarray:
    """Parallel transport of a slice spinor along the t-lines of the block."""
    _, Om = spin_connection_3d(block)
    return transport(Om[0], embed_slice_spinor(phi0), block.dt)


def lorentz_dirac_current(block, phi: np.ndarray, F: np.ndarray | None = None) -> np.ndarray:
    """V_φ with ḡ(V_φ, X) = −⟨X·φ, φ⟩, in coordinate components."""
    F = lorentz_frame(block) if F is None else F
    V = np.zeros((3,) + phi.shape[1:])
    for a in range(3):
        val = -np.einsum("s...,st,t...->...", phi.conj(), T_GEN @ LORENTZ_GENERATORS[a], phi)
        V = V + LORENTZ_SIGNS[a] * val.real * F[a]
    return V


def parallel_spinor_residual(block, phi: np.ndarray) -> dict:
    """∇^S̄_{e_i}φ (i = 1, 2) and ∇^S̄_T φ, V·φ, V_φ − V and u − ‖φ‖²."""
    F, Om = spin_connection_3d(block)
    dphi = np.stack([block.chart.d(phi, m) for m in range(3)])       # [μ, s]
    nab = dphi + np.einsum("mst...,t...->ms...", Om, phi)           # ∇^S̄_{∂μ} φ
    frame_nab = np.stack([np.einsum("m...,ms...->s...", F[a], nab) for a in range(3)])
    V = block.V()
    Vflat = np.einsum("ab...,b...->a...", block.gbar, V)
    coeff = [LORENTZ_SIGNS[a] * np.einsum("a...,a...->...", Vflat, F[a]) for a in range(3)]
    Vphi = _act_field(coeff, LORENTZ_GENERATORS, phi)
    cur = lorentz_dirac_current(block, phi, F)
    norm2 = np.real(np.einsum("s...,s...->...", phi.conj(), phi))
    return {"nabla_spatial": frame_nab[1:], "nabla_T": frame_nab[0], "V_dot_phi": Vphi,
            "current_minus_V": cur - V, "u_minus_norm": block.u - norm2}


def parallel_spinor_report(block, phi: np.ndarray, tol: float | None = None) -> ResidualReport:
    from .fields import component_norms
    r = parallel_spinor_residual(block, phi)
    m = block.mask()
    rep = ResidualReport("parallel_spinor")
    for name, nidx in (("nabla_spatial", 2), ("nabla_T", 1), ("V_dot_phi", 1),
                       ("current_minus_V", 1), ("u_minus_norm", 0)):
        rep.add(ResidualEntry(name, *component_norms(r[name], nidx, m), tol))
    return rep
