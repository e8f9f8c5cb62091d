"""Rayleigh-Ritz machinery for the joint operator, the bump-test-function
lower bound, occupation-time tilt maximization, and Dirichlet eigenvalues.

The joint operator is self-adjoint in the Bernoulli-weighted inner product,
so iteration happens on its diagonal similarity transform D^{1/2} G D^{-1/2},
which is symmetric in the plain Euclidean sense and has the same spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from .exact import (OperatorSpec, build_joint_generator, nu_weights,
                    occupation_bits, potential_diag)
from .exclusion import torus_bonds
from .lattice import Torus


@dataclass
class TestFunction:
    """Values on the joint (configuration, walker) basis, normalized in
    L^2(nu_rho x counting)."""

    values: np.ndarray
    spec: OperatorSpec

    def norm(self) -> float:
        w = np.repeat(nu_weights(self.spec.n_sites, self.spec.rho), self.spec.n_walker)
        return float(np.sqrt(np.sum(w * self.values**2)))

    def normalized(self) -> "TestFunction":
        return TestFunction(self.values / self.norm(), self.spec)


def random_test_function(spec: OperatorSpec, seed) -> TestFunction:
    rng = np.random.default_rng(seed)
    return TestFunction(rng.standard_normal(spec.joint_dim), spec).normalized()


def quadratic_form_parts(f: TestFunction, spec: OperatorSpec):
    """(potential part, exclusion Dirichlet form, walker Dirichlet form):
    the quadratic form of the joint operator is part1 - part2 - kappa*part3."""
    n = spec.n_sites
    w_eta = nu_weights(n, spec.rho)
    w = np.repeat(w_eta, spec.n_walker)
    vals = f.values
    a1 = float(np.sum(w * potential_diag(spec) * vals**2))

    grid = vals.reshape(spec.n_eta, spec.n_walker)
    a2 = 0.0
    eta = np.arange(spec.n_eta, dtype=np.int64)
    a_idx, b_idx, rates = torus_bonds(spec.torus, spec.kernel)
    for ai, bi, r in zip(a_idx, b_idx, rates):
        if ai == bi:
            continue
        swapped = eta ^ ((1 << int(ai)) | (1 << int(bi)))
        bit_a = (eta >> int(ai)) & 1
        bit_b = (eta >> int(bi)) & 1
        act = bit_a != bit_b  # swap changes the state only across such bonds
        diff = grid[swapped[act]] - grid[act]
        a2 += 0.5 * r * float(np.sum(w_eta[act, None] * diff**2))

    a3 = 0.0
    walker = np.arange(spec.n_walker)
    for i in range(spec.p):
        x_i = (walker // n ** (spec.p - 1 - i)) % n
        for j in range(spec.torus.d):
            for sign in (1, -1):
                vec = tuple(sign if jj == j else 0 for jj in range(spec.torus.d))
                perm = spec.torus.shift_table(vec)
                moved = walker + (perm[x_i] - x_i) * n ** (spec.p - 1 - i)
                diff = grid[:, moved] - grid
                a3 += 0.5 * float(np.sum(w_eta[:, None] * diff**2))
    return a1, a2, a3


def rayleigh_quotient(f: TestFunction, spec: OperatorSpec, tol: float = 1e-9) -> float:
    """(G f, f) for a normalized f, assembled from the three exact parts."""
    if abs(f.norm() - 1.0) > tol:
        raise ValueError("test function must be normalized")
    a1, a2, a3 = quadratic_form_parts(f, spec)
    return a1 - a2 - spec.kappa * a3


@dataclass
class TopEigen:
    mu: float
    lam: float
    vector: np.ndarray
    residual: float
    converged: bool
    method: str


def _symmetrized(spec: OperatorSpec):
    op = build_joint_generator(spec).matrix
    w = np.repeat(nu_weights(spec.n_sites, spec.rho), spec.n_walker)
    sq = np.sqrt(w)
    sym = sp.diags(sq) @ op @ sp.diags(1.0 / sq)
    return op, sym, sq


def top_eigenvalue(spec: OperatorSpec, tol: float = 1e-10,
                   dense_cutoff: int = 1200) -> TopEigen:
    """Largest spectral point of the joint operator; Lanczos on the
    symmetrized matrix, dense solve below the cutoff."""
    op, sym, sq = _symmetrized(spec)
    dim = sym.shape[0]
    if dim <= dense_cutoff:
        dense = 0.5 * (sym.toarray() + sym.toarray().T)
        evals, evecs = np.linalg.eigh(dense)
        mu = float(evals[-1])
        u = evecs[:, -1]
        method = "dense"
    else:
        evals, evecs = eigsh(0.5 * (sym + sym.T), k=1, which="LA", tol=tol,
                             maxiter=5000)
        mu = float(evals[0])
        u = evecs[:, 0]
        method = "lanczos"
    resid = float(np.linalg.norm(sym @ u - mu * u))
    vec = u / sq
    vec /= np.sqrt(np.sum((sq * vec) ** 2))
    return TopEigen(mu=mu, lam=mu / max(spec.p, 1), vector=vec,
                    residual=resid, converged=resid <= max(tol * 100, 1e-8),
                    method=method)


# ---------------------------------------------------------------------------
# Bump test function: lower bound for lambda_1 on large walker boxes.
# ---------------------------------------------------------------------------


@dataclass
class BumpBound:
    epsilon: float
    rho: float
    kappa: float
    bound: float
    phi: np.ndarray
    phi_energy: float
    numerator_parts: tuple


def _bump_profile(torus: Torus, width: float) -> np.ndarray:
    coords = torus.all_coords()
    center = torus.L // 2
    d2 = np.sum((coords - center) ** 2, axis=1).astype(float)
    phi = np.exp(-d2 / (2.0 * width**2))
    return phi / np.linalg.norm(phi)


def _dirichlet_energy(torus: Torus, phi: np.ndarray) -> float:
    """sum over ordered nearest-neighbour pairs of (phi(x) - phi(y))^2."""
    grid = phi.reshape((torus.L,) * torus.d)
    acc = 0.0
    for axis in range(torus.d):
        diff = np.roll(grid, -1, axis=axis) - grid
        acc += 2.0 * float(np.sum(diff**2))  # both orientations
    return acc


def test_function_bound(epsilon: float, rho: float, kappa: float,
                        torus: Torus) -> BumpBound:
    """Lower bound on lambda_1 from the occupation-tilted bump
    f(eta, x) = (1 + eps * eta(x)) phi(x) / sqrt(1 + (2 eps + eps^2) rho).

    The Bernoulli integrals collapse in closed form, so the quotient is exact
    on the truncation without enumerating configurations; phi is a discrete
    Gaussian whose width is found by bisection so its Dirichlet energy fits
    the eps^2 budget.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    lo, hi = 0.6, float(torus.L)
    if _dirichlet_energy(torus, _bump_profile(torus, hi)) > epsilon**2:
        raise ValueError("box too small for the requested epsilon budget")
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if _dirichlet_energy(torus, _bump_profile(torus, mid)) <= epsilon**2:
            hi = mid
        else:
            lo = mid
    phi = _bump_profile(torus, hi)
    energy = _dirichlet_energy(torus, phi)

    norm2 = 1.0 + (2 * epsilon + epsilon**2) * rho
    part1 = (1.0 + 2 * epsilon + epsilon**2) * rho  # potential term
    # exclusion Dirichlet form of the affine tilt, wrapped kernel mass 1
    kern_mass = 1.0
    part2 = epsilon**2 * rho * (1 - rho) * kern_mass
    # walker Dirichlet form: quadratic + neighbour-product pieces
    grid = phi.reshape((torus.L,) * torus.d)
    nn_prod = 0.0
    for axis in range(torus.d):
        nn_prod += 2.0 * float(np.sum(grid * np.roll(grid, -1, axis=axis)))
    part3 = 0.5 * norm2 * energy + epsilon**2 * rho * (1 - rho) * nn_prod
    bound = (part1 - part2 - kappa * part3) / norm2
    return BumpBound(epsilon=epsilon, rho=rho, kappa=kappa, bound=bound,
                     phi=phi, phi_energy=energy,
                     numerator_parts=(part1, part2, kappa * part3))


def bump_as_test_function(bump: BumpBound, spec: OperatorSpec) -> TestFunction:
    """Materialize the bump bound's f on an enumerable joint space (the
    walker torus must equal the spec torus)."""
    if spec.p != 1:
        raise ValueError("bump function is a p = 1 object")
    bits = occupation_bits(spec.n_sites).astype(float)
    norm = np.sqrt(1.0 + (2 * bump.epsilon + bump.epsilon**2) * bump.rho)
    vals = (1.0 + bump.epsilon * bits) * bump.phi[None, :] / norm
    return TestFunction(vals.ravel(), spec)


# ---------------------------------------------------------------------------
# Occupation-time tilt: quadratic rate bound and its maximization.
# ---------------------------------------------------------------------------


def psi_rate_bound(alpha: float, rho: float, G: float) -> float:
    """Quadratic lower bound (sqrt(alpha) - sqrt(rho))^2 / (2G) for the
    occupation-time rate function; zero exactly at alpha = rho."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    return (np.sqrt(alpha) - np.sqrt(rho)) ** 2 / (2.0 * G)


@dataclass
class TiltMax:
    value: float
    maximizer: float
    interior: bool


def varadhan_closed_form(gamma: float, rho: float, G: float) -> TiltMax:
    """max_beta [gamma beta - (sqrt(beta)-sqrt(rho))^2 / 2G] over [0, 1]:
    interior value rho*gamma/(1-2G*gamma) at beta = rho/(1-2G*gamma)^2 when
    that maximizer is feasible, else the boundary value at beta = 1."""
    if gamma == 0.0:
        return TiltMax(value=0.0, maximizer=rho, interior=True)
    if 2.0 * G * gamma >= 1.0:
        raise ValueError("tilt too strong: 2 G gamma >= 1 (closed form diverges)")
    beta = rho / (1.0 - 2.0 * G * gamma) ** 2
    if beta <= 1.0:
        return TiltMax(value=rho * gamma / (1.0 - 2.0 * G * gamma),
                       maximizer=beta, interior=True)
    return TiltMax(value=gamma - psi_rate_bound(1.0, rho, G), maximizer=1.0,
                   interior=False)


def occupation_tilt_max(gamma: float, rho: float, G: float,
                        n_grid: int = 20001) -> TiltMax:
    """Numerical maximization of the tilted functional over a dense grid with
    golden-section refinement; independent of the closed form."""
    betas = np.linspace(0.0, 1.0, n_grid)
    vals = gamma * betas - (np.sqrt(betas) - np.sqrt(rho)) ** 2 / (2 * G)
    k = int(np.argmax(vals))
    lo = betas[max(k - 1, 0)]
    hi = betas[min(k + 1, n_grid - 1)]
    invphi = (np.sqrt(5.0) - 1.0) / 2.0

    def f(b):
        return gamma * b - (np.sqrt(b) - np.sqrt(rho)) ** 2 / (2 * G)

    a, b = lo, hi
    c, d_ = b - invphi * (b - a), a + invphi * (b - a)
    for _ in range(200):
        if f(c) > f(d_):
            b, d_ = d_, c
            c = b - invphi * (b - a)
        else:
            a, c = c, d_
            d_ = a + invphi * (b - a)
    mx = 0.5 * (a + b)
    return TiltMax(value=float(f(mx)), maximizer=float(mx),
                   interior=0.0 < mx < 1.0)


@dataclass
class SurrogateLambda:
    p: int
    value: float
    branch: str
    label: str = "SURROGATE"


def lambda0_via_varadhan(p_list, rho: float, G: float) -> list:
    """Tilt-maximization surrogate for the zero-diffusion exponents,
    lambda_p(0) ~ (1/p) max_alpha [p alpha - quadratic bound]; the quadratic
    stand-in for the true rate function makes every output a SURROGATE.

    The sequence is strictly increasing in p; values stay in [rho, 1)."""
    out = []
    for p in p_list:
        if p <= 0:
            raise ValueError("moment order must be positive")
        tm = occupation_tilt_max(float(p), rho, G)
        out.append(SurrogateLambda(p=int(p), value=tm.value / p,
                                   branch="interior" if tm.interior else "boundary"))
    return out


# ---------------------------------------------------------------------------
# Dirichlet eigenvalue of -kappa Delta on a finite box.
# ---------------------------------------------------------------------------


def dirichlet_eigenvalue(kappa: float, shape) -> float:
    """Principal eigenvalue of -kappa * Delta on the box prod [0, shape_i)
    with zero boundary conditions; Delta is the 2d-rate Laplacian."""
    shape = tuple(int(s) for s in shape)
    if any(s < 1 for s in shape):
        raise ValueError("box must be non-empty")
    d = len(shape)
    n = int(np.prod(shape))
    idx = np.arange(n).reshape(shape)
    rows, cols = [], []
    for axis in range(d):
        src = np.take(idx, np.arange(shape[axis] - 1), axis=axis).ravel()
        dst = np.take(idx, np.arange(1, shape[axis]), axis=axis).ravel()
        rows.extend([src, dst])
        cols.extend([dst, src])
    if rows:
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        adj = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n)).tocsr()
    else:
        adj = sp.csr_matrix((n, n))
    minus_lap = sp.diags(np.full(n, 2.0 * d)) - adj
    if n <= 2000:
        evals = np.linalg.eigvalsh(minus_lap.toarray())
        return float(kappa * evals[0])
    val = eigsh(minus_lap, k=1, which="SA", return_eigenvectors=False)
    return float(kappa * val[0])
