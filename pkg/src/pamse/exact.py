"""Exact small-system computations on the joint catalyst/walker state space.

The joint basis is indexed as eta_index * n_sites^p + walker_multi_index with
configurations enumerated as bit masks. Everything is plain scipy sparse
linear algebra; moments use a spectral shift so arbitrary horizons stay in
range.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from .exclusion import torus_bonds
from .lattice import Kernel, Torus

DEFAULT_STATE_CAP = 2**14 * 16


@dataclass(frozen=True)
class OperatorSpec:
    """Joint model: exclusion on the torus plus p walkers with diffusion
    constant kappa, coupled through V(eta, x) = gamma * sum_i eta(x_i)."""

    torus: Torus
    kernel: Kernel
    kappa: float
    p: int
    rho: float
    gamma: float = 1.0
    cap: int = DEFAULT_STATE_CAP

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError("kappa must be >= 0")
        if self.p < 0:
            raise ValueError("walker count must be >= 0")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("density must lie in (0, 1)")
        if self.joint_dim > self.cap:
            raise ValueError(f"state space {self.joint_dim} exceeds cap {self.cap}")

    @property
    def n_sites(self) -> int:
        return self.torus.n_sites

    @property
    def n_eta(self) -> int:
        return 2**self.n_sites

    @property
    def n_walker(self) -> int:
        return self.n_sites**self.p

    @property
    def joint_dim(self) -> int:
        return self.n_eta * self.n_walker


@dataclass
class SparseOperator:
    matrix: sp.csr_matrix
    n_eta: int
    n_walker: int

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def to_coo_text(self, path: str) -> None:
        coo = self.matrix.tocoo()
        with open(path, "w") as fh:
            fh.write(f"# dim={self.dim} n_eta={self.n_eta} n_walker={self.n_walker}\n")
            for i, j, v in zip(coo.row, coo.col, coo.data):
                fh.write(f"{i} {j} {float(v)!r}\n")


def occupation_bits(n_sites: int) -> np.ndarray:
    """(2^n, n) matrix of site occupations per configuration index."""
    eta = np.arange(2**n_sites, dtype=np.int64)
    return ((eta[:, None] >> np.arange(n_sites)) & 1).astype(np.int8)


def nu_weights(n_sites: int, rho: float) -> np.ndarray:
    """Bernoulli product weights over all 2^n configurations."""
    counts = occupation_bits(n_sites).sum(axis=1)
    return rho**counts * (1.0 - rho) ** (n_sites - counts)


def build_se_generator(torus: Torus, kernel: Kernel) -> sp.csr_matrix:
    """Stirring generator on {0,1}^sites: swap across each unoriented bond."""
    n = torus.n_sites
    if 2**n > DEFAULT_STATE_CAP:
        raise ValueError("configuration space exceeds cap")
    a, b, rates = torus_bonds(torus, kernel)
    eta = np.arange(2**n, dtype=np.int64)
    rows, cols, vals = [], [], []
    for ai, bi, r in zip(a, b, rates):
        if ai == bi:
            continue
        bit_a = (eta >> int(ai)) & 1
        bit_b = (eta >> int(bi)) & 1
        differ = bit_a != bit_b
        src = eta[differ]
        dst = src ^ ((1 << int(ai)) | (1 << int(bi)))
        rows.append(src)
        cols.append(dst)
        vals.append(np.full(len(src), r))
    if rows:
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        vals = np.concatenate(vals)
    gen = sp.coo_matrix((vals, (rows, cols)), shape=(2**n, 2**n)).tocsr()
    gen = gen - sp.diags(np.asarray(gen.sum(axis=1)).ravel())
    return gen


def oriented_se_generator(torus: Torus, kernel: Kernel) -> sp.csr_matrix:
    """Independent construction from the oriented-jump form: a particle at x
    jumps to a vacancy at y at rate p(x, y). Used as a cross-check."""
    n = torus.n_sites
    eta = np.arange(2**n, dtype=np.int64)
    rows, cols, vals = [], [], []
    for vec, w in kernel.offsets:
        perm = torus.shift_table(vec)
        for x in range(n):
            y = int(perm[x])
            if y == x:
                continue
            occ_x = (eta >> x) & 1
            occ_y = (eta >> y) & 1
            ok = (occ_x == 1) & (occ_y == 0)
            src = eta[ok]
            dst = src ^ ((1 << x) | (1 << y))
            rows.append(src)
            cols.append(dst)
            vals.append(np.full(len(src), kernel.rate * w))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    gen = sp.coo_matrix((vals, (rows, cols)), shape=(2**n, 2**n)).tocsr()
    gen = gen - sp.diags(np.asarray(gen.sum(axis=1)).ravel())
    return gen


def walker_laplacian(torus: Torus) -> sp.csr_matrix:
    """Nearest-neighbour Laplacian Delta f(x) = sum_{|y-x|=1} [f(y) - f(x)]."""
    n = torus.n_sites
    rows, cols = [], []
    for j in range(torus.d):
        for sign in (1, -1):
            vec = tuple(sign if i == j else 0 for i in range(torus.d))
            perm = torus.shift_table(vec)
            rows.append(np.arange(n))
            cols.append(perm)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    lap = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n)).tocsr()
    return lap - sp.diags(np.asarray(lap.sum(axis=1)).ravel())


def potential_diag(spec: OperatorSpec) -> np.ndarray:
    """V over the joint basis: gamma * sum_i eta(x_i)."""
    bits = occupation_bits(spec.n_sites)
    n, p = spec.n_sites, spec.p
    walker = np.arange(spec.n_walker)
    v = np.zeros((spec.n_eta, spec.n_walker))
    for i in range(p):
        x_i = (walker // n ** (p - 1 - i)) % n
        v += bits[:, x_i]
    return spec.gamma * v.ravel()


def _joint_free_generator(spec: OperatorSpec, se_rate_factor: float,
                          walker_factor: float) -> sp.csr_matrix:
    gen_se = build_se_generator(spec.torus, spec.kernel) * se_rate_factor
    lap = walker_laplacian(spec.torus)
    n = spec.n_sites
    joint = sp.kron(gen_se, sp.identity(spec.n_walker, format="csr"), format="csr")
    for i in range(spec.p):
        left = sp.identity(spec.n_eta * n**i, format="csr")
        right = sp.identity(n ** (spec.p - 1 - i), format="csr")
        joint = joint + walker_factor * sp.kron(sp.kron(left, lap), right, format="csr")
    return joint


def build_joint_generator(spec: OperatorSpec, include_potential: bool = True) -> SparseOperator:
    """G^kappa_V = L + kappa * sum_i Delta_i (+ V on the diagonal)."""
    joint = _joint_free_generator(spec, 1.0, spec.kappa)
    if include_potential:
        joint = joint + sp.diags(potential_diag(spec))
    return SparseOperator(joint.tocsr(), spec.n_eta, spec.n_walker)


def build_scaled_generator(spec: OperatorSpec) -> SparseOperator:
    """Time-scaled joint generator (1/kappa) L + sum_i Delta_i: the catalyst
    is slowed by kappa while walkers run at their bare rate 2d."""
    if spec.kappa <= 0:
        raise ValueError("scaled generator needs kappa > 0")
    joint = _joint_free_generator(spec, 1.0 / spec.kappa, 1.0)
    return SparseOperator(joint.tocsr(), spec.n_eta, spec.n_walker)


def start_vector(spec: OperatorSpec) -> np.ndarray:
    """nu_rho over configurations, all walkers at the origin site."""
    pi = np.zeros(spec.joint_dim)
    w = nu_weights(spec.n_sites, spec.rho)
    pi[np.arange(spec.n_eta) * spec.n_walker] = w
    return pi


def log_moment(spec: OperatorSpec, t: float) -> float:
    """log E_{nu_rho, 0..0} exp[int_0^t V(Y(s)) ds], spectrally shifted."""
    if t < 0:
        raise ValueError("negative time")
    if t == 0:
        return 0.0
    shift = spec.gamma * spec.p
    if spec.kappa == 0.0 and spec.p >= 1:
        # walkers frozen at the origin: V = gamma * p * eta(0)
        gen = build_se_generator(spec.torus, spec.kernel)
        bits = occupation_bits(spec.n_sites)
        diag = spec.gamma * spec.p * bits[:, 0].astype(float)
        mat = (gen + sp.diags(diag - shift)).tocsr()
        v = expm_multiply(mat * t, np.ones(spec.n_eta))
        val = float(nu_weights(spec.n_sites, spec.rho) @ v)
    else:
        op = build_joint_generator(spec)
        mat = op.matrix - sp.identity(op.dim) * shift
        v = expm_multiply(mat * t, np.ones(op.dim))
        val = float(start_vector(spec) @ v)
    return np.log(val) + shift * t


def exact_moment(spec: OperatorSpec, t: float) -> float:
    return float(np.exp(log_moment(spec, t)))


def exact_lambda_profile(spec: OperatorSpec, t_grid) -> np.ndarray:
    """Lambda_p(t) = log-moment / (p t) on a grid; nan at t = 0."""
    out = []
    for t in np.asarray(t_grid, dtype=float):
        if t == 0:
            out.append(np.nan)
        else:
            out.append(log_moment(spec, t) / (spec.p * t))
    return np.asarray(out)


def moment_slope(spec: OperatorSpec, t: float) -> float:
    """d/dt log E exp[int V] at time t (exact resolvent-free form)."""
    shift = spec.gamma * spec.p
    op = build_joint_generator(spec)
    mat = op.matrix - sp.identity(op.dim) * shift
    v = expm_multiply(mat * t, np.ones(op.dim))
    pi = start_vector(spec)
    return shift + float(pi @ (mat @ v)) / float(pi @ v)


def reversibility_defect(spec: OperatorSpec) -> float:
    """Max asymmetry of D G_V with D the nu_rho x counting weights."""
    op = build_joint_generator(spec)
    w = np.repeat(nu_weights(spec.n_sites, spec.rho), spec.n_walker)
    m = sp.diags(w) @ op.matrix
    return float(abs(m - m.T).max())


def martingale_check(generator: sp.spmatrix, psi: np.ndarray, r: float,
                     kappa: float, t: float) -> float:
    """Max deviation of E_{eta,x}[N_t^r] from 1 over all start states.

    N^r is the exponential martingale of the tilting exp[(r/kappa) psi]. The
    expectation is evaluated along two routes: through the tilted semigroup
    (whose generator is D^{-1} A D minus its own action on constants) and
    through the Feynman-Kac form with the tilting's carre-du-champ field as a
    killing potential. Both must return the constant 1.
    """
    dim = generator.shape[0]
    ones = np.ones(dim)
    scale = np.exp((r / kappa) * (psi - psi.max()))
    tilted = sp.diags(1.0 / scale) @ generator @ sp.diags(scale)
    carre = np.asarray(tilted @ ones).ravel()  # (e^{-r psi/k} A e^{r psi/k})(z)
    new_gen = (tilted - sp.diags(carre)).tocsr()
    dev1 = np.max(np.abs(expm_multiply(new_gen * t, ones) - 1.0))
    killed = (generator - sp.diags(carre)).tocsr()
    dev2 = np.max(np.abs(expm_multiply(killed * t, scale) / scale - 1.0))
    return float(max(dev1, dev2))


def kappa_sweep_mu(torus: Torus, kernel: Kernel, rho: float, p: int,
                   kappas, gamma: float = 1.0) -> np.ndarray:
    """mu_p over a kappa grid (dense top eigenvalue per point)."""
    from .variational import top_eigenvalue

    out = []
    for kap in kappas:
        spec = OperatorSpec(torus=torus, kernel=kernel, kappa=float(kap), p=p,
                            rho=rho, gamma=gamma)
        out.append(top_eigenvalue(spec).mu)
    return np.asarray(out)
