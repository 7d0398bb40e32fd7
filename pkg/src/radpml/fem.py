"""Assembly of the complex-scaled Helmholtz pencil on curved meshes.

The truncated weak form is  <tensor grad u, grad u'> - omega^2 <w u, u'>
with the complex-symmetric (unconjugated) pairing.  In 2D the radial
scaling enters through the polar frame F = (rhat, that):

    tensor(x) = (dt d)^{-1} * A sigma A,   A = dt rhat rhat^T + d that that^T
    w(x) = dt d

where dt, d are the scaling factors at |x| (the cofactor pattern: each
frame direction carries det(J)/stretch with radial stretch d and
tangential stretch dt).  Below the onset radius both factors are one and
the coefficient reduces to (sigma, 1) exactly — interior elements are
assembled bitwise identically with or without a profile.

K and M are assembled in a single element sweep with shared sparsity;
element matrices are mirror-averaged and the full local blocks are
scattered, which makes both matrices exactly symmetric (the duplicate
summation order is mirror-invariant).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse

from .basis import (
    LOCAL_EDGES,
    dof_count,
    lagrange_geometry_basis,
    reference_basis,
    triangle_quadrature,
)
from .errors import (AssemblyError, DomainError, ShiftRejectedError,
                     ValidationError)
from .media import Medium
from .mesh import BOUNDARY_OBSTACLE, BOUNDARY_OUTER, Mesh, REGION_INTERIOR
from .scaling import ScalingProfile

__all__ = [
    "FunctionSpace",
    "AssembledPencil",
    "scaled_tensor",
    "scaled_tensor_3d",
    "assemble",
    "rayleigh_residual",
    "write_matrix_coo",
    "read_matrix_coo",
]

DIRICHLET = "dirichlet"
NEUMANN = "neumann"

#: default boundary conditions: sound-hard obstacle, truncation by a
#: homogeneous Dirichlet condition on the outer circle
DEFAULT_BC = {BOUNDARY_OBSTACLE: NEUMANN, BOUNDARY_OUTER: DIRICHLET}


# ---------------------------------------------------------------------------
# scaled coefficient
# ---------------------------------------------------------------------------

def _factors_at(radii: np.ndarray, profile: ScalingProfile | None):
    if profile is None:
        ones = np.ones_like(radii, dtype=complex)
        return ones, ones.copy()
    return profile.d_tilde(radii), profile.d(radii)


def _tensor_batch(points: np.ndarray, profile: ScalingProfile | None,
                  medium: Medium):
    """Vectorized (tensor, weight) at an array of 2D points."""
    pts = np.asarray(points, dtype=float)
    radii = np.hypot(pts[..., 0], pts[..., 1])
    if np.any(radii == 0.0):
        raise DomainError("the polar coefficient frame is singular at the origin")
    dt, d = _factors_at(radii, profile)
    sigma = medium.sigma
    tensor = np.empty(pts.shape[:-1] + (2, 2), dtype=complex)
    weight = dt * d
    identity = (dt == 1.0) & (d == 1.0)
    # identity region: exactly (sigma, 1), bitwise independent of profile
    tensor[identity] = sigma
    weight = np.where(identity, 1.0 + 0.0j, weight)
    active = ~identity
    if np.any(active):
        rhat = pts[active] / radii[active][..., None]
        that = np.stack([-rhat[..., 1], rhat[..., 0]], axis=-1)
        a_mat = (dt[active][..., None, None]
                 * rhat[..., :, None] * rhat[..., None, :]
                 + d[active][..., None, None]
                 * that[..., :, None] * that[..., None, :])
        sand = np.einsum("...ij,jk,...kl->...il", a_mat, sigma, a_mat)
        tensor[active] = sand / weight[active][..., None, None]
    return tensor, weight


def scaled_tensor(x, profile: ScalingProfile | None, medium: Medium):
    """Diffusion tensor and mass weight of the scaled form at one point."""
    if medium.dim != 2:
        raise ValidationError("the assembled form is two-dimensional")
    tensor, weight = _tensor_batch(np.asarray(x, dtype=float)[None, :],
                                   profile, medium)
    return tensor[0], complex(weight[0])


def scaled_tensor_3d(x, profile: ScalingProfile | None, medium: Medium):
    """3D variant (formula-level check): A = dt^2 rr^T + dt d (I - rr^T),
    prefactor (dt^2 d)^{-1}, weight dt^2 d."""
    if medium.dim != 3:
        raise ValidationError("scaled_tensor_3d expects a 3D medium")
    x = np.asarray(x, dtype=float)
    r = float(np.linalg.norm(x))
    if r == 0.0:
        raise DomainError("the polar coefficient frame is singular at the origin")
    dt, d = _factors_at(np.array([r]), profile)
    dt, d = complex(dt[0]), complex(d[0])
    weight = dt * dt * d
    if dt == 1.0 and d == 1.0:
        return medium.sigma.astype(complex), 1.0 + 0.0j
    rr = np.outer(x / r, x / r)
    a_mat = dt * dt * rr + dt * d * (np.eye(3) - rr)
    return a_mat @ medium.sigma @ a_mat / weight, weight


# ---------------------------------------------------------------------------
# function space
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FunctionSpace:
    """Hierarchic H^1 space of order p on a curved mesh.

    Global dofs are numbered vertices first, then p-1 modes per global
    edge, then interior bubbles per triangle.  Dirichlet-tagged boundary
    dofs are struck from the free numbering.
    """

    mesh: Mesh
    p: int
    bc: dict = field(default_factory=lambda: dict(DEFAULT_BC))
    num_dofs: int = field(init=False)
    element_dofs: np.ndarray = field(init=False)     # (nt, local) into free dofs, -1 constrained
    orientations: np.ndarray = field(init=False)     # (nt, 3) signs
    free_of_global: np.ndarray = field(init=False)

    def __post_init__(self):
        if not 1 <= self.p <= 6:
            raise ValidationError("polynomial order must lie in [1, 6]")
        mesh = self.mesh
        tri = mesh.triangles
        nt = mesh.num_triangles
        nv = mesh.num_vertices
        p = self.p

        edge_index: dict[tuple[int, int], int] = {}
        tri_edge = np.empty((nt, 3), dtype=np.int64)
        for t in range(nt):
            for e, (a, b) in enumerate(LOCAL_EDGES):
                va, vb = int(tri[t, a]), int(tri[t, b])
                key = (va, vb) if va < vb else (vb, va)
                idx = edge_index.setdefault(key, len(edge_index))
                tri_edge[t, e] = idx
        ne = len(edge_index)
        n_edge_modes = p - 1
        n_bubbles = (p - 1) * (p - 2) // 2
        total = nv + ne * n_edge_modes + nt * n_bubbles

        constrained = np.zeros(total, dtype=bool)
        for (va, vb), tag in zip(mesh.boundary_edges, mesh.boundary_tags):
            if self.bc.get(int(tag), NEUMANN) != DIRICHLET:
                continue
            constrained[int(va)] = True
            constrained[int(vb)] = True
            key = (int(va), int(vb)) if va < vb else (int(vb), int(va))
            e = edge_index[key]
            start = nv + e * n_edge_modes
            constrained[start:start + n_edge_modes] = True

        free = np.full(total, -1, dtype=np.int64)
        free[~constrained] = np.arange(int((~constrained).sum()))

        local = dof_count(p)
        element_dofs = np.empty((nt, local), dtype=np.int64)
        element_dofs[:, 0:3] = tri
        pos = 3
        for e in range(3):
            cols = nv + tri_edge[:, e, None] * n_edge_modes + np.arange(n_edge_modes)
            element_dofs[:, pos:pos + n_edge_modes] = cols
            pos += n_edge_modes
        if n_bubbles:
            base = nv + ne * n_edge_modes
            cols = base + np.arange(nt)[:, None] * n_bubbles + np.arange(n_bubbles)
            element_dofs[:, pos:] = cols

        orientations = np.empty((nt, 3), dtype=np.int8)
        for e, (a, b) in enumerate(LOCAL_EDGES):
            orientations[:, e] = np.where(tri[:, a] < tri[:, b], 1, -1)

        object.__setattr__(self, "num_dofs", int((~constrained).sum()))
        object.__setattr__(self, "element_dofs", free[element_dofs])
        object.__setattr__(self, "orientations", orientations)
        object.__setattr__(self, "free_of_global", free)


@dataclass(frozen=True)
class AssembledPencil:
    """Complex-symmetric stiffness/mass pair over the free dofs."""

    stiffness: scipy.sparse.csr_matrix
    mass: scipy.sparse.csr_matrix

    @property
    def size(self) -> int:
        return self.stiffness.shape[0]


def element_matrices(space: FunctionSpace, profile: ScalingProfile | None,
                     medium: Medium, triangle_ids, quad_degree: int | None = None):
    """Local (stiffness, mass) blocks for the given triangles.

    Exposed for the interior-identity and quadrature-robustness checks;
    assembly uses the same code path.
    """
    ids = np.asarray(triangle_ids, dtype=np.int64)
    return _element_blocks(space, profile, medium, ids,
                           quad_degree or (2 * space.p + 2))


def _element_blocks(space, profile, medium, ids, degree):
    mesh = space.mesh
    p = space.p
    pts, wq = triangle_quadrature(degree)
    nq = pts.shape[0]
    local = dof_count(p)
    nidx = len(ids)
    k_blocks = np.empty((nidx, local, local), dtype=complex)
    m_blocks = np.empty((nidx, local, local), dtype=complex)

    L, dL = lagrange_geometry_basis(mesh.q, pts)
    orient = space.orientations[ids]
    combos = {}
    for row in range(nidx):
        combos.setdefault(tuple(orient[row]), []).append(row)

    for combo, rows in combos.items():
        rows = np.array(rows)
        sel = ids[rows]
        N, dN = reference_basis(p, pts, combo)
        nodes = mesh.mapping_nodes[sel]
        jac = np.einsum("tmd,mne->tnde", nodes, dL)
        det = jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]
        if np.any(det <= 0.0):
            bad = int(sel[np.argmax(np.any(det <= 0.0, axis=1))])
            raise AssemblyError(
                f"nonpositive mapping Jacobian in element {bad}")
        inv = np.empty_like(jac)
        inv[..., 0, 0] = jac[..., 1, 1]
        inv[..., 1, 1] = jac[..., 0, 0]
        inv[..., 0, 1] = -jac[..., 0, 1]
        inv[..., 1, 0] = -jac[..., 1, 0]
        inv /= det[..., None, None]
        phys = np.einsum("tmd,mn->tnd", nodes, L)
        tensor, weight = _tensor_batch(phys, profile, medium)
        # physical gradients: grad[t,i,n,d] = sum_e dN[i,n,e] inv[t,n,e,d]
        grad = np.einsum("ine,tned->tind", dN, inv)
        wdet = wq[None, :] * det
        flux = np.einsum("tnde,tjne->tjnd", tensor, grad)
        k_loc = np.einsum("tind,tjnd,tn->tij", grad, flux, wdet)
        m_loc = np.einsum("in,jn,tn->tij", N, N, wdet * weight)
        k_loc = 0.5 * (k_loc + np.swapaxes(k_loc, 1, 2))
        m_loc = 0.5 * (m_loc + np.swapaxes(m_loc, 1, 2))
        k_blocks[rows] = k_loc
        m_blocks[rows] = m_loc
    return k_blocks, m_blocks


def assemble(space: FunctionSpace, profile: ScalingProfile | None,
             medium: Medium, quad_degree: int | None = None,
             chunk: int = 512) -> AssembledPencil:
    """Assemble the scaled stiffness/mass pencil over the free dofs.

    Quadrature degree defaults to 2p+2; Dirichlet rows and columns are
    eliminated.  K and M come out exactly symmetric and share a sparsity
    pattern.
    """
    if medium.dim != 2:
        raise ValidationError("the assembled form is two-dimensional")
    degree = quad_degree or (2 * space.p + 2)
    mesh = space.mesh
    nt = mesh.num_triangles
    local = dof_count(space.p)
    n = space.num_dofs

    # Entries are accumulated into CSR in bounded super-chunks so the
    # peak footprint stays near the final matrices instead of holding
    # every duplicated element entry at once.
    k_mat = None
    m_mat = None
    rows_out, cols_out, kv_out, mv_out = [], [], [], []

    def flush():
        nonlocal k_mat, m_mat
        if not rows_out:
            return
        rows = np.concatenate(rows_out)
        cols = np.concatenate(cols_out)
        k_part = scipy.sparse.coo_matrix(
            (np.concatenate(kv_out), (rows, cols)), shape=(n, n)).tocsr()
        m_part = scipy.sparse.coo_matrix(
            (np.concatenate(mv_out), (rows, cols)), shape=(n, n)).tocsr()
        for buf in (rows_out, cols_out, kv_out, mv_out):
            buf.clear()
        k_mat = k_part if k_mat is None else k_mat + k_part
        m_mat = m_part if m_mat is None else m_mat + m_part

    pending = 0
    for start in range(0, nt, chunk):
        ids = np.arange(start, min(start + chunk, nt))
        k_blocks, m_blocks = _element_blocks(space, profile, medium, ids, degree)
        dofs = space.element_dofs[ids]
        rr = np.repeat(dofs[:, :, None], local, axis=2)
        cc = np.repeat(dofs[:, None, :], local, axis=1)
        keep = (rr >= 0) & (cc >= 0)
        rows_out.append(rr[keep].astype(np.int32))
        cols_out.append(cc[keep].astype(np.int32))
        kv_out.append(k_blocks[keep])
        mv_out.append(m_blocks[keep])
        pending += len(ids)
        if pending >= 8192:
            flush()
            pending = 0
    flush()
    if k_mat is None:
        k_mat = scipy.sparse.csr_matrix((n, n), dtype=complex)
        m_mat = scipy.sparse.csr_matrix((n, n), dtype=complex)
    return AssembledPencil(stiffness=k_mat, mass=m_mat)


def rayleigh_residual(pencil: AssembledPencil, omega: complex,
                      u: np.ndarray) -> float:
    """|| K u - omega^2 M u || / (||u|| (||K||_F + |omega^2| ||M||_F))."""
    u = np.asarray(u)
    nrm = np.linalg.norm(u)
    if nrm == 0.0:
        raise ValidationError("eigenvector must be nonzero")
    omega_sq = complex(omega) ** 2
    resid = np.linalg.norm(pencil.stiffness @ u - omega_sq * (pencil.mass @ u))
    scale = (np.linalg.norm(pencil.stiffness.data)
             + abs(omega_sq) * np.linalg.norm(pencil.mass.data))
    return float(resid / (nrm * scale))


class CondensedShiftSolver:
    """Direct solver for K - shift_sq*M with element-interior elimination.

    Interior (bubble) modes of each triangle couple only to dofs of that
    same triangle, so for a fixed shift they can be eliminated exactly,
    element by element, before anything global is factored.  What remains
    is the Schur complement on the vertex/edge skeleton, which is much
    smaller at high order and factors with far less fill.  The elimination
    is algebraically exact; solutions match the unreduced factorization up
    to roundoff.
    """

    method = "condensed"

    def __init__(self, space: FunctionSpace, profile: ScalingProfile | None,
                 medium: Medium, shift_sq: complex,
                 quad_degree: int | None = None, chunk: int = 512):
        from .eig import sparse_lu

        if medium.dim != 2:
            raise ValidationError("the assembled form is two-dimensional")
        degree = quad_degree or (2 * space.p + 2)
        shift_sq = complex(shift_sq)
        mesh = space.mesh
        nt = mesh.num_triangles
        p = space.p
        ns_local = 3 * p                      # vertex + edge modes
        nb_local = (p - 1) * (p - 2) // 2     # interior bubbles
        n = space.num_dofs

        self.n = n
        self.bubble_dofs = space.element_dofs[:, ns_local:]
        is_bubble = np.zeros(n, dtype=bool)
        is_bubble[self.bubble_dofs.ravel()] = True
        skeleton = np.where(~is_bubble)[0]
        cond_of_free = np.full(n, -1, dtype=np.int64)
        cond_of_free[skeleton] = np.arange(skeleton.size)
        self.skeleton_dofs = skeleton
        self.skeleton_size = int(skeleton.size)

        skel = space.element_dofs[:, :ns_local]
        self.skel_cond = np.where(skel >= 0, cond_of_free[skel], -1)

        rows_out, cols_out, vals_out = [], [], []
        gain_out, bb_inv_out = [], []
        for start in range(0, nt, chunk):
            ids = np.arange(start, min(start + chunk, nt))
            k_blocks, m_blocks = _element_blocks(space, profile, medium,
                                                 ids, degree)
            a = k_blocks - shift_sq * m_blocks
            a_ss = a[:, :ns_local, :ns_local]
            a_sb = a[:, :ns_local, ns_local:]
            a_bb = a[:, ns_local:, ns_local:]
            try:
                bb_inv = np.linalg.inv(a_bb)
            except np.linalg.LinAlgError as exc:
                raise ShiftRejectedError(
                    f"shift_sq {shift_sq} hits an element-interior "
                    f"eigenvalue: {exc}") from exc
            gain = a_sb @ bb_inv
            s_blk = a_ss - gain @ np.swapaxes(a_sb, 1, 2)
            gain_out.append(gain)
            bb_inv_out.append(bb_inv)

            sc = self.skel_cond[ids]
            rr = np.repeat(sc[:, :, None], ns_local, axis=2)
            cc = np.repeat(sc[:, None, :], ns_local, axis=1)
            keep = (rr >= 0) & (cc >= 0)
            rows_out.append(rr[keep].astype(np.int32))
            cols_out.append(cc[keep].astype(np.int32))
            vals_out.append(s_blk[keep])

        self.gain = np.concatenate(gain_out) if gain_out else \
            np.zeros((0, ns_local, nb_local), dtype=complex)
        self.bb_inv = np.concatenate(bb_inv_out) if bb_inv_out else \
            np.zeros((0, nb_local, nb_local), dtype=complex)
        schur = scipy.sparse.coo_matrix(
            (np.concatenate(vals_out), (np.concatenate(rows_out),
                                        np.concatenate(cols_out))),
            shape=(self.skeleton_size, self.skeleton_size)).tocsc()
        del rows_out, cols_out, vals_out
        self.lu = sparse_lu(schur)

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Apply (K - shift_sq*M)^{-1} to a free-dof vector."""
        b = np.asarray(b, dtype=complex)
        if b.shape != (self.n,):
            raise ValidationError(
                f"right-hand side must have shape ({self.n},)")
        w_b = b[self.bubble_dofs]                              # (nt, nb)
        corr = np.einsum("eij,ej->ei", self.gain, w_b)         # (nt, ns)
        flat = self.skel_cond.ravel()
        valid = flat >= 0
        idx = flat[valid]
        cv = corr.ravel()[valid]
        rhs = b[self.skeleton_dofs].astype(complex)
        rhs -= (np.bincount(idx, weights=cv.real,
                            minlength=self.skeleton_size)
                + 1j * np.bincount(idx, weights=cv.imag,
                                   minlength=self.skeleton_size))
        x_s = self.lu.solve(rhs)
        xs_elem = np.where(self.skel_cond >= 0, x_s[self.skel_cond], 0.0)
        x_b = (np.einsum("eij,ej->ei", self.bb_inv, w_b)
               - np.einsum("ejk,ej->ek", self.gain, xs_elem))
        out = np.empty(self.n, dtype=complex)
        out[self.skeleton_dofs] = x_s
        out[self.bubble_dofs] = x_b
        return out


def write_matrix_coo(mat, path):
    """Coordinate text dump (row, col, re, im) at 17 significant digits."""
    coo = scipy.sparse.coo_matrix(mat)
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i} {j} {v.real:.17g} {v.imag:.17g}\n")


def read_matrix_coo(path):
    with open(path, "r", encoding="ascii") as fh:
        nr, nc, nnz = (int(v) for v in fh.readline().split())
        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = np.empty(nnz, dtype=complex)
        for k in range(nnz):
            i, j, re, im = fh.readline().split()
            rows[k], cols[k] = int(i), int(j)
            vals[k] = complex(float(re), float(im))
    return scipy.sparse.coo_matrix((vals, (rows, cols)), shape=(nr, nc)).tocsr()
