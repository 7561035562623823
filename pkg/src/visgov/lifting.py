"""Monomial lifting of a linear system with held inputs.

Turns the extended state z = [x, v] into the stacked vector of its
monomials up to a chosen degree, and lifts the one-step map z+ = phi z
to a linear map on those monomial coordinates. Polynomial constraints
on z become linear constraints on the lifted vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import comb

import numpy as np
import scipy.sparse as sp


def sigma(d: int, r: int) -> int:
    """Number of degree-r monomials in d variables (no repetition)."""
    return comb(d + r - 1, r)


def sigma_total(d: int, p: int) -> int:
    """Number of monomials of degree 1..p in d variables."""
    return sum(sigma(d, r) for r in range(1, p + 1))


@lru_cache(maxsize=None)
def _index_tuples(d: int, r: int) -> tuple[tuple[int, ...], ...]:
    # Non-decreasing variable-index tuples in the order produced by the
    # suffix recursion: entries led by variable i continue with monomials
    # over variables i..d-1.
    if r == 0:
        return ((),)
    out = []
    for i in range(d):
        for tail in _index_tuples(d - i, r - 1):
            out.append((i,) + tuple(i + t for t in tail))
    return tuple(out)


@lru_cache(maxsize=None)
def _index_map(d: int, r: int) -> dict[tuple[int, ...], int]:
    return {t: j for j, t in enumerate(_index_tuples(d, r))}


@lru_cache(maxsize=None)
def _child_index(d: int, k: int) -> np.ndarray:
    """child[j, v] = index in basis(d, k+1) of the degree-(k+1) monomial
    obtained by multiplying basis(d, k) entry j by variable v."""
    idx = _index_map(d, k + 1)
    tuples = _index_tuples(d, k)
    out = np.empty((len(tuples), d), dtype=np.intp)
    for j, t in enumerate(tuples):
        for v in range(d):
            out[j, v] = idx[tuple(sorted(t + (v,)))]
    return out


@lru_cache(maxsize=None)
def _tail_tables(d: int, r: int) -> tuple[np.ndarray, np.ndarray]:
    # For each degree-r tuple: its leading variable and the basis(d, r-1)
    # index of the remaining factors. Drives the batched evaluation.
    idx = _index_map(d, r - 1)
    tuples = _index_tuples(d, r)
    first = np.empty(len(tuples), dtype=np.intp)
    tail = np.empty(len(tuples), dtype=np.intp)
    for j, t in enumerate(tuples):
        first[j] = t[0]
        tail[j] = idx[t[1:]]
    return first, tail


@dataclass(frozen=True)
class MonomialBasis:
    """Ordered monomial basis of fixed total degree.

    Attributes
    ----------
    dim : int
        Number of variables d.
    degree : int
        Total degree r of every entry.
    exponents : list of tuple
        Multi-indices (length-d exponent vectors summing to r), in the
        deterministic recursion order.
    index_tuples : list of tuple
        Same entries as non-decreasing variable-index tuples; entry j of
        a lifted vector is the product of z over index_tuples[j].
    """

    dim: int
    degree: int
    exponents: list = field(default_factory=list)
    index_tuples: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.index_tuples)


def monomial_basis(d: int, r: int) -> MonomialBasis:
    """Build the ordered degree-r monomial basis over d variables.

    Parameters
    ----------
    d : int
        Number of variables, >= 1.
    r : int
        Total degree, >= 1.

    Returns
    -------
    MonomialBasis
        sigma(d, r) entries in the deterministic recursion order.
    """
    if d < 1 or r < 1:
        raise ValueError(f"need d >= 1 and r >= 1, got d={d}, r={r}")
    tuples = _index_tuples(d, r)
    exps = []
    for t in tuples:
        e = [0] * d
        for v in t:
            e[v] += 1
        exps.append(tuple(e))
    return MonomialBasis(dim=d, degree=r, exponents=exps, index_tuples=list(tuples))


def _lift_batch(z: np.ndarray, r: int) -> np.ndarray:
    # z: (N, d) -> (N, sigma(d, r)) by the tail recursion, reusing the
    # previous degree's values.
    d = z.shape[1]
    vals = z
    for k in range(2, r + 1):
        first, tail = _tail_tables(d, k)
        vals = z[:, first] * vals[:, tail]
    return vals


def lift_no_rep(z, r: int) -> np.ndarray:
    """Evaluate all degree-r monomials of z (no repeated entries).

    Parameters
    ----------
    z : array_like
        Vector of length d, or batch of shape (N, d).
    r : int
        Degree, >= 1.

    Returns
    -------
    numpy.ndarray
        Length sigma(d, r) vector (or (N, sigma(d, r)) batch), entry j
        equal to the basis entry j evaluated at z.
    """
    z = np.asarray(z, dtype=float)
    if r < 1:
        raise ValueError("degree must be >= 1")
    if z.ndim == 1:
        return _lift_batch(z[None, :], r)[0]
    if z.ndim != 2:
        raise ValueError("z must be a vector or a batch of vectors")
    return _lift_batch(z, r)


def lift_with_rep(z, r: int) -> np.ndarray:
    """Kronecker power of z: all degree-r products with repetition, d^r entries."""
    z = np.asarray(z, dtype=float)
    if z.ndim != 1:
        raise ValueError("z must be a vector")
    if r < 1:
        raise ValueError("degree must be >= 1")
    out = z
    for _ in range(r - 1):
        out = np.kron(out, z)
    return out


@dataclass(frozen=True)
class LiftMatrices:
    """Conversion pair between lifted vectors with and without repetition.

    Mc selects, for each no-repetition monomial, its first occurrence in
    the Kronecker order; Me expands each no-repetition entry to every
    position where it appears. Both are sparse; Mc @ Me is the identity.
    """

    dim: int
    degree: int
    Mc: sp.csr_matrix
    Me: sp.csr_matrix


def build_lift_matrices(d: int, r: int) -> LiftMatrices:
    """Build the selection/expansion pair (Mc, Me) for dimension d, degree r."""
    if d < 1 or r < 1:
        raise ValueError(f"need d >= 1 and r >= 1, got d={d}, r={r}")
    idx = _index_map(d, r)
    n_rep = d**r
    n_norep = len(idx)

    # row-major position of an index tuple inside the Kronecker ordering
    def kron_pos(t):
        pos = 0
        for v in t:
            pos = pos * d + v
        return pos

    cols = np.empty(n_rep, dtype=np.intp)
    t = [0] * r
    for pos in range(n_rep):
        cols[pos] = idx[tuple(sorted(t))]
        # odometer increment in row-major order
        for k in range(r - 1, -1, -1):
            t[k] += 1
            if t[k] < d:
                break
            t[k] = 0
    Me = sp.csr_matrix(
        (np.ones(n_rep), (np.arange(n_rep), cols)), shape=(n_rep, n_norep)
    )

    rows = np.fromiter(
        (kron_pos(t) for t in _index_tuples(d, r)), dtype=np.intp, count=n_norep
    )
    Mc = sp.csr_matrix(
        (np.ones(n_norep), (np.arange(n_norep), rows)), shape=(n_norep, n_rep)
    )
    return LiftMatrices(dim=d, degree=r, Mc=Mc, Me=Me)


def build_phi_r(phi, r: int) -> np.ndarray:
    """Lift a linear map to degree-r monomial coordinates.

    Returns the sigma(d, r)-square matrix with
    lift_no_rep(phi @ z, r) = phi_r @ lift_no_rep(z, r) for every z.

    Built row by row: the row for monomial (i1..ir) is the expansion of
    the product of the linear forms phi[i1], .., phi[ir], accumulated
    over a prefix tree so shared partial products are computed once.
    The Kronecker power of phi is never materialized.
    """
    phi = np.asarray(phi, dtype=float)
    if phi.ndim != 2 or phi.shape[0] != phi.shape[1]:
        raise ValueError("phi must be square")
    if r < 1:
        raise ValueError("degree must be >= 1")
    d = phi.shape[0]
    sizes = [sigma(d, k) if k else 1 for k in range(r + 1)]
    children = [_child_index(d, k) for k in range(r)]
    row_of = _index_map(d, r)
    out = np.zeros((sizes[r], sizes[r]))

    def expand(depth, start_var, prefix, vec):
        if depth == r:
            out[row_of[prefix]] = vec
            return
        child = children[depth].ravel()
        for i in range(start_var, d):
            nxt = np.bincount(
                child,
                weights=np.multiply.outer(vec, phi[i]).ravel(),
                minlength=sizes[depth + 1],
            )
            expand(depth + 1, i, prefix + (i,), nxt)

    expand(0, 0, (), np.ones(1))
    return out


@dataclass(frozen=True)
class LiftedSystem:
    """Lifted dynamics of z+ = phi z over monomials of degree 1..p.

    The lifted vector is ordered as Z = [Z_x, V]: monomials containing at
    least one state variable first, pure-input monomials last, each group
    keeping the graded recursion order. Phi then has the block form
    [[F, G], [0, I]] with F strictly stable.

    Attributes
    ----------
    n, m, p : int
        State dim, input dim, max degree.
    Phi : numpy.ndarray
        Full lifted map, sigma_total(n+m, p) square.
    F, G : numpy.ndarray
        Stable block (acts on Z_x) and input coupling.
    T : scipy.sparse.csr_matrix
        Permutation with Phi = T @ blockdiag(phi_1..phi_p) @ T.T.
    dims : tuple
        (len(Z_x), len(V)).
    """

    n: int
    m: int
    p: int
    Phi: np.ndarray
    F: np.ndarray
    G: np.ndarray
    T: sp.csr_matrix
    dims: tuple
    perm: np.ndarray
    z_index: dict

    @property
    def nzx(self) -> int:
        return self.dims[0]

    @property
    def nv(self) -> int:
        return self.dims[1]

    @property
    def total_dim(self) -> int:
        return self.dims[0] + self.dims[1]


def build_lifted_system(phi, p: int, m: int | None = None) -> LiftedSystem:
    """Lift the extended system matrix phi = [[A, B], [0, I_m]] to degree p.

    Parameters
    ----------
    phi : array_like
        Extended one-step matrix; the trailing m rows must be the
        identity on the input block (held input).
    p : int
        Maximum monomial degree, >= 1.
    m : int, optional
        Input dimension; inferred as the largest trailing identity block
        when omitted.

    Returns
    -------
    LiftedSystem

    Raises
    ------
    ValueError
        If phi lacks the held-input structure or A is not strictly stable.
    """
    phi = np.asarray(phi, dtype=float)
    if phi.ndim != 2 or phi.shape[0] != phi.shape[1]:
        raise ValueError("phi must be square")
    d = phi.shape[0]
    if p < 1:
        raise ValueError("p must be >= 1")

    def is_unit_row(i):
        e = np.zeros(d)
        e[i] = 1.0
        return np.array_equal(phi[i], e)

    if m is None:
        m = 0
        while m < d and is_unit_row(d - 1 - m):
            m += 1
    if m < 1 or m >= d:
        raise ValueError("phi has no trailing held-input identity block")
    n = d - m
    if not (np.all(phi[n:, :n] == 0.0) and np.array_equal(phi[n:, n:], np.eye(m))):
        raise ValueError("phi must have the block form [[A, B], [0, I]]")
    rho = max(abs(np.linalg.eigvals(phi[:n, :n])))
    if rho >= 1.0:
        raise ValueError(
            f"state block is not strictly stable: spectral radius {rho:.6f} >= 1"
        )

    blocks = [build_phi_r(phi, r) for r in range(1, p + 1)]
    total = sum(b.shape[0] for b in blocks)

    # permutation: state-containing monomials first, pure-input monomials last
    x_pos, v_pos, z_index = [], [], {}
    offset = 0
    stacked_tuples = []
    for r in range(1, p + 1):
        for t in _index_tuples(d, r):
            stacked_tuples.append(t)
            (v_pos if t[0] >= n else x_pos).append(offset)
            offset += 1
    perm = np.array(x_pos + v_pos, dtype=np.intp)
    for new, old in enumerate(perm):
        z_index[stacked_tuples[old]] = new

    bd = np.zeros((total, total))
    off = 0
    for b in blocks:
        k = b.shape[0]
        bd[off : off + k, off : off + k] = b
        off += k
    Phi = bd[np.ix_(perm, perm)]

    nzx = len(x_pos)
    T = sp.csr_matrix(
        (np.ones(total), (np.arange(total), perm)), shape=(total, total)
    )
    return LiftedSystem(
        n=n,
        m=m,
        p=p,
        Phi=Phi,
        F=Phi[:nzx, :nzx],
        G=Phi[:nzx, nzx:],
        T=T,
        dims=(nzx, total - nzx),
        perm=perm,
        z_index=z_index,
    )


def eta(z, lifted: LiftedSystem) -> np.ndarray:
    """Lift an extended state to its monomial vector Z = [Z_x, V].

    Parameters
    ----------
    z : array_like
        Extended state of length n+m, or batch (N, n+m).
    lifted : LiftedSystem

    Returns
    -------
    numpy.ndarray
        Vector of length sigma_total(n+m, p) (or a batch of them) in the
        lifted system's ordering.
    """
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    if single:
        z = z[None, :]
    d = lifted.n + lifted.m
    if z.shape[1] != d:
        raise ValueError(f"expected extended state of length {d}, got {z.shape[1]}")
    parts = []
    vals = z
    for r in range(1, lifted.p + 1):
        if r > 1:
            first, tail = _tail_tables(d, r)
            vals = z[:, first] * vals[:, tail]
        parts.append(vals)
    stacked = np.concatenate(parts, axis=1)[:, lifted.perm]
    return stacked[0] if single else stacked
