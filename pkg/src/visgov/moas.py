"""Maximal admissible set for the lifted closed loop.

Offline, the polynomial constraints become linear rows over the monomial
vector Z, and the admissible set is the states whose whole constrained
trajectory stays feasible. Because the lifted map is [[F, G], [0, I]]
with F stable, the row of constraint i propagated k steps splits into a
decaying part and a steady part:

    C_i Phi^k Z = (C_i^x F^k)(Z_x - W V) + (C_i^x W + C_i^v) V,

with W = (I-F)^{-1} G. Construction walks k upward, keeps rows that are
not provably implied by the ones already kept, and stops when one whole
step adds nothing. Implication is certified three ways, cheapest first:
the decay certificate (the deviation term is smaller than the margin the
tightened steady row guarantees), an interval bound over the monomial
box, and finally a linear program over the retained rows.

The monomial box is sound on lifted states of real trajectories: every
variable is boxed by the degree-1 constraint rows, so every monomial of
an admissible state lands inside the product box. The box is what keeps
the LPs bounded; the decay certificate is what forces termination.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.linalg import lapack, lu_factor, lu_solve
from scipy.optimize import linprog

from .constraints import PolyConstraintSet, to_json
from .lifting import LiftedSystem, eta, monomial_basis

FILE_VERSION = 1


class MoasBuildError(RuntimeError):
    pass


@dataclass(frozen=True)
class MoasConfig:
    epsilon: float = 0.01
    k_max: int = 3000
    lp_tol: float = 1e-7
    redundancy_check: bool = True
    prune: bool = False

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")


@dataclass(frozen=True)
class SteadyStateMap:
    """W maps a held reference's monomials V to the steady-state Z_x."""

    W: np.ndarray


@dataclass(frozen=True)
class Moas:
    """Retained rows A Z <= b plus build metadata.

    Rows cover the propagated constraints for k = 0..k_star (the ones
    not provably redundant) and the tightened steady-state rows.
    """

    A: sparse.csr_matrix
    b: np.ndarray
    k_star: int
    epsilon: float
    lifted_dims: tuple
    provenance: str
    row_meta: list
    build_info: dict
    lifted: LiftedSystem = field(repr=False, compare=False)

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]


def _highs_max(obj, A_ub, b_ub, bounds):
    """max obj.Z subject to A_ub Z <= b_ub and box bounds. Narrow LP port.

    Returns (value, duals) where duals are the nonnegative multipliers of
    A_ub; any such multipliers bound the maximum of nearby objectives
    from above, which the construction reuses as a cheap certificate.
    """
    res = linprog(
        -np.asarray(obj, dtype=float),
        A_ub=A_ub,
        b_ub=b_ub,
        bounds=bounds,
        method="highs",
    )
    if res.status != 0:
        raise MoasBuildError(f"LP did not solve cleanly: {res.message}")
    return -res.fun, -res.ineqlin.marginals


def _dual_bound(obj, y, A_csr, b_vec, lo, hi):
    # weak duality: max obj.Z <= y.b + max over the box of (obj - A'y).Z
    r = obj - (A_csr.T @ y)
    return float(y @ b_vec + np.maximum(r * lo, r * hi).sum())


def steady_state_map(lifted: LiftedSystem) -> SteadyStateMap:
    M = np.eye(lifted.nzx) - lifted.F
    lu, piv = lu_factor(M)
    anorm = np.linalg.norm(M, 1)
    rcond, info = lapack.dgecon(lu, anorm)
    if info != 0 or rcond < 1e-12:
        raise MoasBuildError(
            f"(I - F) is numerically singular: condition estimate {1.0 / max(rcond, 1e-300):.2e}"
        )
    W = lu_solve((lu, piv), lifted.G)
    return SteadyStateMap(W=W)


def _normalized_rows(constraints: PolyConstraintSet):
    C = constraints.C.toarray()
    c0 = constraints.c0.astype(float).copy()
    norms = np.linalg.norm(C, axis=1)
    if np.any(norms == 0):
        raise ValueError("constraint with empty coefficient row")
    C /= norms[:, None]
    c0 /= norms
    return C, c0


def steady_state_rows(
    lifted: LiftedSystem, constraints: PolyConstraintSet, epsilon: float
):
    """Tightened rows pinning the steady state of each constraint.

    Row i acts only through the reference monomials V: the Z_x part is
    replaced by its steady-state image W V. Rows are normalized to unit
    coefficient norm first and the tightening is an absolute margin:
    rhs_i = c_i0 - epsilon. (A purely multiplicative margin dies on rows
    whose offset is zero, which includes every bearing row.)

    A constraint can vanish at steady state for every held reference
    (the thrust-tilt row does: commanded acceleration decays to zero no
    matter where the reference sits). Tightening such a row by a margin
    larger than its offset would empty the set, and no margin is needed
    for the set to shrink strictly inside it, so these rows keep only
    min(epsilon, offset/2).

    Returns (rows, rhs): rows over the full Z layout with zero Z_x part.
    """
    Cn, c0n = _normalized_rows(constraints)
    W = steady_state_map(lifted).W
    nzx = lifted.nzx
    R = Cn[:, :nzx] @ W + Cn[:, nzx:]
    margin = np.full(len(c0n), epsilon)
    vanishing = np.linalg.norm(R, axis=1) <= 1e-9
    if np.any(vanishing & (c0n <= 0.0)):
        bad = [constraints.names[i] for i in np.nonzero(vanishing & (c0n <= 0.0))[0]]
        raise MoasBuildError(
            f"constraint(s) {bad} exclude every steady state; the admissible set is empty"
        )
    margin[vanishing] = np.minimum(epsilon, c0n[vanishing] / 2.0)
    rows = np.hstack([np.zeros((R.shape[0], nzx)), R])
    return rows, c0n - margin


def _variable_bounds(constraints: PolyConstraintSet, d: int) -> np.ndarray:
    """Per-variable half-widths implied by the single-variable box rows."""
    bound = np.full(d, np.inf)
    for q in constraints.polys:
        if len(q.coeffs) == 1:
            ((t, a),) = q.coeffs.items()
            if len(t) == 1 and q.offset > 0:
                j = t[0]
                bound[j] = min(bound[j], q.offset / abs(a))
    missing = np.nonzero(~np.isfinite(bound))[0]
    if missing.size:
        raise MoasBuildError(
            f"compactness box missing for variable(s) {missing.tolist()}; "
            "the admissible-set recursion needs every variable boxed"
        )
    return bound


def _monomial_box(lifted: LiftedSystem, var_bound: np.ndarray):
    """(lo, hi) bounds for every lifted coordinate over the variable box."""
    d = lifted.n + lifted.m
    hi_stacked, lo_stacked = [], []
    for r in range(1, lifted.p + 1):
        for t in monomial_basis(d, r).index_tuples:
            h = float(np.prod(var_bound[list(t)]))
            counts = np.bincount(t, minlength=d)
            all_even = not np.any(counts % 2)
            hi_stacked.append(h)
            lo_stacked.append(0.0 if all_even else -h)
    # perm maps final position -> stacked position, so index directly
    hi = np.asarray(hi_stacked)[lifted.perm]
    lo = np.asarray(lo_stacked)[lifted.perm]
    return lo, hi


def construct_moas(
    lifted: LiftedSystem,
    constraints: PolyConstraintSet,
    cfg: MoasConfig | None = None,
    lp_solver=None,
    verbose: bool = False,
) -> Moas:
    """Build the finitely determined admissible set.

    Stops at the first k where every constraint propagated to k+1 is
    provably implied by the retained rows; raises MoasBuildError when
    k_max is hit first (reporting the worst outstanding margin).
    """
    if cfg is None:
        cfg = MoasConfig()
    if lp_solver is None:
        lp_solver = _highs_max
    t0 = time.perf_counter()
    d = lifted.n + lifted.m
    nzx, nv = lifted.dims
    n1 = lifted.n  # degree-1 slice of Z_x

    Cn, c0n = _normalized_rows(constraints)
    names = constraints.names
    W = steady_state_map(lifted).W
    R_inf = Cn[:, :nzx] @ W + Cn[:, nzx:]

    var_bound = _variable_bounds(constraints, d)
    lo, hi = _monomial_box(lifted, var_bound)
    bounds = np.column_stack([lo, hi])
    # |Z_x - W V| <= e coordinatewise over the box
    v_abs = np.maximum(np.abs(lo[nzx:]), np.abs(hi[nzx:]))
    e = hi[:nzx] + np.abs(W) @ v_abs

    # split rows: support inside the degree-1 block propagates in the
    # small F block and stays sparse; anything wider goes dense
    sup = [np.nonzero(Cn[i, :nzx])[0] for i in range(len(names))]
    g1 = [i for i in range(len(names)) if sup[i].size == 0 or sup[i].max() < n1]
    g4 = [i for i in range(len(names)) if i not in g1]
    F1 = lifted.F[:n1, :n1]
    W1 = W[:n1]
    e1 = e[:n1]

    rows_cols, rows_vals, rhs_list, meta = [], [], [], []

    def retain(cols, vals, rhs, name, k):
        rows_cols.append(np.asarray(cols, dtype=np.intp))
        rows_vals.append(np.asarray(vals, dtype=float))
        rhs_list.append(float(rhs))
        meta.append((name, k))

    # tightened steady-state rows first: they carry the margin the decay
    # certificate leans on (epsilon, except for rows that vanish at
    # steady state and cannot afford it)
    ss_rows, ss_rhs = steady_state_rows(lifted, constraints, cfg.epsilon)
    ss_margin = c0n - ss_rhs
    for i in range(len(names)):
        cols = np.nonzero(ss_rows[i])[0]
        retain(cols, ss_rows[i, cols], ss_rhs[i], names[i], -1)

    def current_csr():
        total = nzx + nv
        indptr = np.zeros(len(rows_cols) + 1, dtype=np.intp)
        np.cumsum([c.size for c in rows_cols], out=indptr[1:])
        return sparse.csr_matrix(
            (np.concatenate(rows_vals), np.concatenate(rows_cols), indptr),
            shape=(len(rows_cols), total),
        )

    # time-zero rows define admissibility itself (and justify the monomial
    # box used inside the implication tests), so they are always kept
    for i in range(len(names)):
        cols = np.nonzero(Cn[i])[0]
        retain(cols, Cn[i, cols], c0n[i], names[i], 0)

    D1 = Cn[g1][:, :n1] @ F1
    D4 = Cn[g4][:, :nzx] @ lifted.F
    n_cert = n_box = n_lp = n_dual = 0
    duals = {}  # constraint index -> (multipliers, retained-row count they cover)
    k_star = None
    for k in range(1, cfg.k_max + 1):
        A_csr = None  # built lazily: late steps rarely reach the LP tier
        b_vec = np.asarray(rhs_list)
        added = 0
        # row groups: (member indices, deviation block, box weights, V map)
        for idxs, D, ew, Wblk, width in (
            (g1, D1, e1, W1, n1),
            (g4, D4, e, W, nzx),
        ):
            if not idxs:
                continue
            cert = np.abs(D) @ ew
            for j, i in enumerate(idxs):
                if cert[j] <= ss_margin[i]:
                    n_cert += 1
                    continue
                zx_part = D[j]
                v_part = R_inf[i] - zx_part @ Wblk
                full = np.zeros(nzx + nv)
                full[:width] = zx_part
                full[nzx:] = v_part
                box_max = float(np.maximum(full * lo, full * hi).sum())
                if box_max <= c0n[i] + cfg.lp_tol:
                    n_box += 1
                    continue
                if cfg.redundancy_check:
                    if A_csr is None:
                        A_csr = current_csr()
                    held = duals.get(i)
                    if held is not None:
                        # multipliers from this row's last LP stay valid:
                        # rows only get appended, so pad with zeros
                        y = np.zeros(A_csr.shape[0])
                        y[: held.size] = held
                        if _dual_bound(full, y, A_csr, b_vec, lo, hi) <= c0n[i] + cfg.lp_tol:
                            n_dual += 1
                            continue
                    n_lp += 1
                    val, y = lp_solver(full, A_csr, b_vec, bounds)
                    duals[i] = np.maximum(y, 0.0)
                    if val <= c0n[i] + cfg.lp_tol:
                        continue
                cols = np.nonzero(full)[0]
                retain(cols, full[cols], c0n[i], names[i], k)
                added += 1
        if added == 0:
            k_star = k - 1
            break
        if verbose and k % 25 == 0:
            print(
                f"  k={k} rows={len(rhs_list)} lp={n_lp} dual={n_dual} "
                f"box={n_box} cert={n_cert} added={added}",
                flush=True,
            )
        D1 = D1 @ F1
        D4 = D4 @ lifted.F
    if k_star is None:
        # measure how far the worst row still is from being implied
        A_csr = current_csr()
        b_vec = np.asarray(rhs_list)
        worst = -np.inf
        for idxs, D, Wblk, width in ((g1, D1, W1, n1), (g4, D4, W, nzx)):
            for j, i in enumerate(idxs):
                full = np.zeros(nzx + nv)
                full[:width] = D[j]
                full[nzx:] = R_inf[i] - D[j] @ Wblk
                val, _ = lp_solver(full, A_csr, b_vec, bounds)
                worst = max(worst, val - c0n[i])
        raise MoasBuildError(
            f"not determined within k_max={cfg.k_max}; worst outstanding margin {worst:.3e}"
        )

    A = current_csr()
    b = np.asarray(rhs_list)
    if cfg.prune:
        A, b, meta, dropped = _prune_rows(A, b, meta, bounds, cfg.lp_tol, lp_solver)
    else:
        dropped = 0
    info = {
        "k_star": k_star,
        "rows": int(A.shape[0]),
        "lp_calls": n_lp,
        "dual_skips": n_dual,
        "cert_skips": n_cert,
        "box_skips": n_box,
        "pruned": dropped,
        "build_seconds": round(time.perf_counter() - t0, 3),
    }
    return Moas(
        A=A,
        b=b,
        k_star=k_star,
        epsilon=cfg.epsilon,
        lifted_dims=(lifted.n, lifted.m, lifted.p),
        provenance=provenance_hash(constraints),
        row_meta=meta,
        build_info=info,
        lifted=lifted,
    )


def _prune_rows(A, b, meta, bounds, lp_tol, lp_solver):
    """Drop propagated rows implied by the others.

    Steady rows and time-zero rows are never pruned: the time-zero rows
    are the definition of admissibility and justify the monomial box the
    implication LPs rely on.
    """
    keep = list(range(A.shape[0]))
    dropped = 0
    i = 0
    while i < len(keep):
        r = keep[i]
        if meta[r][1] <= 0:
            i += 1
            continue
        others = keep[:i] + keep[i + 1 :]
        row = A[r].toarray().ravel()
        try:
            val, _ = lp_solver(row, A[others], b[others], bounds)
        except MoasBuildError:
            i += 1
            continue
        if val <= b[r] + lp_tol:
            keep.pop(i)
            dropped += 1
        else:
            i += 1
    A2 = A[keep]
    return A2, b[keep], [meta[r] for r in keep], dropped


def contains(moas: Moas, x, v, tol: float = 0.0):
    """Membership of (state, held reference); margin < 0 is strictly inside."""
    z = np.concatenate([np.asarray(x, dtype=float), np.asarray(v, dtype=float)])
    if z.size != moas.lifted.n + moas.lifted.m:
        raise ValueError("state/reference dimensions do not match the set")
    vals = moas.A @ eta(z, moas.lifted) - moas.b
    margin = float(vals.max())
    return margin <= tol, margin


def provenance_hash(constraints: PolyConstraintSet) -> str:
    h = hashlib.sha256()
    h.update(to_json(constraints).encode())
    h.update(np.ascontiguousarray(constraints.lifted.Phi).tobytes())
    h.update(
        json.dumps([constraints.lifted.n, constraints.lifted.m, constraints.lifted.p]).encode()
    )
    return h.hexdigest()


def load_or_construct(
    cache_dir,
    lifted,
    constraints: PolyConstraintSet,
    cfg: MoasConfig | None = None,
    verbose: bool = False,
) -> Moas:
    """Disk-cached construction keyed by the constraint provenance hash.

    A cache hit must match the exact constraint set, plant, and epsilon;
    anything else rebuilds. Corrupt cache entries are rebuilt, not
    trusted.
    """
    cfg = cfg or MoasConfig()
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    key = provenance_hash(constraints)[:16]
    path = cache_dir / f"moas_{key}_eps{cfg.epsilon:g}.npz"
    if path.exists():
        try:
            cached = load(path, constraints)
            if cached.epsilon == cfg.epsilon:
                return cached
        except ValueError as exc:
            logging.getLogger("visgov").warning(
                "ignoring unusable admissible-set cache %s: %s", path, exc
            )
    moas = construct_moas(lifted, constraints, cfg, verbose=verbose)
    save(moas, path)
    return moas


def save(moas: Moas, path) -> None:
    meta = {
        "version": FILE_VERSION,
        "k_star": moas.k_star,
        "epsilon": moas.epsilon,
        "lifted_dims": list(moas.lifted_dims),
        "provenance": moas.provenance,
        "row_meta": [[n, k] for n, k in moas.row_meta],
        "build_info": moas.build_info,
    }
    with open(path, "wb") as f:
        np.savez_compressed(
            f,
            data=moas.A.data,
            indices=moas.A.indices,
            indptr=moas.A.indptr,
            shape=np.asarray(moas.A.shape),
            rhs=moas.b,
            meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
        )


def load(path, constraints: PolyConstraintSet) -> Moas:
    """Load a set and verify it was built for these constraints."""
    try:
        with np.load(path, allow_pickle=False) as arr:
            meta = json.loads(bytes(arr["meta"]).decode())
            A = sparse.csr_matrix(
                (arr["data"], arr["indices"], arr["indptr"]),
                shape=tuple(arr["shape"]),
            )
            b = arr["rhs"].copy()
    except (OSError, zipfile.BadZipFile, KeyError, ValueError, json.JSONDecodeError) as exc:
        raise ValueError(f"corrupted admissible-set file {path}: {exc}") from exc
    if meta.get("version") != FILE_VERSION:
        raise ValueError(f"unsupported admissible-set file version {meta.get('version')}")
    expect = provenance_hash(constraints)
    if meta["provenance"] != expect:
        raise ValueError(
            "admissible set was built for a different constraint set or plant "
            f"(file {meta['provenance'][:12]}.., expected {expect[:12]}..)"
        )
    lifted = constraints.lifted
    if tuple(meta["lifted_dims"]) != (lifted.n, lifted.m, lifted.p):
        raise ValueError("lifted dimensions in file do not match the constraint set")
    return Moas(
        A=A,
        b=b,
        k_star=int(meta["k_star"]),
        epsilon=float(meta["epsilon"]),
        lifted_dims=tuple(meta["lifted_dims"]),
        provenance=meta["provenance"],
        row_meta=[(n, k) for n, k in meta["row_meta"]],
        build_info=meta["build_info"],
        lifted=lifted,
    )
