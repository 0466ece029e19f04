"""Contact wrench mechanics: friction cones, grasp matrices, the support
function of the grasp wrench space, boundary sampling, and the disturbance
quadratic program that scores force closure.

Per-contact force f = (f1, f2, f3) lives in a capped friction cone:
0 <= f1 <= 1 and ||(f2, f3)|| <= mu * f1, expressed in the local frame
(n, d, e) with n the inward surface normal. The grasp matrix maps f to an
object wrench; the grasp wrench space is the Minkowski sum of the
per-contact images, so its support function is the sum of per-contact
supports, each available in closed form.

Disturbances are the signed coordinate axes of wrench space: both signs of
each of the six axes, twelve directions total. The quadratic program
measures, for each scaled disturbance, how closely the contact set can
reproduce it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .seeding import rng_from

# +x, -x, +y, -y, +z, -z force, then the same pattern for torque
DISTURBANCE_DIRECTIONS = np.vstack([np.eye(6), -np.eye(6)])[
    np.array([0, 6, 1, 7, 2, 8, 3, 9, 4, 10, 5, 11])
].copy()

_TANGENT_SWITCH = 0.99  # fall back to the x seed when n is nearly +-z

_QP_MAX_ITER = 500
_QP_TOL = 1e-8


class WrenchError(ValueError):
    """Raised for infeasible or malformed contact problems."""


def _tangent_frame(normals: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic tangent completion: d = normalize(a x n), e = n x d."""
    n = np.atleast_2d(normals)
    seed = np.tile([0.0, 0.0, 1.0], (len(n), 1))
    seed[np.abs(n[:, 2]) > _TANGENT_SWITCH] = [1.0, 0.0, 0.0]
    d = np.cross(seed, n)
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    e = np.cross(n, d)
    return d, e


def grasp_matrix(p: np.ndarray, n: np.ndarray) -> np.ndarray:
    """6x3 map from a local contact force to an object wrench.

    Columns are [n; p x n], [d; p x d], [e; p x e] with the deterministic
    tangent completion, torques about the origin of ``p``'s frame.
    """
    n = np.asarray(n, dtype=np.float64)
    norm = np.linalg.norm(n)
    if norm < 1e-12:
        raise WrenchError("zero contact normal")
    n = n / norm
    d, e = _tangent_frame(n[None, :])
    frame = np.stack([n, d[0], e[0]], axis=1)  # 3x3, columns n d e
    p = np.asarray(p, dtype=np.float64)
    return np.vstack([frame, np.cross(p[None, :], frame.T).T])


@dataclass
class ContactState:
    """Batch of point contacts with friction mu and grasp matrices.

    Torques are taken about ``torque_center``; positions are stored as given
    and shifted only inside the grasp matrices.
    """

    positions: np.ndarray  # (n, 3) world
    normals: np.ndarray  # (n, 3) inward unit
    tangent_d: np.ndarray  # (n, 3)
    tangent_e: np.ndarray  # (n, 3)
    mu: float
    torque_center: np.ndarray  # (3,)
    G: np.ndarray  # (n, 6, 3)

    @classmethod
    def from_contacts(
        cls,
        positions: np.ndarray,
        inward_normals: np.ndarray,
        mu: float,
        torque_center: np.ndarray | None = None,
    ) -> "ContactState":
        p = np.atleast_2d(np.asarray(positions, dtype=np.float64))
        n = np.atleast_2d(np.asarray(inward_normals, dtype=np.float64))
        norms = np.linalg.norm(n, axis=1, keepdims=True)
        if np.any(norms < 1e-12):
            raise WrenchError("zero contact normal")
        n = n / norms
        center = (
            np.zeros(3) if torque_center is None else np.asarray(torque_center, dtype=np.float64)
        )
        d, e = _tangent_frame(n)
        rel = p - center
        g = np.empty((len(p), 6, 3))
        for col, axis in enumerate((n, d, e)):
            g[:, :3, col] = axis
            g[:, 3:, col] = np.cross(rel, axis)
        return cls(
            positions=p,
            normals=n,
            tangent_d=d,
            tangent_e=e,
            mu=float(mu),
            torque_center=center,
            G=g,
        )

    @property
    def n_contacts(self) -> int:
        return len(self.positions)


def _support_terms(contacts: ContactState, directions: np.ndarray):
    """Per-contact support values and maximizing forces for many directions.

    directions: (m, 6). Returns (values (m, n), forces (m, n, 3)).
    The per-contact maximum of u . (G f) over the capped cone is attained at
    f = 0 when g1 + mu*||gt|| <= 0, else at f1 = 1, ft = mu * gt/||gt||,
    where g = G^T u.
    """
    g = np.einsum("nkc,mk->mnc", contacts.G, directions)  # (m, n, 3)
    gt = np.linalg.norm(g[..., 1:], axis=-1)
    vals = g[..., 0] + contacts.mu * gt
    active = vals > 0.0
    forces = np.zeros_like(g)
    safe = np.where(gt > 1e-300, gt, 1.0)
    forces[..., 0] = 1.0
    forces[..., 1:] = contacts.mu * g[..., 1:] / safe[..., None]
    forces *= active[..., None]
    return np.maximum(vals, 0.0) * active, forces


def support_function(contacts: ContactState, direction: np.ndarray) -> float:
    """Support of the grasp wrench space: sum of per-contact closed forms."""
    u = np.asarray(direction, dtype=np.float64)
    if not np.all(np.isfinite(u)) or np.linalg.norm(u) < 1e-300:
        raise WrenchError("direction must be finite and nonzero")
    vals, _ = _support_terms(contacts, u[None, :])
    return float(vals.sum())


def boundary_points(contacts: ContactState, directions: np.ndarray) -> np.ndarray:
    """Support points of the grasp wrench space for given directions (m, 6).

    Each returned wrench w satisfies u . w = support_function(contacts, u)
    for its own direction u, hence lies on the boundary of the convex set.
    """
    u = np.atleast_2d(np.asarray(directions, dtype=np.float64))
    _, forces = _support_terms(contacts, u)
    return np.einsum("nkc,mnc->mk", contacts.G, forces)


@dataclass
class GwbSamples:
    """Support points of the grasp wrench space boundary."""

    wrenches: np.ndarray  # (M, 6)
    directions: np.ndarray  # (M, 6) unit
    all_zero: bool  # no contacts: the space is {0}


def sample_gwb(contacts: ContactState | None, m: int, seed: int) -> GwbSamples:
    """M boundary wrenches at uniformly random unit directions in R^6."""
    if m < 1:
        raise WrenchError("need at least one sample")
    rng = rng_from("gwb", seed)
    u = rng.normal(size=(m, 6))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    if contacts is None or contacts.n_contacts == 0:
        return GwbSamples(wrenches=np.zeros((m, 6)), directions=u, all_zero=True)
    return GwbSamples(wrenches=boundary_points(contacts, u), directions=u, all_zero=False)


# -- disturbance quadratic program ----------------------------------------


def project_capped_cone(y: np.ndarray, mu: float) -> np.ndarray:
    """Exact Euclidean projection onto {0 <= f1 <= 1, ||ft|| <= mu f1}.

    Vectorized over leading dimensions; y[..., 0] is the normal component.
    """
    y1 = y[..., 0]
    yt = y[..., 1:]
    t = np.sqrt((yt * yt).sum(axis=-1))
    inside = t <= mu * y1
    f1 = np.where(inside, y1, (y1 + mu * t) / (1.0 + mu * mu))
    f1 = np.minimum(np.maximum(f1, 0.0), 1.0)
    scale = np.minimum(1.0, mu * f1 / np.where(t > 1e-300, t, 1.0))
    out = np.empty_like(y)
    out[..., 0] = f1
    out[..., 1:] = yt * scale[..., None]
    return out


def _coupling_multiplier(y1: np.ndarray, t: np.ndarray, mu: float, gamma: float) -> np.ndarray:
    """Exact dual multiplier for the total-normal-force constraint.

    y1, t: (k, n) normal components and tangential norms of the points being
    projected. The shifted normal u = y1 + lam/2 determines each contact's
    projected f1 through a clipped two-slope function of u, so the total is
    piecewise linear and nondecreasing in lam; the crossing with gamma is
    found by evaluating at every breakpoint and interpolating the segment.
    """
    musq = 1.0 + mu * mu
    u_zero = -mu * t  # f1 leaves zero
    u_kink = t / max(mu, 1e-300)  # cone-surface branch hands over to the interior one
    u_cap = np.where(t <= mu, 1.0, musq - mu * t)  # f1 reaches the cap
    lam_b = 2.0 * (np.stack([u_zero, u_kink, u_cap], axis=-1) - y1[..., None])
    lam_b = lam_b.reshape(lam_b.shape[0], -1)
    lam_b[~(lam_b > 0.0)] = np.inf  # breakpoints already passed at lam = 0
    lam_b = np.sort(lam_b, axis=1)
    finite = np.isfinite(lam_b)
    candidates = np.concatenate([np.zeros((lam_b.shape[0], 1)), np.where(finite, lam_b, 0.0)], axis=1)

    u = y1[:, None, :] + candidates[..., None] / 2.0  # (k, B, n)
    inside = t[:, None, :] <= mu * u
    f1 = np.where(inside, u, (u + mu * t[:, None, :]) / musq)
    totals = np.clip(f1, 0.0, 1.0).sum(axis=2)
    totals[:, 1:][~finite] = np.inf  # masked candidates never get selected

    crossed = totals >= gamma
    hi_idx = np.argmax(crossed, axis=1)  # first candidate meeting gamma; exists since gamma <= n
    rows = np.arange(len(lam_b))
    lam_hi = candidates[rows, hi_idx]
    lam_lo = candidates[rows, hi_idx - 1]
    g_hi = totals[rows, hi_idx]
    g_lo = totals[rows, hi_idx - 1]
    slope = (g_hi - g_lo) / (lam_hi - lam_lo)
    return lam_lo + (gamma - g_lo) / slope


def _project_feasible(y: np.ndarray, mu: float, gamma: float) -> np.ndarray:
    """Projection onto {per-contact capped cones, sum of f1 >= gamma}.

    Solved through the scalar dual of the coupling constraint: for
    multiplier lam >= 0 the minimizer is the cone projection of
    y + (lam/2) e1 per contact, whose total normal force is piecewise
    linear and nondecreasing in lam, so the exact lam is available in
    closed form.
    """
    f = project_capped_cone(y, mu)
    if gamma <= 0.0:
        return f
    total = f[..., 0].sum(axis=-1)
    short = total < gamma - 1e-14
    if not np.any(short):
        return f
    ys = y[short]
    lam = _coupling_multiplier(ys[..., 0], np.linalg.norm(ys[..., 1:], axis=-1), mu, gamma)
    shifted = ys.copy()
    shifted[..., 0] += lam[:, None] / 2.0
    f[short] = project_capped_cone(shifted, mu)
    return f


@dataclass
class QpResult:
    """Solution of the disturbance-resistance program."""

    energy: float
    residuals: np.ndarray  # (m, 6) beta*t_j - w_j at the optimum
    forces: np.ndarray  # (m, n, 3) optimal contact forces per disturbance
    directions: np.ndarray  # (m, 6)
    beta: float
    gamma: float
    converged: np.ndarray  # (m,) update-norm criterion met
    gamma_active: np.ndarray  # (m,) coupling constraint tight
    cap_active: np.ndarray  # (m, n) f1 at the cap

    @property
    def per_direction(self) -> np.ndarray:
        return np.einsum("mk,mk->m", self.residuals, self.residuals)


def qp_energy(
    contacts: ContactState | None,
    beta: float,
    gamma: float,
    warm_start: np.ndarray | None = None,
    max_iter: int = _QP_MAX_ITER,
    tol: float = _QP_TOL,
) -> QpResult:
    """Total squared residual against the 12 scaled axis disturbances.

    Each disturbance direction gets an independent convex program; all are
    solved together by accelerated projected gradient descent (per-direction
    momentum with adaptive restart) using the exact feasible-set projection.
    ``warm_start`` reuses a previous solution's forces for the same contact
    count.
    """
    if beta <= 0.0:
        raise WrenchError("beta must be positive")
    if gamma < 0.0:
        raise WrenchError("gamma must be non-negative")
    dirs = DISTURBANCE_DIRECTIONS
    m = len(dirs)
    if contacts is None or contacts.n_contacts == 0:
        if gamma > 0.0:
            raise WrenchError("no contacts cannot meet a positive total normal force")
        residuals = beta * dirs
        return QpResult(
            energy=float(m * beta * beta),
            residuals=residuals,
            forces=np.zeros((m, 0, 3)),
            directions=dirs,
            beta=beta,
            gamma=gamma,
            converged=np.ones(m, dtype=bool),
            gamma_active=np.zeros(m, dtype=bool),
            cap_active=np.zeros((m, 0), dtype=bool),
        )

    n = contacts.n_contacts
    if gamma > n:
        raise WrenchError("total normal force bound exceeds the contact cap sum")
    g = contacts.G
    gflat = g.transpose(1, 0, 2).reshape(6, 3 * n)
    lip = 2.0 * np.linalg.svd(gflat, compute_uv=False)[0] ** 2
    step = 1.0 / max(lip, 1e-12)
    target = beta * dirs  # (m, 6)

    if warm_start is not None and warm_start.shape == (m, n, 3):
        x = _project_feasible(warm_start.copy(), contacts.mu, gamma)
    else:
        x = _project_feasible(np.zeros((m, n, 3)), contacts.mu, gamma)
    y = x.copy()
    t_k = np.ones(m)
    converged = np.zeros(m, dtype=bool)
    # flattened (m, 3n) iterates keep the loop in plain matmuls
    gflat_t = np.ascontiguousarray(gflat.T)
    two_step = 2.0 * step
    for _ in range(max_iter):
        yflat = y.reshape(m, -1)
        resid = target - yflat @ gflat_t
        x_next = _project_feasible(
            (yflat + two_step * (resid @ gflat)).reshape(m, n, 3), contacts.mu, gamma
        )
        moved = x_next - x
        diff = moved.reshape(m, -1)
        update = np.sqrt((diff * diff).sum(axis=1))
        restart = ((y - x_next).reshape(m, -1) * diff).sum(axis=1) > 0.0
        t_k = np.where(restart, 1.0, t_k)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_k * t_k))
        y = x_next + ((t_k - 1.0) / t_next)[:, None, None] * moved
        x, t_k = x_next, t_next
        converged = update < tol
        if np.all(converged):
            break

    w = x.reshape(m, -1) @ gflat_t
    residuals = target - w
    energy = float(np.einsum("mk,mk->", residuals, residuals))
    return QpResult(
        energy=energy,
        residuals=residuals,
        forces=x,
        directions=dirs,
        beta=beta,
        gamma=gamma,
        converged=converged,
        gamma_active=x[..., 0].sum(axis=-1) <= gamma + 1e-7,
        cap_active=x[..., 0] >= 1.0 - 1e-9,
    )


def qp_energy_gradient(
    contacts: ContactState,
    beta: float,
    gamma: float,
    qp: QpResult,
    dp: np.ndarray,
    dn: np.ndarray | None = None,
) -> np.ndarray:
    """Gradient of the QP energy over pose parameters, forces held fixed.

    dp, dn: (n, 3, P) Jacobians of contact positions and inward normals with
    respect to P pose parameters. The optimal forces are treated as constant
    (envelope argument), so only the grasp matrices vary: positions move the
    torque rows, normals additionally rotate the whole contact frame through
    the tangent completion. Pass dn=None when normals are fixed.
    """
    del beta, gamma  # fixed scalars do not enter the pose gradient
    forces = qp.forces  # (m, n, 3)
    res = qp.residuals  # (m, 6)
    p_rel = contacts.positions - contacts.torque_center
    frame = np.stack([contacts.normals, contacts.tangent_d, contacts.tangent_e], axis=2)
    force_w = np.einsum("nkc,mnc->mnk", frame, forces)  # world force per direction/contact

    # r . dw decomposes as s . dF + (F x r_tau) . dp with s = r_f + r_tau x (p - c)
    r_tau = np.broadcast_to(res[:, None, 3:], force_w.shape)
    s = res[:, None, :3] + np.cross(r_tau, p_rel)
    v = np.cross(force_w, r_tau).sum(axis=0)
    grad = -2.0 * np.einsum("nk,nkp->p", v, dp)

    if dn is not None:
        c_coef = np.einsum("mnc,mnk->nck", forces, s)  # coefficient on each frame column
        a_seed = np.tile([0.0, 0.0, 1.0], (contacts.n_contacts, 1))
        a_seed[np.abs(contacts.normals[:, 2]) > _TANGENT_SWITCH] = [1.0, 0.0, 0.0]
        cross_len = np.linalg.norm(np.cross(a_seed, contacts.normals), axis=1)
        for i in range(contacts.n_contacts):
            d_i = contacts.tangent_d[i]
            n_i = contacts.normals[i]
            dd_dn = (np.eye(3) - np.outer(d_i, d_i)) @ _skew(a_seed[i]) / cross_len[i]
            de_dn = -_skew(d_i) + _skew(n_i) @ dd_dn
            total = c_coef[i, 0] + dd_dn.T @ c_coef[i, 1] + de_dn.T @ c_coef[i, 2]
            grad += -2.0 * total @ dn[i]
    return grad


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])
