"""Hot numeric kernels: batched triangulation and the pose LM solver.

Two interchangeable backends:
  * numba @njit loop kernels (default when numba imports cleanly)
  * a vectorized pure-numpy fallback

Set MONOLOC_NO_NUMBA=1 to force the numpy path.  Both paths follow the same
iteration logic; results agree to floating-point reassociation error.

Flattened observation layout for triangulation: point j owns entries
pt_start[j]:pt_start[j+1] of cam_idx / uv.

Status codes: 0 ok, 1 non-positive depth, 2 degenerate rays.
"""
from __future__ import annotations

import os

import numpy as np

USE_NUMBA = os.environ.get("MONOLOC_NO_NUMBA", "0") != "1"
if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover
        USE_NUMBA = False

_RIDGE = 1e-12


# ---------------------------------------------------------------- numba path

def _build_numba():
    jit = njit(cache=True)

    @jit
    def _so3_exp(w):
        theta = np.sqrt(w[0] ** 2 + w[1] ** 2 + w[2] ** 2)
        S = np.zeros((3, 3))
        S[0, 1], S[0, 2] = -w[2], w[1]
        S[1, 0], S[1, 2] = w[2], -w[0]
        S[2, 0], S[2, 1] = -w[1], w[0]
        I = np.eye(3)
        if theta < 1e-8:
            return I + S + 0.5 * (S @ S)
        a = np.sin(theta) / theta
        b = (1.0 - np.cos(theta)) / theta ** 2
        return I + a * S + b * (S @ S)

    @jit
    def triangulate(Rs, ps, pt_start, cam_idx, uv, fx, fy, cx, cy,
                    huber, max_iter, tol):
        n = pt_start.shape[0] - 1
        X = np.zeros((n, 3))
        mean_res = np.zeros(n)
        status = np.zeros(n, np.int8)
        for j in range(n):
            s, e = pt_start[j], pt_start[j + 1]
            m = e - s
            # widest-baseline pair for the midpoint initialization
            bi, bj, bmax = 0, 1, -1.0
            for a in range(m):
                for b in range(a + 1, m):
                    ca, cb = cam_idx[s + a], cam_idx[s + b]
                    d0 = ps[ca, 0] - ps[cb, 0]
                    d1 = ps[ca, 1] - ps[cb, 1]
                    d2 = ps[ca, 2] - ps[cb, 2]
                    bl = np.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
                    if bl > bmax:
                        bi, bj, bmax = a, b, bl
            if bmax < 1e-12:
                status[j] = 2
                continue
            c1, c2 = cam_idx[s + bi], cam_idx[s + bj]
            d1v = np.empty(3)
            d2v = np.empty(3)
            for (ci, oi, dv) in ((c1, s + bi, d1v), (c2, s + bj, d2v)):
                dc = np.empty(3)
                dc[0] = (uv[oi, 0] - cx) / fx
                dc[1] = (uv[oi, 1] - cy) / fy
                dc[2] = 1.0
                for r in range(3):
                    dv[r] = (Rs[ci, r, 0] * dc[0] + Rs[ci, r, 1] * dc[1]
                             + Rs[ci, r, 2] * dc[2])
                nrm = np.sqrt(dv[0] ** 2 + dv[1] ** 2 + dv[2] ** 2)
                for r in range(3):
                    dv[r] /= nrm
            b12 = d1v[0] * d2v[0] + d1v[1] * d2v[1] + d1v[2] * d2v[2]
            denom = 1.0 - b12 * b12
            if np.sqrt(max(denom, 0.0)) < 1e-6:
                status[j] = 2
                continue
            w0 = ps[c1] - ps[c2]
            dw1 = d1v[0] * w0[0] + d1v[1] * w0[1] + d1v[2] * w0[2]
            dw2 = d2v[0] * w0[0] + d2v[1] * w0[1] + d2v[2] * w0[2]
            t1 = (b12 * dw2 - dw1) / denom
            t2 = (dw2 - b12 * dw1) / denom
            Xj = 0.5 * (ps[c1] + t1 * d1v + ps[c2] + t2 * d2v)

            # Huber-weighted Gauss-Newton over the point
            for _ in range(max_iter):
                H = np.zeros((3, 3))
                g = np.zeros(3)
                for a in range(m):
                    ci = cam_idx[s + a]
                    Y = Rs[ci].T @ (Xj - ps[ci])
                    if Y[2] <= 1e-9:
                        continue
                    ru = fx * Y[0] / Y[2] + cx - uv[s + a, 0]
                    rv = fy * Y[1] / Y[2] + cy - uv[s + a, 1]
                    Jp = np.zeros((2, 3))
                    Jp[0, 0] = fx / Y[2]
                    Jp[0, 2] = -fx * Y[0] / Y[2] ** 2
                    Jp[1, 1] = fy / Y[2]
                    Jp[1, 2] = -fy * Y[1] / Y[2] ** 2
                    J = Jp @ Rs[ci].T
                    rn = np.sqrt(ru * ru + rv * rv)
                    w = 1.0 if rn <= huber else huber / rn
                    for r in range(3):
                        g[r] += w * (J[0, r] * ru + J[1, r] * rv)
                        for c in range(3):
                            H[r, c] += w * (J[0, r] * J[0, c] + J[1, r] * J[1, c])
                for r in range(3):
                    H[r, r] += _RIDGE
                dx = np.linalg.solve(H, -g)
                Xj = Xj + dx
                if np.sqrt(dx[0] ** 2 + dx[1] ** 2 + dx[2] ** 2) < tol:
                    break
            X[j] = Xj
            acc = 0.0
            for a in range(m):
                ci = cam_idx[s + a]
                Y = Rs[ci].T @ (Xj - ps[ci])
                if Y[2] <= 1e-9:
                    status[j] = 1
                    break
                ru = fx * Y[0] / Y[2] + cx - uv[s + a, 0]
                rv = fy * Y[1] / Y[2] + cy - uv[s + a, 1]
                acc += np.sqrt(ru * ru + rv * rv)
            if status[j] == 0:
                mean_res[j] = acc / m
        return X, mean_res, status

    @jit
    def _pose_objective(R, p, X, uv, fx, fy, cx, cy, huber):
        obj = 0.0
        for i in range(X.shape[0]):
            Y = R.T @ (X[i] - p)
            if Y[2] <= 1e-9:
                return np.inf
            ru = fx * Y[0] / Y[2] + cx - uv[i, 0]
            rv = fy * Y[1] / Y[2] + cy - uv[i, 1]
            rn = np.sqrt(ru * ru + rv * rv)
            obj += rn * rn if rn <= huber else huber * (2.0 * rn - huber)
        return obj

    @jit
    def solve_pose(X, uv, R0, p0, fx, fy, cx, cy, huber, max_iter, tol, lm0):
        R = R0.copy()
        p = p0.copy()
        lam = lm0
        obj = _pose_objective(R, p, X, uv, fx, fy, cx, cy, huber)
        status = 1
        it = 0
        while it < max_iter:
            H = np.zeros((6, 6))
            g = np.zeros(6)
            for i in range(X.shape[0]):
                Y = R.T @ (X[i] - p)
                if Y[2] <= 1e-9:
                    continue
                ru = fx * Y[0] / Y[2] + cx - uv[i, 0]
                rv = fy * Y[1] / Y[2] + cy - uv[i, 1]
                J = np.zeros((2, 6))
                iz = 1.0 / Y[2]
                # J_pi @ [-I | skew(Y)]
                J[0, 0] = -fx * iz
                J[0, 2] = fx * Y[0] * iz * iz
                J[1, 1] = -fy * iz
                J[1, 2] = fy * Y[1] * iz * iz
                J[0, 3] = fx * Y[0] * Y[1] * iz * iz
                J[0, 4] = -fx * (1.0 + Y[0] * Y[0] * iz * iz)
                J[0, 5] = fx * Y[1] * iz
                J[1, 3] = fy * (1.0 + Y[1] * Y[1] * iz * iz)
                J[1, 4] = -fy * Y[0] * Y[1] * iz * iz
                J[1, 5] = -fy * Y[0] * iz
                rn = np.sqrt(ru * ru + rv * rv)
                w = 1.0 if rn <= huber else huber / rn
                for r in range(6):
                    g[r] += w * (J[0, r] * ru + J[1, r] * rv)
                    for c in range(6):
                        H[r, c] += w * (J[0, r] * J[0, c] + J[1, r] * J[1, c])
            accepted = False
            while it < max_iter:
                it += 1
                A = H.copy()
                for r in range(6):
                    A[r, r] += lam
                dx = np.linalg.solve(A, -g)
                step = np.sqrt((dx * dx).sum())
                if step < tol:
                    # proposed step below tolerance: converged
                    status = 0
                    accepted = False
                    break
                Rc = R @ _so3_exp(dx[3:])
                pc = p + R @ dx[:3]
                obj_c = _pose_objective(Rc, pc, X, uv, fx, fy, cx, cy, huber)
                if obj_c <= obj:
                    R, p, obj = Rc, pc, obj_c
                    lam = max(lam / 10.0, 1e-12)
                    accepted = True
                    break
                lam *= 10.0
                if lam > 1e10:
                    break
            if status == 0 or not accepted:
                break
        return R, p, status, it

    return triangulate, solve_pose


# ---------------------------------------------------------------- numpy path

def _np_project(R, p, X, fx, fy, cx, cy):
    Y = (X - p) @ R  # == (R.T @ (X - p).T).T
    uv = np.column_stack([fx * Y[:, 0] / Y[:, 2] + cx,
                          fy * Y[:, 1] / Y[:, 2] + cy])
    return uv, Y


def _np_triangulate(Rs, ps, pt_start, cam_idx, uv, fx, fy, cx, cy,
                    huber, max_iter, tol):
    n = len(pt_start) - 1
    X = np.zeros((n, 3))
    mean_res = np.zeros(n)
    status = np.zeros(n, np.int8)
    active = np.ones(n, dtype=bool)
    for j in range(n):
        s, e = pt_start[j], pt_start[j + 1]
        cams = cam_idx[s:e]
        base = np.linalg.norm(ps[cams][:, None, :] - ps[cams][None, :, :], axis=2)
        a, b = np.unravel_index(np.argmax(base), base.shape)
        if base[a, b] < 1e-12:
            status[j], active[j] = 2, False
            continue
        c1, c2 = cams[a], cams[b]
        dirs = []
        for ci, oi in ((c1, s + a), (c2, s + b)):
            dc = np.array([(uv[oi, 0] - cx) / fx, (uv[oi, 1] - cy) / fy, 1.0])
            d = Rs[ci] @ dc
            dirs.append(d / np.linalg.norm(d))
        d1v, d2v = dirs
        b12 = d1v @ d2v
        denom = 1.0 - b12 * b12
        if np.sqrt(max(denom, 0.0)) < 1e-6:
            status[j], active[j] = 2, False
            continue
        w0 = ps[c1] - ps[c2]
        t1 = (b12 * (d2v @ w0) - (d1v @ w0)) / denom
        t2 = ((d2v @ w0) - b12 * (d1v @ w0)) / denom
        X[j] = 0.5 * (ps[c1] + t1 * d1v + ps[c2] + t2 * d2v)

    for _ in range(max_iter):
        if not active.any():
            break
        for j in np.nonzero(active)[0]:
            s, e = pt_start[j], pt_start[j + 1]
            cams = cam_idx[s:e]
            Y = np.einsum('kji,kj->ki', Rs[cams], X[j] - ps[cams])
            ok = Y[:, 2] > 1e-9
            r = np.column_stack([fx * Y[:, 0] / Y[:, 2] + cx,
                                 fy * Y[:, 1] / Y[:, 2] + cy]) - uv[s:e]
            Jp = np.zeros((e - s, 2, 3))
            Jp[:, 0, 0] = fx / Y[:, 2]
            Jp[:, 0, 2] = -fx * Y[:, 0] / Y[:, 2] ** 2
            Jp[:, 1, 1] = fy / Y[:, 2]
            Jp[:, 1, 2] = -fy * Y[:, 1] / Y[:, 2] ** 2
            J = np.einsum('kab,kbc->kac', Jp, np.transpose(Rs[cams], (0, 2, 1)))
            rn = np.linalg.norm(r, axis=1)
            w = np.where(rn <= huber, 1.0, huber / np.maximum(rn, 1e-300)) * ok
            H = np.einsum('k,kab,kac->bc', w, J, J) + _RIDGE * np.eye(3)
            g = np.einsum('k,kab,ka->b', w, J, r)
            dx = np.linalg.solve(H, -g)
            X[j] = X[j] + dx
            if np.linalg.norm(dx) < tol:
                active[j] = False

    for j in range(n):
        if status[j] == 2:
            continue
        s, e = pt_start[j], pt_start[j + 1]
        cams = cam_idx[s:e]
        Y = np.einsum('kji,kj->ki', Rs[cams], X[j] - ps[cams])
        if (Y[:, 2] <= 1e-9).any():
            status[j] = 1
            continue
        r = np.column_stack([fx * Y[:, 0] / Y[:, 2] + cx,
                             fy * Y[:, 1] / Y[:, 2] + cy]) - uv[s:e]
        mean_res[j] = np.linalg.norm(r, axis=1).mean()
    return X, mean_res, status


def _np_pose_terms(R, p, X, uv, fx, fy, cx, cy):
    Y = (X - p) @ R
    r = np.column_stack([fx * Y[:, 0] / Y[:, 2] + cx,
                         fy * Y[:, 1] / Y[:, 2] + cy]) - uv
    iz = 1.0 / Y[:, 2]
    J = np.zeros((len(X), 2, 6))
    J[:, 0, 0] = -fx * iz
    J[:, 0, 2] = fx * Y[:, 0] * iz * iz
    J[:, 1, 1] = -fy * iz
    J[:, 1, 2] = fy * Y[:, 1] * iz * iz
    J[:, 0, 3] = fx * Y[:, 0] * Y[:, 1] * iz * iz
    J[:, 0, 4] = -fx * (1.0 + Y[:, 0] ** 2 * iz * iz)
    J[:, 0, 5] = fx * Y[:, 1] * iz
    J[:, 1, 3] = fy * (1.0 + Y[:, 1] ** 2 * iz * iz)
    J[:, 1, 4] = -fy * Y[:, 0] * Y[:, 1] * iz * iz
    J[:, 1, 5] = -fy * Y[:, 0] * iz
    return r, J, Y[:, 2]


def _np_pose_objective(R, p, X, uv, fx, fy, cx, cy, huber):
    Y = (X - p) @ R
    if (Y[:, 2] <= 1e-9).any():
        return np.inf
    r = np.column_stack([fx * Y[:, 0] / Y[:, 2] + cx,
                         fy * Y[:, 1] / Y[:, 2] + cy]) - uv
    rn = np.linalg.norm(r, axis=1)
    return float(np.where(rn <= huber, rn ** 2, huber * (2.0 * rn - huber)).sum())


def _np_solve_pose(X, uv, R0, p0, fx, fy, cx, cy, huber, max_iter, tol, lm0):
    from .lie import so3_exp

    R, p, lam = R0.copy(), p0.copy(), lm0
    obj = _np_pose_objective(R, p, X, uv, fx, fy, cx, cy, huber)
    status, it = 1, 0
    while it < max_iter:
        r, J, depth = _np_pose_terms(R, p, X, uv, fx, fy, cx, cy)
        rn = np.linalg.norm(r, axis=1)
        w = np.where(rn <= huber, 1.0, huber / np.maximum(rn, 1e-300))
        w = w * (depth > 1e-9)
        H = np.einsum('k,kab,kac->bc', w, J, J)
        g = np.einsum('k,kab,ka->b', w, J, r)
        accepted = False
        while it < max_iter:
            it += 1
            dx = np.linalg.solve(H + lam * np.eye(6), -g)
            if np.linalg.norm(dx) < tol:
                # proposed step below tolerance: converged
                status = 0
                accepted = False
                break
            Rc = R @ so3_exp(dx[3:])
            pc = p + R @ dx[:3]
            obj_c = _np_pose_objective(Rc, pc, X, uv, fx, fy, cx, cy, huber)
            if obj_c <= obj:
                R, p, obj = Rc, pc, obj_c
                lam = max(lam / 10.0, 1e-12)
                accepted = True
                break
            lam *= 10.0
            if lam > 1e10:
                break
        if status == 0 or not accepted:
            break
    return R, p, status, it


if USE_NUMBA:
    triangulate_kernel, solve_pose_kernel = _build_numba()
else:
    triangulate_kernel, solve_pose_kernel = _np_triangulate, _np_solve_pose
