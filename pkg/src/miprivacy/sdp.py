"""Small dense semidefinite programs by primal-dual path following.

Solves the standard-form pair

    primal:  min <C, X>   s.t. <A_i, X> = b_i,  X psd
    dual:    max b . y    s.t. C - sum_i y_i A_i = Z psd

with the HKM search direction and Mehrotra's predictor-corrector step. The
problems handled here are tiny (a few tens of rows), so everything is dense.
Linear inequality variables are embedded as diagonal entries; block-diagonal
data stays block-diagonal along the iterates, so no coupling is introduced.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import NumericalFailure

STEP_FRACTION = 0.98
MIN_STEP = 1e-8
ACCEPT_TOL = 1e-7


@dataclass
class SdpResult:
    X: np.ndarray
    y: np.ndarray
    Z: np.ndarray
    primal_objective: float
    dual_objective: float
    gap: float
    primal_infeasibility: float
    dual_infeasibility: float
    iterations: int


def _sym(K):
    return 0.5 * (K + K.T)


def _max_step(X, dX):
    """Largest ``a <= 1`` keeping ``X + a dX`` psd (before damping)."""
    try:
        L = np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        return 0.0
    Li = np.linalg.inv(L)
    lam = np.linalg.eigvalsh(_sym(Li @ dX @ Li.T))
    lo = lam[0]
    if lo >= 0:
        return 1.0
    return min(1.0, -1.0 / lo)


def solve_sdp_standard(C, A, b, tol=1e-12, max_iter=100):
    """Primal-dual interior point for a dense standard-form SDP.

    Parameters
    ----------
    C : (n, n) ndarray
    A : (k, n, n) ndarray
        Symmetric constraint matrices.
    b : (k,) ndarray
    tol : float
        Target for relative gap and both relative infeasibilities.

    Raises
    ------
    NumericalFailure
        If the iterates stop making progress before the best one reaches
        ``1e-7`` in relative gap and infeasibility. Between ``tol`` and that
        level the best iterate is returned.
    """
    C = np.asarray(C, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    n = C.shape[0]
    k = A.shape[0]
    Af = A.reshape(k, -1)

    def op(X):
        return Af @ X.ravel()

    def adj(y):
        return np.tensordot(y, A, axes=1)

    scale = max(1.0, np.max(np.abs(b)), np.max(np.abs(C)))
    X = np.eye(n) * scale
    Z = np.eye(n) * scale
    y = np.zeros(k)
    normb = 1.0 + np.linalg.norm(b)
    normC = 1.0 + np.linalg.norm(C)
    best = np.inf
    best_state = None
    stall = 0
    info = {}
    for it in range(1, max_iter + 1):
        rp = b - op(X)
        Rd = C - adj(y) - Z
        mu = np.sum(X * Z) / n
        pobj = float(np.sum(C * X))
        dobj = float(b @ y)
        pinf = np.linalg.norm(rp) / normb
        dinf = np.linalg.norm(Rd) / normC
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        info = dict(iterations=it, gap=gap, primal_infeasibility=pinf, dual_infeasibility=dinf, mu=mu)
        if max(gap, pinf, dinf) <= tol and mu <= tol * scale:
            return SdpResult(X, y, Z, pobj, dobj, gap, pinf, dinf, it)
        merit = max(gap, pinf, dinf)
        if merit < best * 0.999:
            best, stall = merit, 0
            best_state = (X, y, Z, pobj, dobj, gap, pinf, dinf, it)
        else:
            stall += 1
            if stall >= 8:
                break

        try:
            Zi = np.linalg.inv(Z)
        except np.linalg.LinAlgError:
            break
        # schur_ij = Tr(A_i X A_j Z^-1)
        XAZ = np.einsum("ab,kbc,cd->kad", X, A, Zi)
        schur = np.einsum("iab,jba->ij", A, XAZ)
        schur = _sym(schur)
        XRdZi = X @ Rd @ Zi

        def direction(G):
            rhs = rp - op(_sym(G)) + op(_sym(XRdZi))
            try:
                dy = np.linalg.solve(schur, rhs)
            except np.linalg.LinAlgError:
                dy = np.linalg.lstsq(schur, rhs, rcond=None)[0]
            dZ = Rd - adj(dy)
            dX = _sym(G - X @ dZ @ Zi)
            return dX, dy, dZ

        dXa, dya, dZa = direction(-X)
        ap = _max_step(X, dXa)
        ad = _max_step(Z, dZa)
        mu_aff = np.sum((X + ap * dXa) * (Z + ad * dZa)) / n
        sigma = min(1.0, (mu_aff / mu) ** 3) if mu > 0 else 0.0
        G = sigma * mu * Zi - X - dXa @ dZa @ Zi
        dX, dy, dZ = direction(G)
        ap = min(1.0, STEP_FRACTION * _max_step(X, dX))
        ad = min(1.0, STEP_FRACTION * _max_step(Z, dZ))
        if max(ap, ad) < MIN_STEP:
            break
        X = _sym(X + ap * dX)
        y = y + ad * dy
        Z = _sym(Z + ad * dZ)
    # near the optimum the Schur system loses accuracy; fall back to the best iterate seen
    if best <= ACCEPT_TOL:
        return SdpResult(*best_state)
    raise NumericalFailure("SDP interior-point iterations stalled", diagnostics=info)
