"""Graph construction and data-adaptive Laplacian learning for patch groups.

Two ways to get a Laplacian:

* ``kernel_adjacency`` + ``laplacian_from_weights``: the classical
  thresholded Gaussian-kernel graph over node signals.
* ``learn_laplacian``: minimize

      alpha * smoothness(X, L) + beta * ||L||_F^2

  over valid Laplacians (symmetric, non-positive off-diagonal, zero row
  sums, trace equal to the node count).  A matrix in that set is exactly
  the Laplacian of a non-negative weighted graph whose edge weights sum to
  N/2, so the solver runs projected gradient descent on the edge-weight
  vector: symmetry, sign, and row sums hold by construction, and the sum
  constraint is enforced with an exact Euclidean projection onto the scaled
  simplex.  The objective is strongly convex in the weights, so the
  iteration converges to the unique constrained minimum; steps that would
  increase the objective are halved, making the objective non-increasing
  by construction.

Row mode treats the m rows of a group matrix as nodes, column mode the n
columns; ``smoothness`` is tr(X^T L X) and tr(X L X^T) respectively.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MODES = ("row", "column")


@dataclass(frozen=True)
class GraphLearnConfig:
    """Weights and stopping rule for Laplacian learning."""

    alpha: float = 1.2
    beta: float = 0.8
    max_iters: int = 500
    tol: float = 1e-6

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")


@dataclass
class LaplacianLearnResult:
    """Learned Laplacian plus solver diagnostics."""

    laplacian: np.ndarray
    converged: bool
    iterations: int
    objective: float
    objective_history: np.ndarray = field(repr=False, default=None)


def kernel_adjacency(vectors, kernel_width: float, threshold: float) -> np.ndarray:
    """Thresholded Gaussian-kernel weight matrix over node signal vectors.

    W[i, j] = exp(-||v_i - v_j||^2 / kernel_width^2) when the squared
    distance is <= threshold, else 0; the diagonal is zero and the result
    is exactly symmetric.
    """
    V = np.asarray(vectors, dtype=np.float64)
    if V.ndim != 2:
        raise ValueError("vectors must be a list of equal-length 1-D signals")
    if not kernel_width > 0:
        raise ValueError(f"kernel_width must be positive, got {kernel_width}")
    if threshold < 0:
        raise ValueError(f"threshold must be >= 0, got {threshold}")
    diff = V[:, None, :] - V[None, :, :]
    d2 = (diff**2).sum(axis=-1)
    W = np.where(d2 <= threshold, np.exp(-d2 / (kernel_width * kernel_width)), 0.0)
    np.fill_diagonal(W, 0.0)
    return W


def laplacian_from_weights(W) -> np.ndarray:
    """Combinatorial Laplacian degree(W) - W of a weight matrix."""
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError(f"weight matrix must be square, got shape {W.shape}")
    scale = max(1.0, float(np.abs(W).max(initial=0.0)))
    if np.abs(W - W.T).max(initial=0.0) > 1e-12 * scale:
        raise ValueError("weight matrix is not symmetric")
    if W.min(initial=0.0) < 0:
        raise ValueError("weight matrix has negative entries")
    if np.abs(np.diag(W)).max(initial=0.0) != 0:
        raise ValueError("weight matrix must have a zero diagonal")
    L = -W.copy()
    np.fill_diagonal(L, W.sum(axis=1))
    return L


def smoothness(X, L, mode: str) -> float:
    """Graph quadratic form of a data matrix: tr(X^T L X) or tr(X L X^T)."""
    X = np.asarray(X, dtype=np.float64)
    L = np.asarray(L, dtype=np.float64)
    if mode == "row":
        if L.shape != (X.shape[0], X.shape[0]):
            raise ValueError(f"row Laplacian shape {L.shape} does not match {X.shape[0]} rows")
        return float((X * (L @ X)).sum())
    if mode == "column":
        if L.shape != (X.shape[1], X.shape[1]):
            raise ValueError(
                f"column Laplacian shape {L.shape} does not match {X.shape[1]} columns"
            )
        return float((X * (X @ L)).sum())
    raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


def uniform_laplacian(n_nodes: int) -> np.ndarray:
    """Complete-graph Laplacian with equal weights and trace n_nodes."""
    if n_nodes < 2:
        raise ValueError("need at least 2 nodes")
    return (n_nodes * np.eye(n_nodes) - np.ones((n_nodes, n_nodes))) / (n_nodes - 1)


def learn_laplacian(X, mode: str, cfg: GraphLearnConfig | None = None) -> LaplacianLearnResult:
    """Learn the optimal valid Laplacian for one data matrix.

    Returns the best feasible iterate with ``converged=False`` when the
    stopping tolerance is not met within ``cfg.max_iters``.
    """
    cfg = cfg or GraphLearnConfig()
    V = _node_signals(np.asarray(X, dtype=np.float64), mode)
    n_nodes = V.shape[0]
    dist = _edge_sqdist(V[None, :, :])
    w, conv, iters, fval, hist = _learn_weights(dist, n_nodes, cfg, want_history=True)
    return LaplacianLearnResult(
        laplacian=_weights_to_laplacians(w, n_nodes)[0],
        converged=bool(conv[0]),
        iterations=int(iters[0]),
        objective=float(fval[0]),
        objective_history=np.asarray(hist, dtype=np.float64)[:, 0],
    )


def learn_laplacian_batch(
    stack, mode: str, cfg: GraphLearnConfig | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Learn Laplacians for a (G, m, n) stack of data matrices at once.

    Returns (laplacians (G, N, N), converged (G,), iterations (G,)).
    Results are identical to per-matrix ``learn_laplacian`` calls; batching
    only amortizes the vector arithmetic.
    """
    cfg = cfg or GraphLearnConfig()
    arr = np.asarray(stack, dtype=np.float64)
    if arr.ndim != 3:
        raise ValueError(f"expected a (G, m, n) stack, got shape {arr.shape}")
    V = arr if mode == "row" else arr.swapaxes(-1, -2) if mode == "column" else None
    if V is None:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    n_nodes = V.shape[1]
    if n_nodes < 2:
        raise ValueError("need at least 2 nodes")
    dist = _edge_sqdist(V)
    w, conv, iters, _, _ = _learn_weights(dist, n_nodes, cfg, want_history=False)
    return _weights_to_laplacians(w, n_nodes), conv, iters


def check_laplacian(L, *, learned: bool = False) -> list[str]:
    """List of invariant violations (empty when L is a valid Laplacian).

    Checks exact symmetry, off-diagonal sign (tol 1e-9), zero row sums
    (tol 1e-9 * N), positive semidefiniteness (eigenvalues >= -1e-8) and,
    for learned Laplacians, trace N within 1e-6.
    """
    L = np.asarray(L, dtype=np.float64)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        return [f"not a square matrix: shape {L.shape}"]
    n = L.shape[0]
    problems = []
    if not np.array_equal(L, L.T):
        problems.append("not exactly symmetric")
    off = L[~np.eye(n, dtype=bool)]
    if off.size and off.max() > 1e-9:
        problems.append(f"positive off-diagonal entry {off.max():.3e}")
    worst_row = np.abs(L.sum(axis=1)).max()
    if worst_row > 1e-9 * n:
        problems.append(f"row sums deviate from zero by {worst_row:.3e}")
    if learned:
        tr = float(np.trace(L))
        if abs(tr - n) > 1e-6:
            problems.append(f"trace {tr!r} != node count {n}")
    lam_min = float(np.linalg.eigvalsh((L + L.T) / 2.0).min())
    if lam_min < -1e-8:
        problems.append(f"negative eigenvalue {lam_min:.3e}")
    return problems


def save_laplacian_csv(L, path) -> None:
    """Write a Laplacian as comma-separated rows with round-trip precision."""
    np.savetxt(path, np.asarray(L, dtype=np.float64), delimiter=",", fmt="%.17g")


def load_laplacian_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


def magnitude_image(L) -> np.ndarray:
    """Grayscale rendering of |L| with black mapped to the largest magnitude."""
    mag = np.abs(np.asarray(L, dtype=np.float64))
    peak = mag.max()
    if peak == 0:
        return np.full(mag.shape, 255.0)
    return 255.0 * (1.0 - mag / peak)


def _node_signals(X: np.ndarray, mode: str) -> np.ndarray:
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D data matrix, got shape {X.shape}")
    if mode == "row":
        V = X
    elif mode == "column":
        V = X.T
    else:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if V.shape[0] < 2:
        raise ValueError("need at least 2 nodes")
    return V


def _edge_sqdist(V: np.ndarray) -> np.ndarray:
    # V: (G, N, d) -> squared distances per upper-triangle edge, (G, E).
    n_nodes = V.shape[1]
    iu, ju = np.triu_indices(n_nodes, 1)
    diff = V[:, iu, :] - V[:, ju, :]
    return np.einsum("ged,ged->ge", diff, diff)


def _incidence(n_nodes: int) -> np.ndarray:
    iu, ju = np.triu_indices(n_nodes, 1)
    M = np.zeros((n_nodes, iu.size))
    e = np.arange(iu.size)
    M[iu, e] = 1.0
    M[ju, e] = 1.0
    return M


def _project_simplex(v: np.ndarray, total: float) -> np.ndarray:
    """Euclidean projection of each row onto {w >= 0, sum(w) = total}."""
    n = v.shape[-1]
    u = np.sort(v, axis=-1)[..., ::-1]
    css = np.cumsum(u, axis=-1) - total
    ks = np.arange(1, n + 1, dtype=np.float64)
    cond = u - css / ks > 0
    rho = n - 1 - np.argmax(cond[..., ::-1], axis=-1)
    tau = np.take_along_axis(css, rho[..., None], axis=-1)[..., 0] / (rho + 1.0)
    return np.maximum(v - tau[..., None], 0.0)


def _learn_weights(dist, n_nodes, cfg, want_history):
    """Projected gradient on edge weights; supports a batch of problems.

    Converged problems retire from the working set so long-running
    stragglers do not pay for the whole batch.
    """
    n_groups, n_edges = dist.shape
    iu, ju = np.triu_indices(n_nodes, 1)
    Mt = _incidence(n_nodes).T  # (E, N): deg = w @ Mt
    total = n_nodes / 2.0
    alpha, beta = cfg.alpha, cfg.beta

    w_out = np.empty((n_groups, n_edges))
    conv_out = np.zeros(n_groups, dtype=bool)
    iters_out = np.full(n_groups, 0, dtype=np.intp)
    f_out = np.empty(n_groups)

    idx = np.arange(n_groups)
    w = np.full((n_groups, n_edges), total / n_edges)
    d = dist.astype(np.float64, copy=True)
    deg = w @ Mt

    def objective(wv, degv, dv):
        return alpha * (wv * dv).sum(axis=1) + beta * (
            (degv**2).sum(axis=1) + 2.0 * (wv**2).sum(axis=1)
        )

    f = objective(w, deg, d)
    # 1/L for the quadratic part: Hessian spectral norm is at most 4*beta*N.
    eta = np.full(n_groups, 1.0 / (4.0 * beta * n_nodes))
    history = [f.copy()] if want_history else None

    it = 0
    while it < cfg.max_iters and idx.size:
        it += 1
        grad = alpha * d + 2.0 * beta * (deg[:, iu] + deg[:, ju]) + 4.0 * beta * w
        cand = _project_simplex(w - eta[:, None] * grad, total)
        deg_c = cand @ Mt
        f_c = objective(cand, deg_c, d)
        for _ in range(60):
            bad = f_c > f
            if not bad.any():
                break
            eta[bad] *= 0.5
            cand[bad] = _project_simplex(w[bad] - eta[bad, None] * grad[bad], total)
            deg_c[bad] = cand[bad] @ Mt
            f_c[bad] = objective(cand[bad], deg_c[bad], d[bad])
        stalled = f_c > f
        if stalled.any():
            cand[stalled] = w[stalled]
            deg_c[stalled] = deg[stalled]
            f_c[stalled] = f[stalled]
        deg_delta = deg_c - deg
        delta = cand - w
        step_norm = np.sqrt((deg_delta**2).sum(axis=1) + 2.0 * (delta**2).sum(axis=1))
        w, deg, f = cand, deg_c, f_c
        if want_history:
            history.append(f.copy())
        done = step_norm <= cfg.tol
        if done.any():
            sel = idx[done]
            w_out[sel] = w[done]
            conv_out[sel] = True
            iters_out[sel] = it
            f_out[sel] = f[done]
            keep = ~done
            idx = idx[keep]
            w, d, deg, f, eta = w[keep], d[keep], deg[keep], f[keep], eta[keep]
    if idx.size:
        w_out[idx] = w
        iters_out[idx] = it
        f_out[idx] = f
    return w_out, conv_out, iters_out, f_out, history


def _weights_to_laplacians(w: np.ndarray, n_nodes: int) -> np.ndarray:
    iu, ju = np.triu_indices(n_nodes, 1)
    n_groups = w.shape[0]
    L = np.zeros((n_groups, n_nodes, n_nodes))
    L[:, iu, ju] = -w
    L[:, ju, iu] = -w
    diag = np.arange(n_nodes)
    L[:, diag, diag] = w @ _incidence(n_nodes).T
    return L
