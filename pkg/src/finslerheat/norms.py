"""Minkowski norms on the plane, their duals and Legendre transforms.

A norm is described by an immutable :class:`NormSpec`.  Four kinds are
supported:

``quadratic``
    ``F(v) = sqrt(v.G v)`` for a symmetric positive-definite ``G``.
``randers``
    ``F(v) = sqrt(v.G v) + beta.v`` with ``G^{-1}(beta, beta) < 1``.
``lpeps``
    ``F(v)^2 = |v|_p^2 + eps |v|_2^2`` for ``p`` in ``[1, inf]``.
``table``
    ``F(r e_theta) = r f(theta)`` with ``f`` the trigonometric interpolant of
    sampled unit-direction values.

All evaluators accept a single 2-vector or an array of shape ``(..., 2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from . import _kernels as K

KINDS = ("quadratic", "randers", "lpeps", "table")


class KindKernels(NamedTuple):
    """Compiled pointwise maps of one norm kind."""

    F: object
    legendre: object
    metric_dual: object
    metric_primal: object
    legendre_inverse: object


_KERNELS = {
    "quadratic": KindKernels(K.F_quad, K.leg_quad, K.gdual_quad, K.gprim_quad, K.linv_quad),
    "randers": KindKernels(K.F_randers, K.leg_randers, K.gdual_randers, K.gprim_randers, K.linv_randers),
    "lpeps": KindKernels(K.F_lp, K.leg_lp, K.gdual_lp, K.gprim_lp, K.linv_lp),
    "table": KindKernels(K.F_table, K.leg_table, K.gdual_table, K.gprim_table, K.linv_table),
}

# angular offset of the sampling directions; keeps the sample set off the
# axes and diagonals where the lp norms have kinks, and makes the sets for
# n and 2n nested
_DIR_OFFSET = 1e-3


def _as_matrix(g) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if g.size != 4:
        raise ValueError(f"metric matrix needs 4 entries, got {g.size}")
    return g.reshape(2, 2)


@dataclass(frozen=True, eq=False)
class NormSpec:
    """Immutable description of a planar Minkowski norm.

    Use the constructors :meth:`quadratic`, :meth:`randers`, :meth:`lp_eps`,
    :meth:`table` and :meth:`from_function` rather than the raw initialiser.
    """

    kind: str
    g: np.ndarray | None = None
    beta: np.ndarray | None = None
    p: float | None = None
    eps: float | None = None
    coeffs: np.ndarray | None = None
    n_dir: int = 512
    params: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown norm kind {self.kind!r}; expected one of {KINDS}")
        if self.n_dir < 64:
            raise ValueError("n_dir must be at least 64")
        if self.kind in ("quadratic", "randers"):
            g = _as_matrix(self.g)
            if not np.allclose(g, g.T, rtol=0, atol=1e-14 * np.abs(g).max()):
                raise ValueError("metric matrix must be symmetric")
            if np.linalg.eigvalsh(g).min() <= 0:
                raise ValueError("metric matrix must be positive definite")
            gi = np.linalg.inv(g)
            object.__setattr__(self, "g", g)
            prm = [g[0, 0], g[0, 1], g[1, 1], gi[0, 0], gi[0, 1], gi[1, 1]]
            if self.kind == "randers":
                beta = np.asarray(self.beta, dtype=float).reshape(2)
                w = gi @ beta
                s = 1.0 - float(beta @ w)
                if not s > 0:
                    raise ValueError(f"Randers drift too strong: G^-1(beta,beta) = {1 - s:.6g} >= 1")
                object.__setattr__(self, "beta", beta)
                prm += [beta[0], beta[1], w[0], w[1], s]
        elif self.kind == "lpeps":
            p = float(self.p)
            eps = float(self.eps)
            if not (p >= 1.0):
                raise ValueError(f"exponent p must lie in [1, inf], got {p}")
            if not (eps > 0):
                raise ValueError(f"regulariser eps must be positive, got {eps}")
            object.__setattr__(self, "p", p)
            object.__setattr__(self, "eps", eps)
            prm = [p, eps]
        else:
            c = np.asarray(self.coeffs, dtype=float).ravel()
            kmax = (c.size - 1) // 2
            if c.size != 2 * kmax + 1 or kmax < 8:
                raise ValueError("table coefficients must hold a0, a_1..a_K, b_1..b_K with K >= 8")
            object.__setattr__(self, "coeffs", c)
            prm = [float(kmax), *c]
            _check_table(c)
        object.__setattr__(self, "params", np.ascontiguousarray(prm, dtype=float))

    # -- constructors -----------------------------------------------------

    @classmethod
    def quadratic(cls, g=((1.0, 0.0), (0.0, 1.0)), n_dir: int = 512) -> "NormSpec":
        return cls("quadratic", g=g, n_dir=n_dir)

    @classmethod
    def randers(cls, g=((1.0, 0.0), (0.0, 1.0)), beta=(0.0, 0.0), n_dir: int = 512) -> "NormSpec":
        return cls("randers", g=g, beta=beta, n_dir=n_dir)

    @classmethod
    def lp_eps(cls, p: float, eps: float = 1e-2, n_dir: int = 512) -> "NormSpec":
        return cls("lpeps", p=p, eps=eps, n_dir=n_dir)

    @classmethod
    def table(cls, samples, n_dir: int = 512) -> "NormSpec":
        """Norm whose unit-direction values at ``theta_k = 2 pi k / N`` are
        ``samples[k]``; ``N >= 16``."""
        f = np.asarray(samples, dtype=float).ravel()
        n = f.size
        if n < 16:
            raise ValueError("a table norm needs at least 16 direction samples")
        if np.any(f <= 0) or not np.all(np.isfinite(f)):
            raise ValueError("table samples must be finite and positive")
        c = np.fft.rfft(f) / n
        kmax = n // 2
        a = 2.0 * c.real[1:]
        b = -2.0 * c.imag[1:]
        if n % 2 == 0:
            a[-1] *= 0.5
            b[-1] = 0.0
        return cls("table", coeffs=np.concatenate([[c.real[0]], a, b]), n_dir=n_dir)

    @classmethod
    def from_function(cls, F: Callable[[np.ndarray], np.ndarray], n_samples: int = 64, n_dir: int = 512):
        """Tabulate a vectorised norm ``F(v)`` (``v`` of shape (N, 2))."""
        th = 2.0 * np.pi * np.arange(n_samples) / n_samples
        return cls.table(F(np.stack([np.cos(th), np.sin(th)], axis=-1)), n_dir=n_dir)

    # -- derived ------------------------------------------------------------

    @property
    def kernels(self) -> KindKernels:
        return _KERNELS[self.kind]

    @property
    def fixed_orientation(self) -> int:
        """Lattice diagonal used for every square, or -1 when the diagonal is
        chosen by energy.  Inner-product norms use the diagonal along which
        the dual metric couples positively, which keeps their discrete
        Laplacian linear and symmetric on any density."""
        if self.kind == "quadratic":
            return 1 if self.params[4] > 0.0 else 0
        return -1

    @property
    def reversible(self) -> bool:
        return self.kind in ("quadratic", "lpeps") or (
            self.kind == "randers" and not np.any(self.beta)
        )

    def reversed(self) -> "NormSpec":
        """The reverse norm ``v -> F(-v)``."""
        if self.kind == "randers":
            return NormSpec.randers(self.g, -self.beta, n_dir=self.n_dir)
        if self.kind == "table":
            kmax = (self.coeffs.size - 1) // 2
            sign = (-1.0) ** np.arange(1, kmax + 1)
            c = self.coeffs.copy()
            c[1 : kmax + 1] *= sign
            c[kmax + 1 :] *= sign
            return NormSpec("table", coeffs=c, n_dir=self.n_dir)
        return self

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind, "n_dir": self.n_dir}
        if self.g is not None:
            d["g"] = [float(x) for x in self.g.ravel()]
        if self.beta is not None:
            d["beta"] = [float(x) for x in self.beta]
        if self.p is not None:
            d["p"] = self.p
            d["eps"] = self.eps
        if self.coeffs is not None:
            d["coeffs"] = [float(x) for x in self.coeffs]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NormSpec":
        """Build from config keys ``kind``, ``g``, ``beta``, ``p``, ``eps``,
        ``n_dir`` (and ``samples`` or ``coeffs`` for tables)."""
        kind = str(d["kind"]).lower()
        n_dir = int(d.get("n_dir", 512))
        if kind == "quadratic":
            return cls.quadratic(d.get("g", [1, 0, 0, 1]), n_dir=n_dir)
        if kind == "randers":
            return cls.randers(d.get("g", [1, 0, 0, 1]), d.get("beta", [0, 0]), n_dir=n_dir)
        if kind == "lpeps":
            p = d["p"]
            p = np.inf if isinstance(p, str) and p.lower() in ("inf", "infinity") else float(p)
            return cls.lp_eps(p, float(d.get("eps", 1e-2)), n_dir=n_dir)
        if kind == "table":
            if "samples" in d:
                return cls.table(d["samples"], n_dir=n_dir)
            return cls("table", coeffs=d["coeffs"], n_dir=n_dir)
        raise ValueError(f"unknown norm kind {kind!r}")


def _check_table(coeffs: np.ndarray) -> None:
    """Reject tables whose interpolant is not a strongly convex norm."""
    kmax = (coeffs.size - 1) // 2
    th = np.linspace(0.0, 2.0 * np.pi, 4096, endpoint=False)
    k = np.arange(1, kmax + 1)
    cos = np.cos(np.outer(th, k))
    sin = np.sin(np.outer(th, k))
    a = coeffs[1 : kmax + 1]
    b = coeffs[kmax + 1 :]
    f = coeffs[0] + cos @ a + sin @ b
    f2 = -(cos @ (k * k * a) + sin @ (k * k * b))
    if f.min() <= 0:
        raise ValueError("table interpolant is not positive in every direction")
    if (f + f2).min() <= 0:
        raise ValueError("table interpolant is not strongly convex (f + f'' <= 0 somewhere)")


# ---------------------------------------------------------------------------
# evaluation


def _split(x):
    a = np.asarray(x, dtype=float)
    if a.shape[-1] != 2:
        raise ValueError(f"expected trailing dimension 2, got shape {a.shape}")
    flat = a.reshape(-1, 2)
    return np.ascontiguousarray(flat[:, 0]), np.ascontiguousarray(flat[:, 1]), a.shape[:-1]


def _shape_scalar(out, shape):
    return float(out[0]) if shape == () else out.reshape(shape)


def eval_F(spec: NormSpec, v) -> np.ndarray | float:
    x, y, shape = _split(v)
    out = np.empty(x.size)
    K.map_F(spec.kernels.F, spec.params, x, y, out)
    return _shape_scalar(out, shape)


def _legendre(spec, alpha):
    ax, ay, shape = _split(alpha)
    vx = np.empty(ax.size)
    vy = np.empty(ax.size)
    fs = np.empty(ax.size)
    K.map_legendre(spec.kernels.legendre, spec.params, ax, ay, vx, vy, fs)
    return vx, vy, fs, shape


def eval_F_star(spec: NormSpec, alpha) -> np.ndarray | float:
    """Dual norm ``F*(alpha) = sup_{F(v) = 1} alpha(v)``."""
    _, _, fs, shape = _legendre(spec, alpha)
    return _shape_scalar(fs, shape)


def legendre_dual_to_primal(spec: NormSpec, alpha) -> np.ndarray:
    """``L*(alpha)``: the vector with ``F(v) = F*(alpha)`` and
    ``alpha(v) = F*(alpha)^2``; zero for ``alpha = 0``."""
    vx, vy, _, shape = _legendre(spec, alpha)
    return np.stack([vx, vy], axis=-1).reshape(shape + (2,))


def legendre_primal_to_dual(spec: NormSpec, v) -> np.ndarray:
    """Inverse Legendre transform ``v -> grad(F^2/2)(v)``; ``v`` must be
    nonzero."""
    x, y, shape = _split(v)
    if np.any((x == 0) & (y == 0)):
        raise ValueError("the inverse Legendre transform is undefined at v = 0")
    ax = np.empty(x.size)
    ay = np.empty(x.size)
    K.map_pair(spec.kernels.legendre_inverse, spec.params, x, y, ax, ay)
    return np.stack([ax, ay], axis=-1).reshape(shape + (2,))


@dataclass(frozen=True)
class MetricTensor:
    """Symmetric 2x2 tensor ``entries`` evaluated at a primal vector or a
    dual covector (``basepoint_kind`` is ``"primal"`` or ``"dual"``)."""

    entries: np.ndarray
    basepoint_kind: str


def _sym(out, shape):
    m = np.empty((out.shape[0], 2, 2))
    m[:, 0, 0] = out[:, 0]
    m[:, 0, 1] = m[:, 1, 0] = out[:, 1]
    m[:, 1, 1] = out[:, 2]
    return m.reshape(shape + (2, 2))


def metric_tensor_dual(spec: NormSpec, alpha) -> MetricTensor:
    """``g*_alpha``, the Hessian of ``F*^2 / 2`` at nonzero ``alpha``."""
    ax, ay, shape = _split(alpha)
    if np.any((ax == 0) & (ay == 0)):
        raise ValueError("the dual metric is undefined at alpha = 0")
    out = np.empty((ax.size, 3))
    K.map_sym(spec.kernels.metric_dual, spec.params, ax, ay, out)
    return MetricTensor(_sym(out, shape), "dual")


def metric_tensor_primal(spec: NormSpec, v) -> MetricTensor:
    """``g_v``, the Hessian of ``F^2 / 2`` at nonzero ``v``."""
    x, y, shape = _split(v)
    if np.any((x == 0) & (y == 0)):
        raise ValueError("the metric is undefined at v = 0")
    out = np.empty((x.size, 3))
    K.map_sym(spec.kernels.metric_primal, spec.params, x, y, out)
    return MetricTensor(_sym(out, shape), "primal")


# ---------------------------------------------------------------------------
# global constants


@dataclass(frozen=True)
class NormConstants:
    """Sampled reversibility, convexity and smoothness constants.

    ``gstar_max`` is the largest Euclidean eigenvalue of the dual metric over
    the sampled directions; it sets the explicit time-step bound.
    """

    lam: float
    c_unif: float
    s_unif: float
    n_samples: int
    gstar_max: float

    @property
    def closeness_factor(self) -> float:
        """``(sqrt(S) + sqrt(C))^2 / 4 - 1``, zero for inner-product norms."""
        return (np.sqrt(self.s_unif) + np.sqrt(self.c_unif)) ** 2 / 4.0 - 1.0


def sample_directions(n_dir: int) -> np.ndarray:
    return _unit(_DIR_OFFSET + 2.0 * np.pi * np.arange(n_dir) / n_dir)


def _unit(th):
    return np.stack([np.cos(th), np.sin(th)], axis=-1)


def _zoom_max(fun, starts, step: float, iters: int = 30) -> float:
    """Refine a sampled maximum of ``fun`` by repeated local grid search.

    ``starts`` holds candidate points (one row each); every round evaluates
    a 9-point grid per coordinate around the incumbent, which it contains,
    and shrinks the grid four-fold.  The result never falls below the
    values at the starting points.
    """
    offs = np.linspace(-1.0, 1.0, 9)
    best = -np.inf
    for x in np.atleast_2d(starts):
        x = np.asarray(x, dtype=float)
        width = step
        val = -np.inf
        for _ in range(iters):
            grids = np.meshgrid(*[xi + width * offs for xi in x], indexing="ij")
            vals = fun(*grids)
            k = np.unravel_index(int(np.argmax(vals)), vals.shape)
            x = np.array([g[k] for g in grids])
            val = float(vals[k])
            width *= 0.25
        best = max(best, val)
    return best


def compute_constants(spec: NormSpec, n_dir: int | None = None, refine: int = 4) -> NormConstants:
    """Approximate ``Lambda_F``, ``C_F`` and ``S_F`` by sampling ``n_dir``
    directions for both ``v`` and ``w``, then refining the ``refine`` best
    samples of each supremum by local search."""
    n = spec.n_dir if n_dir is None else int(n_dir)
    if n < 64:
        raise ValueError("n_dir must be at least 64")
    th = _DIR_OFFSET + 2.0 * np.pi * np.arange(n) / n
    e = _unit(th)
    f = eval_F(spec, e)
    f_neg = eval_F(spec, -e)
    g = metric_tensor_primal(spec, e).entries  # (n, 2, 2)
    # gw[i, j] = g_{v_i}(w_j, w_j)
    gw = np.einsum("ja,iab,jb->ij", e, g, e)
    ratio = (f**2)[None, :] / gw
    step = 2.0 * np.pi / n

    def lam_fun(t):
        u = _unit(t)
        return eval_F(spec, u) / eval_F(spec, -u)

    def c_fun(tv, tw):
        w = _unit(tw)
        gv = metric_tensor_primal(spec, _unit(tv)).entries
        return eval_F(spec, w) ** 2 / np.einsum("...a,...ab,...b->...", w, gv, w)

    def top(values, k):
        flat = np.argsort(values.ravel())[::-1][:k]
        idx = np.array(np.unravel_index(flat, values.shape)).T
        return th[idx]

    r_lam = f / f_neg
    lam = max(float(r_lam.max()), _zoom_max(lam_fun, top(r_lam, refine), step) if refine else -np.inf, 1.0)
    c = max(float(ratio.max()), 1.0)
    s = max(float((1.0 / ratio).max()), 1.0)
    if refine:
        c = max(c, _zoom_max(c_fun, top(ratio, refine), step))
        s = max(s, _zoom_max(lambda tv, tw: 1.0 / c_fun(tv, tw), top(1.0 / ratio, refine), step))
    lam_min = np.linalg.eigvalsh(g)[:, 0]
    return NormConstants(lam=lam, c_unif=c, s_unif=s, n_samples=n, gstar_max=float(1.0 / lam_min.min()))
