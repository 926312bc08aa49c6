"""dist_alpha pseudo-metrics through a fixed panel of normalized test forms.

The true dual norm sup over the C^alpha unit ball is not computable; a
fixed, versioned library of bump-modulated polynomial amplitudes (plus
|.|^alpha kink profiles when alpha < 1, which carry the small-separation
scaling of Dirac pairs) gives a reproducible lower bound that is a
pseudo-metric and is adequate for convergence-rate fitting.

On P^1 the panel members pair directly with measures; a (1,1)-current on
P^2 pairs through its trace measure (member * omega as the test form).
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .currents import Current11, GridMeasure, trace_measure

__all__ = ["PanelMember", "TestFormPanel", "dist_alpha", "default_panel"]

PANEL_VERSION = "1"


def bump(t):
    """Smooth bump: exp(1 - 1/(1 - t^2)) on |t| < 1, zero outside."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    ti = t[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - ti * ti))
    return out


@dataclass(frozen=True)
class PanelMember:
    """One test amplitude: bump((x-c)/s) modulating a polynomial or kink."""

    kind: str          # "poly" | "kink"
    center: tuple      # complex center per axis
    scale: float
    degree: int = 0    # poly: Re/Im((z-c)/s)^degree; 0 means the plain bump
    phase: float = 0.0  # kink direction / Re-Im selector for poly (0 or 1)
    alpha: float = 1.0  # kink exponent (only used by "kink")

    def values(self, pts, k: int) -> np.ndarray:
        if k == 1:
            z = np.asarray(pts, dtype=complex)
            u = (z - self.center[0]) / self.scale
            r = np.abs(u)
        else:
            z, w = pts
            uz = (np.asarray(z, dtype=complex) - self.center[0]) / self.scale
            uw = (np.asarray(w, dtype=complex) - self.center[1]) / self.scale
            r = np.sqrt(np.abs(uz) ** 2 + np.abs(uw) ** 2)
            u = uz + 0 * uw
        b = bump(r)
        if self.kind == "poly":
            if self.degree == 0:
                return b
            mono = u ** self.degree
            part = mono.real if self.phase == 0.0 else mono.imag
            return b * part
        # kink: |Re(e^{i phase} u)|^alpha, C^alpha for alpha < 1
        lin = (np.exp(1j * self.phase) * u).real
        return b * np.abs(lin) ** self.alpha


def _holder_quotient(vals: np.ndarray, h: float, beta: float) -> float:
    """max over dyadic lags of |f(x+L) - f(x)| / L^beta along the axes."""
    best = 0.0
    n = min(vals.shape)
    lag = 1
    while lag < n // 2:
        for axis in range(vals.ndim):
            sl_hi = [slice(None)] * vals.ndim
            sl_lo = [slice(None)] * vals.ndim
            sl_hi[axis] = slice(lag, None)
            sl_lo[axis] = slice(None, -lag)
            diff = np.max(np.abs(vals[tuple(sl_hi)] - vals[tuple(sl_lo)]))
            best = max(best, float(diff) / (lag * h) ** beta)
        lag *= 2
    return best


def _grad_sup(vals: np.ndarray, h: float) -> float:
    total = np.zeros_like(vals)
    for axis in range(vals.ndim):
        g = np.abs(np.gradient(vals, h, axis=axis))
        total += g
    return float(np.max(total))


def _estimate_norm(member: PanelMember, k: int, alpha: float) -> float:
    """Numerical C^alpha norm on a fine grid over the member's support.

    Uses the max over the ladder {min(alpha,0.5), 1, 2} cut at alpha so the
    estimate is monotone in alpha, which makes dist_beta <= dist_alpha for
    alpha < beta hold memberwise.
    """
    n = 256 if k == 1 else 20
    lim = 1.05 * member.scale
    t = np.linspace(-lim, lim, n)
    h = t[1] - t[0]
    if k == 1:
        pts = (member.center[0] + t[:, None] + 1j * t[None, :])
        vals = member.values(pts, 1)
    else:
        z = member.center[0] + t[:, None, None, None] + 1j * t[None, :, None, None]
        w = member.center[1] + t[None, None, :, None] + 1j * t[None, None, None, :]
        vals = member.values((z, w), 2)
    sup = float(np.max(np.abs(vals)))
    norm = sup
    ladder = [x for x in (0.5, 1.0, 2.0) if x <= alpha + 1e-12] or [alpha]
    candidates = []
    for tau in ladder:
        val = sup
        if tau <= 1.0 - 1e-12 or (tau < 2.0 and tau != 1.0):
            val += _holder_quotient(vals, h, min(tau, 1.0))
        if tau >= 1.0:
            val += _grad_sup(vals, h)
        if tau >= 2.0:
            grad = np.gradient(vals, h, axis=0)
            val += _grad_sup(np.asarray(grad), h)
        candidates.append(val)
    if alpha not in (0.5, 1.0, 2.0) and alpha < 1.0:
        candidates.append(sup + _holder_quotient(vals, h, alpha))
    return max(float(c) for c in candidates)


class TestFormPanel:
    """A fixed family of C^alpha-normalized test amplitudes."""

    __test__ = False  # not a pytest class

    def __init__(self, k: int, alpha: float, members, norms):
        self.k = k
        self.alpha = float(alpha)
        self.members = tuple(members)
        self.norms = np.asarray(norms, dtype=float)
        self.version = PANEL_VERSION
        self._value_cache = {}

    @classmethod
    def build(cls, k: int, alpha: float, n_centers: int = None,
              scales=(0.5, 1.0, 2.0)) -> "TestFormPanel":
        """Bump-modulated polynomial members at 3 scales on a center lattice,
        plus kink members when alpha < 1."""
        if n_centers is None:
            n_centers = 4 if k == 1 else 2
        if k == 1:
            lattice = [0j, 0.9 + 0j, -0.45 + 0.8j, -0.45 - 0.8j][:n_centers]
            centers = [(c,) for c in lattice]
        else:
            lattice = [(0j, 0j), (0.7 + 0j, 0j), (0j, 0.7j), (-0.5j, 0.5 + 0j)]
            centers = lattice[:n_centers]
        members = []
        for c in centers:
            for s in scales:
                members.append(PanelMember("poly", c, s, 0))
                for deg in (1, 2):
                    members.append(PanelMember("poly", c, s, deg, 0.0))
                    members.append(PanelMember("poly", c, s, deg, 1.0))
        if alpha < 1.0:
            for c in centers:
                for s in scales[:2]:
                    for phase in (0.0, np.pi / 2):
                        members.append(PanelMember("kink", c, s, 0, phase, alpha))
        norms = [_estimate_norm(m, k, alpha) for m in members]
        return cls(k, alpha, members, norms)

    def signature(self) -> tuple:
        return (self.version, self.k, self.alpha, len(self.members))

    def member_values(self, grid) -> np.ndarray:
        """Member values on a grid's nodes, cached per grid geometry."""
        key = (grid.k, grid.center, grid.radius, grid.resolution, grid.chart)
        if key not in self._value_cache:
            pts = grid.points()
            vals = np.stack([
                np.broadcast_to(m.values(pts, self.k), grid.shape).astype(
                    np.float32)
                for m in self.members])
            if len(self._value_cache) > 2:
                self._value_cache.clear()
            self._value_cache[key] = vals
        return self._value_cache[key]

    def pairings(self, measure: GridMeasure) -> np.ndarray:
        """<measure, member_j / ||member_j||> for every panel member."""
        vals = self.member_values(measure.grid)
        out = np.tensordot(vals, measure.density,
                           axes=(tuple(range(1, vals.ndim)),
                                 tuple(range(measure.density.ndim))))
        out = out * measure.grid.cell_volume
        for p, w in measure.atoms:
            chart = p.to_chart(measure.grid.chart)
            if np.any(np.isinf(chart)):
                continue  # members are compactly supported in the chart
            pts = np.array([chart[0]]) if self.k == 1 else \
                (np.array([chart[0]]), np.array([chart[1]]))
            out += w * np.array([np.atleast_1d(m.values(pts, self.k))[0]
                                 for m in self.members])
        return out / self.norms


@functools.lru_cache(maxsize=16)
def default_panel(k: int, alpha: float) -> TestFormPanel:
    return TestFormPanel.build(k, alpha)


def _as_measure(obj) -> GridMeasure:
    if isinstance(obj, GridMeasure):
        return obj
    if isinstance(obj, Current11):
        return trace_measure(obj)
    raise TypeError(f"cannot pair {type(obj)}")


def dist_alpha(R, Rp, alpha: float, panel: TestFormPanel = None) -> float:
    """Panel pseudo-metric: max pairing gap over normalized test forms.

    A lower bound of the true dual-norm distance; symmetric, zero on equal
    inputs, and satisfies the triangle inequality exactly as computed.
    """
    if isinstance(R, Current11) != isinstance(Rp, Current11) and not (
            isinstance(R, GridMeasure) or isinstance(Rp, GridMeasure)):
        raise TypeError("incompatible kinds")
    mu = _as_measure(R)
    nu = _as_measure(Rp)
    if mu.k != nu.k:
        raise TypeError("incompatible kinds: different ambient dimensions")
    if panel is None:
        panel = default_panel(mu.k, alpha)
    if abs(panel.alpha - alpha) > 1e-12 or panel.k != mu.k:
        raise ValueError("panel was built for different (k, alpha)")
    return float(np.max(np.abs(panel.pairings(mu) - panel.pairings(nu))))
