"""Image-method multipath tracer for a ground transmitter and an airborne receiver.

Facades are vertical and the ground is horizontal, so the horizontal layout
of a facade reflection sequence is a 2-D image problem while heights unfold
linearly along the path.  A ground bounce does not change the horizontal
geometry; it only mirrors the receiver height, and its position in the
interaction chain follows from where the unfolded path crosses z = 0.

:class:`Tracer` precomputes, for one transmitter, the 2-D beams (image point
plus the lit aperture on the last facade) for every facade sequence up to
the configured order.  Per receiver, a beam contributes a candidate path
iff the receiver lies inside its wedge; candidates are then checked for
facade height extents and for occlusion by buildings and ships.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

from .errors import GeometryError, ModelValidityError
from .scene import MaterialKind, Scene, is_perfect_conductor, material_permittivity

DIPOLE_PEAK_GAIN = 1.64
_EPS = 1e-9
_DIFFRACTION_PHASE = -math.pi / 4


class InteractionKind(Enum):
    LINE_OF_SIGHT = "los"
    GROUND_REFLECTION = "ground"
    FACADE_REFLECTION = "facade"
    ROOFTOP_DIFFRACTION = "diffraction"
    FOLIAGE_PENETRATION = "foliage"


@dataclass(frozen=True)
class Interaction:
    kind: InteractionKind
    surface: str
    point: tuple[float, float, float] | None = None


@dataclass(frozen=True)
class PathComponent:
    """One multipath arrival.

    ``amplitude`` is the linear voltage gain relative to the 1 m free-space
    reference, ``phase`` is in (-pi, pi] and ``delay`` in seconds.
    """

    amplitude: float
    phase: float
    delay: float
    interactions: tuple[Interaction, ...]
    frequency: float

    @property
    def chain(self) -> str:
        primary = [i.kind.value for i in self.interactions
                   if i.kind is not InteractionKind.FOLIAGE_PENETRATION]
        text = "-".join(primary)
        if any(i.kind is InteractionKind.FOLIAGE_PENETRATION for i in self.interactions):
            text += "+foliage"
        return text

    @property
    def gain_db(self) -> float:
        return 20.0 * math.log10(self.amplitude) if self.amplitude > 0 else -math.inf

    @property
    def is_los(self) -> bool:
        return self.interactions[0].kind is InteractionKind.LINE_OF_SIGHT

    @property
    def phasor(self) -> complex:
        return self.amplitude * complex(math.cos(self.phase), math.sin(self.phase))


@dataclass(frozen=True)
class TraceConfig:
    max_order: int = 2
    diffraction: bool = True
    dynamic_range_db: float = 30.0
    polarization: str = "vertical"

    def __post_init__(self):
        if not 0 <= self.max_order <= 3:
            raise ValueError("max_order must be in [0, 3]")
        if not 10.0 <= self.dynamic_range_db <= 60.0:
            raise ValueError("dynamic_range_db must be in [10, 60]")
        if self.polarization != "vertical":
            raise ValueError("only vertical polarization is modelled")


# -- elementary models -------------------------------------------------------

def _fresnel(eta, sin_psi, horizontal):
    sin_psi = np.asarray(sin_psi, dtype=float)
    eta = np.asarray(eta, dtype=complex)
    pec = np.isinf(eta.imag)
    eta = np.where(pec, 1.0 + 0j, eta)
    root = np.sqrt(eta - (1.0 - sin_psi**2))
    num_v = eta * sin_psi - root
    den_v = eta * sin_psi + root
    num_h = sin_psi - root
    den_h = sin_psi + root
    with np.errstate(invalid="ignore"):
        gamma = np.where(horizontal, num_h / den_h, num_v / den_v)
    return np.where(pec, np.where(horizontal, -1.0 + 0j, 1.0 + 0j), gamma)


def fresnel_reflection(eta: complex, grazing_angle, polarization: str = "vertical"):
    """Fresnel reflection coefficient at a smooth boundary.

    ``polarization="vertical"`` is the E-field-in-plane-of-incidence case
    (-> -1 at grazing, +1 for a perfect conductor); ``"horizontal"`` is the
    E-field-parallel-to-surface case (-1 for a perfect conductor).
    ``grazing_angle`` may be an array; the result then has its shape.
    """
    psi = np.asarray(grazing_angle, dtype=float)
    if np.any(~(psi > 0.0)) or np.any(psi > math.pi / 2 + 1e-12):
        raise ValueError("grazing angle must be in (0, pi/2]")
    if polarization not in ("vertical", "horizontal"):
        raise ValueError(f"unknown polarization {polarization!r}")
    gamma = _fresnel(eta, np.sin(psi), polarization == "horizontal")
    return complex(gamma) if gamma.ndim == 0 else gamma


def knife_edge_loss(nu):
    """Single knife-edge diffraction loss in dB (ITU-R P.526 approximation)."""
    nu = np.asarray(nu, dtype=float)
    if not np.all(np.isfinite(nu)):
        raise ValueError("Fresnel-Kirchhoff parameter must be finite")
    x = nu - 0.1
    loss = 6.9 + 20.0 * np.log10(np.sqrt(x * x + 1.0) + x)
    out = np.where(nu <= -0.78, 0.0, loss)
    return float(out) if out.ndim == 0 else out


def dipole_gain(theta):
    """Half-wave dipole power gain at ``theta`` radians from the element axis."""
    theta = np.asarray(theta, dtype=float)
    if np.any((theta < -1e-12) | (theta > math.pi + 1e-12)):
        raise ValueError("angle from axis must be in [0, pi]")
    s = np.sin(theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = DIPOLE_PEAK_GAIN * (np.cos(0.5 * math.pi * np.cos(theta)) / s) ** 2
    g = np.where(np.abs(s) < 1e-12, 0.0, g)
    return float(g) if g.ndim == 0 else g


def foliage_loss(depth, f_c):
    """Weissberger excess loss in dB for ``depth`` metres of foliage."""
    depth = np.asarray(depth, dtype=float)
    if np.any(depth < 0):
        raise ValueError("foliage depth must be non-negative")
    if np.any(depth > 400.0):
        raise ModelValidityError("Weissberger model is limited to 400 m of foliage")
    k = (f_c / 1e9) ** 0.284
    with np.errstate(divide="ignore", invalid="ignore"):
        loss = np.where(depth <= 14.0, 0.45 * k * depth, 1.33 * k * np.abs(depth) ** 0.588)
    loss = np.where(depth == 0, 0.0, loss)
    return float(loss) if loss.ndim == 0 else loss


# -- box geometry ------------------------------------------------------------

def _slab(p, q, lo, hi):
    """Entry/exit parameters of segments p->q against boxes, shape (M, B)."""
    p = p[:, None, :]
    d = (q[:, None, :] - p)
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (lo[None] - p) / d
        t2 = (hi[None] - p) / d
    tmin = np.minimum(t1, t2)
    tmax = np.maximum(t1, t2)
    par = d == 0
    inside = (p > lo[None]) & (p < hi[None])
    tmin = np.where(par, np.where(inside, -np.inf, np.inf), tmin)
    tmax = np.where(par, np.where(inside, np.inf, -np.inf), tmax)
    return np.maximum(tmin.max(axis=-1), 0.0), np.minimum(tmax.min(axis=-1), 1.0)


def _overlap_lengths(p, q, lo, hi):
    if len(lo) == 0 or len(p) == 0:
        return np.zeros((len(p), len(lo)))
    t0, t1 = _slab(p, q, lo, hi)
    seg_len = np.linalg.norm(q - p, axis=1)
    return np.clip(t1 - t0, 0.0, None) * seg_len[:, None]


def _blocked(p, q, lo, hi):
    return (_overlap_lengths(p, q, lo, hi) > 1e-6).any(axis=1)


class _Faces:
    """Vertical facades of all opaque boxes as flat arrays."""

    def __init__(self, scene: Scene):
        boxes = scene.obstacles
        nb = len(scene.buildings)
        rows = []
        for i, b in enumerate(boxes):
            name = f"building{i}" if i < nb else f"ship{i - nb}"
            rows += [(0, b.x0, -1.0, b.y0, b.y1, b.height, i, f"{name}.xmin"),
                     (0, b.x1, 1.0, b.y0, b.y1, b.height, i, f"{name}.xmax"),
                     (1, b.y0, -1.0, b.x0, b.x1, b.height, i, f"{name}.ymin"),
                     (1, b.y1, 1.0, b.x0, b.x1, b.height, i, f"{name}.ymax")]
        self.names = [r[7] for r in rows]
        self.box_names = [f"building{i}" if i < nb else f"ship{i - nb}" for i in range(len(boxes))]
        self.materials = [boxes[r[6]].material for r in rows]
        arr = np.array([r[:7] for r in rows], dtype=float).reshape(-1, 7)
        self.axis = arr[:, 0].astype(int)
        self.coord = arr[:, 1]
        self.sign = arr[:, 2]
        self.u0 = arr[:, 3]
        self.u1 = arr[:, 4]
        self.height = arr[:, 5]
        self.box = arr[:, 6].astype(int)
        n = len(rows)
        e0 = np.empty((n, 2))
        e1 = np.empty((n, 2))
        ax = self.axis
        e0[np.arange(n), ax] = self.coord
        e1[np.arange(n), ax] = self.coord
        e0[np.arange(n), 1 - ax] = self.u0
        e1[np.arange(n), 1 - ax] = self.u1
        self.e0, self.e1 = e0, e1
        self.lo = np.array([[b.x0, b.y0, 0.0] for b in boxes]).reshape(-1, 3)
        self.hi = np.array([[b.x1, b.y1, b.height] for b in boxes]).reshape(-1, 3)

    def __len__(self):
        return len(self.axis)

    def side(self, p2, f):
        """Signed distance of 2-D points to faces, positive on the outward side."""
        return (_component(p2, self.axis[f]) - self.coord[f]) * self.sign[f]

    def mirror(self, p2, f):
        out = np.array(p2, dtype=float, copy=True)
        ax = self.axis[f]
        idx = np.arange(len(out))
        out[idx, ax] = 2.0 * self.coord[f] - out[idx, ax]
        return out


def _component(p2, axis):
    axis = np.asarray(axis)
    if p2.ndim == 1:
        return p2[axis]
    return np.take_along_axis(p2, np.broadcast_to(axis, p2.shape[:-1])[..., None], axis=-1)[..., 0]


def _cross(u, v):
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


@dataclass
class _Beams:
    face: np.ndarray
    parent: np.ndarray
    image: np.ndarray
    a: np.ndarray
    b: np.ndarray


@dataclass
class RayPaths:
    """Frequency-independent geometry of all paths found for one receiver."""

    length: np.ndarray
    tx_theta: np.ndarray
    rx_theta: np.ndarray
    foliage_depth: np.ndarray
    diffraction_nu: np.ndarray          # nu * sqrt(lambda); nan when not diffracted
    refl_path: np.ndarray
    refl_material: list
    refl_horizontal: np.ndarray
    refl_sin_psi: np.ndarray
    interactions: list
    points: list
    los_blocked: bool

    def __len__(self):
        return len(self.length)


class Tracer:
    """Multipath finder bound to one scene and transmitter position.

    Construction precomputes the transmitter's facade beams; afterwards
    :meth:`trace` can be called for any number of receiver positions and
    carrier frequencies.  Instances hold no mutable state after ``__init__``.
    """

    def __init__(self, scene: Scene, tx, cfg: TraceConfig | None = None):
        self.scene = scene
        self.cfg = cfg or TraceConfig()
        self.faces = _Faces(scene)
        self.tx = self._check_point(tx, "transmitter")
        self.fol_lo = np.array([[f.x0, f.y0, f.z0] for f in scene.foliage]).reshape(-1, 3)
        self.fol_hi = np.array([[f.x1, f.y1, f.z1] for f in scene.foliage]).reshape(-1, 3)
        self.beams = self._build_beams(self.cfg.max_order)

    # -- validation -----------------------------------------------------------

    def _check_point(self, p, label):
        p = np.asarray(p, dtype=float).reshape(3)
        if not np.all(np.isfinite(p)):
            raise ValueError(f"{label} position must be finite")
        if not self.scene.contains(p):
            raise ValueError(f"{label} lies outside the terrain")
        if p[2] <= 0.0:
            raise ValueError(f"{label} must be above ground")
        fc = self.faces
        if len(fc):
            inside = np.all((p > fc.lo + _EPS) & (p < fc.hi - _EPS), axis=1)
            if inside.any():
                name = fc.box_names[int(np.argmax(inside))]
                raise GeometryError(f"{label} lies inside {name}", surface=name)
            dist = np.abs(_component(np.broadcast_to(p[:2], (len(fc), 2)), fc.axis) - fc.coord)
            u = np.where(fc.axis == 0, p[1], p[0])
            on = (dist < _EPS) & (u >= fc.u0 - _EPS) & (u <= fc.u1 + _EPS) & (p[2] <= fc.height + _EPS)
            if on.any():
                name = fc.names[int(np.argmax(on))]
                raise GeometryError(f"{label} lies on facade {name}", surface=name)
        return p

    # -- beam precomputation --------------------------------------------------

    def _build_beams(self, order):
        fc = self.faces
        levels = []
        if order == 0 or len(fc) == 0:
            return levels
        tx2 = self.tx[:2]
        idx = np.nonzero(fc.side(np.broadcast_to(tx2, (len(fc), 2)), np.arange(len(fc))) > _EPS)[0]
        img = fc.mirror(np.broadcast_to(tx2, (len(idx), 2)), idx)
        levels.append(_Beams(idx, np.full(len(idx), -1), img, fc.e0[idx], fc.e1[idx]))
        for _ in range(1, order):
            prev = levels[-1]
            parts = [self._extend(prev, lo, min(lo + 256, len(prev.face)))
                     for lo in range(0, len(prev.face), 256)]
            if not parts:
                break
            levels.append(_Beams(*(np.concatenate([p[k] for p in parts]) for k in range(5))))
        return levels

    def _extend(self, prev, lo, hi):
        fc = self.faces
        nf = len(fc)
        I = prev.image[lo:hi, None, :]
        a = prev.a[lo:hi, None, :]
        b = prev.b[lo:hi, None, :]
        fp = prev.face[lo:hi, None]
        g = np.arange(nf)[None, :]
        front = fc.side(np.broadcast_to(I, (hi - lo, nf, 2)), np.broadcast_to(g, (hi - lo, nf))) > _EPS
        ok = front & (g != fp)
        e0 = fc.e0[None]
        de = (fc.e1 - fc.e0)[None]
        o = np.sign(_cross(a - I, b - I))
        # half-planes alpha + beta*t >= 0 on the candidate facade segment
        ax_p = fc.axis[fp]
        s_p = fc.sign[fp]
        c_p = fc.coord[fp]
        alpha1 = (_component(np.broadcast_to(e0, (hi - lo, nf, 2)), ax_p) - c_p) * s_p
        beta1 = _component(np.broadcast_to(de, (hi - lo, nf, 2)), ax_p) * s_p
        alpha2 = o * _cross(a - I, e0 - I)
        beta2 = o * _cross(a - I, de)
        alpha3 = o * _cross(e0 - I, b - I)
        beta3 = o * _cross(de, b - I)
        t0 = np.zeros(ok.shape)
        t1 = np.ones(ok.shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            for alpha, beta in ((alpha1, beta1), (alpha2, beta2), (alpha3, beta3)):
                root = -alpha / beta
                t0 = np.where(beta > 0, np.maximum(t0, root), t0)
                t1 = np.where(beta < 0, np.minimum(t1, root), t1)
                ok &= (beta != 0) | (alpha >= 0)
        ok &= (t1 - t0) > 1e-9
        bi, gi = np.nonzero(ok)
        t0, t1 = t0[bi, gi], t1[bi, gi]
        seg0, segd = fc.e0[gi], fc.e1[gi] - fc.e0[gi]
        img = fc.mirror(prev.image[lo + bi], gi)
        return (gi, lo + bi, img, seg0 + t0[:, None] * segd, seg0 + t1[:, None] * segd)

    # -- per-receiver search ----------------------------------------------------

    def find_paths(self, rx) -> RayPaths:
        """Geometry of every unoccluded path to ``rx`` (before any cut)."""
        rx = self._check_point(rx, "receiver")
        tx = self.tx
        if np.allclose(rx, tx, atol=_EPS):
            raise ValueError("transmitter and receiver coincide")
        fc = self.faces
        if self.beams:
            lvl = self.beams[0]
            hit = np.linalg.norm(lvl.image - rx[:2], axis=1) < _EPS
            hit &= abs(rx[2] - tx[2]) < _EPS
            if hit.any():
                name = fc.names[lvl.face[int(np.argmax(hit))]]
                raise GeometryError(f"receiver coincides with the image across {name}", surface=name)

        groups = []  # (points (n, m, 3), chain kinds (n, m-2), surface ids (n, m-2))
        los = np.stack([tx, rx])[None]
        los_blocked = bool(_blocked(los[:, 0], los[:, 1], fc.lo, fc.hi)[0])
        if not los_blocked:
            groups.append((los, np.zeros((1, 0), dtype=int), np.zeros((1, 0), dtype=int)))
        if self.cfg.max_order >= 1:
            groups.append(self._candidates(np.zeros((1, 0), dtype=int), np.zeros((1, 0, 2)), rx, True))
        for k, lvl in enumerate(self.beams, start=1):
            inside = self._in_beam(lvl, rx)
            cand = np.nonzero(inside)[0]
            if len(cand) == 0:
                continue
            faces_seq, pts2 = self._backtrack(k, cand, rx)
            groups.append(self._candidates(faces_seq, pts2, rx, False))
            if k + 1 <= self.cfg.max_order:
                groups.append(self._candidates(faces_seq, pts2, rx, True))

        collected = []
        for pts, kinds, surf in groups:
            if len(pts) == 0:
                continue
            p = pts[:, :-1].reshape(-1, 3)
            q = pts[:, 1:].reshape(-1, 3)
            nseg = pts.shape[1] - 1
            if kinds.shape[1] > 0:
                blocked = _blocked(p, q, fc.lo, fc.hi).reshape(-1, nseg).any(axis=1)
            else:
                blocked = np.zeros(len(pts), dtype=bool)
            keep = ~blocked
            if keep.any():
                collected.append((pts[keep], kinds[keep], surf[keep]))

        if los_blocked and self.cfg.diffraction:
            diff = self._diffraction(rx)
        else:
            diff = None
        return self._assemble(collected, diff, los_blocked)

    def _in_beam(self, lvl, rx):
        fc = self.faces
        rx2 = rx[:2]
        front = fc.side(np.broadcast_to(rx2, (len(lvl.face), 2)), lvl.face) > _EPS
        I, a, b = lvl.image, lvl.a, lvl.b
        o = np.sign(_cross(a - I, b - I))
        w1 = o * _cross(a - I, rx2 - I) >= -_EPS
        w2 = o * _cross(rx2 - I, b - I) >= -_EPS
        return front & w1 & w2

    def _backtrack(self, k, cand, rx):
        fc = self.faces
        n = len(cand)
        faces_seq = np.empty((n, k), dtype=int)
        pts2 = np.empty((n, k, 2))
        ok = np.ones(n, dtype=bool)
        nxt = np.broadcast_to(rx[:2], (n, 2)).copy()
        cur = cand
        rows = np.arange(n)
        for j in range(k, 0, -1):
            lvl = self.beams[j - 1]
            f = lvl.face[cur]
            I = lvl.image[cur]
            ax = fc.axis[f]
            nx = nxt[rows, ax]
            with np.errstate(divide="ignore", invalid="ignore"):
                t = (fc.coord[f] - nx) / (I[rows, ax] - nx)
            p = nxt + t[:, None] * (I - nxt)
            u = p[rows, 1 - ax]
            ok &= (t > _EPS) & (t < 1 - _EPS) & (u >= fc.u0[f] - 1e-7) & (u <= fc.u1[f] + 1e-7)
            p[rows, ax] = fc.coord[f]
            faces_seq[:, j - 1] = f
            pts2[:, j - 1] = p
            nxt = p
            cur = lvl.parent[cur]
        return faces_seq[ok], pts2[ok]

    def _candidates(self, faces_seq, pts2, rx, ground):
        """3-D paths for facade sequences, optionally with one ground bounce.

        Returns points (n, m, 3) from tx to rx plus per-interaction kind codes
        (1 facade, 2 ground) and surface indices (facade index, -1 ground).
        """
        fc = self.faces
        tx = self.tx
        n, k = faces_seq.shape
        if n == 0:
            return np.zeros((0, k + 2, 3)), np.zeros((0, k), int), np.zeros((0, k), int)
        poly = np.concatenate([np.broadcast_to(tx[:2], (n, 1, 2)), pts2,
                               np.broadcast_to(rx[:2], (n, 1, 2))], axis=1)
        seg = np.linalg.norm(np.diff(poly, axis=1), axis=2)
        s = np.concatenate([np.zeros((n, 1)), np.cumsum(seg, axis=1)], axis=1)
        total = s[:, -1]
        z_end = -rx[2] if ground else rx[2]
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(total[:, None] > 0, s / total[:, None], 0.0)
        z = np.abs(tx[2] + (z_end - tx[2]) * frac)
        zf = z[:, 1:-1]
        ok = np.all((zf > 1e-6) & (zf <= fc.height[faces_seq] + 1e-9), axis=1)
        pts = np.concatenate([poly, z[..., None]], axis=2)
        kinds = np.ones((n, k), dtype=int)
        surf = faces_seq.copy()
        if ground:
            s_g = total * tx[2] / (tx[2] + rx[2])
            ok &= np.all(np.abs(s[:, 1:-1] - s_g[:, None]) > 1e-6, axis=1)
            m = np.clip(np.sum(s[:, 1:-1] < s_g[:, None], axis=1), 0, k)
            rows = np.arange(n)
            s_lo, s_hi = s[rows, m], s[rows, m + 1]
            with np.errstate(divide="ignore", invalid="ignore"):
                w = np.where(s_hi > s_lo, (s_g - s_lo) / (s_hi - s_lo), 0.0)
            g_xy = poly[rows, m] + w[:, None] * (poly[rows, m + 1] - poly[rows, m])
            g_pt = np.concatenate([g_xy, np.zeros((n, 1))], axis=1)
            # insert the ground point after the first m facade interactions
            j = np.arange(k + 1)[None, :]
            is_g = j == m[:, None]
            if k:
                src = np.clip(np.where(j < m[:, None], j, j - 1), 0, k - 1)
                facade_pts = np.take_along_axis(pts[:, 1:-1], src[..., None], axis=1)
                facade_ids = np.take_along_axis(faces_seq, src, axis=1)
            else:
                facade_pts = np.zeros((n, 1, 3))
                facade_ids = np.zeros((n, 1), dtype=int)
            interior = np.where(is_g[..., None], g_pt[:, None, :], facade_pts)
            new = np.concatenate([pts[:, :1], interior, pts[:, -1:]], axis=1)
            new_kinds = np.where(is_g, 2, 1)
            new_surf = np.where(is_g, -1, facade_ids)
            pts, kinds, surf = new, new_kinds, new_surf
        return pts[ok], kinds[ok], surf[ok]

    def _diffraction(self, rx):
        fc = self.faces
        tx = self.tx
        p = tx[None]
        q = rx[None]
        lo2, hi2 = fc.lo.copy(), fc.hi.copy()
        lo2[:, 2], hi2[:, 2] = -np.inf, np.inf
        blocking = _overlap_lengths(p, q, fc.lo, fc.hi)[0] > 1e-6
        if not blocking.any():
            return None
        t_in, t_out = _slab(p, q, lo2[blocking], hi2[blocking])
        t_in, t_out = t_in[0], t_out[0]
        heights = fc.hi[blocking, 2]
        z_in = tx[2] + t_in * (rx[2] - tx[2])
        z_out = tx[2] + t_out * (rx[2] - tx[2])
        t_star = np.where(heights - z_in >= heights - z_out, t_in, t_out)
        excess = heights - (tx[2] + t_star * (rx[2] - tx[2]))
        d = np.linalg.norm(rx - tx)
        d1, d2 = t_star * d, (1.0 - t_star) * d
        with np.errstate(divide="ignore", invalid="ignore"):
            nu_geom = excess * np.sqrt(2.0 * (d1 + d2) / (d1 * d2))
        nu_geom = np.where(np.isfinite(nu_geom), nu_geom, -np.inf)
        best = int(np.argmax(nu_geom))
        edge = tx + t_star[best] * (rx - tx)
        edge[2] = heights[best]
        box = int(np.nonzero(blocking)[0][best])
        return np.stack([tx, edge, rx]), float(nu_geom[best]), fc.box_names[box]

    def _assemble(self, collected, diff, los_blocked):
        fc = self.faces
        lengths, tx_th, rx_th, fol = [], [], [], []
        nus = []
        refl_path, refl_mat, refl_h, refl_sin = [], [], [], []
        interactions, points = [], []

        def add(pts, chain, refl, nu):
            idx = len(lengths)
            d = np.diff(pts, axis=0)
            seglen = np.linalg.norm(d, axis=1)
            lengths.append(seglen.sum())
            tx_th.append(math.acos(max(-1.0, min(1.0, d[0, 2] / seglen[0]))))
            rx_th.append(math.acos(max(-1.0, min(1.0, d[-1, 2] / seglen[-1]))))
            depth = _overlap_lengths(pts[:-1], pts[1:], self.fol_lo, self.fol_hi)
            per_block = depth.sum(axis=0)
            fol.append(per_block.sum())
            extra = []
            for j in np.nonzero(per_block > 0)[0]:
                extra.append(Interaction(InteractionKind.FOLIAGE_PENETRATION, f"foliage{j}"))
            nus.append(nu)
            for j, (material, horizontal, axis) in enumerate(refl):
                inc = d[j]
                comp = abs(inc[2]) if axis == 2 else abs(inc[axis])
                refl_path.append(idx)
                refl_mat.append(material)
                refl_h.append(horizontal)
                refl_sin.append(comp / seglen[j])
            interactions.append(tuple(chain) + tuple(extra))
            points.append(pts)

        for pts_g, kinds_g, surf_g in collected:
            for pts, kinds, surf in zip(pts_g, kinds_g, surf_g):
                if len(kinds) == 0:
                    add(pts, [Interaction(InteractionKind.LINE_OF_SIGHT, "direct")], [], math.nan)
                    continue
                chain, refl = [], []
                for j, (kind, sidx) in enumerate(zip(kinds, surf)):
                    pt = tuple(float(v) for v in pts[j + 1])
                    if kind == 2:
                        chain.append(Interaction(InteractionKind.GROUND_REFLECTION, "ground", pt))
                        refl.append((self.scene.ground, False, 2))
                    else:
                        chain.append(Interaction(InteractionKind.FACADE_REFLECTION, fc.names[sidx], pt))
                        refl.append((fc.materials[sidx], True, int(fc.axis[sidx])))
                add(pts, chain, refl, math.nan)
        if diff is not None:
            pts, nu_geom, name = diff
            edge = tuple(float(v) for v in pts[1])
            add(pts, [Interaction(InteractionKind.ROOFTOP_DIFFRACTION, name, edge)], [], nu_geom)

        return RayPaths(
            length=np.array(lengths, dtype=float),
            tx_theta=np.array(tx_th, dtype=float),
            rx_theta=np.array(rx_th, dtype=float),
            foliage_depth=np.array(fol, dtype=float),
            diffraction_nu=np.array(nus, dtype=float),
            refl_path=np.array(refl_path, dtype=int),
            refl_material=refl_mat,
            refl_horizontal=np.array(refl_h, dtype=bool),
            refl_sin_psi=np.array(refl_sin, dtype=float),
            interactions=interactions,
            points=points,
            los_blocked=los_blocked,
        )

    # -- gains ---------------------------------------------------------------------

    def components(self, paths: RayPaths, f_c: float) -> list[PathComponent]:
        """Complex gains of traced geometry at carrier ``f_c``, cut and delay-sorted."""
        if len(paths) == 0:
            return []
        lam = SPEED_OF_LIGHT / f_c
        n = len(paths)
        log_gamma = np.zeros(n)
        arg_gamma = np.zeros(n)
        if len(paths.refl_path):
            etas = {kind: material_permittivity(kind, f_c) for kind in set(paths.refl_material)}
            eta = np.array([etas[m] for m in paths.refl_material])
            gamma = _fresnel(eta, paths.refl_sin_psi, paths.refl_horizontal)
            with np.errstate(divide="ignore"):
                log_gamma = np.bincount(paths.refl_path, np.log(np.abs(gamma)), minlength=n)
            arg_gamma = np.bincount(paths.refl_path, np.angle(gamma), minlength=n)
        gt = dipole_gain(np.clip(paths.tx_theta, 0.0, math.pi))
        gr = dipole_gain(np.clip(paths.rx_theta, 0.0, math.pi))
        loss_db = foliage_loss(paths.foliage_depth, f_c)
        diffracted = np.isfinite(paths.diffraction_nu)
        if diffracted.any():
            nu = np.where(diffracted, paths.diffraction_nu / math.sqrt(lam), -10.0)
            loss_db = loss_db + knife_edge_loss(nu)
        amp = (lam / (4.0 * math.pi * paths.length)) * np.sqrt(gt * gr) \
            * np.exp(log_gamma) * 10.0 ** (-loss_db / 20.0)
        phase = -2.0 * math.pi * paths.length / lam + arg_gamma + np.where(diffracted, _DIFFRACTION_PHASE, 0.0)
        phase = np.angle(np.exp(1j * phase))
        phase = np.where(phase <= -math.pi, math.pi, phase)
        delay = paths.length / SPEED_OF_LIGHT

        power = amp**2
        keep = power >= power.max() * 10.0 ** (-self.cfg.dynamic_range_db / 10.0)
        keep &= power > 0
        order = np.argsort(delay, kind="stable")
        return [PathComponent(float(amp[i]), float(phase[i]), float(delay[i]),
                              paths.interactions[i], float(f_c))
                for i in order if keep[i]]

    def trace(self, rx, f_c: float) -> list[PathComponent]:
        return self.components(self.find_paths(rx), f_c)


def trace(scene: Scene, tx, rx, f_c: float, cfg: TraceConfig | None = None) -> list[PathComponent]:
    """All multipath components between ``tx`` and ``rx`` at carrier ``f_c``."""
    return Tracer(scene, tx, cfg).trace(rx, f_c)


def format_paths(paths) -> str:
    """Per-point path dump, one ``path <idx> kind=...`` line per component."""
    lines = []
    for i, p in enumerate(paths):
        lines.append(f"path {i} kind={p.chain} delay_ns={p.delay * 1e9:.6g} "
                     f"gain_db={p.gain_db:.6g} phase_rad={p.phase:.6g}")
    return "\n".join(lines) + ("\n" if lines else "")
