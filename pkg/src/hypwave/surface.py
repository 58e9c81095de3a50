"""The Bolza surface: side-pairing group, ball enumeration, domain reduction.

The genus-2 Bolza surface is the quotient of the disk by the Fuchsian group
generated by eight side pairings of the regular octagon centered at the
origin.  Generator k (k = 0..7) is the hyperbolic translation with

    a = 1 + sqrt(2),   b = sqrt(2 + 2 sqrt(2)) * exp(i k pi / 4),

and g_{k+4} = g_k^{-1}.  The octagon relation g0 g1^-1 g2 g3^-1 g0^-1 g1
g2^-1 g3 = I holds (as the word (0, 5, 2, 7, 4, 1, 6, 3)).  All translates
of the origin at the first shell sit at distance 2 arccosh(1 + sqrt(2)),
which is the systole; half of it is the injectivity radius.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .geometry import DiskPoint, MobiusMap, hyp_distance_z

__all__ = [
    "BOLZA_RELATION_WORD",
    "SYSTOLE",
    "INJECTIVITY_RADIUS",
    "VOLUME",
    "bolza_generators",
    "default_group",
    "SurfaceConfig",
    "FuchsianGroup",
    "GroupBall",
    "LiftSet",
]

_DEFAULT_GROUP = None


def default_group():
    """Shared Bolza group instance (keeps one ball cache per process)."""
    global _DEFAULT_GROUP
    if _DEFAULT_GROUP is None:
        _DEFAULT_GROUP = FuchsianGroup()
    return _DEFAULT_GROUP

_SQRT2 = math.sqrt(2.0)
BOLZA_A = 1.0 + _SQRT2
BOLZA_B_ABS = math.sqrt(2.0 + 2.0 * _SQRT2)
BOLZA_RELATION_WORD = (0, 5, 2, 7, 4, 1, 6, 3)

SYSTOLE = 2.0 * math.acosh(1.0 + _SQRT2)
INJECTIVITY_RADIUS = SYSTOLE / 2.0
VOLUME = 4.0 * math.pi
# octagon vertices: euclidean radius 2^(-1/4), between the face directions
_VERTEX_R = 2.0 ** -0.25
DOMAIN_VERTICES = tuple(
    DiskPoint(
        _VERTEX_R * math.cos(math.pi / 8 + k * math.pi / 4),
        _VERTEX_R * math.sin(math.pi / 8 + k * math.pi / 4),
    )
    for k in range(8)
)


def bolza_generators():
    return [
        MobiusMap(complex(BOLZA_A, 0.0), BOLZA_B_ABS * np.exp(1j * k * math.pi / 4.0))
        for k in range(8)
    ]


@dataclass(frozen=True)
class SurfaceConfig:
    """Frozen geometric constants of the quotient surface."""

    injectivity_radius: float = INJECTIVITY_RADIUS
    volume: float = VOLUME
    domain_vertices: tuple = DOMAIN_VERTICES


@dataclass(frozen=True)
class LiftSet:
    """Lifts of a surface point relevant to propagation up to a time horizon.

    elements holds (group element, lifted point) pairs ordered by word length
    then lexicographic word.  The parallel arrays carry the same data in a
    form the propagation kernels consume directly.
    """

    elements: tuple
    time_horizon: float
    words: tuple = ()
    ga: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))
    gb: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))
    z_lift: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))

    def __len__(self):
        return len(self.elements)


class GroupBall:
    """All group elements with displacement of the origin <= radius."""

    def __init__(self, ga, gb, words, disp, radius):
        self.ga = ga
        self.gb = gb
        self.words = words
        self.disp = disp
        self.radius = radius

    def __len__(self):
        return len(self.words)

    def centers(self):
        """Orbit of the origin, one point per element."""
        return self.gb / np.conj(self.ga)

    def maps(self):
        return [MobiusMap(complex(a), complex(b)) for a, b in zip(self.ga, self.gb)]


class FuchsianGroup:
    """Side-pairing group with ball enumeration and Dirichlet reduction."""

    MAX_BALL_RADIUS = 18.0

    def __init__(self, generators=None):
        self.generators = list(generators) if generators is not None else bolza_generators()
        self.gen_a = np.array([g.a for g in self.generators])
        self.gen_b = np.array([g.b for g in self.generators])
        self._ball_cache = {}
        defect = self.relation_defect()
        if defect > 1e-9:
            raise ValueError(f"octagon relation fails: defect {defect:.3e}")
        for g in self.generators:
            if abs(g.b) < 1e-12 and not g.is_identity():
                raise ValueError("generator fixes the origin")

    def relation_defect(self):
        m = MobiusMap.identity()
        for k in BOLZA_RELATION_WORD:
            m = m @ self.generators[k]
        return min(abs(m.a - 1.0) + abs(m.b), abs(m.a + 1.0) + abs(m.b))

    # --- ball enumeration ---------------------------------------------------

    def group_ball(self, radius, max_elements=2_000_000):
        """Complete duplicate-free list of elements with displacement <= radius.

        BFS over generator products.  Any element of displacement <= R is
        reachable through a chain of strictly decreasing displacements
        (greedy Dirichlet descent run backwards), so expanding every
        discovered element of displacement <= R misses nothing.
        """
        if radius > self.MAX_BALL_RADIUS:
            raise ValueError(f"ball radius {radius} exceeds cap {self.MAX_BALL_RADIUS}")
        key = round(float(radius), 12)
        if key in self._ball_cache:
            return self._ball_cache[key]

        seen = {}
        A = [1.0 + 0.0j]
        B = [0.0j]
        words = [()]
        seen[self._norm_key(1.0 + 0.0j, 0.0j)] = 0
        frontier = (np.array(A), np.array(B), [()])
        while frontier[0].size:
            fa, fb, fwords = frontier
            # children of the whole frontier, generator-major ordering per parent
            ca = fa[:, None] * self.gen_a[None, :] + fb[:, None] * np.conj(self.gen_b)[None, :]
            cb = fa[:, None] * self.gen_b[None, :] + fb[:, None] * np.conj(self.gen_a)[None, :]
            ca = ca.ravel()
            cb = cb.ravel()
            disp = np.arccosh(np.maximum(np.abs(ca) ** 2 + np.abs(cb) ** 2, 1.0))
            keep = disp <= radius + 1e-9
            na, nb, nwords = [], [], []
            ngen = len(self.generators)
            for idx in np.nonzero(keep)[0]:
                a, b = ca[idx], cb[idx]
                k = self._norm_key(a, b)
                if k in seen:
                    continue
                seen[k] = len(A)
                A.append(a)
                B.append(b)
                w = fwords[idx // ngen] + (int(idx % ngen),)
                words.append(w)
                na.append(a)
                nb.append(b)
                nwords.append(w)
                if len(A) > max_elements:
                    raise RuntimeError(
                        f"group ball exceeds memory guard of {max_elements} elements"
                    )
            frontier = (np.array(na), np.array(nb), nwords)

        ga = np.array(A)
        gb = np.array(B)
        disp = np.arccosh(np.maximum(np.abs(ga) ** 2 + np.abs(gb) ** 2, 1.0))
        ga, gb, words, disp = self._drop_duplicates(ga, gb, words, disp)
        order = np.lexsort((np.arange(len(words)), disp))
        ball = GroupBall(ga[order], gb[order], [words[i] for i in order], disp[order], radius)
        self._ball_cache[key] = ball
        return ball

    @staticmethod
    def _norm_key(a, b):
        vec = (a.real, a.imag, b.real, b.imag)
        for x in vec:
            if x > 1e-9:
                break
            if x < -1e-9:
                vec = tuple(-y for y in vec)
                break
        return tuple(round(x, 8) for x in vec)

    @staticmethod
    def _drop_duplicates(ga, gb, words, disp):
        """Remove rounding-boundary duplicates (same matrix up to sign)."""
        order = np.argsort(disp, kind="stable")
        drop = set()
        i = 0
        while i < len(order):
            j = i + 1
            shell = [order[i]]
            while j < len(order) and disp[order[j]] - disp[order[i]] < 1e-6:
                shell.append(order[j])
                j += 1
            for u in range(len(shell)):
                for v in range(u + 1, len(shell)):
                    p, q = shell[u], shell[v]
                    same = min(
                        abs(ga[p] - ga[q]) + abs(gb[p] - gb[q]),
                        abs(ga[p] + ga[q]) + abs(gb[p] + gb[q]),
                    )
                    if same < 1e-6:
                        drop.add(q if len(words[q]) >= len(words[p]) else p)
            i = j
        if not drop:
            return ga, gb, words, disp
        keep = np.array([i for i in range(len(words)) if i not in drop])
        return ga[keep], gb[keep], [words[i] for i in keep], disp[keep]

    # --- Dirichlet domain ---------------------------------------------------

    def neighbor_centers(self):
        return self.gen_b / np.conj(self.gen_a)

    def in_domain(self, z, tol=1e-12):
        """Dirichlet membership: no neighbor center closer than the origin."""
        z = np.asarray(z)
        d0 = hyp_distance_z(z, 0.0)
        dn = hyp_distance_z(z[..., None], self.neighbor_centers())
        return (dn.min(axis=-1) >= d0 - tol) if z.shape else bool(dn.min() >= d0 - tol)

    def reduce_batch(self, z, max_steps=200):
        return kernels.reduce_batch(z, self.gen_a, self.gen_b, max_steps=max_steps)

    def reduce(self, point, max_steps=200):
        """Reduce a point to the fundamental domain.

        Returns (representative, g) with representative = g(point).
        """
        z = point.z if isinstance(point, DiskPoint) else complex(point)
        zr, a, b = kernels.reduce_batch(z, self.gen_a, self.gen_b, max_steps=max_steps)
        return DiskPoint.from_z(complex(zr)), MobiusMap(complex(a), complex(b))
