"""Instance builders: sensor-network localization and the catalog of worked examples.

Sensor localization
-------------------
Given distances d_ij between sensors u_i in R^d, the least-squares objective

    P(u) = sum_(i,j) 1/2 (||u_i - u_j||^2 - d_ij^2)^2

fits the quartic class directly when no anchor sits away from the origin.
Each term is (4/2) (x'C x / 2 - d_ij^2 / 2)^2 with C = [I -I; -I I] on the
blocks of i and j (or C = I on the block of i when j is an anchor at 0),
so beta = 4 and theta = d_ij^2 / 2.

An anchor a != 0 brings a cubic term ||u||^2 a'u into the expansion, which
no instance of the class can express.  Such networks are homogenized with
one extra coordinate s: anchor terms use ||u_i - s a||^2, a quadratic form
in (u, s) with a PSD matrix, and s is pinned at 1 by

    h(s) = w exp(s^2/4 - 1/4) + w s^2/2 - 3 w s/2,

which is strictly convex with h(1) = h'(1) = 0.  Hence the built
objective equals P(u) exactly at (u, 1), and its global minimizers are
(u*, 1) for every global minimizer u* of P.  The pin is one exponential
term (B = e_s e_s' / 2, alpha = 1/4 - ln w) plus A_ss = w and f_s = 3w/2.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .perturbation import PerturbationSchedule
from .problem import ExpTerm, ProblemInstance, QuarticTerm, instance_from_arrays

SENSOR_BETA = 4.0


class NetworkError(ValueError):
    pass


@dataclass(frozen=True)
class SensorNetwork:
    dim: int
    sensors: int
    anchors: tuple[tuple[int, tuple[float, ...]], ...]
    distances: tuple[tuple[int, int, float], ...]

    def __post_init__(self):
        anchors = tuple((int(k), tuple(float(c) for c in pos)) for k, pos in self.anchors)
        distances = tuple((int(i), int(j), float(d)) for i, j, d in self.distances)
        object.__setattr__(self, "anchors", anchors)
        object.__setattr__(self, "distances", distances)
        if self.dim < 1 or self.sensors < 1:
            raise NetworkError("dim and sensors must be positive")
        seen = set()
        for k, pos in anchors:
            if not 0 <= k < self.sensors:
                raise NetworkError(f"anchor index {k} out of range")
            if k in seen:
                raise NetworkError(f"anchor {k} listed twice")
            if len(pos) != self.dim:
                raise NetworkError(f"anchor {k} has {len(pos)} coordinates, expected {self.dim}")
            seen.add(k)
        pairs = set()
        for i, j, d in distances:
            if not (0 <= i < j < self.sensors):
                raise NetworkError(f"distance ({i}, {j}) needs 0 <= i < j < sensors")
            if not d > 0:
                raise NetworkError(f"distance ({i}, {j}) must be positive")
            if (i, j) in pairs:
                raise NetworkError(f"duplicate distance ({i}, {j})")
            pairs.add((i, j))

    @property
    def anchor_positions(self) -> dict[int, np.ndarray]:
        return {k: np.array(pos) for k, pos in self.anchors}

    @property
    def unknowns(self) -> list[int]:
        fixed = {k for k, _ in self.anchors}
        return [k for k in range(self.sensors) if k not in fixed]

    @property
    def needs_lift(self) -> bool:
        return any(np.any(np.array(pos) != 0) for _, pos in self.anchors)

    def objective(self, positions) -> float:
        """Least-squares misfit for a full (sensors x dim) position array."""
        U = np.asarray(positions, dtype=float).reshape(self.sensors, self.dim)
        total = 0.0
        for i, j, d in self.distances:
            r = U[i] - U[j]
            total += 0.5 * (r @ r - d * d) ** 2
        return float(total)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "sensors": self.sensors,
            "anchors": [{"index": k, "pos": list(pos)} for k, pos in self.anchors],
            "distances": [{"i": i, "j": j, "d": d} for i, j, d in self.distances],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SensorNetwork":
        try:
            return cls(
                dim=int(doc["dim"]),
                sensors=int(doc["sensors"]),
                anchors=tuple((a["index"], a["pos"]) for a in doc.get("anchors", [])),
                distances=tuple((e["i"], e["j"], e["d"]) for e in doc["distances"]),
            )
        except (KeyError, TypeError) as exc:
            raise NetworkError(f"malformed network: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "SensorNetwork":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise NetworkError(f"invalid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise NetworkError("network document must be a JSON object")
        return cls.from_dict(doc)


def build_sensor_instance(net: SensorNetwork, pin_weight: float = 1.0) -> ProblemInstance:
    """Reduce a sensor network to an instance whose objective equals the misfit."""
    if not net.distances:
        raise NetworkError("network has no distances")
    anchors = net.anchor_positions
    for i, j, _ in net.distances:
        if i in anchors and j in anchors:
            raise NetworkError(f"distance ({i}, {j}) joins two anchors: constant term")
    d = net.dim
    slot = {k: r for r, k in enumerate(net.unknowns)}
    lift = net.needs_lift
    n = d * len(slot) + (1 if lift else 0)
    s_col = n - 1

    def difference_map(i, j):
        # Row block R with R x = u_i - u_j (anchors substituted, scaled by s when lifted).
        R = np.zeros((d, n))
        for k, sign in ((i, 1.0), (j, -1.0)):
            if k in slot:
                R[:, d * slot[k]: d * slot[k] + d] += sign * np.eye(d)
            elif lift:
                R[:, s_col] += sign * anchors[k]
        return R

    quartic = []
    for i, j, dist in net.distances:
        R = difference_map(i, j)
        quartic.append(QuarticTerm(R.T @ R, SENSOR_BETA, 0.5 * dist * dist))
    A = np.zeros((n, n))
    f = np.zeros(n)
    exp_terms = ()
    if lift:
        w = float(pin_weight)
        if not w > 0:
            raise ValueError("pin_weight must be positive")
        B = np.zeros((n, n))
        B[s_col, s_col] = 0.5
        exp_terms = (ExpTerm(B, 0.25 - np.log(w)),)
        A[s_col, s_col] = w
        f[s_col] = 1.5 * w
    return ProblemInstance(A=A, exp_terms=exp_terms, quartic_terms=tuple(quartic), f=f,
                           name="sensor-network")


def embed_positions(net: SensorNetwork, positions) -> np.ndarray:
    """Instance coordinates for a full (sensors x dim) layout; anchors rows are ignored."""
    U = np.asarray(positions, dtype=float).reshape(net.sensors, net.dim)
    x = U[net.unknowns].ravel()
    return np.append(x, 1.0) if net.needs_lift else x


def extract_positions(net: SensorNetwork, x) -> np.ndarray:
    """Full (sensors x dim) layout from instance coordinates, anchors filled in."""
    x = np.asarray(x, dtype=float)
    U = np.zeros((net.sensors, net.dim))
    for k, pos in net.anchor_positions.items():
        U[k] = pos
    body = x[:-1] if net.needs_lift else x
    U[net.unknowns] = body.reshape(-1, net.dim)
    return U


# -- catalog ------------------------------------------------------------

@dataclass(frozen=True)
class ExpectedPair:
    sigma_bar: tuple[float, ...]
    x_bar: tuple[float, ...]
    verdict: str
    note: str = ""


@dataclass(frozen=True)
class CatalogEntry:
    id: str
    instance: ProblemInstance
    expected: tuple[ExpectedPair, ...]
    extras: dict = field(default_factory=dict)


def _ex1():
    inst = instance_from_arrays(np.diag([1.0, -1.0]), [np.diag([1.0, 2.0])], [1.0],
                                [np.eye(2)], [1.0], [1.0], [1.0, 1.0], name="ex1")
    exp = (ExpectedPair((1.171057661103504, -0.34599084656216),
                        (0.54792514555217, 1.003890602479819), "GlobalMin",
                        "unique critical point with G positive definite"),)
    return inst, exp, {"critical_count_plus": 1}


def _ex2():
    inst = instance_from_arrays(np.diag([1.0, -16.0]), [np.eye(2)], [1.0],
                                [np.diag([1.0, 2.0])], [1.0], [50.0], [-25.0, 9.0], name="ex2")
    exp = (
        ExpectedPair((96.61711963278241, -38.94928057661689),
                     (-0.42612784793499, 3.310578038951848), "GlobalMin", "global minimizer"),
        ExpectedPair((0.42157060067968, -49.86072154366873),
                     (0.51611144112381, -0.078057328303129), "LocalMaxPair", "local maximizer"),
    )
    return inst, exp, {}


def _ex3():
    inst = instance_from_arrays(np.diag([-16.0, -4.0]), [np.diag([1.0, 0.0])], [2.0],
                                [np.diag([0.0, 1.0])], [1.0], [2.0], [2.0, 2.0], name="ex3")
    exp = (
        ExpectedPair((16.64468576727409, 4.552474610531074),
                     (3.102286573591542, 3.620075858467906), "GlobalMin", "global minimizer"),
        ExpectedPair((0.13641513779858, -1.943380912562619),
                     (-0.12607490787063, -0.33650880356205), "LocalMaxPair", "local maximizer"),
        ExpectedPair((15.34981976568548, 3.390906302031545),
                     (-3.076070133243102, -3.283567054905852), "LocalMinPair", "local minimizer"),
    )
    # stated_critical_count is the expected count on record; the separable dual has 3 x 3 roots.
    return inst, exp, {"stated_critical_count": 6, "critical_count": 9}


def _ex4():
    inst = instance_from_arrays(np.zeros((2, 2)), [np.diag([1.0, 0.0])], [2.0],
                                [np.diag([0.0, 1.0])], [1.0], [2.0], [0.0, 0.0], name="ex4")
    extras = {
        "boundary_point": (float(np.exp(-2.0)), 0.0),
        "global_minimizers": ((0.0, -2.0), (0.0, 2.0)),
        "global_min_value": float(np.exp(-2.0)),
        # (0,0) is stationary with Hessian diag(e^-2, -2): a saddle.
        "saddle_points": ((0.0, 0.0),),
        "homotopy_limit": (0.0, 2.0),
        "homotopy_n_sigma_limit": 5.0,
        "homotopy_E": ((16.0, 0.0), (0.0, 4.0)),
        "homotopy_e": (2.0, 2.0),
        "homotopy_n": tuple(float(2**k) for k in range(5, 17)),
    }
    return inst, (), extras


_CATALOG = {"ex1": _ex1, "ex2": _ex2, "ex3": _ex3, "ex4": _ex4}
CATALOG_IDS = tuple(_CATALOG)


def example_catalog(id: str) -> CatalogEntry:
    try:
        build = _CATALOG[id]
    except KeyError:
        raise KeyError(f"unknown example id {id!r}; choose from {', '.join(CATALOG_IDS)}") from None
    inst, expected, extras = build()
    return CatalogEntry(id, inst, expected, extras)


def ex4_schedule():
    """The vanishing-shift schedule used with the degenerate example."""
    extras = example_catalog("ex4").extras
    return PerturbationSchedule("instance_homotopy", extras["homotopy_n"],
                                np.array(extras["homotopy_E"]), np.array(extras["homotopy_e"]))
