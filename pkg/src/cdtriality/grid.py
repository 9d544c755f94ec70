"""Objective landscapes on 2-D slices, as JSON grid dumps and static SVG contour plots."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dual import DualPoint, analyze_matrix, assemble_g, eval_dual, lower_bounds
from .problem import ProblemInstance, eval_primal

SVG_LEVELS = 10


class GridSpecError(ValueError):
    pass


def coordinate_names(instance: ProblemInstance, function: str) -> list[str]:
    if function == "primal":
        return [f"x{i + 1}" for i in range(instance.n)]
    if function == "dual":
        return ([f"tau{i + 1}" for i in range(instance.m)]
                + [f"sigma{j + 1}" for j in range(instance.p)])
    raise GridSpecError(f"function must be 'primal' or 'dual', got {function!r}")


@dataclass(frozen=True)
class Axis:
    index: int
    name: str
    lo: float
    hi: float


@dataclass
class GridDump:
    function: str
    axes: tuple[Axis, Axis]
    resolution: int
    fixed: dict[str, float]
    values: np.ndarray  # (res, res), rows follow the second axis
    mask: np.ndarray  # bool for primal grids; "plus" / "minus" / "outside" for dual grids

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        return tuple(np.linspace(a.lo, a.hi, self.resolution) for a in self.axes)

    def to_dict(self) -> dict:
        vals = [None if not np.isfinite(v) else float(v) for v in self.values.ravel()]
        return {
            "format_version": 1,
            "function": self.function,
            "axes": [{"index": a.index, "name": a.name, "lo": a.lo, "hi": a.hi} for a in self.axes],
            "resolution": self.resolution,
            "fixed": self.fixed,
            "values": vals,
            "mask": [m.item() if hasattr(m, "item") else m for m in self.mask.ravel()],
        }


def parse_range(text: str, names: list[str]) -> list[Axis]:
    """Parse ``"a:lo:hi,b:lo:hi"``; a name may be a coordinate name, 'x'/'y', or an index."""
    parts = [p for p in text.split(",") if p.strip()]
    if len(parts) != 2:
        raise GridSpecError("range needs exactly two 'name:lo:hi' entries")
    axes = []
    for slot, part in enumerate(parts):
        fields = part.strip().split(":")
        if len(fields) != 3:
            raise GridSpecError(f"bad range entry {part!r}")
        name, lo, hi = fields
        try:
            lo, hi = float(lo), float(hi)
        except ValueError as exc:
            raise GridSpecError(f"bad bounds in {part!r}") from exc
        if not lo < hi:
            raise GridSpecError(f"empty interval in {part!r}")
        axes.append((name.strip(), lo, hi, slot))
    resolved = []
    taken = set()
    for name, lo, hi, slot in axes:
        if name in names:
            idx = names.index(name)
        elif name.isdigit() and int(name) < len(names):
            idx = int(name)
        elif name in ("x", "y"):
            idx = None
        else:
            raise GridSpecError(f"unknown coordinate {name!r}; have {', '.join(names)}")
        resolved.append([idx, lo, hi, slot])
    for entry in resolved:
        if entry[0] is not None:
            taken.add(entry[0])
    free = [i for i in range(len(names)) if i not in taken]
    for entry in resolved:
        if entry[0] is None:
            if not free:
                raise GridSpecError("not enough coordinates for the grid axes")
            entry[0] = free.pop(0)
    if resolved[0][0] == resolved[1][0]:
        raise GridSpecError("the two axes must be different coordinates")
    return [Axis(i, names[i], lo, hi) for i, lo, hi, _ in resolved]


def parse_fix(items: list[str] | None, names: list[str]) -> dict[int, float]:
    fixed = {}
    for item in items or []:
        if "=" not in item:
            raise GridSpecError(f"--fix expects k=v, got {item!r}")
        key, val = item.split("=", 1)
        key = key.strip()
        if key in names:
            idx = names.index(key)
        elif key.isdigit() and int(key) < len(names):
            idx = int(key)
        else:
            raise GridSpecError(f"unknown coordinate {key!r}")
        fixed[idx] = float(val)
    return fixed


def evaluate_grid(instance: ProblemInstance, function: str, axes: list[Axis], resolution: int,
                  fixed: dict[int, float] | None = None) -> GridDump:
    """Evaluate the primal or dual function on a resolution x resolution slice."""
    names = coordinate_names(instance, function)
    if resolution < 2:
        raise GridSpecError("resolution must be at least 2")
    fixed = dict(fixed or {})
    free = [i for i in range(len(names)) if i not in (axes[0].index, axes[1].index)]
    missing = [names[i] for i in free if i not in fixed]
    if missing:
        target = "n = 2" if function == "primal" else "m + p = 2"
        raise GridSpecError(f"grid needs {target}; fix the other coordinates with --fix "
                            f"({', '.join(f'{k}=v' for k in missing)})")
    base = np.zeros(len(names))
    for i, v in fixed.items():
        base[i] = v
    xs = np.linspace(axes[0].lo, axes[0].hi, resolution)
    ys = np.linspace(axes[1].lo, axes[1].hi, resolution)
    values = np.full((resolution, resolution), np.nan)
    if function == "primal":
        mask = np.ones((resolution, resolution), dtype=bool)
        for r, y in enumerate(ys):
            for c, x in enumerate(xs):
                pt = base.copy()
                pt[axes[0].index], pt[axes[1].index] = x, y
                with np.errstate(over="ignore"):
                    values[r, c] = eval_primal(instance, pt)
    else:
        mask = np.full((resolution, resolution), "outside", dtype=object)
        lb = lower_bounds(instance)
        for r, y in enumerate(ys):
            for c, x in enumerate(xs):
                pt = base.copy()
                pt[axes[0].index], pt[axes[1].index] = x, y
                if np.any(pt < lb) or np.any(pt[: instance.m] <= 0):
                    continue
                s = DualPoint.from_vector(instance, pt)
                gm = analyze_matrix(assemble_g(instance, s), instance.f)
                region = {"S_plus": "plus", "S_minus": "minus"}.get(gm.dual_set)
                if region is None or not gm.col_space_ok:
                    continue
                mask[r, c] = region
                values[r, c] = eval_dual(instance, s, gm)
    return GridDump(function, (axes[0], axes[1]), resolution,
                    {names[i]: v for i, v in sorted(fixed.items())}, values, mask)


def contour_svg(dump: GridDump, levels: int = SVG_LEVELS, size: int = 480) -> str:
    """Static SVG 1.1 drawing of quantile-spaced contour lines of the finite grid values."""
    import contourpy

    z = np.ma.masked_invalid(dump.values)
    finite = dump.values[np.isfinite(dump.values)]
    xs, ys = dump.coords()
    ax, ay = dump.axes
    lines = []
    if finite.size:
        qs = np.quantile(finite, np.linspace(0.0, 1.0, levels + 2)[1:-1])
        gen = contourpy.contour_generator(xs, ys, z)
        for k, level in enumerate(np.unique(qs)):
            for seg in gen.lines(level):
                if len(seg) < 2:
                    continue
                px = (seg[:, 0] - ax.lo) / (ax.hi - ax.lo) * size
                py = size - (seg[:, 1] - ay.lo) / (ay.hi - ay.lo) * size
                pts = " ".join(f"{u:.2f},{v:.2f}" for u, v in zip(px, py))
                shade = int(40 + 180 * k / max(1, levels - 1))
                lines.append(f'  <polyline fill="none" stroke="rgb({shade},60,{220 - shade})" '
                             f'stroke-width="1" points="{pts}"/>')
    title = f"{dump.function} contours: {ax.name} in [{ax.lo:g}, {ax.hi:g}], {ay.name} in [{ay.lo:g}, {ay.hi:g}]"
    return "\n".join([
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f"  <title>{title}</title>",
        f'  <rect x="0" y="0" width="{size}" height="{size}" fill="white" stroke="black"/>',
        *lines,
        "</svg>",
        "",
    ])
