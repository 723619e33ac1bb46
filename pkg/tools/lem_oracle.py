"""Vectorized method-of-slices reference calculations.

Used by the fixture-generation scripts in this directory to record golden
factor-of-safety values before the library solver existed. Everything here
is written directly against numpy arrays, with its own chord-finding,
weight-integration, and iteration code, so the recorded numbers check the
library instead of mirroring it.

Problems are plain problem-file dicts (the on-disk shape), not library
objects; this module imports nothing from the package.
"""

import numpy as np

GAMMA_W = 9.81


def interp_polyline(poly, x):
    """Piecewise-linear y at x; flat extension beyond the polyline ends."""
    xs = np.asarray([p[0] for p in poly], dtype=float)
    ys = np.asarray([p[1] for p in poly], dtype=float)
    return np.interp(x, xs, ys)


def circle_chord(surface, cx, cy, r):
    """x-extent of the slip mass: outermost circle/surface crossings.

    Only lower-half crossings (y <= cy) count. Raises ValueError when the
    circle does not cut the surface at two distinct points.
    """
    hits = []
    for (x0, y0), (x1, y1) in zip(surface, surface[1:]):
        dx, dy = x1 - x0, y1 - y0
        a = dx * dx + dy * dy
        if a == 0.0:
            continue
        fx, fy = x0 - cx, y0 - cy
        b = 2.0 * (fx * dx + fy * dy)
        c = fx * fx + fy * fy - r * r
        disc = b * b - 4.0 * a * c
        if disc < 0.0:
            continue
        root = float(np.sqrt(disc))
        for t in ((-b - root) / (2.0 * a), (-b + root) / (2.0 * a)):
            if -1e-12 <= t <= 1.0 + 1e-12:
                px = x0 + t * dx
                py = y0 + t * dy
                if py <= cy + 1e-12:
                    hits.append(px)
    hits.sort()
    dedup = []
    for x in hits:
        if not dedup or x - dedup[-1] > 1e-9:
            dedup.append(x)
    if len(dedup) < 2:
        raise ValueError("circle does not cross the surface twice")
    return dedup[0], dedup[-1]


def slice_table(problem, circle, n):
    """Per-slice arrays for one circle: W, alpha, b, l, u, c, phi (radians).

    W integrates each layer band over the slice column at the midpoint,
    switching to the saturated unit weight below the water table.
    u is vertical hydrostatics above the base midpoint.
    """
    surface = [tuple(p) for p in problem["geometry"]["surface"]]
    cx = float(circle["x"])
    cy = float(circle["y"])
    r = float(circle["radius"])
    xl, xr = circle_chord(surface, cx, cy, r)

    edges = np.linspace(xl, xr, n + 1)
    xm = 0.5 * (edges[:-1] + edges[1:])
    b = (xr - xl) / n
    yb = cy - np.sqrt(np.clip(r * r - (xm - cx) ** 2, 0.0, None))
    ys = interp_polyline(surface, xm)

    wt = problem.get("water_table")
    if wt is None:
        wy = np.full_like(xm, -1e30)
    else:
        wy = interp_polyline(wt, xm)

    layers = problem["layers"]
    W = np.zeros_like(xm)
    top = ys.copy()
    for L in layers:
        bot_el = L.get("bottom_elevation")
        band_bot = -1e30 if bot_el is None else float(bot_el)
        lo = np.maximum(yb, band_bot)
        thick = np.clip(top - lo, 0.0, None)
        wet = np.clip(np.minimum(top, wy) - lo, 0.0, None)
        dry = thick - wet
        gamma = float(L["unit_weight"])
        gsat = L.get("saturated_unit_weight")
        gsat = gamma if gsat is None else float(gsat)
        W += (dry * gamma + wet * gsat) * b
        top = np.maximum(np.minimum(top, band_bot), yb)

    if not np.any(W > 0.0):
        raise ValueError("every slice is empty")

    c_base = np.empty_like(xm)
    phi_base = np.empty_like(xm)
    assigned = np.zeros(xm.shape, dtype=bool)
    for L in layers[:-1]:
        mask = (~assigned) & (yb > float(L["bottom_elevation"]))
        c_base[mask] = float(L["cohesion"])
        phi_base[mask] = np.radians(float(L["friction_angle"]))
        assigned |= mask
    last = layers[-1]
    c_base[~assigned] = float(last["cohesion"])
    phi_base[~assigned] = np.radians(float(last["friction_angle"]))

    alpha = np.arcsin((xm - cx) / r)
    ell = b / np.cos(alpha)
    u = GAMMA_W * np.clip(wy - yb, 0.0, None)
    return {
        "W": W, "alpha": alpha, "b": b, "l": ell, "u": u,
        "c": c_base, "phi": phi_base, "chord": (xl, xr),
        "area": float(np.sum((ys - yb).clip(0.0) * b)),
    }


def fos_fellenius(t):
    den = float(np.sum(t["W"] * np.sin(t["alpha"])))
    if den <= 0.0:
        raise ValueError("no driving force")
    normal = t["W"] * np.cos(t["alpha"]) - t["u"] * t["l"]
    fric = np.clip(normal, 0.0, None) * np.tan(t["phi"])
    return float(np.sum(t["c"] * t["l"] + fric)) / den


def fos_bishop(t, tol=1e-12, max_iter=500):
    """Fixed point seeded from Fellenius; returns (fos, iterations, converged)."""
    den = float(np.sum(t["W"] * np.sin(t["alpha"])))
    if den <= 0.0:
        raise ValueError("no driving force")
    tension = (t["W"] * np.cos(t["alpha"]) - t["u"] * t["l"]) < 0.0
    fric = np.where(tension, 0.0, (t["W"] - t["u"] * t["b"]) * np.tan(t["phi"]))
    numer = t["c"] * t["b"] + fric
    fs = fos_fellenius(t)
    for i in range(1, max_iter + 1):
        m = np.cos(t["alpha"]) * (1.0 + np.tan(t["alpha"]) * np.tan(t["phi"]) / fs)
        new = float(np.sum(numer / m)) / den
        if abs(new - fs) < tol:
            return new, i, True
        fs = new
    return fs, max_iter, False
