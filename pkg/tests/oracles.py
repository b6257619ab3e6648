"""Independent reference implementations used only by the tests.

Each one is deliberately naive (pure Python loops, plain quadrature) and
shares no code path with the production modules it checks.
"""

import math


def brute_dbscan(points, eps, min_pts):
    """Textbook O(n^2) DBSCAN with the same border tie-break as production.

    Core expansion visits seeds in ascending index order; each border point is
    then handed to the cluster of its lowest-index core neighbour.
    """
    n = len(points)

    def dist(i, j):
        return math.sqrt(sum((points[i][k] - points[j][k]) ** 2 for k in range(3)))

    region = [[j for j in range(n) if dist(i, j) <= eps] for i in range(n)]
    is_core = [len(region[i]) >= min_pts for i in range(n)]
    labels = [None] * n
    c = 0
    for i in range(n):
        if not is_core[i] or labels[i] is not None:
            continue
        labels[i] = c
        stack = [i]
        while stack:
            p = stack.pop()
            for q in region[p]:
                if is_core[q] and labels[q] is None:
                    labels[q] = c
                    stack.append(q)
        c += 1
    for i in range(n):
        if is_core[i]:
            continue
        core_nb = [j for j in region[i] if is_core[j]]
        if core_nb:
            labels[i] = labels[min(core_nb)]
    clusters = [sorted(j for j in range(n) if labels[j] == k) for k in range(c)]
    noise = [j for j in range(n) if labels[j] is None]
    return clusters, noise, is_core


def canonical(clusters):
    """Label-free form of a clustering: a set of frozensets."""
    return {frozenset(c) for c in clusters}


def fine_reading(sensor, band, qe_lo, qe_hi, exposure, step=0.01):
    """Composite Simpson integral of R*T*QE over center +/- 5 FWHM.

    The QE line is evaluated from its two anchors directly, clipped to [0, 1].
    """
    half = 5.0 * band.fwhm
    a, b = band.center - half, band.center + half
    n = int(round((b - a) / step))
    if n % 2:
        n += 1
    h = (b - a) / n
    c4 = 4.0 * math.log(2.0)
    slope = (qe_hi[1] - qe_lo[1]) / (qe_hi[0] - qe_lo[0])

    def f(lam):
        r = sensor.baseline + sensor.peak_amplitude * math.exp(-c4 * (lam - sensor.peak_wavelength) ** 2 / sensor.peak_fwhm**2)
        t = band.transmission_peak * math.exp(-c4 * (lam - band.center) ** 2 / band.fwhm**2)
        q = min(1.0, max(0.0, qe_lo[1] + slope * (lam - qe_lo[0])))
        return r * t * q

    total = f(a) + f(b)
    for k in range(1, n):
        total += (4 if k % 2 else 2) * f(a + k * h)
    return exposure * total * h / 3.0


def angle_deg(u, v):
    """Angle via atan2(|u x v|, u.v), accurate down to ~1e-16 rad."""
    cx = u[1] * v[2] - u[2] * v[1]
    cy = u[2] * v[0] - u[0] * v[2]
    cz = u[0] * v[1] - u[1] * v[0]
    dot = sum(a * b for a, b in zip(u, v))
    return math.degrees(math.atan2(math.sqrt(cx * cx + cy * cy + cz * cz), dot))
