from __future__ import annotations

import numpy as np

from ..errors import NonFiniteObjective


def estimate_gradient(fn, s, h: float, bounds=None, batched: bool = False) -> np.ndarray:
    """Central finite-difference gradient using exactly ``2 * dim`` evaluations of ``fn``.

    With ``bounds=(lo, hi)`` the probes are clipped into the box and each
    difference is divided by the actual probe spacing, so a coordinate on the
    boundary gets a one-sided estimate. ``batched=True`` means ``fn`` maps an
    ``(n, dim)`` array to ``n`` values and is called once on all probes.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    s = np.asarray(s, float)
    d = s.size
    eye = np.eye(d) * h
    plus, minus = s + eye, s - eye
    if bounds is not None:
        plus = np.clip(plus, *bounds)
        minus = np.clip(minus, *bounds)
    probes = np.concatenate([plus, minus])
    if batched:
        vals = np.asarray(fn(probes), float).reshape(2 * d)
    else:
        vals = np.array([fn(p) for p in probes], float)
    bad = np.flatnonzero(~np.isfinite(vals))
    if bad.size:
        raise NonFiniteObjective(int(bad[0] % d))
    spacing = np.diagonal(plus - minus)
    return (vals[:d] - vals[d:]) / spacing
