"""Complex-safe wrappers around scipy's cumulative quadrature.

scipy.integrate.cumulative_simpson casts to real; propagator and resolvent
integrands are complex, so route the two parts separately.
"""

from __future__ import annotations

import numpy as np
import scipy.integrate


def cumulative_simpson(y, *, x=None, dx=1.0, axis=0, initial=0.0):
    y = np.asarray(y)
    kwargs = dict(axis=axis, initial=initial)
    if x is not None:
        kwargs["x"] = np.asarray(x)
    else:
        kwargs["dx"] = dx
    if np.iscomplexobj(y):
        re = scipy.integrate.cumulative_simpson(y.real, **kwargs)
        im = scipy.integrate.cumulative_simpson(y.imag, **kwargs)
        return re + 1j * im
    return scipy.integrate.cumulative_simpson(y, **kwargs)
