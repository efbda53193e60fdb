"""Oriented adaptive Gauss-Kronrod quadrature with square-root endpoint maps."""

from __future__ import annotations

import logging
import math

from scipy import integrate

from .errors import NumericError

log = logging.getLogger(__name__)

EPSABS = 1e-13
EPSREL = 1e-12
LIMIT = 400

# QUADPACK codes treated as success; 2 means roundoff limited the estimate
_ACCEPT = (0, 2)


def integrate_oriented(f, a, b, epsabs=EPSABS, epsrel=EPSREL):
    """Return the oriented integral of ``f`` from ``a`` to ``b`` (negative when b < a)."""
    if a == b:
        return 0.0
    val, err, info, *rest = integrate.quad(
        f, min(a, b), max(a, b), epsabs=epsabs, epsrel=epsrel, limit=LIMIT, full_output=1
    )
    ier = 0 if not rest else _ier(rest[0])
    if not math.isfinite(val) or ier not in _ACCEPT:
        raise NumericError(
            "quadrature failed",
            interval=(a, b),
            value=val,
            abserr=err,
            neval=info.get("neval"),
            quad_message=rest[0] if rest else "",
        )
    if ier == 2:
        log.debug("roundoff-limited quadrature on [%g, %g]: %g +- %g", a, b, val, err)
    return val if b > a else -val


def _ier(message):
    # quad returns the message only on failure; map it back to the QUADPACK code
    text = str(message).lower()
    if "roundoff" in text:
        return 2
    if "maximum number of subdivisions" in text:
        return 1
    if "diverg" in text:
        return 5
    if "bad integrand" in text or "singular" in text:
        return 3
    return 4


def integrate_sqrt_start(f, a, b, **tol):
    """Integrate ``f`` over [a, b] (either orientation) with ``u = a + sign * v**2``.

    Removes an inverse square-root blow-up of ``f`` at ``a``.
    """
    if a == b:
        return 0.0
    sgn = 1.0 if b > a else -1.0
    vmax = math.sqrt(abs(b - a))
    return sgn * integrate_oriented(lambda v: 2.0 * v * f(a + sgn * v * v), 0.0, vmax, **tol)


def integrate_sqrt_ends(f, a, b, **tol):
    """Integrate over [a, b] splitting at the midpoint, square-root map at both ends."""
    if a == b:
        return 0.0
    m = 0.5 * (a + b)
    return integrate_sqrt_start(f, a, m, **tol) - integrate_sqrt_start(f, b, m, **tol)
