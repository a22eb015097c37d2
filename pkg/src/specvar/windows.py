"""Even test windows given by their Fourier transform on [-1, 1].

Only psi-hat ever enters a formula: sums over geodesics truncate where
psi_hat(ell/L) vanishes, and the Gaussian-ensemble variance constants are
integrals of t * psi_hat(t)^2.  The triangle window (Fejer kernel) has
analytic constants 1/3, 1/6, 1/12; the smooth bump is the standard
exp(-1/(1-t^2)) profile normalized to 1 at the origin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

KINDS = ("triangle", "smooth_bump")


@dataclass(frozen=True)
class Window:
    """Window defined through psi_hat, supported in [-1, 1].

    ``amplitude`` rescales psi_hat linearly; variance constants are then
    quadratic in it.  ``tolerance`` bounds the quadrature error of the
    variance constants.
    """

    kind: str
    amplitude: float = 1.0
    tolerance: float = 1e-10

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown window kind {self.kind!r}")

    def psi_hat(self, t):
        """Evaluate psi_hat, exactly zero outside (-1, 1)."""
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        inside = np.abs(t) < 1.0
        ti = t[inside]
        if self.kind == "triangle":
            out[inside] = 1.0 - np.abs(ti)
        else:
            out[inside] = np.exp(-ti * ti / (1.0 - ti * ti))
        if out.ndim == 0:
            return float(out) * self.amplitude
        return out * self.amplitude


def window(kind: str, amplitude: float = 1.0) -> Window:
    """Build a window; accepts ``bump`` as shorthand for ``smooth_bump``."""
    if kind == "bump":
        kind = "smooth_bump"
    return Window(kind=kind, amplitude=amplitude)


def sigma2_goe(w: Window) -> float:
    """GOE variance constant 4 * integral_0^1 t * psi_hat(t)^2 dt."""
    value, err = quad(
        lambda t: t * w.psi_hat(t) ** 2,
        0.0,
        1.0,
        epsabs=w.tolerance / 4,
        epsrel=w.tolerance,
        limit=200,
    )
    if err > w.tolerance:
        raise RuntimeError(f"quadrature error {err} above tolerance")
    return 4.0 * value


def sigma2_gue(w: Window) -> float:
    """Half the GOE constant: time-reversal symmetry is broken."""
    return sigma2_goe(w) / 2.0


def sigma2_gse(w: Window) -> float:
    """Quarter of the GOE constant (half of GUE)."""
    return sigma2_goe(w) / 4.0
