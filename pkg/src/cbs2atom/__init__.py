"""Coherent backscattering of intense laser light from a pair of distant atoms.

The package computes the elastic and inelastic spectra of the ladder
(background) and crossed (interference) double-scattering channels, and the
resulting spectral CBS enhancement factor, for two two-level atoms driven by
a strong monochromatic laser.  Three independent computational routes are
provided and cross-validated:

* closed-form expressions built from single-atom Green matrices
  (:mod:`cbs2atom.atom`, :mod:`cbs2atom.spectra`),
* a bichromatic pump-probe solver for a single driven atom
  (:mod:`cbs2atom.pumpprobe`),
* a brute-force integration of the coupled two-atom master equation
  (:mod:`cbs2atom.twoatom`, :mod:`cbs2atom.disorder`).
"""

from cbs2atom.atom import AtomDriveParams, BlochSystem

__all__ = [
    "AtomDriveParams",
    "BlochSystem",
]

__version__ = "0.1.0"
