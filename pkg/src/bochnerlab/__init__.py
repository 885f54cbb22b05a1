"""Numerical laboratory for Bochner-type identities of nested level-set slicings.

Modules:

* :mod:`~bochnerlab.jetcalc` -- truncated Taylor jets through order three
* :mod:`~bochnerlab.fields` -- metric and function specifications, random scenes
* :mod:`~bochnerlab.curvature` -- Riemann, Ricci and scalar curvature at a point
* :mod:`~bochnerlab.slicing` -- nested level sets, the Z cascade, induced geometry
* :mod:`~bochnerlab.identities` -- two-sided residuals of the slicing identities
* :mod:`~bochnerlab.spinor3` -- flat 3-d spinors, Dirac currents
* :mod:`~bochnerlab.stern` -- harmonic maps to the circle on a 3-torus
* :mod:`~bochnerlab.cli` -- ``bochner-lab verify``
"""

from .errors import *  # noqa: F401,F403
from .fields import MetricField, MetricKind, Normalization, SlicingScene, make_scene
from .identities import IdentityName, IdentityReport
from .jetcalc import Jet, jet_eval
from .slicing import enforce_pointwise_divfree, slicing

__version__ = "0.1.0"
