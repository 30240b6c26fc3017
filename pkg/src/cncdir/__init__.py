"""Conditional non-central Dirichlet distributions on the unit simplex.

Densities, samplers, mixed moments, maximum-likelihood fitting and
likelihood-ratio tests for the conditional non-central Dirichlet (CNcDir)
law and its comparison family: Dirichlet, bivariate Kummer-Beta,
non-central Dirichlet and the Mixture Weight counting law.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CNcDirError,
    DomainError,
    EmptyAfterFilter,
    IterationCap,
    MassZero,
    NoConvergence,
    NonConvergence,
    ParseError,
    SingularInformation,
)
from .specfun import SeriesControl, SeriesResult  # noqa: E402
from .models import (  # noqa: E402
    CNcDirParams,
    DirParams,
    Kb2Params,
    NcChisqParams,
    NcDirParams,
    SimplexPoint,
    VertexLimit,
    cncdir_logpdf,
    dir_logpdf,
    kb2_logpdf,
    ncdir_logpdf,
)
from .mixture_weight import MwParams  # noqa: E402
from .inference import Dataset2D, FitOptions, ModelSpec, fit_ml, lr_battery, lr_test  # noqa: E402
