"""Completely positive maps into sesquilinear maps on Hilbert C*-modules over
finite-dimensional C*-algebras: positivity checks, Kolmogorov decompositions,
minimal (KSGNS-type) dilations and operator-valued measures."""

__version__ = "0.1.0"

from .algebra import AlgElement, CStarSignature, MatrixOverA
from .errors import *  # noqa: F401,F403
from .kolmogorov import Kernel, KolmogorovDecomposition, decompose, intertwiner, kernel_is_positive_definite
from .ksgns import (
    CPMapTable,
    Dilation,
    DilationReport,
    choi_gram,
    cp_witness,
    is_completely_positive,
    ksgns_dilate,
    naimark,
    verify_dilation,
)
from .measures import ComplexMeasure, FiniteMeasurableSpace, SesquiMeasure, dilate_measure, dominating_measure, density
from .modules import AdjointableMap, HilbertElement, HilbertModule, ModuleElement, ModuleMap, SesquiMap
from .numkernel import DEFAULT_TOL, TolerancePolicy, hermitian_eig, psd_factor
