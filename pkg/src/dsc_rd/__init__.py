"""Rate-distortion limits for multi-hop distributed coding of vector Gaussian sources."""

from .coding_scheme import SchemeSpec, achieved_distortion, achieved_rate, design_scheme
from .config import dump_config, load_config, parse_config
from .errors import (
    ConfigError,
    DscError,
    InfeasibleDistortionError,
    ModelError,
    MonteCarloMismatch,
    SingularMatrixError,
)
from .gauss_core import (
    JointGaussian,
    Ordering,
    as_covariance,
    assemble_joint,
    condition,
    conditional_mi,
    loewner_cmp,
    regress,
)
from .network import BASE, NetworkSpec, NodeSpec, evaluate, sweep, topo_order
from .rate_distortion import (
    RdContext,
    Validity,
    appendix_c_matrix,
    baseline_rate_no_side,
    build_context,
    classify,
    distortion_family,
    rd_rate,
)
from .suff_stat import (
    BackwardChannel,
    LinearObservation,
    backward_channel,
    fuse,
    node_statistic,
    verify_sufficiency,
)

__version__ = "0.1.0"


def fixture_path(name: str):
    """Path of a configuration shipped with the package (``setup_s1.json``, ``chain3.json``)."""
    from importlib.resources import files
    return files(__package__) / "fixtures" / name
