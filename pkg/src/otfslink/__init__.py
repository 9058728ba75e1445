"""Link-level simulator for delay-Doppler spread signaling over OFDM.

The package models a coded QPSK link through a doubly selective channel
and measures BER versus Eb/N0.  Data can be spread across the whole
time-frequency frame through a unitary two-dimensional transform or sent
per-bin (the plain OFDM baseline).  Detection runs an iterative loop of
soft interference cancellation and BCJR decoding, implemented
equivalently in the time-frequency and the delay-Doppler domain.
"""

from .channel import (
    PathSet,
    SystemGeometry,
    apply_windows,
    evaluate_tf_response,
    sample_paths,
    write_paths_csv,
)
from .coding import (
    CodingChain,
    Constellation,
    bcjr_decode,
    conv_encode,
    deinterleave,
    interleave,
    make_interleaver,
    map_symbols,
    qpsk,
    soft_symbols,
)
from .detector import (
    DetectorResult,
    EffectiveSpreading,
    ml_symbol_detect,
    mmse_equalize,
    mmse_symbol_statistics,
    pic_residual_dd,
    pic_residual_tf,
    pic_symbol_statistics,
    run_detector,
)
from .errors import ConfigurationError
from .grids import (
    DDChannelOperator,
    build_dd_channel_operator,
    build_spreading_matrix,
    despread,
    dsft,
    idsft,
    spread,
)
from .simulate import (
    BerRecord,
    SimConfig,
    noise_variance_from_ebn0,
    read_ber_csv,
    records_from_points,
    run_frame,
    sweep,
    write_ber_csv,
)

__version__ = "0.1.0"

__all__ = [
    "BerRecord",
    "CodingChain",
    "ConfigurationError",
    "Constellation",
    "DDChannelOperator",
    "DetectorResult",
    "EffectiveSpreading",
    "PathSet",
    "SimConfig",
    "SystemGeometry",
    "apply_windows",
    "bcjr_decode",
    "build_dd_channel_operator",
    "build_spreading_matrix",
    "conv_encode",
    "deinterleave",
    "despread",
    "dsft",
    "evaluate_tf_response",
    "idsft",
    "interleave",
    "make_interleaver",
    "map_symbols",
    "ml_symbol_detect",
    "mmse_equalize",
    "mmse_symbol_statistics",
    "noise_variance_from_ebn0",
    "pic_residual_dd",
    "pic_residual_tf",
    "pic_symbol_statistics",
    "qpsk",
    "read_ber_csv",
    "records_from_points",
    "run_detector",
    "run_frame",
    "sample_paths",
    "soft_symbols",
    "spread",
    "sweep",
    "write_ber_csv",
    "write_paths_csv",
]
