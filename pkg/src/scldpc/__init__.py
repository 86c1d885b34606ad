"""Density-evolution analysis and wave-triggering optimization of
tail-biting spatially coupled LDPC ensembles."""

__version__ = "0.1.0"

from .debec import DeResult, DeTrace, bp_threshold_uniform, de_step, decodes, map_threshold, run_de
from .debms import (
    BicmSearchResult,
    bicm_threshold,
    ebn0_db,
    optimize_bicm_interleaver,
    run_de_bms,
)
from .devo import DevoConfig
from .ensemble import (
    EnsembleParams,
    ErasureProfile,
    InterleavingPattern,
    ShorteningPattern,
    design_rate,
    effective_profile_interleaving,
    effective_profile_shortening,
    terminated_pattern,
)
from .errors import DegeneratePatternError, GridMismatchError, InfeasibleError, ScldpcError
from .finite import (
    BerPoint,
    CodeInstance,
    ber_sweep,
    decode_awgn_spa,
    decode_bec_bp,
    decode_bec_peeling,
    encode_zero_codeword,
    sample_code,
)
from .llr import (
    BicmChannelPair,
    LlrDensity,
    LlrGrid,
    ask4_bicm_densities,
    bawgn_density,
    bec_density,
    cn_combine,
    make_grid,
    vn_convolve,
)
from .parallel import (
    TwoBecPoint,
    UniformInterleaving,
    achievable_region,
    beta_from_uniform,
    frontier_mu1,
    is_achievable,
)
from .queueing import QueueTrace, minimize_queue, queue_trace
from .shortening import (
    ShorteningSearchResult,
    UniformShortening,
    optimize_devo,
    optimize_exhaustive,
    optimize_uniform,
    universal_pattern,
)
