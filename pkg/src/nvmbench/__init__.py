"""nvmbench: behavioral characterization and benchmarking of NVM technologies.

Simulates six memory technologies (Toggle MRAM, FeRAM, CBRAM, ReRAM, Flash,
SRAM) at the transaction level -- per-write current, latency, aging and
wear-driven bit errors -- and reproduces a full chip-characterization
workflow on top: pattern sweeps, aging traces, endurance error histograms, a
Flip-N-Write mitigation study, and an integer neural-network application
benchmark across technologies.
"""

__version__ = "0.1.0"

from .profiles import (  # noqa: F401
    Technology,
    TechnologyProfile,
    ProfileError,
    default_profile,
    load_default_profiles,
    load_profile,
)
from .device import (  # noqa: F401
    DeviceInstance,
    WriteOutcome,
    create_device,
    erase,
    inject_errors,
    latency_of_write,
    read_byte,
    write_byte,
    write_page,
)
from .characterization import (  # noqa: F401
    AgingTrace,
    ErrorHistogram,
    PatternSweepResult,
    classify_error,
    run_aging,
    run_endurance,
    run_pattern_sweep,
)
from .encoding import (  # noqa: F401
    FnwEncoder,
    FnwWord,
    compare_endurance,
    fnw_decode,
    fnw_encode,
    toggle_cost,
)
from .nn import (  # noqa: F401
    NNParameters,
    activation,
    benchmark_technologies,
    infer,
    neuron_forward,
    store_parameters,
)
from .train import (  # noqa: F401
    DEConfig,
    Dataset,
    de_train,
    evaluate,
    make_contrast_dataset,
)
