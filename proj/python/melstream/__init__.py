# Copyright 2026 The melstream Authors
# License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

"""Log-mel speech enhancement with a full-band/sub-band recurrent network."""

from ._melstream import (
    Model,
    RuntimeFailure,
    Stream,
    ValidationError,
    asr_normalize,
    build_corpus,
    causality_probe,
    cli,
    frame_count,
    gradient_check,
    log_mel,
    mel_to_waveform,
    online_normalize,
    param_count,
    read_wav,
    smoothing_alpha,
    verify_corpus,
    write_wav,
)

__all__ = [
    "Model",
    "RuntimeFailure",
    "Stream",
    "ValidationError",
    "asr_normalize",
    "build_corpus",
    "causality_probe",
    "cli",
    "frame_count",
    "gradient_check",
    "log_mel",
    "mel_to_waveform",
    "online_normalize",
    "param_count",
    "read_wav",
    "smoothing_alpha",
    "verify_corpus",
    "write_wav",
]
