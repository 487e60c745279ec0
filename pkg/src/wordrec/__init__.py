"""Feature engineering and small-CNN word recognition for short speech clips.

The pipeline: 16 kHz mono WAV in, pre-emphasis / framing / FFT, a triangular
Mel filterbank feeding both cepstral (MFCC) and per-band frequency-centroid
features, fixed-shape 256x256xD tensors, SNR-calibrated noise corruption,
and a two-stage convolutional classifier trained per accent group.
"""

__version__ = "0.1.0"

from .audio_io import AudioBuffer, DatasetManifest, UtteranceRecord, load_manifest, load_wav, save_wav
from .dsp import FrameConfig, Spectrum, frame_signal, preemphasize, spectrum
from .features import (
    ChannelStats,
    FeatureTensor,
    assemble_tensor,
    band_energies,
    compute_stats,
    extract_tensor,
    frequency_centroids,
    mfcc,
    normalize_tensor,
    read_features,
    write_features,
)
from .melbank import MelFilterbank, build_filterbank, hz_to_mel, mel_to_hz
from .noise import NoiseSpec, mix_at_snr, synth_highpass, synth_lowpass, synth_white
from .cnn import (
    CnnConfig,
    CnnModel,
    EvalReport,
    TrainConfig,
    backward,
    evaluate,
    forward,
    init_model,
    load_model,
    loss,
    save_model,
    train,
)
