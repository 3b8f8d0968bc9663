"""Second-pass speaker error correction with word-preserving constrained decoding."""

from .backends import EchoBackend, HttpBackend, OracleBackend, RandomBackend, ScriptedBackend, mock_backend
from .decoder import DecodeState, DecoderConfig, constrained_decode, get_allowed_words
from .errors import (
    BackendError,
    ConfigError,
    DecodeError,
    ParseError,
    ProtocolError,
    SpkfixError,
    ValidationError,
)
from .estimators import ScoreMapper, SpeakerErrorCorrector, WordScorePooler
from .formats import FormatKind, FormattedTranscript, normalize, parse, serialize
from .metrics import CpWerReport, cpwer, delta_cp, evaluate_session, wer
from .pipeline import PipelineConfig, chunk_session, correct_session, correct_with_tpst
from .scores import Confidence, MapperConfig, Variant, map_score, map_score_int, median_filter, pool_word_scores
from .transcript import AttributedWord, FramePosteriors, Session, load_sessions, save_sessions
from .transfer import align, make_oracle_target, transfer_speakers

__version__ = "0.1.0"
