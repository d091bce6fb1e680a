"""Dataset mining: transcripts to FP pairs, adaptation datasets, synthetic corpora."""

from .datasets import AdaptationDatasets, build_adaptation_datasets, split_records
from .fp import FpPair, FpSequenceError, extract_fp_pair, reinsert_fp
from .records import (
    CorpusManifest,
    DataError,
    FpRecord,
    UtteranceRecord,
    read_corpus,
    read_fp_dataset,
    read_manifest,
    write_corpus,
    write_fp_dataset,
)
from .report import DurationReport, duration_distribution_report
from .speed import SpeedBucketBoundaries, assign_speed_tag, assign_speed_tags, compute_speed_buckets
from .symbols import BOS, UH_TOKEN, UM_TOKEN, FpTag, SpeedTag, Style
from .synthetic import SyntheticConfig, SyntheticWorld, generate_synthetic_corpus
from .text import Lexicon, OOVError, ParseError, g2p_lookup, load_lexicon, parse_marked_text, phonemize

__all__ = [
    "AdaptationDatasets", "BOS", "CorpusManifest", "DataError", "DurationReport", "FpPair",
    "FpRecord", "FpSequenceError", "FpTag", "Lexicon", "OOVError", "ParseError", "SpeedBucketBoundaries",
    "SpeedTag", "Style", "SyntheticConfig", "SyntheticWorld", "UH_TOKEN", "UM_TOKEN", "UtteranceRecord",
    "assign_speed_tag", "assign_speed_tags", "build_adaptation_datasets", "compute_speed_buckets",
    "duration_distribution_report", "extract_fp_pair", "g2p_lookup", "generate_synthetic_corpus",
    "load_lexicon", "parse_marked_text", "phonemize", "read_corpus", "read_fp_dataset",
    "read_manifest", "reinsert_fp", "split_records", "write_corpus", "write_fp_dataset",
]
