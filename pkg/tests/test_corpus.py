import hashlib
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spontts.corpus import (
    BOS,
    UH_TOKEN,
    UM_TOKEN,
    DataError,
    FpPair,
    FpSequenceError,
    FpTag,
    OOVError,
    ParseError,
    SpeedBucketBoundaries,
    SpeedTag,
    Style,
    SyntheticConfig,
    UtteranceRecord,
    assign_speed_tag,
    build_adaptation_datasets,
    compute_speed_buckets,
    duration_distribution_report,
    extract_fp_pair,
    g2p_lookup,
    generate_synthetic_corpus,
    load_lexicon,
    parse_marked_text,
    phonemize,
    read_corpus,
    reinsert_fp,
    write_corpus,
)
from spontts.corpus.synthetic import fp_token_count
from spontts.corpus.text import spell_out
from spontts.numerics import ConfigError

# reference utterance
APPLE_TEXT = "It's called <um> right <uh> apple"
APPLE_RAW = "ih t s k ao l d ah m r ay t ah ae p ax l".split()
APPLE_NO_FP = "ih t s k ao l d r ay t ae p ax l".split()
APPLE_TAGS = [0, 0, 0, 0, 0, 0, 2, 0, 0, 1, 0, 0, 0, 0]


@pytest.fixture(scope="module")
def lexicon():
    return load_lexicon()


class TestParse:
    def test_apple_sentence(self):
        assert parse_marked_text("it's called <um> right <uh> apple") == [
            "it's", "called", FpTag.UM, "right", FpTag.UH, "apple"]

    def test_single_word(self):
        assert parse_marked_text("hello") == ["hello"]

    def test_markers_only(self):
        assert parse_marked_text("<uh> <uh>") == [FpTag.UH, FpTag.UH]

    def test_case_and_punctuation(self):
        assert parse_marked_text("Well, <UM> it's... OK!") == ["well", FpTag.UM, "it's", "ok"]

    def test_unknown_marker_location(self):
        with pytest.raises(ParseError) as info:
            parse_marked_text("so <er> yes", line_number=7)
        assert info.value.line == 7
        assert info.value.column == 4


class TestG2P:
    def test_apple(self, lexicon):
        assert g2p_lookup("apple", lexicon) == ["ae", "p", "ax", "l"]

    def test_fp_spellings(self, lexicon):
        assert g2p_lookup(FpTag.UM, lexicon) == ["ah", "m"]
        assert g2p_lookup(FpTag.UH, lexicon) == ["ah"]

    def test_empty_word(self, lexicon):
        with pytest.raises(OOVError):
            g2p_lookup("", lexicon)

    def test_oov_lists_every_word(self, lexicon):
        with pytest.raises(OOVError) as info:
            phonemize(parse_marked_text("zyzzyva apple qwxz"), lexicon)
        assert info.value.words == ["zyzzyva", "qwxz"]

    def test_apple_raw_phonemes(self, lexicon):
        symbols = phonemize(parse_marked_text(APPLE_TEXT), lexicon)
        assert spell_out(symbols) == APPLE_RAW

    def test_passthrough_alphabet(self):
        lex = load_lexicon(passthrough=["p01"])
        assert g2p_lookup("p01", lex) == ["p01"]


class TestFpPairs:
    def test_apple_extraction(self, lexicon):
        symbols = phonemize(parse_marked_text(APPLE_TEXT), lexicon)
        pair = extract_fp_pair(symbols)
        assert list(pair.phonemes) == APPLE_NO_FP
        assert [int(t) for t in pair.tags] == APPLE_TAGS

    def test_apple_reinsert(self):
        pair = FpPair(APPLE_NO_FP, APPLE_TAGS)
        assert spell_out(reinsert_fp(pair)) == APPLE_RAW

    def test_no_fp_is_identity(self):
        pair = extract_fp_pair(["a", "b", "c"])
        assert pair.phonemes == ("a", "b", "c")
        assert set(pair.tags) == {FpTag.NONE}
        assert reinsert_fp(pair) == ["a", "b", "c"]

    def test_initial_fp_goes_to_bos(self):
        pair = extract_fp_pair([UH_TOKEN, "hh", "ay"])
        assert pair.phonemes == (BOS, "hh", "ay")
        assert pair.tags == (FpTag.UH, FpTag.NONE, FpTag.NONE)

    def test_consecutive_fp_rejected(self):
        with pytest.raises(FpSequenceError):
            extract_fp_pair(["a", UH_TOKEN, UM_TOKEN, "b"])

    def test_random_round_trips(self):
        rng = random.Random(0)
        alphabet = ["a", "b", "c", "d", "e", BOS]
        for _ in range(1000):
            n = rng.randint(1, 30)
            phonemes = [rng.choice(alphabet) for _ in range(n)]
            tags = [rng.choice([0, 0, 0, 1, 2]) for _ in range(n)]
            pair = FpPair(phonemes, tags)
            assert extract_fp_pair(reinsert_fp(pair)) == pair

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.sampled_from(["a", "b", "c", UH_TOKEN, UM_TOKEN]), min_size=1, max_size=40))
    def test_length_invariant(self, symbols):
        try:
            pair = extract_fp_pair(symbols)
        except FpSequenceError:
            return
        n_fp = sum(s in (UH_TOKEN, UM_TOKEN) for s in symbols)
        bos = 1 if symbols[0] in (UH_TOKEN, UM_TOKEN) else 0
        assert len(pair.phonemes) == len(pair.tags) == len(symbols) - n_fp + bos


def brute_force_tertiles(values):
    # nearest rank: smallest v such that at least ceil(k*n/3) values are <= v
    ordered = sorted(values)
    n = len(ordered)
    out = []
    for k in (1, 2):
        need = -(-k * n // 3)
        out.append(min(v for v in ordered if sum(x <= v for x in ordered) >= need))
    return tuple(out)


class TestSpeedBuckets:
    def test_one_to_nine(self):
        b = compute_speed_buckets(range(1, 10))
        assert (b.t1, b.t2) == brute_force_tertiles(range(1, 10)) == (3, 6)
        tags = [assign_speed_tag(d, b) for d in range(1, 10)]
        assert [tags.count(t) for t in SpeedTag] == [3, 3, 3]

    def test_all_equal_is_medium(self):
        b = compute_speed_buckets([7] * 10)
        assert b.t1 == b.t2 == 7
        assert {assign_speed_tag(7, b)} == {SpeedTag.MEDIUM}

    def test_empty(self):
        with pytest.raises(ValueError):
            compute_speed_buckets([])

    @pytest.mark.parametrize("d,tag", [(2, SpeedTag.FAST), (3, SpeedTag.FAST), (6, SpeedTag.MEDIUM),
                                       (7, SpeedTag.SLOW), (40, SpeedTag.SLOW)])
    def test_assign(self, d, tag):
        assert assign_speed_tag(d, SpeedBucketBoundaries(3, 6)) is tag

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.integers(0, 60), min_size=1, max_size=80), st.randoms())
    def test_permutation_invariant_and_balanced(self, values, rnd):
        b = compute_speed_buckets(values)
        assert (b.t1, b.t2) == brute_force_tertiles(values)
        shuffled = list(values)
        rnd.shuffle(shuffled)
        assert compute_speed_buckets(shuffled) == b
        counts = np.bincount([assign_speed_tag(v, b) for v in values], minlength=3)
        ties = values.count(b.t1) + values.count(b.t2)
        assert np.all(np.abs(counts - len(values) / 3) <= 1 + ties)


class TestRecords:
    def test_invariants(self):
        with pytest.raises(DataError):
            UtteranceRecord("x", "s", ["a", "b"], durations=[1], pitch=[0.0, 0.0]).validate()
        with pytest.raises(DataError):
            UtteranceRecord("x", "s", ["a"], durations=[2], pitch=[0.0],
                            mel=np.zeros((3, 80), np.float32)).validate()

    def test_disk_round_trip(self, tmp_path):
        records = generate_synthetic_corpus(SyntheticConfig.reading(n_utterances=4), seed=3)
        write_corpus(records, tmp_path, "c")
        back = read_corpus(tmp_path)
        for a, b in zip(records, back):
            assert a.phonemes == b.phonemes and a.durations == b.durations and a.pitch == b.pitch
            np.testing.assert_array_equal(a.mel, b.mel)
        raw = (tmp_path / "mels" / f"{records[0].id}.f32").read_bytes()
        assert raw == records[0].mel.astype("<f4").tobytes()


class TestDatasets:
    def test_all_utterances_have_fp(self):
        corpus = [UtteranceRecord(f"u{i}", "s", [BOS, "a", UH_TOKEN, "b"]) for i in range(5)]
        ds = build_adaptation_datasets(corpus)
        assert len(ds.spon_fp) == 5

    def test_no_fp(self):
        corpus = generate_synthetic_corpus(SyntheticConfig.spontaneous(n_utterances=6, fp_rate=0.0), 0)
        ds = build_adaptation_datasets(corpus)
        assert ds.spon_fp == []
        assert ds.manifests["spon_fp"].warnings
        assert len(ds.spon_rhythm) == 6

    def test_timbre_default_size(self):
        corpus = generate_synthetic_corpus(SyntheticConfig.spontaneous(n_utterances=60), 0)
        ds = build_adaptation_datasets(corpus)
        assert len(ds.spon_timbre) == 50

    def test_fp_free_sentences_dropped(self):
        corpus = generate_synthetic_corpus(SyntheticConfig.spontaneous(n_utterances=80, fp_rate=0.1), 1)
        ds = build_adaptation_datasets(corpus)
        with_fp = [r for r in corpus if r.fp_counts()]
        assert 0 < len(ds.spon_fp) == len(with_fp) < len(corpus)

    def test_reading_records_rejected(self):
        corpus = generate_synthetic_corpus(SyntheticConfig.reading(n_utterances=2), 0)
        with pytest.raises(DataError):
            build_adaptation_datasets(corpus)


class TestSynthetic:
    def _digest(self, records):
        h = hashlib.sha256()
        for r in records:
            h.update(repr((r.id, r.speaker, r.phonemes, r.durations, r.pitch)).encode())
            h.update(r.mel.tobytes())
        return h.hexdigest()

    def test_deterministic(self):
        cfg = SyntheticConfig.spontaneous(n_utterances=10)
        assert self._digest(generate_synthetic_corpus(cfg, 5)) == self._digest(generate_synthetic_corpus(cfg, 5))
        assert self._digest(generate_synthetic_corpus(cfg, 5)) != self._digest(generate_synthetic_corpus(cfg, 6))

    def test_spontaneous_long_durations(self):
        corpus = generate_synthetic_corpus(SyntheticConfig.spontaneous(n_utterances=600), 0)
        durations = np.concatenate([r.durations for r in corpus])
        assert durations.size >= 10_000
        assert (durations > 25).mean() >= 0.3

    def test_zero_rate(self):
        corpus = generate_synthetic_corpus(SyntheticConfig.spontaneous(n_utterances=50, fp_rate=0.0), 0)
        assert fp_token_count(corpus) == 0

    @pytest.mark.parametrize("rate", [-0.1, 1.5])
    def test_invalid_rate(self, rate):
        with pytest.raises(ConfigError):
            generate_synthetic_corpus(SyntheticConfig.spontaneous(fp_rate=rate), 0)

    def test_fp_count_linear_in_rate(self):
        # with background 0, each uh-trigger token is an independent Bernoulli(rate)
        counts = {}
        for rate in (0.1, 0.2, 0.4):
            corpus = generate_synthetic_corpus(SyntheticConfig.spontaneous(n_utterances=300, fp_rate=rate), 9)
            counts[rate] = sum(1 for r in corpus for s in r.phonemes if s == UH_TOKEN)
        base = counts[0.1]
        for rate in (0.2, 0.4):
            k = rate / 0.1
            expected = base * k
            n_trials = base / 0.1
            sigma = np.sqrt(n_trials * rate * (1 - rate)) + k * np.sqrt(n_trials * 0.1 * 0.9)
            assert abs(counts[rate] - expected) <= 3 * sigma

    def test_pitch_is_speaker_normalized(self):
        corpus = generate_synthetic_corpus(SyntheticConfig.reading(n_utterances=40), 0)
        for spk in {r.speaker for r in corpus}:
            values = np.concatenate([r.pitch for r in corpus if r.speaker == spk])
            assert abs(values.mean()) < 1e-5 and abs(values.std() - 1) < 1e-5

    def test_uh_um_ratio(self):
        corpus = generate_synthetic_corpus(SyntheticConfig.spontaneous(n_utterances=1500), 2)
        uh = sum(s == UH_TOKEN for r in corpus for s in r.phonemes)
        um = sum(s == UM_TOKEN for r in corpus for s in r.phonemes)
        assert abs(uh / (uh + um) - 2614 / 2952) < 0.03


class TestReport:
    def test_single_utterance(self):
        rec = UtteranceRecord("u", "s", ["a", "b"], durations=[2, 2], pitch=[0.0, 0.0],
                              mel=np.zeros((4, 80), np.float32), style=Style.READING)
        rep = duration_distribution_report([rec])
        assert rep.summaries["reading"].histogram[2] == 2
        assert sum(rep.summaries["reading"].histogram) == 2

    def test_style_p95(self):
        read = generate_synthetic_corpus(SyntheticConfig.reading(n_utterances=200), 0)
        spon = generate_synthetic_corpus(SyntheticConfig.spontaneous(n_utterances=200), 0)
        rep = duration_distribution_report(read + spon)
        assert rep.summaries["reading"].percentiles[95] <= 25
        assert rep.summaries["spontaneous"].percentiles[95] > 25
        assert "reading" in rep.summary_csv() and "spontaneous" in rep.summary_csv()

    def test_empty(self):
        with pytest.raises(ValueError):
            duration_distribution_report([])
