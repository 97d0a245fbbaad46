import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from worldlines.core import (
    Channel,
    Designation,
    ObserverId,
    Phase,
    PhaseTag,
    Qualia,
    RED,
    BLUE,
    born_probability,
    format_qualia,
    light_channel,
    parse_qualia,
    speech_channel,
)
from worldlines.errors import InvalidAmplitude


class TestBornProbability:
    def test_equal_superposition_amplitude(self):
        assert born_probability(2**-0.5 + 0j) == pytest.approx(0.5, abs=1e-9)

    def test_unit_amplitude(self):
        assert born_probability(1 + 0j) == 1.0

    def test_complex_components(self):
        assert born_probability(0.6 + 0.8j) == pytest.approx(1.0, abs=1e-12)
        assert born_probability(0.6 + 0j) == pytest.approx(0.36, abs=1e-12)

    @pytest.mark.parametrize("bad", [complex("nan"), complex("inf"), complex(0, float("nan"))])
    def test_non_finite_rejected(self, bad):
        with pytest.raises(InvalidAmplitude):
            born_probability(bad)

    @given(st.floats(0, math.tau, allow_nan=False), st.floats(0, math.tau))
    def test_normalized_pair_conserves_probability(self, mix, phase):
        c1 = math.cos(mix) * complex(math.cos(phase), math.sin(phase))
        c2 = complex(math.sin(mix))
        assert born_probability(c1) + born_probability(c2) == pytest.approx(1.0, abs=1e-9)


_token_strategy = st.one_of(
    st.sampled_from("RED BLUE PAIN NO_PAIN DEATH DYING ALIVE CURIOUS WIN LOSE".split()).map(Qualia),
    st.text(min_size=0, max_size=20).map(Qualia.hear),
    st.text(min_size=0, max_size=20).map(Qualia.read),
    st.text(min_size=1, max_size=20).map(Qualia.custom),
    st.integers(0, 1).map(Qualia.digit),
)


class TestQualia:
    def test_hear_and_read_differ(self):
        assert Qualia.hear("x") != Qualia.read("x")

    def test_payload_case_sensitive(self):
        assert Qualia.hear("I saw RED") != Qualia.hear("i saw red")

    @given(_token_strategy)
    def test_equality_reflexive_and_hashable(self, tok):
        assert tok == Qualia(tok.kind, tok.payload)
        assert hash(tok) == hash(Qualia(tok.kind, tok.payload))

    @given(_token_strategy, _token_strategy)
    def test_equality_symmetric(self, a, b):
        assert (a == b) == (b == a)

    @given(_token_strategy)
    def test_text_form_round_trips(self, tok):
        assert parse_qualia(format_qualia(tok)) == tok

    def test_canonical_text_forms(self):
        assert format_qualia(RED) == "RED"
        assert format_qualia(Qualia.hear("I saw RED")) == 'HEAR("I saw RED")'
        assert format_qualia(Qualia.digit(0)) == "DIGIT(0)"
        assert format_qualia(Qualia.custom("smell of rain")) == 'CUSTOM("smell of rain")'

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            Qualia("GREEN")
        with pytest.raises(ValueError):
            Qualia.digit(2)


class TestPhases:
    def test_episode_ordering(self):
        assert Phase.T_B < Phase.T_BS < Phase.T_DS < Phase.T_AT < Phase.T_P

    def test_tags_order_strictly_by_step_then_phase(self):
        path = [
            PhaseTag(0, Phase.T_B),
            PhaseTag(1, Phase.T_BS),
            PhaseTag(2, Phase.T_DS),
            PhaseTag(3, Phase.T_AT),
            PhaseTag(4, Phase.T_P),
        ]
        for a, b in zip(path, path[1:]):
            assert a < b and not b < a

    def test_negative_step_rejected(self):
        with pytest.raises(ValueError):
            PhaseTag(-1, Phase.T_B)


class TestObserver:
    def test_reader_designation(self):
        reader = ObserverId("me", Designation.READER)
        assert reader.is_reader
        assert not ObserverId("friend").is_reader


class TestChannel:
    def test_delivery_and_tokens(self):
        ch = light_channel()
        assert ch.deliver("L") == RED and ch.deliver("R") == BLUE
        assert ch.tokens() == frozenset({RED, BLUE})
        assert ch.is_injective

    def test_information_hiding_channel_is_legal(self):
        hiding = Channel("same_light", {"L": RED, "R": RED})
        assert not hiding.is_injective
        assert hiding.tokens() == frozenset({RED})

    def test_speech_channel_wraps_phrases(self):
        ch = speech_channel({"RED": "I saw RED"})
        assert ch.deliver("RED") == Qualia.hear("I saw RED")
