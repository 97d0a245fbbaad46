import json
import math

import pytest

from worldlines import rulebook as rb
from worldlines.core import (
    ALIVE,
    BLUE,
    CURIOUS,
    DYING,
    LOSE,
    NO_PAIN,
    PAIN,
    READER,
    RED,
    WIN,
    Phase,
    PhaseTag,
    born_probability,
)
from worldlines.errors import InsufficientHorizon, UnknownScenario
from worldlines.multiverse import (
    EXTERNAL,
    WIGNER_RED_LIGHT,
    WIGNER_SPEECH,
    BranchNode,
    Scenario,
    TrialSampler,
    build_scenario,
    enumerate_exact,
    run_trials,
    sample_trajectory,
    validate_tree,
)


def leaves(node):
    if not node.children:
        return [node]
    return [leaf for c in node.children for leaf in leaves(c)]


class TestBuilders:
    def test_redness_two_leaves_equal_amplitudes(self):
        s = build_scenario("redness")
        tips = leaves(s.root)
        assert len(tips) == 2
        for leaf in tips:
            assert born_probability(leaf.amplitude) == pytest.approx(0.5, abs=1e-9)

    def test_lottery_k3_has_exactly_one_win(self):
        s = build_scenario("lottery", k=3, winning="101")
        tips = leaves(s.root)
        assert len(tips) == 8
        wins = [leaf for leaf in tips if leaf.reader_qualia == (WIN,)]
        assert len(wins) == 1
        assert wins[0].labels["result"] == "WIN"

    def test_cat_tree_contains_dying_then_death_path(self):
        s = build_scenario("schrodinger_cat")
        prepare = s.root.children[0]
        poisoned = [c for c in prepare.children if c.labels.get("cat") == "DYING"]
        assert len(poisoned) == 1
        assert poisoned[0].children[0].labels["cat"] == "DEAD"

    def test_unknown_scenario(self):
        with pytest.raises(UnknownScenario):
            build_scenario("moon_cat")

    def test_unitarity_validated_on_build(self):
        s = build_scenario("wigner_friend")
        s.root.children[0].amplitude = 0.9 + 0j
        with pytest.raises(ValueError, match="unitarity"):
            validate_tree(s.root)

    def test_lottery_depth_bound(self):
        with pytest.raises(ValueError):
            build_scenario("lottery", k=16)


class TestEnumerate:
    def test_wigner_speech_follows_born(self):
        dist = enumerate_exact(build_scenario("wigner_friend"), [rb.redness_rule(0.0)], READER)
        assert dist.by_string() == {
            'HEAR("I saw RED")': 0.5,
            'HEAR("I saw BLUE")': 0.5,
        }

    def test_wigner_loophole_channel_invokes_rule(self):
        s = build_scenario("wigner_friend", channel=WIGNER_RED_LIGHT)
        dist = enumerate_exact(s, [rb.redness_rule(0.0)], READER)
        assert dist.by_string() == {"BLUE": 1.0}

    def test_no_rules_is_born_everywhere(self):
        for name in ("redness", "pain", "wigner_friend", "schrodinger_cat"):
            dist = enumerate_exact(build_scenario(name), [], READER)
            assert math.fsum(dist.probs.values()) == pytest.approx(1.0, abs=1e-12)
            assert all(p == 0.5 for p in dist.probs.values())

    def test_cat_frame_with_perceivable_dying(self):
        s = build_scenario("schrodinger_cat", dying_perceivable=True)
        dist = enumerate_exact(s, [rb.no_death_rule()], READER)
        assert dist.by_string() == {"ALIVE": 0.5, "DYING": 0.5}

    def test_cat_instantaneous_death_invokes_rule(self):
        s = build_scenario("schrodinger_cat", dying_perceivable=False)
        dist = enumerate_exact(s, [rb.no_death_rule()], READER)
        assert dist.by_string() == {"ALIVE": 1.0}

    def test_after_collapse_rule_sees_past_the_dying_state(self):
        s = build_scenario("schrodinger_cat", dying_perceivable=True)
        dist = enumerate_exact(s, [rb.after_collapse_no_death_rule(2)], READER)
        assert dist.by_string() == {"ALIVE": 1.0}

    def test_frame_consistency_without_rules(self):
        for name in ("redness", "wigner_friend", "schrodinger_cat"):
            s = build_scenario(name)
            assert enumerate_exact(s, [], READER).probs == enumerate_exact(s, [], EXTERNAL).probs

    def test_external_frame_immune_to_rules(self):
        s = build_scenario("schrodinger_cat")
        dist = enumerate_exact(s, [rb.no_death_rule()], EXTERNAL)
        assert dist.by_string() == {"ALIVE": 0.5, "DYING": 0.5}

    def test_channel_changes_annotations_not_physics(self):
        speech = build_scenario("wigner_friend", channel=WIGNER_SPEECH)
        lights = build_scenario("wigner_friend", channel=WIGNER_RED_LIGHT)
        for a, b in zip(leaves(speech.root), leaves(lights.root)):
            assert a.amplitude == b.amplitude
            assert a.labels == b.labels
        assert len(leaves(speech.root)) == len(leaves(lights.root))

    def test_lottery_born_and_win_seeking(self):
        s = build_scenario("lottery", k=10)
        born = enumerate_exact(s, [], READER)
        assert born.get(WIN) == 2.0**-10
        assert born.get(LOSE) == 1.0 - 2.0**-10
        steered = enumerate_exact(s, [rb.win_seeking_rule(11)], READER)
        assert steered.by_string() == {"WIN": 1.0}

    def test_curiosity_steering(self):
        curious = build_scenario(
            "schrodinger_cat", dying_perceivable=False, initial_state=CURIOUS
        )
        dist = enumerate_exact(curious, [rb.curiosity_steering_rule()], READER)
        assert dist.by_string() == {"DEATH": 1.0}
        calm = build_scenario("schrodinger_cat", dying_perceivable=False)
        dist = enumerate_exact(calm, [rb.curiosity_steering_rule()], READER)
        assert dist.by_string() == {"ALIVE": 0.5, "DEATH": 0.5}

    def test_pain_steering_rule_drives_colors(self):
        shocked = build_scenario("pain_steering", steer_state=PAIN)
        dist = enumerate_exact(shocked, [rb.pain_steering_rule()], READER)
        assert dist.by_string() == {"PAIN,BLUE": 1.0}
        calm = build_scenario("pain_steering", steer_state=NO_PAIN)
        dist = enumerate_exact(calm, [rb.pain_steering_rule()], READER)
        assert dist.by_string() == {"NO_PAIN,RED": 1.0}

    def test_only_during_superposition_rule(self):
        rule = rb.only_during_superposition_rule()
        # pain only during the superposition: full steering
        toward_blue = build_scenario(
            "pain_steering", steer_state=NO_PAIN, during_state=PAIN, before_state=NO_PAIN
        )
        dist = enumerate_exact(toward_blue, [rule], READER)
        assert dist.by_string() == {"NO_PAIN,BLUE": 1.0}
        # pain already before the superposition: even weights
        always_pain = build_scenario(
            "pain_steering", steer_state=PAIN, during_state=PAIN, before_state=PAIN
        )
        dist = enumerate_exact(always_pain, [rule], READER)
        assert dist.by_string() == {"PAIN,RED": 0.5, "PAIN,BLUE": 0.5}

    def test_composition_scenario_cancellation(self):
        s = build_scenario("redness", with_digits=True)
        dist = enumerate_exact(s, [rb.redness_rule(0.25), rb.digit_rule(0.25)], READER)
        assert dist.by_string() == {"RED,DIGIT(1)": 0.5, "BLUE,DIGIT(0)": 0.5}

    def test_insufficient_horizon_on_truncated_tree(self):
        root = BranchNode(
            id="root",
            phase=PhaseTag(0, Phase.T_BS),
            observer_state=ALIVE,
            children=[
                BranchNode(
                    id="a",
                    amplitude=complex(2**-0.5),
                    phase=PhaseTag(1, Phase.T_AT),
                    reader_qualia=(ALIVE,),
                    observer_state=ALIVE,
                    truncated=True,
                ),
                BranchNode(
                    id="b",
                    amplitude=complex(2**-0.5),
                    phase=PhaseTag(1, Phase.T_AT),
                    reader_qualia=(DYING,),
                    observer_state=DYING,
                    truncated=True,
                ),
            ],
        )
        scenario = Scenario("custom", root)
        with pytest.raises(InsufficientHorizon):
            enumerate_exact(scenario, [rb.after_collapse_no_death_rule(5)], READER)

    def test_distribution_json_is_canonical(self):
        dist = enumerate_exact(build_scenario("lottery", k=2, winning="11"), [], READER)
        blob = dist.to_json()
        parsed = json.loads(blob)
        assert list(parsed) == sorted(parsed)
        assert parsed["WIN"] == 0.25

    def test_distribution_golden_dump(self):
        import worldlines.rulebook as rb2

        dist = enumerate_exact(
            build_scenario("wigner_friend"), [rb2.redness_rule(0.0)], READER
        )
        assert dist.to_json() == (
            '{"HEAR(\\"I saw BLUE\\")": 0.5, "HEAR(\\"I saw RED\\")": 0.5}'
        )
        forced = enumerate_exact(
            build_scenario("wigner_friend", channel=WIGNER_RED_LIGHT),
            [rb2.redness_rule(0.0)],
            READER,
        )
        assert forced.to_json() == '{"BLUE": 1.0}'

    def test_scenario_golden_dump(self):
        from worldlines.multiverse import scenario_to_json

        blob = scenario_to_json(build_scenario("redness"))
        parsed = json.loads(blob)
        assert parsed["name"] == "redness"
        assert parsed["channel"] == "lights"
        tree = parsed["tree"]
        assert tree["id"] == "prepare"
        assert [c["reader_qualia"] for c in tree["children"]] == [["RED"], ["BLUE"]]
        assert [c["labels"]["arm"] for c in tree["children"]] == ["L", "R"]
        assert tree["children"][0]["amplitude"][0] == pytest.approx(2**-0.5)
        # canonical: byte-identical across builds
        assert blob == scenario_to_json(build_scenario("redness"))

    @pytest.mark.parametrize("f", [0.0, 0.2, 0.35, 0.75, 1.0])
    def test_loophole_monotonicity_over_weights(self, f):
        """Swapping the channel tokens for the rule's trigger tokens moves the
        reader-frame vector from Born to exactly the clause weights."""
        import worldlines.rulebook as rb2

        rule = rb2.redness_rule(f)
        speech = enumerate_exact(build_scenario("wigner_friend"), [rule], READER)
        assert sorted(speech.probs.values()) == [0.5, 0.5]
        forced = enumerate_exact(
            build_scenario("wigner_friend", channel=WIGNER_RED_LIGHT), [rule], READER
        )
        assert forced.get(RED) == f
        assert forced.get(BLUE) == 1.0 - f


class TestSampling:
    def test_fixed_seed_reproducible(self):
        s = build_scenario("redness")
        a = sample_trajectory(s, [], READER, seed=123456789)
        b = sample_trajectory(s, [], READER, seed=123456789)
        assert a == b

    def test_sample_equals_first_trial_of_run(self):
        s = build_scenario("redness")
        sampler = TrialSampler(s, [], READER)
        single = sampler.sample(99)
        tally_one = sampler.tally(1, 99)
        assert tally_one == {single: 1}

    def test_born_redness_frequency_within_3_sigma(self):
        s = build_scenario("redness")
        n = 100_000
        tally = run_trials(s, [], READER, n, seed=20240817)
        sigma = 0.5 / math.sqrt(n)
        assert tally[(RED,)] / n == pytest.approx(0.5, abs=3 * sigma)

    def test_forced_rule_forces_every_sample(self):
        s = build_scenario("redness")
        tally = run_trials(s, [rb.redness_rule(0.0)], READER, 2000, seed=5)
        assert tally == {(BLUE,): 2000}

    def test_tally_conserves_trials(self):
        tally = run_trials(build_scenario("redness"), [], READER, 300, seed=0)
        assert sum(tally.values()) == 300

    def test_expected_count_under_f(self):
        tally = run_trials(build_scenario("redness"), [rb.redness_rule(0.6)], READER, 300, seed=11)
        sigma = math.sqrt(300 * 0.6 * 0.4)
        assert abs(tally[(RED,)] - 180) < 4 * sigma

    def test_zero_trials_rejected(self):
        with pytest.raises(ValueError):
            run_trials(build_scenario("redness"), [], READER, 0, seed=0)

    @pytest.mark.parametrize("frame", [READER, EXTERNAL], ids=["reader", "external"])
    @pytest.mark.parametrize(
        "name,rules",
        [
            ("redness", []),
            ("redness", [rb.redness_rule(0.0)]),
            ("redness", [rb.redness_rule(0.6)]),
            ("pain", [rb.pain_rule(0.6)]),
            ("schrodinger_cat", [rb.no_death_rule()]),
            ("wigner_friend", [rb.redness_rule(0.0)]),
            ("pain_steering", [rb.pain_steering_rule()]),
        ],
    )
    def test_monte_carlo_matches_enumeration(self, name, rules, frame):
        s = build_scenario(name)
        n = 20_000
        dist = enumerate_exact(s, rules, frame)
        tally = run_trials(s, rules, frame, n, seed=hash((name, frame.id)) & 0xFFFF)
        for seq, p in dist.probs.items():
            sigma = math.sqrt(max(p * (1 - p), 1e-12) / n)
            assert tally.get(seq, 0) / n == pytest.approx(p, abs=max(4 * sigma, 1e-9))
