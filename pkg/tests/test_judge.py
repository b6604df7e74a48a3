import itertools
import random

from hypothesis import given, settings
from hypothesis import strategies as st

from verichain.grammar import parse_chain
from verichain.judge import judge
from verichain.model import Verdict

from .helpers import simple_chain


def statuses_of(chain):
    return [block.status for block in chain.blocks]


def brute_force_judge(statuses):
    # Independent oracle: AND-fold over subclaim truth values.
    return (
        Verdict.SUPPORTED
        if all(s is Verdict.SUPPORTED for s in statuses)
        else Verdict.REFUTED
    )


class TestGoldenVerdicts:
    def test_ben_karlin_all_refuted(self, chain_fixtures):
        assert judge(parse_chain(chain_fixtures["ben_karlin"])) is Verdict.REFUTED

    def test_shadow_creek_mixed_statuses(self, chain_fixtures):
        chain = parse_chain(chain_fixtures["shadow_creek"])
        assert statuses_of(chain) == [Verdict.REFUTED, Verdict.SUPPORTED]
        assert judge(chain) is Verdict.REFUTED

    def test_debel_gallery_all_supported(self, chain_fixtures):
        assert judge(parse_chain(chain_fixtures["debel_gallery"])) is Verdict.SUPPORTED


def test_single_supported_block():
    assert judge(parse_chain(simple_chain([Verdict.SUPPORTED]))) is Verdict.SUPPORTED


def test_exhaustive_status_vectors_up_to_five_blocks():
    # Every status vector of length 1..5 agrees with the AND-fold oracle.
    for k in range(1, 6):
        for bits in itertools.product([Verdict.SUPPORTED, Verdict.REFUTED], repeat=k):
            chain = parse_chain(simple_chain(list(bits)))
            assert judge(chain) is brute_force_judge(bits)


def test_supported_iff_no_refuted_blocks():
    rng = random.Random(7)
    for _ in range(500):
        statuses = [rng.choice(list(Verdict)) for _ in range(rng.randint(1, 6))]
        chain = parse_chain(simple_chain(statuses))
        refuted_count = sum(1 for s in statuses if s is Verdict.REFUTED)
        assert (judge(chain) is Verdict.SUPPORTED) == (refuted_count == 0)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.sampled_from(list(Verdict)), min_size=1, max_size=8), st.data())
def test_monotonicity_and_permutation_invariance(statuses, data):
    base = judge(parse_chain(simple_chain(statuses)))

    # Permuting block statuses never changes the verdict.
    permuted = data.draw(st.permutations(statuses))
    assert judge(parse_chain(simple_chain(list(permuted)))) is base

    # Flipping any one status to Refuted yields Refuted, so a Refuted
    # verdict can never turn into Supported this way.
    position = data.draw(st.integers(min_value=0, max_value=len(statuses) - 1))
    flipped = list(statuses)
    flipped[position] = Verdict.REFUTED
    assert judge(parse_chain(simple_chain(flipped))) is Verdict.REFUTED
