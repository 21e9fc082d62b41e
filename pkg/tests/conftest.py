import pytest

from skipmon import compose, load_model

# A hidden chain: letter `a` can move to two different states, so observing
# it does not reveal the state.  Half of the runs end in an a-loop where the
# property can never be settled.
BRANCHING_MODEL = """\
[mc]
initial s0
trans s0 a 1/2 s1
trans s0 a 1/2 s2
trans s1 a 1 s1
trans s2 a 1/2 s2
trans s2 b 1/2 s2
[dfa]
initial q0
accepting f
trans q0 a q0
trans q0 b f
trans f a f
trans f b f
"""

# Non-hidden: from A the first letter decides, but the c-branch cycles back,
# so waiting too long mixes inequivalent continuations.
CYCLE_MODEL = """\
[mc]
initial A
trans A b 1/2 B
trans A c 1/2 C
trans B b 1 B
trans C a 1 A
[dfa]
initial q0
accepting f
trans q0 a q0
trans q0 b q0
trans q0 c f
trans f a f
trans f b f
trans f c f
"""

# Non-hidden: A may linger on an a-loop before committing to B or C; skips
# are safe forever, so the optimal policy procrastinates indefinitely.
LAZY_MODEL = """\
[mc]
initial A
trans A a 1/3 A
trans A b 1/3 B
trans A c 1/3 C
trans B b 1 B
trans C c 1 C
[dfa]
initial q0
accepting f
trans q0 a q0
trans q0 b q0
trans q0 c f
trans f a f
trans f b f
trans f c f
"""


def product_from(text):
    mc, dfa = load_model(text)
    return compose(mc, dfa)


def pair(product, s_name, q_name):
    return product.pair_index(
        product.mc.state_index[s_name], product.dfa.state_index[q_name]
    )


def belief(product, *names):
    return frozenset(pair(product, s, q) for s, q in names)


@pytest.fixture(scope="session")
def branching():
    return product_from(BRANCHING_MODEL)


@pytest.fixture(scope="session")
def cycle():
    return product_from(CYCLE_MODEL)


@pytest.fixture(scope="session")
def lazy():
    return product_from(LAZY_MODEL)
