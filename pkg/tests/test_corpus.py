import math

from conicbenders import corpus, verify
from conicbenders.model import validate


def test_corpus_is_deterministic():
    a = corpus.generate_corpus(4, seed=1)
    b = corpus.generate_corpus(4, seed=1)
    assert a == b


def test_corpus_shape_and_screening():
    for inst in corpus.generate_corpus(6, seed=2):
        assert inst.n <= 3 and len(inst.Y) <= 8 and inst.p in (1, 2)
        assert validate(inst) == []
        hinted = {i for i, _ in inst.slater_hints}
        for i, (margin, _, infeas) in enumerate(corpus.screen(inst)):
            if i in hinted:
                assert margin >= corpus.SLATER_MIN
            else:
                assert infeas >= corpus.INFEAS_MIN
                assert math.isinf(verify.perturbation_value(inst, inst.y_array(i), None))


def test_corpus_mixes_cone_blocks():
    kinds = {tuple(b.kind for b in inst.cone.blocks) for inst in corpus.generate_corpus(4, seed=3)}
    assert ("orthant",) in kinds and ("orthant", "soc") in kinds
