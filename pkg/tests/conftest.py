from dictopt import dictionary as D


def sample_dictionary():
    return D.Dictionary([
        D.Constant(),
        D.Coordinate(1),
        D.Monomial([1, 0, 2], trainable=True),
        D.GaussianRBF([0.2, -0.1, 0.3], 0.8),
        D.SineFreq([0.7, -0.4, 0.0], 0.3),
        D.CosineFreq([0.0, 1.1, 0.5], -0.2),
        D.ExpRate(-0.6, index=2),
        D.Product([D.ExpRate(0.4, index=0), D.Monomial([0, 2, 0]), D.SineFreq([0.0, 0.0, 1.3], 0.1)]),
    ])
