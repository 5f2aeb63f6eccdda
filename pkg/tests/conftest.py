import numpy as np
import pytest

from qpreduce.torus import TorusMap


def random_map(rng, rows, cols, d, degree, period=1, real=False, scale=1.0):
    """Trigonometric polynomial with all |k|_inf <= degree populated."""
    grid = np.arange(-degree, degree + 1)
    mesh = np.meshgrid(*([grid] * d), indexing="ij")
    ks = np.stack([m.ravel() for m in mesh], axis=-1)
    cs = scale * (rng.normal(size=(len(ks), rows, cols))
                  + 1j * rng.normal(size=(len(ks), rows, cols)))
    tmap = TorusMap(ks, cs, period, real=False)
    if real:
        tmap = (tmap + tmap.conjugate()).scale(0.5)
        tmap = TorusMap(tmap.ks, tmap.cs, period, real=True)
    return tmap


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


GL_TOKENS = ("real", "real2", "zero", "rot", "half", "half2", "nonres", "nonres2", "nilp",
             "hyper")
CLASS_TOKENS = {"real": ("real", "real2", "zero", "rot", "nilp", "hyper"),
                "half": ("half", "half2"), "nonres": ("nonres", "nonres2")}


def random_gl_recipe(rng, max_n=6, must_include=None):
    """Token list of total size <= max_n; ``must_include`` names a class to cover."""
    from qpreduce.planted import TOKEN_SIZE
    recipe = []
    if must_include is not None:
        recipe.append(str(rng.choice(CLASS_TOKENS[must_include])))
    budget = max_n - sum(TOKEN_SIZE[t] for t in recipe)
    n_more = int(rng.integers(0, 3))
    for _ in range(n_more):
        options = [t for t in GL_TOKENS if TOKEN_SIZE[t] <= budget]
        if not options:
            break
        t = str(rng.choice(options))
        recipe.append(t)
        budget -= TOKEN_SIZE[t]
    return recipe, sum(TOKEN_SIZE[t] for t in recipe)
