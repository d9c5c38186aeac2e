import pytest

from episwarm.config import from_dict


def small_config(**overrides):
    """Compact five-hypothesis scenario used across engine-level tests."""
    base = {
        "space": {"hypotheses": 5},
        "outcomes": 5,
        "likelihood": {"kind": "categorical", "peak": 0.7},
        "task": {"true_hypothesis": 0},
        "population": {"agents": 8},
        "rating": {"r0": 0.5, "sigma": 0.01},
        "evolution": {"tau_rep": 0.8, "tau_ext": 0.1, "grace": 5, "lambda": 0.45,
                      "sigma_mut": 0.05, "n_star": 32},
        "run": {"horizon": 60, "seed": 123},
    }
    for section, fields in overrides.items():
        if isinstance(fields, dict):
            base.setdefault(section, {}).update(fields)
        else:
            base[section] = fields
    return from_dict(base)


@pytest.fixture
def small_cfg():
    return small_config()
