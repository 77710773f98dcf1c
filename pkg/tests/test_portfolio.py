import json

import numpy as np
import pytest

from crplus import portfolio as pf
from crplus.portfolio import Obligor, Portfolio, PortfolioError, Sector, SeverityDist

from conftest import make_reference_portfolio

MINIMAL = {
    "sectors": [{"id": "s1", "alpha": 1.0}],
    "obligors": [{
        "id": "A", "pd": 0.1,
        "weights": {"s1": 1.0},
        "severity": {"type": "deterministic", "value": 1},
    }],
}


def test_parse_minimal_portfolio():
    p = pf.parse_portfolio(json.dumps(MINIMAL))
    assert p.n_sectors == 1
    o = p.obligor("A")
    assert o.pd == 0.1
    np.testing.assert_array_equal(o.weights, [0.0, 1.0])
    assert o.severity.deterministic and o.severity.mean() == 1.0


def test_parse_weight_sum_violation():
    doc = json.loads(json.dumps(MINIMAL))
    doc["obligors"][0]["weights"] = {"s1": 0.9}
    with pytest.raises(PortfolioError, match="weights sum"):
        pf.parse_portfolio(json.dumps(doc))


def test_parse_pmf_severity():
    doc = json.loads(json.dumps(MINIMAL))
    doc["obligors"][0]["severity"] = {"type": "pmf", "values": [[1, 0.5], [2, 0.5]]}
    p = pf.parse_portfolio(json.dumps(doc))
    assert p.obligor("A").severity.mean() == pytest.approx(1.5)


def test_parse_unknown_sector_reference():
    doc = json.loads(json.dumps(MINIMAL))
    doc["obligors"][0]["weights"] = {"nope": 1.0}
    with pytest.raises(PortfolioError, match="unknown sector"):
        pf.parse_portfolio(json.dumps(doc))


def test_parse_negative_pd():
    doc = json.loads(json.dumps(MINIMAL))
    doc["obligors"][0]["pd"] = -0.1
    with pytest.raises(PortfolioError, match="pd"):
        pf.parse_portfolio(json.dumps(doc))


def test_parse_severity_not_summing_to_one():
    doc = json.loads(json.dumps(MINIMAL))
    doc["obligors"][0]["severity"] = {"type": "pmf", "values": [[1, 0.5], [2, 0.4]]}
    with pytest.raises(PortfolioError, match="severity"):
        pf.parse_portfolio(json.dumps(doc))


def test_parse_malformed_json():
    with pytest.raises(PortfolioError, match="malformed"):
        pf.parse_portfolio("{not json")


def test_parse_renormalize_flag():
    doc = json.loads(json.dumps(MINIMAL))
    doc["obligors"][0]["weights"] = {"idiosyncratic": 0.2, "s1": 0.6}
    with pytest.raises(PortfolioError):
        pf.parse_portfolio(json.dumps(doc))
    p = pf.parse_portfolio(json.dumps(doc), renormalize_weights=True)
    np.testing.assert_allclose(p.obligor("A").weights, [0.25, 0.75])


def test_validate_valid_portfolio_is_clean():
    assert pf.validate(make_reference_portfolio()) == []


def test_validate_zero_alpha_sector():
    p = Portfolio((Sector("bad", 0.0),),
                  (Obligor("A", 0.1, [0.0, 1.0], SeverityDist({1: 1.0})),))
    diags = pf.validate(p)
    assert len(diags) == 1 and "bad" in diags[0] and "alpha" in diags[0]


def test_validate_duplicate_obligor_id():
    o = Obligor("A", 0.1, [1.0], SeverityDist({1: 1.0}))
    diags = pf.validate(Portfolio((), (o, o)))
    assert len(diags) == 1 and "duplicate" in diags[0] and "A" in diags[0]


def test_round_trip_identity():
    p = make_reference_portfolio()
    back = pf.parse_portfolio(pf.serialize_portfolio(p))
    assert back == p
    # and once more through the serializer: identical text
    assert pf.serialize_portfolio(back) == pf.serialize_portfolio(p)


def test_with_severity_replaces_one_obligor():
    p = make_reference_portfolio()
    q = p.with_severity("A", pf.ZERO_SEVERITY)
    assert q.obligor("A").severity.mean() == 0.0
    assert q.obligor("B") == p.obligor("B")
    with pytest.raises(PortfolioError, match="unknown obligor"):
        p.with_severity("nope", pf.ZERO_SEVERITY)


def test_zero_pd_obligor_is_allowed():
    p = Portfolio((), (Obligor("Z", 0.0, [1.0], SeverityDist({3: 1.0})),))
    assert pf.validate(p) == []
    assert p.expected_loss() == 0.0
