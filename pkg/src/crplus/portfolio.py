"""Portfolio data model, validation and JSON file ingestion.

An obligor carries a default probability, factor loadings on the economic
sectors (index 0 is the idiosyncratic weight) and an integer-valued loss
severity distribution.  Portfolios are immutable after construction;
constructors coerce types, :func:`validate` checks the invariants, and
:func:`parse_portfolio` rejects any input with non-empty diagnostics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

WEIGHT_SUM_TOL = 1e-9
SEVERITY_SUM_TOL = 1e-12

IDIOSYNCRATIC = "idiosyncratic"


class PortfolioError(ValueError):
    """Malformed or invalid portfolio input."""


@dataclass(frozen=True)
class SeverityDist:
    """Loss severity as a finite pmf on non-negative integers.

    ``{v: 1.0}`` represents a deterministic severity v; severity 0 is allowed
    (used by the write-off conditioning variant).
    """

    probabilities: dict

    def __post_init__(self):
        probs = {int(x): float(p) for x, p in self.probabilities.items()}
        object.__setattr__(self, "probabilities", probs)

    @property
    def deterministic(self):
        return len(self.probabilities) == 1

    def mean(self):
        return sum(x * p for x, p in self.probabilities.items())

    def second_moment(self):
        return sum(x * x * p for x, p in self.probabilities.items())

    def values_and_probs(self):
        items = sorted(self.probabilities.items())
        return np.array([x for x, _ in items]), np.array([p for _, p in items])


ZERO_SEVERITY = SeverityDist({0: 1.0})


@dataclass(frozen=True)
class Obligor:
    id: str
    pd: float
    weights: np.ndarray  # length N+1, index 0 idiosyncratic
    severity: SeverityDist

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "pd", float(self.pd))

    def __eq__(self, other):
        if not isinstance(other, Obligor):
            return NotImplemented
        return (
            self.id == other.id
            and self.pd == other.pd
            and np.array_equal(self.weights, other.weights)
            and self.severity == other.severity
        )


@dataclass(frozen=True)
class Sector:
    id: str
    alpha: float  # Gamma shape; unit mean implies scale 1/alpha

    def __post_init__(self):
        object.__setattr__(self, "alpha", float(self.alpha))


@dataclass(frozen=True)
class Portfolio:
    sectors: tuple
    obligors: tuple

    def __post_init__(self):
        object.__setattr__(self, "sectors", tuple(self.sectors))
        object.__setattr__(self, "obligors", tuple(self.obligors))

    @property
    def n_sectors(self):
        return len(self.sectors)

    def obligor(self, obligor_id):
        for o in self.obligors:
            if o.id == obligor_id:
                return o
        raise PortfolioError(f"unknown obligor {obligor_id!r}")

    def expected_loss(self):
        return sum(o.pd * o.severity.mean() for o in self.obligors)

    def with_severity(self, obligor_id, severity):
        """Copy of the portfolio with one obligor's severity replaced."""
        self.obligor(obligor_id)
        obligors = tuple(
            Obligor(o.id, o.pd, o.weights, severity) if o.id == obligor_id else o
            for o in self.obligors
        )
        return Portfolio(self.sectors, obligors)


def validate(p):
    """Diagnostics for a portfolio; empty list iff all invariants hold.

    Each diagnostic names the violating entity and the rule it breaks.
    """
    diagnostics = []
    seen = set()
    for s in p.sectors:
        if not (np.isfinite(s.alpha) and s.alpha > 0):
            diagnostics.append(f"sector {s.id}: alpha must be positive and finite (got {s.alpha})")
        if s.id in seen:
            diagnostics.append(f"sector {s.id}: duplicate sector id")
        seen.add(s.id)
    seen = set()
    for o in p.obligors:
        if o.id in seen:
            diagnostics.append(f"obligor {o.id}: duplicate obligor id")
        seen.add(o.id)
        if o.pd < 0:
            diagnostics.append(f"obligor {o.id}: pd must be non-negative (got {o.pd})")
        if o.weights.size != p.n_sectors + 1:
            diagnostics.append(
                f"obligor {o.id}: weight vector length {o.weights.size} != {p.n_sectors + 1}"
            )
        if np.any(o.weights < 0) or np.any(o.weights > 1):
            diagnostics.append(f"obligor {o.id}: weights must lie in [0, 1]")
        elif abs(o.weights.sum() - 1.0) > WEIGHT_SUM_TOL:
            diagnostics.append(f"obligor {o.id}: weights sum to {o.weights.sum()!r}, not 1")
        for x, pr in o.severity.probabilities.items():
            if x < 0:
                diagnostics.append(f"obligor {o.id}: severity support point {x} is negative")
            if not 0.0 <= pr <= 1.0:
                diagnostics.append(f"obligor {o.id}: severity probability {pr!r} outside [0, 1]")
        total = sum(o.severity.probabilities.values())
        if abs(total - 1.0) > SEVERITY_SUM_TOL:
            diagnostics.append(f"obligor {o.id}: severity probabilities sum to {total!r}, not 1")
    return diagnostics


def _parse_severity(spec, where):
    if not isinstance(spec, dict) or "type" not in spec:
        raise PortfolioError(f"{where}: severity must be an object with a 'type' field")
    kind = spec["type"]
    if kind == "deterministic":
        value = spec.get("value")
        if not isinstance(value, int) or value < 0:
            raise PortfolioError(
                f"{where}: deterministic severity needs a non-negative integer 'value'"
            )
        return SeverityDist({value: 1.0})
    if kind == "pmf":
        values = spec.get("values")
        if not isinstance(values, list) or not values:
            raise PortfolioError(f"{where}: pmf severity needs a non-empty 'values' list")
        probs = {}
        for pair in values:
            if not (isinstance(pair, list) and len(pair) == 2):
                raise PortfolioError(f"{where}: pmf entries must be [loss, probability] pairs")
            x, pr = pair
            if not isinstance(x, int) or x < 0:
                raise PortfolioError(f"{where}: pmf loss {x!r} is not a non-negative integer")
            probs[x] = probs.get(x, 0.0) + float(pr)
        return SeverityDist(probs)
    raise PortfolioError(f"{where}: unknown severity type {kind!r}")


def parse_portfolio(text, renormalize_weights=False):
    """Parse and validate a portfolio from its JSON file content.

    Omitted weight keys default to 0; "idiosyncratic" maps to weight index 0.
    With ``renormalize_weights`` the weight vectors are rescaled to sum to 1
    instead of rejecting near-miss inputs (off by default on purpose).
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PortfolioError(f"malformed portfolio JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise PortfolioError("portfolio file must contain a JSON object")

    sectors = []
    for entry in doc.get("sectors", []):
        if not isinstance(entry, dict) or "id" not in entry or "alpha" not in entry:
            raise PortfolioError("each sector needs 'id' and 'alpha'")
        sectors.append(Sector(str(entry["id"]), float(entry["alpha"])))
    sector_index = {s.id: k + 1 for k, s in enumerate(sectors)}

    obligors = []
    for entry in doc.get("obligors", []):
        if not isinstance(entry, dict) or "id" not in entry:
            raise PortfolioError("each obligor needs an 'id'")
        oid = str(entry["id"])
        if "pd" not in entry or "severity" not in entry:
            raise PortfolioError(f"obligor {oid}: 'pd' and 'severity' are required")
        weights = np.zeros(len(sectors) + 1)
        for key, w in (entry.get("weights") or {}).items():
            if key == IDIOSYNCRATIC:
                weights[0] = float(w)
            elif key in sector_index:
                weights[sector_index[key]] = float(w)
            else:
                raise PortfolioError(f"obligor {oid}: unknown sector id {key!r} in weights")
        if renormalize_weights and weights.sum() > 0:
            weights = weights / weights.sum()
        severity = _parse_severity(entry["severity"], f"obligor {oid}")
        obligors.append(Obligor(oid, float(entry["pd"]), weights, severity))

    portfolio = Portfolio(tuple(sectors), tuple(obligors))
    diagnostics = validate(portfolio)
    if diagnostics:
        raise PortfolioError("invalid portfolio: " + "; ".join(diagnostics))
    return portfolio


def serialize_portfolio(p):
    """Inverse of parse_portfolio on valid portfolios."""
    doc = {
        "sectors": [{"id": s.id, "alpha": s.alpha} for s in p.sectors],
        "obligors": [],
    }
    for o in p.obligors:
        weights = {}
        if o.weights[0] != 0.0:
            weights[IDIOSYNCRATIC] = float(o.weights[0])
        for k, s in enumerate(p.sectors):
            if o.weights[k + 1] != 0.0:
                weights[s.id] = float(o.weights[k + 1])
        if o.severity.deterministic:
            (value,) = o.severity.probabilities
            severity = {"type": "deterministic", "value": value}
        else:
            severity = {
                "type": "pmf",
                "values": [[x, pr] for x, pr in sorted(o.severity.probabilities.items())],
            }
        doc["obligors"].append(
            {"id": o.id, "pd": o.pd, "weights": weights, "severity": severity}
        )
    return json.dumps(doc, indent=2) + "\n"
