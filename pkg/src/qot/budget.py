"""Shot-count and campaign calculators from the Hoeffding bound.

All logs are natural.  Each Pauli coefficient estimate averages M independent
+/-1 outcomes, so one coefficient strays by more than eps with probability at
most 2 exp(-M eps^2 / 2); a union bound over the (4^k - 1) C(n, k)
coefficients gives the global failure probability.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

from .errors import InvalidArgument
from .schedule import naive_rounds


def _check(shots=None, eps=None, delta=None):
    if shots is not None and shots < 1:
        raise InvalidArgument(f"shots must be >= 1, got {shots}")
    if eps is not None and not eps > 0:
        raise InvalidArgument(f"eps must be positive, got {eps}")
    if delta is not None and not 0 < delta < 1:
        raise InvalidArgument(f"delta must lie in (0, 1), got {delta}")


def _coefficients(n: int, k: int, scope: str) -> int:
    if not 1 <= k <= n:
        raise InvalidArgument(f"need 1 <= k <= n, got n={n}, k={k}")
    per_subset = 4**k - 1
    if scope == "per_subset":
        return per_subset
    if scope == "global":
        return per_subset * math.comb(n, k)
    raise InvalidArgument(f"unknown scope {scope!r}")


def hoeffding_tail(shots: int, eps: float) -> float:
    _check(shots, eps)
    return 2 * math.exp(-shots * eps**2 / 2)


def failure_bound(shots: int, eps: float, n: int, k: int, scope: str = "global") -> float:
    _check(shots, eps)
    count = _coefficients(n, k, scope)
    # log space keeps huge C(n,k) from overflowing
    log_bound = math.log(2 * count) - shots * eps**2 / 2
    return 1.0 if log_bound >= 0 else math.exp(log_bound)


def shots_required(eps: float, delta: float, n: int, k: int, scope: str = "global") -> int:
    _check(eps=eps, delta=delta)
    count = _coefficients(n, k, scope)
    return max(1, math.ceil(2 / eps**2 * math.log(2 * count / delta)))


@dataclass(frozen=True)
class ShotBudget:
    strategy: str
    n: int
    k: int
    eps: float
    delta: float
    shots: int
    settings: int
    rounds: int
    cycle_seconds: float
    failure_bound: float

    @property
    def wallclock_seconds(self) -> float:
        return self.rounds * self.cycle_seconds

    def to_dict(self) -> dict:
        d = asdict(self)
        d["wallclock_seconds"] = self.wallclock_seconds
        d["wallclock_days"] = self.wallclock_seconds / 86400
        d["wallclock_weeks"] = self.wallclock_seconds / (7 * 86400)
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_dict())


def campaign(
    n: int,
    k: int,
    eps: float,
    delta: float,
    cycle_seconds: float = 0.25,
    strategy: str = "qot",
    shots: int | None = None,
) -> ShotBudget:
    """Shots, rounds and wall-clock time for one full data-taking campaign.

    qot runs the binary-family k=2 protocol (3 + 6 ceil(log2 n) settings) and
    sizes M for all coefficients at once.  naive does 9-setting tomography on
    n/2 disjoint pairs at a time; its M is sized per subset.
    """
    _check(shots, eps, delta)
    if cycle_seconds < 0:
        raise InvalidArgument("cycle time must be non-negative")
    if k != 2:
        raise InvalidArgument(f"campaign supports k=2 only, got k={k}")
    if n < 2:
        raise InvalidArgument(f"need n >= 2, got {n}")
    if strategy == "qot":
        scope = "global"
        if shots is None:
            shots = shots_required(eps, delta, n, k, scope)
        settings = 3 + 6 * (n - 1).bit_length()
        rounds = shots * settings
    elif strategy == "naive":
        scope = "per_subset"
        if shots is None:
            shots = shots_required(eps, delta, n, k, scope)
        rounds = naive_rounds(n, k, shots)
        settings = rounds // shots
    else:
        raise InvalidArgument(f"unknown strategy {strategy!r}")
    return ShotBudget(
        strategy, n, k, eps, delta, shots, settings, rounds, cycle_seconds,
        failure_bound(shots, eps, n, k, scope),
    )


def format_table(budgets) -> str:
    rows = [("strategy", "n", "M", "rounds", "P(fail) <=", "hours", "days", "weeks")]
    for b in budgets:
        s = b.wallclock_seconds
        rows.append((
            b.strategy, str(b.n), str(b.shots), f"{b.rounds:,}", f"{b.failure_bound:.4f}",
            f"{s / 3600:.1f}", f"{s / 86400:.2f}", f"{s / 604800:.2f}",
        ))
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in rows)
