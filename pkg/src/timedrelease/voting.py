"""Strategic-voting experiment over strict (possibly truncated) ballots.

Ballot files use the PrefLib strict-order layout (SOC/SOI)::

    # NUMBER ALTERNATIVES: 3
    # ALTERNATIVE NAME 1: Alice
    2: 1,3
    1: 2

Ties in any score are broken towards the lowest alternative id.
"""
from __future__ import annotations

import csv
import io
import itertools
import random
import re
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

RULES = ("plurality", "borda_truncated", "irv")

_BALLOT_RE = re.compile(r"^\s*(\d+)\s*:\s*(.*?)\s*$")
_HEADER_RE = re.compile(r"^#\s*([^:]+?)\s*:\s*(.*?)\s*$")
_NAME_RE = re.compile(r"^ALTERNATIVE NAME (\d+)$")


class VotingError(ValueError):
    pass


class ParseError(VotingError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class DuplicateAlternativeInBallot(ParseError):
    pass


class EmptyProfile(VotingError):
    pass


class BadPercent(VotingError):
    pass


@dataclass
class PreferenceProfile:
    n_alternatives: int
    ballots: list[tuple[int, ...]]
    weights: list[int]
    names: dict[int, str] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.ballots) != len(self.weights):
            raise VotingError("one weight per ballot")
        for b in self.ballots:
            _check_ballot(b, self.n_alternatives)

    @property
    def n_voters(self) -> int:
        return sum(self.weights)

    def voters(self) -> list[tuple[int, ...]]:
        """One ballot per voter, in file order."""
        return [b for b, w in zip(self.ballots, self.weights) for _ in range(w)]

    def normalized(self) -> "PreferenceProfile":
        counts = Counter()
        for b, w in zip(self.ballots, self.weights):
            counts[b] += w
        items = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        return PreferenceProfile(self.n_alternatives, [b for b, _ in items], [w for _, w in items], dict(self.names))

    def serialize(self) -> str:
        lines = [f"# NUMBER ALTERNATIVES: {self.n_alternatives}"]
        lines += [f"# ALTERNATIVE NAME {i}: {self.names[i]}" for i in sorted(self.names)]
        lines.append(f"# NUMBER VOTERS: {self.n_voters}")
        lines += [f"{w}: {','.join(map(str, b))}" for b, w in zip(self.ballots, self.weights)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_voters(cls, n_alternatives: int, voters) -> "PreferenceProfile":
        voters = [tuple(v) for v in voters]
        return cls(n_alternatives, voters, [1] * len(voters))


def _check_ballot(ballot, k: int, line: int | None = None) -> None:
    if not ballot:
        raise ParseError("empty ballot", line)
    if len(set(ballot)) != len(ballot):
        raise DuplicateAlternativeInBallot(f"alternative repeated in ballot {list(ballot)}", line)
    for a in ballot:
        if not 1 <= a <= k:
            raise ParseError(f"alternative {a} outside 1..{k}", line)


def parse_ballot_file(data) -> PreferenceProfile:
    if isinstance(data, (bytes, bytearray)):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"not UTF-8: {exc}") from None
    k = None
    names: dict[int, str] = {}
    ballots, weights = [], []
    for lineno, raw in enumerate(data.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            m = _HEADER_RE.match(line)
            if not m:
                continue
            key, value = m.group(1).upper(), m.group(2)
            if key == "NUMBER ALTERNATIVES":
                if not value.isdigit() or int(value) < 1:
                    raise ParseError(f"bad alternative count {value!r}", lineno)
                k = int(value)
            elif nm := _NAME_RE.match(key):
                names[int(nm.group(1))] = value
            continue
        if k is None:
            raise ParseError("ballot before '# NUMBER ALTERNATIVES' header", lineno)
        m = _BALLOT_RE.match(line)
        if not m:
            raise ParseError(f"expected 'count: a,b,...', got {line!r}", lineno)
        if "{" in m.group(2):
            raise ParseError("weak orders ({...}) are not supported", lineno)
        try:
            ballot = tuple(int(x) for x in m.group(2).split(","))
        except ValueError:
            raise ParseError(f"non-integer alternative in {m.group(2)!r}", lineno) from None
        count = int(m.group(1))
        if count < 1:
            raise ParseError("ballot count must be positive", lineno)
        _check_ballot(ballot, k, lineno)
        ballots.append(ballot)
        weights.append(count)
    if k is None:
        raise ParseError("missing '# NUMBER ALTERNATIVES' header")
    return PreferenceProfile(k, ballots, weights, names)


# -- rules ---------------------------------------------------------------------

def _weighted(profile_or_voters):
    if isinstance(profile_or_voters, PreferenceProfile):
        return profile_or_voters.n_alternatives, list(zip(profile_or_voters.ballots, profile_or_voters.weights))
    raise TypeError("expected a PreferenceProfile")


def _rank(k: int, weighted, rule: str) -> list[int]:
    if not weighted:
        raise EmptyProfile("no ballots")
    if rule == "plurality":
        score = [0] * (k + 1)
        for b, w in weighted:
            score[b[0]] += w
    elif rule == "borda_truncated":
        score = [0] * (k + 1)
        for b, w in weighted:
            for pos, a in enumerate(b):
                score[a] += w * (k - 1 - pos)
    elif rule == "irv":
        return _irv_ranking(k, weighted)
    else:
        raise VotingError(f"unknown rule {rule!r}")
    return sorted(range(1, k + 1), key=lambda a: (-score[a], a))


def _irv_ranking(k: int, weighted) -> list[int]:
    remaining = set(range(1, k + 1))
    eliminated = []
    while len(remaining) > 1:
        tally = dict.fromkeys(remaining, 0)
        for b, w in weighted:
            for a in b:
                if a in remaining:
                    tally[a] += w
                    break
        # lowest tally goes; among ties the highest id goes first
        loser = min(remaining, key=lambda a: (tally[a], -a))
        remaining.remove(loser)
        eliminated.append(loser)
    return [remaining.pop()] + eliminated[::-1]


def aggregate_ranking(profile: PreferenceProfile, rule: str = "plurality") -> list[int]:
    k, weighted = _weighted(profile)
    return _rank(k, weighted, rule)


def winner(profile: PreferenceProfile, rule: str = "plurality") -> int:
    return aggregate_ranking(profile, rule)[0]


def malicious_transform(true_ballot, sincere_aggregate) -> tuple[int, ...]:
    """Drop every alternative the sincere aggregate ranks above this voter's
    first choice."""
    if not true_ballot:
        raise VotingError("empty ballot")
    first = true_ballot[0]
    above = set(sincere_aggregate[: list(sincere_aggregate).index(first)])
    return tuple(a for a in true_ballot if a not in above)


# -- simulation ----------------------------------------------------------------

@dataclass(frozen=True)
class SimResult:
    l: int
    iterations: int
    winner_change_count: int

    @property
    def probability(self) -> Fraction:
        return Fraction(self.winner_change_count, self.iterations)


def n_malicious(n_voters: int, l_percent: int) -> int:
    return (100 - l_percent) * n_voters // 100


def sample_malicious_sets(n_voters: int, l_percent: int, iterations: int, seed) -> list[list[int]]:
    """The malicious voter sets ``simulate`` draws, one RNG stream per iteration."""
    m = n_malicious(n_voters, l_percent)
    return [sorted(random.Random(f"{seed}:{l_percent}:{i}").sample(range(n_voters), m))
            for i in range(iterations)]


def winner_changes(k: int, voters, malicious, rule: str = "plurality") -> bool:
    mal = set(malicious)
    sincere = [(b, 1) for j, b in enumerate(voters) if j not in mal]
    agg = _rank(k, sincere, rule)
    recorded = sincere + [(malicious_transform(voters[j], agg), 1) for j in sorted(mal)]
    return _rank(k, recorded, rule)[0] != agg[0]


def simulate(profile: PreferenceProfile, l_percent: int, iterations: int = 100, rule: str = "plurality",
             seed=0, *, exhaustive: bool = False) -> SimResult:
    """Winner-change frequency when ``100 - l_percent`` % of voters turn malicious.

    ``exhaustive=True`` enumerates every malicious set instead of sampling.
    """
    if not isinstance(l_percent, int) or not 1 <= l_percent <= 100:
        raise BadPercent(f"l must be an integer in 1..100, got {l_percent!r}")
    voters = profile.voters()
    if not voters:
        raise EmptyProfile("no ballots")
    k = profile.n_alternatives
    if exhaustive:
        sets = itertools.combinations(range(len(voters)), n_malicious(len(voters), l_percent))
    else:
        sets = sample_malicious_sets(len(voters), l_percent, iterations, seed)
    total = changes = 0
    for mal in sets:
        total += 1
        changes += winner_changes(k, voters, mal, rule)
    return SimResult(l_percent, total, changes)


def sweep(profile: PreferenceProfile, rule: str = "plurality", seed=0, iterations: int = 100,
          *, exhaustive: bool = False, workers: int = 1) -> list[SimResult]:
    """``simulate`` for l = 1..100."""
    levels = list(range(1, 101))
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(workers) as pool:
            futures = [pool.submit(simulate, profile, l, iterations, rule, seed, exhaustive=exhaustive)
                       for l in levels]
            return [f.result() for f in futures]
    return [simulate(profile, l, iterations, rule, seed, exhaustive=exhaustive) for l in levels]


def sweep_csv(results: list[SimResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["l", "iterations", "changes", "probability"])
    for r in results:
        w.writerow([r.l, r.iterations, r.winner_change_count, f"{float(r.probability):.6f}"])
    return buf.getvalue()
