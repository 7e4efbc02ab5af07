"""Solution encodings shared by the EA and the cross-network mapping."""
from __future__ import annotations

from dataclasses import dataclass, field

from .graph import EditSet, Graph, canon


class InvalidChromosomeError(ValueError):
    pass


@dataclass(frozen=True)
class EdgeChromosome:
    """Deception genome: ``rho`` additions followed by ``beta - rho`` deletions.

    Both parts are stored sorted, so equal edit sets compare equal. ``origin``
    records the source network of a transferred genome and is ignored by
    equality.
    """

    additions: tuple = ()
    deletions: tuple = ()
    origin: int | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "additions", tuple(sorted(canon(*e) for e in self.additions)))
        object.__setattr__(self, "deletions", tuple(sorted(canon(*e) for e in self.deletions)))

    @property
    def rho(self) -> int:
        return len(self.additions)

    @property
    def beta(self) -> int:
        return len(self.additions) + len(self.deletions)

    @property
    def genes(self) -> tuple:
        return self.additions + self.deletions

    def edit_set(self) -> EditSet:
        return EditSet(self.additions, self.deletions)

    def with_origin(self, origin) -> "EdgeChromosome":
        return EdgeChromosome(self.additions, self.deletions, origin)

    def validate(self, g: Graph, beta: int | None = None) -> None:
        problems = []
        if beta is not None and self.beta != beta:
            problems.append(f"length {self.beta} != beta {beta}")
        seen = set()
        for e in self.additions:
            if e[0] == e[1]:
                problems.append(f"self-loop addition {e}")
            elif e in g.edges:
                problems.append(f"addition {e} already an edge")
            if not (0 <= e[0] < g.node_count and 0 <= e[1] < g.node_count):
                problems.append(f"addition {e} out of range")
            if e in seen:
                problems.append(f"duplicate gene {e}")
            seen.add(e)
        for e in self.deletions:
            if e not in g.edges:
                problems.append(f"deletion {e} not an edge")
            if e in seen:
                problems.append(f"duplicate gene {e}")
            seen.add(e)
        if problems:
            raise InvalidChromosomeError("; ".join(problems))

    def is_valid(self, g: Graph, beta: int | None = None) -> bool:
        try:
            self.validate(g, beta)
        except InvalidChromosomeError:
            return False
        return True


@dataclass(frozen=True)
class SeedChromosome:
    """Influence-maximisation genome: a fixed-size set of seed nodes (sorted)."""

    seeds: tuple = ()
    origin: int | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(sorted(int(s) for s in self.seeds)))

    @property
    def beta(self) -> int:
        return len(self.seeds)

    @property
    def genes(self) -> tuple:
        return self.seeds

    def with_origin(self, origin) -> "SeedChromosome":
        return SeedChromosome(self.seeds, origin)

    def validate(self, g: Graph, beta: int | None = None) -> None:
        problems = []
        if beta is not None and len(self.seeds) != beta:
            problems.append(f"size {len(self.seeds)} != {beta}")
        if len(set(self.seeds)) != len(self.seeds):
            problems.append("duplicate seeds")
        if any(not (0 <= s < g.node_count) for s in self.seeds):
            problems.append("seed out of range")
        if problems:
            raise InvalidChromosomeError("; ".join(problems))

    def is_valid(self, g: Graph, beta: int | None = None) -> bool:
        try:
            self.validate(g, beta)
        except InvalidChromosomeError:
            return False
        return True


@dataclass
class RawEdgeSolution:
    """Possibly invalid deception genome (e.g. freshly mapped from another
    network). ``degenerate`` flags genes whose endpoints collapsed."""

    additions: list
    deletions: list
    degenerate: list = field(default_factory=list)
    origin: int | None = None


@dataclass
class RawSeedSolution:
    seeds: list
    duplicate: list = field(default_factory=list)
    origin: int | None = None


