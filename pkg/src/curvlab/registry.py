"""Named charts, distributions and immersions resolved from a configuration."""

from __future__ import annotations

from dataclasses import dataclass, field

from .adapted import DistributionSet
from .errors import ConfigError
from .expr import ScalarField
from .geometry import MetricChart
from .immersion import ImmersionSpec


@dataclass
class DistributionRecord:
    name: str
    manifold: str
    fields: tuple[tuple[ScalarField, ...], ...]


@dataclass
class Registry:
    charts: dict[str, MetricChart] = field(default_factory=dict)
    distributions: dict[str, DistributionRecord] = field(default_factory=dict)
    immersions: dict[str, ImmersionSpec] = field(default_factory=dict)
    immersion_ambient_distribution: dict[str, str | None] = field(default_factory=dict)

    def chart(self, name: str) -> MetricChart:
        if name in self.charts:
            return self.charts[name]
        raise ConfigError(f"unknown manifold {name!r}")

    def immersion(self, name: str) -> ImmersionSpec:
        if name in self.immersions:
            return self.immersions[name]
        raise ConfigError(f"unknown immersion {name!r}")

    def distribution_set(self, names, manifold: str | None = None) -> DistributionSet:
        """Bundle named distributions that live on one manifold."""
        names = list(names)
        if not names:
            raise ConfigError("at least one distribution is required")
        recs = []
        for n in names:
            if n not in self.distributions:
                raise ConfigError(f"unknown distribution {n!r}")
            recs.append(self.distributions[n])
        charts = {r.manifold for r in recs}
        if len(charts) != 1:
            raise ConfigError(f"distributions {names} live on different manifolds {sorted(charts)}")
        chart_name = charts.pop()
        if manifold is not None and chart_name != manifold:
            raise ConfigError(f"distributions {names} are declared on {chart_name!r}, "
                              f"not on {manifold!r}")
        return DistributionSet(self.chart(chart_name), tuple(names), tuple(r.fields for r in recs))

    def immersion_with(self, name: str, names=()) -> ImmersionSpec:
        """Immersion with the listed source distributions and its ambient distribution attached."""
        spec = self.immersion(name)
        ds = self.distribution_set(names, spec.source.name) if names else None
        amb = self.immersion_ambient_distribution.get(name)
        ads = self.distribution_set([amb], spec.ambient.name) if amb else None
        return spec.with_distributions(ds, ads)
