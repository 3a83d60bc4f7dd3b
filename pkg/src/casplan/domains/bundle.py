"""Domain bundle: everything a trial needs, built from one config file."""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from typing import Callable

import yaml

from ..cas import (CAS, AutonomyCost, AutonomyProfile, FeedbackProfile,
                   HumanCost, HumanTransition, LevelSet)
from ..feedback import FeatureProjection
from ..oracle import OracleSpec, projected_lambda
from ..ssp import SSP


class ConfigError(ValueError):
    """Domain configuration file is malformed or inconsistent."""


def load_config(path=None, domain: str | None = None) -> dict:
    """Load a domain config from a path, or the packaged default."""
    if path is None:
        if domain is None:
            raise ConfigError("either a config path or a domain name is required")
        ref = resources.files("casplan.configs") / f"{domain}.yaml"
        text = ref.read_text()
    else:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        cfg = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from exc
    if not isinstance(cfg, dict) or "domain" not in cfg:
        raise ConfigError("config must be a mapping with a 'domain' key")
    return cfg


@dataclass
class DomainBundle:
    """A planning problem plus its simulated human and learning hooks."""

    name: str
    ssp: SSP
    levels: LevelSet
    kappa0: AutonomyProfile
    mu: AutonomyCost
    rho: HumanCost
    tau: HumanTransition
    weights: tuple
    start_level: int
    projection: FeatureProjection
    oracle: OracleSpec
    state_names: list
    action_names: list
    task_states: list
    retask: Callable | None = None   # (start, goal) -> DomainBundle
    _bucket_members: dict | None = field(default=None, repr=False)
    _reference_lambda: FeedbackProfile | None = field(default=None, repr=False)

    @property
    def pairs(self):
        return [(s, a) for s in range(self.ssp.n_states) if s != self.ssp.goal
                for a in range(self.ssp.n_actions)]

    def bucket_members(self) -> dict:
        """Map agent bucket -> list of member (state, action) pairs."""
        if self._bucket_members is None:
            members: dict = {}
            for s, a in self.pairs:
                members.setdefault(self.projection(s, a), []).append((s, a))
            self._bucket_members = members
        return self._bucket_members

    def reference_lambda(self) -> FeedbackProfile:
        """Ground-truth profile projected onto agent-visible buckets."""
        if self._reference_lambda is None:
            self._reference_lambda = projected_lambda(
                self.oracle, self.projection, self.pairs)
        return self._reference_lambda

    def make_cas(self, lam: FeedbackProfile,
                 kappa: AutonomyProfile | None = None) -> CAS:
        return CAS(domain=self.ssp, levels=self.levels,
                   kappa=kappa if kappa is not None else self.kappa0,
                   mu=self.mu, lam=lam, rho=self.rho, tau=self.tau,
                   project=self.projection, weights=self.weights,
                   start_level=self.start_level)

    def fresh_kappa(self) -> AutonomyProfile:
        return self.kappa0.copy()
