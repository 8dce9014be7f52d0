"""Run configuration: one flat, commented ``key: value`` file (YAML subset).

Precedence is defaults < config file < command-line flags.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from ._io import write_text
from .corpus import FormatConfig, Severity, SplitMode
from .matching import PARTIAL_RULES
from .optimizer import DEConfig
from .scoring import EMPTY_RULES, WEIGHT_FLOOR, SeverityWeights
from .topics import TopicModelConfig


class ConfigError(ValueError):
    pass


def _opt(default, help, **kw):
    return field(default=default, metadata={"help": help, **kw})


@dataclass
class RunConfig:
    mode: str = _opt("timeseries", "split protocol: timeseries (9 rounds) or fixed8020")
    seed: int = _opt(0, "master seed; every stage seed is derived from it")
    jobs: int = _opt(1, "worker threads for the per-K topic fits")
    min_fixed: int = _opt(10, "drop developers who fixed fewer reports than this")
    delimiter: str = _opt(",", "CSV delimiter of input files")
    date_format: str = _opt("%Y-%m-%d", "strptime format of open/closed dates")
    stoplist: Optional[str] = _opt(None, "stop-word file, one term per line (null: bundled English list)")
    lemma_exceptions: Optional[str] = _opt(None, "lemmatizer exception table, form<TAB>lemma (null: bundled)")
    min_df: int = _opt(2, "minimum document frequency of a vocabulary term")
    max_df_fraction: float = _opt(0.5, "maximum fraction of documents a term may appear in")
    k_min: int = _opt(1, "smallest topic count tried")
    k_max: int = _opt(15, "largest topic count tried")
    lda_alpha: Optional[float] = _opt(None, "document-topic prior (null: 50 / K)")
    lda_beta: float = _opt(0.01, "topic-word prior")
    lda_iterations: int = _opt(500, "Gibbs sweeps per fit")
    lda_burn_in: int = _opt(300, "sweeps discarded before averaging")
    lda_thin: int = _opt(10, "average every n-th sweep after burn-in")
    coherence_top_n: int = _opt(10, "top terms per topic used for coherence")
    de_pop: int = _opt(30, "differential evolution population size")
    de_f: float = _opt(0.8, "differential weight F")
    de_cr: float = _opt(0.9, "crossover rate CR")
    de_gens: int = _opt(100, "generations")
    weight_floor: float = _opt(WEIGHT_FLOOR, "lower bound for each score weight (at least 1e-4)")
    validation_fraction: float = _opt(0.1, "chronological tail of the training data used as DE objective")
    fitness_on_test: bool = _opt(False, "score DE candidates on the test split itself (leaks test data)")
    partial_rule: str = _opt("dr_sum", "developers for the last short chunk: dr_sum or least_loaded")
    empty_rule: str = _opt("zero", "score without history in a topic: zero or topic_mean")
    time_cap: Optional[float] = _opt(None, "fix-time cap in days for the time score (null: 95th percentile)")
    severity_weights: Optional[list] = _opt(None, "8 weights blocker..enhancement (null: 0.29 .. 0.02)")
    baseline: bool = _opt(True, "also cost a seeded uniform-random assignment of each test split")

    def validate(self) -> "RunConfig":
        try:
            SplitMode(self.mode)
        except ValueError:
            raise ConfigError(f"mode must be one of {[m.value for m in SplitMode]}") from None
        if not 1 <= self.k_min <= self.k_max:
            raise ConfigError("need 1 <= k_min <= k_max")
        if self.partial_rule not in PARTIAL_RULES:
            raise ConfigError(f"partial_rule must be one of {PARTIAL_RULES}")
        if self.empty_rule not in EMPTY_RULES:
            raise ConfigError(f"empty_rule must be one of {EMPTY_RULES}")
        if not 0 < self.validation_fraction < 1:
            raise ConfigError("validation_fraction must be in (0, 1)")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.time_cap is not None and self.time_cap <= 0:
            raise ConfigError("time_cap must be positive")
        try:
            self.de_config(0)
            self.topic_template(0)
            self.sev_weights()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self

    @property
    def k_range(self) -> range:
        return range(self.k_min, self.k_max + 1)

    @property
    def format(self) -> FormatConfig:
        return FormatConfig(delimiter=self.delimiter, date_format=self.date_format)

    def topic_template(self, seed: int) -> TopicModelConfig:
        return TopicModelConfig(
            K=1, alpha=self.lda_alpha, beta=self.lda_beta, iterations=self.lda_iterations,
            burn_in=self.lda_burn_in, thin=self.lda_thin, seed=seed,
        )

    def de_config(self, seed: int) -> DEConfig:
        return DEConfig(self.de_pop, self.de_f, self.de_cr, self.de_gens, seed, self.weight_floor)

    def sev_weights(self) -> SeverityWeights:
        if self.severity_weights is None:
            return SeverityWeights()
        if len(self.severity_weights) != 8:
            raise ValueError("severity_weights needs 8 values")
        return SeverityWeights(dict(zip(Severity, map(float, self.severity_weights))))

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_text(self) -> str:
        lines = ["# bugtriage run configuration; one key per line, '#' starts a comment"]
        for f in fields(self):
            lines.append(f"# {f.metadata['help']}")
            value = yaml.safe_dump(getattr(self, f.name), default_flow_style=True, width=1000)
            value = value.strip()
            if value.endswith("..."):
                value = value[:-3].strip()
            lines.append(f"{f.name}: {value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, base: Optional["RunConfig"] = None) -> "RunConfig":
        data = yaml.safe_load(text) or {}
        if not isinstance(data, dict):
            raise ConfigError("config file must be a mapping of key: value lines")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        return dataclasses.replace(base or cls(), **data)

    def save(self, path) -> None:
        write_text(path, self.to_text())

    @classmethod
    def load(cls, path, base: Optional["RunConfig"] = None) -> "RunConfig":
        p = Path(path)
        if not p.is_file():
            raise FileNotFoundError(f"config file not found: {p}")
        return cls.from_text(p.read_text("utf-8"), base)


PAPER_PROTOCOL = dict(mode="fixed8020", k_min=1, k_max=15, min_fixed=10)


def derive_seed(master: int, *parts: int) -> int:
    """Independent 32-bit seed for one (iteration, stage) of a run."""
    return int(np.random.SeedSequence([int(master), *map(int, parts)]).generate_state(1)[0])

