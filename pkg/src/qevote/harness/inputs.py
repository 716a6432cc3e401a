"""Election input files.

An input file is a JSON object holding the configuration keys of
:class:`~qevote.election.ElectionConfig` (``lambda`` for the tally
slack) plus ``votes``, ``source_model`` and ``adversary_model``::

    {"n_agents": 4, "votes": [0, 1, 1, 1], "epsilon": 0.6, "delta": 0.05,
     "eta": 0.001, "gamma": 3, "sigma": 1, "lambda": 0.1, "candidates": 2,
     "amplification_rounds": 1, "seed": 7, "coins": 4,
     "source_model": "ideal", "adversary_model": "none"}
"""

import json
from dataclasses import dataclass

from .. import adversary as adv
from .. import election as el
from ..errors import ConfigError

EXTRA_KEYS = ("votes", "source_model", "adversary_model")


@dataclass(frozen=True)
class ElectionInput:
    config: el.ElectionConfig
    votes: tuple
    source_model: str = "ideal"
    adversary_model: str = "none"

    @classmethod
    def from_mapping(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("election input must be a JSON object")
        data = dict(data)
        if "votes" not in data:
            raise ConfigError("election input must list votes")
        votes = data.pop("votes")
        source = data.pop("source_model", "ideal")
        adversary = data.pop("adversary_model", "none")
        try:
            config = el.ElectionConfig.from_mapping(data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        if not isinstance(votes, list) or not all(isinstance(v, int) for v in votes):
            raise ConfigError("votes must be a list of integers")
        return cls(config, tuple(votes), source, adversary)

    def to_mapping(self):
        out = self.config.to_mapping()
        out["votes"] = list(self.votes)
        out["source_model"] = self.source_model
        out["adversary_model"] = self.adversary_model
        return out

    def compact(self):
        return json.dumps(self.to_mapping(), sort_keys=True, separators=(",", ":"))

    def with_seed(self, seed):
        return ElectionInput(self.config.with_(seed=seed), self.votes, self.source_model, self.adversary_model)

    def run(self, transcript=None):
        """Execute the election this input describes."""
        source = adv.parse_source_model(self.source_model)
        adversary = adv.parse_adversary_model(self.adversary_model, self.config.n_agents)
        if self.config.candidates > 2:
            runner = el.multi_candidate_election
        elif self.config.amplification_rounds > 1:
            runner = el.amplified_election
        else:
            runner = el.run_election
        return runner(self.config, self.votes, source, adversary, transcript)


def load_input(path):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return ElectionInput.from_mapping(data)
