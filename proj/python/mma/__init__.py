"""Mental model analysis: study parsing, bot simulation and congruence scoring."""

import json

from . import _core
from ._core import Error

__all__ = ["Error", "Service", "validate", "canonical", "fingerprint", "simulate", "score", "congruence", "spearman"]


def validate(source):
    return json.loads(_core.validate(source))


def canonical(source):
    return _core.canonical(source)


def fingerprint(source):
    return _core.fingerprint(source)


def simulate(source, bot, condition, n=20, seed=1, threads=1):
    return json.loads(_core.simulate(source, bot, condition, n, seed, threads))


def score(log_text, source):
    return json.loads(_core.score(log_text, source))


def congruence(source, elicited_rules):
    return json.loads(_core.congruence(source, json.dumps(elicited_rules)))


def spearman(xs, ys):
    return _core.spearman(list(xs), list(ys))


class Service:
    """In-process service; route() returns (status, decoded body)."""

    def __init__(self, data_dir):
        self._svc = _core.Service(str(data_dir))

    def route(self, method, path, body=None):
        text = "" if body is None else json.dumps(body)
        status, content_type, payload = self._svc.route(method, path, text)
        if content_type.startswith("application/json"):
            return status, json.loads(payload) if payload else None
        return status, payload

    def export_csv(self, study_id):
        return self._svc.export_csv(study_id)

    @property
    def study_count(self):
        return self._svc.study_count

    @property
    def session_count(self):
        return self._svc.session_count
