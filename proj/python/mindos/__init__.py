"""Python bindings for the MindOS agent runtime.

Structured values cross the boundary as JSON; the helpers here decode them.
"""

import json
import os

from . import _core
from ._core import (
    MindError,
    embed_text,
    offline_mode,
    render_replay,
    set_offline_mode,
)

__all__ = [
    "MindError",
    "Service",
    "embed_text",
    "error_code",
    "import_openapi",
    "offline_mode",
    "parse_directive",
    "render_replay",
    "set_offline_mode",
]


def error_code(err):
    """The ErrorCode name carried by a MindError."""
    return err.args[0]


def parse_directive(completion):
    return json.loads(_core.parse_directive(completion))


def import_openapi(document, server_variables=None):
    return json.loads(_core.import_openapi(document, dict(server_variables or {})))


class Service:
    """A MindService with its own model registry.

    `models` is a model-config mapping (or a path to one); relative rules
    files resolve against `base_dir`, or the config file's directory.
    """

    def __init__(self, models, data_dir=None, base_dir=None):
        if isinstance(models, (str, os.PathLike)):
            path = os.fspath(models)
            with open(path, encoding="utf-8") as f:
                text = f.read()
            base_dir = base_dir or os.path.dirname(os.path.abspath(path))
        else:
            text = json.dumps(models)
        self._svc = _core.Service(
            text,
            None if data_dir is None else os.fspath(data_dir),
            None if base_dir is None else os.fspath(base_dir),
        )

    def create_agent(self, config):
        return self._svc.create_agent(config if isinstance(config, str) else json.dumps(config))

    def agent_config(self, agent_id):
        return json.loads(self._svc.agent_config(agent_id))

    def agent_ids(self):
        return self._svc.agent_ids()

    def import_tools(self, agent_id, document, server_variables=None, base_url=None):
        out = self._svc.import_tools(agent_id, document, {k: str(v) for k, v in (server_variables or {}).items()}, base_url)
        return json.loads(out)

    def add_knowledge(self, agent_id, store, doc_id, text):
        return self._svc.add_knowledge(agent_id, store, doc_id, text)

    def search(self, agent_id, query, store="domain_knowledge", k=4):
        return json.loads(self._svc.search(agent_id, store, query, k))

    def start_session(self, agent_id, mode="goal_directed"):
        return self._svc.start_session(agent_id, mode)

    def submit_event(self, session_id, event):
        if isinstance(event, str):
            event = {"type": "utterance", "text": event}
        return json.loads(self._svc.submit_event(session_id, json.dumps(event)))

    def apply_feedback(self, session_id, verdict, source="human", note=""):
        body = {"source": source, "verdict": verdict, "note": note}
        return json.loads(self._svc.apply_feedback(session_id, json.dumps(body)))

    def session_state(self, session_id):
        return json.loads(self._svc.session_state(session_id))

    def trace(self, session_id):
        return json.loads(self._svc.trace(session_id))

    def persist_agent(self, agent_id):
        self._svc.persist_agent(agent_id)

    def export_bundle(self, agent_id):
        return self._svc.export_bundle(agent_id)

    def import_bundle(self, data):
        return self._svc.import_bundle(data)
