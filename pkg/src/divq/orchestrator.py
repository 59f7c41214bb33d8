"""Iterative dual-model training loop against external model servers.

The loop pretrains a forward (graph-to-question) and a backward
(question-to-graph) model on the gold corpus, then alternates phases per
iteration: forward epochs mine pseudo pairs from external questions through
the backward model and keep those whose round-trip question survives the
semantic gate; backward epochs generate top-k questions for the training
subgraphs and keep the most diverse relevant one per instance.

All generation/selection products are persisted under the run directory
with content digests before the dependent training request is issued, so a
crash at any sub-step boundary resumes without regenerating anything.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import requests

from .core import (
    Instance,
    Question,
    _dump_jsonl,
    _iter_jsonl,
    load_external_questions,
    load_instances,
    read_json,
    read_pseudo_pairs,
    write_json,
)
from .errors import ConfigDrift, CorruptState, EmptyGroup, EndpointFailure
from .relevance import RelevanceScorer, make_scorer
from .selection import select_backward, select_forward, write_selection_outcome
from .textproc import linearize

logger = logging.getLogger("divq.orchestrator")

PHASE_PRETRAIN = "pretrain"
PHASE_FORWARD = "forward_epochs"
PHASE_BACKWARD = "backward_epochs"
PHASE_DONE = "done"


class ModelEndpoint:
    """HTTP client for one model server role.

    Retries connection failures and 5xx responses with exponential backoff,
    never retries after a 2xx, and fails fast on 4xx.
    """

    def __init__(
        self,
        base_url: str,
        role: str,
        timeout: float = 60.0,
        retry_limit: int = 2,
        backoff_base: float = 0.25,
        session: requests.Session | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.role = role
        self.timeout = timeout
        self.retry_limit = retry_limit
        self.backoff_base = backoff_base
        self._session = session or requests.Session()

    def _request(self, method: str, path: str, payload: dict | None = None):
        url = self.base_url + path
        attempt = 0
        while True:
            error: str | None = None
            response = None
            try:
                if method == "GET":
                    response = self._session.get(url, timeout=self.timeout)
                else:
                    response = self._session.post(url, json=payload, timeout=self.timeout)
            except requests.RequestException as exc:
                error = f"{self.role} endpoint unreachable: {exc}"
            if response is not None:
                if response.status_code < 300:
                    return response
                if response.status_code < 500:
                    raise EndpointFailure(
                        f"{self.role} {path} answered {response.status_code}: "
                        f"{response.text[:200]}",
                        status=response.status_code,
                    )
                error = f"{self.role} {path} answered {response.status_code}"
            if attempt >= self.retry_limit:
                status = response.status_code if response is not None else None
                raise EndpointFailure(error or "request failed", status=status)
            time.sleep(self.backoff_base * (2**attempt))
            attempt += 1

    def health(self) -> None:
        self._request("GET", "/health")

    def generate(
        self,
        inputs: Sequence[str],
        k: int,
        seed: int | None = None,
        batch_size: int = 128,
        max_in_flight: int = 4,
    ) -> list[list[str]]:
        """Top-k outputs per input, reassembled in input order."""
        inputs = list(inputs)
        if not inputs:
            return []
        chunks = [inputs[i : i + batch_size] for i in range(0, len(inputs), batch_size)]

        def one(chunk: list[str]) -> list[list[str]]:
            response = self._request(
                "POST", "/generate", {"inputs": chunk, "k": k, "seed": seed}
            )
            try:
                outputs = response.json()["outputs"]
            except (ValueError, KeyError) as exc:
                raise EndpointFailure(
                    f"{self.role} /generate returned malformed JSON: {exc}"
                ) from exc
            if not isinstance(outputs, list) or len(outputs) != len(chunk):
                raise EndpointFailure(
                    f"{self.role} /generate returned {len(outputs)} output lists "
                    f"for {len(chunk)} inputs"
                )
            for row in outputs:
                if not isinstance(row, list) or any(
                    not isinstance(text, str) or not text.strip() for text in row
                ):
                    raise EndpointFailure(
                        f"{self.role} /generate returned a blank or non-string output"
                    )
            return outputs

        if len(chunks) == 1:
            return one(chunks[0])
        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            results = list(pool.map(one, chunks))
        return [row for chunk_rows in results for row in chunk_rows]

    def train(self, pairs: Sequence[dict], hparams: dict | None = None) -> dict:
        response = self._request(
            "POST", "/train", {"pairs": list(pairs), "hparams": hparams or {}}
        )
        try:
            data = response.json()
        except ValueError as exc:
            raise EndpointFailure(f"{self.role} /train returned non-JSON") from exc
        if data.get("status") != "completed":
            raise EndpointFailure(f"{self.role} /train did not complete: {data}")
        return data


@dataclass(frozen=True)
class RunConfig:
    """Static parameters of one orchestrated run."""

    instances_path: str
    external_questions_path: str
    run_dir: str
    forward_url: str
    backward_url: str
    iterations: int
    epochs_per_phase: int
    k_generate: int = 5
    alpha: float = 0.7
    threshold_backward: float | None = None
    threshold_forward: float | None = None
    scorer: str = "lexical"
    embeddings_path: str | None = None
    embed_url: str | None = None
    seed: int | None = None
    run_id: str | None = None
    hparams: dict = field(default_factory=dict)
    timeout: float = 60.0
    retry_limit: int = 2
    limit_instances: int | None = None

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.epochs_per_phase < 1:
            raise ValueError("epochs_per_phase must be >= 1")
        if self.k_generate < 1:
            raise ValueError("k_generate must be >= 1")

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        data = read_json(path)
        if not isinstance(data, dict):
            raise ValueError("run config must be a JSON object")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def validate_paths(self) -> None:
        for label, path in (
            ("instances", self.instances_path),
            ("external questions", self.external_questions_path),
        ):
            if not os.path.isfile(path):
                raise ValueError(f"{label} file does not exist: {path}")
        if self.scorer == "embed-file" and not (
            self.embeddings_path and os.path.isfile(self.embeddings_path)
        ):
            raise ValueError("embed-file scorer needs an existing embeddings file")

    def backward_threshold(self) -> float:
        return self.alpha if self.threshold_backward is None else self.threshold_backward

    def forward_threshold(self) -> float:
        return self.alpha if self.threshold_forward is None else self.threshold_forward

    def digest(self) -> str:
        # run_dir is excluded: relocating a run is not config drift.
        payload = asdict(self)
        payload.pop("run_dir")
        canonical = json.dumps(payload, sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass
class OrchestratorState:
    """Durable progress record, saved atomically after every sub-step."""

    run_id: str
    config_digest: str
    phase: str = PHASE_PRETRAIN
    iteration: int = 0
    epoch: int = 0
    sub_steps: list[str] = field(default_factory=list)
    artifacts: dict[str, dict] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "OrchestratorState":
        return cls(
            run_id=data["run_id"],
            config_digest=data["config_digest"],
            phase=data["phase"],
            iteration=data["iteration"],
            epoch=data["epoch"],
            sub_steps=list(data["sub_steps"]),
            artifacts=dict(data["artifacts"]),
        )


def _file_digest(path: str) -> str:
    sha = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(65536), b""):
            sha.update(block)
    return sha.hexdigest()


class Orchestrator:
    """Runs the full training loop with checkpointing and resume.

    ``fault_hook(phase, iteration, epoch, sub_step)`` is invoked after every
    persisted sub-step; tests use it to inject crashes at each boundary.
    """

    def __init__(
        self,
        config: RunConfig,
        scorer: RelevanceScorer | None = None,
        fault_hook: Callable[[str, int, int, str], None] | None = None,
    ):
        self.config = config
        self.scorer = scorer or make_scorer(
            config.scorer,
            embeddings_path=config.embeddings_path,
            embed_url=config.embed_url,
            timeout=config.timeout,
        )
        self.forward = ModelEndpoint(
            config.forward_url, "forward", config.timeout, config.retry_limit
        )
        self.backward = ModelEndpoint(
            config.backward_url, "backward", config.timeout, config.retry_limit
        )
        self.embedder = (
            ModelEndpoint(config.embed_url, "embedder", config.timeout, config.retry_limit)
            if config.scorer == "embed-http" and config.embed_url
            else None
        )
        self.fault_hook = fault_hook
        self._instances: list[Instance] | None = None
        self._external: list[Question] | None = None

    # -- state plumbing ---------------------------------------------------

    @property
    def state_path(self) -> str:
        return os.path.join(self.config.run_dir, "state.json")

    def _abs(self, rel_path: str) -> str:
        return os.path.join(self.config.run_dir, rel_path)

    def _save(self, state: OrchestratorState) -> None:
        write_json(state.to_dict(), self.state_path)

    def _mark(self, state: OrchestratorState, sub_step: str) -> None:
        state.sub_steps.append(sub_step)
        self._save(state)
        if self.fault_hook is not None:
            self.fault_hook(state.phase, state.iteration, state.epoch, sub_step)

    def _record_artifact(self, state: OrchestratorState, rel_path: str) -> None:
        state.artifacts[rel_path] = {
            "path": rel_path,
            "sha256": _file_digest(self._abs(rel_path)),
        }

    def _verify_artifacts(self, state: OrchestratorState) -> None:
        for rel_path, record in state.artifacts.items():
            path = self._abs(record["path"])
            if not os.path.isfile(path):
                raise CorruptState(f"artifact missing on disk: {record['path']}")
            if _file_digest(path) != record["sha256"]:
                raise CorruptState(f"artifact digest mismatch: {record['path']}")

    # -- corpus access ----------------------------------------------------

    def _load_instances(self) -> list[Instance]:
        if self._instances is None:
            self._instances = load_instances(
                self.config.instances_path, limit=self.config.limit_instances
            )
        return self._instances

    def _load_external(self) -> list[Question]:
        if self._external is None:
            corpus = load_external_questions(self.config.external_questions_path)
            self._external = list(corpus.questions)
        return self._external

    # -- entry points -------------------------------------------------------

    def _health_check(self) -> None:
        self.forward.health()
        self.backward.health()
        if self.embedder is not None:
            self.embedder.health()

    def run(self) -> OrchestratorState:
        """Start or continue the run; no state is written before the health probe."""
        if os.path.isfile(self.state_path):
            return self.resume()
        self.config.validate_paths()
        self._health_check()
        os.makedirs(self.config.run_dir, exist_ok=True)
        # run_dir is implicit in the file's location, so the saved copy omits
        # it and stays byte-identical across relocated replays.
        config_copy = asdict(self.config)
        config_copy.pop("run_dir")
        write_json(config_copy, self._abs("config.json"))
        run_id = self.config.run_id or self.config.digest()[:12]
        state = OrchestratorState(run_id=run_id, config_digest=self.config.digest())
        self._save(state)
        return self._drive(state)

    def resume(self) -> OrchestratorState:
        """Continue from the persisted state after verifying config and artifacts."""
        try:
            state = OrchestratorState.from_dict(read_json(self.state_path))
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise CorruptState(f"state file unreadable: {exc}") from exc
        if state.config_digest != self.config.digest():
            raise ConfigDrift(
                "config digest changed since the checkpoint; refusing to resume"
            )
        self._verify_artifacts(state)
        if state.phase == PHASE_DONE:
            logger.info("run %s already done", state.run_id)
            return state
        self.config.validate_paths()
        self._health_check()
        return self._drive(state)

    def _drive(self, state: OrchestratorState) -> OrchestratorState:
        while state.phase != PHASE_DONE:
            if state.phase == PHASE_PRETRAIN:
                self._pretrain(state)
            elif state.phase == PHASE_FORWARD:
                self._forward_epoch(state)
            elif state.phase == PHASE_BACKWARD:
                self._backward_epoch(state)
            else:
                raise CorruptState(f"unknown phase {state.phase!r}")
        return state

    # -- phases -------------------------------------------------------------

    def _pretrain(self, state: OrchestratorState) -> None:
        forward_rel = os.path.join("pretrain", "forward_pairs.jsonl")
        backward_rel = os.path.join("pretrain", "backward_pairs.jsonl")
        if "pairs_written" not in state.sub_steps:
            instances = self._load_instances()
            os.makedirs(self._abs("pretrain"), exist_ok=True)
            _dump_jsonl(
                (
                    {"source": linearize(inst.subgraph), "target": inst.gold.text}
                    for inst in instances
                ),
                self._abs(forward_rel),
            )
            _dump_jsonl(
                (
                    {"source": inst.gold.text, "target": linearize(inst.subgraph)}
                    for inst in instances
                ),
                self._abs(backward_rel),
            )
            self._record_artifact(state, forward_rel)
            self._record_artifact(state, backward_rel)
            self._mark(state, "pairs_written")
        if "forward_trained" not in state.sub_steps:
            pairs = [obj for _, obj in _iter_jsonl(self._abs(forward_rel))]
            self.forward.train(pairs, self.config.hparams)
            self._mark(state, "forward_trained")
        if "backward_trained" not in state.sub_steps:
            pairs = [obj for _, obj in _iter_jsonl(self._abs(backward_rel))]
            self.backward.train(pairs, self.config.hparams)
            self._mark(state, "backward_trained")
        state.phase = PHASE_FORWARD
        state.iteration = 0
        state.epoch = 0
        state.sub_steps = []
        self._save(state)
        logger.info("pretraining complete; entering iteration 0")

    def _epoch_paths(self, state: OrchestratorState, phase_token: str) -> dict[str, str]:
        stem = os.path.join(
            f"iter{state.iteration}", f"{phase_token}_epoch{state.epoch}"
        )
        return {
            "dir": f"iter{state.iteration}",
            "pairs": f"{stem}.jsonl",
            "summary": f"{stem}.summary.json",
            "rejected": f"{stem}.rejected.jsonl",
            "sources": f"{stem}.sources.jsonl",
            "roundtrip": f"{stem}.roundtrip.jsonl",
            "generated": f"{stem}.generated.jsonl",
        }

    def _write_selection(
        self, state: OrchestratorState, paths: dict[str, str], outcome, warning: str | None
    ) -> None:
        write_selection_outcome(
            outcome,
            pairs_path=self._abs(paths["pairs"]),
            audit_path=self._abs(paths["rejected"]),
        )
        summary = {
            "input": outcome.input_size,
            "selected": len(outcome.selected),
            "rejected": len(outcome.rejected),
            "threshold": outcome.threshold_used,
        }
        if warning:
            summary["warning"] = warning
        write_json(summary, self._abs(paths["summary"]))
        self._record_artifact(state, paths["pairs"])
        self._record_artifact(state, paths["rejected"])
        self._record_artifact(state, paths["summary"])

    def _finetune_from_pairs(
        self, state: OrchestratorState, paths: dict[str, str], endpoint: ModelEndpoint
    ) -> None:
        pairs = read_pseudo_pairs(self._abs(paths["pairs"]))
        if pairs:
            endpoint.train(
                [{"source": p.source, "target": p.target} for p in pairs],
                self.config.hparams,
            )
        else:
            logger.warning(
                "%s: empty selection, fine-tune skipped (iter %d epoch %d)",
                endpoint.role,
                state.iteration,
                state.epoch,
            )
        self._mark(state, "finetuned")

    def _forward_epoch(self, state: OrchestratorState) -> None:
        paths = self._epoch_paths(state, "forward")
        external = self._load_external()
        os.makedirs(self._abs(paths["dir"]), exist_ok=True)

        if "sources" not in state.sub_steps:
            outputs = self.backward.generate(
                [q.text for q in external], k=1, seed=self.config.seed
            )
            sources = []
            for q, row in zip(external, outputs):
                if not row:
                    raise EndpointFailure(
                        f"backward endpoint produced no sequence for question {q.id!r}"
                    )
                sources.append({"id": q.id, "text": row[0]})
            _dump_jsonl(sources, self._abs(paths["sources"]))
            self._record_artifact(state, paths["sources"])
            self._mark(state, "sources")
        else:
            sources = [obj for _, obj in _iter_jsonl(self._abs(paths["sources"]))]

        if "roundtrips" not in state.sub_steps:
            outputs = self.forward.generate(
                [s["text"] for s in sources], k=1, seed=self.config.seed
            )
            roundtrips = []
            for src, row in zip(sources, outputs):
                if not row:
                    raise EndpointFailure(
                        f"forward endpoint produced no round-trip for {src['id']!r}"
                    )
                roundtrips.append({"id": src["id"], "text": row[0]})
            _dump_jsonl(roundtrips, self._abs(paths["roundtrip"]))
            self._record_artifact(state, paths["roundtrip"])
            self._mark(state, "roundtrips")
        else:
            roundtrips = [obj for _, obj in _iter_jsonl(self._abs(paths["roundtrip"]))]

        if "pairs_selected" not in state.sub_steps:
            by_id = {q.id: q for q in external}
            triples = [
                (
                    src["text"],
                    by_id[src["id"]],
                    Question(text=rt["text"], id=f"{rt['id']}#rt"),
                )
                for src, rt in zip(sources, roundtrips)
            ]
            outcome = select_backward(
                triples,
                self.scorer,
                self.config.backward_threshold(),
                strict=True,
                iteration=state.iteration,
                epoch=state.epoch,
            )
            warning = None if outcome.selected else "empty selection; fine-tune skipped"
            self._write_selection(state, paths, outcome, warning)
            self._mark(state, "pairs_selected")

        if "finetuned" not in state.sub_steps:
            self._finetune_from_pairs(state, paths, self.forward)

        state.epoch += 1
        if state.epoch >= self.config.epochs_per_phase:
            state.phase = PHASE_BACKWARD
            state.epoch = 0
        state.sub_steps = []
        self._save(state)

    def _backward_epoch(self, state: OrchestratorState) -> None:
        paths = self._epoch_paths(state, "backward")
        instances = self._load_instances()
        os.makedirs(self._abs(paths["dir"]), exist_ok=True)

        if "generated" not in state.sub_steps:
            outputs = self.forward.generate(
                [linearize(inst.subgraph) for inst in instances],
                k=self.config.k_generate,
                seed=self.config.seed,
            )
            generated = [
                {"instance_id": inst.id, "questions": row}
                for inst, row in zip(instances, outputs)
            ]
            _dump_jsonl(generated, self._abs(paths["generated"]))
            self._record_artifact(state, paths["generated"])
            self._mark(state, "generated")
        else:
            generated = [obj for _, obj in _iter_jsonl(self._abs(paths["generated"]))]

        if "pairs_selected" not in state.sub_steps:
            groups = []
            for inst, record in zip(instances, generated):
                questions = record["questions"]
                if not questions:
                    raise EmptyGroup(inst.id)
                groups.append(
                    (
                        inst,
                        [
                            Question(text=text, id=f"{inst.id}#g{j}")
                            for j, text in enumerate(questions)
                        ],
                    )
                )
            outcome = select_forward(
                groups,
                self.scorer,
                self.config.forward_threshold(),
                k=None,
                strict=False,
                iteration=state.iteration,
                epoch=state.epoch,
            )
            warning = None if outcome.selected else "empty selection; fine-tune skipped"
            self._write_selection(state, paths, outcome, warning)
            self._mark(state, "pairs_selected")

        if "finetuned" not in state.sub_steps:
            self._finetune_from_pairs(state, paths, self.backward)

        state.epoch += 1
        if state.epoch >= self.config.epochs_per_phase:
            state.iteration += 1
            state.epoch = 0
            state.phase = (
                PHASE_FORWARD if state.iteration < self.config.iterations else PHASE_DONE
            )
        state.sub_steps = []
        self._save(state)
        if state.phase == PHASE_DONE:
            logger.info("run complete after %d iterations", self.config.iterations)
