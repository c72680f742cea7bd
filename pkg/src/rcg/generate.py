"""Generation backends behind one contract: IR passthrough, mocks, remote model."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from ._http import TransportError, request_json
from .errors import GeneratorUnavailable, NoExemplar, ProtocolViolation
from .index import Exemplar
from .prompt import CSEP, NSEP, Prompt
from .tokenizer import join_tokens, tokenize

DEFAULT_MAX_NEW_TOKENS = 128
MOCK_MODES = ("echo_query", "fixed", "copy_first_exemplar")


@dataclass(frozen=True)
class GenerationRequest:
    prompts: tuple[Prompt, ...]
    max_new_tokens: int = DEFAULT_MAX_NEW_TOKENS
    decode_hint: str = ""

    def __post_init__(self):
        if self.max_new_tokens < 1:
            raise ValueError(f"max_new_tokens must be >= 1, got {self.max_new_tokens}")
        object.__setattr__(self, "prompts", tuple(self.prompts))


@dataclass(frozen=True)
class GenerationOutput:
    query_id: str
    text: str
    backend: str


def ir_passthrough(resolved: Sequence[tuple[str, Sequence[Exemplar]]]) -> list[GenerationOutput]:
    """Reuse the rank-1 exemplar's comment verbatim (IR-only baseline)."""
    outputs = []
    for query_id, exemplars in resolved:
        if not exemplars:
            raise NoExemplar(f"no retrieved exemplar for query {query_id!r}")
        outputs.append(GenerationOutput(query_id=query_id, text=exemplars[0].comment, backend="ir"))
    return outputs


def mock_generate(request: GenerationRequest, mode: str) -> list[GenerationOutput]:
    """Deterministic test double; see MOCK_MODES."""
    if mode not in MOCK_MODES:
        raise ValueError(f"unknown mock mode {mode!r}; expected one of {MOCK_MODES}")
    backend = f"mock:{mode}"
    outputs = []
    for prompt in request.prompts:
        if mode == "fixed":
            text = "MOCK"
        elif mode == "echo_query":
            query_segment = prompt.text.split(f" {NSEP} ", 1)[0]
            text = join_tokens(tokenize(query_segment)[: request.max_new_tokens])
        else:
            start = prompt.text.find(NSEP)
            if start < 0:
                raise NoExemplar(f"prompt for {prompt.query_id!r} has no {NSEP} segment")
            rest = prompt.text[start + len(NSEP):]
            end = rest.find(CSEP)
            text = (rest if end < 0 else rest[:end]).strip()
        outputs.append(GenerationOutput(query_id=prompt.query_id, text=text, backend=backend))
    return outputs


def remote_generate(
    endpoint: str,
    request: GenerationRequest,
    batch_size: int = 16,
    timeout: float = 120.0,
) -> list[GenerationOutput]:
    """Send prompts to a sidecar /generate endpoint, preserving order."""
    endpoint = endpoint.rstrip("/")
    outputs: list[GenerationOutput] = []
    prompts = request.prompts
    for start in range(0, len(prompts), batch_size):
        chunk = prompts[start : start + batch_size]
        try:
            resp = request_json(
                "POST",
                endpoint + "/generate",
                {
                    "prompts": [p.text for p in chunk],
                    "max_new_tokens": request.max_new_tokens,
                    "decode_hint": request.decode_hint,
                },
                timeout=timeout,
            )
        except TransportError as exc:
            raise GeneratorUnavailable(str(exc), status=exc.status) from exc
        texts = resp.get("outputs") if isinstance(resp, dict) else None
        if not isinstance(texts, list) or len(texts) != len(chunk):
            raise ProtocolViolation(
                f"/generate returned {0 if not isinstance(texts, list) else len(texts)} "
                f"outputs for {len(chunk)} prompts"
            )
        model = str(resp.get("model", "unknown"))
        for prompt, text in zip(chunk, texts):
            outputs.append(
                GenerationOutput(query_id=prompt.query_id, text=str(text), backend=f"remote:{model}")
            )
    return outputs
