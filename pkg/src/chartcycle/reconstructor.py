"""Caption-to-code reconstruction with a bounded generate/execute/repair loop."""

from __future__ import annotations

import re
import time
from dataclasses import dataclass
from pathlib import Path

from .backends import GenerationRequest, TextBackend
from .core import ChartSample
from .errors import GenerationError, InfrastructureError, TransportError

DEFAULT_PROMPTS_DIR = Path(__file__).parent / "prompts"
DEFAULT_MAX_ATTEMPTS = 3

_PLACEHOLDER = re.compile(r"\{([a-z_]+)\}")


def _check_placeholders(template: str, expected: tuple[str, ...], name: str) -> None:
    found = _PLACEHOLDER.findall(template)
    if sorted(found) != sorted(expected):
        raise ValueError(
            f"{name} must contain exactly the placeholders {expected}, found {tuple(found)}"
        )


@dataclass(frozen=True)
class PromptSet:
    """Regeneration and debugging templates plus a cache-keyed version string."""

    regen_template: str
    debug_template: str
    version: str
    regen_system: str | None = None
    debug_system: str | None = None

    def __post_init__(self) -> None:
        if not self.version:
            raise ValueError("prompt version must be non-empty")
        _check_placeholders(self.regen_template, ("caption",), "regen_template")
        _check_placeholders(self.debug_template, ("code", "error_message"), "debug_template")

    @classmethod
    def load(cls, directory: str | Path = DEFAULT_PROMPTS_DIR) -> "PromptSet":
        directory = Path(directory)
        return cls(
            regen_template=(directory / "regenerate.user.txt").read_text(encoding="utf-8"),
            debug_template=(directory / "debug.user.txt").read_text(encoding="utf-8"),
            version=(directory / "VERSION").read_text(encoding="utf-8").strip(),
            regen_system=(directory / "regenerate.system.txt").read_text(encoding="utf-8"),
            debug_system=(directory / "debug.system.txt").read_text(encoding="utf-8"),
        )


def strip_code_fences(text: str) -> str:
    """Remove a single wrapping markdown code fence, if present."""
    stripped = text.strip()
    if not stripped.startswith("```"):
        return stripped
    lines = stripped.splitlines()
    lines = lines[1:]  # drop ``` or ```python
    if lines and lines[-1].strip() == "```":
        lines = lines[:-1]
    return "\n".join(lines).strip()


def generate_code(caption: str, backend: TextBackend, prompts: PromptSet) -> str:
    """First-shot code generation from a caption."""
    if not caption:
        raise GenerationError("caption must be non-empty")
    prompt = prompts.regen_template.replace("{caption}", caption)
    response = backend.complete(GenerationRequest(prompt=prompt, system=prompts.regen_system))
    code = strip_code_fences(response)
    if not code:
        raise GenerationError("backend returned an empty response")
    return code


def repair_code(code: str, error_message: str, backend: TextBackend, prompts: PromptSet) -> str:
    """Ask the backend to fix code given the captured error message."""
    if not error_message:
        raise GenerationError("error_message must be non-empty")
    prompt = prompts.debug_template.replace("{code}", code).replace(
        "{error_message}", error_message
    )
    response = backend.complete(GenerationRequest(prompt=prompt, system=prompts.debug_system))
    fixed = strip_code_fences(response)
    if not fixed:
        raise GenerationError("backend returned an empty response")
    return fixed


OUTCOMES = frozenset({"success", "runtime_error", "timeout", "no_figure", "unsafe_rejected"})


@dataclass(frozen=True)
class ReconstructionAttempt:
    index: int
    code: str
    outcome: str
    error_message: str | None
    duration: float

    def __post_init__(self) -> None:
        if self.outcome not in OUTCOMES:
            raise ValueError(f"unknown attempt outcome: {self.outcome!r}")

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "code": self.code,
            "outcome": self.outcome,
            "error_message": self.error_message,
            "duration": self.duration,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ReconstructionAttempt":
        return cls(
            index=data["index"],
            code=data["code"],
            outcome=data["outcome"],
            error_message=data.get("error_message"),
            duration=data["duration"],
        )


@dataclass(frozen=True)
class Reconstruction:
    """Final code, full attempt history, and the rendered image (if any)."""

    sample_id: str
    attempts: tuple[ReconstructionAttempt, ...]
    final_code: str
    rendered_image_ref: str | None
    status: str  # succeeded | failed

    def __post_init__(self) -> None:
        if self.status not in ("succeeded", "failed"):
            raise ValueError(f"unknown reconstruction status: {self.status!r}")
        if not self.attempts:
            raise ValueError("a reconstruction must have at least one attempt")
        succeeded = self.attempts[-1].outcome == "success"
        if succeeded != (self.status == "succeeded"):
            raise ValueError("status must match the last attempt outcome")
        if succeeded != (self.rendered_image_ref is not None):
            raise ValueError("succeeded reconstructions must carry a rendered image")

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "attempts": [a.to_dict() for a in self.attempts],
            "final_code": self.final_code,
            "rendered_image_ref": self.rendered_image_ref,
            "status": self.status,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Reconstruction":
        return cls(
            sample_id=data["sample_id"],
            attempts=tuple(ReconstructionAttempt.from_dict(a) for a in data["attempts"]),
            final_code=data["final_code"],
            rendered_image_ref=data.get("rendered_image_ref"),
            status=data["status"],
        )


def _failure_message(outcome) -> str:
    if outcome.status == "runtime_error":
        return outcome.stderr_tail
    if outcome.status == "timeout":
        return f"Execution timed out after {outcome.duration:.0f} seconds."
    if outcome.status == "no_figure":
        return "The script ran to completion but did not create any figure."
    return f"The script was rejected by a safety pre-screen: {outcome.stderr_tail}"


def reconstruct(
    sample: ChartSample,
    backend: TextBackend,
    sandbox,
    prompts: PromptSet,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
    image_dir: str | Path = ".",
) -> Reconstruction:
    """Generate, execute, and repair code until it renders or attempts run out.

    Attempt 1 uses the regeneration prompt; attempts 2..max_attempts feed the
    previous code and error message to the debugging prompt. The rendered PNG
    is written to ``image_dir/<sample_id>.png`` on success.
    """
    if max_attempts < 1:
        raise ValueError("max_attempts must be >= 1")
    image_dir = Path(image_dir)
    attempts: list[ReconstructionAttempt] = []
    code = ""
    error_message = ""
    for index in range(1, max_attempts + 1):
        started = time.monotonic()
        try:
            if index == 1:
                code = generate_code(sample.caption, backend, prompts)
            else:
                code = repair_code(code, error_message, backend, prompts)
        except TransportError as exc:
            raise InfrastructureError(f"text backend failed after retries: {exc}") from exc
        outcome = sandbox.execute(code)
        duration = time.monotonic() - started
        if outcome.status == "success":
            attempts.append(ReconstructionAttempt(index, code, "success", None, duration))
            image_dir.mkdir(parents=True, exist_ok=True)
            image_path = image_dir / f"{sample.id}.png"
            image_path.write_bytes(outcome.image_bytes)
            return Reconstruction(
                sample_id=sample.id,
                attempts=tuple(attempts),
                final_code=code,
                rendered_image_ref=str(image_path),
                status="succeeded",
            )
        error_message = _failure_message(outcome)
        attempts.append(ReconstructionAttempt(index, code, outcome.status, error_message, duration))
    return Reconstruction(
        sample_id=sample.id,
        attempts=tuple(attempts),
        final_code=code,
        rendered_image_ref=None,
        status="failed",
    )
