"""Shared fixtures: scripted sandboxes, tiny images, synthetic corpora."""

from __future__ import annotations

import io

import pytest
from PIL import Image

from chartcycle.reconstructor import PromptSet, Reconstruction, ReconstructionAttempt
from chartcycle.sandbox import RenderOutcome, RenderSandbox, SandboxLimits
from chartcycle.synthetic import build_corpus, make_charts


def _tiny_png(color=(200, 40, 40)) -> bytes:
    buffer = io.BytesIO()
    Image.new("RGB", (8, 8), color).save(buffer, format="PNG")
    return buffer.getvalue()


TINY_PNG = _tiny_png()

GOOD_CODE = """\
import matplotlib.pyplot as plt
fig, ax = plt.subplots()
ax.bar(["A", "B"], [1, 2])
ax.set_title("Tiny")
plt.show()
"""

BROKEN_CODE = "raise ValueError('scripted failure')\n"


class ScriptedSandbox:
    """In-process sandbox stand-in: code containing 'raise' fails, rest renders."""

    def __init__(self):
        self.call_count = 0
        self.limits = SandboxLimits()

    def execute(self, code: str) -> RenderOutcome:
        self.call_count += 1
        if "raise" in code:
            return RenderOutcome(
                status="runtime_error",
                image_bytes=None,
                stderr_tail="ValueError: scripted failure",
                duration=0.0,
            )
        return RenderOutcome(
            status="success",
            image_bytes=TINY_PNG,
            stderr_tail="",
            duration=0.0,
            figure_count=1,
        )


@pytest.fixture
def scripted_sandbox():
    return ScriptedSandbox()


@pytest.fixture(scope="session")
def prompts():
    return PromptSet.load()


@pytest.fixture(scope="session")
def render_sandbox():
    return RenderSandbox(SandboxLimits(wall_timeout=30))


@pytest.fixture(scope="session")
def corpus20(tmp_path_factory):
    """20 rendered synthetic charts plus their manifest."""
    out_dir = tmp_path_factory.mktemp("corpus20")
    charts = make_charts(20, seed=7)
    manifest_path = build_corpus(out_dir, charts)
    return manifest_path, charts


def make_fake_reconstructor(image_dir, fail_ids=frozenset(), max_attempts=3):
    """Reconstruction callable for service tests; no sandbox involved."""
    image_dir.mkdir(parents=True, exist_ok=True)

    def fn(sample):
        if sample.id in fail_ids:
            attempts = tuple(
                ReconstructionAttempt(
                    index=i + 1,
                    code=BROKEN_CODE,
                    outcome="runtime_error",
                    error_message="ValueError: scripted failure",
                    duration=0.0,
                )
                for i in range(max_attempts)
            )
            return Reconstruction(
                sample_id=sample.id,
                attempts=attempts,
                final_code=BROKEN_CODE,
                rendered_image_ref=None,
                status="failed",
            )
        path = image_dir / f"{sample.id}-recon.png"
        path.write_bytes(_tiny_png(color=(40, 40, 200)))
        return Reconstruction(
            sample_id=sample.id,
            attempts=(
                ReconstructionAttempt(
                    index=1, code=GOOD_CODE, outcome="success", error_message=None, duration=0.0
                ),
            ),
            final_code=GOOD_CODE,
            rendered_image_ref=str(path),
            status="succeeded",
        )

    return fn
