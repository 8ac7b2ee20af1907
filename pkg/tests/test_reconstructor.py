import pytest

from chartcycle.backends import MockTextBackend
from chartcycle.core import ChartSample
from chartcycle.errors import GenerationError, InfrastructureError, TransportError
from chartcycle.reconstructor import (
    PromptSet,
    generate_code,
    reconstruct,
    repair_code,
    strip_code_fences,
)

from conftest import BROKEN_CODE, GOOD_CODE


def sample(caption="a bar chart of A=1, B=2"):
    return ChartSample(id="s1", image_ref="s1.png", caption=caption)


# ---------------------------------------------------------------------------
# Prompt templates


def test_shipped_prompts_load(prompts):
    assert "{caption}" in prompts.regen_template
    assert "{code}" in prompts.debug_template and "{error_message}" in prompts.debug_template
    assert prompts.version


@pytest.mark.parametrize(
    "regen,debug",
    [
        ("no placeholder", "{code} {error_message}"),
        ("{caption} {code}", "{code} {error_message}"),
        ("{caption} {caption}", "{code} {error_message}"),
        ("{caption}", "{code} only"),
    ],
)
def test_placeholder_validation(regen, debug):
    with pytest.raises(ValueError):
        PromptSet(regen_template=regen, debug_template=debug, version="v")


def test_version_must_be_non_empty():
    with pytest.raises(ValueError):
        PromptSet(regen_template="{caption}", debug_template="{code}{error_message}", version="")


def test_fence_stripping():
    assert strip_code_fences("```python\nx = 1\n```") == "x = 1"
    assert strip_code_fences("```\nx = 1\n```") == "x = 1"
    assert strip_code_fences("  x = 1\n") == "x = 1"


# ---------------------------------------------------------------------------
# generate_code / repair_code


def test_generate_echoes_mock_script(prompts):
    backend = MockTextBackend(script=[GOOD_CODE])
    assert generate_code("a bar chart of A=1, B=2", backend, prompts) == GOOD_CODE.strip()


def test_generate_request_is_template_with_caption_substituted(prompts):
    backend = MockTextBackend(script=["code"])
    caption = "a bar chart of A=1, B=2"
    generate_code(caption, backend, prompts)
    request = backend.requests[0]
    assert request.prompt == prompts.regen_template.replace("{caption}", caption)
    assert caption in request.prompt
    assert request.system == prompts.regen_system


def test_generate_strips_fences(prompts):
    backend = MockTextBackend(script=["```python\nplt.plot()\n```"])
    assert generate_code("cap", backend, prompts) == "plt.plot()"


def test_generate_empty_response_is_error(prompts):
    backend = MockTextBackend(script=["   \n"])
    with pytest.raises(GenerationError):
        generate_code("cap", backend, prompts)


def test_repair_request_carries_code_and_error_verbatim(prompts):
    backend = MockTextBackend(script=[GOOD_CODE])
    fixed = repair_code(BROKEN_CODE, "NameError: x", backend, prompts)
    assert fixed == GOOD_CODE.strip()
    request = backend.requests[0]
    assert BROKEN_CODE in request.prompt
    assert "NameError: x" in request.prompt
    assert request.prompt == prompts.debug_template.replace("{code}", BROKEN_CODE).replace(
        "{error_message}", "NameError: x"
    )


def test_repair_deterministic_with_deterministic_backend(prompts):
    responder = lambda request: GOOD_CODE  # noqa: E731
    first = repair_code(BROKEN_CODE, "err", MockTextBackend(responder=responder), prompts)
    second = repair_code(BROKEN_CODE, "err", MockTextBackend(responder=responder), prompts)
    assert first == second


def test_transport_error_propagates_from_generate(prompts):
    backend = MockTextBackend(script=[TransportError("unreachable")])
    with pytest.raises(TransportError):
        generate_code("cap", backend, prompts)


# ---------------------------------------------------------------------------
# reconstruct loop


def test_happy_path_single_attempt(prompts, scripted_sandbox, tmp_path):
    backend = MockTextBackend(script=[GOOD_CODE])
    recon = reconstruct(sample(), backend, scripted_sandbox, prompts, image_dir=tmp_path)
    assert recon.status == "succeeded"
    assert len(recon.attempts) == 1
    assert recon.attempts[0].outcome == "success"
    assert recon.rendered_image_ref is not None


def test_broken_then_fixed_two_attempts(prompts, scripted_sandbox, tmp_path):
    backend = MockTextBackend(script=[BROKEN_CODE, GOOD_CODE])
    recon = reconstruct(
        sample(), backend, scripted_sandbox, prompts, max_attempts=3, image_dir=tmp_path
    )
    assert recon.status == "succeeded"
    assert [a.outcome for a in recon.attempts] == ["runtime_error", "success"]
    assert [a.index for a in recon.attempts] == [1, 2]
    # The repair request carries the prior error message verbatim.
    assert "ValueError: scripted failure" in backend.requests[1].prompt


def test_always_broken_exhausts_attempts(prompts, scripted_sandbox, tmp_path):
    backend = MockTextBackend(script=[BROKEN_CODE] * 3)
    recon = reconstruct(
        sample(), backend, scripted_sandbox, prompts, max_attempts=3, image_dir=tmp_path
    )
    assert recon.status == "failed"
    assert len(recon.attempts) == 3
    assert recon.rendered_image_ref is None
    assert scripted_sandbox.call_count == 3


def test_transport_failure_becomes_infrastructure_error(prompts, scripted_sandbox, tmp_path):
    backend = MockTextBackend(script=[TransportError("down")])
    with pytest.raises(InfrastructureError):
        reconstruct(sample(), backend, scripted_sandbox, prompts, image_dir=tmp_path)


def test_max_attempts_must_be_positive(prompts, scripted_sandbox, tmp_path):
    with pytest.raises(ValueError):
        reconstruct(
            sample(), MockTextBackend(), scripted_sandbox, prompts, max_attempts=0, image_dir=tmp_path
        )


def test_pure_given_deterministic_backend(prompts, tmp_path):
    from conftest import ScriptedSandbox

    runs = []
    for i in range(2):
        backend = MockTextBackend(script=[BROKEN_CODE, GOOD_CODE])
        recon = reconstruct(
            sample(), backend, ScriptedSandbox(), prompts, max_attempts=3, image_dir=tmp_path / str(i)
        )
        runs.append([(a.index, a.code, a.outcome) for a in recon.attempts])
    assert runs[0] == runs[1]
