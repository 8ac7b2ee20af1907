#!/usr/bin/env python3
"""Interactive demo: review synthetic reconstructions in the browser.

Builds a synthetic corpus, reconstructs every chart with the in-process
oracle (optionally corrupting a few so there is something to reject), then
serves the verification API plus the review UI (if frontend/dist exists)
on localhost. Open http://127.0.0.1:8000/ui/ and review with the keyboard:
``a`` accepts, ``1``/``2``/``3`` reject with a scenario tag.
"""

import argparse
import tempfile
from pathlib import Path

import uvicorn

from chartcycle.reconstructor import PromptSet
from chartcycle.sandbox import RenderSandbox, SandboxLimits
from chartcycle.service import ReviewService, build_reconstruct_fn, create_app
from chartcycle.synthetic import CorruptingCodeBackend, build_corpus, make_charts


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--samples", type=int, default=8)
    parser.add_argument("--corrupt", type=int, default=3)
    parser.add_argument("--seed", type=int, default=5)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    parser.add_argument("--state-dir", type=Path, default=None)
    args = parser.parse_args()

    state_dir = args.state_dir or Path(tempfile.mkdtemp(prefix="chartcycle-review-"))
    charts = make_charts(args.samples, seed=args.seed)
    manifest = build_corpus(state_dir / "corpus", charts)
    backend = CorruptingCodeBackend(corrupt_titles={c.title for c in charts[: args.corrupt]})
    reconstruct_fn = build_reconstruct_fn(
        backend,
        RenderSandbox(SandboxLimits(wall_timeout=30)),
        PromptSet.load(),
        max_attempts=3,
        image_dir=state_dir / "renders",
    )
    service = ReviewService(state_dir / "state", reconstruct_fn=reconstruct_fn)
    job = service.enqueue_job(manifest)
    print(f"state dir: {state_dir}")
    print(f"queued job {job['job_id']} with {args.samples} items "
          f"({args.corrupt} reconstructed as the wrong chart type)")

    app = create_app(service)
    dist = Path(__file__).resolve().parents[1] / "frontend" / "dist"
    if dist.is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=dist, html=True), name="ui")
        print(f"review UI: http://{args.host}:{args.port}/ui/")
    else:
        print("frontend/dist not found; API only (build it with: cd frontend && npm run build)")
    uvicorn.run(app, host=args.host, port=args.port)


if __name__ == "__main__":
    main()
