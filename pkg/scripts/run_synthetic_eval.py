#!/usr/bin/env python3
"""Offline demo: score a perfect oracle against a corrupting one.

Builds a seeded synthetic corpus, evaluates both backends end to end
(code generation -> sandboxed render -> similarity + text scoring), and
prints the score gap. Everything runs locally; no model weights, no network.
"""

import argparse
import tempfile
from pathlib import Path

from chartcycle.harness import RunConfig, run_eval
from chartcycle.ocr import PngMetadataEngine
from chartcycle.sandbox import RenderSandbox, SandboxLimits
from chartcycle.similarity import ReferenceEncoder
from chartcycle.synthetic import CorruptingCodeBackend, OracleCodeBackend, build_corpus, make_charts


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--samples", type=int, default=10)
    parser.add_argument("--corrupt", type=int, default=5, help="samples rendered as the wrong type")
    parser.add_argument("--seed", type=int, default=23)
    parser.add_argument("--workdir", type=Path, default=None)
    args = parser.parse_args()

    workdir = args.workdir or Path(tempfile.mkdtemp(prefix="chartcycle-demo-"))
    print(f"workdir: {workdir}")
    charts = make_charts(args.samples, seed=args.seed)
    manifest = build_corpus(workdir / "corpus", charts)
    print(f"rendered {args.samples} synthetic charts -> {manifest}")

    def evaluate(name, backend):
        config = RunConfig(
            manifest=str(manifest),
            out_dir=str(workdir / name),
            encoders=({"kind": "reference"},),
            workers=2,
        )
        report = run_eval(
            config,
            text_backend=backend,
            encoders=[ReferenceEncoder()],
            ocr_engine=PngMetadataEngine(),
            sandbox=RenderSandbox(SandboxLimits(wall_timeout=30)),
        )
        return report.scores

    perfect = evaluate("perfect", OracleCodeBackend())
    corrupt_titles = {c.title for c in charts[: args.corrupt]}
    corrupted = evaluate("corrupted", CorruptingCodeBackend(corrupt_titles=corrupt_titles))

    print()
    print(f"{'backend':22} {'visual consistency':>20} {'text F1':>10} {'failures':>9}")
    for name, scores in (("oracle", perfect), ("corrupting oracle", corrupted)):
        print(
            f"{name:22} {scores.vcs_by_backend['ref-64']:20.4f} "
            f"{scores.ocr.f1:10.4f} {scores.failures:9d}"
        )
    drop = perfect.vcs_by_backend["ref-64"] - corrupted.vcs_by_backend["ref-64"]
    print(f"\ncorrupting {args.corrupt}/{args.samples} captions dropped the score by {drop:.4f}")


if __name__ == "__main__":
    main()
