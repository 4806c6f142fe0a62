"""Summarize a small synthetic corpus four ways and score each against
the annotated references.

Run:  python3 demos/quickstart.py
"""

from convsum.rouge import evaluate_summary, mean_report
from convsum.summarizers import (
    CesConfig,
    ces_summary,
    lead_summary,
    lexrank_summary,
    random_summary,
    render_sentences,
)
from convsum.synthetic import synthetic_annotated_corpus

pairs = synthetic_annotated_corpus(30, seed=7, min_utterances=6, max_utterances=10)
print(f"{len(pairs)} dialogs, 3 annotators each")

# Keep CES small here; the defaults are sized for real corpora.
ces_config = CesConfig(samples_per_iteration=200, iterations=10)

methods = {
    "lead": lambda dialog: lead_summary(dialog),
    "random": lambda dialog: random_summary(dialog, seed=1),
    "lexrank": lambda dialog: lexrank_summary(dialog),
    "ces": lambda dialog: ces_summary(dialog, ces_config),
}

print(f"\n{'method':<10}{'R-1':>8}{'R-2':>8}{'R-L':>8}{'R-SU4':>8}   (mean F)")
for name, summarize in methods.items():
    reports = []
    for dialog, annotation_set in pairs:
        candidate = render_sentences(dialog, summarize(dialog).selected)
        references = [
            a.abstractive.full_text for a in annotation_set.annotations
        ]
        reports.append(evaluate_summary(candidate, references))
    mean = mean_report(reports)
    print(
        f"{name:<10}{mean.r1.f:>8.4f}{mean.r2.f:>8.4f}"
        f"{mean.rl.f:>8.4f}{mean.rsu4.f:>8.4f}"
    )

# One dialog end to end, for a closer look.
dialog, annotation_set = pairs[0]
print(f"\ndialog {dialog.dialog_id}: {len(dialog.utterances)} utterances")
summary = lexrank_summary(dialog)
for line in render_sentences(dialog, summary.selected):
    print(f"  - {line}")
