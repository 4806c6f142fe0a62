"""Rebuild dialogs from a raw tweet export, filter them, and report
corpus statistics and annotation quality.

Run:  python3 demos/corpus_pipeline.py
"""

import io

from convsum.analysis import dialog_length_stats, first_utterance_selection_rate
from convsum.corpus import (
    ReconstructionConfig,
    filter_dialogs,
    parse_tweet_csv,
    reconstruct_dialogs,
    split_corpus,
)
from convsum.quality import run_qc
from convsum.synthetic import synthetic_annotated_corpus

# A miniature raw export: two three-tweet threads and one singleton.
RAW_CSV = """\
tweet_id,author_id,inbound,created_at,text,response_tweet_id,in_response_to_tweet_id
1,cust1,True,Wed Oct 11 06:55:44 +0000 2017,My router keeps dropping the connection. Started monday.,2,
2,support,False,Wed Oct 11 06:58:02 +0000 2017,@cust1 Sorry about that. Does a reboot help at all?,3,1
3,cust1,True,Wed Oct 11 07:01:17 +0000 2017,Rebooted twice already. Still failing with error five.,,2
4,cust2,True,Wed Oct 11 07:10:00 +0000 2017,Charged twice for one order. Please refund case 4242.,5,
5,support,False,Wed Oct 11 07:12:30 +0000 2017,@cust2 Confirmed. The refund for case 4242 is on its way.,6,4
6,cust2,True,Wed Oct 11 07:15:08 +0000 2017,Thanks. Keeping an eye on my statement.,,5
7,cust3,True,Wed Oct 11 08:00:00 +0000 2017,Just venting about slow shipping.,,
"""

records = parse_tweet_csv(io.StringIO(RAW_CSV))
print(f"parsed {len(records)} tweets")

result = reconstruct_dialogs(records, ReconstructionConfig())
print(f"reconstructed {len(result.dialogs)} dialogs "
      f"({len(result.cycles)} cycles, {len(result.duplicates)} duplicate ids)")
for dialog in result.dialogs:
    turns = " / ".join(f"{u.speaker.value}:{len(u.sentences)}s" for u in dialog.utterances)
    print(f"  dialog {dialog.dialog_id}: {turns}")

filtered = filter_dialogs(result.dialogs, min_utterances=3, max_utterances=20)
print(f"kept {len(filtered.kept)} after filtering, removed {filtered.removal_counts}")

# Statistics need more data than the CSV above; use a synthetic corpus.
pairs = synthetic_annotated_corpus(60, seed=3)
dialogs = [dialog for dialog, _ in pairs]

split = split_corpus({d.dialog_id: d for d in dialogs}, seed=0)
print(f"\nsplit: {len(split.train)} train / {len(split.validation)} validation "
      f"/ {len(split.test)} test")

stats = dialog_length_stats(dialogs)
print("\ndialog lengths (mean +/- std)")
for label in ("utterances", "sentences", "tokens"):
    side = getattr(stats, label).overall
    print(f"  {label:<11} {side.mean:7.2f} +/- {side.std:6.2f}")

rates = first_utterance_selection_rate(pairs)
print(f"\nfirst-utterance selection: customer {rates.customer:.2f}, "
      f"agent {rates.agent:.2f}")

report = run_qc(pairs)
print(f"\nannotation QC: kept {report.kept}, discarded {len(report.discarded)}")
for annotator, annotator_stats in sorted(report.per_annotator.items()):
    jaccard = annotator_stats.mean_adapted_jaccard
    print(f"  {annotator}: {annotator_stats.n_annotations} annotations, "
          f"mean adapted Jaccard {jaccard:.3f}")
