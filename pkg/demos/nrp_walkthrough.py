"""Next-response prediction end to end: build triples, train the builtin
scorer, rank candidates, score sentence influence, and exercise the wire
protocol against the stub server.

Run:  python3 demos/nrp_walkthrough.py
"""

import json
import threading
import urllib.error
import urllib.request

from convsum.nrp import (
    Direction,
    build_nrp_triples,
    evaluate_recall_at_k,
    load_golden_transcript,
    remote_scorer,
    replay_transcript,
    sentence_influence_scores,
    serve_stub,
    train_builtin_scorer,
)
from convsum.summarizers import nrp_summary, render_sentences
from convsum.synthetic import synthetic_corpus

corpus = synthetic_corpus(80, seed=19, min_utterances=6, max_utterances=10)
train, held_out = corpus[:60], corpus[60:]

# 1. triples and the builtin lexical scorer
train_triples = build_nrp_triples(
    train, k_negatives=5, direction=Direction.FORWARD, seed=0
)
held_triples = build_nrp_triples(
    held_out, k_negatives=5, direction=Direction.FORWARD, seed=1
)
print(f"{len(train_triples)} training triples, {len(held_triples)} held out")

fw = train_builtin_scorer(train_triples, Direction.FORWARD, seed=0)
print(f"training loss {fw.loss_history[0]:.4f} -> {fw.loss_history[-1]:.4f}")

recalls = evaluate_recall_at_k(fw, held_triples, ks=(1, 2, 5))
for k in sorted(recalls):
    print(f"recall@{k} = {recalls[k]:.4f}  (random would be {k / 6:.4f})")

# 2. influence scores turn the scorer into a summarizer
bw_triples = build_nrp_triples(
    train, k_negatives=5, direction=Direction.BACKWARD, seed=0
)
bw = train_builtin_scorer(bw_triples, Direction.BACKWARD, seed=0)

dialog = held_out[0]
scores = sentence_influence_scores(dialog, fw, bw)
top = sorted(scores, key=lambda s: -s.averaged)[:3]
print(f"\nmost influential sentences of dialog {dialog.dialog_id}:")
for entry in top:
    text = dialog.sentences[entry.global_index].text
    print(f"  {entry.averaged:+.4f}  {text}")

summary = nrp_summary(dialog, fw, bw)
print("summary:")
for line in render_sentences(dialog, summary.selected):
    print(f"  - {line}")

# 3. the same scorers behind the wire protocol
server = serve_stub({Direction.FORWARD: fw, Direction.BACKWARD: bw})
thread = threading.Thread(target=server.serve_forever, daemon=True)
thread.start()
base = f"http://127.0.0.1:{server.server_port}"
print(f"\nstub server on {base}")


def send(method, path, body):
    request = urllib.request.Request(base + path, data=body, method=method)
    if body is not None:
        request.add_header("Content-Type", "application/json")
    try:
        with urllib.request.urlopen(request, timeout=5) as response:
            return response.status, response.read().decode("utf-8")
    except urllib.error.HTTPError as error:
        return error.code, error.read().decode("utf-8")


positive = next(t for t in held_triples if t.label == 1)
body = json.dumps({
    "direction": "fw",
    "context": list(positive.context),
    "candidate": positive.candidate,
}).encode("utf-8")
status, text = send("POST", "/score", body)
print(f"POST /score -> {status} {text}")

remote = remote_scorer(base, Direction.FORWARD)
local = fw.score(positive.context, positive.candidate)
print(f"remote score {remote.score(positive.context, positive.candidate):.6f} "
      f"== local {local:.6f}")

failures = replay_transcript(load_golden_transcript(), send)
print(f"golden transcript: {len(failures)} failures")

server.shutdown()
thread.join()
