from __future__ import annotations

from convsum.corpus import Dialog, Sentence, Speaker, Utterance
from convsum.textproc import DEFAULT_CONFIG, tokenize


def make_dialog(
    dialog_id: str,
    turns: list[tuple[Speaker, list[str]]],
    speaker_count: int = 2,
) -> Dialog:
    """Build a Dialog from (speaker, sentence texts) turns, indexing as the
    reconstruction pipeline would."""
    utterances = []
    global_index = 0
    for utt_index, (speaker, texts) in enumerate(turns):
        sentences = []
        for text in texts:
            sentences.append(
                Sentence(
                    global_index=global_index,
                    utterance_index=utt_index,
                    speaker=speaker,
                    text=text,
                    tokens=tuple(tokenize(text, DEFAULT_CONFIG)),
                )
            )
            global_index += 1
        utterances.append(
            Utterance(
                index=utt_index,
                speaker=speaker,
                tweet_ids=(f"{dialog_id}-{utt_index}",),
                text=" ".join(texts),
                sentences=tuple(sentences),
            )
        )
    return Dialog(
        dialog_id=dialog_id,
        utterances=tuple(utterances),
        speaker_count=speaker_count,
    )
