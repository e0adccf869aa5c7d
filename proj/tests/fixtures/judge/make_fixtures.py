"""Regenerates the judge replay fixtures: two datasets plus recorded responses."""

import base64
import json
import pathlib

HERE = pathlib.Path(__file__).parent

DIM_KEYS = [
    "Medical Information Accuracy",
    "Language Clarity and Fluency",
    "Dialogue  Completeness",
    "Medical Imaging Relevance",
    "Practicality",
]


def response(dims, overall, preamble="Here is my evaluation:\n"):
    body = {k: {"score": s, "comment": "ok"} for k, s in zip(DIM_KEYS, dims)}
    body["Overall"] = {"score": overall, "comment": "summary"}
    return preamble + json.dumps(body, indent=2) + "\n"


def image(tag):
    return base64.b64encode(tag.encode()).decode()


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for r in rows:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")


replay = HERE / "replay"
replay.mkdir(exist_ok=True)

high = []
for k in range(1, 11):
    sid = f"slake-like-{k:02d}"
    no_image = k == 7
    high.append({
        "id": sid,
        "images": [] if no_image else [image(sid)],
        "text_turns": [
            {"role": "user", "content": "Which organ is abnormal in this scan?"},
            {"role": "assistant", "content": "The liver shows a hypodense lesion."},
        ],
        "category": "instruction",
        "domain": "medical",
        "metadata": {},
    })
    if k == 10:
        text = "I am unable to score this sample in the requested format."
    elif no_image:
        text = response([5, 5, 4, 3, 4], 4)
    else:
        text = response([5, 5, 4, 5, 4], 5 if k % 2 else 4)
    (replay / f"{sid}.json").write_text(text, encoding="utf-8")

low = []
for k in range(1, 9):
    sid = f"iu-xray-like-{k:02d}"
    low.append({
        "id": sid,
        "images": [image(sid)],
        "text_turns": [{"role": "caption", "content": "xxxx normal. no acute xxxx."}],
        "category": "caption",
        "domain": "medical",
        "modality_tag": "X-Ray",
        "metadata": {},
    })
    (replay / f"{sid}.json").write_text(response([2, 2, 2, 3, 2], 2 if k % 3 else 3), encoding="utf-8")

write_jsonl(HERE / "slake_like.jsonl", high)
write_jsonl(HERE / "iu_xray_like.jsonl", low)
manifest = {
    "entries": [
        {"dataset_id": "slake_like", "category": "instruction", "domain": "medical",
         "shard_paths": ["slake_like.jsonl"], "declared_count": len(high)},
        {"dataset_id": "iu_xray_like", "category": "caption", "domain": "medical",
         "shard_paths": ["iu_xray_like.jsonl"], "declared_count": len(low)},
    ]
}
(HERE / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
