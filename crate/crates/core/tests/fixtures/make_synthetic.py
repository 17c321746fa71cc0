#!/usr/bin/env python3
"""Generates the 3-page synthetic evaluation fixture and its answer sheet.

The corpus injects a known set of prediction perturbations:
  - per-box jitter on page p1 (all boxes stay well above IoU 0.5),
  - two reading-order swaps (brown/fox on p1, by/shore on p2),
  - five typos (quik, lasy, sels, schore, raed),
  - one merged word (sea+shells -> one wide box "seashells" on p2),
  - one split compound (handwriting -> "hand" + "writing" on p3).

The answer sheet (answers.json) is computed here, independently of the
evaluated implementation, from the documented protocol:
  - greedy one-to-one matching by descending IoU >= 0.5; ties broken by
    lower gt order, larger gt area, then lexicographic (gt id, pred id);
  - detection P/R/F1 micro-aggregated over pages;
  - NSFD over the matched subset, rank-compressed;
  - BLEU (max n = 4, capped at hypothesis length, uniform weights, add-one
    smoothing only when a precision has zero matches and n >= 2, brevity
    penalty exp(1 - r/c) for c < r) between the matched words in predicted
    order with ground-truth text substitution and the full page text;
  - CER = levenshtein / reference length, micro-averaged over matched pairs.

Run from this directory:  python3 make_synthetic.py
"""

import json
import math
from collections import Counter

W, H = 1000, 600
BOX_W, BOX_H = 90.0, 25.0


def box(col, line, w=BOX_W):
    x0 = 50.0 + col * 120.0
    y0 = 50.0 + line * 60.0
    return [x0, y0, x0 + w, y0 + BOX_H]


def quad(b):
    x0, y0, x1, y1 = b
    return [[x0, y0], [x1, y0], [x1, y1], [x0, y1]]


def shift(b, dx, dy):
    x0, y0, x1, y1 = b
    return [x0 + dx, y0 + dy, x1 + dx, y1 + dy]


def word(wid, b, text, order):
    return {"id": wid, "quad": quad(b), "text": text, "order": order, "confidence": None}


def page(pid, words):
    return {"page_id": pid, "width": W, "height": H, "image": None, "words": words}


# --- page p1: jitter + swap(brown, fox) + typos quik/lasy -------------------
P1_TEXTS = ["the", "quick", "brown", "fox", "jumps", "over", "lazy", "dogs"]
P1_JITTER = [(2, -1), (-3, 2), (1, 1), (0, -2), (4, 0), (-2, -3), (3, 2), (-1, 1)]
P1_PRED_TEXTS = ["the", "quik", "brown", "fox", "jumps", "over", "lasy", "dogs"]
P1_PRED_ORDER = [0, 1, 3, 2, 4, 5, 6, 7]  # brown/fox swapped

p1_gt_boxes = [box(i % 4, i // 4) for i in range(8)]
p1_gt = page("p1", [word(f"w{i}", p1_gt_boxes[i], P1_TEXTS[i], i) for i in range(8)])
p1_pred = page(
    "p1",
    [
        word(f"q{i}", shift(p1_gt_boxes[i], *P1_JITTER[i]), P1_PRED_TEXTS[i], P1_PRED_ORDER[i])
        for i in range(8)
    ],
)

# --- page p2: merged "sea shells" + swap(by, shore) + typos sels/schore -----
P2_TEXTS = ["she", "sells", "sea", "shells", "by", "shore"]
p2_gt_boxes = [box(0, 0), box(1, 0), box(2, 0), box(3, 0), box(0, 1), box(1, 1)]
p2_gt = page("p2", [word(f"w{i}", p2_gt_boxes[i], P2_TEXTS[i], i) for i in range(6)])
p2_merged = [p2_gt_boxes[2][0], p2_gt_boxes[2][1], p2_gt_boxes[3][2], p2_gt_boxes[3][3]]
p2_pred = page(
    "p2",
    [
        word("q0", p2_gt_boxes[0], "she", 0),
        word("q1", p2_gt_boxes[1], "sels", 1),
        word("qm", p2_merged, "seashells", 2),
        word("q4", p2_gt_boxes[4], "by", 4),
        word("q5", p2_gt_boxes[5], "schore", 3),
    ],
)

# --- page p3: split "handwriting" + typo raed -------------------------------
P3_TEXTS = ["handwriting", "is", "hard", "to", "read"]
p3_gt_boxes = [[50.0, 50.0, 250.0, 75.0]] + [
    [280.0 + i * 120.0, 50.0, 370.0 + i * 120.0, 75.0] for i in range(4)
]
p3_gt = page("p3", [word(f"w{i}", p3_gt_boxes[i], P3_TEXTS[i], i) for i in range(5)])
p3_pred = page(
    "p3",
    [
        word("qa", [50.0, 50.0, 145.0, 75.0], "hand", 0),
        word("qb", [155.0, 50.0, 250.0, 75.0], "writing", 1),
        word("q1", p3_gt_boxes[1], "is", 2),
        word("q2", p3_gt_boxes[2], "hard", 3),
        word("q3", p3_gt_boxes[3], "to", 4),
        word("q4", p3_gt_boxes[4], "raed", 5),
    ],
)

GT_PAGES = [p1_gt, p2_gt, p3_gt]
PRED_PAGES = [p1_pred, p2_pred, p3_pred]


# --- oracle metric implementations ------------------------------------------
def rect(w):
    xs = [p[0] for p in w["quad"]]
    ys = [p[1] for p in w["quad"]]
    return min(xs), min(ys), max(xs), max(ys)


def iou(a, b):
    ax0, ay0, ax1, ay1 = rect(a)
    bx0, by0, bx1, by1 = rect(b)
    iw = max(0.0, min(ax1, bx1) - max(ax0, bx0))
    ih = max(0.0, min(ay1, by1) - max(ay0, by0))
    inter = iw * ih
    union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter
    return inter / union if union > 0 else 0.0


def area(w):
    x0, y0, x1, y1 = rect(w)
    return (x1 - x0) * (y1 - y0)


def match(gt_words, pred_words, theta=0.5):
    cands = []
    for g in gt_words:
        for p in pred_words:
            v = iou(g, p)
            if v >= theta:
                cands.append((-v, g["order"], -area(g), g["id"], p["id"]))
    cands.sort()
    gt_used, pred_used, pairs = set(), set(), []
    for _, _, _, gid, pid in cands:
        if gid in gt_used or pid in pred_used:
            continue
        gt_used.add(gid)
        pred_used.add(pid)
        pairs.append((gid, pid))
    return pairs


def levenshtein(a, b):
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def nsfd(reference, predicted):
    n = len(reference)
    if n <= 1:
        return 0.0
    pos = {g: i for i, g in enumerate(reference)}
    f = sum(abs(pos[g] - i) for i, g in enumerate(predicted))
    return f / (n * n // 2)


def bleu(reference, hypothesis, max_n=4):
    if not hypothesis or not reference:
        return 0.0
    top = max(1, min(max_n, len(hypothesis)))
    log_sum = 0.0
    for n in range(1, top + 1):
        ref_c = Counter(tuple(reference[i : i + n]) for i in range(len(reference) - n + 1))
        hyp_c = Counter(tuple(hypothesis[i : i + n]) for i in range(len(hypothesis) - n + 1))
        matched = sum(min(c, ref_c[g]) for g, c in hyp_c.items())
        total = sum(hyp_c.values())
        num, den = float(matched), float(total)
        if n >= 2 and matched == 0:
            num, den = num + 1.0, den + 1.0
        if num == 0.0:
            return 0.0
        log_sum += math.log(num / den) / top
    c, r = len(hypothesis), len(reference)
    bp = math.exp(1.0 - r / c) if c < r else 1.0
    return min(1.0, bp * math.exp(log_sum))


def page_answers(gt_page, pred_page):
    pairs = match(gt_page["words"], pred_page["words"])
    tp = len(pairs)
    fp = len(pred_page["words"]) - tp
    fn = len(gt_page["words"]) - tp

    gt_by_id = {w["id"]: w for w in gt_page["words"]}
    pred_order = {w["id"]: w["order"] for w in pred_page["words"]}
    by_gt = sorted(pairs, key=lambda gp: gt_by_id[gp[0]]["order"])
    by_pred = sorted(pairs, key=lambda gp: pred_order[gp[1]])
    reference = [g for g, _ in by_gt]
    predicted = [g for g, _ in by_pred]

    ref_tokens = [w["text"] for w in sorted(gt_page["words"], key=lambda w: w["order"])]
    hyp_tokens = [gt_by_id[g]["text"] for g, _ in by_pred]

    pred_by_id = {w["id"]: w for w in pred_page["words"]}
    dist = sum(levenshtein(gt_by_id[g]["text"], pred_by_id[p]["text"]) for g, p in pairs)
    ref_len = sum(len(gt_by_id[g]["text"]) for g, _ in pairs)

    return {
        "page_id": gt_page["page_id"],
        "tp": tp,
        "fp": fp,
        "fn": fn,
        "nsfd": nsfd(reference, predicted),
        "bleu": bleu(ref_tokens, hyp_tokens),
        "cer": dist / ref_len,
        "edit_distance": dist,
        "reference_length": ref_len,
    }


def main():
    pages = [page_answers(g, p) for g, p in zip(GT_PAGES, PRED_PAGES)]
    tp = sum(p["tp"] for p in pages)
    fp = sum(p["fp"] for p in pages)
    fn = sum(p["fn"] for p in pages)
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    f1 = 2 * precision * recall / (precision + recall)
    answers = {
        "iou_threshold": 0.5,
        "corpus": {
            "tp": tp,
            "fp": fp,
            "fn": fn,
            "precision": precision,
            "recall": recall,
            "f1": f1,
            "mean_nsfd": sum(p["nsfd"] for p in pages) / len(pages),
            "mean_bleu": sum(p["bleu"] for p in pages) / len(pages),
            "cer_micro": sum(p["edit_distance"] for p in pages)
            / sum(p["reference_length"] for p in pages),
        },
        "pages": pages,
    }

    with open("gt.jsonl", "w") as f:
        for p in GT_PAGES:
            f.write(json.dumps(p) + "\n")
    with open("pred.jsonl", "w") as f:
        for p in PRED_PAGES:
            f.write(json.dumps(p) + "\n")
    with open("answers.json", "w") as f:
        json.dump(answers, f, indent=2)
        f.write("\n")
    print(json.dumps(answers["corpus"], indent=2))


if __name__ == "__main__":
    main()
