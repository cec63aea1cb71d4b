# Copyright 2026 The uniseq Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Independent reference computations for the frozen test constants.

Every value here is derived with plain Python (fractions where exact) and
shares no code with the C++ library. Running the script prints the values
that tests/oracle_values.hpp freezes; `--check` compares against it.
"""

import argparse
import itertools
import math
import re
import sys
from collections import Counter
from fractions import Fraction
from pathlib import Path


def bpe_first_merge(corpus):
    pairs = Counter()
    for word in corpus:
        for a, b in zip(word, word[1:]):
            pairs[(ord(a) + 4, ord(b) + 4)] += 1
    best = max(pairs.values())
    return min(p for p, n in pairs.items() if n == best)


def quantize(c, bins):
    return math.floor(c * (bins - 1) + 0.5)


def surrogate_code(value, size):
    return min(size - 1, (value * size) // 256)


def rouge_l(cand, ref):
    c, r = cand.split(), ref.split()
    table = [[0] * (len(r) + 1) for _ in range(len(c) + 1)]
    for i, j in itertools.product(range(len(c)), range(len(r))):
        table[i + 1][j + 1] = (table[i][j] + 1 if c[i] == r[j]
                               else max(table[i][j + 1], table[i + 1][j]))
    lcs = table[-1][-1]
    rec, prec = Fraction(lcs, len(c)), Fraction(lcs, len(r))
    beta = prec / rec
    return (1 + beta ** 2) * rec * prec / (rec + beta ** 2 * prec)


def meteor(cand, ref, alpha=Fraction(9, 10), gamma=Fraction(1, 2), theta=3):
    c, r = cand.split(), ref.split()
    best = None
    # Brute force over injective exact-match alignments.
    options = [[j for j, w in enumerate(r) if w == cw] + [None] for cw in c]
    for choice in itertools.product(*options):
        used = [j for j in choice if j is not None]
        if len(used) != len(set(used)):
            continue
        m = len(used)
        chunks = 0
        prev = None
        for j in choice:
            if j is None:
                prev = None
                continue
            if prev is None or j != prev + 1:
                chunks += 1
            prev = j
        key = (-m, chunks)
        if best is None or key < best:
            best = key
    m, chunks = -best[0], best[1]
    if m == 0:
        return Fraction(0)
    p, rr = Fraction(m, len(c)), Fraction(m, len(r))
    fmean = p * rr / (alpha * p + (1 - alpha) * rr)
    pen = gamma * Fraction(chunks, m) ** theta
    return (1 - pen) * fmean


def f1_scores(truths, preds):
    labels = sorted(set(truths) | set(preds))
    out = {}
    for lab in labels:
        tp = sum(t == lab and p == lab for t, p in zip(truths, preds))
        fp = sum(t != lab and p == lab for t, p in zip(truths, preds))
        fn = sum(t == lab and p != lab for t, p in zip(truths, preds))
        prec = Fraction(tp, tp + fp) if tp + fp else Fraction(0)
        rec = Fraction(tp, tp + fn) if tp + fn else Fraction(0)
        out[lab] = 2 * prec * rec / (prec + rec) if prec + rec else Fraction(0)
    counts = Counter(truths)
    weighted = sum(out[lab] * counts[lab] for lab in labels) / len(truths)
    macro = sum(out.values()) / len(labels)
    return out, weighted, macro


def learning_rate(step, total, warmup, peak):
    if step < warmup:
        return peak * step / warmup
    return peak * (total - step) / (total - warmup)


def adamw_first_step(w, g, lr, eps=1e-8, b1=0.9, b2=0.999):
    m = (1 - b1) * g
    v = (1 - b2) * g * g
    return w - lr * (m / (1 - b1)) / (math.sqrt(v / (1 - b2)) + eps)


def parameter_count(d, inner, heads, enc, dec, vocab, text_pos, grid, patch_dim,
                    text_span, patch_span):
    norm = 2 * d
    attn_pos = 4 * (d * d + d) + 2 * d * d + heads
    attn_cross = 4 * (d * d + d) + heads
    ffn = d * inner + inner + 2 * inner + inner * d + d
    total = vocab * d + patch_dim * d + d + text_pos * d + grid * grid * d
    total += text_pos * d + 2 * text_span * heads + 4 * patch_span ** 2 * heads
    total += enc * (3 * norm + attn_pos + ffn)
    total += dec * (5 * norm + attn_pos + attn_cross + ffn)
    return total + norm


def two_token_scores():
    # d = 1, one head: content I = [1, 2], positions P = [0.5, -1],
    # W^Q = 2, W^K = 3, U^Q = 1, U^K = 4, bias table B[-1] = 0.25,
    # B[0] = 0, B[+1] = -0.5.
    content, pos = [1.0, 2.0], [0.5, -1.0]
    bias = {-1: 0.25, 0: 0.0, 1: -0.5}
    return [[(content[i] * 2) * (content[j] * 3) + (pos[i] * 1) * (pos[j] * 4)
             + bias[j - i] for j in range(2)] for i in range(2)]


def layer_norm(x, gain, bias, eps=1e-5):
    mean = sum(x) / len(x)
    var = sum((v - mean) ** 2 for v in x) / len(x)
    return [g * (v - mean) / math.sqrt(var + eps) + b
            for v, g, b in zip(x, gain, bias)]


def gelu(x):
    return 0.5 * x * (1 + math.erf(x / math.sqrt(2)))


def single_token_encoder():
    # d = 2, one head, one layer, no positional or bias contribution for a
    # lone token (softmax over one key is 1). Embedding e = [1, 3].
    e = [1.0, 3.0]
    ln1 = layer_norm(e, [1.0, 1.0], [0.0, 0.0])
    # W^V = [[1, 0], [0, 2]], b^V = [0.5, 0], gamma = 1.5, W^O = I, b^O = 0.
    v = [ln1[0] * 1 + 0.5, ln1[1] * 2]
    attn = [1.5 * v[0], 1.5 * v[1]]
    post = layer_norm(attn, [2.0, 0.5], [0.1, -0.1])
    x = [e[0] + post[0], e[1] + post[1]]
    ln2 = layer_norm(x, [1.0, 1.0], [0.0, 0.0])
    # FFN inner = 2: W1 = [[1, -1], [2, 0.5]], b1 = [0, 0.25].
    h = [ln2[0] * 1 + ln2[1] * 2, ln2[0] * -1 + ln2[1] * 0.5 + 0.25]
    h = [gelu(t) for t in layer_norm(h, [1.0, 1.0], [0.0, 0.0])]
    # W2 = [[0.5, 1], [-1, 2]], b2 = [0.1, 0.2].
    out = [h[0] * 0.5 + h[1] * -1 + 0.1, h[0] * 1 + h[1] * 2 + 0.2]
    return [x[0] + out[0], x[1] + out[1]]


def zero_decoder_logits():
    # All decoder weights zero except the tied embedding; the final LN sees
    # the embedding of bos plus zero branch outputs.
    emb = {0: [0.0, 0.0], 1: [2.0, -1.0], 2: [0.5, 0.5], 3: [-1.0, 3.0]}
    h = layer_norm(emb[1], [1.0, 1.0], [0.0, 0.0])
    return [h[0] * emb[k][0] + h[1] * emb[k][1] for k in range(4)]


def values():
    weighted_f1, macro_f1 = f1_scores(list("AAAB"), list("AABB"))[1:]
    return {
        "kBpeFirstMergeLeft": bpe_first_merge(["abab", "ab"])[0],
        "kBpeFirstMergeRight": bpe_first_merge(["abab", "ab"])[1],
        "kQuarterBin": quantize(0.25, 1000),
        "kBin250Coordinate": 250 / 999,
        "kWhiteCode": surrogate_code(255, 8192),
        "kGrayCode": surrogate_code(128, 8192),
        "kRougeCatSat": float(rouge_l("the cat sat", "the cat")),
        "kMeteorIdentity": float(meteor("a b c d", "a b c d")),
        "kMeteorHalf": float(meteor("a b", "a c")),
        "kWeightedF1": float(weighted_f1),
        "kMacroF1": float(macro_f1),
        "kLr505": learning_rate(505, 1000, 10, 1e-4),
        "kFirstAdamWStep": adamw_first_step(0.0, 1.0, 0.1),
        "kThreeWayLoss": math.log(math.e + 2) - 1,
        "kToyParameterCount": parameter_count(8, 16, 2, 1, 1, 20, 16, 4, 4, 4, 2),
        "kMlmMasksOfTwenty": round(0.15 * 20),
        "kScore00": two_token_scores()[0][0],
        "kScore01": two_token_scores()[0][1],
        "kScore10": two_token_scores()[1][0],
        "kScore11": two_token_scores()[1][1],
        "kEncoderOut0": single_token_encoder()[0],
        "kEncoderOut1": single_token_encoder()[1],
        "kZeroDecoderLogit1": zero_decoder_logits()[1],
        "kZeroDecoderLogit2": zero_decoder_logits()[2],
        "kZeroDecoderLogit3": zero_decoder_logits()[3],
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--check", type=Path,
                        help="header with frozen values to compare against")
    args = parser.parse_args()
    vals = values()
    if not args.check:
        for name, v in vals.items():
            print(f"{name} = {v!r}")
        return 0
    text = args.check.read_text()
    bad = 0
    for name, v in vals.items():
        m = re.search(rf"{name}\s*=\s*([-+0-9.eE]+)", text)
        if not m or not math.isclose(float(m.group(1)), v, rel_tol=1e-15,
                                     abs_tol=1e-15):
            print(f"mismatch: {name} expected {v!r}")
            bad += 1
    print("all frozen values match" if not bad else f"{bad} mismatches")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
