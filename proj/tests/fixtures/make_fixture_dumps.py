#!/usr/bin/env python3
"""Writes the toy dump fixtures and an expected-values manifest.

Independent of the C++ reader: the byte layout is produced with struct, and
the expected features are recomputed here with plain loops.

    python3 tests/fixtures/make_fixture_dumps.py tests/fixtures/toy_dumps
"""

import json
import math
import os
import random
import struct
import sys

SPECIAL, EOS, BOS = 1, 2, 4
L, H = 2, 2


def f32(x):
    return struct.unpack("<f", struct.pack("<f", x))[0]


def tok(text, begin, end, flags=0):
    return {"text": text, "begin": begin, "end": end, "flags": flags}


def spec(text, flags):
    return tok(text, -1, -1, SPECIAL | flags)


PAIRS = [
    {
        "pair_id": "toy-1",
        "source": "the cat sleeps",
        "target": "die Katze schläft",
        "nmt_source": [spec("eng_Latn", BOS), tok("the", 0, 3), tok("cat", 4, 7), tok("sle", 8, 11),
                       tok("eps", 11, 14), spec("</s>", EOS)],
        "nmt_target": [spec("deu_Latn", BOS), tok("die", 0, 3), tok("Kat", 4, 7), tok("ze", 7, 9),
                       tok("schläft", 10, 18), spec("</s>", EOS)],
        "lm_source": [spec("<s>", BOS), tok("th", 0, 2), tok("e", 2, 3), tok("cat", 4, 7), tok("sleeps", 8, 14)],
        "lm_target": [spec("<s>", BOS), tok("die", 0, 3), tok("Katze", 4, 9), tok("schl", 10, 14),
                      tok("äft", 14, 18)],
        "lm_source_p": [0.5, 0.25, 1.0, 0.125],
        "lm_target_p": [0.5, 0.5, 0.25, 1.0],
        "mt_target_p": [0.5, 0.25, 1.0, 0.75, 0.9],
    },
    {
        # "ice c" straddles the word boundary and belongs to both words
        "pair_id": "toy-2",
        "source": "ice cream",
        "target": "glace crème",
        "nmt_source": [spec("eng_Latn", BOS), tok("ice c", 0, 5), tok("ream", 5, 9), spec("</s>", EOS)],
        "nmt_target": [spec("fra_Latn", BOS), tok("gla", 0, 3), tok("ce", 3, 5), tok("crème", 6, 12),
                       spec("</s>", EOS)],
        "lm_source": [spec("<s>", BOS), tok("ice", 0, 3), tok("cream", 4, 9)],
        "lm_target": [spec("<s>", BOS), tok("glace", 0, 5), tok("cr", 6, 8), tok("ème", 8, 12)],
        "lm_source_p": [0.2, 0.6],
        "lm_target_p": [0.3, 0.8, 1.0],
        "mt_target_p": [0.4, 1.0, 0.35, 0.95],
    },
]


def attention(rng, rows, cols, causal):
    out = []
    for _ in range(L * H):
        block = []
        for r in range(rows):
            limit = r + 1 if causal else cols
            w = [rng.random() ** 3 + 0.01 if c < limit else 0.0 for c in range(cols)]
            total = sum(w)
            block.append([f32(x / total) for x in w])
        out.append(block)
    return out  # [L*H][rows][cols]


def word_spans(text):
    spans, at = [], 0
    for w in text.split(" "):
        n = len(w.encode("utf-8"))
        spans.append((at, at + n))
        at += n + 1
    return spans


def word_map(text, seq):
    out = []
    for b, e in word_spans(text):
        pos = [i + 1 for i, t in enumerate(seq)
               if not t["flags"] & SPECIAL and max(b, t["begin"]) < min(e, t["end"])]
        out.append(pos)
    return out


def flow(a, frm, to):
    total = 0.0
    for k in frm:
        for l in to:
            total += a[k - 1][l - 1]
    return total


def entropy(a, frm, to):
    total = 0.0
    for k in frm:
        mass = sum(a[k - 1][l - 1] for l in to)
        if mass <= 0:
            continue
        for l in to:
            p = a[k - 1][l - 1] / mass
            if p > 0:
                total -= p * math.log(p)
    return total


def averaged(mats, fn, frm, to):
    vals = []
    for a in mats:
        n = len(a[0])
        uniform = [[1.0 / n] * n for _ in a]
        raw, dummy = fn(a, frm, to), fn(uniform, frm, to)
        vals.append(0.0 if dummy == 0 else raw / dummy)
    return sum(vals) / len(vals)


def write_seq(buf, seq):
    buf += struct.pack("<I", len(seq))
    for t in seq:
        data = t["text"].encode("utf-8")
        buf += struct.pack("<iiB", t["begin"], t["end"], t["flags"]) + struct.pack("<I", len(data)) + data


def main():
    out_dir = sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), "toy_dumps")
    os.makedirs(out_dir, exist_ok=True)
    rng = random.Random(1234)
    manifest = {"format": "TDWB", "version": 1, "models": {"lm": "toy-lm", "nmt": "toy-nmt"},
                "tokenizers": {"lm": "toy-lm-tok", "nmt": "toy-nmt-tok"}, "layers": L, "heads": H,
                "pairs": [], "failures": [{"pair_id": "toy-3", "reason": "sequence too long"}]}
    expected = {"pairs": []}

    for p in PAIRS:
        S, T = len(p["nmt_source"]), len(p["nmt_target"])
        enc = attention(rng, S, S, False)
        cross = attention(rng, T, S, False)
        dec = attention(rng, T, T, True)
        lps = {k: [f32(math.log(x)) for x in p[k + "_p"]] for k in ("lm_source", "lm_target", "mt_target")}
        assert len(lps["mt_target"]) == T - 1
        assert len(lps["lm_source"]) + 1 == len(p["lm_source"])
        assert len(lps["lm_target"]) + 1 == len(p["lm_target"])

        buf = bytearray(b"TDWB")
        buf += struct.pack("<HHHHHH", 1, L, H, S, T, 0)
        for tensor in (enc, cross, dec):
            for block in tensor:
                for row in block:
                    buf += struct.pack("<%df" % len(row), *row)
        for k in ("lm_source", "lm_target", "mt_target"):
            buf += struct.pack("<I", len(lps[k])) + struct.pack("<%df" % len(lps[k]), *lps[k])
        for s in (p["pair_id"], p["source"], p["target"]):
            data = s.encode("utf-8")
            buf += struct.pack("<I", len(data)) + data
        for k in ("nmt_source", "nmt_target", "lm_source", "lm_target"):
            write_seq(buf, p[k])
        fname = p["pair_id"] + ".tdwb"
        with open(os.path.join(out_dir, fname), "wb") as fh:
            fh.write(buf)
        manifest["pairs"].append({"pair_id": p["pair_id"], "file": fname})

        src_map = word_map(p["source"], p["nmt_source"])
        tgt_map = word_map(p["target"], p["nmt_target"])
        lm_src_map = word_map(p["source"], p["lm_source"])
        lm_tgt_map = word_map(p["target"], p["lm_target"])
        x = [i + 1 for i, t in enumerate(p["nmt_source"]) if not t["flags"] & SPECIAL]
        eos = [i + 1 for i, t in enumerate(p["nmt_source"]) if t["flags"] & EOS]
        y = [i + 1 for i, t in enumerate(p["nmt_target"]) if not t["flags"] & SPECIAL]
        tgt_special = {i + 1 for i, t in enumerate(p["nmt_target"]) if t["flags"] & SPECIAL}

        words = []
        for w, u in enumerate(src_map, start=1):
            ctx = [i for i in x if i not in u]
            lm_pos = lm_src_map[w - 1]
            words.append({
                "side": "source", "word": w, "nmt": u, "lm": lm_pos,
                "features": {
                    "s_lm": sum(-lps["lm_source"][i - 2] for i in lm_pos) / len(lm_pos),
                    "f_e_uu": averaged(enc, flow, u, u),
                    "f_e_u_ctx": averaged(enc, flow, u, ctx),
                    "f_e_u_eos": averaged(enc, flow, u, eos),
                    "f_e_ctx_u": averaged(enc, flow, ctx, u),
                    "H_e_u_x": averaged(enc, entropy, u, x),
                    "f_c_y_u": averaged(cross, flow, y, u),
                }})
        for w, v in enumerate(tgt_map, start=1):
            prefix = [i for i in range(1, max(v) + 1) if i not in tgt_special]
            preceding = [i for i in prefix if i not in v]
            lm_pos = lm_tgt_map[w - 1]
            words.append({
                "side": "target", "word": w, "nmt": v, "lm": lm_pos,
                "features": {
                    "s_lm": sum(-lps["lm_target"][i - 2] for i in lm_pos) / len(lm_pos),
                    "s_mt": sum(-lps["mt_target"][i - 2] for i in v) / len(v),
                    "f_c_v_eos": averaged(cross, flow, v, eos),
                    "H_c_v_x": averaged(cross, entropy, v, x),
                    "f_d_vv": averaged(dec, flow, v, v),
                    "f_d_v_ctx": averaged(dec, flow, v, preceding),
                    "H_d_v_prefix": averaged(dec, entropy, v, prefix),
                }})

        expected["pairs"].append({
            "pair_id": p["pair_id"], "file": fname, "source": p["source"], "target": p["target"],
            "layers": L, "heads": H, "S": S, "T": T, "bytes": len(buf),
            "lm_source": lps["lm_source"], "lm_target": lps["lm_target"], "mt_target": lps["mt_target"],
            "nmt_source": p["nmt_source"], "nmt_target": p["nmt_target"],
            "lm_source_tokens": p["lm_source"], "lm_target_tokens": p["lm_target"],
            "enc_attn_first_row": enc[0][0], "cross_attn_last_row": cross[-1][-1],
            "words": words,
        })

    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    with open(os.path.join(out_dir, "expected.json"), "w", encoding="utf-8") as fh:
        json.dump(expected, fh, indent=1, ensure_ascii=False)
        fh.write("\n")


if __name__ == "__main__":
    main()
