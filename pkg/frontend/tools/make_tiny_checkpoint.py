#!/usr/bin/env python3
"""Fabricate the tiny local checkpoint the tests run against.

Writes a 2-block single-head transformer encoder as a hand-serialized
ONNX file (no onnx package needed), a word-level tokenizer, the model
config, and reference hidden states computed with a parallel numpy
forward pass. The fixture lives in the repository so tests never touch
the network; rerunning this script reproduces it byte for byte.
"""

import json
import re
import struct
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
MODEL_DIR = ROOT / "fixtures" / "tiny-distilbert"
EXPECTED_DIR = ROOT / "fixtures" / "expected"

HIDDEN = 32
FFN = 64
BLOCKS = 2
MAX_POS = 96
EPS = 1e-5
SEED = 20260814

WORDS = (
    "the a an and or of to in on for with is was are be not no yes "
    "good bad great poor fine awful solid weak strong clear vague "
    "story plot acting music film book service food price quality "
    "zero one two three four five six seven eight nine ten "
    "summary review answer question first second same different "
    "short long new old true false"
).split()


# ---------------------------------------------------------------------------
# protobuf wire format, just enough for an ONNX ModelProto


def _varint(n: int) -> bytes:
    if n < 0:
        n += 1 << 64
    out = bytearray()
    while True:
        b = n & 0x7F
        n >>= 7
        if n:
            out.append(b | 0x80)
        else:
            out.append(b)
            return bytes(out)


def _tag(field: int, wire: int) -> bytes:
    return _varint((field << 3) | wire)


def _ld(field: int, payload: bytes) -> bytes:
    return _tag(field, 2) + _varint(len(payload)) + payload


def _vint(field: int, value: int) -> bytes:
    return _tag(field, 0) + _varint(value)


def _f32(field: int, value: float) -> bytes:
    return _tag(field, 5) + struct.pack("<f", value)


def _string(field: int, s: str) -> bytes:
    return _ld(field, s.encode())


def tensor_proto(name: str, arr: np.ndarray) -> bytes:
    if arr.dtype == np.float32:
        dtype_id = 1
    elif arr.dtype == np.int64:
        dtype_id = 7
    else:
        raise ValueError(f"unsupported dtype {arr.dtype}")
    msg = b"".join(_vint(1, d) for d in arr.shape)
    msg += _vint(2, dtype_id)
    msg += _string(8, name)
    msg += _ld(9, np.ascontiguousarray(arr).tobytes())
    return msg


def attr_int(name: str, v: int) -> bytes:
    return _string(1, name) + _vint(3, v) + _vint(20, 2)


def attr_float(name: str, v: float) -> bytes:
    return _string(1, name) + _f32(2, v) + _vint(20, 1)


def attr_ints(name: str, vs) -> bytes:
    return _string(1, name) + b"".join(_vint(8, v) for v in vs) + _vint(20, 7)


def node(op: str, inputs, outputs, attrs=()) -> bytes:
    msg = b"".join(_string(1, i) for i in inputs)
    msg += b"".join(_string(2, o) for o in outputs)
    msg += _string(3, f"{op}_{outputs[0]}")
    msg += _string(4, op)
    msg += b"".join(_ld(5, a) for a in attrs)
    return msg


def value_info(name: str, elem_type: int, dims) -> bytes:
    shape = b"".join(
        _ld(1, _vint(1, d) if isinstance(d, int) else _string(2, d)) for d in dims
    )
    tensor_type = _vint(1, elem_type) + _ld(2, shape)
    return _string(1, name) + _ld(2, _ld(1, tensor_type))


def model_proto(nodes, initializers, inputs, outputs, opset: int = 17) -> bytes:
    g = b"".join(_ld(1, n) for n in nodes)
    g += _string(2, "tiny_encoder")
    g += b"".join(_ld(5, t) for t in initializers)
    g += b"".join(_ld(11, i) for i in inputs)
    g += b"".join(_ld(12, o) for o in outputs)
    msg = _vint(1, 8)  # ir_version
    msg += _string(2, "make_tiny_checkpoint")
    msg += _ld(7, g)
    msg += _ld(8, _vint(2, opset))  # default domain
    return msg


# ---------------------------------------------------------------------------
# the graph and its numpy twin


def make_weights(vocab_size: int) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(SEED)
    w = {
        "p.word_emb": rng.normal(0, 0.5, (vocab_size, HIDDEN)),
        "p.pos_emb": rng.normal(0, 0.1, (MAX_POS, HIDDEN)),
        "p.emb_ln_g": np.ones(HIDDEN),
        "p.emb_ln_b": np.zeros(HIDDEN),
    }
    for b in range(BLOCKS):
        for name in ("wq", "wk", "wv", "wo"):
            w[f"p.b{b}.{name}"] = rng.normal(0, 0.3, (HIDDEN, HIDDEN))
            w[f"p.b{b}.{name[1]}bias"] = rng.normal(0, 0.05, HIDDEN)
        w[f"p.b{b}.ln1_g"] = rng.uniform(0.8, 1.2, HIDDEN)
        w[f"p.b{b}.ln1_b"] = rng.normal(0, 0.05, HIDDEN)
        w[f"p.b{b}.w1"] = rng.normal(0, 0.3, (HIDDEN, FFN))
        w[f"p.b{b}.b1"] = rng.normal(0, 0.05, FFN)
        w[f"p.b{b}.w2"] = rng.normal(0, 0.3, (FFN, HIDDEN))
        w[f"p.b{b}.b2"] = rng.normal(0, 0.05, HIDDEN)
        w[f"p.b{b}.ln2_g"] = rng.uniform(0.8, 1.2, HIDDEN)
        w[f"p.b{b}.ln2_b"] = rng.normal(0, 0.05, HIDDEN)
    return {k: v.astype(np.float32) for k, v in w.items()}


def build_onnx(weights: dict[str, np.ndarray]) -> bytes:
    inits = [tensor_proto(k, v) for k, v in weights.items()]
    inits += [
        tensor_proto("c.i64_zero", np.array(0, dtype=np.int64)),
        tensor_proto("c.i64_one", np.array(1, dtype=np.int64)),
        tensor_proto("c.axes1", np.array([1], dtype=np.int64)),
        tensor_proto("c.f_one", np.array(1.0, dtype=np.float32)),
        tensor_proto("c.f_negbig", np.array(-1e9, dtype=np.float32)),
        tensor_proto("c.f_scale", np.array(1.0 / np.sqrt(HIDDEN), dtype=np.float32)),
    ]

    nodes = [
        node("Gather", ["p.word_emb", "input_ids"], ["we"]),
        node("Shape", ["input_ids"], ["ids_shape"]),
        node("Gather", ["ids_shape", "c.i64_one"], ["seq_len"]),
        node("Range", ["c.i64_zero", "seq_len", "c.i64_one"], ["positions"]),
        node("Gather", ["p.pos_emb", "positions"], ["pe"]),
        node("Add", ["we", "pe"], ["emb"]),
        node(
            "LayerNormalization",
            ["emb", "p.emb_ln_g", "p.emb_ln_b"],
            ["x0"],
            [attr_float("epsilon", EPS)],
        ),
        node("Cast", ["attention_mask"], ["mask_f"], [attr_int("to", 1)]),
        node("Sub", ["c.f_one", "mask_f"], ["mask_inv"]),
        node("Mul", ["mask_inv", "c.f_negbig"], ["mask_bias2"]),
        node("Unsqueeze", ["mask_bias2", "c.axes1"], ["mask_bias"]),
    ]

    x = "x0"
    for b in range(BLOCKS):
        p = f"p.b{b}"
        t = f"b{b}"
        nodes += [
            node("MatMul", [x, f"{p}.wq"], [f"{t}.qm"]),
            node("Add", [f"{t}.qm", f"{p}.qbias"], [f"{t}.q"]),
            node("MatMul", [x, f"{p}.wk"], [f"{t}.km"]),
            node("Add", [f"{t}.km", f"{p}.kbias"], [f"{t}.k"]),
            node("MatMul", [x, f"{p}.wv"], [f"{t}.vm"]),
            node("Add", [f"{t}.vm", f"{p}.vbias"], [f"{t}.v"]),
            node("Transpose", [f"{t}.k"], [f"{t}.kt"], [attr_ints("perm", (0, 2, 1))]),
            node("MatMul", [f"{t}.q", f"{t}.kt"], [f"{t}.raw"]),
            node("Mul", [f"{t}.raw", "c.f_scale"], [f"{t}.scaled"]),
            node("Add", [f"{t}.scaled", "mask_bias"], [f"{t}.masked"]),
            node("Softmax", [f"{t}.masked"], [f"{t}.probs"], [attr_int("axis", -1)]),
            node("MatMul", [f"{t}.probs", f"{t}.v"], [f"{t}.ctx"]),
            node("MatMul", [f"{t}.ctx", f"{p}.wo"], [f"{t}.om"]),
            node("Add", [f"{t}.om", f"{p}.obias"], [f"{t}.attn"]),
            node("Add", [x, f"{t}.attn"], [f"{t}.res1"]),
            node(
                "LayerNormalization",
                [f"{t}.res1", f"{p}.ln1_g", f"{p}.ln1_b"],
                [f"{t}.x1"],
                [attr_float("epsilon", EPS)],
            ),
            node("MatMul", [f"{t}.x1", f"{p}.w1"], [f"{t}.h1m"]),
            node("Add", [f"{t}.h1m", f"{p}.b1"], [f"{t}.h1"]),
            node("Relu", [f"{t}.h1"], [f"{t}.h1r"]),
            node("MatMul", [f"{t}.h1r", f"{p}.w2"], [f"{t}.h2m"]),
            node("Add", [f"{t}.h2m", f"{p}.b2"], [f"{t}.ffn"]),
            node("Add", [f"{t}.x1", f"{t}.ffn"], [f"{t}.res2"]),
            node(
                "LayerNormalization",
                [f"{t}.res2", f"{p}.ln2_g", f"{p}.ln2_b"],
                [f"{t}.x2" if b < BLOCKS - 1 else "last_hidden_state"],
                [attr_float("epsilon", EPS)],
            ),
        ]
        x = f"b{b}.x2"

    inputs = [
        value_info("input_ids", 7, ["batch", "seq"]),
        value_info("attention_mask", 7, ["batch", "seq"]),
    ]
    outputs = [value_info("last_hidden_state", 1, ["batch", "seq", HIDDEN])]
    return model_proto(nodes, inits, inputs, outputs)


def reference_forward(weights: dict[str, np.ndarray], ids: list[int]) -> np.ndarray:
    """Numpy twin of the graph, float32 throughout, batch of one."""

    def layer_norm(x, g, b):
        mu = x.mean(axis=-1, keepdims=True, dtype=np.float32)
        var = np.mean((x - mu) ** 2, axis=-1, keepdims=True, dtype=np.float32)
        return ((x - mu) / np.sqrt(var + np.float32(EPS))) * g + b

    x = weights["p.word_emb"][ids] + weights["p.pos_emb"][: len(ids)]
    x = layer_norm(x, weights["p.emb_ln_g"], weights["p.emb_ln_b"])
    for b in range(BLOCKS):
        p = f"p.b{b}"
        q = x @ weights[f"{p}.wq"] + weights[f"{p}.qbias"]
        k = x @ weights[f"{p}.wk"] + weights[f"{p}.kbias"]
        v = x @ weights[f"{p}.wv"] + weights[f"{p}.vbias"]
        scores = (q @ k.T) * np.float32(1.0 / np.sqrt(HIDDEN))
        scores = scores - scores.max(axis=-1, keepdims=True)
        probs = np.exp(scores)
        probs = probs / probs.sum(axis=-1, keepdims=True)
        x = layer_norm(
            x + (probs @ v) @ weights[f"{p}.wo"] + weights[f"{p}.obias"],
            weights[f"{p}.ln1_g"],
            weights[f"{p}.ln1_b"],
        )
        h = np.maximum(x @ weights[f"{p}.w1"] + weights[f"{p}.b1"], np.float32(0))
        x = layer_norm(
            x + h @ weights[f"{p}.w2"] + weights[f"{p}.b2"],
            weights[f"{p}.ln2_g"],
            weights[f"{p}.ln2_b"],
        )
    return x.astype(np.float32)


# ---------------------------------------------------------------------------
# tokenizer, config, reference records


def tokenize(vocab: dict[str, int], text: str) -> list[int]:
    pieces = re.findall(r"\w+|[^\w\s]+", text.lower())
    return [vocab.get(p, vocab["[UNK]"]) for p in pieces]


def write_hsf(path: Path, matrix: np.ndarray) -> None:
    m = np.ascontiguousarray(matrix, dtype=np.float32)
    path.write_bytes(struct.pack("<4sIII", b"HSF1", 1, m.shape[0], m.shape[1]) + m.tobytes())


def main() -> None:
    vocab = {"[UNK]": 0}
    for word in WORDS:
        vocab[word] = len(vocab)
    for mark in (".", ",", ":", "!", "?"):
        vocab[mark] = len(vocab)

    (MODEL_DIR / "onnx").mkdir(parents=True, exist_ok=True)
    EXPECTED_DIR.mkdir(parents=True, exist_ok=True)

    weights = make_weights(len(vocab))
    (MODEL_DIR / "onnx" / "model.onnx").write_bytes(build_onnx(weights))

    (MODEL_DIR / "config.json").write_text(
        json.dumps(
            {
                "model_type": "distilbert",
                "architectures": ["DistilBertModel"],
                "dim": HIDDEN,
                "hidden_dim": FFN,
                "n_heads": 1,
                "n_layers": BLOCKS,
                "vocab_size": len(vocab),
                "max_position_embeddings": MAX_POS,
            },
            indent=2,
        )
        + "\n"
    )
    (MODEL_DIR / "tokenizer.json").write_text(
        json.dumps(
            {
                "version": "1.0",
                "truncation": None,
                "padding": None,
                "added_tokens": [
                    {
                        "id": 0,
                        "content": "[UNK]",
                        "single_word": False,
                        "lstrip": False,
                        "rstrip": False,
                        "normalized": False,
                        "special": True,
                    }
                ],
                "normalizer": {"type": "Lowercase"},
                "pre_tokenizer": {"type": "Whitespace"},
                "post_processor": None,
                "decoder": None,
                # whole words only, no continuation pieces: any unknown
                # word falls through to [UNK], like a word-level model
                "model": {
                    "type": "WordPiece",
                    "vocab": vocab,
                    "unk_token": "[UNK]",
                    "continuing_subword_prefix": "##",
                    "max_input_chars_per_word": 100,
                },
            },
            indent=2,
        )
        + "\n"
    )
    (MODEL_DIR / "tokenizer_config.json").write_text(
        json.dumps(
            {
                "tokenizer_class": "PreTrainedTokenizerFast",
                "model_max_length": MAX_POS,
                "model_input_names": ["input_ids", "attention_mask"],
            },
            indent=2,
        )
        + "\n"
    )

    # every split needs >= 2 rows with distinct targets so the training
    # side can fit the normalizer and compute correlations
    records = [
        {"id": "r0", "text_a": "the story was great", "text_b": "good plot and acting",
         "target": 4.5, "split": "train"},
        {"id": "r1", "text_a": "awful food", "text_b": "poor service , bad price",
         "target": 0.5, "split": "train"},
        {"id": "r2", "text_a": "strong music", "text_b": "new and true quality",
         "target": 4.0, "split": "train"},
        {"id": "r3", "text_a": "weak story and vague plot", "text_b": "old review",
         "target": 1.25, "split": "train"},
        {"id": "r4", "text_a": "the film was fine", "text_b": "not great not bad",
         "target": 2.0, "split": "val"},
        {"id": "r5", "text_a": "same answer , different question", "text_b": "short summary",
         "target": 2.75, "split": "val"},
        {"id": "r6", "text_a": "solid book !", "text_b": "clear answer to a long question",
         "target": 3.25, "split": "test"},
        {"id": "r7", "text_a": "no service and bad food", "text_b": "one star for ten",
         "target": 1.0, "split": "test"},
    ]
    template = "A: {text_a}\nB: {text_b}"
    with (EXPECTED_DIR / "records.jsonl").open("w") as f:
        for r in records:
            f.write(json.dumps(r) + "\n")
    (EXPECTED_DIR / "template.txt").write_text(template + "\n")

    meta = {"hidden_size": HIDDEN, "records": {}}
    for r in records:
        text = template.replace("{text_a}", r["text_a"]).replace("{text_b}", r["text_b"])
        ids = tokenize(vocab, text)
        write_hsf(EXPECTED_DIR / f"{r['id']}.hsf", reference_forward(weights, ids))
        write_hsf(
            EXPECTED_DIR / f"{r['id']}.maxlen4.hsf",
            reference_forward(weights, ids[:4]),
        )
        meta["records"][r["id"]] = {"text": text, "token_ids": ids}
    (EXPECTED_DIR / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")

    n_params = sum(v.size for v in weights.values())
    print(f"checkpoint: {len(vocab)} vocab, hidden {HIDDEN}, {n_params} weights")
    print(f"wrote {MODEL_DIR} and {len(records)} reference states in {EXPECTED_DIR}")


if __name__ == "__main__":
    main()
