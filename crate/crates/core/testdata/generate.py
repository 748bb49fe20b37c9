#!/usr/bin/env python3
"""Regenerates the golden fixtures in this directory.

Written against Python's json, hashlib and cryptography plus the small
CBOR encoder below, so the fixtures do not depend on the Rust encoders they
check.
"""

import base64
import hashlib
import json
import os
import struct

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey
from cryptography.hazmat.primitives import serialization

HERE = os.path.dirname(os.path.abspath(__file__))
SEED = bytes(range(32))
CREATED = "2024-05-01T12:00:00Z"


def canon_json(v):
    return json.dumps(v, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode()


def cbor_head(major, n):
    if n < 24:
        return bytes([major << 5 | n])
    for extra, fmt in ((24, ">B"), (25, ">H"), (26, ">I"), (27, ">Q")):
        if n < 1 << (8 * struct.calcsize(fmt)):
            return bytes([major << 5 | extra]) + struct.pack(fmt, n)
    raise ValueError(n)


def canon_cbor(v):
    if v is True:
        return b"\xf5"
    if v is False:
        return b"\xf4"
    if isinstance(v, int):
        return cbor_head(0, v)
    if isinstance(v, bytes):
        return cbor_head(2, len(v)) + v
    if isinstance(v, str):
        b = v.encode()
        return cbor_head(3, len(b)) + b
    if isinstance(v, list):
        return cbor_head(4, len(v)) + b"".join(canon_cbor(x) for x in v)
    if isinstance(v, dict):
        items = sorted((canon_cbor(k), canon_cbor(x)) for k, x in v.items())
        return cbor_head(5, len(items)) + b"".join(k + x for k, x in items)
    raise TypeError(type(v))


def b64(b):
    return base64.b64encode(b).decode()


def sha256(b):
    return hashlib.sha256(b).digest()


def digest_text(d):
    return "sha2-256:" + d.hex()


def records(data, delim=b"\n"):
    out, start = [], 0
    while start < len(data):
        i = data.find(delim, start)
        end = len(data) if i < 0 else i + len(delim)
        out.append(data[start:end])
        start = end
    return out


def mth(leaves):
    if len(leaves) == 0:
        return sha256(b"")
    if len(leaves) == 1:
        return sha256(b"\x00" + leaves[0])
    k = 1
    while k * 2 < len(leaves):
        k *= 2
    return sha256(b"\x01" + mth(leaves[:k]) + mth(leaves[k:]))


def bindings(payload, cbor):
    d = (lambda x: x) if cbor else digest_text
    chunk = 64
    chunks = [payload[i:i + chunk] for i in range(0, len(payload), chunk)]
    recs = records(payload)
    boxes, off = [], 0
    for i in range(0, len(recs), 4):
        body = b"".join(recs[i:i + 4])
        boxes.append({"digest": d(sha256(body)), "length": len(body), "offset": off})
        off += len(body)
    return [
        {"digest": d(sha256(payload)), "hashAlgorithm": "sha2-256", "kind": "static", "name": "static"},
        {
            "chunkSize": chunk,
            "digests": [d(sha256(c)) for c in chunks],
            "hashAlgorithm": "sha2-256",
            "kind": "fixed-chunk",
            "name": "chunk:64",
            "totalLength": len(payload),
        },
        {"boxes": boxes, "hashAlgorithm": "sha2-256", "kind": "box", "name": "minibatch:4"},
        {
            "hashAlgorithm": "sha2-256",
            "kind": "record-merkle",
            "leafCount": len(recs),
            "name": "record-merkle",
            "recordDelimiter": b"\n" if cbor else b64(b"\n"),
            "root": d(mth(recs)),
        },
    ]


def manifest(object_id, object_type, encoding, binds, origins=(), locator=None):
    m = {
        "bindings": binds,
        "createdAt": CREATED,
        "encodingInformation": encoding,
        "facsimiles": [],
        "objectId": object_id,
        "objectType": object_type,
        "originManifestIds": list(origins),
        "schemaVersion": 1,
    }
    if locator is not None:
        m["masterCopyLocator"] = locator
    return m


def static_only(payload, cbor=False):
    d = sha256(payload) if cbor else digest_text(sha256(payload))
    return [{"digest": d, "hashAlgorithm": "sha2-256", "kind": "static", "name": "static"}]


def manifest_id(m_json):
    return "sha2-256:" + sha256(canon_json(m_json)).hex()


KEY = Ed25519PrivateKey.from_private_bytes(SEED)
PUB = KEY.public_key().public_bytes(serialization.Encoding.Raw, serialization.PublicFormat.Raw)


def certificate(cbor):
    unsigned = {
        "issuer": "Golden Signer",
        "notAfter": "2034-01-01T00:00:00Z",
        "notBefore": "2024-01-01T00:00:00Z",
        "publicKey": b64(PUB),
        "publicKeyAlgorithm": "ed25519",
        "selfSigned": True,
        "signatureAlgorithm": "ed25519",
        "subject": "Golden Signer",
    }
    sig = KEY.sign(sha256(canon_json(unsigned)))
    cert = dict(unsigned, signature=b64(sig))
    if cbor:
        cert["publicKey"] = PUB
        cert["signature"] = sig
    return cert


def envelope(m_json, m_cbor, cbor):
    payload = canon_cbor(m_cbor) if cbor else canon_json(m_json)
    sig = KEY.sign(sha256(payload))
    env = {
        "certChain": [certificate(cbor)],
        "payload": payload if cbor else b64(payload),
        "serialization": "CBOR" if cbor else "JSON",
        "signature": sig if cbor else b64(sig),
        "signatureAlgorithm": "ed25519",
    }
    return canon_cbor(env) if cbor else canon_json(env)


def text_container(env_bytes, ser, payload):
    head = (
        "#%VAMP-Version: 1\n"
        "#%VAMP-ManifestType: Embedded\n"
        f"#%VAMP-ManifestSerialization: {ser}\n"
        f"#%VAMP-Manifest: {b64(env_bytes)}\n"
        "#%VAMP-End\n"
    )
    return head.encode() + payload


def text_stub(locator, ser, payload):
    head = (
        "#%VAMP-Version: 1\n"
        "#%VAMP-ManifestType: Detached\n"
        f"#%VAMP-ManifestSerialization: {ser}\n"
        f"#%VAMP-ManifestLocator: {locator}\n"
        "#%VAMP-End\n"
    )
    return head.encode() + payload


def binary_container(body, mtype, ser, payload):
    return b"VAMP" + struct.pack(">BBBI", 1, mtype, ser, len(body)) + body + payload


def write(name, data):
    path = os.path.join(HERE, name)
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "wb") as f:
        f.write(data if isinstance(data, bytes) else data.encode())


def main():
    payload = b"".join(f"{i},{i * i % 97},{'cat' if i % 3 else 'dog'}\n".encode() for i in range(30))
    write("training.csv", payload)

    m_json = manifest("data/training.csv", "dataset", "text/csv", bindings(payload, False), locator="data/training.csv")
    m_cbor = manifest("data/training.csv", "dataset", "text/csv", bindings(payload, True), locator="data/training.csv")
    write("manifest.json", canon_json(m_json))
    write("manifest.cbor", canon_cbor(m_cbor))
    mid = manifest_id(m_json)
    write("manifest.id", mid + "\n")

    write("signer.key", canon_json({"algorithm": "ed25519", "privateKey": b64(SEED)}))
    write("signer.cert", canon_json(certificate(False)))

    env_json = envelope(m_json, m_cbor, False)
    env_cbor = envelope(m_json, m_cbor, True)
    write("envelope.json", env_json)
    write("envelope.cbor", env_cbor)

    write("training.text.vamp", text_container(env_json, "JSON", payload))
    write("training.binary.vamp", binary_container(env_json, 1, 1, payload))
    write("training.cbor.binary.vamp", binary_container(env_cbor, 1, 2, payload))
    write("training.stub.text.vamp", text_stub(mid, "JSON", payload))
    write("training.stub.binary.vamp", binary_container(mid.encode(), 2, 1, payload))

    # Four-node lineage: two datasets and training code feed a model.
    parts = {
        "train": (b"1,2\n3,4\n", "dataset", "text/csv"),
        "val": (b"5,6\n", "dataset", "text/csv"),
        "train.py": (b"print('fit')\n", "code", "text/x-python"),
    }
    nodes, origin_ids = {}, []
    for name, (data, otype, enc) in parts.items():
        mj = manifest(name, otype, enc, static_only(data))
        mc = manifest(name, otype, enc, static_only(data, True))
        write(f"graph/{name}.man", envelope(mj, mc, False))
        i = manifest_id(mj)
        nodes[i] = f"{name} ({otype})"
        origin_ids.append(i)
    weights = b"\x00\x01weights"
    mj = manifest("model", "model", "application/octet-stream", static_only(weights), origins=origin_ids)
    mc = manifest("model", "model", "application/octet-stream", static_only(weights, True), origins=origin_ids)
    write("graph/model.man", envelope(mj, mc, False))
    model = manifest_id(mj)
    nodes[model] = "model (model)"
    # Parent lists keep manifest order, so sort only by child.
    out = "digraph provenance {\n"
    for i, label in sorted(nodes.items()):
        out += f'  "{i}" [label="{label}"];\n'
    for p in origin_ids:
        out += f'  "{model}" -> "{p}";\n'
    write("graph/lineage.dot", out + "}\n")


if __name__ == "__main__":
    main()
