"""Single-file model persistence.

Layout: text header lines (magic, version, algorithm, hyperparameter echo),
the tree block, then length-prefixed little-endian binary sections for the
embedding, the idf table and the node classifiers.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .hsm import HsmModel
from .learner import NodeModel, Representation
from .plt import PltModel
from .tree import format_tree, parse_tree

MAGIC = b"XTPLT"
FORMAT_VERSION = 1

_F_PRESENT, _F_CONSTANT, _F_NEGATIVE = 1, 2, 4


class ModelFormatError(ValueError):
    pass


@dataclass
class ModelBundle:
    model: PltModel | HsmModel
    idf: np.ndarray | None = None
    hyper: dict = field(default_factory=dict)

    @property
    def algo(self) -> str:
        return "hsm" if isinstance(self.model, HsmModel) else "plt"


def _f8(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def dumps(bundle: ModelBundle) -> bytes:
    model = bundle.model
    rep = model.representation
    out = io.BytesIO()
    hyper = dict(bundle.hyper)
    if isinstance(model, PltModel):
        hyper["renormalize"] = bool(model.renormalize)
    out.write(MAGIC + b"\n")
    out.write(f"version {FORMAT_VERSION}\n".encode())
    out.write(f"algo {bundle.algo}\n".encode())
    out.write(b"hyper " + json.dumps(hyper, sort_keys=True).encode() + b"\n")
    tree_text = format_tree(model.tree).encode()
    out.write(f"treeblock {len(tree_text)}\n".encode())
    out.write(tree_text)
    out.write(f"repr {rep.kind} {rep.num_features} {rep.dim} {rep.weighting}\n".encode())
    emb = _f8(rep.embedding) if rep.kind == "dense" else b""
    out.write(f"embedding {len(emb)}\n".encode())
    out.write(emb)
    idf = _f8(bundle.idf) if bundle.idf is not None else b""
    out.write(f"idf {len(idf)}\n".encode())
    out.write(idf)
    out.write(f"nodes {len(model.nodes)}\n".encode())
    for node in model.nodes:
        if node is None:
            out.write(struct.pack("<B", 0))
            continue
        flags = _F_PRESENT | (_F_CONSTANT if node.constant_positive else 0) | (_F_NEGATIVE if node.seen_negative else 0)
        w = node.weights
        nz = np.flatnonzero(w)
        out.write(struct.pack("<BdQI", flags, node.bias, node.t, nz.size))
        out.write(nz.astype("<u4").tobytes())
        out.write(_f8(w[nz]))
    out.write(b"end\n")
    return out.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def line(self) -> str:
        end = self.data.find(b"\n", self.pos)
        if end < 0:
            raise ModelFormatError("truncated model file")
        text = self.data[self.pos:end].decode()
        self.pos = end + 1
        return text

    def keyed(self, key: str) -> str:
        text = self.line()
        head, _, rest = text.partition(" ")
        if head != key:
            raise ModelFormatError(f"expected section {key!r}, found {head!r}")
        return rest

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ModelFormatError("truncated model file")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def loads(data: bytes) -> ModelBundle:
    r = _Reader(data)
    if r.line().encode() != MAGIC:
        raise ModelFormatError("not an XTPLT model file")
    version = int(r.keyed("version"))
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {version}")
    algo = r.keyed("algo")
    if algo not in ("plt", "hsm"):
        raise ModelFormatError(f"unknown algorithm {algo!r}")
    hyper = json.loads(r.keyed("hyper"))
    tree = parse_tree(r.take(int(r.keyed("treeblock"))).decode())
    kind, num_features, dim, weighting = r.keyed("repr").split()
    num_features, dim = int(num_features), int(dim)
    emb_bytes = r.take(int(r.keyed("embedding")))
    embedding = np.frombuffer(emb_bytes, dtype="<f8").reshape(num_features, dim).astype(float) if emb_bytes else None
    rep = Representation(kind, num_features, dim, weighting, embedding)
    idf_bytes = r.take(int(r.keyed("idf")))
    idf = np.frombuffer(idf_bytes, dtype="<f8").astype(float) if idf_bytes else None
    n_nodes = int(r.keyed("nodes"))
    if n_nodes != tree.num_nodes:
        raise ModelFormatError("node count does not match the tree")
    nodes: list[NodeModel | None] = []
    for _ in range(n_nodes):
        (flags,) = r.unpack("<B")
        if not flags & _F_PRESENT:
            nodes.append(None)
            continue
        bias, t, nnz = struct.unpack("<dQI", r.take(struct.calcsize("<dQI")))
        idx = np.frombuffer(r.take(4 * nnz), dtype="<u4").astype(np.int64)
        vals = np.frombuffer(r.take(8 * nnz), dtype="<f8")
        raw = np.zeros(rep.dim)
        raw[idx] = vals
        nodes.append(NodeModel(rep.dim, raw, 1.0, bias, int(t), bool(flags & _F_CONSTANT), bool(flags & _F_NEGATIVE)))
    if r.line() != "end":
        raise ModelFormatError("missing end marker")
    if algo == "plt":
        model = PltModel(tree, nodes, rep, renormalize=bool(hyper.get("renormalize", False)))
    else:
        model = HsmModel(tree, nodes, rep)
    return ModelBundle(model, idf, hyper)


def save_model(bundle: ModelBundle, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(bundle))


def load_model(path) -> ModelBundle:
    with open(path, "rb") as fh:
        return loads(fh.read())
