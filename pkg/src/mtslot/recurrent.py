"""Projected LSTM cell, bi-directional encoder and the character word encoder.

Sequences are processed as padded, time-major batches: an input matrix of
shape (T*B, d) whose row ``t*B + b`` holds step ``t`` of sequence ``b``.
Positions past a sequence's length carry the previous state forward, so the
final state of every sequence is its state at its own last position.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Node, Parameter

GATES = ("i", "f", "c", "o")


@dataclass
class LstmpParams:
    input_dim: int
    cell_dim: int
    proj_dim: int | None
    W_x: dict[str, Parameter]
    W_m: dict[str, Parameter]
    b: dict[str, Parameter]
    peep: dict[str, Parameter] = field(default_factory=dict)
    W_proj: Parameter | None = None

    @classmethod
    def init(cls, prefix: str, input_dim: int, cell_dim: int, proj_dim: int | None,
             rng: np.random.Generator, init_range: float = 0.1, peepholes: bool = True):
        if min(input_dim, cell_dim) <= 0 or (proj_dim is not None and proj_dim <= 0):
            raise ValueError(f"bad LSTMP dims {input_dim}/{cell_dim}/{proj_dim}")
        out_dim = cell_dim if proj_dim is None else proj_dim

        def u(name, *shape):
            return Parameter(f"{prefix}/{name}", rng.uniform(-init_range, init_range, shape))

        W_x = {g: u(f"W_{g}x", cell_dim, input_dim) for g in GATES}
        W_m = {g: u(f"W_{g}m", cell_dim, out_dim) for g in GATES}
        peep = {g: u(f"w_{g}c", cell_dim) for g in ("i", "f", "o")} if peepholes else {}
        b = {g: u(f"b_{g}", cell_dim) for g in GATES}
        W_proj = u("W_proj", proj_dim, cell_dim) if proj_dim is not None else None
        return cls(input_dim, cell_dim, proj_dim, W_x, W_m, b, peep, W_proj)

    @property
    def out_dim(self) -> int:
        return self.cell_dim if self.proj_dim is None else self.proj_dim

    def parameters(self) -> list[Parameter]:
        ps = [*self.W_x.values(), *self.W_m.values(), *self.peep.values(), *self.b.values()]
        if self.W_proj is not None:
            ps.append(self.W_proj)
        return ps


@dataclass
class BiLstmParams:
    forward: LstmpParams
    backward: LstmpParams

    @classmethod
    def init(cls, prefix, input_dim, cell_dim, proj_dim, rng, init_range=0.1, peepholes=True):
        return cls(
            LstmpParams.init(f"{prefix}/fwd", input_dim, cell_dim, proj_dim, rng, init_range, peepholes),
            LstmpParams.init(f"{prefix}/bwd", input_dim, cell_dim, proj_dim, rng, init_range, peepholes),
        )

    @property
    def out_dim(self) -> int:
        return self.forward.out_dim + self.backward.out_dim

    def parameters(self) -> list[Parameter]:
        return self.forward.parameters() + self.backward.parameters()


class _Fused:
    """Gate weights stacked once per graph so each step needs one recurrent matmul."""

    def __init__(self, p: LstmpParams):
        self.p = p
        self.WxT = ad.transpose(ad.concat([p.W_x[g] for g in GATES], axis=0))
        self.WmT = ad.transpose(ad.concat([p.W_m[g] for g in GATES], axis=0))
        self.bias = ad.concat([p.b[g] for g in GATES], axis=0)
        self.projT = ad.transpose(p.W_proj) if p.W_proj is not None else None

    def input_part(self, x: Node) -> Node:
        return ad.add(ad.matmul(x, self.WxT), self.bias)

    def step(self, xz: Node, m_prev: Node, c_prev: Node) -> tuple[Node, Node]:
        p, n = self.p, self.p.cell_dim
        z = ad.add(xz, ad.matmul(m_prev, self.WmT))
        zi, zf, zc, zo = (ad.slice_(z, k * n, (k + 1) * n, axis=1) for k in range(4))
        if p.peep:
            zi = ad.add(zi, ad.mul(c_prev, p.peep["i"]))
            zf = ad.add(zf, ad.mul(c_prev, p.peep["f"]))
        i, f = ad.sigmoid(zi), ad.sigmoid(zf)
        c = ad.add(ad.mul(f, c_prev), ad.mul(i, ad.tanh(zc)))
        if p.peep:
            zo = ad.add(zo, ad.mul(c, p.peep["o"]))
        h = ad.mul(ad.sigmoid(zo), ad.tanh(c))
        m = ad.matmul(h, self.projT) if self.projT is not None else h
        return m, c


def _rows(v) -> Node:
    node = v if isinstance(v, Node) else ad.constant(v)
    return ad.reshape(node, (1, -1)) if node.value.ndim == 1 else node


def lstmp_step(p: LstmpParams, x_t, m_prev, c_prev) -> tuple[Node, Node]:
    """One LSTMP step on single vectors (or row batches). Returns (m_t, c_t)."""
    x, m0, c0 = _rows(x_t), _rows(m_prev), _rows(c_prev)
    if x.value.shape[1] != p.input_dim or m0.value.shape[1] != p.out_dim \
            or c0.value.shape[1] != p.cell_dim:
        raise ad.ShapeError(
            f"lstmp_step got x{x.value.shape} m{m0.value.shape} c{c0.value.shape} for "
            f"dims {p.input_dim}/{p.cell_dim}/{p.out_dim}")
    fused = _Fused(p)
    m, c = fused.step(fused.input_part(x), m0, c0)
    if np.ndim(x_t.value if isinstance(x_t, Node) else x_t) == 1:
        return ad.reshape(m, (-1,)), ad.reshape(c, (-1,))
    return m, c


def reverse_index(lengths: np.ndarray, T: int) -> np.ndarray:
    """Row permutation of a (T*B) time-major batch reversing each sequence in place.

    Padding rows stay put; the permutation is its own inverse.
    """
    B = len(lengths)
    idx = np.arange(T * B).reshape(T, B)
    out = idx.copy()
    for b, n in enumerate(lengths):
        out[:n, b] = idx[n - 1::-1, b]
    return out.reshape(-1)


def _run_direction(p: LstmpParams, X: Node, masks: list[np.ndarray], B: int):
    """Reference unroll built from elementary graph ops (slow; used by tests)."""
    fused = _Fused(p)
    xz = fused.input_part(X)
    m = ad.constant(np.zeros((B, p.out_dim)))
    c = ad.constant(np.zeros((B, p.cell_dim)))
    outs = []
    for t, mask in enumerate(masks):
        xz_t = ad.slice_(xz, t * B, (t + 1) * B, axis=0)
        m_new, c_new = fused.step(xz_t, m, c)
        if mask.all():
            m, c = m_new, c_new
        else:
            m = ad.select(mask, m_new, m)
            c = ad.select(mask, c_new, c)
        outs.append(m)
    return ad.concat(outs, axis=0)


def _sig(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def lstmp_scan(cells, X: Node, masks: list[np.ndarray], B: int, orders=None) -> Node:
    """Run D same-shaped directions over a padded batch as a single graph node.

    Same equations as the composed unroll, with a hand-written backward pass
    (BPTT). Direction ``d`` reads input rows in ``orders[d]`` (a permutation,
    None for identity) and its outputs are put back in natural row order.
    The D directions share one Python loop via a leading axis, and weight
    gradients are gathered across steps into single matmuls. Returns the
    (T*B, D*out_dim) outputs, direction blocks side by side.
    """
    cells = list(cells)
    D, T, n, od = len(cells), len(masks), cells[0].cell_dim, cells[0].out_dim
    orders = list(orders) if orders is not None else [None] * D
    inverse = [None if ix is None else np.argsort(ix) for ix in orders]
    Wx = np.stack([np.concatenate([c.W_x[g].value for g in GATES]) for c in cells])
    Wm = np.stack([np.concatenate([c.W_m[g].value for g in GATES]) for c in cells])
    bias = np.stack([np.concatenate([c.b[g].value for g in GATES]) for c in cells])[:, None]
    peep = bool(cells[0].peep)
    if peep:
        w_ic, w_fc, w_oc = (np.stack([c.peep[g].value for c in cells])[:, None]
                            for g in ("i", "f", "o"))
    P = np.stack([c.W_proj.value for c in cells]) if cells[0].W_proj is not None else None

    params = [q for c in cells for q in c.parameters()]
    keep = ad.grad_wanted((X, *params))
    x = X.value
    xs = np.stack([x if ix is None else x[ix] for ix in orders])
    xz = xs @ Wx.transpose(0, 2, 1) + bias
    WmT = np.ascontiguousarray(Wm.transpose(0, 2, 1))
    PT = P.transpose(0, 2, 1) if P is not None else None
    m = np.zeros((D, B, od))
    c = np.zeros((D, B, n))
    M_prev = np.empty((D, T * B, od))
    H = np.empty((D, T * B, n))
    out = np.empty((D, T * B, od))
    cache = []
    full = np.concatenate(masks).reshape(T, B).all(axis=1).tolist()
    for t in range(T):
        rows = slice(t * B, (t + 1) * B)
        z = xz[:, rows] + m @ WmT
        if peep:
            z[..., :n] += c * w_ic
            z[..., n:2 * n] += c * w_fc
        i_f = _sig(z[..., :2 * n])
        i, f, g = i_f[..., :n], i_f[..., n:], np.tanh(z[..., 2 * n:3 * n])
        c_new = f * c + i * g
        zo = z[..., 3 * n:]
        if peep:
            zo = zo + c_new * w_oc
        o = _sig(zo)
        tc = np.tanh(c_new)
        h = o * tc
        m_new = h @ PT if PT is not None else h
        if keep:
            M_prev[:, rows] = m
            H[:, rows] = h
            cache.append((c, i, f, g, o, tc, c_new))
        if full[t]:
            m, c = m_new, c_new
        else:
            live = masks[t] > 0
            m = np.where(live, m_new, m)
            c = np.where(live, c_new, c)
        out[:, rows] = m
    result = np.concatenate([out[d] if inv is None else out[d][inv]
                             for d, inv in enumerate(inverse)], axis=1)
    if not keep:
        return ad.Node(result, "lstmp-scan")

    def back(gout):
        gs = np.stack([gout[:, d * od:(d + 1) * od] for d in range(D)])
        gs = np.stack([gs[d] if ix is None else gs[d][ix] for d, ix in enumerate(orders)])
        dZ = np.empty((D, T * B, 4 * n))
        dMnew = np.empty((D, T * B, od))
        dm = np.zeros((D, B, od))
        dc = np.zeros((D, B, n))
        d_ic = d_fc = d_oc = 0.0
        for t in range(T - 1, -1, -1):
            rows = slice(t * B, (t + 1) * B)
            c_prev, i, f, g, o, tc, c_new = cache[t]
            mask = masks[t]
            dm_tot = gs[:, rows] + dm
            dm_new = mask * dm_tot
            dc_new = mask * dc
            dMnew[:, rows] = dm_new
            dh = dm_new @ P if P is not None else dm_new
            do = dh * tc * o * (1.0 - o)
            dcn = dc_new + dh * o * (1.0 - tc * tc)
            if peep:
                dcn = dcn + do * w_oc
                d_oc = d_oc + (do * c_new).sum(axis=1)
            di = dcn * g * i * (1.0 - i)
            df = dcn * c_prev * f * (1.0 - f)
            dg = dcn * i * (1.0 - g * g)
            dcp = dcn * f
            if peep:
                dcp = dcp + di * w_ic + df * w_fc
                d_ic = d_ic + (di * c_prev).sum(axis=1)
                d_fc = d_fc + (df * c_prev).sum(axis=1)
            dz = np.concatenate([di, df, dg, do], axis=2)
            dZ[:, rows] = dz
            dm = dz @ Wm + (1.0 - mask) * dm_tot
            dc = dcp + (1.0 - mask) * dc
        dZT = dZ.transpose(0, 2, 1)
        dWx, dWm, db = dZT @ xs, dZT @ M_prev, dZ.sum(axis=1)
        dP = dMnew.transpose(0, 2, 1) @ H if P is not None else None
        dxs = dZ @ Wx
        dx = np.zeros_like(x)
        for d, cell in enumerate(cells):
            for k, gname in enumerate(GATES):
                blk = slice(k * n, (k + 1) * n)
                ad.accumulate(cell.W_x[gname], dWx[d, blk])
                ad.accumulate(cell.W_m[gname], dWm[d, blk])
                ad.accumulate(cell.b[gname], db[d, blk])
            if peep:
                ad.accumulate(cell.peep["i"], d_ic[d])
                ad.accumulate(cell.peep["f"], d_fc[d])
                ad.accumulate(cell.peep["o"], d_oc[d])
            if dP is not None:
                ad.accumulate(cell.W_proj, dP[d])
            dx += dxs[d] if inverse[d] is None else dxs[d][inverse[d]]
        ad.accumulate(X, dx)

    return ad.record(result, "lstmp-scan", (X, *params), back)


def bilstm_batch(p: BiLstmParams, X: Node, lengths, reference: bool = False
                 ) -> tuple[Node, Node, Node]:
    """Encode a padded time-major batch.

    Returns (outputs (T*B, 2p), final forward m (B, p), final backward m (B, p)).
    ``reference`` unrolls with elementary ops instead of the fused scan.
    """
    lengths = np.asarray(lengths, dtype=int)
    B = len(lengths)
    if B == 0 or lengths.min() <= 0:
        raise ValueError("bilstm needs nonempty sequences")
    T = int(lengths.max())
    if X.value.shape[0] != T * B:
        raise ad.ShapeError(f"expected {T * B} rows for T={T}, B={B}, got {X.value.shape[0]}")
    masks = [(t < lengths).astype(float)[:, None] for t in range(T)]
    rev = reverse_index(lengths, T)

    # carried state makes the last scan block hold every sequence's final state
    last = np.arange((T - 1) * B, T * B)
    od = p.forward.out_dim
    if reference:
        fwd = _run_direction(p.forward, X, masks, B)
        bwd_rev = _run_direction(p.backward, ad.take(X, rev), masks, B)
        f_last = ad.take(fwd, last)
        b_last = ad.take(bwd_rev, last)
        return ad.concat([fwd, ad.take(bwd_rev, rev)], axis=1), f_last, b_last
    out = lstmp_scan([p.forward, p.backward], X, masks, B, orders=[None, rev])
    f_last = ad.take(ad.slice_(out, 0, od, axis=1), last)
    b_last = ad.take(ad.slice_(out, od, 2 * od, axis=1), rev[last])
    return out, f_last, b_last


def bilstm_encode(p: BiLstmParams, xs) -> Node:
    """Encode one sequence given as a (T, d) matrix (array or Node); returns (T, 2p)."""
    X = xs if isinstance(xs, Node) else ad.constant(np.asarray(xs, dtype=float))
    if X.value.ndim != 2 or X.value.shape[0] == 0:
        raise ValueError("bilstm_encode needs a nonempty (T, d) sequence")
    if X.value.shape[1] != p.forward.input_dim:
        raise ad.ShapeError(f"input dim {X.value.shape[1]} != {p.forward.input_dim}")
    out, _, _ = bilstm_batch(p, X, [X.value.shape[0]])
    return out


# ---------------------------------------------------------------- characters

UNK_CHAR = "\x00"


@dataclass
class CharEncoderParams:
    chars: dict[str, int]
    table: Parameter
    layer1: BiLstmParams
    layer2: BiLstmParams
    reduce_W: Parameter
    reduce_b: Parameter

    @classmethod
    def init(cls, chars, rng, char_dim=15, cell1=40, proj1=20, cell2=130, out_dim=40,
             init_range=0.1, peepholes=True, prefix="chars"):
        """``chars`` is an iterable of known characters; id 0 is the unknown character."""
        table_ids = {UNK_CHAR: 0}
        for ch in sorted(set(chars) - {UNK_CHAR}):
            table_ids[ch] = len(table_ids)
        u = lambda name, *shape: Parameter(f"{prefix}/{name}",
                                           rng.uniform(-init_range, init_range, shape))
        table = u("table", len(table_ids), char_dim)
        layer1 = BiLstmParams.init(f"{prefix}/l1", char_dim, cell1, proj1, rng, init_range, peepholes)
        layer2 = BiLstmParams.init(f"{prefix}/l2", layer1.out_dim, cell2, None, rng, init_range, peepholes)
        return cls(table_ids, table, layer1, layer2,
                   u("reduce_W", out_dim, layer2.out_dim), u("reduce_b", out_dim))

    @property
    def out_dim(self) -> int:
        return self.reduce_W.value.shape[0]

    def char_ids(self, word: str) -> list[int]:
        return [self.chars.get(ch, 0) for ch in word]

    def parameters(self) -> list[Parameter]:
        return [self.table, *self.layer1.parameters(), *self.layer2.parameters(),
                self.reduce_W, self.reduce_b]


def encode_words(p: CharEncoderParams, words) -> Node:
    """Character embeddings for a list of raw words, shape (N, out_dim)."""
    if not words or any(len(w) == 0 for w in words):
        raise ValueError("char encoder needs nonempty words")
    lengths = np.array([len(w) for w in words])
    B, T = len(words), int(lengths.max())
    ids = np.zeros((T, B), dtype=np.intp)
    for b, w in enumerate(words):
        ids[:len(w), b] = p.char_ids(w)
    X = ad.take(p.table, ids.reshape(-1))
    h1, _, _ = bilstm_batch(p.layer1, X, lengths)
    _, last_f, last_b = bilstm_batch(p.layer2, h1, lengths)
    state = ad.concat([last_f, last_b], axis=1)
    return ad.add(ad.matmul(state, ad.transpose(p.reduce_W)), p.reduce_b)


def char_word_encode(p: CharEncoderParams, word: str) -> Node:
    """Character embedding of a single word, shape (out_dim,)."""
    return ad.reshape(encode_words(p, [word]), (-1,))
