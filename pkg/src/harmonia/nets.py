"""Network families whose forward pass carries first and second derivatives.

Every forward below propagates a batch of jets: value (B, W), gradient
(B, d, W) and Hessian arrays flow through the layers together. Parameters
enter as one flat vector (numpy array for plain evaluation, tape Var while
training), so the same code serves evaluation and learning.

Hessians travel in packed form, one stream per upper-triangle component;
the full (B, d, d, W) array handed back mirrors each off-diagonal pair from
the same computed number, so equality of mixed partials holds bitwise.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import geometry, jets, tape

ACTIVATIONS = ("tanh", "sin", "exp")
HOLOMORPHIC_ACTIVATIONS = ("sin", "exp")

PARAM_MAGIC = b"HNET"
PARAM_VERSION = 1
PARAM_KINDS = {"real": 1, "complex": 2, "curl_pair": 3, "piecewise": 4,
               "quantum": 5, "bundle": 6}


@dataclass(frozen=True)
class MlpSpec:
    """Shape of a multilayer perceptron; widths count complex units for
    holomorphic networks."""

    input_dim: int
    hidden_layers: int = 3
    width: int = 32
    activation: str = "tanh"
    output_dim: int = 1

    def layer_dims(self):
        return ([self.input_dim] + [self.width] * self.hidden_layers
                + [self.output_dim])


def _expand(x, axis):
    """Insert a length-1 axis (reshape, so it works on tape Vars)."""
    shape = list(tape.value_of(x).shape)
    shape.insert(axis, 1)
    return tape.reshape(x, tuple(shape))


_TRIANGLE_CACHE = {}


def _triangle(d):
    """Index helpers for the packed Hessian: component t holds pair
    (tri_i[t], tri_j[t]) with i <= j; pair_mat[i, j] maps back to t."""
    if d not in _TRIANGLE_CACHE:
        pairs = [(i, j) for i in range(d) for j in range(i, d)]
        tri_i = np.array([p[0] for p in pairs])
        tri_j = np.array([p[1] for p in pairs])
        mat = np.empty((d, d), dtype=np.intp)
        for t, (i, j) in enumerate(pairs):
            mat[i, j] = mat[j, i] = t
        _TRIANGLE_CACHE[d] = (tri_i, tri_j, mat)
    return _TRIANGLE_CACHE[d]


class RealMlp:
    """Fully connected net on d real inputs, tanh or sin units."""

    kind = "real"

    def __init__(self, spec, input_shift=None, input_scale=1.0):
        if spec.activation not in ("tanh", "sin"):
            raise ValueError(f"real nets take tanh or sin units, got "
                             f"{spec.activation!r}")
        self.spec = spec
        self.input_shift = np.zeros(spec.input_dim) if input_shift is None \
            else np.asarray(input_shift, float)
        self.input_scale = float(input_scale)
        dims = spec.layer_dims()
        self._layers = []
        off = 0
        for i in range(len(dims) - 1):
            nin, nout = dims[i], dims[i + 1]
            w = slice(off, off + nin * nout)
            off += nin * nout
            b = slice(off, off + nout)
            off += nout
            self._layers.append((nin, nout, w, b))
        self.n_params = off

    def init(self, seed):
        """Kaiming-uniform weights, 1/sqrt(fan_in) uniform biases."""
        rng = np.random.default_rng(seed)
        out = np.empty(self.n_params)
        for nin, nout, wsl, bsl in self._layers:
            bound = np.sqrt(6.0 / nin)
            out[wsl] = rng.uniform(-bound, bound, nin * nout)
            out[bsl] = rng.uniform(-1.0, 1.0, nout) / np.sqrt(nin)
        return out

    def forward(self, params, X, order=2):
        """Jet streams of all outputs at the rows of X.

        Returns (val (B, out), grad (B, d, out), hess (B, d, d, out)); the
        derivative entries are None when a lower order was requested.
        Gradients and Hessians are with respect to the raw (physical)
        inputs. For nets with no hidden layer the constant gradient comes
        back with a broadcastable batch axis of length 1.
        """
        X = np.atleast_2d(np.asarray(X, float))
        d = X.shape[1]
        tri_i, tri_j, pair_mat = _triangle(d)
        s = self.input_scale
        x0 = (X - self.input_shift) * s
        val, grad, hess = x0, None, None   # hess packed (B, T, W)
        act = self.spec.activation
        for li, (nin, nout, wsl, bsl) in enumerate(self._layers):
            W = tape.reshape(params[wsl], (nin, nout))
            b = params[bsl]
            val = tape.matmul(val, W) + b
            if order >= 1:
                if grad is None:
                    grad = _expand(W, 0) * s        # (1, d, W)
                else:
                    grad = tape.matmul(grad, W)
            if order >= 2 and hess is not None:
                hess = tape.matmul(hess, W)
            if li < len(self._layers) - 1:
                if act == "tanh":
                    t = tape.tanh(val)
                    d1 = 1.0 - t * t
                    d2 = -2.0 * t * d1
                    val = t
                else:
                    sv = tape.sin(val)
                    d1 = tape.cos(val)
                    d2 = -sv
                    val = sv
                if order >= 1:
                    new_grad = _expand(d1, 1) * grad
                if order >= 2:
                    gg = grad[:, tri_i, :] * grad[:, tri_j, :]
                    d1e = _expand(d1, 1)
                    d2e = _expand(d2, 1)
                    hess = d2e * gg if hess is None else \
                        d1e * hess + d2e * gg
                if order >= 1:
                    grad = new_grad
        if order >= 2:
            if hess is None:
                # purely linear network: second derivatives vanish
                hess = np.zeros((len(X), d, d, self.spec.output_dim))
            else:
                hess = hess[:, pair_mat, :]
        return val, grad, hess

    def jet_eval(self, params, in_jets):
        """Scalar-jet reference path; slow, used for cross-validation."""
        p = np.asarray(tape.value_of(params))
        s = self.input_scale
        cur = [(j - float(sh)) * s for j, sh in zip(in_jets,
                                                    self.input_shift)]
        for li, (nin, nout, wsl, bsl) in enumerate(self._layers):
            W = p[wsl].reshape(nin, nout)
            b = p[bsl]
            nxt = [jets.affine(cur, W[:, o], b[o]) for o in range(nout)]
            if li < len(self._layers) - 1:
                f = jets.tanh if self.spec.activation == "tanh" else jets.sin
                nxt = [f(j) for j in nxt]
            cur = nxt
        return cur


class ComplexMlp:
    """Holomorphic net: complex affine layers and entire activations.

    Parameters store (re, im) contiguously per complex scalar. The forward
    pass tracks the real pair (u, v) of every unit; the network output is the
    real part, harmonic by construction."""

    kind = "complex"

    def __init__(self, spec, input_shift=None, input_scale=1.0):
        if spec.activation not in HOLOMORPHIC_ACTIVATIONS:
            raise ValueError("holomorphic nets need an entire activation "
                             f"(sin or exp), got {spec.activation!r}")
        if spec.input_dim != 1:
            raise ValueError("holomorphic nets take the single complex "
                             "input x + iy")
        self.spec = spec
        self.input_shift = np.zeros(2) if input_shift is None \
            else np.asarray(input_shift, float)
        self.input_scale = float(input_scale)
        dims = spec.layer_dims()
        self._layers = []
        off = 0
        for i in range(len(dims) - 1):
            nin, nout = dims[i], dims[i + 1]
            w = slice(off, off + 2 * nin * nout)
            off += 2 * nin * nout
            b = slice(off, off + 2 * nout)
            off += 2 * nout
            self._layers.append((nin, nout, w, b))
        self.n_params = off

    def init(self, seed):
        """Independent uniform(-1/sqrt(fan_in)) draws for re and im, each
        scaled 1/sqrt(2) so E|w|^2 matches a same-bound real draw.

        The base bound is the fan-in rule rather than sqrt(6/fan_in): sin
        units grow like cosh along the imaginary axis, and the hotter bound
        overflows about half of all depth-3 nets on the unit square."""
        rng = np.random.default_rng(seed)
        out = np.empty(self.n_params)
        inv_r2 = 1.0 / np.sqrt(2.0)
        for nin, nout, wsl, bsl in self._layers:
            bound = np.sqrt(1.0 / nin) * inv_r2
            wre = rng.uniform(-bound, bound, nin * nout)
            wim = rng.uniform(-bound, bound, nin * nout)
            w = np.empty(2 * nin * nout)
            w[0::2] = wre
            w[1::2] = wim
            out[wsl] = w
            bb = np.sqrt(1.0 / nin) * inv_r2
            bre = rng.uniform(-bb, bb, nout)
            bim = rng.uniform(-bb, bb, nout)
            bv = np.empty(2 * nout)
            bv[0::2] = bre
            bv[1::2] = bim
            out[bsl] = bv
        return out

    def _layer_mats(self, params, layer):
        nin, nout, wsl, bsl = layer
        w = tape.reshape(params[wsl], (nin * nout, 2))
        wr = tape.reshape(w[:, 0], (nin, nout))
        wi = tape.reshape(w[:, 1], (nin, nout))
        b = tape.reshape(params[bsl], (nout, 2))
        return wr, wi, b[:, 0], b[:, 1]

    def forward(self, params, X, order=2):
        """Jet streams of Re(output) in physical coordinates."""
        u, v, gu, gv, hu, hv = self._streams(params, X, order)
        return u, gu, hu

    def _streams(self, params, X, order):
        X = np.atleast_2d(np.asarray(X, float))
        B = X.shape[0]
        tri_i, tri_j, pair_mat = _triangle(2)
        s = self.input_scale
        u = ((X[:, 0] - self.input_shift[0]) * s)[:, None]
        v = ((X[:, 1] - self.input_shift[1]) * s)[:, None]
        gu0 = np.array([[s], [0.0]])[None, :, :]    # (1, 2, 1)
        gv0 = np.array([[0.0], [s]])[None, :, :]
        gu, gv = (gu0, gv0) if order >= 1 else (None, None)
        hu = hv = None                               # packed (B, 3, W)
        act = self.spec.activation
        for li, layer in enumerate(self._layers):
            wr, wi, br, bi = self._layer_mats(params, layer)
            u, v = (tape.matmul(u, wr) - tape.matmul(v, wi) + br,
                    tape.matmul(u, wi) + tape.matmul(v, wr) + bi)
            if order >= 1:
                gu, gv = (tape.matmul(gu, wr) - tape.matmul(gv, wi),
                          tape.matmul(gu, wi) + tape.matmul(gv, wr))
            if order >= 2 and hu is not None:
                hu, hv = (tape.matmul(hu, wr) - tape.matmul(hv, wi),
                          tape.matmul(hu, wi) + tape.matmul(hv, wr))
            if li == len(self._layers) - 1:
                break
            if act == "sin":
                su, cu = tape.sin(u), tape.cos(u)
                shv, chv = tape.sinh(v), tape.cosh(v)
                p, q = su * chv, cu * shv
                pu, pv = cu * chv, su * shv
            else:
                eu = tape.exp(u)
                p, q = eu * tape.cos(v), eu * tape.sin(v)
                pu, pv = p, -q
            if order >= 1:
                pu1, pv1 = _expand(pu, 1), _expand(pv, 1)
                ngu = pu1 * gu + pv1 * gv
                ngv = pu1 * gv - pv1 * gu
            if order >= 2:
                p2, q2 = _expand(p, 1), _expand(q, 1)
                guu = gu[:, tri_i, :] * gu[:, tri_j, :]
                gvv = gv[:, tri_i, :] * gv[:, tri_j, :]
                guv = gu[:, tri_i, :] * gv[:, tri_j, :] \
                    + gu[:, tri_j, :] * gv[:, tri_i, :]
                if act == "sin":
                    base_u = p2 * (gvv - guu) + q2 * guv
                    base_v = q2 * (gvv - guu) - p2 * guv
                else:
                    base_u = p2 * (guu - gvv) - q2 * guv
                    base_v = q2 * (guu - gvv) + p2 * guv
                if hu is None:
                    hu, hv = base_u, base_v
                else:
                    hu, hv = (pu1 * hu + pv1 * hv + base_u,
                              pu1 * hv - pv1 * hu + base_v)
            u, v = p, q
            if order >= 1:
                gu, gv = ngu, ngv
        if order >= 2:
            if hu is None:
                hu = np.zeros((B, 2, 2, self.spec.output_dim))
                hv = np.zeros((B, 2, 2, self.spec.output_dim))
            else:
                hu = hu[:, pair_mat, :]
                hv = hv[:, pair_mat, :]
        return u, v, gu, gv, hu, hv

    def complex_eval(self, params, z):
        """Scalar ComplexJet reference path (used by the CR residual)."""
        p = np.asarray(tape.value_of(params))
        shift = complex(self.input_shift[0], self.input_shift[1])
        cur = [(z - shift) * self.input_scale]
        f = jets.csin if self.spec.activation == "sin" else jets.cexp
        for li, layer in enumerate(self._layers):
            nin, nout, wsl, bsl = layer
            w = p[wsl].reshape(nin * nout, 2)
            wc = (w[:, 0] + 1j * w[:, 1]).reshape(nin, nout)
            b = p[bsl].reshape(nout, 2)
            nxt = []
            for o in range(nout):
                acc = cur[0] * complex(wc[0, o])
                for i in range(1, nin):
                    acc = acc + cur[i] * complex(wc[i, o])
                acc = acc + complex(b[o, 0], b[o, 1])
                nxt.append(acc if li == len(self._layers) - 1 else f(acc))
            cur = nxt
        return cur[0]


def bound_complex_field(net, params):
    """Adapter so diffcore's CR residual can probe a trained network."""

    class _Bound:
        def complex_eval(self, z):
            return net.complex_eval(params, z)

    return _Bound()


# -- curl pairs ----------------------------------------------------------------

# (sign, derivative axis, source channel) triples per output component;
# antisymmetric layout makes the divergence cancel bitwise.
_CURL_TABLE = {
    2: [[(1.0, 1, 0)],
        [(-1.0, 0, 0)]],
    3: [[(1.0, 1, 2), (-1.0, 2, 1)],
        [(1.0, 2, 0), (-1.0, 0, 2)],
        [(1.0, 0, 1), (-1.0, 1, 0)]],
    4: [[(1.0, 3, 3), (-1.0, 2, 4), (1.0, 1, 5)],
        [(-1.0, 3, 1), (1.0, 2, 2), (-1.0, 0, 5)],
        [(1.0, 3, 0), (-1.0, 1, 2), (1.0, 0, 4)],
        [(-1.0, 2, 0), (1.0, 1, 1), (-1.0, 0, 3)]],
}

CURL_SOURCE_DIMS = {2: 1, 3: 3, 4: 6}


class CurlPair:
    """A scalar potential net plus a source net whose derived field is
    divergence-free by construction."""

    kind = "curl_pair"

    def __init__(self, phi_spec, input_shift=None, input_scale=1.0):
        d = phi_spec.input_dim
        if d not in _CURL_TABLE:
            raise ValueError("curl fields are defined for 2 to 4 inputs")
        self.dim = d
        self.phi = RealMlp(phi_spec, input_shift, input_scale)
        a_spec = MlpSpec(d, phi_spec.hidden_layers, phi_spec.width,
                         phi_spec.activation, CURL_SOURCE_DIMS[d])
        self.a = RealMlp(a_spec, input_shift, input_scale)
        self.phi_slice = slice(0, self.phi.n_params)
        self.a_slice = slice(self.phi.n_params,
                             self.phi.n_params + self.a.n_params)
        self.n_params = self.phi.n_params + self.a.n_params

    def init(self, seed):
        return np.concatenate([self.phi.init(seed),
                               self.a.init(seed + 1_000_003)])

    def curl(self, params, X, order=0):
        """Divergence-free field components and (optionally) their gradients.

        Returns (comps, comp_grads): length-d lists with (B,) values and
        (B, d) gradients (None when order is 0)."""
        a_params = params[self.a_slice]
        _, agrad, ahess = self.a.forward(a_params, X, order=order + 1)
        comps, cgrads = [], []
        for rules in _CURL_TABLE[self.dim]:
            c = None
            g = None
            for sign, ax, ch in rules:
                term = agrad[:, ax, ch] * sign
                c = term if c is None else c + term
                if order >= 1:
                    termg = ahess[:, :, ax, ch] * sign
                    g = termg if g is None else g + termg
            comps.append(c)
            cgrads.append(g)
        return comps, cgrads

    def potential(self, params, X, order=2):
        return self.phi.forward(params[self.phi_slice], X, order)

    # the potential is the pair's scalar output; losses and evaluation
    # address every net family through .forward
    forward = potential


# -- hard boundary wrapping -----------------------------------------------------


class HardBoundaryNet:
    """Blend a free net with a constant so one boundary set is met exactly.

    phi = c * e + (1 - e) * net with e = exp(-k * dist(x, wrapped set)).
    The blend constants and their derivatives depend only on the sample
    points, so they are computed once per point set."""

    kind = "real"

    def __init__(self, mlp, wrapped, c_value, k=10.0):
        if not wrapped:
            raise ValueError("hard wrapping needs a non-empty boundary set")
        vals = {f.value for f in wrapped}
        if len(vals) != 1:
            raise ValueError("wrapped boundary carries several distinct "
                             f"values: {sorted(vals)}")
        self.mlp = mlp
        self.wrapped = list(wrapped)
        self.c = float(c_value)
        self.k = float(k)
        self.n_params = mlp.n_params

    def init(self, seed):
        return self.mlp.init(seed)

    def blend_constants(self, X, order):
        """e = exp(-k d) with exact first and second derivatives."""
        X = np.atleast_2d(np.asarray(X, float))
        if order == 0:
            d = geometry.distance_to(self.wrapped, X)
            return np.exp(-self.k * d), None, None
        d, dg, dh = geometry.distance_jets(self.wrapped, X)
        e = np.exp(-self.k * d)
        eg = -self.k * e[:, None] * dg
        eh = e[:, None, None] * (self.k ** 2 * dg[:, :, None]
                                 * dg[:, None, :] - self.k * dh)
        return e, eg, eh

    def forward(self, params, X, order=2, consts=None):
        e, eg, eh = self.blend_constants(X, order) if consts is None \
            else consts
        mval, mgrad, mhess = self.mlp.forward(params, X, order)
        ecol = e[:, None]
        val = self.c * ecol + mval - ecol * mval
        grad = hess = None
        if order >= 1:
            egc = eg[:, :, None]
            grad = (self.c * egc + mgrad
                    - (egc * _expand(mval, 1) + ecol[:, None, :] * mgrad))
        if order >= 2:
            ehc = eh[:, :, :, None]
            cross = (eg[:, :, None, None] * _expand(mgrad, 1)
                     + eg[:, None, :, None] * _expand(mgrad, 2))
            hess = (self.c * ehc + mhess
                    - (ehc * _expand(_expand(mval, 1), 1) + cross
                       + e[:, None, None, None] * mhess))
        return val, grad, hess


# -- piecewise nets ---------------------------------------------------------------


class PiecewiseNet:
    """One subnet per subdomain of a decomposition; shared edges average."""

    kind = "piecewise"

    def __init__(self, subnets, decomposition):
        if len(subnets) != len(decomposition.subdomains):
            raise ValueError("need one subnet per subdomain")
        self.subnets = list(subnets)
        self.decomposition = decomposition
        self.slices = []
        off = 0
        for net in self.subnets:
            self.slices.append(slice(off, off + net.n_params))
            off += net.n_params
        self.n_params = off

    def init(self, seed):
        return np.concatenate([net.init(seed + 7919 * i)
                               for i, net in enumerate(self.subnets)])

    def forward(self, params, X, order=2):
        """Owner-routed forward with the standard (B, out) contract.

        Each point is evaluated by the subnet(s) whose subdomain contains
        it; points on a shared edge get the mean of both sides. Works taped
        (Var params) and plain; at most two owners per point are supported.
        """
        X = np.atleast_2d(np.asarray(X, float))
        B, d = X.shape
        owners = self.decomposition.locate(X)
        counts = owners.sum(axis=1)
        if not counts.all():
            raise ValueError("point outside every subdomain")
        if counts.max() > 2:
            raise ValueError("point owned by more than two subdomains")
        parts = []
        concat_rows = np.full((B, 2), -1)
        off = 0
        for i, net in enumerate(self.subnets):
            rows = np.flatnonzero(owners[:, i])
            if rows.size == 0:
                continue
            parts.append(net.forward(params[self.slices[i]], X[rows], order))
            second = concat_rows[rows, 0] >= 0
            concat_rows[rows, np.where(second, 1, 0)] = \
                off + np.arange(rows.size)
            off += rows.size
        idx1 = concat_rows[:, 0]
        idx2 = np.where(concat_rows[:, 1] >= 0, concat_rows[:, 1], idx1)
        w1 = np.where(counts == 2, 0.5, 1.0)
        w2 = np.where(counts == 2, 0.5, 0.0)

        def combine(pieces, w_shape):
            full = tape.concat(pieces, 0)
            return (full[idx1] * w1.reshape(w_shape)
                    + full[idx2] * w2.reshape(w_shape))

        val = combine([p[0] for p in parts], (B, 1))
        grad = combine([p[1] for p in parts], (B, 1, 1)) if order >= 1 \
            else None
        hess = combine([p[2] for p in parts], (B, 1, 1, 1)) if order >= 2 \
            else None
        return val, grad, hess

    def eval(self, params, X, order=0):
        """Plain-numpy evaluation returning squeezed (B,), (B,d), (B,d,d)."""
        p = np.asarray(tape.value_of(params))
        val, grad, hess = self.forward(p, X, order)
        out = [val[:, 0]]
        out.append(grad[:, :, 0] if order >= 1 else None)
        out.append(hess[:, :, :, 0] if order >= 2 else None)
        return tuple(out)


# -- parameter files ---------------------------------------------------------------


def save_params(path, vector, kind):
    """Write a flat parameter vector: 20-byte header then little-endian f64.

    Header fields: magic "HNET", format version (u32), kind tag (u32),
    parameter count (u64)."""
    vec = np.asarray(vector, np.float64)
    code = PARAM_KINDS[kind] if isinstance(kind, str) else int(kind)
    with open(path, "wb") as fh:
        fh.write(PARAM_MAGIC)
        fh.write(struct.pack("<IIQ", PARAM_VERSION, code, vec.size))
        fh.write(vec.astype("<f8").tobytes())


def load_params(path):
    """Read a parameter file; returns (vector, kind name)."""
    with open(path, "rb") as fh:
        head = fh.read(20)
        if len(head) < 20 or head[:4] != PARAM_MAGIC:
            raise ValueError("not a parameter file (bad magic)")
        version, code, count = struct.unpack("<IIQ", head[4:])
        if version != PARAM_VERSION:
            raise ValueError(f"unsupported parameter file version {version}")
        body = fh.read()
    vec = np.frombuffer(body, dtype="<f8")
    if vec.size != count:
        raise ValueError(f"parameter count mismatch: header says {count}, "
                         f"file holds {vec.size}")
    names = {v: k for k, v in PARAM_KINDS.items()}
    if code not in names:
        raise ValueError(f"unknown parameter kind tag {code}")
    return vec.astype(np.float64), names[code]
