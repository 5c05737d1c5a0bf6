"""Loss terms and per-method composite objectives.

Every term is a mean over a fixed sample set, computed through the nets'
batched jet forwards, so the same closure evaluates to a float on plain
parameter vectors and to a tape node while training.
"""

from __future__ import annotations

import numpy as np

from . import jets, nets, tape


class IncompatibleMethod(ValueError):
    """Raised when a method cannot run on a scenario's geometry."""


TERM_NAMES = ("dirichlet", "laplacian", "interface", "curl_match",
              "dielectric")


class LossBundle:
    """Named loss terms with weights; total = sum of weight * value."""

    def __init__(self, terms):
        self.terms = dict(terms)    # name -> (weight, value)
        total = None
        for w, v in self.terms.values():
            contrib = w * v
            total = contrib if total is None else total + contrib
        self.total = total

    def numeric(self):
        """Plain-float view: {name: value} plus 'total'."""
        out = {k: float(tape.value_of(v)) for k, (w, v) in self.terms.items()}
        out["total"] = float(tape.value_of(self.total))
        return out


def _flat(val):
    return tape.reshape(val, (-1,))


def _trace(hess, d):
    lap = hess[:, 0, 0, 0]
    for i in range(1, d):
        lap = lap + hess[:, i, i, 0]
    return lap


def dirichlet_loss(net, params, points, values):
    """Mean squared boundary mismatch over (point, value) samples."""
    points = np.atleast_2d(points)
    if len(points) == 0:
        raise ValueError("dirichlet loss needs at least one boundary sample")
    val, _, _ = net.forward(params, points, order=0)
    r = _flat(val) - np.asarray(values, float)
    return tape.amean(r * r)


def laplacian_loss(net, params, points):
    """Mean squared Laplacian over collocation points."""
    points = np.atleast_2d(points)
    if len(points) == 0:
        raise ValueError("laplacian loss needs at least one point")
    _, _, hess = net.forward(params, points, order=2)
    lap = _trace(hess, points.shape[1])
    return tape.amean(lap * lap)


def interface_loss(net_a, params_a, net_b, params_b, points):
    """Value and gradient mismatch of two subnets along a shared edge."""
    points = np.atleast_2d(points)
    if len(points) == 0:
        raise ValueError("interface loss needs at least one sample")
    va, ga, _ = net_a.forward(params_a, points, order=1)
    vb, gb, _ = net_b.forward(params_b, points, order=1)
    dv = _flat(va) - _flat(vb)
    dg = ga - gb
    return tape.amean(dv * dv) + tape.amean(tape.asum(dg * dg, axis=1))

def curl_match_loss(pair, params, points):
    """Mean squared mismatch between the potential gradient and the
    divergence-free field."""
    points = np.atleast_2d(points)
    if len(points) == 0:
        raise ValueError("curl match loss needs at least one point")
    d = points.shape[1]
    if pair.dim != d:
        raise ValueError(f"curl pair built for {pair.dim}-d inputs, "
                         f"points are {d}-d")
    _, pgrad, _ = pair.potential(params, points, order=1)
    comps, _ = pair.curl(params, points, order=0)
    sq = None
    for k in range(d):
        r = pgrad[:, k, 0] - comps[k]
        sq = r * r if sq is None else sq + r * r
    return tape.amean(sq)


def _normal_field(obj, params, points, normals, field_mode):
    """E . n along an interface; E is the potential gradient or the
    divergence-free field of a curl pair."""
    if field_mode == "curl":
        comps, _ = obj.curl(params, points, order=0)
        en = None
        for k in range(points.shape[1]):
            term = comps[k] * normals[:, k]
            en = term if en is None else en + term
        return en
    _, grad, _ = obj.forward(params, points, order=1)
    en = None
    for k in range(points.shape[1]):
        term = grad[:, k, 0] * normals[:, k]
        en = term if en is None else en + term
    return en


def _potential_value(obj, params, points, field_mode):
    if field_mode == "curl":
        val, _, _ = obj.potential(params, points, order=0)
    else:
        val, _, _ = obj.forward(params, points, order=0)
    return _flat(val)


def dielectric_loss(obj1, params1, obj2, params2, points, normals,
                    eps1, eps2, field_mode="gradient"):
    """Potential continuity plus permittivity-scaled normal-flux matching."""
    points = np.atleast_2d(points)
    normals = np.atleast_2d(normals)
    if len(points) == 0:
        raise ValueError("dielectric loss needs at least one sample")
    if len(normals) != len(points):
        raise ValueError("one normal per interface sample required")
    if not (eps1 > 0 and eps2 > 0):
        raise ValueError("permittivities must be positive")
    if field_mode not in ("gradient", "curl"):
        raise ValueError(f"unknown field mode {field_mode!r}")
    v1 = _potential_value(obj1, params1, points, field_mode)
    v2 = _potential_value(obj2, params2, points, field_mode)
    dv = v1 - v2
    en1 = _normal_field(obj1, params1, points, normals, field_mode)
    en2 = _normal_field(obj2, params2, points, normals, field_mode)
    flux = eps1 * en1 - eps2 * en2
    return tape.amean(dv * dv) + tape.amean(flux * flux)


# -- composite objectives ---------------------------------------------------


class Objective:
    """Named nets plus term closures over one flat parameter vector."""

    def __init__(self, method, parts, terms, weights=None):
        self.method = method
        self.parts = parts                     # list of (name, net)
        self.slices = []
        off = 0
        for _, net in parts:
            self.slices.append(slice(off, off + net.n_params))
            off += net.n_params
        self.n_params = off
        self._terms = terms                    # list of (term_name, fn)
        names = [t for t, _ in terms]
        if len(set(names)) != len(names):
            raise ValueError("duplicate term name in objective")
        self.weights = {t: 1.0 for t, _ in terms}
        if weights:
            unknown = set(weights) - set(self.weights)
            if unknown:
                raise ValueError(f"weights for absent terms: {sorted(unknown)}")
            self.weights.update(weights)

    @property
    def term_names(self):
        return [t for t, _ in self._terms]

    def init(self, seed):
        return np.concatenate([net.init(seed + 104_729 * i)
                               for i, (_, net) in enumerate(self.parts)])

    def part_params(self, params):
        return [params[sl] for sl in self.slices]

    def __call__(self, params):
        plist = self.part_params(params)
        return LossBundle([(name, (self.weights[name], fn(plist)))
                           for name, fn in self._terms])

    def loss(self, params):
        return self(params).total


def _pooled(contribs):
    """Exact pooled mean from per-subset (count, mean) pairs."""
    total = sum(n for n, _ in contribs)
    out = None
    for n, v in contribs:
        if n == 0:
            continue
        term = (n / total) * v
        out = term if out is None else out + term
    return out


def _zero_features(features):
    return [f for f in features if f.value == 0.0]


def _nonzero_mask(plan, features):
    idx = [i for i, f in enumerate(features) if f.value != 0.0]
    return np.isin(plan.boundary_feature, idx)


class _CachedBlend:
    """HardBoundaryNet view with the blend constants of one fixed sample
    set precomputed (the wrapped-set distances never change during a fit)."""

    def __init__(self, net, points, order):
        self.net = net
        self.consts = net.blend_constants(points, order)

    def forward(self, params, X, order):
        return self.net.forward(params, X, order, consts=self.consts)


METHODS = ("pinn", "hpinn", "holomorphic", "curlnet", "multiholomorphic",
           "xpinn", "qholomorphic")


def assemble(method, scenario, width=32, hidden_layers=3, k_hard=10.0,
             weights=None):
    """Build the composite objective a method minimises on a scenario.

    Raises IncompatibleMethod when the scenario geometry does not support
    the method (wrong dimensionality, no decomposition, or no zero-valued
    boundary for hard wrapping).
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    dim = scenario.dim
    if method in ("holomorphic", "qholomorphic", "multiholomorphic") \
            and dim != 2:
        raise IncompatibleMethod(
            f"{method} maps the complex plane; scenario "
            f"{scenario.name!r} is {dim}-d")
    if method in ("multiholomorphic", "xpinn") \
            and scenario.decomposition is None:
        raise IncompatibleMethod(
            f"{method} needs a subdomain decomposition and scenario "
            f"{scenario.name!r} does not define one")

    plan = scenario.plan()
    shift, scale = scenario.input_shift, scenario.input_scale

    def make_real():
        return nets.RealMlp(nets.MlpSpec(dim, hidden_layers, width, "tanh"),
                            shift, scale)

    def make_complex():
        return nets.ComplexMlp(nets.MlpSpec(1, hidden_layers, width, "sin"),
                               shift, scale)

    def make_pair():
        return nets.CurlPair(nets.MlpSpec(dim, hidden_layers, width, "tanh"),
                             shift, scale)

    def make_quantum():
        from . import qsim
        return qsim.QuantumNet(input_shift=shift, input_scale=scale)

    def make_hard(features):
        wrapped = _zero_features(features)
        if not wrapped:
            raise IncompatibleMethod(
                "hpinn builds the zero-valued boundary into the network and "
                f"scenario {scenario.name!r} has no zero-valued boundary")
        return nets.HardBoundaryNet(make_real(), wrapped, 0.0, k_hard)

    factories = {"pinn": make_real, "holomorphic": make_complex,
                 "curlnet": make_pair, "qholomorphic": make_quantum}

    if scenario.dielectric is not None:
        return _assemble_two_region(method, scenario, plan, factories,
                                    make_hard, weights)

    bp, bv = plan.boundary_points, plan.boundary_values
    colloc = plan.collocation
    terms = []

    if method == "hpinn":
        net = make_hard(scenario.features)
        lap_view = _CachedBlend(net, colloc, order=2)
        terms.append(("laplacian",
                      lambda p, n=lap_view, x=colloc:
                      laplacian_loss(n, p[0], x)))
        free = _nonzero_mask(plan, scenario.features)
        if free.any():
            pts, vals = bp[free], bv[free]
            dir_view = _CachedBlend(net, pts, order=0)
            terms.append(("dirichlet",
                          lambda p, n=dir_view, x=pts, v=vals:
                          dirichlet_loss(n, p[0], x, v)))
        return Objective(method, [("net", net)], terms, weights)

    if method in ("pinn", "holomorphic", "qholomorphic", "curlnet"):
        net = factories[method]()
        terms.append(("dirichlet",
                      lambda p, n=net: dirichlet_loss(n, p[0], bp, bv)))
        if method == "pinn":
            terms.append(("laplacian",
                          lambda p, n=net: laplacian_loss(n, p[0], colloc)))
        if method == "curlnet":
            terms.append(("curl_match",
                          lambda p, n=net: curl_match_loss(n, p[0], colloc)))
        return Objective(method, [("net", net)], terms, weights)

    # multiholomorphic / xpinn
    dec = scenario.decomposition
    make_sub = make_complex if method == "multiholomorphic" else make_real
    pw = nets.PiecewiseNet([make_sub() for _ in dec.subdomains], dec)
    terms.append(("dirichlet",
                  lambda p: dirichlet_loss(pw, p[0], bp, bv)))
    if method == "xpinn":
        terms.append(("laplacian",
                      lambda p: laplacian_loss(pw, p[0], colloc)))

    def interface_total(p):
        out = None
        for k, iface in enumerate(dec.interfaces):
            i, j = iface.i, iface.j
            t = interface_loss(pw.subnets[i], p[0][pw.slices[i]],
                               pw.subnets[j], p[0][pw.slices[j]],
                               plan.interfaces[k])
            out = t if out is None else out + t
        return out

    terms.append(("interface", interface_total))
    return Objective(method, [("net", pw)], terms, weights)


def _assemble_two_region(method, scenario, plan, factories, make_hard,
                         weights):
    """Electrostatics-style coupling: one net per permittivity region, a
    dielectric interface term, and per-region boundary/collocation splits."""
    die = scenario.dielectric
    if method in ("multiholomorphic", "xpinn"):
        raise IncompatibleMethod(
            f"{method} needs a subdomain decomposition; scenario "
            f"{scenario.name!r} couples two regions through a dielectric "
            "interface instead")

    side_feats = [[scenario.features[i] for i in die.side_features[s]]
                  for s in (0, 1)]
    b_masks = [np.isin(plan.boundary_feature, die.side_features[s])
               for s in (0, 1)]
    in_side1 = die.split(plan.collocation)
    c_sets = [plan.collocation[in_side1], plan.collocation[~in_side1]]

    if method == "hpinn":
        net1, net2 = (make_hard(side_feats[0]), make_hard(side_feats[1]))
    else:
        net1, net2 = factories[method](), factories[method]()
    parts = [("net1", net1), ("net2", net2)]
    pair = (net1, net2)
    terms = []

    def boundary_sets():
        for s, net in enumerate(pair):
            mask = b_masks[s]
            if method == "hpinn":
                keep = np.array([f.value != 0.0 for f in scenario.features])
                mask = mask & keep[plan.boundary_feature]
            yield s, net, plan.boundary_points[mask], \
                plan.boundary_values[mask]

    dir_sets = [(s, net,
                 _CachedBlend(net, pts, 0) if method == "hpinn" else net,
                 pts, vals)
                for s, net, pts, vals in boundary_sets() if len(pts)]
    if dir_sets:
        def dirichlet_pooled(p):
            return _pooled([(len(pts), dirichlet_loss(view, p[s], pts, vals))
                            for s, _, view, pts, vals in dir_sets])
        terms.append(("dirichlet", dirichlet_pooled))

    if method in ("pinn", "hpinn"):
        views = [(_CachedBlend(net, c_sets[s], 2)
                  if method == "hpinn" else net) for s, net in
                 enumerate(pair)]

        def laplacian_pooled(p):
            return _pooled([(len(c_sets[s]),
                             laplacian_loss(views[s], p[s], c_sets[s]))
                            for s in (0, 1) if len(c_sets[s])])
        terms.append(("laplacian", laplacian_pooled))

    if method == "curlnet":
        def curl_pooled(p):
            return _pooled([(len(c_sets[s]),
                             curl_match_loss(pair[s], p[s], c_sets[s]))
                            for s in (0, 1) if len(c_sets[s])])
        terms.append(("curl_match", curl_pooled))

    mode = "curl" if method == "curlnet" else "gradient"

    def dielectric_term(p):
        return dielectric_loss(net1, p[0], net2, p[1],
                               plan.dielectric_points,
                               plan.dielectric_normals,
                               die.eps1, die.eps2, mode)

    terms.append(("dielectric", dielectric_term))
    return Objective(method, parts, terms, weights)
