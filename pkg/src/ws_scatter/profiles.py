"""Asymptotic profile construction for the coupled wave-Schrodinger system.

From scattering data (w_+, A_+, Adot_+) this module builds the profile
pair: the Schrodinger profile u_a(t) = (it)^(-3/2) e^(i|x|^2/2t)
e^(-i phi) w_+(x/t) with long-range phase phi = ln(t) * A1_tilde, and the
wave part A_0 (free flow of the wave data) plus the tail
A_1(t) = t^(-1) A1_tilde(x/t) sourced by |u_a|^2.

A1_tilde mixes every scale from the width of w_+ out to nu_max times it,
so its defining integral is accumulated over a ladder of panel grids, one
per dyadic range of the integration variable, each sized to hold its own
dilations.  Evaluators sum the panel fields through masked trigonometric
interpolation onto whatever grid a caller needs.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .grids import Grid, resample_scaled
from .operators import (WaveState, dilate, gradient, laplacian,
                        lebesgue_norm, md_apply, md_prefactor, to_real,
                        wave_propagate)

__all__ = [
    "AsymptoticState", "ProfileBundle", "PieceField",
    "gaussian_field", "hermite_gaussian_field", "support_radius",
    "build_asymptotic_state", "build_profile_bundle", "build_a1_tilde",
    "build_a1_tilde_tilde", "phase", "g_tilde", "u_a", "a0", "a1", "a1_dot",
    "a1_gradient", "grad_u_a", "dt_u_a", "delta_exponent",
]


def delta_exponent(r: float) -> float:
    """Dispersive decay exponent 3/2 - 3/r."""
    return 1.5 - (0.0 if np.isinf(r) else 3.0 / r)


def gaussian_field(grid: Grid, amplitude: float = 1.0, width: float = 1.0,
                   center=(0.0, 0.0, 0.0)) -> np.ndarray:
    x = [grid.coordinate(a) - center[a] for a in range(3)]
    r2 = x[0] ** 2 + x[1] ** 2 + x[2] ** 2
    return amplitude * np.exp(-r2 / (2.0 * width ** 2))


def hermite_gaussian_field(grid: Grid, amplitude: float = 1.0,
                           width: float = 1.0, orders=(0, 0, 0),
                           center=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Separable Hermite function H_n(x/w) exp(-x^2/2w^2) per axis."""
    out = np.full(grid.shape, amplitude)
    for axis in range(3):
        xi = (grid.coordinate(axis) - center[axis]) / width
        coeffs = np.zeros(orders[axis] + 1)
        coeffs[orders[axis]] = 1.0
        out = out * np.polynomial.hermite.hermval(xi, coeffs) * np.exp(-0.5 * xi ** 2)
    return out


def support_radius(grid: Grid, f: np.ndarray, threshold: float = 1e-12) -> float:
    """Largest per-axis coordinate where |f| exceeds threshold * max|f|."""
    absf = np.abs(f)
    peak = absf.max()
    if peak == 0.0:
        return 0.0
    live = absf > threshold * peak
    x = np.abs(grid.axis_coords)
    radius = 0.0
    for axis in range(3):
        hit = live.any(axis=tuple(a for a in range(3) if a != axis))
        radius = max(radius, float(x[hit].max()))
    return radius


def _bandwidth(grid: Grid, f: np.ndarray, tail: float = 1e-8) -> float:
    """Radial wavenumber containing all but a `tail` fraction of spectral mass."""
    power = np.abs(np.fft.fftn(f)) ** 2
    om = grid.omega.ravel()
    order = np.argsort(om)
    cum = np.cumsum(power.ravel()[order])
    total = cum[-1]
    if total == 0.0:
        return 0.0
    idx = np.searchsorted(cum, (1.0 - tail) * total)
    return float(om[order[min(idx, len(order) - 1)]])


@dataclass
class AsymptoticState:
    """Scattering data: Schrodinger profile amplitude and wave pair.

    w_plus lives on the (fine, small) profile grid; the wave pair lives on
    the (coarse, large) wave grid that must hold the light cone of the run.
    """
    grid: Grid                  # profile grid
    w_plus: np.ndarray          # complex samples
    wave_grid: Grid
    a_plus: np.ndarray          # real samples
    a_dot_plus: np.ndarray      # real samples
    c4: float = field(init=False)
    rho: float = field(init=False)          # support radius of w_plus
    rho_source: float = field(init=False)   # support radius of |w_plus|^2

    def __post_init__(self):
        self.grid.check(self.w_plus)
        self.wave_grid.check(self.a_plus)
        self.wave_grid.check(self.a_dot_plus)
        self.c4 = lebesgue_norm(self.grid, self.w_plus, 4.0)
        self.rho = support_radius(self.grid, self.w_plus)
        self.rho_source = support_radius(self.grid, np.abs(self.w_plus) ** 2)

    def wave_state(self) -> WaveState:
        return WaveState(self.wave_grid, self.a_plus.copy(),
                         self.a_dot_plus.copy(), 0.0)


def build_asymptotic_state(profile_grid: Grid, w_plus: np.ndarray,
                           wave_grid: Grid, a_plus: np.ndarray,
                           a_dot_plus: np.ndarray) -> AsymptoticState:
    return AsymptoticState(profile_grid, np.asarray(w_plus, dtype=complex),
                           wave_grid, a_plus, a_dot_plus)


@dataclass
class PieceField:
    """One panel's contribution to a multiscale field."""
    grid: Grid
    values: np.ndarray

    def eval_on(self, dst: Grid, scale: float) -> np.ndarray:
        out = resample_scaled(self.values, self.grid, dst, scale)
        return to_real(out, tol=1e-6, where="piece evaluation")


def _sum_pieces(pieces, dst: Grid, scale: float) -> np.ndarray:
    out = np.zeros(dst.shape)
    for p in pieces:
        out += p.eval_on(dst, scale)
    return out


def _panel_layout(nu_max: float, node_count: int):
    """Dyadic panels in the dilation variable: [1,4], [4,8], ..., [.., nu_max]."""
    edges = [1.0]
    nu = 4.0
    while nu < nu_max:
        edges.append(nu)
        nu *= 2.0
    edges.append(nu_max)
    lengths = np.diff(np.log(edges))
    shares = np.maximum(12, np.round(node_count * lengths / lengths.sum()))
    return list(zip(edges[:-1], edges[1:], shares.astype(int)))


def _panel_grid(nu_hi: float, rho_source: float, n: int) -> Grid:
    # holds the dilated source blob plus its wave propagation distance
    box = 2.0 * 1.06 * (nu_hi * rho_source + (nu_hi - 1.0))
    return Grid(n, box)


def _panel_quadrature(state: AsymptoticState, w2: np.ndarray, panel: Grid,
                      nu_lo: float, nu_hi: float, nodes: int):
    """Accumulate both tail fields over one dilation panel.

    Gauss-Legendre in s = ln(nu); each node dilates |w_+|^2 onto the panel
    grid and applies the half-wave multipliers sin(w(nu-1))/w and
    cos(w(nu-1)) with their zero-mode limits.  Accumulation happens on the
    Fourier side so each panel needs only one pair of inverse transforms.
    """
    s_nodes, s_weights = np.polynomial.legendre.leggauss(nodes)
    s_lo, s_hi = np.log(nu_lo), np.log(nu_hi)
    s_nodes = 0.5 * (s_hi - s_lo) * s_nodes + 0.5 * (s_hi + s_lo)
    s_weights = 0.5 * (s_hi - s_lo) * s_weights
    om = panel.omega_r
    pos = om > 0.0
    om_safe = np.where(pos, om, 1.0)
    sin_acc = np.zeros(om.shape, dtype=complex)
    cos_acc = np.zeros(om.shape, dtype=complex)
    shape = panel.shape
    for s, w in zip(s_nodes, s_weights):
        nu = float(np.exp(s))
        src = resample_scaled(w2, state.grid, panel, 1.0 / nu)
        src = to_real(src, tol=1e-6, where="dilated source")
        sh = np.fft.rfftn(src)
        arg = om * (nu - 1.0)
        sin_mult = np.where(pos, np.sin(arg) / om_safe, nu - 1.0)
        weight = w * np.exp(-2.0 * s)  # nu^-3 dnu in the log variable
        sin_acc -= weight * sin_mult * sh
        cos_acc += weight * np.cos(arg) * sh
    sin_f = np.fft.irfftn(sin_acc, s=shape, axes=(0, 1, 2))
    cos_f = np.fft.irfftn(cos_acc, s=shape, axes=(0, 1, 2))
    return sin_f, cos_f


@dataclass
class ProfileBundle:
    """Precomputed asymptotic objects for one scattering state.

    Holds the tail fields as per-panel pieces plus their values and
    derivatives cached on the profile grid, where the phase and the
    residual formulas need them.
    """
    state: AsymptoticState
    nu_max: float
    node_count: int
    a1_pieces: list            # tail field (time-independent)
    a1dot_pieces: list         # companion field entering d/dt of the tail
    a1_grad_pieces: tuple      # per-axis lists of gradient pieces
    a1_tilde: np.ndarray       # on the profile grid
    a1_tilde_tilde: np.ndarray
    grad_a1_tilde: tuple
    lap_a1_tilde: np.ndarray
    grad_w: tuple
    lap_w: np.ndarray
    tail_bounds: dict
    quadrature_nodes: list

    @property
    def grid(self) -> Grid:
        return self.state.grid

    @property
    def wave_grid(self) -> Grid:
        return self.state.wave_grid

    def a1_tilde_on(self, dst: Grid, scale: float = 1.0) -> np.ndarray:
        return _sum_pieces(self.a1_pieces, dst, scale)

    def a1_tilde_tilde_on(self, dst: Grid, scale: float = 1.0) -> np.ndarray:
        return _sum_pieces(self.a1dot_pieces, dst, scale)

    def a1_tilde_grad_on(self, dst: Grid, scale: float = 1.0) -> tuple:
        return tuple(_sum_pieces(self.a1_grad_pieces[axis], dst, scale)
                     for axis in range(3))


def build_profile_bundle(state: AsymptoticState, nu_max: float = 64.0,
                         node_count: int = 256, near_n: int = 160,
                         octave_n: int = 96) -> ProfileBundle:
    """Build all time-independent profile machinery for one state."""
    if nu_max < 4.0:
        raise ValueError(f"nu_max must be >= 4, got {nu_max}")
    if node_count < 64:
        raise ValueError(f"node_count must be >= 64, got {node_count}")
    g = state.grid
    w2 = np.abs(state.w_plus) ** 2
    a1_pieces, a1dot_pieces, node_log = [], [], []
    grad_pieces = ([], [], [])
    lap_pieces = []
    if w2.max() > 0.0:
        bw = _bandwidth(g, w2)
        rho_s = max(state.rho_source, g.spacing)
        for i, (nu_lo, nu_hi, nodes) in enumerate(_panel_layout(nu_max, node_count)):
            n = near_n if i == 0 else octave_n
            panel = _panel_grid(nu_hi, rho_s, n)
            if bw > 0.0 and np.pi / panel.spacing < bw / nu_lo:
                warnings.warn(
                    f"tail panel [{nu_lo:g},{nu_hi:g}] resolves wavenumbers to "
                    f"{np.pi / panel.spacing:.2f} but the source needs "
                    f"{bw / nu_lo:.2f}; increase the panel size")
            sin_f, cos_f = _panel_quadrature(state, w2, panel, nu_lo, nu_hi, nodes)
            a1_pieces.append(PieceField(panel, sin_f))
            a1dot_pieces.append(PieceField(panel, cos_f))
            for axis, comp in enumerate(gradient(panel, sin_f)):
                grad_pieces[axis].append(PieceField(panel, comp))
            lap_pieces.append(PieceField(panel, laplacian(panel, sin_f)))
            node_log.append((nu_lo, nu_hi, nodes, panel.n, panel.length))
    a1t = _sum_pieces(a1_pieces, g, 1.0)
    a1tt = _sum_pieces(a1dot_pieces, g, 1.0)
    grad_a1 = tuple(_sum_pieces(grad_pieces[axis], g, 1.0) for axis in range(3))
    lap_a1 = _sum_pieces(lap_pieces, g, 1.0)
    peak = float(w2.max())
    tail_bounds = {
        "zero_mode": peak / nu_max,
        "nonzero_mode": peak / nu_max ** 2,
    }
    return ProfileBundle(
        state=state, nu_max=nu_max, node_count=node_count,
        a1_pieces=a1_pieces, a1dot_pieces=a1dot_pieces,
        a1_grad_pieces=grad_pieces,
        a1_tilde=a1t, a1_tilde_tilde=a1tt,
        grad_a1_tilde=grad_a1, lap_a1_tilde=lap_a1,
        grad_w=gradient(g, state.w_plus), lap_w=laplacian(g, state.w_plus),
        tail_bounds=tail_bounds, quadrature_nodes=node_log)


def build_a1_tilde(state: AsymptoticState, nu_max: float = 64.0,
                   node_count: int = 256, **kw) -> np.ndarray:
    """The tail field on the profile grid (multiscale quadrature)."""
    return build_profile_bundle(state, nu_max, node_count, **kw).a1_tilde


def build_a1_tilde_tilde(state: AsymptoticState, nu_max: float = 64.0,
                         node_count: int = 256, **kw) -> np.ndarray:
    """The companion (cosine-multiplier) tail field on the profile grid."""
    return build_profile_bundle(state, nu_max, node_count, **kw).a1_tilde_tilde


# ---------------------------------------------------------------------------
# time-dependent evaluators

def phase(bundle: ProfileBundle, t: float) -> np.ndarray:
    """Long-range phase ln(t) * A1_tilde on the profile grid; zero at t=1."""
    if t < 1.0:
        raise ValueError(f"profile times start at 1, got {t}")
    if t == 1.0:
        return bundle.grid.zeros(dtype=float)
    return np.log(t) * bundle.a1_tilde


def g_tilde(bundle: ProfileBundle, t: float) -> np.ndarray:
    """Phase-corrected profile amplitude exp(-i phi) w_+ on the profile grid."""
    return np.exp(-1j * phase(bundle, t)) * bundle.state.w_plus


def _md_onto(bundle: ProfileBundle, fields, t: float, out: Grid):
    """Apply the dispersive profile map to profile-grid fields, sampling the
    result on the grid `out` (which may be the profile grid itself)."""
    mod = np.exp((0.5j / t) * out.x2) * md_prefactor(t)
    results = []
    for f in fields:
        if out is bundle.grid:
            results.append(md_apply(out, f, t))
        else:
            results.append(mod * resample_scaled(f, bundle.grid, out, 1.0 / t))
    return results


def u_a(bundle: ProfileBundle, t: float, out_grid: Grid | None = None) -> np.ndarray:
    """The Schrodinger profile at time t, sampled on out_grid.

    Without out_grid the state's own grid is used, in which case the
    dilation support contract applies (large t needs a larger box).
    """
    out = out_grid or bundle.grid
    return _md_onto(bundle, [g_tilde(bundle, t)], t, out)[0]


def a0(state: AsymptoticState, t: float) -> WaveState:
    """Free wave evolution of the wave data to time t."""
    return wave_propagate(state.wave_state(), t)


def a1(bundle: ProfileBundle, t: float, out_grid: Grid | None = None) -> np.ndarray:
    """Wave tail t^(-1) A1_tilde(x/t)."""
    out = out_grid or bundle.wave_grid
    return bundle.a1_tilde_on(out, 1.0 / t) / t


def a1_dot(bundle: ProfileBundle, t: float, out_grid: Grid | None = None) -> np.ndarray:
    """Time derivative of the wave tail: t^(-2) A1_tilde_tilde(x/t)."""
    out = out_grid or bundle.wave_grid
    return bundle.a1_tilde_tilde_on(out, 1.0 / t) / t ** 2


def a1_gradient(bundle: ProfileBundle, t: float,
                out_grid: Grid | None = None) -> tuple:
    """Spatial gradient of the wave tail: t^(-2) (grad A1_tilde)(x/t)."""
    out = out_grid or bundle.wave_grid
    return tuple(gcomp / t ** 2
                 for gcomp in bundle.a1_tilde_grad_on(out, 1.0 / t))


def ua_gradient_bracket(bundle: ProfileBundle, t: float) -> tuple:
    """Profile-frame integrand of grad u_a: i y w + t^-1 grad w
    - i t^-1 ln t (grad A1_tilde) w, one field per axis."""
    g = bundle.grid
    w = bundle.state.w_plus
    lnt = np.log(t)
    out = []
    for axis in range(3):
        y = g.coordinate(axis)
        out.append(1j * y * w + bundle.grad_w[axis] / t
                   - 1j * lnt / t * bundle.grad_a1_tilde[axis] * w)
    return tuple(out)


def ua_time_bracket(bundle: ProfileBundle, t: float) -> np.ndarray:
    """Profile-frame integrand B such that dt u_a = MD e^(-i phi) (-i B)."""
    g = bundle.grid
    w = bundle.state.w_plus
    lnt = np.log(t)
    y_dot_grad_w = sum(g.coordinate(a) * bundle.grad_w[a] for a in range(3))
    y_dot_grad_a1 = sum(g.coordinate(a) * bundle.grad_a1_tilde[a]
                        for a in range(3))
    return (0.5 * g.x2 * w
            - 1j / t * (y_dot_grad_w + 1.5 * w)
            + bundle.a1_tilde * w / t
            - lnt / t * y_dot_grad_a1 * w)


def grad_u_a(bundle: ProfileBundle, t: float,
             out_grid: Grid | None = None) -> tuple:
    """Gradient of the profile via its closed profile-frame form."""
    out = out_grid or bundle.grid
    ph = np.exp(-1j * phase(bundle, t))
    fields = [ph * b for b in ua_gradient_bracket(bundle, t)]
    return tuple(_md_onto(bundle, fields, t, out))


def dt_u_a(bundle: ProfileBundle, t: float,
           out_grid: Grid | None = None) -> np.ndarray:
    """Time derivative of the profile via its closed profile-frame form."""
    out = out_grid or bundle.grid
    ph = np.exp(-1j * phase(bundle, t))
    return _md_onto(bundle, [-1j * ph * ua_time_bracket(bundle, t)], t, out)[0]
