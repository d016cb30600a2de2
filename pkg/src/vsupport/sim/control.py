"""Discrete controller blocks: filters, sequence extraction, droop, VI reference."""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import signal

from ..phasor import SequenceSet, from_sequence
from ..vi import AdaptiveViParams, eval_adaptive_vi


class Biquad:
    """Second-order IIR section, transposed direct form II."""

    __slots__ = ("b0", "b1", "b2", "a1", "a2", "s1", "s2")

    def __init__(self, b, a):
        b = [float(v) for v in b] + [0.0] * (3 - len(b))
        a = [float(v) for v in a] + [0.0] * (3 - len(a))
        a0 = a[0]
        self.b0, self.b1, self.b2 = b[0] / a0, b[1] / a0, b[2] / a0
        self.a1, self.a2 = a[1] / a0, a[2] / a0
        self.s1 = self.s2 = 0.0

    def step(self, x: float) -> float:
        y = self.b0 * x + self.s1
        self.s1 = self.b1 * x - self.a1 * y + self.s2
        self.s2 = self.b2 * x - self.a2 * y
        return y

    def preset_oscillation(self, y0: float, y1: float) -> None:
        """Zero-input state whose next two outputs are ``y0`` and ``y1``."""
        self.s1 = y0
        self.s2 = y1 + self.a1 * y0

    def preset(self, x: float, y: float) -> None:
        """Place the section in a constant-input steady state."""
        self.s2 = self.b2 * x - self.a2 * y
        self.s1 = self.b1 * x - self.a1 * y + self.s2


def tustin(num, den, t_s: float, warp: float | None = None) -> Biquad:
    """Bilinear discretization, optionally prewarped to be exact at ``warp`` rad/s."""
    fs = 1.0 / t_s
    if warp is not None:
        fs = warp / (2.0 * math.tan(warp * t_s / 2.0))
    bz, az = signal.bilinear(num, den, fs=fs)
    return Biquad(bz, az)


def lowpass(omega_c: float, t_s: float) -> Biquad:
    return tustin([omega_c], [1.0, omega_c], t_s)


def resonant(gain: float, omega: float, t_s: float) -> Biquad:
    """gain * s / (s^2 + omega^2), exact resonance at ``omega``."""
    if gain == 0.0:
        return Biquad([0.0], [1.0])
    return tustin([gain, 0.0], [1.0, 0.0, omega * omega], t_s, warp=omega)


class Sogi:
    """Second-order generalized integrator: in-phase and quadrature outputs.

    With ``quadrature="integral"`` the quadrature signal is the classic
    second-integrator output k w^2 / (s^2 + k w s + w^2). Its DC gain is k,
    so a virtual reactance built on it behaves as a negative resistance of
    -k X at DC. ``"derivative"`` uses -(s / w) times the band-pass output
    instead, identical at w and zero at DC.
    """

    def __init__(self, omega: float, k: float, t_s: float, quadrature: str = "derivative"):
        kw = k * omega
        den = [1.0, kw, omega * omega]
        self.d = tustin([kw, 0.0], den, t_s, warp=omega)
        if quadrature == "integral":
            self.q = tustin([kw * omega], den, t_s, warp=omega)
        elif quadrature == "derivative":
            self.q = tustin([-k, 0.0, 0.0], den, t_s, warp=omega)
        else:
            raise ValueError(f"unknown quadrature form {quadrature!r}")

    def step(self, x: float) -> tuple[float, float]:
        return self.d.step(x), self.q.step(x)


class SequenceExtractor:
    """Dual-SOGI positive/negative sequence separation in the stationary frame."""

    def __init__(self, omega: float, t_s: float, k: float = math.sqrt(2.0),
                 quadrature: str = "derivative"):
        self.sa = Sogi(omega, k, t_s, quadrature)
        self.sb = Sogi(omega, k, t_s, quadrature)

    def step(self, alpha: float, beta: float) -> tuple[tuple[float, float], tuple[float, float]]:
        """Return ((pos_alpha, pos_beta), (neg_alpha, neg_beta))."""
        da, qa = self.sa.step(alpha)
        db, qb = self.sb.step(beta)
        pos = (0.5 * (da - qb), 0.5 * (qa + db))
        neg = (0.5 * (da + qb), 0.5 * (db - qa))
        return pos, neg


def extract_sequences(alpha, beta, extractor: SequenceExtractor):
    """Run a sample sequence through ``extractor``; returns lists of pos and neg pairs."""
    pos, neg = [], []
    for a, b in zip(alpha, beta):
        p, n = extractor.step(a, b)
        pos.append(p)
        neg.append(n)
    return pos, neg


def compute_i_omag(i_pos: complex, i_neg: complex) -> float:
    """Largest phase-current amplitude for the given sequence phasors."""
    return max(abs(i) for i in from_sequence(SequenceSet(i_pos, i_neg, 0j)))


def i_omag_from_vectors(pos: tuple[float, float], neg: tuple[float, float]) -> float:
    """Same as :func:`compute_i_omag` from extractor outputs.

    The negative-sequence space vector rotates backwards; its conjugate is
    the phasor that lines up with phase a.
    """
    return compute_i_omag(complex(*pos), complex(neg[0], -neg[1]))


def vi_reference(v_ref_a: float, v_ref_b: float,
                 i_pos: tuple[float, float], i_neg: tuple[float, float],
                 r_v: float, x_v: float) -> tuple[float, float]:
    """Subtract the virtual-impedance drop; the reactance flips sign for the negative sequence."""
    pa, pb = i_pos
    na, nb = i_neg
    drop_a = r_v * pa - x_v * pb + r_v * na + x_v * nb
    drop_b = r_v * pb + x_v * pa + r_v * nb - x_v * na
    return v_ref_a - drop_a, v_ref_b - drop_b


@dataclass(frozen=True)
class DroopParams:
    omega_n: float
    v_n: float
    p_set: float
    q_set: float
    m_p: float
    n_q: float
    k_oq: float = 0.0
    koq_channel: str = "frequency"

    def __post_init__(self):
        if self.koq_channel not in ("frequency", "magnitude"):
            raise ValueError("koq_channel must be 'frequency' or 'magnitude'")
        if min(self.m_p, self.n_q, self.k_oq) < 0:
            raise ValueError("droop gains must be >= 0")


def droop_update(p: float, q: float, v_cq: float, dp: DroopParams,
                 theta: float = 0.0) -> tuple[float, float, tuple[float, float]]:
    """Frequency, reference magnitude and the stationary-frame reference.

    ``p`` and ``q`` are already low-pass filtered. The q-axis capacitor
    voltage feedback goes either into the frequency (pulling the droop
    frame toward the capacitor voltage) or into the magnitude.
    """
    omega = dp.omega_n + dp.m_p * (dp.p_set - p)
    e = dp.v_n + dp.n_q * (dp.q_set - q)
    if dp.koq_channel == "frequency":
        omega += dp.k_oq * v_cq
    else:
        e -= dp.k_oq * v_cq
    return omega, e, (e * math.cos(theta), e * math.sin(theta))


@dataclass(frozen=True)
class ControllerParams:
    droop: DroopParams
    t_s: float = 100e-6
    omega_pf: float = 31.4         # power filter cutoff
    kp_v: float = 0.2              # S
    kr_v: float = 50.0             # S/s
    kp_i: float = 12.0             # ohm
    kr_i: float = 2000.0           # ohm/s
    sogi_k: float = math.sqrt(2.0)
    quadrature: str = "derivative"
    vi: AdaptiveViParams | None = None
    vi_fixed: tuple[float, float] | None = None   # (r_v, x_v) always applied
    vi_tau: float = 5e-3

    def __post_init__(self):
        if not self.t_s > 0:
            raise ValueError("t_s must be positive")
        if min(self.omega_pf, self.kp_v, self.kr_v, self.kp_i, self.kr_i, self.vi_tau) < 0:
            raise ValueError("controller gains must be >= 0")
        if self.vi is not None and self.vi_fixed is not None:
            raise ValueError("choose either an adaptive or a fixed virtual impedance")

    @classmethod
    def defaults(cls, ratings, vi: AdaptiveViParams | None = None, **overrides) -> "ControllerParams":
        """Gains scaled to the ratings; see the README for the choices."""
        droop_kw = {k: overrides.pop(k) for k in list(overrides) if k in DroopParams.__dataclass_fields__}
        droop = DroopParams(
            omega_n=ratings.omega_n,
            v_n=ratings.v_n_V,
            p_set=ratings.p_set,
            q_set=ratings.q_set,
            m_p=droop_kw.pop("m_p", 0.01 * ratings.omega_n / ratings.s_n_VA),
            n_q=droop_kw.pop("n_q", 0.05 * ratings.v_n_V / ratings.s_n_VA),
            k_oq=droop_kw.pop("k_oq", 0.2),
            koq_channel=droop_kw.pop("koq_channel", "frequency"),
        )
        overrides.setdefault("t_s", ratings.t_s)
        return cls(droop=droop, vi=vi, **overrides)


@dataclass
class ControlOutput:
    u: tuple[float, float]
    v_ref: tuple[float, float]       # droop reference before the VI drop
    v_ref_vi: tuple[float, float]
    omega: float
    e: float
    p: float
    q: float
    i_omag: float
    r_v: float
    x_v: float
    v_pos: tuple[float, float]
    v_neg: tuple[float, float]


class GfmController:
    """Droop outer loop, adaptive VI, and stationary-frame PR voltage/current loops."""

    def __init__(self, cp: ControllerParams):
        self.cp = cp
        d = cp.droop
        ts = cp.t_s
        w = d.omega_n
        self.i_ext = SequenceExtractor(w, ts, cp.sogi_k, cp.quadrature)
        self.v_ext = SequenceExtractor(w, ts, cp.sogi_k, cp.quadrature)
        self.p_lpf = lowpass(cp.omega_pf, ts)
        self.q_lpf = lowpass(cp.omega_pf, ts)
        self.res_v = (resonant(cp.kr_v, w, ts), resonant(cp.kr_v, w, ts))
        self.res_i = (resonant(cp.kr_i, w, ts), resonant(cp.kr_i, w, ts))
        self.z_lpf = (lowpass(1.0 / cp.vi_tau, ts), lowpass(1.0 / cp.vi_tau, ts)) if cp.vi_tau > 0 else None
        self.theta = 0.0
        self.p_f = d.p_set
        self.q_f = d.q_set
        self.r_v, self.x_v = cp.vi_fixed if cp.vi_fixed is not None else (0.0, 0.0)

    def preset(self, theta: float, p: float, q: float) -> None:
        """Start from a known operating point (angle in rad, filtered powers)."""
        self.theta = theta
        self.p_f, self.q_f = p, q
        self.p_lpf.preset(p, p)
        self.q_lpf.preset(q, q)

    def warm_start(self, v_c: complex, i_o: complex, i_l: complex | None = None, u: complex | None = None,
                   cycles: float = 3.0) -> None:
        """Start from a balanced steady state given as t = 0 space vectors.

        The sequence extractors are run over a few cycles of the ideal
        waveforms; the resonant terms are set oscillating with the
        feed-forward residuals (u - v_C and i_L - i_o) they carry in steady state.
        """
        ts = self.cp.t_s
        w = self.cp.droop.omega_n
        step = complex(math.cos(w * ts), math.sin(w * ts))
        if u is not None and i_l is not None:
            for res, y in ((self.res_i, u - v_c), (self.res_v, i_l - i_o)):
                y1 = y * step
                res[0].preset_oscillation(y.real, y1.real)
                res[1].preset_oscillation(y.imag, y1.imag)
        n = int(round(cycles * 2.0 * math.pi / w / ts))
        for k in range(-n, 0):
            rot = complex(math.cos(w * k * ts), math.sin(w * k * ts))
            v, i = v_c * rot, i_o * rot
            self.v_ext.step(v.real, v.imag)
            self.i_ext.step(i.real, i.imag)

    def step(self, i_l, v_c, i_o) -> ControlOutput:
        cp = self.cp
        d = cp.droop
        va, vb = v_c
        ia, ib = i_o
        i_pos, i_neg = self.i_ext.step(ia, ib)
        v_pos, v_neg = self.v_ext.step(va, vb)

        p_inst = 1.5 * (va * ia + vb * ib)
        q_inst = 1.5 * (vb * ia - va * ib)
        self.p_f = self.p_lpf.step(p_inst)
        self.q_f = self.q_lpf.step(q_inst)

        s, c = math.sin(self.theta), math.cos(self.theta)
        v_cq = -v_pos[0] * s + v_pos[1] * c
        omega, e, v_ref = droop_update(self.p_f, self.q_f, v_cq, d, self.theta)

        i_omag = i_omag_from_vectors(i_pos, i_neg)
        if cp.vi is not None:
            r_raw, x_raw = eval_adaptive_vi(i_omag, cp.vi)
            if self.z_lpf is None:
                self.r_v, self.x_v = r_raw, x_raw
            else:
                self.r_v = self.z_lpf[0].step(r_raw)
                self.x_v = self.z_lpf[1].step(x_raw)
        v_ref_vi = vi_reference(v_ref[0], v_ref[1], i_pos, i_neg, self.r_v, self.x_v)

        ev = (v_ref_vi[0] - va, v_ref_vi[1] - vb)
        il_ref = (ia + cp.kp_v * ev[0] + self.res_v[0].step(ev[0]),
                  ib + cp.kp_v * ev[1] + self.res_v[1].step(ev[1]))
        ei = (il_ref[0] - i_l[0], il_ref[1] - i_l[1])
        u = (va + cp.kp_i * ei[0] + self.res_i[0].step(ei[0]),
             vb + cp.kp_i * ei[1] + self.res_i[1].step(ei[1]))

        self.theta = math.remainder(self.theta + omega * cp.t_s, 2.0 * math.pi)
        return ControlOutput(u, v_ref, v_ref_vi, omega, e, self.p_f, self.q_f, i_omag,
                             self.r_v, self.x_v, v_pos, v_neg)
