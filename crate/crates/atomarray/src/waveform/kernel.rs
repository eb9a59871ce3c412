//! Low-level sample synthesis kernels.
//!
//! Every tone is a linear chirp `a·sin(φ0 + 2π(f0·t + ½·r·t²))` evaluated on
//! the sample grid. The hot path keeps a complex phasor per tone in `f32`
//! SIMD lanes and advances it by rotation; exact `f64` phasors are re-seeded
//! on a fixed absolute-sample grid so the accumulated rounding error stays
//! bounded and the output is independent of how the sample range is chunked.
//!
//! A second fast path handles "comb" groups: many constant-frequency tones
//! on a regular frequency grid sharing one amplitude envelope. Their sum is
//! periodic, so it is rendered from a precomputed one-period table and a
//! single carrier phasor, making the cost independent of the tone count.

use std::ops::Range;

/// Absolute-sample grid on which `f32` phasors are re-seeded from exact
/// `f64` values. Must divide the chunk size for chunked and monolithic
/// synthesis to be bit-identical.
pub(crate) const RESEED: usize = 16_384;
/// A constant-amplitude linear-chirp tone, active on `[start, end)` absolute
/// samples, with phase/frequency referenced to the `origin` sample.
#[derive(Debug, Clone, Copy)]
pub(crate) struct GenTone {
    pub f0_hz: f64,
    pub rate_hz_s: f64,
    pub phase0: f64,
    pub origin: usize,
    pub amp: f64,
}

impl GenTone {
    /// Exact phase at absolute sample `n`.
    pub fn phase_at(&self, n: usize, fs: f64) -> f64 {
        let t = (n as f64 - self.origin as f64) / fs;
        self.phase0 + std::f64::consts::TAU * (self.f0_hz * t + 0.5 * self.rate_hz_s * t * t)
    }
}

/// Shared amplitude envelope of a comb group, on u = m/(len−1).
#[derive(Debug, Clone, Copy)]
pub(crate) enum EnvShape {
    Const(f64),
    /// Piecewise-quadratic ramp: zero slope at both ends, endpoints exact.
    Quad { from: f64, to: f64 },
}

impl EnvShape {
    #[inline]
    pub fn at(&self, u: f64) -> f64 {
        match *self {
            EnvShape::Const(a) => a,
            EnvShape::Quad { from, to } => from + (to - from) * quad_shape(u),
        }
    }
}

/// Smooth 0→1 ramp built from two parabolas (continuous value and slope).
#[inline]
pub(crate) fn quad_shape(u: f64) -> f64 {
    if u < 0.5 {
        2.0 * u * u
    } else {
        1.0 - 2.0 * (1.0 - u) * (1.0 - u)
    }
}

/// A group of constant-frequency tones on a regular frequency grid with a
/// shared envelope; their sum is periodic with period `p` samples.
#[derive(Debug, Clone)]
pub(crate) struct CombGroup {
    /// Carrier frequency: the group's common off-grid offset (zero for a
    /// comb sitting exactly on the grid reference).
    pub f_ref_hz: f64,
    /// Common chirp rate of every member (zero for a static comb).
    pub rate_hz_s: f64,
    /// Period in samples; a multiple of 8.
    pub p: usize,
    pub table_re: Vec<f32>,
    pub table_im: Vec<f32>,
    /// Absolute sample where the group's segments start (phase + envelope origin).
    pub seg_start: usize,
    pub seg_len: usize,
    pub env: EnvShape,
}

impl CombGroup {
    /// Build the one-period table for tones at `f_ref + m_k·df` with phase
    /// `phase_k` and amplitude weight `a_k` (envelope factored out).
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        f_ref_hz: f64,
        rate_hz_s: f64,
        p: usize,
        tones: &[(i64, f64, f64)], // (m_k, phase_k, a_k)
        fs: f64,
        seg_start: usize,
        seg_len: usize,
        env: EnvShape,
    ) -> CombGroup {
        let mut re = vec![0f64; p];
        let mut im = vec![0f64; p];
        for &(m, phase, a) in tones {
            // e^{i(phase + 2π m j / p)} accumulated by rotation. Eight strided
            // phasors advance independently so the recurrence is not bound by
            // the multiply latency chain; each chain is ≤ p/8 steps long, so
            // the f64 rounding error stays negligible without re-anchoring.
            let step = std::f64::consts::TAU * (m as f64 * fs / (p as f64)) / fs;
            let (cr, ci) = ((8.0 * step).cos(), (8.0 * step).sin());
            let mut zr = [0f64; 8];
            let mut zi = [0f64; 8];
            for l in 0..8 {
                let ph = phase + step * l as f64;
                zr[l] = a * ph.cos();
                zi[l] = a * ph.sin();
            }
            let mut j = 0;
            while j + 8 <= p {
                for l in 0..8 {
                    re[j + l] += zr[l];
                    im[j + l] += zi[l];
                    let nr = zr[l] * cr - zi[l] * ci;
                    zi[l] = zr[l] * ci + zi[l] * cr;
                    zr[l] = nr;
                }
                j += 8;
            }
            for l in 0..p - j {
                re[j + l] += zr[l];
                im[j + l] += zi[l];
            }
        }
        CombGroup {
            f_ref_hz,
            rate_hz_s,
            p,
            table_re: re.iter().map(|&v| v as f32).collect(),
            table_im: im.iter().map(|&v| v as f32).collect(),
            seg_start,
            seg_len,
            env,
        }
    }
}

#[derive(Clone, Copy)]
struct Cplx {
    re: f64,
    im: f64,
}

impl Cplx {
    fn expi(p: f64) -> Cplx {
        Cplx { re: p.cos(), im: p.sin() }
    }
    fn mul(self, o: Cplx) -> Cplx {
        Cplx { re: self.re * o.re - self.im * o.im, im: self.re * o.im + self.im * o.re }
    }
    fn scale(self, a: f64) -> Cplx {
        Cplx { re: self.re * a, im: self.im * a }
    }
}

/// Exact f64 phasor state of one tone at an anchor sample: the phasor
/// itself, the one-sample and eight-sample step rotators, and the
/// advance-by-`ANCHOR_J` rotator.
#[derive(Clone, Copy)]
struct Anchor {
    z: Cplx,
    s: Cplx,
    w8: Cplx,
    wj: Cplx,
}

/// Samples between f32 lane re-anchors inside a reseed interval. Short
/// enough that the compounding error of the f32 rotator chain stays below
/// ~1e-4 per tone; anchors advance between these points by pure f64
/// multiplies, so no trig is spent on them.
const ANCHOR_J: usize = 4096;

/// Anchor computed from the exact phase formula (three sin/cos pairs).
fn trig_anchor(tone: &GenTone, n: usize, fs: f64) -> Anchor {
    let p0 = tone.phase_at(n, fs);
    Anchor {
        z: Cplx::expi(p0).scale(tone.amp),
        s: Cplx::expi(tone.phase_at(n + 1, fs) - p0),
        w8: Cplx::expi(tone.phase_at(n + 8, fs) - p0),
        wj: Cplx::expi(tone.phase_at(n + ANCHOR_J, fs) - p0),
    }
}

/// `f32` lane seeds for 8 consecutive samples at the anchor position:
/// z = amp·e^{iφ(n+l)} and the advance-by-8 rotators
/// w = e^{i(φ(n+l+8)−φ(n+l))}, filled by f64 rotation recurrences.
fn fill_lanes(a: &Anchor, eps: Cplx, eps8: Cplx) -> ([f32; 8], [f32; 8], [f32; 8], [f32; 8]) {
    let (mut z, mut s, mut w) = (a.z, a.s, a.w8);
    let (mut zr, mut zi, mut wr, mut wi) = ([0f32; 8], [0f32; 8], [0f32; 8], [0f32; 8]);
    for l in 0..8 {
        zr[l] = z.re as f32;
        zi[l] = z.im as f32;
        wr[l] = w.re as f32;
        wi[l] = w.im as f32;
        z = z.mul(s);
        s = s.mul(eps);
        w = w.mul(eps8);
    }
    (zr, zi, wr, wi)
}

/// Add constant-amplitude (chirped or not) tones into `out` over the
/// absolute-sample `span`; `out[0]` corresponds to absolute sample `out0`.
pub(crate) fn add_tones(out: &mut [f32], out0: usize, span: Range<usize>, tones: &[GenTone], fs: f64) {
    if span.is_empty() || tones.is_empty() {
        return;
    }
    #[cfg(target_arch = "x86_64")]
    {
        if is_x86_feature_detected!("avx2")
            && is_x86_feature_detected!("fma")
            && span.start % 8 == 0
            && span.end % 8 == 0
        {
            unsafe { add_tones_avx2(out, out0, span, tones, fs) };
            return;
        }
    }
    add_tones_scalar(out, out0, span, tones, fs);
}

/// Reference path: exact f64 phase per sample.
pub(crate) fn add_tones_scalar(
    out: &mut [f32],
    out0: usize,
    span: Range<usize>,
    tones: &[GenTone],
    fs: f64,
) {
    for t in tones {
        for n in span.clone() {
            out[n - out0] += (t.amp * t.phase_at(n, fs).sin()) as f32;
        }
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn add_tones_avx2(out: &mut [f32], out0: usize, span: Range<usize>, tones: &[GenTone], fs: f64) {
    use std::arch::x86_64::*;
    let tau = std::f64::consts::TAU;
    // Per-tone constant rotators. For the f32 loop: eps advances the
    // one-sample step by the chirp curvature, eps8 the 8-sample step, c the
    // per-group (8-sample) advance of w. For the f64 anchors: cj, sj, w8j
    // advance wj, s, w8 across one ANCHOR_J jump.
    struct Rot {
        eps: Cplx,
        eps8: Cplx,
        c: Cplx,
        cj: Cplx,
        sj: Cplx,
        w8j: Cplx,
    }
    let consts: Vec<Rot> = tones
        .iter()
        .map(|t| {
            let beta = tau * t.rate_hz_s / (fs * fs);
            let j = ANCHOR_J as f64;
            Rot {
                eps: Cplx::expi(beta),
                eps8: Cplx::expi(8.0 * beta),
                c: Cplx::expi(64.0 * beta),
                cj: Cplx::expi(beta * j * j),
                sj: Cplx::expi(beta * j),
                w8j: Cplx::expi(8.0 * beta * j),
            }
        })
        .collect();
    // Tones with zero rate have a constant w, so their inner loop skips the
    // rotator update entirely; they are processed four at a time, chirped
    // tones three at a time (deeper interleave hides the FMA latency).
    let mut order: Vec<usize> = (0..tones.len()).collect();
    order.sort_by_key(|&i| (tones[i].rate_hz_s != 0.0, i));
    let n_flat = order.iter().filter(|&&i| tones[i].rate_hz_s == 0.0).count();

    let mut st: Vec<[__m256; 4]> = vec![[_mm256_setzero_ps(); 4]; tones.len()];
    let mut anchors: Vec<Anchor> = Vec::new();
    let mut nb = span.start;
    let mut last_anchor: Option<usize> = None;
    while nb < span.end {
        // Slabs end on the anchor grid (which the reseed grid is a multiple
        // of); 2048 f32 samples also keep the output slab in L1.
        let end = (nb / ANCHOR_J * ANCHOR_J + ANCHOR_J).min(span.end);
        let load =
            |a: &Anchor, r: &Rot| -> [__m256; 4] {
                let (zr, zi, wr, wi) = fill_lanes(a, r.eps, r.eps8);
                unsafe {
                    [
                        _mm256_loadu_ps(zr.as_ptr()),
                        _mm256_loadu_ps(zi.as_ptr()),
                        _mm256_loadu_ps(wr.as_ptr()),
                        _mm256_loadu_ps(wi.as_ptr()),
                    ]
                }
            };
        if nb % RESEED == 0 || last_anchor.map(|a| a + ANCHOR_J) != Some(nb) {
            // exact re-anchor (span entry, off-grid entry, or reseed point)
            anchors = tones.iter().map(|t| trig_anchor(t, nb, fs)).collect();
            for i in 0..tones.len() {
                st[i] = load(&anchors[i], &consts[i]);
            }
        } else {
            // advance anchors one jump by f64 rotation and refresh the f32
            // lanes of chirped tones (flat lanes don't drift appreciably)
            for (i, t) in tones.iter().enumerate() {
                if t.rate_hz_s != 0.0 {
                    let r = &consts[i];
                    let a = &mut anchors[i];
                    a.z = a.z.mul(a.wj);
                    a.wj = a.wj.mul(r.cj);
                    a.s = a.s.mul(r.sj);
                    a.w8 = a.w8.mul(r.w8j);
                    st[i] = load(a, r);
                }
            }
        }
        last_anchor = Some(nb);
        // flat tones, 4-wide
        let mut q = 0;
        while q + 4 <= n_flat {
            let (ia, ib, ic, id) = (order[q], order[q + 1], order[q + 2], order[q + 3]);
            let [mut azr, mut azi, awr, awi] = st[ia];
            let [mut bzr, mut bzi, bwr, bwi] = st[ib];
            let [mut czr, mut czi, cwr, cwi] = st[ic];
            let [mut dzr, mut dzi, dwr, dwi] = st[id];
            let mut s = nb;
            while s < end {
                let p = out.as_mut_ptr().add(s - out0);
                let acc = _mm256_add_ps(_mm256_add_ps(azi, bzi), _mm256_add_ps(czi, dzi));
                _mm256_storeu_ps(p, _mm256_add_ps(_mm256_loadu_ps(p), acc));
                let n0 = _mm256_fmsub_ps(azr, awr, _mm256_mul_ps(azi, awi));
                let n1 = _mm256_fmadd_ps(azr, awi, _mm256_mul_ps(azi, awr));
                let n2 = _mm256_fmsub_ps(bzr, bwr, _mm256_mul_ps(bzi, bwi));
                let n3 = _mm256_fmadd_ps(bzr, bwi, _mm256_mul_ps(bzi, bwr));
                let n4 = _mm256_fmsub_ps(czr, cwr, _mm256_mul_ps(czi, cwi));
                let n5 = _mm256_fmadd_ps(czr, cwi, _mm256_mul_ps(czi, cwr));
                let n6 = _mm256_fmsub_ps(dzr, dwr, _mm256_mul_ps(dzi, dwi));
                let n7 = _mm256_fmadd_ps(dzr, dwi, _mm256_mul_ps(dzi, dwr));
                azr = n0;
                azi = n1;
                bzr = n2;
                bzi = n3;
                czr = n4;
                czi = n5;
                dzr = n6;
                dzi = n7;
                s += 8;
            }
            st[ia] = [azr, azi, awr, awi];
            st[ib] = [bzr, bzi, bwr, bwi];
            st[ic] = [czr, czi, cwr, cwi];
            st[id] = [dzr, dzi, dwr, dwi];
            q += 4;
        }
        // chirped tones, 3-wide
        while q < tones.len() {
            let take = if q < n_flat { n_flat - q } else { (tones.len() - q).min(3) };
            if take == 3 && q >= n_flat {
                let (ia, ib, ic) = (order[q], order[q + 1], order[q + 2]);
                let [mut azr, mut azi, mut awr, mut awi] = st[ia];
                let [mut bzr, mut bzi, mut bwr, mut bwi] = st[ib];
                let [mut czr, mut czi, mut cwr, mut cwi] = st[ic];
                let (acr, aci) = (
                    _mm256_set1_ps(consts[ia].c.re as f32),
                    _mm256_set1_ps(consts[ia].c.im as f32),
                );
                let (bcr, bci) = (
                    _mm256_set1_ps(consts[ib].c.re as f32),
                    _mm256_set1_ps(consts[ib].c.im as f32),
                );
                let (ccr, cci) = (
                    _mm256_set1_ps(consts[ic].c.re as f32),
                    _mm256_set1_ps(consts[ic].c.im as f32),
                );
                let mut s = nb;
                while s < end {
                    let p = out.as_mut_ptr().add(s - out0);
                    let acc = _mm256_add_ps(_mm256_add_ps(azi, bzi), czi);
                    _mm256_storeu_ps(p, _mm256_add_ps(_mm256_loadu_ps(p), acc));
                    let n0 = _mm256_fmsub_ps(azr, awr, _mm256_mul_ps(azi, awi));
                    let n1 = _mm256_fmadd_ps(azr, awi, _mm256_mul_ps(azi, awr));
                    let n2 = _mm256_fmsub_ps(bzr, bwr, _mm256_mul_ps(bzi, bwi));
                    let n3 = _mm256_fmadd_ps(bzr, bwi, _mm256_mul_ps(bzi, bwr));
                    let n4 = _mm256_fmsub_ps(czr, cwr, _mm256_mul_ps(czi, cwi));
                    let n5 = _mm256_fmadd_ps(czr, cwi, _mm256_mul_ps(czi, cwr));
                    azr = n0;
                    azi = n1;
                    bzr = n2;
                    bzi = n3;
                    czr = n4;
                    czi = n5;
                    let m0 = _mm256_fmsub_ps(awr, acr, _mm256_mul_ps(awi, aci));
                    let m1 = _mm256_fmadd_ps(awr, aci, _mm256_mul_ps(awi, acr));
                    let m2 = _mm256_fmsub_ps(bwr, bcr, _mm256_mul_ps(bwi, bci));
                    let m3 = _mm256_fmadd_ps(bwr, bci, _mm256_mul_ps(bwi, bcr));
                    let m4 = _mm256_fmsub_ps(cwr, ccr, _mm256_mul_ps(cwi, cci));
                    let m5 = _mm256_fmadd_ps(cwr, cci, _mm256_mul_ps(cwi, ccr));
                    awr = m0;
                    awi = m1;
                    bwr = m2;
                    bwi = m3;
                    cwr = m4;
                    cwi = m5;
                    s += 8;
                }
                st[ia] = [azr, azi, awr, awi];
                st[ib] = [bzr, bzi, bwr, bwi];
                st[ic] = [czr, czi, cwr, cwi];
                q += 3;
            } else {
                // leftover flat tones (< 4) or chirped tones (< 3), one at a time
                let i = order[q];
                let [mut azr, mut azi, mut awr, mut awi] = st[i];
                let (acr, aci) = (
                    _mm256_set1_ps(consts[i].c.re as f32),
                    _mm256_set1_ps(consts[i].c.im as f32),
                );
                let chirped = tones[i].rate_hz_s != 0.0;
                let mut s = nb;
                while s < end {
                    let p = out.as_mut_ptr().add(s - out0);
                    _mm256_storeu_ps(p, _mm256_add_ps(_mm256_loadu_ps(p), azi));
                    let n0 = _mm256_fmsub_ps(azr, awr, _mm256_mul_ps(azi, awi));
                    let n1 = _mm256_fmadd_ps(azr, awi, _mm256_mul_ps(azi, awr));
                    azr = n0;
                    azi = n1;
                    if chirped {
                        let m0 = _mm256_fmsub_ps(awr, acr, _mm256_mul_ps(awi, aci));
                        let m1 = _mm256_fmadd_ps(awr, aci, _mm256_mul_ps(awi, acr));
                        awr = m0;
                        awi = m1;
                    }
                    s += 8;
                }
                st[i] = [azr, azi, awr, awi];
                q += 1;
            }
        }
        nb = end;
    }
}

/// Add a comb group into `out` over the absolute-sample `span`.
pub(crate) fn add_comb(out: &mut [f32], out0: usize, span: Range<usize>, g: &CombGroup, fs: f64) {
    if span.is_empty() {
        return;
    }
    #[cfg(target_arch = "x86_64")]
    {
        if is_x86_feature_detected!("avx2")
            && is_x86_feature_detected!("fma")
            && span.start % 8 == 0
            && span.end % 8 == 0
            && g.seg_start % 8 == 0
            && g.p % 8 == 0
        {
            unsafe { add_comb_avx2(out, out0, span, g, fs) };
            return;
        }
    }
    add_comb_scalar(out, out0, span, g, fs);
}

pub(crate) fn add_comb_scalar(
    out: &mut [f32],
    out0: usize,
    span: Range<usize>,
    g: &CombGroup,
    fs: f64,
) {
    let du = if g.seg_len > 1 { 1.0 / (g.seg_len as f64 - 1.0) } else { 0.0 };
    for n in span {
        let m = n - g.seg_start;
        let t = m as f64 / fs;
        let ph = std::f64::consts::TAU * (g.f_ref_hz * t + 0.5 * g.rate_hz_s * t * t);
        let (cr, ci) = (ph.cos(), ph.sin());
        let j = m % g.p;
        let (tr, ti) = (g.table_re[j] as f64, g.table_im[j] as f64);
        let env = g.env.at(m as f64 * du);
        out[n - out0] += (env * (cr * ti + ci * tr)) as f32;
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn add_comb_avx2(out: &mut [f32], out0: usize, span: Range<usize>, g: &CombGroup, fs: f64) {
    use std::arch::x86_64::*;
    let tau = std::f64::consts::TAU;
    let carrier = GenTone {
        f0_hz: g.f_ref_hz,
        rate_hz_s: g.rate_hz_s,
        phase0: 0.0,
        origin: g.seg_start,
        amp: 1.0,
    };
    let beta = tau * g.rate_hz_s / (fs * fs);
    let eps = Cplx::expi(beta);
    let eps8 = Cplx::expi(8.0 * beta);
    let rot = Cplx::expi(64.0 * beta);
    let (rcr, rci) = (_mm256_set1_ps(rot.re as f32), _mm256_set1_ps(rot.im as f32));
    let du = if g.seg_len > 1 { 1.0 / (g.seg_len as f64 - 1.0) } else { 0.0 };
    let du8 = _mm256_set1_ps((8.0 * du) as f32);
    let half = _mm256_set1_ps(0.5);
    let onev = _mm256_set1_ps(1.0);
    let twov = _mm256_set1_ps(2.0);
    let (e_from, e_to, env_const) = match g.env {
        EnvShape::Const(a) => (0.0f32, 0.0f32, Some(_mm256_set1_ps(a as f32))),
        EnvShape::Quad { from, to } => (from as f32, (to - from) as f32, None),
    };
    let fromv = _mm256_set1_ps(e_from);
    let spanv = _mm256_set1_ps(e_to);
    let mut nb = span.start;
    while nb < span.end {
        // one carrier phasor: a fresh trig anchor per slab is cheap and keeps
        // the state a function of the absolute position only
        let end = (nb / ANCHOR_J * ANCHOR_J + ANCHOR_J).min(span.end);
        let anchor = trig_anchor(&carrier, nb, fs);
        let (a, b, c, d) = fill_lanes(&anchor, eps, eps8);
        let mut zr = _mm256_loadu_ps(a.as_ptr());
        let mut zi = _mm256_loadu_ps(b.as_ptr());
        let mut wr = _mm256_loadu_ps(c.as_ptr());
        let mut wi = _mm256_loadu_ps(d.as_ptr());
        let m0 = (nb - g.seg_start) as f64;
        let mut ul = [0f32; 8];
        for (l, v) in ul.iter_mut().enumerate() {
            *v = ((m0 + l as f64) * du) as f32;
        }
        let mut uv = _mm256_loadu_ps(ul.as_ptr());
        let mut j = (nb - g.seg_start) % g.p;
        let mut s = nb;
        while s < end {
            let tr = _mm256_loadu_ps(g.table_re.as_ptr().add(j));
            let ti = _mm256_loadu_ps(g.table_im.as_ptr().add(j));
            // Im(carrier · T) = Re(c)·Im(T) + Im(c)·Re(T)
            let v = _mm256_fmadd_ps(zr, ti, _mm256_mul_ps(zi, tr));
            let env = match env_const {
                Some(e) => e,
                None => {
                    // piecewise quadratic: 2u² below ½, 1−2(1−u)² above
                    let lo = _mm256_mul_ps(twov, _mm256_mul_ps(uv, uv));
                    let r = _mm256_sub_ps(onev, uv);
                    let hi = _mm256_fnmadd_ps(twov, _mm256_mul_ps(r, r), onev);
                    let mask = _mm256_cmp_ps(uv, half, _CMP_LT_OQ);
                    let q = _mm256_blendv_ps(hi, lo, mask);
                    _mm256_fmadd_ps(spanv, q, fromv)
                }
            };
            let p = out.as_mut_ptr().add(s - out0);
            _mm256_storeu_ps(p, _mm256_fmadd_ps(env, v, _mm256_loadu_ps(p)));
            let n0 = _mm256_fmsub_ps(zr, wr, _mm256_mul_ps(zi, wi));
            let n1 = _mm256_fmadd_ps(zr, wi, _mm256_mul_ps(zi, wr));
            zr = n0;
            zi = n1;
            if g.rate_hz_s != 0.0 {
                let m0 = _mm256_fmsub_ps(wr, rcr, _mm256_mul_ps(wi, rci));
                let m1 = _mm256_fmadd_ps(wr, rci, _mm256_mul_ps(wi, rcr));
                wr = m0;
                wi = m1;
            }
            uv = _mm256_add_ps(uv, du8);
            j += 8;
            if j == g.p {
                j = 0;
            }
            s += 8;
        }
        nb = end;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FS: f64 = 201.6e6;

    #[test]
    fn simd_tones_match_exact_phase_sum() {
        let tones: Vec<GenTone> = (0..8)
            .map(|k| GenTone {
                f0_hz: 80e6 + k as f64 * 0.35e6,
                rate_hz_s: (k as f64 - 4.0) * 3e12,
                phase0: 0.37 * k as f64,
                origin: 0,
                amp: 1.0 / 8.0,
            })
            .collect();
        let n = 65_536;
        let mut fast = vec![0f32; n];
        add_tones(&mut fast, 0, 0..n, &tones, FS);
        let mut maxerr = 0f64;
        for s in (0..n).step_by(311) {
            let exact: f64 = tones.iter().map(|t| t.amp * t.phase_at(s, FS).sin()).sum();
            maxerr = maxerr.max((exact - fast[s] as f64).abs());
        }
        assert!(maxerr < 1e-3, "maxerr {maxerr:.2e}");
    }

    #[test]
    fn chunked_equals_monolithic_bitwise() {
        let tones: Vec<GenTone> = (0..5)
            .map(|k| GenTone {
                f0_hz: 75e6 + k as f64 * 1.1e6,
                rate_hz_s: 2e13,
                phase0: 0.0,
                origin: 0,
                amp: 0.2,
            })
            .collect();
        let n = 4 * RESEED;
        let mut mono = vec![0f32; n];
        add_tones(&mut mono, 0, 0..n, &tones, FS);
        let mut parts = vec![0f32; n];
        for c in 0..4 {
            let span = c * RESEED..(c + 1) * RESEED;
            add_tones(&mut parts[span.clone()], span.start, span.clone(), &tones, FS);
        }
        assert_eq!(mono, parts);
    }

    #[test]
    fn comb_matches_direct_tone_sum() {
        let df = 350e3;
        let p = (FS / df).round() as usize; // 576
        let f_ref = 80e6;
        let specs: Vec<(i64, f64, f64)> =
            (0..16).map(|k| (k as i64 * 3, 0.21 * k as f64, 1.0 / 16.0)).collect();
        let seg_len = 40_320;
        let g = CombGroup::build(f_ref, 0.0, p, &specs, FS, 0, seg_len, EnvShape::Quad { from: 0.0, to: 1.0 });
        let mut fast = vec![0f32; seg_len];
        add_comb(&mut fast, 0, 0..seg_len, &g, FS);
        let du = 1.0 / (seg_len as f64 - 1.0);
        let mut maxerr = 0f64;
        for n in (0..seg_len).step_by(173) {
            let env = EnvShape::Quad { from: 0.0, to: 1.0 }.at(n as f64 * du);
            let exact: f64 = specs
                .iter()
                .map(|&(m, ph, a)| {
                    let f = f_ref + m as f64 * df;
                    env * a * (ph + std::f64::consts::TAU * f * n as f64 / FS).sin()
                })
                .sum();
            maxerr = maxerr.max((exact - fast[n] as f64).abs());
        }
        assert!(maxerr < 1e-4, "maxerr {maxerr:.2e}");
    }

    #[test]
    fn comb_envelope_hits_endpoints() {
        assert_eq!(quad_shape(0.0), 0.0);
        assert_eq!(quad_shape(1.0), 1.0);
        assert!((quad_shape(0.5) - 0.5).abs() < 1e-15);
    }
}

