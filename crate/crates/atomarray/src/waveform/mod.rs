//! Phase-continuous multi-tone waveform synthesis for acousto-optic
//! deflector drive.
//!
//! A [`ToneSegment`] is a linear frequency chirp with an amplitude profile;
//! sequences of segments placed on an absolute sample timeline form a
//! [`Program`]. The [`Synthesizer`] renders a program into fixed-size
//! [`Chunk`]s whose samples are independent of the chunking (the SIMD
//! kernels re-anchor their phasors on a fixed absolute-sample grid), so a
//! stream can be generated piecewise in real time. [`stream`] adds the
//! chunked streaming pipeline, benchmark statistics, and sinks.

mod kernel;
pub mod stream;

pub use stream::{
    benchmark_program, stream_plan, stream_program, BinarySink, ChunkSink, NullSink, StreamStats,
};

use crate::error::{Error, Result};
use kernel::{CombGroup, EnvShape, GenTone};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Default sample rate; at this rate one default chunk spans 2.6 ms.
pub const DEFAULT_SAMPLE_RATE: f64 = 201.6e6;
/// Default streaming chunk size in samples.
pub const DEFAULT_CHUNK_SIZE: usize = 524_288;
/// Maximum number of simultaneously active tones.
pub const MAX_TONES: usize = 64;

/// Usable RF band of one AOD axis.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AodBand {
    pub lo_hz: f64,
    pub hi_hz: f64,
}

impl Default for AodBand {
    /// 62 tone slots of 350 kHz; the slot spacing divides the default sample
    /// rate (201.6 MS/s / 350 kHz = 576), which keeps constant-frequency
    /// tone combs periodic in an integer number of samples.
    fn default() -> Self {
        AodBand { lo_hz: 75.0e6, hi_hz: 75.0e6 + 62.0 * 350.0e3 }
    }
}

impl AodBand {
    pub fn span_hz(&self) -> f64 {
        self.hi_hz - self.lo_hz
    }
    pub fn contains(&self, f: f64) -> bool {
        f >= self.lo_hz - 1e-6 && f <= self.hi_hz + 1e-6
    }
}

/// Amplitude profile of a tone segment, parameterized on u ∈ [0, 1].
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub enum AmplitudeProfile {
    Constant(f64),
    /// Smooth ramp built from two parabolas; endpoints are hit exactly and
    /// the slope vanishes at both ends.
    QuadraticRamp { from: f64, to: f64 },
    /// Natural cubic spline through (u, amplitude) control points.
    CubicPoints(Vec<(f64, f64)>),
}

impl AmplitudeProfile {
    pub fn at(&self, u: f64) -> f64 {
        match self {
            AmplitudeProfile::Constant(a) => *a,
            AmplitudeProfile::QuadraticRamp { from, to } => {
                from + (to - from) * kernel::quad_shape(u.clamp(0.0, 1.0))
            }
            AmplitudeProfile::CubicPoints(pts) => spline_eval(pts, u.clamp(0.0, 1.0)),
        }
    }

    /// Largest amplitude the profile can reach (used for normalization).
    pub fn peak(&self) -> f64 {
        match self {
            AmplitudeProfile::Constant(a) => a.abs(),
            AmplitudeProfile::QuadraticRamp { from, to } => from.abs().max(to.abs()),
            AmplitudeProfile::CubicPoints(pts) => {
                // sample densely; spline overshoot beyond knots is small but real
                (0..=256)
                    .map(|i| spline_eval(pts, i as f64 / 256.0).abs())
                    .fold(0.0, f64::max)
            }
        }
    }

    fn in_range(&self) -> bool {
        match self {
            AmplitudeProfile::Constant(a) => (0.0..=1.0).contains(a),
            AmplitudeProfile::QuadraticRamp { from, to } => {
                (0.0..=1.0).contains(from) && (0.0..=1.0).contains(to)
            }
            AmplitudeProfile::CubicPoints(pts) => {
                !pts.is_empty() && pts.iter().all(|&(u, a)| (0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&a))
            }
        }
    }
}

/// Natural cubic spline through `pts` (sorted by u), evaluated at `u`.
fn spline_eval(pts: &[(f64, f64)], u: f64) -> f64 {
    let n = pts.len();
    if n == 1 {
        return pts[0].1;
    }
    if n == 2 {
        let t = (u - pts[0].0) / (pts[1].0 - pts[0].0);
        return pts[0].1 + t * (pts[1].1 - pts[0].1);
    }
    // second derivatives from the tridiagonal system (Thomas algorithm,
    // natural ends m[0] = m[n-1] = 0)
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let mut m = vec![0.0; n];
    let mut sub = vec![0.0; n];
    let mut diag = vec![1.0; n];
    let mut sup = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for i in 1..n - 1 {
        let h0 = xs[i] - xs[i - 1];
        let h1 = xs[i + 1] - xs[i];
        sub[i] = h0;
        diag[i] = 2.0 * (h0 + h1);
        sup[i] = h1;
        rhs[i] = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
    }
    for i in 1..n {
        let w = sub[i] / diag[i - 1];
        diag[i] -= w * sup[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    m[n - 1] = rhs[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        m[i] = (rhs[i] - sup[i] * m[i + 1]) / diag[i];
    }
    let j = match xs.iter().position(|&x| x >= u) {
        Some(0) | None => {
            if u <= xs[0] {
                0
            } else {
                n - 2
            }
        }
        Some(k) => k - 1,
    };
    let h = xs[j + 1] - xs[j];
    let a = (xs[j + 1] - u) / h;
    let b = (u - xs[j]) / h;
    a * ys[j]
        + b * ys[j + 1]
        + ((a * a * a - a) * m[j] + (b * b * b - b) * m[j + 1]) * h * h / 6.0
}

/// One linear-chirp tone segment. The phase is the exact integral of the
/// instantaneous frequency: φ(t) = phase_rad + 2π(f_start·t + ½·r·t²) with
/// r = (f_end − f_start)/duration.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ToneSegment {
    pub f_start_hz: f64,
    pub f_end_hz: f64,
    pub amplitude: AmplitudeProfile,
    /// Phase at the first sample of the segment, radians.
    pub phase_rad: f64,
    pub duration_samples: usize,
}

impl ToneSegment {
    pub fn validate(&self, band: &AodBand) -> Result<()> {
        if self.duration_samples == 0 {
            return Err(Error::domain("tone segment with zero duration"));
        }
        if !band.contains(self.f_start_hz) || !band.contains(self.f_end_hz) {
            return Err(Error::domain(format!(
                "tone frequency {:.3}–{:.3} MHz outside band {:.3}–{:.3} MHz",
                self.f_start_hz * 1e-6,
                self.f_end_hz * 1e-6,
                band.lo_hz * 1e-6,
                band.hi_hz * 1e-6
            )));
        }
        if !self.amplitude.in_range() {
            return Err(Error::domain("tone amplitude outside [0, 1]"));
        }
        Ok(())
    }

    pub fn chirp_rate_hz_s(&self, sample_rate: f64) -> f64 {
        (self.f_end_hz - self.f_start_hz) / (self.duration_samples as f64 / sample_rate)
    }

    /// Phase at the sample just past the end (the start phase of a
    /// continuous successor), mod 2π.
    pub fn end_phase(&self, sample_rate: f64) -> f64 {
        let t = self.duration_samples as f64 / sample_rate;
        let r = self.chirp_rate_hz_s(sample_rate);
        (self.phase_rad + std::f64::consts::TAU * (self.f_start_hz * t + 0.5 * r * t * t))
            % std::f64::consts::TAU
    }
}

/// A tone segment placed at an absolute sample offset in a program.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PlacedSegment {
    pub start: usize,
    pub tone: ToneSegment,
}

/// Optional regular frequency grid; constant-frequency tones on this grid
/// sharing an amplitude envelope are rendered through a periodic-table fast
/// path whose cost is independent of the tone count.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CombGrid {
    pub f_ref_hz: f64,
    pub df_hz: f64,
}

impl CombGrid {
    /// Period in samples if the grid divides the sample rate cleanly.
    fn period(&self, sample_rate: f64) -> Option<usize> {
        let p = sample_rate / self.df_hz;
        let pr = p.round();
        if (p - pr).abs() < 1e-6 && pr > 0.0 && pr <= 1_048_576.0 && (pr as usize) % 8 == 0 {
            Some(pr as usize)
        } else {
            None
        }
    }
}

/// A set of placed tone segments plus the sampling context.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Program {
    pub segments: Vec<PlacedSegment>,
    pub sample_rate: f64,
    pub grid: Option<CombGrid>,
}

impl Program {
    pub fn new(sample_rate: f64) -> Program {
        Program { segments: Vec::new(), sample_rate, grid: None }
    }

    pub fn total_samples(&self) -> usize {
        self.segments.iter().map(|s| s.start + s.tone.duration_samples).max().unwrap_or(0)
    }

    /// Largest number of simultaneously active tones.
    pub fn max_active(&self) -> usize {
        let mut events: Vec<(usize, i32)> = Vec::new();
        for s in &self.segments {
            events.push((s.start, 1));
            events.push((s.start + s.tone.duration_samples, -1));
        }
        events.sort();
        let (mut cur, mut max) = (0i32, 0i32);
        for (_, d) in events {
            cur += d;
            max = max.max(cur);
        }
        max as usize
    }

    pub fn validate(&self, band: &AodBand) -> Result<()> {
        for s in &self.segments {
            s.tone.validate(band)?;
        }
        if self.max_active() > MAX_TONES {
            return Err(Error::TooLarge(format!(
                "{} simultaneous tones exceeds the {MAX_TONES}-tone limit",
                self.max_active()
            )));
        }
        Ok(())
    }
}

/// One rendered chunk of the output stream.
#[derive(Debug, Clone)]
pub struct Chunk {
    pub samples: Vec<f32>,
    pub sample_rate: f64,
    pub index: u64,
    /// True if the program's amplitude sum exceeded 1 and the output was
    /// rescaled to fit full scale.
    pub normalized: bool,
}

/// Renders a [`Program`] into consecutive chunks. Rendering is deterministic
/// and chunking-invariant: phasors are re-anchored from exact f64 phase on a
/// fixed absolute-sample grid that the default chunk size aligns with.
pub struct Synthesizer {
    program: Program,
    chunk_size: usize,
    cursor: usize,
    index: u64,
    total: usize,
    scale: f64,
    normalized: bool,
    /// Precompiled comb groups (see [`Synthesizer::compile`]).
    groups: Vec<CombGroup>,
    /// Tones rendered by the generic phasor kernel, with their end sample.
    gens: Vec<(GenTone, usize)>,
    /// Indexes of segments that need per-sample scalar rendering.
    slows: Vec<usize>,
}

impl Synthesizer {
    pub fn new(program: Program, chunk_size: usize) -> Result<Synthesizer> {
        if chunk_size == 0 || chunk_size % 8 != 0 {
            return Err(Error::domain("chunk size must be a positive multiple of 8"));
        }
        // Worst-case amplitude sum over each overlap set; > 1 triggers
        // normalization of the whole stream so |sample| ≤ 1.
        let mut events: Vec<(usize, f64)> = Vec::new();
        for s in &program.segments {
            let p = s.tone.amplitude.peak();
            events.push((s.start, p));
            events.push((s.start + s.tone.duration_samples, -p));
        }
        events.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.partial_cmp(&b.1).unwrap()));
        let (mut cur, mut peak) = (0.0f64, 0.0f64);
        for (_, d) in events {
            cur += d;
            peak = peak.max(cur);
        }
        let normalized = peak > 1.0;
        let total = program.total_samples();
        let scale = if normalized { 1.0 / peak } else { 1.0 };
        let (groups, gens, slows) = Self::compile(&program, scale);
        Ok(Synthesizer {
            program,
            chunk_size,
            cursor: 0,
            index: 0,
            total,
            scale,
            normalized,
            groups,
            gens,
            slows,
        })
    }

    /// Partition the program once, ahead of rendering: comb-eligible groups,
    /// SIMD-friendly constant-amplitude tones, and a scalar remainder. A comb
    /// group is a set of tones whose pairwise frequency offsets are exact
    /// multiples of the grid spacing and that share placement, chirp rate,
    /// and envelope shape: their sum is a periodic baseband table times one
    /// (possibly chirped) carrier, so the render cost is independent of the
    /// group size and the tables are built only once per program.
    #[allow(clippy::type_complexity)]
    fn compile(
        program: &Program,
        scale: f64,
    ) -> (Vec<CombGroup>, Vec<(GenTone, usize)>, Vec<usize>) {
        let fs = program.sample_rate;
        let period = program.grid.and_then(|g| g.period(fs));
        // key: (start, duration, envelope shape bits, chirp rate bits,
        // off-grid carrier offset quantized to 1e-6 of the grid spacing)
        type CombKey = (usize, usize, u64, u64, u64, i64);
        let mut comb_buckets: HashMap<CombKey, Vec<usize>> = HashMap::new();
        let mut gens: Vec<(GenTone, usize)> = Vec::new();
        let mut slows: Vec<usize> = Vec::new();
        let fallback = |i: usize, gens: &mut Vec<(GenTone, usize)>, slows: &mut Vec<usize>| {
            let s = &program.segments[i];
            let t = &s.tone;
            match &t.amplitude {
                AmplitudeProfile::Constant(a) => gens.push((
                    GenTone {
                        f0_hz: t.f_start_hz,
                        rate_hz_s: t.chirp_rate_hz_s(fs),
                        phase0: t.phase_rad,
                        origin: s.start,
                        amp: a * scale,
                    },
                    s.start + t.duration_samples,
                )),
                _ => slows.push(i),
            }
        };
        for (i, s) in program.segments.iter().enumerate() {
            let t = &s.tone;
            if let (Some(_), Some(grid)) = (period, program.grid) {
                if s.start % 8 == 0 {
                    // group key: placement + envelope shape (normalized)
                    let shape = match &t.amplitude {
                        AmplitudeProfile::Constant(_) => Some((0u64, 0u64)),
                        AmplitudeProfile::QuadraticRamp { from, to } => {
                            let p = from.abs().max(to.abs());
                            if p == 0.0 {
                                Some((0, 0))
                            } else {
                                Some(((from / p).to_bits(), (to / p).to_bits()))
                            }
                        }
                        AmplitudeProfile::CubicPoints(_) => None,
                    };
                    if let Some((b0, b1)) = shape {
                        let rel = (t.f_start_hz - grid.f_ref_hz) / grid.df_hz;
                        let off = rel - rel.round();
                        let q_off = (off * 1e6).round() as i64;
                        let rate = t.chirp_rate_hz_s(fs);
                        comb_buckets
                            .entry((s.start, t.duration_samples, b0, b1, rate.to_bits(), q_off))
                            .or_default()
                            .push(i);
                        continue;
                    }
                }
            }
            fallback(i, &mut gens, &mut slows);
        }
        // deterministic group order regardless of hash iteration
        let mut buckets: Vec<_> = comb_buckets.into_iter().collect();
        buckets.sort_by_key(|(k, _)| *k);
        let mut groups: Vec<CombGroup> = Vec::new();
        for (key, members) in buckets {
            let rate = f64::from_bits(key.4);
            // Small buckets are cheaper through the generic kernels; a
            // chirped group already pays off at three members because the
            // carrier is the only per-group phasor work.
            let min_members = if rate == 0.0 { 4 } else { 3 };
            if members.len() < min_members {
                for i in members {
                    fallback(i, &mut gens, &mut slows);
                }
                continue;
            }
            let grid = program.grid.unwrap();
            let p = period.unwrap();
            let first = &program.segments[members[0]];
            let env = match &first.tone.amplitude {
                AmplitudeProfile::Constant(_) => EnvShape::Const(scale),
                AmplitudeProfile::QuadraticRamp { from, to } => {
                    let pk = from.abs().max(to.abs());
                    if pk == 0.0 {
                        EnvShape::Const(0.0)
                    } else {
                        EnvShape::Quad { from: from / pk * scale, to: to / pk * scale }
                    }
                }
                AmplitudeProfile::CubicPoints(_) => unreachable!(),
            };
            // carrier = first member's frequency with its grid index removed,
            // so it carries the group's common off-grid offset (if any)
            let m_first = ((first.tone.f_start_hz - grid.f_ref_hz) / grid.df_hz).round();
            let f_car = first.tone.f_start_hz - m_first * grid.df_hz;
            let specs: Vec<(i64, f64, f64)> = members
                .iter()
                .map(|&i| {
                    let s = &program.segments[i];
                    let m = ((s.tone.f_start_hz - f_car) / grid.df_hz).round() as i64;
                    let w = match &s.tone.amplitude {
                        AmplitudeProfile::Constant(a) => *a,
                        AmplitudeProfile::QuadraticRamp { from, to } => from.abs().max(to.abs()),
                        AmplitudeProfile::CubicPoints(_) => unreachable!(),
                    };
                    (m, s.tone.phase_rad, w)
                })
                .collect();
            groups.push(CombGroup::build(
                f_car,
                rate,
                p,
                &specs,
                fs,
                first.start,
                first.tone.duration_samples,
                env,
            ));
        }
        (groups, gens, slows)
    }

    /// True if the output had to be rescaled to stay within full scale.
    pub fn normalized(&self) -> bool {
        self.normalized
    }

    pub fn n_chunks(&self) -> usize {
        self.total.div_ceil(self.chunk_size)
    }

    pub fn next_chunk(&mut self) -> Option<Chunk> {
        self.next_chunk_into(Vec::new())
    }

    /// Like [`next_chunk`](Self::next_chunk), but reuses `buf` for the
    /// sample storage so a steady-state stream does not allocate.
    pub fn next_chunk_into(&mut self, mut samples: Vec<f32>) -> Option<Chunk> {
        if self.cursor >= self.total {
            return None;
        }
        let start = self.cursor;
        let end = start + self.chunk_size;
        samples.clear();
        samples.resize(self.chunk_size, 0.0);
        self.render(&mut samples, start..end);
        self.cursor = end;
        let c = Chunk {
            samples,
            sample_rate: self.program.sample_rate,
            index: self.index,
            normalized: self.normalized,
        };
        self.index += 1;
        Some(c)
    }

    /// Render the absolute sample range `range` into `out` (indexed from
    /// `range.start`).
    pub fn render(&self, out: &mut [f32], range: std::ops::Range<usize>) {
        let fs = self.program.sample_rate;
        // restrict to segments touching this range, then split the range at
        // their boundaries into spans with a fixed active set
        let in_range: Vec<&PlacedSegment> = self
            .program
            .segments
            .iter()
            .filter(|s| s.start < range.end && s.start + s.tone.duration_samples > range.start)
            .collect();
        let mut cuts: Vec<usize> = vec![range.start, range.end];
        for s in &in_range {
            for b in [s.start, s.start + s.tone.duration_samples] {
                if b > range.start && b < range.end {
                    cuts.push(b);
                }
            }
        }
        cuts.sort_unstable();
        cuts.dedup();
        for w in cuts.windows(2) {
            self.render_span(out, range.start, w[0]..w[1], fs);
        }
    }

    fn render_span(&self, out: &mut [f32], out0: usize, span: std::ops::Range<usize>, fs: f64) {
        // active comb groups for this span; spans never straddle a segment
        // boundary, so a group is either fully active or fully inactive
        let mut groups: Vec<&CombGroup> = Vec::new();
        for g in &self.groups {
            if g.seg_start < span.end && g.seg_start + g.seg_len > span.start {
                groups.push(g);
            }
        }
        if groups.len() <= 2 {
            for g in &groups {
                kernel::add_comb(out, out0, span.clone(), g, fs);
            }
        } else {
            // with many groups, tile the span so the output slice stays in
            // cache while every group's table streams over it; tiles sit on
            // an absolute grid so chunked and monolithic synthesis agree
            const TILE: usize = 8192;
            let mut t0 = span.start / TILE * TILE;
            while t0 < span.end {
                let sub = t0.max(span.start)..(t0 + TILE).min(span.end);
                for g in &groups {
                    kernel::add_comb(out, out0, sub.clone(), g, fs);
                }
                t0 += TILE;
            }
        }
        let gen: Vec<GenTone> = self
            .gens
            .iter()
            .filter(|(t, end)| t.origin < span.end && *end > span.start)
            .map(|(t, _)| *t)
            .collect();
        kernel::add_tones(out, out0, span.clone(), &gen, fs);
        // scalar remainder: amplitude evaluated per sample
        for &i in &self.slows {
            let s = &self.program.segments[i];
            if s.start >= span.end || s.start + s.tone.duration_samples <= span.start {
                continue;
            }
            let t = &s.tone;
            let rate = t.chirp_rate_hz_s(fs);
            let du = if t.duration_samples > 1 { 1.0 / (t.duration_samples as f64 - 1.0) } else { 0.0 };
            for n in span.clone() {
                let dt = (n - s.start) as f64 / fs;
                let ph = t.phase_rad
                    + std::f64::consts::TAU * (t.f_start_hz * dt + 0.5 * rate * dt * dt);
                let a = t.amplitude.at((n - s.start) as f64 * du) * self.scale;
                out[n - out0] += (a * ph.sin()) as f32;
            }
        }
    }
}

/// Affine map between a transverse coordinate (µm) and AOD drive frequency.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FrequencyMap {
    /// Frequency at coordinate 0 µm.
    pub f0_hz: f64,
    pub hz_per_um: f64,
    pub band: AodBand,
}

impl FrequencyMap {
    pub fn freq_of(&self, x_um: f64) -> f64 {
        self.f0_hz + self.hz_per_um * x_um
    }

    pub fn coord_of(&self, f_hz: f64) -> f64 {
        (f_hz - self.f0_hz) / self.hz_per_um
    }

    /// Comb grid for lattice sites spaced `spacing_um` apart (sites sit at
    /// half-integer lattice coordinates, so the reference tone is the site
    /// at lattice index 0).
    pub fn grid(&self, spacing_um: f64) -> CombGrid {
        CombGrid { f_ref_hz: self.freq_of(spacing_um / 2.0), df_hz: self.hz_per_um * spacing_um }
    }
}

/// Build the coordinate→frequency map spreading `[x_lo_um, x_hi_um]`
/// affinely across `band`.
pub fn frequency_map(x_lo_um: f64, x_hi_um: f64, band: AodBand) -> Result<FrequencyMap> {
    let extent_um = x_hi_um - x_lo_um;
    if !(extent_um > 0.0) {
        return Err(Error::domain("extent must be positive"));
    }
    // one deflector axis covers at most ~600 µm of field of view
    if extent_um > 600.0 {
        return Err(Error::TooLarge(format!(
            "extent {extent_um:.0} µm exceeds the 600 µm field of view of one deflector axis"
        )));
    }
    let hz_per_um = band.span_hz() / extent_um;
    Ok(FrequencyMap { f0_hz: band.lo_hz - x_lo_um * hz_per_um, hz_per_um, band })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rustfft::num_complex::Complex64;
    use rustfft::FftPlanner;

    fn spectrum(samples: &[f32]) -> Vec<f64> {
        let mut buf: Vec<Complex64> =
            samples.iter().map(|&v| Complex64::new(v as f64, 0.0)).collect();
        let mut planner = FftPlanner::new();
        planner.plan_fft_forward(buf.len()).process(&mut buf);
        buf.iter().map(|c| c.norm_sqr()).collect()
    }

    fn tone(f: f64, amp: AmplitudeProfile, dur: usize) -> ToneSegment {
        ToneSegment { f_start_hz: f, f_end_hz: f, amplitude: amp, phase_rad: 0.0, duration_samples: dur }
    }

    #[test]
    fn single_tone_is_pure_sinusoid() {
        // bin-centered frequency: no leakage, sidelobes only from numerics
        let n = 65_536usize;
        let fs = DEFAULT_SAMPLE_RATE;
        let k = 26_000; // bin index
        let f = k as f64 * fs / n as f64;
        let mut prog = Program::new(fs);
        prog.segments.push(PlacedSegment {
            start: 0,
            tone: tone(f, AmplitudeProfile::Constant(1.0), n),
        });
        let mut out = vec![0f32; n];
        Synthesizer::new(prog, n).unwrap().render(&mut out, 0..n);
        let spec = spectrum(&out);
        let peak = spec[k];
        let worst = spec[1..n / 2]
            .iter()
            .enumerate()
            .filter(|(i, _)| (*i as i64 + 1 - k as i64).abs() > 2)
            .map(|(_, &p)| p)
            .fold(0.0, f64::max);
        let db = 10.0 * (worst / peak).log10();
        assert!(db < -60.0, "worst sidelobe {db:.1} dB");
    }

    #[test]
    fn linear_sweep_ridge_tracks_frequency() {
        let fs = DEFAULT_SAMPLE_RATE;
        let n = 262_144usize;
        let (f0, f1) = (80e6, 90e6);
        let mut prog = Program::new(fs);
        prog.segments.push(PlacedSegment {
            start: 0,
            tone: ToneSegment {
                f_start_hz: f0,
                f_end_hz: f1,
                amplitude: AmplitudeProfile::Constant(1.0),
                phase_rad: 0.0,
                duration_samples: n,
            },
        });
        let mut out = vec![0f32; n];
        Synthesizer::new(prog, n).unwrap().render(&mut out, 0..n);
        // short-time FFT oracle: ridge should move linearly f0 → f1
        let win = 8192;
        for frac in [0.125, 0.5, 0.875] {
            let c = (n as f64 * frac) as usize;
            let spec = spectrum(&out[c - win / 2..c + win / 2]);
            let kmax = (1..win / 2).max_by(|&a, &b| spec[a].partial_cmp(&spec[b]).unwrap()).unwrap();
            let f_meas = kmax as f64 * fs / win as f64;
            let f_true = f0 + (f1 - f0) * frac;
            assert!(
                (f_meas - f_true).abs() < 4.0 * fs / win as f64,
                "ridge at {:.2} MHz, expected {:.2} MHz",
                f_meas * 1e-6,
                f_true * 1e-6
            );
        }
    }

    #[test]
    fn sixty_four_tones_normalize_and_share_power() {
        let fs = DEFAULT_SAMPLE_RATE;
        let n = 65_536usize;
        let mut prog = Program::new(fs);
        let bins: Vec<usize> = (0..64).map(|k| 24_000 + 160 * k).collect();
        for &k in &bins {
            prog.segments.push(PlacedSegment {
                start: 0,
                tone: tone(k as f64 * fs / n as f64, AmplitudeProfile::Constant(1.0), n),
            });
        }
        let mut synth = Synthesizer::new(prog, n).unwrap();
        assert!(synth.normalized());
        let chunk = synth.next_chunk().unwrap();
        assert!(chunk.normalized);
        let peak = chunk.samples.iter().fold(0f32, |m, &v| m.max(v.abs()));
        assert!(peak <= 1.0, "peak {peak}");
        let spec = spectrum(&chunk.samples);
        let powers: Vec<f64> = bins.iter().map(|&k| spec[k]).collect();
        let mean = powers.iter().sum::<f64>() / powers.len() as f64;
        for p in &powers {
            assert!((p / mean - 1.0).abs() < 0.01, "tone power off by {:.3}%", (p / mean - 1.0) * 100.0);
        }
    }

    #[test]
    fn chunk_concatenation_matches_monolithic() {
        let fs = DEFAULT_SAMPLE_RATE;
        let n = 4 * 16_384usize;
        let mut prog = Program::new(fs);
        for k in 0..7 {
            prog.segments.push(PlacedSegment {
                start: k * 8192,
                tone: ToneSegment {
                    f_start_hz: 78e6 + k as f64 * 2e6,
                    f_end_hz: 80e6 + k as f64 * 2e6,
                    amplitude: AmplitudeProfile::Constant(0.1),
                    phase_rad: 0.3 * k as f64,
                    duration_samples: n - k * 8192,
                },
            });
        }
        let mut mono = vec![0f32; n];
        Synthesizer::new(prog.clone(), n).unwrap().render(&mut mono, 0..n);
        let mut synth = Synthesizer::new(prog, 16_384).unwrap();
        let mut cat: Vec<f32> = Vec::new();
        while let Some(c) = synth.next_chunk() {
            cat.extend_from_slice(&c.samples);
        }
        assert_eq!(cat.len(), n);
        let maxdiff = mono
            .iter()
            .zip(&cat)
            .map(|(&a, &b)| (a - b).abs() as f64)
            .fold(0.0, f64::max);
        assert!(maxdiff < 1e-6, "chunked vs monolithic differ by {maxdiff:.2e}");
    }

    #[test]
    fn phase_continuity_across_segments() {
        let fs = DEFAULT_SAMPLE_RATE;
        let a = ToneSegment {
            f_start_hz: 80e6,
            f_end_hz: 85e6,
            amplitude: AmplitudeProfile::Constant(1.0),
            phase_rad: 0.7,
            duration_samples: 40_320,
        };
        let b_phase = a.end_phase(fs);
        // successor synthesized from the chained phase continues the phase
        // function exactly
        let t = a.duration_samples as f64 / fs;
        let exact = 0.7 + std::f64::consts::TAU * (a.f_start_hz * t + 0.5 * a.chirp_rate_hz_s(fs) * t * t);
        let diff = (b_phase - exact).rem_euclid(std::f64::consts::TAU);
        let diff = diff.min(std::f64::consts::TAU - diff);
        assert!(diff < 1e-9, "phase seam {diff:.2e} rad");
    }

    #[test]
    fn quadratic_ramp_hits_endpoints() {
        let p = AmplitudeProfile::QuadraticRamp { from: 0.2, to: 0.9 };
        assert_eq!(p.at(0.0), 0.2);
        assert!((p.at(1.0) - 0.9).abs() < 1e-12);
        let spline = AmplitudeProfile::CubicPoints(vec![(0.0, 0.1), (0.4, 0.8), (1.0, 0.3)]);
        assert!((spline.at(0.0) - 0.1).abs() < 1e-12);
        assert!((spline.at(0.4) - 0.8).abs() < 1e-12);
        assert!((spline.at(1.0) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn comb_path_agrees_with_generic_path() {
        let fs = DEFAULT_SAMPLE_RATE;
        let band = AodBand::default();
        let map = frequency_map(0.0, 62.0 * 7.2, band).unwrap();
        let grid = map.grid(7.2);
        let n = 40_320usize;
        let build = |with_grid: bool| {
            let mut prog = Program::new(fs);
            prog.grid = if with_grid { Some(grid) } else { None };
            for k in 0..24 {
                let f = grid.f_ref_hz + (k as f64 - 12.0) * grid.df_hz;
                prog.segments.push(PlacedSegment {
                    start: 0,
                    tone: ToneSegment {
                        f_start_hz: f,
                        f_end_hz: f,
                        amplitude: AmplitudeProfile::QuadraticRamp { from: 0.0, to: 1.0 / 64.0 },
                        phase_rad: 0.11 * k as f64,
                        duration_samples: n,
                    },
                });
            }
            let mut out = vec![0f32; n];
            Synthesizer::new(prog, n).unwrap().render(&mut out, 0..n);
            out
        };
        let fast = build(true);
        let slow = build(false);
        let maxdiff = fast
            .iter()
            .zip(&slow)
            .map(|(&a, &b)| (a - b).abs() as f64)
            .fold(0.0, f64::max);
        assert!(maxdiff < 5e-5, "comb vs generic differ by {maxdiff:.2e}");
    }

    #[test]
    fn chirped_comb_path_agrees_with_generic_path() {
        // tones sharing one chirp rate, placement, and a common off-grid
        // frequency offset factor into a table times one chirped carrier
        let fs = DEFAULT_SAMPLE_RATE;
        let band = AodBand::default();
        let map = frequency_map(0.0, 62.0 * 7.2, band).unwrap();
        let grid = map.grid(7.2);
        let n = 30_240usize;
        let sweep = 2.0 * grid.df_hz;
        let off = 0.37 * grid.df_hz;
        let build = |with_grid: bool| {
            let mut prog = Program::new(fs);
            prog.grid = if with_grid { Some(grid) } else { None };
            for k in 0..8 {
                let f = grid.f_ref_hz + off + (4.0 * k as f64) * grid.df_hz;
                prog.segments.push(PlacedSegment {
                    start: 0,
                    tone: ToneSegment {
                        f_start_hz: f,
                        f_end_hz: f + sweep,
                        amplitude: AmplitudeProfile::Constant(1.0 / 64.0),
                        phase_rad: 0.23 * k as f64,
                        duration_samples: n,
                    },
                });
            }
            let mut out = vec![0f32; n];
            Synthesizer::new(prog, n).unwrap().render(&mut out, 0..n);
            out
        };
        let fast = build(true);
        let slow = build(false);
        let maxdiff = fast
            .iter()
            .zip(&slow)
            .map(|(&a, &b)| (a - b).abs() as f64)
            .fold(0.0, f64::max);
        assert!(maxdiff < 5e-5, "chirped comb vs generic differ by {maxdiff:.2e}");
    }

    #[test]
    fn frequency_map_round_trips_and_bounds() {
        let band = AodBand::default();
        let map = frequency_map(-223.2, 223.2, band).unwrap();
        // neighboring sites are one band/extent slot apart
        let df = map.freq_of(7.2) - map.freq_of(0.0);
        assert!((df - 7.2 * band.span_hz() / 446.4).abs() < 1e-6);
        for x in [-223.2, -7.2, 0.0, 3.6, 223.2] {
            assert!((map.coord_of(map.freq_of(x)) - x).abs() < 1e-9);
            assert!(band.contains(map.freq_of(x)), "x = {x}");
        }
        assert!(frequency_map(0.0, 700.0, band).is_err());
    }

    #[test]
    fn out_of_band_tone_rejected() {
        let band = AodBand::default();
        let t = tone(200e6, AmplitudeProfile::Constant(0.5), 1024);
        assert!(t.validate(&band).is_err());
        let ok = tone(80e6, AmplitudeProfile::Constant(0.5), 1024);
        assert!(ok.validate(&band).is_ok());
        let neg = tone(80e6, AmplitudeProfile::Constant(1.5), 1024);
        assert!(neg.validate(&band).is_err());
    }
}
