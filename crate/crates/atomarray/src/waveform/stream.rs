//! Chunked streaming of rearrangement plans: compiles a plan into a tone
//! program, renders it chunk by chunk through a two-stage pipeline
//! (generation overlapping sink output, queue depth 2), and reports
//! per-chunk generation times against the streaming deadline.

use super::{
    AmplitudeProfile, Chunk, FrequencyMap, PlacedSegment, Program, Synthesizer, ToneSegment,
    MAX_TONES,
};
use crate::error::{Error, Result};
use crate::geometry::ArrayGeometry;
use crate::rearrange::{RearrangementPlan, StepKind, StepTiming};
use crate::transport::{Axis, Trajectory, TrajectoryKind};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::sync::mpsc;
use std::time::Instant;

/// Per-stream timing report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StreamStats {
    pub n_chunks: usize,
    pub chunk_size: usize,
    pub sample_rate: f64,
    /// Time one chunk takes to play out, µs.
    pub deadline_us: f64,
    /// Wall-clock generation time of each chunk, µs.
    pub gen_us: Vec<f64>,
    /// Generation time of the first chunk (time to first sample), µs.
    pub latency_us: f64,
    pub mean_gen_us: f64,
    pub max_gen_us: f64,
    /// deadline / mean generation time; > 1 means faster than real time.
    pub real_time_factor: f64,
    /// True if every chunk was generated within one deadline.
    pub all_deadlines_met: bool,
    /// True if the program's amplitude sum exceeded 1 and the stream was
    /// rescaled.
    pub normalized: bool,
}

impl StreamStats {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("chunk,gen_us,deadline_us,met\n");
        for (i, g) in self.gen_us.iter().enumerate() {
            s.push_str(&format!("{i},{g:.1},{:.1},{}\n", self.deadline_us, *g <= self.deadline_us));
        }
        s
    }
}

/// Destination for rendered chunks.
pub trait ChunkSink {
    fn write_chunk(&mut self, chunk: &Chunk) -> Result<()>;
}

/// Consumes chunks, keeping a checksum so synthesis cannot be optimized away.
#[derive(Debug, Default)]
pub struct NullSink {
    pub checksum: f64,
    pub n_samples: u64,
}

impl ChunkSink for NullSink {
    fn write_chunk(&mut self, chunk: &Chunk) -> Result<()> {
        // strided sum: cheap but data-dependent
        self.checksum += chunk.samples.iter().step_by(97).map(|&v| v as f64).sum::<f64>();
        self.n_samples += chunk.samples.len() as u64;
        Ok(())
    }
}

/// Raw binary writer: header (sample rate f64, chunk size u32, channel count
/// u32, all little-endian) followed by little-endian f32 samples.
pub struct BinarySink<W: Write> {
    w: W,
    wrote_header: bool,
    channels: u32,
}

impl<W: Write> BinarySink<W> {
    pub fn new(w: W, channels: u32) -> Self {
        BinarySink { w, wrote_header: false, channels }
    }

    pub fn into_inner(self) -> W {
        self.w
    }
}

impl<W: Write> ChunkSink for BinarySink<W> {
    fn write_chunk(&mut self, chunk: &Chunk) -> Result<()> {
        if !self.wrote_header {
            self.w.write_all(&chunk.sample_rate.to_le_bytes())?;
            self.w.write_all(&(chunk.samples.len() as u32).to_le_bytes())?;
            self.w.write_all(&self.channels.to_le_bytes())?;
            self.wrote_header = true;
        }
        for v in &chunk.samples {
            self.w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }
}

fn round8(samples: f64) -> usize {
    ((samples / 8.0).round() as usize) * 8
}

/// Append the tone segments of one movement (pick up at `f_src`, sweep to
/// `f_dst`, drop off) to `prog`, starting at absolute sample `start`.
/// Layout: amplitude ramp-up, split hold, constant-jerk sweep, merge hold,
/// ramp-down. Returns the number of samples consumed.
#[allow(clippy::too_many_arguments)]
fn push_movement(
    prog: &mut Program,
    start: usize,
    f_src: f64,
    f_dst: f64,
    amp: f64,
    timing: &StepTiming,
    fs: f64,
) -> usize {
    let s_ramp = round8(timing.pickup_dropoff_us / 2.0 * 1e-6 * fs);
    let s_hold = round8(timing.split_merge_us / 2.0 * 1e-6 * fs);
    let s_move = round8(timing.move_us * 1e-6 * fs);
    let mut at = start;
    let push = |prog: &mut Program, at: &mut usize, tone: ToneSegment| {
        let d = tone.duration_samples;
        prog.segments.push(PlacedSegment { start: *at, tone });
        *at += d;
    };
    // ramp up
    let ramp_up = ToneSegment {
        f_start_hz: f_src,
        f_end_hz: f_src,
        amplitude: AmplitudeProfile::QuadraticRamp { from: 0.0, to: amp },
        phase_rad: 0.0,
        duration_samples: s_ramp,
    };
    let mut phase = ramp_up.end_phase(fs);
    push(prog, &mut at, ramp_up);
    // split hold
    let hold = ToneSegment {
        f_start_hz: f_src,
        f_end_hz: f_src,
        amplitude: AmplitudeProfile::Constant(amp),
        phase_rad: phase,
        duration_samples: s_hold,
    };
    phase = hold.end_phase(fs);
    push(prog, &mut at, hold);
    // sweep: piecewise-linear chirp following the constant-jerk position
    // profile (or a plain hold for a zero-displacement pickup)
    if f_src == f_dst {
        let t = ToneSegment {
            f_start_hz: f_src,
            f_end_hz: f_src,
            amplitude: AmplitudeProfile::Constant(amp),
            phase_rad: phase,
            duration_samples: s_move,
        };
        phase = t.end_phase(fs);
        push(prog, &mut at, t);
    } else {
        const NSEG: usize = 8;
        let dur_ms = timing.move_us * 1e-3;
        // the frequency axis is affine in position, so the normalized
        // profile applies to frequency directly
        let traj = Trajectory::new(TrajectoryKind::ConstantJerk, 1.0, dur_ms, Axis::StraightX)
            .expect("unit constant-jerk trajectory");
        let piece = round8(s_move as f64 / NSEG as f64);
        let mut consumed = 0usize;
        for i in 0..NSEG {
            let len = if i == NSEG - 1 { s_move - consumed } else { piece };
            let u0 = consumed as f64 / s_move as f64;
            let u1 = (consumed + len) as f64 / s_move as f64;
            let x0 = traj.position(u0 * dur_ms).unwrap();
            let x1 = traj.position(u1 * dur_ms).unwrap();
            let t = ToneSegment {
                f_start_hz: f_src + (f_dst - f_src) * x0,
                f_end_hz: f_src + (f_dst - f_src) * x1,
                amplitude: AmplitudeProfile::Constant(amp),
                phase_rad: phase,
                duration_samples: len,
            };
            phase = t.end_phase(fs);
            push(prog, &mut at, t);
            consumed += len;
        }
    }
    // merge hold
    let hold = ToneSegment {
        f_start_hz: f_dst,
        f_end_hz: f_dst,
        amplitude: AmplitudeProfile::Constant(amp),
        phase_rad: phase,
        duration_samples: s_hold,
    };
    phase = hold.end_phase(fs);
    push(prog, &mut at, hold);
    // ramp down
    push(
        prog,
        &mut at,
        ToneSegment {
            f_start_hz: f_dst,
            f_end_hz: f_dst,
            amplitude: AmplitudeProfile::QuadraticRamp { from: amp, to: 0.0 },
            phase_rad: phase,
            duration_samples: s_ramp,
        },
    );
    at - start
}

/// Samples one plan step occupies at `fs`.
pub fn step_samples(timing: &StepTiming, fs: f64) -> usize {
    2 * round8(timing.pickup_dropoff_us / 2.0 * 1e-6 * fs)
        + 2 * round8(timing.split_merge_us / 2.0 * 1e-6 * fs)
        + round8(timing.move_us * 1e-6 * fs)
}

/// Compile a rearrangement plan into the drive program of the swept AOD
/// axis: row sorts sweep along x, row shifts along y.
pub fn compile_plan(
    plan: &RearrangementPlan,
    geometry: &ArrayGeometry,
    map: &FrequencyMap,
    timing: &StepTiming,
    sample_rate: f64,
) -> Result<Program> {
    let mut prog = Program::new(sample_rate);
    prog.grid = Some(map.grid(geometry.spacing));
    let sites = geometry.sites();
    let amp = 1.0 / MAX_TONES as f64;
    let mut at = 0usize;
    for step in &plan.steps {
        if step.moves.len() > MAX_TONES {
            return Err(Error::TooLarge(format!(
                "step with {} parallel tones exceeds the {MAX_TONES}-tone limit",
                step.moves.len()
            )));
        }
        let mut used = 0usize;
        for &(a, b) in &step.moves {
            let (xa, xb) = match step.kind {
                StepKind::RowSort { .. } => (sites[a].x, sites[b].x),
                StepKind::ColumnCompress { .. } => (sites[a].y, sites[b].y),
            };
            let (f_src, f_dst) = (map.freq_of(xa), map.freq_of(xb));
            for f in [f_src, f_dst] {
                if !map.band.contains(f) {
                    return Err(Error::Unreachable(format!(
                        "site at {:.1} µm maps to {:.3} MHz, outside the deflector band",
                        map.coord_of(f),
                        f * 1e-6
                    )));
                }
            }
            used = used.max(push_movement(&mut prog, at, f_src, f_dst, amp, timing, sample_rate));
        }
        at += if step.moves.is_empty() { step_samples(timing, sample_rate) } else { used };
    }
    Ok(prog)
}

/// Stream a program through the two-stage pipeline: chunks are generated on
/// this thread (timed) and handed to the sink on a second thread through a
/// bounded queue of depth 2, mirroring compute-ahead streaming hardware.
pub fn stream_program<S: ChunkSink + Send>(
    program: &Program,
    chunk_size: usize,
    sink: &mut S,
) -> Result<StreamStats> {
    let fs = program.sample_rate;
    let mut synth = Synthesizer::new(program.clone(), chunk_size)?;
    let normalized = synth.normalized();
    let deadline_us = chunk_size as f64 / fs * 1e6;
    let mut gen_us: Vec<f64> = Vec::with_capacity(synth.n_chunks());

    let sink_err: Result<()> = std::thread::scope(|scope| {
        let (tx, rx) = mpsc::sync_channel::<Chunk>(2);
        // drained buffers flow back so steady-state streaming does not
        // allocate (or fault in) fresh chunk storage
        let (buf_tx, buf_rx) = mpsc::channel::<Vec<f32>>();
        let consumer = scope.spawn(move || -> Result<()> {
            while let Ok(chunk) = rx.recv() {
                sink.write_chunk(&chunk)?;
                let _ = buf_tx.send(chunk.samples);
            }
            Ok(())
        });
        loop {
            let spare = buf_rx.try_recv().unwrap_or_default();
            let t0 = Instant::now();
            let Some(chunk) = synth.next_chunk_into(spare) else { break };
            gen_us.push(t0.elapsed().as_secs_f64() * 1e6);
            if tx.send(chunk).is_err() {
                break; // sink failed; its error surfaces below
            }
        }
        drop(tx);
        consumer.join().expect("sink thread panicked")
    });
    sink_err?;

    let n = gen_us.len();
    let mean = if n > 0 { gen_us.iter().sum::<f64>() / n as f64 } else { 0.0 };
    let max = gen_us.iter().cloned().fold(0.0, f64::max);
    Ok(StreamStats {
        n_chunks: n,
        chunk_size,
        sample_rate: fs,
        deadline_us,
        latency_us: gen_us.first().copied().unwrap_or(0.0),
        mean_gen_us: mean,
        max_gen_us: max,
        real_time_factor: if mean > 0.0 { deadline_us / mean } else { 0.0 },
        all_deadlines_met: gen_us.iter().all(|&g| g <= deadline_us),
        normalized,
        gen_us,
    })
}

/// Compile and stream a rearrangement plan, reporting per-chunk generation
/// timing against the streaming deadline.
pub fn stream_plan<S: ChunkSink + Send>(
    plan: &RearrangementPlan,
    geometry: &ArrayGeometry,
    map: &FrequencyMap,
    timing: &StepTiming,
    chunk_size: usize,
    sample_rate: f64,
    sink: &mut S,
) -> Result<StreamStats> {
    let program = compile_plan(plan, geometry, map, timing, sample_rate)?;
    stream_program(&program, chunk_size, sink)
}

/// Synthetic throughput workload: `n_tones` parallel movements per step for
/// `n_steps` steps, sweeping alternating distances across the band like a
/// dense rearrangement stream.
pub fn benchmark_program(
    n_tones: usize,
    n_steps: usize,
    map: &FrequencyMap,
    spacing_um: f64,
    timing: &StepTiming,
    sample_rate: f64,
) -> Result<Program> {
    if n_tones > MAX_TONES {
        return Err(Error::TooLarge(format!("{n_tones} tones exceeds the {MAX_TONES}-tone limit")));
    }
    let mut prog = Program::new(sample_rate);
    prog.grid = Some(map.grid(spacing_um));
    let grid = prog.grid.unwrap();
    let m_min = ((map.band.lo_hz - grid.f_ref_hz) / grid.df_hz).ceil() as i64;
    let m_max = ((map.band.hi_hz - grid.f_ref_hz) / grid.df_hz).floor() as i64;
    let slots = m_max - m_min;
    if slots < 4 {
        return Err(Error::domain("band too narrow for a benchmark sweep"));
    }
    let mut at = 0usize;
    for step in 0..n_steps {
        let mut used = 0usize;
        for k in 0..n_tones {
            // spread sources over the band; sweep 3–20 slots, flipping
            // direction every step so tones stay in band
            let m_src = m_min + (k as i64 * slots / n_tones.max(1) as i64);
            let dist = 3 + ((k + step) % 18) as i64;
            let m_dst =
                if step % 2 == 0 { (m_src + dist).min(m_max) } else { (m_src - dist).max(m_min) };
            let f_src = grid.f_ref_hz + m_src as f64 * grid.df_hz;
            let f_dst = grid.f_ref_hz + m_dst as f64 * grid.df_hz;
            used = used.max(push_movement(
                &mut prog,
                at,
                f_src,
                f_dst,
                1.0 / MAX_TONES as f64,
                timing,
                sample_rate,
            ));
        }
        at += used;
    }
    Ok(prog)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ArrayGeometry, Mask};
    use crate::rearrange::{self, Quadrant};
    use crate::waveform::{frequency_map, AodBand, DEFAULT_CHUNK_SIZE, DEFAULT_SAMPLE_RATE};
    use crate::{geometry, rng};

    fn small_plan() -> (RearrangementPlan, ArrayGeometry) {
        let geometry = ArrayGeometry::new(7.2, Mask::Rectangular { n_rows: 8, n_cols: 8 }).unwrap();
        let mut r = rng::seeded(5);
        let occ = geometry::sample_occupancy(&geometry, 0.6, &mut r).unwrap();
        let quad = Quadrant::from_rect_block(&geometry, 4, 4).unwrap();
        let plan = rearrange::tetris_plan(&occ, &geometry, &quad, &StepTiming::default()).unwrap();
        (plan, geometry)
    }

    #[test]
    fn empty_plan_streams_zero_chunks() {
        let geometry = ArrayGeometry::new(7.2, Mask::Rectangular { n_rows: 8, n_cols: 8 }).unwrap();
        let plan = RearrangementPlan { steps: vec![], deficit: 0, n_targets: 0 };
        let map = frequency_map(-28.8, 28.8, AodBand::default()).unwrap();
        let mut sink = NullSink::default();
        let stats = stream_plan(
            &plan,
            &geometry,
            &map,
            &StepTiming::default(),
            DEFAULT_CHUNK_SIZE,
            DEFAULT_SAMPLE_RATE,
            &mut sink,
        )
        .unwrap();
        assert_eq!(stats.n_chunks, 0);
        assert_eq!(stats.latency_us, 0.0);
        assert_eq!(sink.n_samples, 0);
    }

    #[test]
    fn plan_stream_is_deterministic() {
        let (plan, geometry) = small_plan();
        let map = frequency_map(-28.8, 28.8, AodBand::default()).unwrap();
        let run = || {
            let mut sink = NullSink::default();
            let stats = stream_plan(
                &plan,
                &geometry,
                &map,
                &StepTiming::default(),
                65_536,
                DEFAULT_SAMPLE_RATE,
                &mut sink,
            )
            .unwrap();
            (stats.n_chunks, sink.checksum)
        };
        let (n1, c1) = run();
        let (n2, c2) = run();
        assert!(n1 > 0);
        assert_eq!(n1, n2);
        assert_eq!(c1, c2, "identical plan must give a bit-identical stream");
    }

    #[test]
    fn default_chunk_spans_two_to_three_steps() {
        // one chunk of playback covers the moves of 2–3 plan steps, i.e. the
        // generator keeps 2–3 row operations in flight per chunk
        let timing = StepTiming::default();
        let chunk_ms = DEFAULT_CHUNK_SIZE as f64 / DEFAULT_SAMPLE_RATE * 1e3;
        let steps_per_chunk = chunk_ms / (step_samples(&timing, DEFAULT_SAMPLE_RATE) as f64
            / DEFAULT_SAMPLE_RATE
            * 1e3);
        assert!(
            (2.0..=3.0).contains(&steps_per_chunk),
            "chunk covers {steps_per_chunk:.2} steps"
        );
    }

    #[test]
    fn compiled_plan_respects_step_timing() {
        let (plan, geometry) = small_plan();
        let map = frequency_map(-28.8, 28.8, AodBand::default()).unwrap();
        let timing = StepTiming::default();
        let prog = compile_plan(&plan, &geometry, &map, &timing, DEFAULT_SAMPLE_RATE).unwrap();
        prog.validate(&map.band).unwrap();
        let expect = plan.steps.len() * step_samples(&timing, DEFAULT_SAMPLE_RATE);
        assert_eq!(prog.total_samples(), expect);
        assert!(prog.max_active() <= MAX_TONES);
    }

    #[test]
    fn out_of_band_plan_rejected() {
        let (plan, geometry) = small_plan();
        // a band so narrow the 8×8 block cannot fit
        let map =
            frequency_map(-28.8, 28.8, AodBand { lo_hz: 80.0e6, hi_hz: 80.2e6 }).unwrap();
        // shrink further: map extent 8 sites but pretend sites at ±
        let tight = FrequencyMap { f0_hz: 80.1e6, hz_per_um: 1.0e6, band: map.band };
        let err = stream_plan(
            &plan,
            &geometry,
            &tight,
            &StepTiming::default(),
            DEFAULT_CHUNK_SIZE,
            DEFAULT_SAMPLE_RATE,
            &mut NullSink::default(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn binary_sink_writes_header_and_samples() {
        let map = frequency_map(-57.6, 57.6, AodBand::default()).unwrap();
        let prog =
            benchmark_program(4, 1, &map, 7.2, &StepTiming::default(), DEFAULT_SAMPLE_RATE).unwrap();
        let n = prog.total_samples();
        let chunk = 65_536;
        let mut sink = BinarySink::new(Vec::<u8>::new(), 1);
        let stats = stream_program(&prog, chunk, &mut sink).unwrap();
        let bytes = sink.into_inner();
        assert_eq!(bytes.len(), 16 + stats.n_chunks * chunk * 4);
        assert_eq!(f64::from_le_bytes(bytes[0..8].try_into().unwrap()), DEFAULT_SAMPLE_RATE);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), chunk as u32);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 1);
        assert!(stats.n_chunks * chunk >= n);
    }

    #[test]
    fn benchmark_program_stays_in_band_at_full_width() {
        let map = frequency_map(0.0, 62.0 * 7.2, AodBand::default()).unwrap();
        let prog =
            benchmark_program(64, 4, &map, 7.2, &StepTiming::default(), DEFAULT_SAMPLE_RATE)
                .unwrap();
        prog.validate(&map.band).unwrap();
        assert_eq!(prog.max_active(), 64);
    }

    #[test]
    fn stats_csv_has_one_line_per_chunk() {
        let map = frequency_map(-57.6, 57.6, AodBand::default()).unwrap();
        let prog =
            benchmark_program(2, 1, &map, 7.2, &StepTiming::default(), DEFAULT_SAMPLE_RATE).unwrap();
        let stats = stream_program(&prog, 65_536, &mut NullSink::default()).unwrap();
        let csv = stats.to_csv();
        assert_eq!(csv.lines().count(), stats.n_chunks + 1);
        assert!(csv.starts_with("chunk,gen_us,deadline_us,met"));
        assert!(stats.real_time_factor > 0.0);
        assert!(stats.latency_us > 0.0);
    }

    /// Paper-scale stream: a full-quadrant plan compiled and streamed at the
    /// default chunk size; checks structure, not wall-clock speed.
    #[test]
    fn full_quadrant_plan_streams_cleanly() {
        let geometry = ArrayGeometry::paper_default();
        let mut r = rng::seeded(77);
        let occ = geometry::sample_occupancy(&geometry, 0.512, &mut r).unwrap();
        let quads = rearrange::partition_quadrants(&geometry, 0.0).unwrap();
        let plan =
            rearrange::tetris_plan(&occ, &geometry, &quads[0], &StepTiming::default()).unwrap();
        let map = frequency_map(0.0, 62.0 * 7.2, AodBand::default()).unwrap();
        let mut sink = NullSink::default();
        let stats = stream_plan(
            &plan,
            &geometry,
            &map,
            &StepTiming::default(),
            DEFAULT_CHUNK_SIZE,
            DEFAULT_SAMPLE_RATE,
            &mut sink,
        )
        .unwrap();
        assert!(stats.n_chunks > 10);
        assert!(sink.checksum.is_finite() && sink.n_samples > 0);
        assert!(!stats.normalized, "per-tone amplitudes are sized to stay within full scale");
    }
}
