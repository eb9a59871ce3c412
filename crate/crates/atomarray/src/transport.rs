//! Trap-motion kinematics, AOD cylindrical-lensing physics, thermal-atom
//! dynamics, and minimum-move-time / critical-velocity calculators.
//!
//! Unit conventions at the API surface: lengths in µm, durations in ms,
//! temperatures in K, energies in J. The integrator works in SI internally.

use crate::consts::{HBAR, K_B, M_CS, UM};
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::trap::TrapParams;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Normalized motion profile kinds.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub enum TrajectoryKind {
    /// x̂ = sin(πs)/π + s on s ∈ [−1, 1]: smooth acceleration, lowest heating.
    AdiabaticSine,
    /// Cubic profile 3s² − 2s³: constant jerk, acceleration jumps at the
    /// endpoints.
    ConstantJerk,
    /// Natural cubic spline through interior control points (s, x̂) ∈ (0,1)²,
    /// pinned to (0,0) and (1,1); the knob a trajectory optimizer adjusts.
    CubicInterpolated(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
pub enum Axis {
    StraightX,
    StraightY,
    /// Both AOD axes chirp together; the focal shift is common to x and y,
    /// so the trap translates axially instead of going astigmatic.
    Diagonal,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Trajectory {
    pub kind: TrajectoryKind,
    /// Total path length, µm.
    pub distance_um: f64,
    /// Move duration, ms.
    pub duration_ms: f64,
    pub axis: Axis,
}

/// Natural cubic spline second derivatives for knots (xs, ys).
fn spline_m(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    // tridiagonal solve (Thomas algorithm), natural ends m[0] = m[n-1] = 0
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
    m
}

impl Trajectory {
    pub fn new(kind: TrajectoryKind, distance_um: f64, duration_ms: f64, axis: Axis) -> Result<Self> {
        if distance_um < 0.0 || duration_ms <= 0.0 {
            return Err(Error::domain("need distance >= 0 and duration > 0"));
        }
        if let TrajectoryKind::CubicInterpolated(pts) = &kind {
            let mut prev = 0.0;
            for &(s, x) in pts {
                if !(0.0..1.0).contains(&s) || s <= prev || !(0.0..=1.0).contains(&x) {
                    return Err(Error::domain("control points must be strictly increasing in (0,1)"));
                }
                prev = s;
            }
        }
        Ok(Trajectory { kind, distance_um, duration_ms, axis })
    }

    fn check_t(&self, t_ms: f64) -> Result<()> {
        if !(0.0..=self.duration_ms * (1.0 + 1e-12)).contains(&t_ms) {
            return Err(Error::domain(format!(
                "t = {t_ms} ms outside [0, {}] ms",
                self.duration_ms
            )));
        }
        Ok(())
    }

    /// Normalized progress p(s) ∈ [0, 1] for s = t/T ∈ [0, 1].
    fn progress(&self, s: f64) -> f64 {
        match &self.kind {
            TrajectoryKind::AdiabaticSine => {
                let u = 2.0 * s - 1.0;
                ((PI * u).sin() / PI + u + 1.0) / 2.0
            }
            TrajectoryKind::ConstantJerk => s * s * (3.0 - 2.0 * s),
            TrajectoryKind::CubicInterpolated(pts) => {
                let mut xs = vec![0.0];
                let mut ys = vec![0.0];
                for &(a, b) in pts {
                    xs.push(a);
                    ys.push(b);
                }
                xs.push(1.0);
                ys.push(1.0);
                let m = spline_m(&xs, &ys);
                let i = xs.partition_point(|&x| x < s).clamp(1, xs.len() - 1);
                let (x0, x1, y0, y1) = (xs[i - 1], xs[i], ys[i - 1], ys[i]);
                let h = x1 - x0;
                let a = (x1 - s) / h;
                let b = (s - x0) / h;
                a * y0
                    + b * y1
                    + ((a * a * a - a) * m[i - 1] + (b * b * b - b) * m[i]) * h * h / 6.0
            }
        }
    }

    /// Normalized velocity dp/ds.
    fn progress_rate(&self, s: f64) -> f64 {
        match &self.kind {
            TrajectoryKind::AdiabaticSine => 1.0 + (PI * (2.0 * s - 1.0)).cos(),
            TrajectoryKind::ConstantJerk => 6.0 * s * (1.0 - s),
            TrajectoryKind::CubicInterpolated(_) => {
                let h = 1e-6;
                let lo = (s - h).max(0.0);
                let hi = (s + h).min(1.0);
                (self.progress(hi) - self.progress(lo)) / (hi - lo)
            }
        }
    }

    /// Path displacement at time t, µm.
    pub fn position(&self, t_ms: f64) -> Result<f64> {
        self.check_t(t_ms)?;
        Ok(self.distance_um * self.progress(t_ms / self.duration_ms))
    }

    /// Path velocity at time t, µm/ms.
    pub fn velocity(&self, t_ms: f64) -> Result<f64> {
        self.check_t(t_ms)?;
        Ok(self.distance_um / self.duration_ms * self.progress_rate(t_ms / self.duration_ms))
    }

    /// Per-AOD-axis velocity, µm/ms (diagonal moves split the path between
    /// the two axes).
    pub fn axis_velocity(&self, t_ms: f64) -> Result<f64> {
        let v = self.velocity(t_ms)?;
        Ok(match self.axis {
            Axis::Diagonal => v / std::f64::consts::SQRT_2,
            _ => v,
        })
    }
}

/// AOD + objective optics for cylindrical-lensing calculations.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct LensingModel {
    /// Effective objective focal length (incl. post-AOD magnification), mm.
    pub focal_mm: f64,
    /// Acoustic velocity in the AOD crystal, m/s.
    pub acoustic_velocity_mps: f64,
    /// Tweezer waist, µm.
    pub waist_um: f64,
    /// Trap wavelength, µm.
    pub wavelength_um: f64,
    /// AOD access time (time aperture), µs.
    pub access_time_us: f64,
}

impl LensingModel {
    pub fn new(
        focal_mm: f64,
        acoustic_velocity_mps: f64,
        waist_um: f64,
        wavelength_um: f64,
        access_time_us: f64,
    ) -> Result<Self> {
        let m = LensingModel { focal_mm, acoustic_velocity_mps, waist_um, wavelength_um, access_time_us };
        if [focal_mm, acoustic_velocity_mps, waist_um, wavelength_um, access_time_us]
            .iter()
            .any(|&v| v <= 0.0)
        {
            return Err(Error::domain("lensing parameters must be positive"));
        }
        Ok(m)
    }

    /// Rayleigh range πw0²/λ, µm.
    pub fn rayleigh_um(&self) -> f64 {
        PI * self.waist_um * self.waist_um / self.wavelength_um
    }

    /// Focal shift z_s = (f/V)·ẋ0 for a per-axis tweezer velocity, µm.
    pub fn shift_for_velocity(&self, axis_velocity_um_per_ms: f64) -> f64 {
        // f [µm] · v [µm/µs] / V [µm/µs]
        (self.focal_mm * 1e3) * (axis_velocity_um_per_ms * 1e-3) / self.acoustic_velocity_mps
    }
}

/// Focal shift z_s(t) of a trajectory, µm. Zero for a stationary trap.
pub fn focal_shift(lensing: &LensingModel, traj: &Trajectory, t_ms: f64) -> Result<f64> {
    Ok(lensing.shift_for_velocity(traj.axis_velocity(t_ms)?))
}

/// Whether a focal shift puts the trap in the split (two-minima) regime.
pub fn is_split(lensing: &LensingModel, z_s_um: f64) -> bool {
    z_s_um.abs() > 2.0 * lensing.rayleigh_um()
}

/// Characteristic shift velocity: exceeding it during transport splits the
/// trap. Exact form 2πVw0²/(fλ) and the Airy-diffraction shortcut 5.3·w0/T_a.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct CharacteristicVelocity {
    pub exact_m_per_s: f64,
    pub approx_m_per_s: f64,
}

pub fn characteristic_velocity(lensing: &LensingModel) -> CharacteristicVelocity {
    let exact = 2.0 * PI * lensing.acoustic_velocity_mps * (lensing.waist_um * UM).powi(2)
        / ((lensing.focal_mm * 1e-3) * (lensing.wavelength_um * UM));
    // w0/T_a in µm/µs is already m/s
    let approx = 5.3 * lensing.waist_um / lensing.access_time_us;
    CharacteristicVelocity { exact_m_per_s: exact, approx_m_per_s: approx }
}

/// Potential energy and gradient of the moving (lens-shifted) tweezer.
///
/// `xi`/`y`/`z` are µm relative to the trap center in the focal plane;
/// `z_s` is the focal shift, µm. Straight moves broaden only the motion
/// axis (astigmatism); diagonal moves shift the common focus.
/// Returns (U [J], dU/dξ, dU/dy, dU/dz [J/µm]).
fn potential_and_gradient(
    lensing: &LensingModel,
    trap: &TrapParams,
    xi: f64,
    y: f64,
    z: f64,
    z_s: f64,
    diagonal: bool,
) -> (f64, f64, f64, f64) {
    let zr = lensing.rayleigh_um();
    let w2 = lensing.waist_um * lensing.waist_um;
    let zx = z - z_s;
    let zy = if diagonal { z - z_s } else { z };
    let gx = 1.0 + (zx / zr).powi(2);
    let gy = 1.0 + (zy / zr).powi(2);
    let expo = -2.0 * xi * xi / (w2 * gx) - 2.0 * y * y / (w2 * gy);
    let u = -trap.depth / (gx * gy).sqrt() * expo.exp();
    let gxp = 2.0 * zx / (zr * zr);
    let gyp = 2.0 * zy / (zr * zr);
    // logarithmic derivatives of |U|
    let dlx = -4.0 * xi / (w2 * gx);
    let dly = -4.0 * y / (w2 * gy);
    let dlz = -0.5 * (gxp / gx + gyp / gy)
        + 2.0 * xi * xi * gxp / (w2 * gx * gx)
        + 2.0 * y * y * gyp / (w2 * gy * gy);
    (u, u * dlx, u * dly, u * dlz)
}

/// Potential of the moving tweezer at lab coordinates (x, y, z) µm and time
/// t; the trap center follows the trajectory along its motion axis.
pub fn moving_potential(
    lensing: &LensingModel,
    trap: &TrapParams,
    traj: &Trajectory,
    x: f64,
    y: f64,
    z: f64,
    t_ms: f64,
) -> Result<f64> {
    let x0 = traj.position(t_ms)?;
    let z_s = focal_shift(lensing, traj, t_ms)?;
    let (u, ..) = potential_and_gradient(
        lensing,
        trap,
        x - x0,
        y,
        z,
        z_s,
        traj.axis == Axis::Diagonal,
    );
    Ok(u)
}

/// One thermal-ensemble member; position µm, velocity µm/ms.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct AtomSample {
    pub position: [f64; 3],
    pub velocity: [f64; 3],
}

/// Draw a Boltzmann sample in the harmonic approximation of the trap.
pub fn thermal_sample(trap: &TrapParams, temperature_k: f64, rng: &mut SeededRng) -> AtomSample {
    let (wr, wz) = crate::trap::trap_frequencies(trap);
    let sig_v = (K_B * temperature_k / M_CS).sqrt(); // m/s
    let n = Normal::new(0.0, 1.0).unwrap();
    let mut g = || n.sample(rng);
    // σ_x = σ_v/ω in m → µm; velocity 1 m/s = 1e3 µm/ms
    AtomSample {
        position: [
            sig_v / wr / UM * g(),
            sig_v / wr / UM * g(),
            sig_v / wz / UM * g(),
        ],
        velocity: [sig_v * 1e3 * g(), sig_v * 1e3 * g(), sig_v * 1e3 * g()],
    }
}

/// Monte Carlo outcome of one move.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MoveResult {
    pub survival: f64,
    /// Mean change in radial motional quanta of the surviving atoms.
    pub delta_n: f64,
    pub n_lost: usize,
    pub n_samples: usize,
}

/// Integrate thermal samples through the moving potential with velocity
/// Verlet. An atom is lost once its trap-frame energy exceeds the escape
/// threshold (U → 0 at infinity).
pub fn simulate_move(
    lensing: &LensingModel,
    trap: &TrapParams,
    traj: &Trajectory,
    temperature_k: f64,
    n_samples: usize,
    rng: &mut SeededRng,
) -> Result<MoveResult> {
    simulate_move_dt(lensing, trap, traj, temperature_k, n_samples, 0.01, rng)
}

/// As `simulate_move` with the time step expressed as a fraction of the
/// radial period (must be ≤ 1/50).
pub fn simulate_move_dt(
    lensing: &LensingModel,
    trap: &TrapParams,
    traj: &Trajectory,
    temperature_k: f64,
    n_samples: usize,
    period_fraction: f64,
    rng: &mut SeededRng,
) -> Result<MoveResult> {
    if temperature_k <= 0.0 || n_samples == 0 {
        return Err(Error::domain("need temperature > 0 and n_samples > 0"));
    }
    if period_fraction > 1.0 / 50.0 {
        return Err(Error::domain("integrator step must be <= 1/50 radial period"));
    }
    let (wr, _) = crate::trap::trap_frequencies(trap); // rad/s
    let period_ms = 2.0 * PI / wr * 1e3;
    let dt = period_ms * period_fraction; // ms
    let t_end = traj.duration_ms;
    let n_steps = (t_end / dt).ceil() as usize;
    let dt = t_end / n_steps as f64;
    let diagonal = traj.axis == Axis::Diagonal;
    // ½m v² with v in µm/ms (= 1e-3 m/s)
    let ke = |v: f64| 0.5 * M_CS * (v * 1e-3) * (v * 1e-3);
    // µm/ms² happens to equal m/s², so a = −(dU/dx)/m with dU/dx in J/m
    let acc = |du: f64| -du / UM / M_CS;
    let hbar_wr = HBAR * wr;

    let mut lost = 0usize;
    let mut dn_sum = 0.0;
    let mut n_alive = 0usize;
    for _ in 0..n_samples {
        let s = thermal_sample(trap, temperature_k, rng);
        let (mut p, mut v) = (s.position, s.velocity);
        let quanta = |p: &[f64; 3], v: &[f64; 3], x0: f64, v0: f64| {
            let e = ke(v[0] - v0) + 0.5 * M_CS * (wr * (p[0] - x0) * UM).powi(2);
            e / hbar_wr
        };
        let n_init = quanta(&p, &v, 0.0, 0.0);
        let mut alive = true;
        let force = |p: &[f64; 3], t: f64| -> ([f64; 3], f64) {
            let x0 = traj.position(t).unwrap_or(traj.distance_um);
            let z_s = lensing
                .shift_for_velocity(traj.axis_velocity(t).unwrap_or(0.0));
            let (u, dx, dy, dz) =
                potential_and_gradient(lensing, trap, p[0] - x0, p[1], p[2], z_s, diagonal);
            ([acc(dx), acc(dy), acc(dz)], u)
        };
        let (mut a, _) = force(&p, 0.0);
        for k in 0..n_steps {
            let t_next = (k + 1) as f64 * dt;
            for i in 0..3 {
                p[i] += v[i] * dt + 0.5 * a[i] * dt * dt;
            }
            let (a_next, u) = force(&p, t_next);
            for i in 0..3 {
                v[i] += 0.5 * (a[i] + a_next[i]) * dt;
            }
            a = a_next;
            if !u.is_finite() {
                return Err(Error::Unstable("non-finite potential during integration".into()));
            }
            let v0 = traj.velocity(t_next.min(t_end)).unwrap_or(0.0);
            let e = ke(v[0] - v0) + ke(v[1]) + ke(v[2]) + u;
            if e > 0.0 {
                alive = false;
                break;
            }
        }
        if alive {
            n_alive += 1;
            dn_sum += quanta(&p, &v, traj.distance_um, 0.0) - n_init;
        } else {
            lost += 1;
        }
    }
    Ok(MoveResult {
        survival: n_alive as f64 / n_samples as f64,
        delta_n: if n_alive > 0 { dn_sum / n_alive as f64 } else { f64::NAN },
        n_lost: lost,
        n_samples,
    })
}

/// Shortest duration achieving the survival target, by bisection over T with
/// common random numbers. Errors if the target is unreachable within 100 ms.
#[allow(clippy::too_many_arguments)]
pub fn min_move_time(
    lensing: &LensingModel,
    trap: &TrapParams,
    kind: TrajectoryKind,
    axis: Axis,
    distance_um: f64,
    temperature_k: f64,
    survival_target: f64,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    if !(0.0..1.0).contains(&survival_target) {
        return Err(Error::domain("survival target must lie in (0, 1)"));
    }
    let eval = |t_ms: f64| -> Result<f64> {
        let traj = Trajectory::new(kind.clone(), distance_um, t_ms, axis)?;
        let mut rng = crate::rng::seeded(seed);
        Ok(simulate_move(lensing, trap, &traj, temperature_k, n_samples, &mut rng)?.survival)
    };
    let mut hi = 0.05; // ms
    while eval(hi)? < survival_target {
        hi *= 2.0;
        if hi > 100.0 {
            return Err(Error::Unreachable(format!(
                "survival {survival_target} not reached within 100 ms"
            )));
        }
    }
    let mut lo = hi / 2.0;
    for _ in 0..12 {
        let mid = 0.5 * (lo + hi);
        if eval(mid)? >= survival_target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Survival vs duration scan with binomial errors and an optional
/// error-function fit S(T) = A/2·(1 + erf((T−T0)/σ)).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub durations_ms: Vec<f64>,
    pub survival: Vec<f64>,
    pub errors: Vec<f64>,
    /// (amplitude, T0, sigma) when fitted.
    pub erf_fit: Option<(f64, f64, f64)>,
}

pub fn survival_scan(
    lensing: &LensingModel,
    trap: &TrapParams,
    kind: TrajectoryKind,
    axis: Axis,
    distance_um: f64,
    durations_ms: &[f64],
    temperature_k: f64,
    n_samples: usize,
    rng: &mut SeededRng,
) -> Result<SurvivalCurve> {
    let mut survival = Vec::new();
    let mut errors = Vec::new();
    for &t in durations_ms {
        let traj = Trajectory::new(kind.clone(), distance_um, t, axis)?;
        let r = simulate_move(lensing, trap, &traj, temperature_k, n_samples, rng)?;
        survival.push(r.survival);
        errors.push((r.survival * (1.0 - r.survival) / n_samples as f64).sqrt().max(1.0 / n_samples as f64));
    }
    let mut curve = SurvivalCurve {
        durations_ms: durations_ms.to_vec(),
        survival,
        errors,
        erf_fit: None,
    };
    curve.fit_error_function();
    Ok(curve)
}

impl SurvivalCurve {
    /// Fit S(T) = A/2·(1 + erf((T−T0)/σ)); stores and returns the parameters.
    pub fn fit_error_function(&mut self) -> Option<(f64, f64, f64)> {
        if self.durations_ms.len() < 4 {
            return None;
        }
        use statrs::function::erf::erf;
        let ts = self.durations_ms.clone();
        let ss = self.survival.clone();
        let es = self.errors.clone();
        let t_mid = ts[ts.len() / 2];
        let span = (ts[ts.len() - 1] - ts[0]).max(1e-6);
        let mut resid = |p: &[f64], out: &mut Vec<f64>| {
            out.clear();
            out.extend(ts.iter().zip(ss.iter().zip(&es)).map(|(&t, (&s, &e))| {
                let model = p[0] / 2.0 * (1.0 + erf((t - p[1]) / p[2].abs().max(1e-9)));
                (model - s) / e
            }));
        };
        let fit = crate::numeric::levenberg_marquardt(
            &mut resid,
            &[1.0, t_mid, span / 4.0],
            &Default::default(),
        );
        let out = (fit.params[0], fit.params[1], fit.params[2].abs());
        self.erf_fit = Some(out);
        self.erf_fit
    }
}
