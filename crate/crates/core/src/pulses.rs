//! Piecewise-constant control schedules: Gaussian baselines and
//! post-processing of agent outputs.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result, OMEGA_MAX};

/// Multi-channel control trace over `[0, t_max]`, constant on each of
/// `n_steps` equal intervals. Every value lies in `[0, Ω_max]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PulseSchedule {
    t_max: f64,
    channels: Vec<Vec<f64>>,
}

impl PulseSchedule {
    pub fn new(t_max: f64, channels: Vec<Vec<f64>>) -> Result<Self> {
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(Error::invalid("t_max must be positive and finite"));
        }
        let n_steps = channels.first().map_or(0, Vec::len);
        if channels.is_empty() || n_steps == 0 {
            return Err(Error::invalid("schedule needs at least one channel and one step"));
        }
        if channels.iter().any(|c| c.len() != n_steps) {
            return Err(Error::invalid("all channels must have the same length"));
        }
        if channels.iter().flatten().any(|v| !(0.0..=OMEGA_MAX).contains(v)) {
            return Err(Error::invalid("control values must lie in [0, Ω_max]"));
        }
        Ok(Self { t_max, channels })
    }

    /// Builds a schedule from per-step control vectors (step-major).
    pub fn from_steps(t_max: f64, steps: &[Vec<f64>]) -> Result<Self> {
        let width = steps.first().map_or(0, Vec::len);
        if steps.iter().any(|s| s.len() != width) {
            return Err(Error::invalid("ragged control vectors"));
        }
        let channels = (0..width).map(|c| steps.iter().map(|s| s[c]).collect()).collect();
        Self::new(t_max, channels)
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn n_steps(&self) -> usize {
        self.channels[0].len()
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn dt(&self) -> f64 {
        self.t_max / self.n_steps() as f64
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.channels[c]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn controls_at(&self, step: usize) -> Vec<f64> {
        self.channels.iter().map(|c| c[step]).collect()
    }

    /// Centre of interval `step`.
    pub fn midpoint(&self, step: usize) -> f64 {
        (step as f64 + 0.5) * self.dt()
    }

    /// The same schedule played backwards in time.
    pub fn reversed(&self) -> Self {
        let channels = self.channels.iter().map(|c| c.iter().rev().copied().collect()).collect();
        Self { t_max: self.t_max, channels }
    }
}

/// Temporal order of the two CTAP pulses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PulseOrder {
    /// Ω23 (far side) peaks before Ω12.
    CounterIntuitive,
    /// Ω12 peaks first.
    Intuitive,
}

/// Width and separation of Gaussian pulses as fractions of `t_max`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianShape {
    /// σ / t_max.
    pub width_fraction: f64,
    /// Peak-to-peak distance / t_max.
    pub separation_fraction: f64,
}

impl Default for GaussianShape {
    fn default() -> Self {
        Self { width_fraction: 0.15, separation_fraction: 0.25 }
    }
}

impl GaussianShape {
    fn validate(&self) -> Result<()> {
        if !(self.width_fraction > 0.0 && self.width_fraction.is_finite()) {
            return Err(Error::invalid("width_fraction must be positive"));
        }
        if !(self.separation_fraction > 0.0 && self.separation_fraction < 1.0) {
            return Err(Error::invalid("separation_fraction must lie in (0, 1)"));
        }
        Ok(())
    }
}

fn check_grid(t_max: f64, n_steps: usize) -> Result<()> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::invalid("t_max must be positive and finite"));
    }
    if n_steps == 0 {
        return Err(Error::invalid("n_steps must be positive"));
    }
    Ok(())
}

fn sample_gaussian(t_max: f64, n_steps: usize, amplitude: f64, centre: f64, sigma: f64) -> Vec<f64> {
    let dt = t_max / n_steps as f64;
    (0..n_steps)
        .map(|k| {
            let t = (k as f64 + 0.5) * dt;
            let z = (t - centre) / sigma;
            (amplitude * libm::exp(-0.5 * z * z)).clamp(0.0, OMEGA_MAX)
        })
        .collect()
}

/// Two Gaussian couplings `[Ω12, Ω23]` of peak Ω_max, centred at
/// `t_max/2 ∓ separation·t_max/2`, sampled at interval midpoints.
pub fn gaussian_ctap_pair(t_max: f64, n_steps: usize, order: PulseOrder, shape: GaussianShape) -> Result<PulseSchedule> {
    check_grid(t_max, n_steps)?;
    shape.validate()?;
    let sigma = shape.width_fraction * t_max;
    let early = 0.5 * t_max * (1.0 - shape.separation_fraction);
    let late = 0.5 * t_max * (1.0 + shape.separation_fraction);
    let (c12, c23) = match order {
        PulseOrder::CounterIntuitive => (late, early),
        PulseOrder::Intuitive => (early, late),
    };
    PulseSchedule::new(
        t_max,
        vec![sample_gaussian(t_max, n_steps, OMEGA_MAX, c12, sigma), sample_gaussian(t_max, n_steps, OMEGA_MAX, c23, sigma)],
    )
}

/// Straddling baseline for five dots, channels `[Ω_left, Ω_middle, Ω_right]`.
///
/// The outer pulses follow the counter-intuitive pair (right before left);
/// the middle pulse is a single Gaussian centred at `t_max/2`, twice as wide
/// as the outer ones, with amplitude `min(Ω_max, middle_scale·Ω_max)`.
pub fn gaussian_sctap(t_max: f64, n_steps: usize, shape: GaussianShape, middle_scale: f64) -> Result<PulseSchedule> {
    if !(middle_scale >= 1.0 && middle_scale.is_finite()) {
        return Err(Error::invalid("middle_scale must be at least 1"));
    }
    let pair = gaussian_ctap_pair(t_max, n_steps, PulseOrder::CounterIntuitive, shape)?;
    let sigma_mid = 2.0 * shape.width_fraction * t_max;
    let amplitude = (middle_scale * OMEGA_MAX).min(OMEGA_MAX);
    let middle = sample_gaussian(t_max, n_steps, amplitude, 0.5 * t_max, sigma_mid);
    let [left, right]: [Vec<f64>; 2] = pair.channels.try_into().expect("pair has two channels");
    PulseSchedule::new(t_max, vec![left, middle, right])
}

/// Centred moving average with a window that shrinks at the edges.
///
/// The window for sample `i` spans `i − ⌊w/2⌋ ..= i + ⌊(w−1)/2⌋`.
pub fn moving_average(schedule: &PulseSchedule, window: usize) -> Result<PulseSchedule> {
    let n = schedule.n_steps();
    if window == 0 || window > n {
        return Err(Error::invalid(alloc::format!("window {window} outside 1..={n}")));
    }
    let back = window / 2;
    let ahead = (window - 1) / 2;
    let channels = schedule
        .channels
        .iter()
        .map(|c| {
            (0..n)
                .map(|i| {
                    let lo = i.saturating_sub(back);
                    let hi = (i + ahead).min(n - 1);
                    let slice = &c[lo..=hi];
                    (slice.iter().sum::<f64>() / slice.len() as f64).clamp(0.0, OMEGA_MAX)
                })
                .collect()
        })
        .collect();
    PulseSchedule::new(schedule.t_max, channels)
}

/// Natural cubic spline through `(x_k, y_k)` with strictly increasing knots.
/// Beyond the end knots it continues linearly.
#[derive(Clone, Debug)]
pub struct NaturalCubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl NaturalCubicSpline {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(Error::invalid("spline needs at least two matching knots"));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("spline knots must be strictly increasing"));
        }
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior second-derivative system.
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            let mut upper = vec![0.0; k];
            for i in 0..k {
                let h0 = x[i + 1] - x[i];
                let h1 = x[i + 2] - x[i + 1];
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0 * ((y[i + 2] - y[i + 1]) / h1 - (y[i + 1] - y[i]) / h0);
            }
            for i in 1..k {
                let lower = x[i + 1] - x[i];
                let f = lower / diag[i - 1];
                diag[i] -= f * upper[i - 1];
                rhs[i] -= f * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
            }
        }
        Ok(Self { x, y, m })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.y[0] + self.slope_at(0) * (t - self.x[0]);
        }
        if t >= self.x[n - 1] {
            return self.y[n - 1] + self.slope_at(n - 1) * (t - self.x[n - 1]);
        }
        let i = self.x.partition_point(|&xi| xi <= t) - 1;
        if t == self.x[i] {
            return self.y[i];
        }
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        a * self.y[i] + b * self.y[i + 1] + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }

    fn slope_at(&self, i: usize) -> f64 {
        let n = self.x.len();
        if i == 0 {
            let h = self.x[1] - self.x[0];
            (self.y[1] - self.y[0]) / h - h * (2.0 * self.m[0] + self.m[1]) / 6.0
        } else {
            let h = self.x[n - 1] - self.x[n - 2];
            (self.y[n - 1] - self.y[n - 2]) / h + h * (self.m[n - 2] + 2.0 * self.m[n - 1]) / 6.0
        }
    }
}

/// Resamples every channel at `n_out` interval midpoints through a natural
/// cubic spline whose knots are the original midpoints.
pub fn spline_resample(schedule: &PulseSchedule, n_out: usize) -> Result<PulseSchedule> {
    let n = schedule.n_steps();
    if n < 4 {
        return Err(Error::invalid("spline resampling needs at least 4 knots"));
    }
    if n_out < n {
        return Err(Error::invalid("n_out must not be smaller than the number of knots"));
    }
    let knots: Vec<f64> = (0..n).map(|k| schedule.midpoint(k)).collect();
    let dt_out = schedule.t_max / n_out as f64;
    let channels = schedule
        .channels
        .iter()
        .map(|c| {
            let spline = NaturalCubicSpline::new(knots.clone(), c.clone())?;
            Ok((0..n_out).map(|j| spline.eval((j as f64 + 0.5) * dt_out).clamp(0.0, OMEGA_MAX)).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    PulseSchedule::new(schedule.t_max, channels)
}
