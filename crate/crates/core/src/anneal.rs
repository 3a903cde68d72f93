//! Temperature schedules, threshold noise and threshold quantization.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::unit_open_closed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnnealError {
    #[error("schedule parameter {name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("temperature index must be at least 1")]
    ZeroIndex,
    #[error("operation needs an fn-log schedule")]
    NotFnLog,
    #[error("noise parameter {name} out of range: {value}")]
    BadNoise { name: &'static str, value: f64 },
    #[error("unsupported threshold precision: {0} bits (expected 8, 16, 32 or 64)")]
    BadPrecision(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    FnLog,
    InverseTime,
    ExpDecay,
    Constant,
    ColdRestart,
}

impl ScheduleKind {
    pub const ABLATION: [ScheduleKind; 3] = [ScheduleKind::FnLog, ScheduleKind::InverseTime, ScheduleKind::ExpDecay];

    pub fn name(self) -> &'static str {
        match self {
            ScheduleKind::FnLog => "fn-log",
            ScheduleKind::InverseTime => "inverse-time",
            ScheduleKind::ExpDecay => "exp-decay",
            ScheduleKind::Constant => "constant",
            ScheduleKind::ColdRestart => "cold-restart",
        }
    }
}

impl std::str::FromStr for ScheduleKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "fn-log" | "fnlog" | "log" => Ok(ScheduleKind::FnLog),
            "inverse-time" | "inverse" => Ok(ScheduleKind::InverseTime),
            "exp-decay" | "exp" => Ok(ScheduleKind::ExpDecay),
            "constant" => Ok(ScheduleKind::Constant),
            "cold-restart" | "cold" => Ok(ScheduleKind::ColdRestart),
            other => Err(format!("unknown schedule `{other}`")),
        }
    }
}

pub const DEFAULT_T0: f64 = 0.3125;
pub const DEFAULT_C: f64 = 8.0e4;
pub const DEFAULT_NOISE_MEAN: f64 = -0.916;

/// Temperature as a function of the iteration index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub kind: ScheduleKind,
    pub t0: f64,
    pub c: f64,
    pub dt: f64,
    /// First iteration of the fn-log phase (cold-restart only). `None` keeps
    /// the cold temperature for the whole run.
    #[serde(default)]
    pub restart_at: Option<u64>,
    /// Temperature before the restart; defaults to `0.01·t0`.
    #[serde(default)]
    pub cold_t: Option<f64>,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self::fn_log(DEFAULT_T0, DEFAULT_C, 1.0)
    }
}

impl AnnealSchedule {
    pub fn new(kind: ScheduleKind, t0: f64, c: f64, dt: f64) -> Self {
        Self {
            kind,
            t0,
            c,
            dt,
            restart_at: None,
            cold_t: None,
        }
    }

    pub fn fn_log(t0: f64, c: f64, dt: f64) -> Self {
        Self::new(ScheduleKind::FnLog, t0, c, dt)
    }

    pub fn constant(t: f64) -> Self {
        Self::new(ScheduleKind::Constant, t, 1.0, 1.0)
    }

    pub fn cold_restart(t0: f64, c: f64, dt: f64, cold_t: Option<f64>, restart_at: Option<u64>) -> Self {
        Self {
            restart_at,
            cold_t,
            ..Self::new(ScheduleKind::ColdRestart, t0, c, dt)
        }
    }

    pub fn cold_temperature(&self) -> f64 {
        self.cold_t.unwrap_or(0.01 * self.t0)
    }

    pub fn validate(&self) -> Result<(), AnnealError> {
        for (name, value) in [("t0", self.t0), ("c", self.c), ("dt", self.dt)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(AnnealError::NonPositive { name, value });
            }
        }
        if let Some(cold) = self.cold_t {
            if !(cold >= 0.0 && cold.is_finite()) {
                return Err(AnnealError::NonPositive {
                    name: "cold_t",
                    value: cold,
                });
            }
        }
        Ok(())
    }

    /// Temperature at iteration `n ≥ 1`.
    pub fn temperature(&self, n: u64) -> Result<f64, AnnealError> {
        if n == 0 {
            return Err(AnnealError::ZeroIndex);
        }
        Ok(self.temperature_at(n))
    }

    #[inline]
    pub fn temperature_at(&self, n: u64) -> f64 {
        let t = n as f64 * self.dt;
        match self.kind {
            ScheduleKind::FnLog => self.t0 / (t / self.c).ln_1p(),
            ScheduleKind::InverseTime => self.t0 * self.c / t,
            // clamp keeps the value positive once exp underflows
            ScheduleKind::ExpDecay => (self.t0 * (-t / self.c).exp()).max(f64::MIN_POSITIVE),
            ScheduleKind::Constant => self.t0,
            ScheduleKind::ColdRestart => match self.restart_at {
                Some(r) if n >= r => {
                    let t = (n - r + 1) as f64 * self.dt;
                    self.t0 / (t / self.c).ln_1p()
                }
                _ => self.cold_temperature(),
            },
        }
    }
}

/// Right-hand side of `dT/dt = −(T²/(C·T0))·exp(−T0/T)`.
pub fn fn_rate(t0: f64, c: f64, temp: f64) -> f64 {
    -(temp * temp / t0) * (-t0 / temp).exp() / c
}

/// Integrates the FN dynamical system forward from the closed-form value at
/// the first step. Returns `T` at iterations `1..=n_steps`.
///
/// The equation is stiff near `t = 0` where `T` is huge, so the forward Euler
/// step is taken on `y = T0/T`, for which `dy/dt = e^{−y}/C`, and `T = T0/y`
/// is reported. The scheme stays first order in `dt`.
pub fn fn_integrate(schedule: &AnnealSchedule, n_steps: usize) -> Result<Vec<f64>, AnnealError> {
    if schedule.kind != ScheduleKind::FnLog {
        return Err(AnnealError::NotFnLog);
    }
    schedule.validate()?;
    let mut out = Vec::with_capacity(n_steps);
    if n_steps == 0 {
        return Ok(out);
    }
    let mut y = (schedule.dt / schedule.c).ln_1p();
    out.push(schedule.t0 / y);
    for _ in 1..n_steps {
        y += schedule.dt * (-y).exp() / schedule.c;
        out.push(schedule.t0 / y);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseDist {
    Exponential,
    Gaussian,
    Uniform,
}

impl NoiseDist {
    pub const ALL: [NoiseDist; 3] = [NoiseDist::Exponential, NoiseDist::Gaussian, NoiseDist::Uniform];

    pub fn name(self) -> &'static str {
        match self {
            NoiseDist::Exponential => "exponential",
            NoiseDist::Gaussian => "gaussian",
            NoiseDist::Uniform => "uniform",
        }
    }
}

impl std::str::FromStr for NoiseDist {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "exponential" | "exp" => Ok(NoiseDist::Exponential),
            "gaussian" | "normal" => Ok(NoiseDist::Gaussian),
            "uniform" => Ok(NoiseDist::Uniform),
            other => Err(format!("unknown noise distribution `{other}`")),
        }
    }
}

/// Minifloat format used to round the firing threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuantFormat {
    pub total_bits: u32,
    pub exponent_bits: u32,
    pub mantissa_bits: u32,
}

impl QuantFormat {
    /// 8 → E4M3, 16 → IEEE half, 32 → IEEE single, 64 → identity.
    pub fn from_bits(bits: u32) -> Result<Self, AnnealError> {
        let (e, m) = match bits {
            8 => (4, 3),
            16 => (5, 10),
            32 => (8, 23),
            64 => (11, 52),
            other => return Err(AnnealError::BadPrecision(other)),
        };
        Ok(Self {
            total_bits: bits,
            exponent_bits: e,
            mantissa_bits: m,
        })
    }

    fn emin(&self) -> i32 {
        2 - (1 << (self.exponent_bits - 1))
    }

    pub fn smallest_normal(&self) -> f64 {
        2f64.powi(self.emin())
    }

    pub fn max_finite(&self) -> f64 {
        let emax = (1 << (self.exponent_bits - 1)) - 1;
        (2.0 - 2f64.powi(-(self.mantissa_bits as i32))) * 2f64.powi(emax)
    }

    #[inline]
    pub fn quantize(&self, x: f64) -> f64 {
        match self.total_bits {
            64 => x,
            32 => x as f32 as f64,
            _ => round_minifloat(x, self.exponent_bits, self.mantissa_bits),
        }
    }
}

/// Round-to-nearest-even into an IEEE-style format with `e` exponent and `m`
/// mantissa bits, with subnormals and overflow to infinity.
pub fn round_minifloat(x: f64, e: u32, m: u32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let bias = (1i32 << (e - 1)) - 1;
    let emin = 1 - bias;
    let max_finite = (2.0 - 2f64.powi(-(m as i32))) * 2f64.powi(bias);
    let a = x.abs();
    let exp = if a < f64::MIN_POSITIVE {
        emin
    } else {
        (((a.to_bits() >> 52) & 0x7ff) as i32 - 1023).max(emin)
    };
    let quantum = 2f64.powi(exp - m as i32);
    let q = (a / quantum).round_ties_even() * quantum;
    let q = if q > max_finite { f64::INFINITY } else { q };
    q.copysign(x)
}

/// Threshold noise configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub dist: NoiseDist,
    /// Acceptance hyperparameter `B` (exponential only).
    pub b: f64,
    /// Stability floor added inside the logarithm (exponential only).
    pub eps: f64,
    /// Long-run mean of the noise; `None` leaves samples unshifted.
    pub target_mean: Option<f64>,
    /// Probability that the Bernoulli gate reads 0.
    pub eta: f64,
    #[serde(default)]
    pub quant: Option<QuantFormat>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            dist: NoiseDist::Exponential,
            b: std::f64::consts::E,
            eps: 1e-12,
            target_mean: Some(DEFAULT_NOISE_MEAN),
            eta: 0.0,
            quant: None,
        }
    }
}

impl NoiseConfig {
    pub fn with_dist(dist: NoiseDist) -> Self {
        Self {
            dist,
            ..Self::default()
        }
    }

    /// `eps` raised to the smallest normal number of the threshold format.
    pub fn effective_eps(&self) -> f64 {
        match self.quant {
            Some(q) => self.eps.max(q.smallest_normal()),
            None => self.eps,
        }
    }
}

/// `ln(u/B + eps)`.
#[inline]
pub fn raw_exponential(u: f64, b: f64, eps: f64) -> f64 {
    (u / b + eps).ln()
}

/// Exact mean of `ln(u/B + eps)` for `u ~ U(0, 1)`.
pub fn raw_exponential_mean(b: f64, eps: f64) -> f64 {
    let hi = 1.0 / b + eps;
    let x_ln_x = |x: f64| if x == 0.0 { 0.0 } else { x * x.ln() };
    b * (x_ln_x(hi) - hi - x_ln_x(eps) + eps)
}

/// Threshold noise source with precomputed scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSampler {
    dist: NoiseDist,
    b: f64,
    eps: f64,
    shift: f64,
    mean: f64,
    eta: f64,
}

impl NoiseSampler {
    pub fn new(cfg: &NoiseConfig) -> Result<Self, AnnealError> {
        if !(cfg.eta >= 0.0 && cfg.eta <= 1.0) {
            return Err(AnnealError::BadNoise {
                name: "eta",
                value: cfg.eta,
            });
        }
        let eps = cfg.effective_eps();
        let mut shift = 0.0;
        let mut mean = 0.0;
        match cfg.dist {
            NoiseDist::Exponential => {
                if !(cfg.b >= 1.0 && cfg.b.is_finite()) {
                    return Err(AnnealError::BadNoise {
                        name: "b",
                        value: cfg.b,
                    });
                }
                if !(eps >= 0.0 && eps.is_finite()) {
                    return Err(AnnealError::BadNoise {
                        name: "eps",
                        value: eps,
                    });
                }
                if let Some(target) = cfg.target_mean {
                    if !target.is_finite() {
                        return Err(AnnealError::BadNoise {
                            name: "target_mean",
                            value: target,
                        });
                    }
                    shift = target - raw_exponential_mean(cfg.b, eps);
                }
            }
            NoiseDist::Gaussian | NoiseDist::Uniform => {
                mean = cfg.target_mean.unwrap_or(0.0);
            }
        }
        Ok(Self {
            dist: cfg.dist,
            b: cfg.b,
            eps,
            shift,
            mean,
            eta: cfg.eta,
        })
    }

    pub fn dist(&self) -> NoiseDist {
        self.dist
    }

    /// Constant added to raw exponential samples.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Largest sample magnitude that can occur (Gaussian: a ten-sigma bound).
    pub fn magnitude_bound(&self) -> f64 {
        match self.dist {
            NoiseDist::Exponential => {
                let lo = (raw_exponential(0.0, self.b, self.eps) + self.shift).abs();
                let hi = (raw_exponential(1.0, self.b, self.eps) + self.shift).abs();
                lo.max(hi)
            }
            NoiseDist::Gaussian => self.mean.abs() + 10.0,
            NoiseDist::Uniform => self.mean.abs() + 1.0,
        }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.dist {
            NoiseDist::Exponential => raw_exponential(unit_open_closed(rng), self.b, self.eps) + self.shift,
            NoiseDist::Gaussian => {
                let z: f64 = rng.sample(StandardNormal);
                self.mean + z
            }
            NoiseDist::Uniform => self.mean + 2.0 * unit_open_closed(rng) - 1.0,
        }
    }

    /// 1 with probability `1 − η`, else 0.
    #[inline]
    pub fn bernoulli<R: Rng + ?Sized>(&self, rng: &mut R) -> u8 {
        u8::from(unit_open_closed(rng) > self.eta)
    }
}

/// `μ = T·noise + A·bernoulli`, rounded to `quant` when given.
#[inline]
pub fn make_threshold(temp: f64, noise: f64, a: f64, bernoulli: u8, quant: Option<QuantFormat>) -> f64 {
    let mu = temp * noise + a * f64::from(bernoulli);
    match quant {
        Some(q) => q.quantize(mu),
        None => mu,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;

    fn defaults() -> AnnealSchedule {
        AnnealSchedule::default()
    }

    #[test]
    fn fn_log_default_values() {
        let s = defaults();
        for n in [1u64, 10, 1000, 80_000, 1_000_000, 100_000_000] {
            let expect = 0.3125 / (1.0 + n as f64 / 8.0e4).ln();
            let got = s.temperature(n).unwrap();
            assert!((got - expect).abs() <= 1e-10 * expect);
        }
    }

    #[test]
    fn fn_log_special_points() {
        // n·dt = C(e − 1) and C(e² − 1)
        let e = std::f64::consts::E;
        let s = AnnealSchedule::fn_log(0.3125, 1.0, (e - 1.0) / 1000.0);
        assert!((s.temperature(1000).unwrap() - 0.3125).abs() < 1e-12);
        let s2 = AnnealSchedule::fn_log(0.3125, 1.0, (e * e - 1.0) / 1000.0);
        assert!((s2.temperature(1000).unwrap() - 0.15625).abs() < 1e-12);
    }

    #[test]
    fn zero_index_rejected() {
        assert_eq!(defaults().temperature(0), Err(AnnealError::ZeroIndex));
    }

    #[test]
    fn other_schedules() {
        let inv = AnnealSchedule::new(ScheduleKind::InverseTime, 2.0, 10.0, 1.0);
        assert_eq!(inv.temperature(5).unwrap(), 4.0);
        let exp = AnnealSchedule::new(ScheduleKind::ExpDecay, 2.0, 10.0, 1.0);
        assert!((exp.temperature(10).unwrap() - 2.0 / std::f64::consts::E).abs() < 1e-15);
        assert!(exp.temperature(100_000_000).unwrap() > 0.0);
        assert_eq!(AnnealSchedule::constant(0.7).temperature(123).unwrap(), 0.7);
    }

    #[test]
    fn cold_restart_rebases_clock() {
        let s = AnnealSchedule::cold_restart(0.3125, 8.0e4, 1.0, None, Some(1000));
        assert_eq!(s.temperature(1).unwrap(), 0.003125);
        assert_eq!(s.temperature(999).unwrap(), 0.003125);
        assert_eq!(s.temperature(1000).unwrap(), defaults().temperature(1).unwrap());
        assert_eq!(s.temperature(1500).unwrap(), defaults().temperature(501).unwrap());
        let forever = AnnealSchedule::cold_restart(0.3125, 8.0e4, 1.0, Some(0.01), None);
        assert_eq!(forever.temperature(10_000_000).unwrap(), 0.01);
    }

    #[test]
    fn validation() {
        assert!(AnnealSchedule::fn_log(0.0, 1.0, 1.0).validate().is_err());
        assert!(AnnealSchedule::fn_log(1.0, -1.0, 1.0).validate().is_err());
        assert!(defaults().validate().is_ok());
    }

    #[test]
    fn fn_single_step_from_t0() {
        let dt = 1.0;
        let c = 8.0e4;
        let t0 = 0.3125;
        let d = dt * fn_rate(t0, c, t0);
        let expect = -(dt / c) * t0 * (-1.0f64).exp();
        assert!((d - expect).abs() <= 1e-15 * expect.abs());
    }

    fn max_rel_dev(s: &AnnealSchedule, n: usize) -> f64 {
        let num = fn_integrate(s, n).unwrap();
        num.iter()
            .enumerate()
            .map(|(k, &t)| {
                let exact = s.t0 / ((k + 1) as f64 * s.dt / s.c).ln_1p();
                ((t - exact) / exact).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn fn_integrate_tracks_closed_form() {
        let dev = max_rel_dev(&defaults(), 100_000);
        assert!(dev < 1e-4, "max relative deviation {dev}");
    }

    #[test]
    fn fn_integrate_first_order() {
        let coarse = AnnealSchedule::fn_log(0.3125, 8.0e4, 1.0);
        let fine = AnnealSchedule::fn_log(0.3125, 8.0e4, 0.1);
        // same horizon, compare at the coarse grid points
        let a = fn_integrate(&coarse, 20_000).unwrap();
        let b = fn_integrate(&fine, 200_000).unwrap();
        let err = |v: &[f64], s: &AnnealSchedule, stride: usize| {
            (1..=20_000)
                .map(|k| {
                    let idx = k * stride - 1;
                    let exact = s.t0 / ((idx + 1) as f64 * s.dt / s.c).ln_1p();
                    ((v[idx] - exact) / exact).abs()
                })
                .fold(0.0, f64::max)
        };
        let ratio = err(&a, &coarse, 1) / err(&b, &fine, 10);
        assert!((7.0..13.0).contains(&ratio), "convergence ratio {ratio}");
    }

    #[test]
    fn fn_integrate_requires_fn_log() {
        let s = AnnealSchedule::constant(1.0);
        assert_eq!(fn_integrate(&s, 3), Err(AnnealError::NotFnLog));
    }

    #[test]
    fn exponential_boundary_draw() {
        assert_eq!(raw_exponential(1.0, 1.0, 0.0), 0.0);
        assert!((raw_exponential_mean(1.0, 0.0) + 1.0).abs() < 1e-15);
        let e = std::f64::consts::E;
        assert!((raw_exponential_mean(e, 0.0) + 2.0).abs() < 1e-15);
    }

    #[test]
    fn exponential_mean_matches_target() {
        let s = NoiseSampler::new(&NoiseConfig::default()).unwrap();
        let mut rng = stream(11);
        let n = 1_000_000;
        let mean = (0..n).map(|_| s.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - DEFAULT_NOISE_MEAN).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn raw_samples_are_negative_and_bounded() {
        let cfg = NoiseConfig::default();
        let s = NoiseSampler::new(&cfg).unwrap();
        let mut rng = stream(12);
        let cap = raw_exponential(1.0, cfg.b, cfg.eps);
        assert!(cap < 0.0);
        for _ in 0..100_000 {
            let u = unit_open_closed(&mut rng);
            assert!(raw_exponential(u, cfg.b, cfg.eps) <= cap);
            assert!(s.sample(&mut rng) <= cap + s.shift());
        }
    }

    #[test]
    fn shift_hits_target_mean_exactly() {
        // B = e gives a raw mean of about −2, so the shift is about +1.084
        let s = NoiseSampler::new(&NoiseConfig::default()).unwrap();
        let raw = raw_exponential_mean(std::f64::consts::E, 1e-12);
        assert!((raw + s.shift() - DEFAULT_NOISE_MEAN).abs() < 1e-15);
        assert!((s.shift() - 1.084).abs() < 1e-9);
    }

    #[test]
    fn exponential_shape_ks() {
        let cfg = NoiseConfig::default();
        let s = NoiseSampler::new(&cfg).unwrap();
        let mut rng = stream(13);
        let n = 100_000;
        let top = raw_exponential(1.0, cfg.b, cfg.eps) + s.shift();
        // −(x − max) = −ln(u/B + eps) + ln(1/B + eps) ≈ Exp(1)
        let mut xs: Vec<f64> = (0..n).map(|_| -(s.sample(&mut rng) - top)).collect();
        xs.sort_by(f64::total_cmp);
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let cdf = 1.0 - (-x).exp();
                let lo = i as f64 / n as f64;
                let hi = (i + 1) as f64 / n as f64;
                (cdf - lo).abs().max((hi - cdf).abs())
            })
            .fold(0.0, f64::max);
        let critical = 1.628 / (n as f64).sqrt();
        assert!(d < critical, "KS statistic {d} ≥ {critical}");
    }

    #[test]
    fn gaussian_and_uniform_moments() {
        let mut rng = stream(14);
        for dist in [NoiseDist::Gaussian, NoiseDist::Uniform] {
            let s = NoiseSampler::new(&NoiseConfig::with_dist(dist)).unwrap();
            let xs: Vec<f64> = (0..200_000).map(|_| s.sample(&mut rng)).collect();
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
            assert!((mean - DEFAULT_NOISE_MEAN).abs() < 0.01);
            let want = if dist == NoiseDist::Gaussian { 1.0 } else { 1.0 / 3.0 };
            assert!((var - want).abs() < 0.01, "{dist:?} var {var}");
            if dist == NoiseDist::Uniform {
                assert!(xs.iter().all(|x| (x - DEFAULT_NOISE_MEAN).abs() <= 1.0));
            }
        }
    }

    #[test]
    fn bernoulli_degenerate_and_rate() {
        let mut rng = stream(15);
        let mut cfg = NoiseConfig::default();
        cfg.eta = 0.0;
        let always = NoiseSampler::new(&cfg).unwrap();
        assert!((0..10_000).all(|_| always.bernoulli(&mut rng) == 1));
        cfg.eta = 1.0;
        let never = NoiseSampler::new(&cfg).unwrap();
        assert!((0..10_000).all(|_| never.bernoulli(&mut rng) == 0));
        cfg.eta = 0.3;
        let s = NoiseSampler::new(&cfg).unwrap();
        let n = 1_000_000;
        let ones = (0..n).filter(|_| s.bernoulli(&mut rng) == 1).count();
        let freq = ones as f64 / n as f64;
        assert!((freq - 0.7).abs() < 1.5e-3, "freq {freq}");
        cfg.eta = 1.5;
        assert!(NoiseSampler::new(&cfg).is_err());
    }

    #[test]
    fn threshold_construction() {
        assert_eq!(make_threshold(0.3, 0.0, 5.0, 0, None), 0.0);
        let mu = make_threshold(0.3, -27.6, 1e6, 1, None);
        assert!(mu > 1e5);
    }

    #[test]
    fn eight_bit_collapses_small_thresholds() {
        let mut rng = stream(16);
        let s = NoiseSampler::new(&NoiseConfig::default()).unwrap();
        let q8 = Some(QuantFormat::from_bits(8).unwrap());
        let q16 = Some(QuantFormat::from_bits(16).unwrap());
        let mut d8 = std::collections::BTreeSet::new();
        let mut d16 = std::collections::BTreeSet::new();
        for _ in 0..10_000 {
            // thresholds of order 0.01 at temperature scale 0.3
            let noise = s.sample(&mut rng) * 0.01 / 0.3 / 0.916;
            d8.insert(make_threshold(0.3, noise, 1.0, 0, q8).to_bits());
            d16.insert(make_threshold(0.3, noise, 1.0, 0, q16).to_bits());
        }
        assert!(d8.len() < d16.len(), "{} vs {}", d8.len(), d16.len());
    }

    #[test]
    fn quant_formats() {
        let h = QuantFormat::from_bits(16).unwrap();
        assert_eq!(h.max_finite(), 65504.0);
        assert_eq!(h.smallest_normal(), 2f64.powi(-14));
        assert_eq!(h.quantize(65520.0), f64::INFINITY);
        assert_eq!(h.quantize(1.0 + 2f64.powi(-11)), 1.0);
        let e4m3 = QuantFormat::from_bits(8).unwrap();
        assert_eq!(e4m3.max_finite(), 240.0);
        assert_eq!(e4m3.quantize(1.0625), 1.0);
        assert_eq!(e4m3.quantize(1.1875), 1.25);
        assert_eq!(e4m3.quantize(2f64.powi(-9)), 2f64.powi(-9));
        assert_eq!(e4m3.quantize(2f64.powi(-11)), 0.0);
        assert!(QuantFormat::from_bits(12).is_err());
        let full = QuantFormat::from_bits(64).unwrap();
        assert_eq!(full.quantize(0.1), 0.1);
    }

    proptest! {
        #[test]
        fn fn_log_strictly_decreasing(n in 1u64..1_000_000_000) {
            let s = defaults();
            let a = s.temperature(n).unwrap();
            let b = s.temperature(n + 1).unwrap();
            prop_assert!(a > b && b > 0.0);
        }

        #[test]
        fn quantize_idempotent_and_monotone(x in -1e6f64..1e6, y in -1e6f64..1e6, bits in prop::sample::select(vec![8u32, 16, 32, 64])) {
            let q = QuantFormat::from_bits(bits).unwrap();
            prop_assert_eq!(q.quantize(q.quantize(x)), q.quantize(x));
            let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
            prop_assert!(q.quantize(lo) <= q.quantize(hi));
        }

        #[test]
        fn generic_single_matches_hardware_cast(mant in 0u64..(1 << 52), exp in -160i32..130, neg in any::<bool>()) {
            let x = f64::from_bits(mant | 0x3ff0_0000_0000_0000) * 2f64.powi(exp);
            let x = if neg { -x } else { x };
            prop_assert_eq!(round_minifloat(x, 8, 23), x as f32 as f64);
        }

        #[test]
        fn generic_half_monotone_small(x in -1e-3f64..1e-3, y in -1e-3f64..1e-3) {
            let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
            prop_assert!(round_minifloat(lo, 5, 10) <= round_minifloat(hi, 5, 10));
        }
    }
}
