//! Pulsed XX–X cascade event generator.
//!
//! Each excited pulse emits a biexciton photon after `Exp(tau_xx)` and the
//! exciton photon a further `Exp(tau_x)` later. The polarization state of the
//! pair is the FSS-evolved Bell state at the XX→X delay. Detected photons are
//! written to timestamp streams in integer picoseconds.

mod expected;
mod io;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::JonesVector;
use crate::quantum::{HBAR_UEV_PS, C64};

pub use expected::{expected_g2_zero, solve_background_for_g2, solve_recapture_for_g2};
pub use io::{export_stream, import_stream, ImportReport, StreamFormat};

/// Channel of the XX arm in projection runs and of arm `a` in
/// autocorrelation runs.
pub const CHANNEL_A: u8 = 0;
/// Channel of the X arm in projection runs and of arm `b` in autocorrelation
/// runs.
pub const CHANNEL_B: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmitterConfig {
    /// Fine-structure splitting, µeV.
    pub fss: f64,
    /// Biexciton lifetime, ps.
    pub tau_xx: f64,
    /// Exciton lifetime, ps.
    pub tau_x: f64,
    /// Laser repetition rate, MHz.
    pub rep_rate: f64,
    pub recapture_probability: f64,
    /// Recapture time constant, ps.
    pub recapture_time: f64,
    pub setup_efficiency: f64,
    pub detector_efficiency: f64,
    /// Uncorrelated counts per second on each channel.
    pub background_rate: f64,
    /// Probability that a pulse creates a biexciton.
    pub excitation_fraction: f64,
    /// Standard deviation of Gaussian detector jitter, ps.
    pub jitter_sigma: f64,
}

impl Default for EmitterConfig {
    fn default() -> Self {
        EmitterConfig {
            fss: 4.65,
            tau_xx: 1100.0,
            tau_x: 1610.0,
            rep_rate: 80.0,
            recapture_probability: 0.0,
            recapture_time: 546.0,
            setup_efficiency: 0.008,
            detector_efficiency: 0.5,
            background_rate: 0.0,
            excitation_fraction: 1.0,
            jitter_sigma: 0.0,
        }
    }
}

impl EmitterConfig {
    /// Default parameters with unit collection and detection efficiency.
    pub fn lossless() -> Self {
        EmitterConfig {
            setup_efficiency: 1.0,
            detector_efficiency: 1.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tau_xx", self.tau_xx),
            ("tau_x", self.tau_x),
            ("rep_rate", self.rep_rate),
            ("recapture_time", self.recapture_time),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.fss.is_finite() {
            return Err(Error::validation("fss must be finite"));
        }
        if !(0.0..=1.0).contains(&self.recapture_probability) {
            return Err(Error::validation(format!(
                "recapture_probability must lie in [0, 1], got {}",
                self.recapture_probability
            )));
        }
        let unit = [
            ("setup_efficiency", self.setup_efficiency),
            ("detector_efficiency", self.detector_efficiency),
            ("excitation_fraction", self.excitation_fraction),
        ];
        for (name, v) in unit {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::validation(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        if !(self.background_rate.is_finite() && self.background_rate >= 0.0) {
            return Err(Error::validation(format!(
                "background_rate must be nonnegative, got {}",
                self.background_rate
            )));
        }
        if !(self.jitter_sigma.is_finite() && self.jitter_sigma >= 0.0) {
            return Err(Error::validation(format!(
                "jitter_sigma must be nonnegative, got {}",
                self.jitter_sigma
            )));
        }
        Ok(())
    }

    /// Pulse period in ps.
    pub fn rep_period(&self) -> f64 {
        1e6 / self.rep_rate
    }

    /// Survival probability of one emitted photon.
    pub fn efficiency(&self) -> f64 {
        self.setup_efficiency * self.detector_efficiency
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: EmitterConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Simulation truth attached to an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventOrigin {
    Xx,
    X,
    Background,
}

impl EventOrigin {
    pub(crate) fn code(self) -> u8 {
        match self {
            EventOrigin::Xx => 1,
            EventOrigin::X => 2,
            EventOrigin::Background => 3,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Option<Self>> {
        match code {
            0 => Some(None),
            1 => Some(Some(EventOrigin::Xx)),
            2 => Some(Some(EventOrigin::X)),
            3 => Some(Some(EventOrigin::Background)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhotonEvent {
    pub channel: u8,
    /// ps since the start of the run.
    pub timestamp: u64,
    /// `None` once truth tags have been stripped.
    pub origin: Option<EventOrigin>,
}

/// Time-ordered detector events; every timestamp is below `duration`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimestampStream {
    pub events: Vec<PhotonEvent>,
    /// ps
    pub duration: u64,
    pub config_snapshot: Option<EmitterConfig>,
}

impl TimestampStream {
    /// Sorts by `(timestamp, channel)` and checks the duration bound.
    pub fn new(mut events: Vec<PhotonEvent>, duration: u64, config: Option<EmitterConfig>) -> Result<Self> {
        events.sort_by_key(|e| (e.timestamp, e.channel));
        if let Some(last) = events.last() {
            if last.timestamp >= duration {
                return Err(Error::validation(format!(
                    "timestamp {} is not below the stream duration {duration}",
                    last.timestamp
                )));
            }
        }
        Ok(TimestampStream {
            events,
            duration,
            config_snapshot: config,
        })
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Sorted timestamps of one channel.
    pub fn timestamps(&self, channel: u8) -> Vec<u64> {
        self.events
            .iter()
            .filter(|e| e.channel == channel)
            .map(|e| e.timestamp)
            .collect()
    }

    /// All timestamps regardless of channel.
    pub fn all_timestamps(&self) -> Vec<u64> {
        self.events.iter().map(|e| e.timestamp).collect()
    }

    pub fn count_origin(&self, origin: EventOrigin) -> usize {
        self.events.iter().filter(|e| e.origin == Some(origin)).count()
    }

    pub fn strip_truth(&mut self) {
        for e in &mut self.events {
            e.origin = None;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Species {
    X,
    Xx,
}

/// Born probability that the pair emitted with XX→X delay `delay_ps` passes
/// the projections `(a, b)` on the XX and X arm.
pub fn ideal_pair_probability(config: &EmitterConfig, pair: (JonesVector, JonesVector), delay_ps: f64) -> Result<f64> {
    if !(delay_ps >= 0.0) {
        return Err(Error::validation(format!("delay must be nonnegative, got {delay_ps}")));
    }
    Ok(joint_probabilities(config.fss, &pair.0, &pair.1, delay_ps)[0])
}

/// Probabilities of `(a,b), (a,b⊥), (a⊥,b), (a⊥,b⊥)` for the evolved state.
fn joint_probabilities(fss: f64, a: &JonesVector, b: &JonesVector, delay_ps: f64) -> [f64; 4] {
    let phase = C64::from_polar(1.0, fss * delay_ps / HBAR_UEV_PS);
    let amp = |p: &JonesVector, q: &JonesVector| {
        (p.h().conj() * q.h().conj() + phase * p.v().conj() * q.v().conj()).norm_sqr() * 0.5
    };
    let (ao, bo) = (a.orthogonal(), b.orthogonal());
    [amp(a, b), amp(a, &bo), amp(&ao, b), amp(&ao, &bo)]
}

/// Shared machinery for both run types: timing, losses, jitter, background.
struct Generator<'a> {
    cfg: &'a EmitterConfig,
    rng: ChaCha8Rng,
    exp_xx: Exp<f64>,
    exp_x: Exp<f64>,
    exp_recapture: Exp<f64>,
    jitter: Option<Normal<f64>>,
    period: f64,
    duration: u64,
    events: Vec<PhotonEvent>,
}

impl<'a> Generator<'a> {
    fn new(cfg: &'a EmitterConfig, n_pulses: u64, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let rate = |tau: f64| Exp::new(1.0 / tau).map_err(|e| Error::validation(e.to_string()));
        let recapture_rate = 1.0 / cfg.tau_xx + 1.0 / cfg.recapture_time;
        let jitter = if cfg.jitter_sigma > 0.0 {
            Some(Normal::new(0.0, cfg.jitter_sigma).map_err(|e| Error::validation(e.to_string()))?)
        } else {
            None
        };
        let period = cfg.rep_period();
        Ok(Generator {
            cfg,
            rng: ChaCha8Rng::seed_from_u64(seed),
            exp_xx: rate(cfg.tau_xx)?,
            exp_x: rate(cfg.tau_x)?,
            exp_recapture: Exp::new(recapture_rate).map_err(|e| Error::validation(e.to_string()))?,
            jitter,
            period,
            duration: (n_pulses as f64 * period).ceil() as u64,
            events: Vec::new(),
        })
    }

    fn excited(&mut self) -> bool {
        self.rng.random::<f64>() < self.cfg.excitation_fraction
    }

    fn survives(&mut self) -> bool {
        self.rng.random::<f64>() < self.cfg.efficiency()
    }

    /// Records a photon that reached a detector, after jitter and rounding.
    fn detect(&mut self, channel: u8, t: f64, origin: EventOrigin) {
        let t = match self.jitter {
            Some(n) => t + n.sample(&mut self.rng),
            None => t,
        };
        let ts = t.max(0.0).round() as u64;
        if ts < self.duration {
            self.events.push(PhotonEvent {
                channel,
                timestamp: ts,
                origin: Some(origin),
            });
        }
    }

    fn add_background(&mut self, channels: &[u8]) -> Result<()> {
        let mean = self.cfg.background_rate * self.duration as f64 * 1e-12;
        if mean <= 0.0 || self.duration == 0 {
            return Ok(());
        }
        let poisson = Poisson::new(mean).map_err(|e| Error::validation(e.to_string()))?;
        for &ch in channels {
            let n = poisson.sample(&mut self.rng) as u64;
            for _ in 0..n {
                let ts = self.rng.random_range(0..self.duration);
                self.events.push(PhotonEvent {
                    channel: ch,
                    timestamp: ts,
                    origin: Some(EventOrigin::Background),
                });
            }
        }
        Ok(())
    }

    fn finish(self, channel: u8) -> Result<TimestampStream> {
        let events = self.events.iter().copied().filter(|e| e.channel == channel).collect();
        TimestampStream::new(events, self.duration, Some(*self.cfg))
    }

    fn finish_pair(self) -> Result<(TimestampStream, TimestampStream)> {
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for e in &self.events {
            if e.channel == CHANNEL_A {
                a.push(*e);
            } else {
                b.push(*e);
            }
        }
        let cfg = Some(*self.cfg);
        Ok((
            TimestampStream::new(a, self.duration, cfg)?,
            TimestampStream::new(b, self.duration, cfg)?,
        ))
    }
}

/// One cascade per excited pulse, analysed by the projections `pair` on the
/// XX arm (channel 0) and the X arm (channel 1).
///
/// Only photons passing their arm's projector are detected. Recapture is not
/// modelled here, so each pulse yields at most one signal photon per arm.
/// `n_pulses = 0` gives empty streams.
pub fn simulate_projection_run(
    config: &EmitterConfig,
    pair: (JonesVector, JonesVector),
    n_pulses: u64,
    seed: u64,
) -> Result<(TimestampStream, TimestampStream)> {
    let mut g = Generator::new(config, n_pulses, seed)?;
    let (a, b) = pair;
    for k in 0..n_pulses {
        if !g.excited() {
            continue;
        }
        let t_xx = k as f64 * g.period + g.exp_xx.sample(&mut g.rng);
        let delay = g.exp_x.sample(&mut g.rng);
        let p = joint_probabilities(config.fss, &a, &b, delay);
        let u: f64 = g.rng.random();
        let (xx_pass, x_pass) = if u < p[0] {
            (true, true)
        } else if u < p[0] + p[1] {
            (true, false)
        } else if u < p[0] + p[1] + p[2] {
            (false, true)
        } else {
            (false, false)
        };
        if xx_pass && g.survives() {
            g.detect(CHANNEL_A, t_xx, EventOrigin::Xx);
        }
        if x_pass && g.survives() {
            g.detect(CHANNEL_B, t_xx + delay, EventOrigin::X);
        }
    }
    g.add_background(&[CHANNEL_A, CHANNEL_B])?;
    g.finish_pair()
}

/// Photons of one species sent through a 50:50 splitter onto channels 0 and
/// 1.
///
/// With probability `recapture_probability` the dot recaptures carriers after
/// the first XX photon and emits a second one; the second XX→XX delay is
/// `Exp(tau_xx) + Exp(1/(1/tau_xx + 1/recapture_time))`, whose density is
/// proportional to `exp(−t/tau_xx)·(1 − exp(−t/recapture_time))`. The
/// interrupted cascade emits no X photon; the X photon follows the last XX
/// photon.
pub fn simulate_autocorrelation_run(
    config: &EmitterConfig,
    species: Species,
    n_pulses: u64,
    seed: u64,
) -> Result<(TimestampStream, TimestampStream)> {
    let mut g = Generator::new(config, n_pulses, seed)?;
    for k in 0..n_pulses {
        if !g.excited() {
            continue;
        }
        let t1 = k as f64 * g.period + g.exp_xx.sample(&mut g.rng);
        let recaptured = g.rng.random::<f64>() < config.recapture_probability;
        let t2 = recaptured.then(|| t1 + g.exp_xx.sample(&mut g.rng) + g.exp_recapture.sample(&mut g.rng));
        let t_x = t2.unwrap_or(t1) + g.exp_x.sample(&mut g.rng);
        let photons: &[(f64, EventOrigin)] = match (species, t2) {
            (Species::X, _) => &[(t_x, EventOrigin::X)],
            (Species::Xx, None) => &[(t1, EventOrigin::Xx)],
            (Species::Xx, Some(t2)) => &[(t1, EventOrigin::Xx), (t2, EventOrigin::Xx)],
        };
        for &(t, origin) in photons {
            let channel = if g.rng.random::<bool>() { CHANNEL_A } else { CHANNEL_B };
            if g.survives() {
                g.detect(channel, t, origin);
            }
        }
    }
    g.add_background(&[CHANNEL_A, CHANNEL_B])?;
    g.finish_pair()
}

/// Unsplit emission of one species on channel 0, as used for lifetime
/// measurements against the laser clock. Pulse `k` starts at `k·rep_period`.
pub fn simulate_lifetime_run(config: &EmitterConfig, species: Species, n_pulses: u64, seed: u64) -> Result<TimestampStream> {
    let mut g = Generator::new(config, n_pulses, seed)?;
    for k in 0..n_pulses {
        if !g.excited() {
            continue;
        }
        let t_xx = k as f64 * g.period + g.exp_xx.sample(&mut g.rng);
        let t = match species {
            Species::Xx => t_xx,
            Species::X => t_xx + g.exp_x.sample(&mut g.rng),
        };
        let origin = match species {
            Species::Xx => EventOrigin::Xx,
            Species::X => EventOrigin::X,
        };
        if g.survives() {
            g.detect(CHANNEL_A, t, origin);
        }
    }
    g.add_background(&[CHANNEL_A])?;
    g.finish(CHANNEL_A)
}

/// Independent seed for sub-run `index` of a run seeded with `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_add(1));
    rng.random()
}
