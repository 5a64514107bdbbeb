//! Synthetic load/generation time series and their split into episodes.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::EnvError;
use crate::grid::{GridSpec, Injections};
use crate::rng::{indexed_stream, Stream};

/// Steps per day at five-minute resolution.
pub const STEPS_PER_DAY: usize = 288;
/// Full chronic length.
pub const CHRONIC_LENGTH: usize = 2016;
/// Sub-episode length (three days).
pub const WINDOW_LENGTH: usize = 864;
pub const WINDOWS_PER_CHRONIC: usize = 5;

/// Time series of load demand and generation setpoints for one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Chronic {
    pub id: String,
    /// `load_mw[t][load]`
    pub load_mw: Vec<Vec<f64>>,
    /// `gen_mw[t][generator]`
    pub gen_mw: Vec<Vec<f64>>,
    pub step_minutes: u32,
}

impl Chronic {
    pub fn len(&self) -> usize {
        self.load_mw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.load_mw.is_empty()
    }

    pub fn injections(&self, t: usize) -> Injections {
        Injections { load_mw: self.load_mw[t].clone(), gen_mw: self.gen_mw[t].clone() }
    }

    /// Checks that demands are nonnegative and generation covers demand up to
    /// `max_loss_fraction`.
    pub fn validate(&self, max_loss_fraction: f64) -> Result<(), EnvError> {
        if self.gen_mw.len() != self.load_mw.len() {
            return Err(EnvError::Chronic(format!("{}: load and generation lengths differ", self.id)));
        }
        for (t, (loads, gens)) in self.load_mw.iter().zip(&self.gen_mw).enumerate() {
            if loads.iter().any(|&d| !(d >= 0.0) || !d.is_finite()) {
                return Err(EnvError::Chronic(format!("{}: negative or non-finite demand at step {t}", self.id)));
            }
            let demand: f64 = loads.iter().sum();
            let gen: f64 = gens.iter().sum();
            if gen < demand * (1.0 - max_loss_fraction) - 1e-9 {
                return Err(EnvError::Chronic(format!("{}: generation short of demand at step {t}", self.id)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    Validation,
}

/// A sub-episode: a window of one chronic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Window {
    pub chronic: usize,
    pub offset: usize,
}

/// Chronics with their split assignment and sub-episode offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSet {
    pub chronics: Vec<Chronic>,
    pub splits: Vec<Split>,
    pub offsets: Vec<Vec<usize>>,
    pub window: usize,
}

impl EpisodeSet {
    pub fn windows(&self, split: Split) -> Vec<Window> {
        self.splits
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == split)
            .flat_map(|(c, _)| self.offsets[c].iter().map(move |&offset| Window { chronic: c, offset }))
            .collect()
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.splits.len() != self.chronics.len() || self.offsets.len() != self.chronics.len() {
            return Err(EnvError::Chronic("episode set vectors differ in length".into()));
        }
        for (c, offs) in self.offsets.iter().enumerate() {
            for &o in offs {
                if o + self.window > self.chronics[c].len() {
                    return Err(EnvError::Chronic(format!(
                        "window at {o} overruns chronic {} of length {}",
                        self.chronics[c].id,
                        self.chronics[c].len()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Evenly spaced, overlapping window starts covering `[0, length]`.
pub fn window_offsets(length: usize, window: usize, count: usize) -> Vec<usize> {
    if count <= 1 || length <= window {
        return vec![0; count.min(1)];
    }
    let span = length - window;
    (0..count).map(|k| k * span / (count - 1)).collect()
}

/// Shape of the synthetic chronics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChronicProfile {
    /// Mean demand per load.
    pub base_load_mw: Vec<f64>,
    /// Relative amplitude of the daily sinusoid.
    pub daily_amplitude: f64,
    /// Standard deviation of the relative AR(1) noise innovation.
    pub noise_scale: f64,
    /// AR(1) coefficient of the noise.
    pub noise_ar: f64,
    /// Probability per step that a demand spike starts on a random load.
    pub spike_rate: f64,
    /// Peak relative size of a spike.
    pub spike_magnitude: f64,
    /// Spike length in steps.
    pub spike_duration: usize,
    /// Mean share of total demand dispatched to each generator.
    pub gen_share: Vec<f64>,
    /// Amplitude of the daily swing of the first generator's share.
    pub gen_share_swing: f64,
    /// Relative spread of the per-chronic demand level.
    pub level_spread: f64,
}

impl Default for ChronicProfile {
    fn default() -> Self {
        ChronicProfile {
            base_load_mw: vec![30.0, 30.0, 25.0],
            daily_amplitude: 0.25,
            noise_scale: 0.01,
            noise_ar: 0.95,
            spike_rate: 1.0 / 400.0,
            spike_magnitude: 0.5,
            spike_duration: 36,
            gen_share: vec![0.5, 0.5],
            gen_share_swing: 0.2,
            level_spread: 0.05,
        }
    }
}

impl ChronicProfile {
    /// No noise, spikes or level spread: every load is an exact sinusoid.
    pub fn calm(&self) -> Self {
        ChronicProfile { noise_scale: 0.0, spike_rate: 0.0, level_spread: 0.0, ..self.clone() }
    }

    /// Four times the spike rate of `self`.
    pub fn stressed(&self) -> Self {
        ChronicProfile { spike_rate: (self.spike_rate * 4.0).min(1.0), ..self.clone() }
    }

    pub fn validate(&self, spec: &GridSpec) -> Result<(), EnvError> {
        let bad = |what: &str| Err(EnvError::Profile(what.to_string()));
        if self.base_load_mw.len() != spec.loads.len() {
            return bad("base_load_mw length must equal the number of loads");
        }
        if self.gen_share.len() != spec.generators.len() {
            return bad("gen_share length must equal the number of generators");
        }
        if self.base_load_mw.iter().any(|&x| !(x >= 0.0)) {
            return bad("base loads must be nonnegative");
        }
        for (name, v) in [
            ("daily_amplitude", self.daily_amplitude),
            ("noise_scale", self.noise_scale),
            ("spike_rate", self.spike_rate),
            ("spike_magnitude", self.spike_magnitude),
            ("gen_share_swing", self.gen_share_swing),
            ("level_spread", self.level_spread),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(EnvError::Profile(format!("{name} must be nonnegative")));
            }
        }
        if self.daily_amplitude >= 1.0 {
            return bad("daily_amplitude must be below 1");
        }
        if !(0.0..1.0).contains(&self.noise_ar) {
            return bad("noise_ar must be in [0, 1)");
        }
        if self.spike_rate > 1.0 {
            return bad("spike_rate is a probability");
        }
        let share: f64 = self.gen_share.iter().sum();
        if (share - 1.0).abs() > 1e-9 || self.gen_share.iter().any(|&s| s < 0.0) {
            return bad("gen_share must be a distribution");
        }
        if self.gen_share.len() >= 2 && self.gen_share_swing > self.gen_share[0].min(self.gen_share[1]) {
            return bad("gen_share_swing exceeds the generator shares");
        }
        Ok(())
    }
}

/// Generates `count` chronics of `length` steps, split train/test/validation
/// as `count - 2` / 1 / 1, with five windows of [`WINDOW_LENGTH`] each.
pub fn generate_chronics(
    spec: &GridSpec,
    seed: u64,
    count: usize,
    length: usize,
    profile: &ChronicProfile,
) -> Result<EpisodeSet, EnvError> {
    profile.validate(spec)?;
    if count < 3 {
        return Err(EnvError::Profile("need at least 3 chronics for a train/test/validation split".into()));
    }
    let window = WINDOW_LENGTH.min(length);
    let chronics: Vec<Chronic> = (0..count).map(|c| generate_one(seed, c, length, profile)).collect();
    let splits = (0..count)
        .map(|c| match c {
            c if c + 2 == count => Split::Test,
            c if c + 1 == count => Split::Validation,
            _ => Split::Train,
        })
        .collect();
    let offsets = vec![window_offsets(length, window, WINDOWS_PER_CHRONIC); count];
    let set = EpisodeSet { chronics, splits, offsets, window };
    set.validate()?;
    Ok(set)
}

fn generate_one(seed: u64, index: usize, length: usize, p: &ChronicProfile) -> Chronic {
    let mut rng = indexed_stream(seed, Stream::Chronics, index as u64);
    let n_loads = p.base_load_mw.len();
    let level = 1.0 + p.level_spread * rng.gen_range(-1.0..=1.0);
    let phases: Vec<f64> = (0..n_loads).map(|_| rng.gen_range(-0.3..=0.3)).collect();
    let mut noise = vec![0.0; n_loads];
    let mut spike = vec![0.0; n_loads];
    let mut spike_left = vec![0usize; n_loads];

    let mut load_mw = Vec::with_capacity(length);
    let mut gen_mw = Vec::with_capacity(length);
    for t in 0..length {
        let day = std::f64::consts::TAU * t as f64 / STEPS_PER_DAY as f64;
        if p.spike_rate > 0.0 && rng.gen::<f64>() < p.spike_rate {
            let which = rng.gen_range(0..n_loads);
            spike_left[which] = p.spike_duration;
        }
        let mut loads = Vec::with_capacity(n_loads);
        for i in 0..n_loads {
            if p.noise_scale > 0.0 {
                let z: f64 = StandardNormal.sample(&mut rng);
                noise[i] = p.noise_ar * noise[i] + p.noise_scale * z;
            }
            spike[i] = if spike_left[i] > 0 {
                let done = p.spike_duration - spike_left[i];
                spike_left[i] -= 1;
                p.spike_magnitude * (std::f64::consts::PI * (done as f64 + 0.5) / p.spike_duration as f64).sin()
            } else {
                0.0
            };
            let shape = 1.0 + p.daily_amplitude * (day - std::f64::consts::FRAC_PI_2 + phases[i]).sin();
            let d = p.base_load_mw[i] * level * (shape + noise[i] + spike[i]);
            loads.push(d.max(0.0));
        }
        let total: f64 = loads.iter().sum();
        let mut shares = p.gen_share.clone();
        if shares.len() >= 2 {
            let swing = p.gen_share_swing * day.sin();
            shares[0] += swing;
            shares[1] -= swing;
        }
        gen_mw.push(shares.iter().map(|s| s * total).collect());
        load_mw.push(loads);
    }
    Chronic { id: format!("chronic_{index:02}"), load_mw, gen_mw, step_minutes: 5 }
}
