//! ZEST: Bayesian threshold estimation at a single location.
//!
//! The estimator keeps a discrete pdf over candidate thresholds 0..=40 dB,
//! multiplies it by the likelihood of each response, and stops once the
//! pdf's standard deviation drops below `sigma_stop` (or a presentation cap
//! fires). The pdf is carried in log space so long response streaks cannot
//! underflow it.
//!
//! Likelihood orientation: a *seen* response at `x` is evidence that the
//! threshold is at or above `x`, so seen multiplies by `Φ((t - x) / σ)`.
//! This matches the patient model in [`crate::patient`]. The transposed
//! reading (seen → `1 - Φ((t - x) / σ)`) is available as
//! [`LikelihoodOrientation::Transposed`] for auditing; under the FOS model it
//! drives estimates away from the truth.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{GridSpec, VisualField, N_STIMULI};
use crate::stats::{log_normal_cdf, normal_cdf, weighted_mean_std};

pub type Pdf = [f64; N_STIMULI];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LikelihoodOrientation {
    #[default]
    Consistent,
    Transposed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ZestConfig {
    /// Stop once the pdf standard deviation falls below this, dB.
    pub sigma_stop: f64,
    /// Spread of the response likelihood, dB.
    pub sigma_lik: f64,
    pub max_presentations: u32,
    pub orientation: LikelihoodOrientation,
}

impl Default for ZestConfig {
    fn default() -> Self {
        Self {
            sigma_stop: 2.0,
            sigma_lik: 0.5,
            max_presentations: 50,
            orientation: LikelihoodOrientation::Consistent,
        }
    }
}

impl ZestConfig {
    pub fn with_sigma_stop(sigma_stop: f64) -> Self {
        Self { sigma_stop, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_stop > 0.0 && self.sigma_lik > 0.0 && self.max_presentations >= 1) {
            return Err(Error::Config(format!("invalid ZEST config {self:?}")));
        }
        Ok(())
    }
}

fn candidate(i: usize) -> f64 {
    i as f64
}

/// Response likelihood over the candidate thresholds 0..=40.
pub fn likelihood(seen: bool, presented: f64, sigma_lik: f64, orientation: LikelihoodOrientation) -> Pdf {
    let mut out = [0.0; N_STIMULI];
    let flip = seen == (orientation == LikelihoodOrientation::Consistent);
    for (i, l) in out.iter_mut().enumerate() {
        let z = (candidate(i) - presented) / sigma_lik;
        *l = if flip { normal_cdf(z) } else { normal_cdf(-z) };
    }
    out
}

fn log_likelihood(seen: bool, presented: f64, sigma_lik: f64, orientation: LikelihoodOrientation) -> Pdf {
    let mut out = [0.0; N_STIMULI];
    let flip = seen == (orientation == LikelihoodOrientation::Consistent);
    for (i, l) in out.iter_mut().enumerate() {
        let z = (candidate(i) - presented) / sigma_lik;
        *l = log_normal_cdf(if flip { z } else { -z });
    }
    out
}

fn argmax(pdf: &Pdf) -> u8 {
    let mut best = 0;
    for i in 1..pdf.len() {
        if pdf[i] > pdf[best] {
            best = i;
        }
    }
    best as u8
}

/// Per-location starting pdfs.
#[derive(Debug, Clone, PartialEq)]
pub struct ZestPrior {
    pdfs: Vec<Pdf>,
}

impl ZestPrior {
    /// Add-one smoothed histogram of the thresholds in `fields`.
    pub fn from_fields(fields: &[VisualField], grid: &GridSpec) -> Result<Self> {
        let mut counts = vec![[1.0f64; N_STIMULI]; grid.len()];
        for f in fields {
            if f.len() != grid.len() {
                return Err(Error::Shape("field does not match grid".into()));
            }
            for (l, &v) in f.values().iter().enumerate() {
                counts[l][v as usize] += 1.0;
            }
        }
        for c in &mut counts {
            let s: f64 = c.iter().sum();
            c.iter_mut().for_each(|x| *x /= s);
        }
        Ok(Self { pdfs: counts })
    }

    pub fn uniform(locations: usize) -> Self {
        Self { pdfs: vec![[1.0 / N_STIMULI as f64; N_STIMULI]; locations] }
    }

    pub fn from_pdfs(pdfs: Vec<Vec<f64>>) -> Result<Self> {
        let mut out = Vec::with_capacity(pdfs.len());
        for (l, p) in pdfs.into_iter().enumerate() {
            let arr: Pdf = p.try_into().map_err(|p: Vec<f64>| {
                Error::Shape(format!("prior row {l} has {} entries, expected {N_STIMULI}", p.len()))
            })?;
            if arr.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return Err(Error::Domain(format!("prior row {l} has a non-positive entry")));
            }
            let s: f64 = arr.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::Domain(format!("prior row {l} sums to {s}")));
            }
            out.push(arr);
        }
        if out.is_empty() {
            return Err(Error::Shape("empty prior".into()));
        }
        Ok(Self { pdfs: out })
    }

    pub fn len(&self) -> usize {
        self.pdfs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pdfs.is_empty()
    }

    pub fn pdf(&self, location: usize) -> Result<&Pdf> {
        self.pdfs.get(location).ok_or(Error::InvalidLocation(location))
    }

    pub fn pdfs(&self) -> &[Pdf] {
        &self.pdfs
    }

    /// Most likely threshold at `location` before any response.
    pub fn mode(&self, location: usize) -> Result<u8> {
        Ok(argmax(self.pdf(location)?))
    }

    /// One row per location, 41 comma-separated probabilities.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        for p in &self.pdfs {
            let row: Vec<String> = p.iter().map(f64::to_string).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv(reader: impl Read) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .enumerate()
                .map(|(j, s)| {
                    s.trim().parse::<f64>().map_err(|e| Error::Parse {
                        row: i + 1,
                        col: j + 1,
                        msg: e.to_string(),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Self::from_pdfs(rows)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Running ZEST state for one location.
#[derive(Debug, Clone, PartialEq)]
pub struct ZestEstimator {
    prior_log: Pdf,
    /// Log-likelihood of every response so far, one row per response.
    terms: Vec<Pdf>,
    pdf: Pdf,
    presentations: u32,
    estimate: u8,
}

impl ZestEstimator {
    pub fn new(prior: &Pdf) -> Result<Self> {
        if prior.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
            return Err(Error::Domain("prior pdf has a negative or non-finite entry".into()));
        }
        let mut prior_log = [0.0; N_STIMULI];
        for (l, &p) in prior_log.iter_mut().zip(prior) {
            *l = p.ln();
        }
        let mut est = Self { prior_log, terms: Vec::new(), pdf: [0.0; N_STIMULI], presentations: 0, estimate: 0 };
        est.recompute()?;
        Ok(est)
    }

    /// Rebuilds the posterior from the prior and all responses. Each
    /// candidate's terms are summed in sorted order, so the result does not
    /// depend on response order and mathematically tied candidates stay
    /// bit-identical (the lowest-index tie rule then applies as intended).
    fn recompute(&mut self) -> Result<()> {
        let mut log_post = self.prior_log;
        let mut column = Vec::with_capacity(self.terms.len());
        for (i, lp) in log_post.iter_mut().enumerate() {
            column.clear();
            column.extend(self.terms.iter().map(|t| t[i]));
            column.sort_unstable_by(f64::total_cmp);
            *lp += column.iter().sum::<f64>();
        }
        let m = log_post.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !m.is_finite() {
            return Err(Error::Numerical("ZEST pdf collapsed to zero".into()));
        }
        let mut sum = 0.0;
        for (p, &l) in self.pdf.iter_mut().zip(&log_post) {
            *p = (l - m).exp();
            sum += *p;
        }
        for p in self.pdf.iter_mut() {
            *p /= sum;
        }
        self.estimate = argmax(&self.pdf);
        Ok(())
    }

    /// Folds one response into the pdf. Returns whether testing at this
    /// location should stop.
    pub fn update(&mut self, seen: bool, presented: u8, cfg: &ZestConfig) -> Result<bool> {
        self.terms.push(log_likelihood(seen, presented as f64, cfg.sigma_lik, cfg.orientation));
        self.recompute()?;
        self.presentations += 1;
        Ok(self.std() < cfg.sigma_stop || self.presentations >= cfg.max_presentations)
    }

    pub fn pdf(&self) -> &Pdf {
        &self.pdf
    }

    pub fn mean(&self) -> f64 {
        weighted_mean_std(&self.pdf, (0..N_STIMULI).map(candidate)).0
    }

    pub fn std(&self) -> f64 {
        weighted_mean_std(&self.pdf, (0..N_STIMULI).map(candidate)).1
    }

    /// Current threshold estimate, the pdf mode (lowest on ties).
    pub fn estimate(&self) -> u8 {
        self.estimate
    }

    pub fn presentations(&self) -> u32 {
        self.presentations
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZestOutcome {
    pub presentations: u32,
    pub estimate: u8,
}

/// Runs ZEST to completion at one location, presenting `initial` first and
/// the current pdf mode thereafter. `on_response` sees every presentation.
pub fn run_zest(
    initial: u8,
    prior: &Pdf,
    cfg: &ZestConfig,
    mut respond: impl FnMut(u8) -> Result<bool>,
    mut on_response: impl FnMut(u8, bool),
) -> Result<ZestOutcome> {
    cfg.validate()?;
    if initial as usize >= N_STIMULI {
        return Err(Error::InvalidStimulus(initial as i32));
    }
    let mut est = ZestEstimator::new(prior)?;
    let mut stimulus = initial;
    loop {
        let seen = respond(stimulus)?;
        on_response(stimulus, seen);
        if est.update(seen, stimulus, cfg)? {
            break;
        }
        stimulus = est.estimate();
    }
    Ok(ZestOutcome { presentations: est.presentations(), estimate: est.estimate() })
}
