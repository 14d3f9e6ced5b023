use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{GridSpec, VisualField, MAX_DB};
use crate::error::{Error, Result};
use crate::rng::{rng_from, Stream};

/// Parameters of the synthetic field generator: a radially declining hill
/// of vision with per-location jitter, optionally carrying scotomas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    /// Sensitivity at fixation, dB.
    pub center_db: f64,
    /// Decline per grid step of distance from fixation, dB.
    pub falloff_per_step: f64,
    pub jitter_sd: f64,
    pub p_defect: f64,
    /// A defective field carries between 1 and this many scotomas.
    pub max_scotomas: usize,
    pub cluster_min: usize,
    pub cluster_max: usize,
    pub depth_min: f64,
    pub depth_max: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            center_db: 32.0,
            falloff_per_step: 0.5,
            jitter_sd: 1.5,
            p_defect: 0.6,
            max_scotomas: 3,
            cluster_min: 1,
            cluster_max: 8,
            depth_min: 5.0,
            depth_max: 30.0,
        }
    }
}

impl SyntheticConfig {
    fn validate(&self) -> Result<()> {
        let ok = self.center_db.is_finite()
            && self.falloff_per_step >= 0.0
            && self.jitter_sd >= 0.0
            && (0.0..=1.0).contains(&self.p_defect)
            && self.max_scotomas >= 1
            && self.cluster_min >= 1
            && self.cluster_min <= self.cluster_max
            && self.depth_min >= 0.0
            && self.depth_min <= self.depth_max;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid synthetic field config {self:?}")))
        }
    }
}

/// Noise-free hill of vision on `grid`. Fixation sits between the four
/// central cells of the 8×9 layout.
pub(crate) fn baseline(grid: &GridSpec, cfg: &SyntheticConfig) -> Vec<f64> {
    let cr = (grid.rows() as f64 - 1.0) / 2.0;
    let cc = grid.cols() as f64 / 2.0;
    grid.cells()
        .iter()
        .map(|c| {
            let d = ((c.row as f64 - cr).powi(2) + (c.col as f64 - cc).powi(2)).sqrt();
            cfg.center_db - cfg.falloff_per_step * d
        })
        .collect()
}

pub fn generate_synthetic_fields(
    n: usize,
    seed: u64,
    cfg: &SyntheticConfig,
    grid: &GridSpec,
) -> Result<Vec<VisualField>> {
    if n == 0 {
        return Err(Error::Config("must generate at least one field".into()));
    }
    cfg.validate()?;
    let base = baseline(grid, cfg);
    (0..n as u64)
        .map(|i| {
            let mut rng = rng_from(seed, Stream::Init, i);
            let mut values = base.clone();
            if cfg.jitter_sd > 0.0 {
                let jitter = Normal::new(0.0, cfg.jitter_sd).expect("finite sd");
                values.iter_mut().for_each(|v| *v += jitter.sample(&mut rng));
            }
            if cfg.p_defect > 0.0 && rng.gen_bool(cfg.p_defect) {
                let count = rng.gen_range(1..=cfg.max_scotomas);
                for _ in 0..count {
                    let depth = rng.gen_range(cfg.depth_min..=cfg.depth_max);
                    let size = rng.gen_range(cfg.cluster_min..=cfg.cluster_max);
                    for l in grow_cluster(grid, size, &mut rng) {
                        values[l] -= depth;
                    }
                }
            }
            let values = values.iter().map(|v| v.round().clamp(0.0, MAX_DB as f64) as u8).collect();
            VisualField::new(values, grid)
        })
        .collect()
}

/// Random contiguous (edge-connected) set of `size` locations.
fn grow_cluster(grid: &GridSpec, size: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut cluster = vec![rng.gen_range(0..grid.len())];
    while cluster.len() < size {
        let frontier: Vec<usize> = cluster
            .iter()
            .flat_map(|&l| grid.edge_neighbors(l))
            .filter(|l| !cluster.contains(l))
            .collect();
        if frontier.is_empty() {
            break;
        }
        let next = frontier[rng.gen_range(0..frontier.len())];
        cluster.push(next);
    }
    cluster
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_fields_are_identical() {
        let g = GridSpec::standard();
        let cfg = SyntheticConfig { p_defect: 0.0, jitter_sd: 0.0, ..Default::default() };
        let fields = generate_synthetic_fields(20, 5, &cfg, g).unwrap();
        assert!(fields.iter().all(|f| f == &fields[0]));
        let v = fields[0].values();
        assert!(v.iter().all(|&x| (29..=32).contains(&x)), "{v:?}");
    }

    #[test]
    fn seeded() {
        let g = GridSpec::standard();
        let cfg = SyntheticConfig::default();
        let a = generate_synthetic_fields(30, 11, &cfg, g).unwrap();
        assert_eq!(a, generate_synthetic_fields(30, 11, &cfg, g).unwrap());
        assert_ne!(a, generate_synthetic_fields(30, 12, &cfg, g).unwrap());
    }

    #[test]
    fn clusters_are_contiguous() {
        let g = GridSpec::standard();
        let mut rng = rng_from(1, Stream::Init, 0);
        for size in 1..=8 {
            let c = grow_cluster(g, size, &mut rng);
            assert_eq!(c.len(), size);
            for (i, &l) in c.iter().enumerate().skip(1) {
                assert!(g.edge_neighbors(l).iter().any(|n| c[..i].contains(n)));
            }
        }
    }

    // Bounds pinned from a measurement of the default generator over
    // 1000 fields.
    #[test]
    fn default_distribution() {
        let g = GridSpec::standard();
        let fields = generate_synthetic_fields(1000, 2024, &SyntheticConfig::default(), g).unwrap();
        for l in 0..g.len() {
            let mean = fields.iter().map(|f| f.values()[l] as f64).sum::<f64>() / 1000.0;
            assert!((20.0..=34.0).contains(&mean), "location {l} mean {mean}");
        }
        let damaged = fields.iter().filter(|f| f.values().iter().any(|&v| v < 15)).count();
        assert!(damaged >= 100, "only {damaged} damaged fields");
    }

    #[test]
    fn rejects_bad_config() {
        let g = GridSpec::standard();
        assert!(generate_synthetic_fields(0, 1, &SyntheticConfig::default(), g).is_err());
        let cfg = SyntheticConfig { p_defect: 1.5, ..Default::default() };
        assert!(generate_synthetic_fields(1, 1, &cfg, g).is_err());
    }
}
