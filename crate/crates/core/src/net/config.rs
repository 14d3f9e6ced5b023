use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::N_STIMULI;

/// How the test state is presented to the network.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateEncoding {
    /// Paired seen / not-seen count volumes through the convolutional
    /// feature extractor.
    #[default]
    Counts3d,
    /// The single rows×cols prediction map fed straight into the trunk.
    Predictions2d,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Channels after the lifting convolution.
    pub channels: usize,
    /// Groups of the 3×3 spatial kernel.
    pub spatial_groups: usize,
    /// Groups of the 1×1 stimulus kernel.
    pub pointwise_groups: usize,
    pub encoding: StateEncoding,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { channels: 64, spatial_groups: 8, pointwise_groups: 4, encoding: StateEncoding::Counts3d }
    }
}

impl FeatureConfig {
    pub fn spatial_group_width(&self) -> usize {
        self.channels / self.spatial_groups
    }

    pub fn pointwise_group_width(&self) -> usize {
        self.channels / self.pointwise_groups
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub features: FeatureConfig,
    /// Widths of the fully-connected trunk layers.
    pub trunk: Vec<usize>,
    pub dropout: f64,
    pub layer_norm_eps: f64,
    pub rows: usize,
    pub cols: usize,
    pub locations: usize,
    pub stimuli: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            features: FeatureConfig::default(),
            trunk: vec![512, 256],
            dropout: 0.1,
            layer_norm_eps: 1e-5,
            rows: 8,
            cols: 9,
            locations: 54,
            stimuli: N_STIMULI,
        }
    }
}

impl NetConfig {
    /// Small network used for gradient checks and quick tests.
    pub fn reduced() -> Self {
        Self {
            features: FeatureConfig { channels: 8, spatial_groups: 4, pointwise_groups: 2, ..Default::default() },
            trunk: vec![16, 16],
            ..Self::default()
        }
    }

    pub fn with_encoding(mut self, encoding: StateEncoding) -> Self {
        self.features.encoding = encoding;
        self
    }

    pub fn pixels(&self) -> usize {
        self.rows * self.cols
    }

    /// Length of the flattened feature vector entering the trunk.
    pub fn feature_len(&self) -> usize {
        match self.features.encoding {
            StateEncoding::Counts3d => 2 * self.features.channels * self.pixels(),
            StateEncoding::Predictions2d => self.pixels(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let f = &self.features;
        let bad = |m: String| Err(Error::Config(m));
        if f.channels == 0 || f.spatial_groups == 0 || f.pointwise_groups == 0 {
            return bad("feature channels and groups must be positive".into());
        }
        if f.channels % f.spatial_groups != 0 || f.channels % f.pointwise_groups != 0 {
            return bad(format!(
                "channels {} not divisible by groups {} / {}",
                f.channels, f.spatial_groups, f.pointwise_groups
            ));
        }
        if self.trunk.is_empty() || self.trunk.contains(&0) {
            return bad("trunk needs at least one non-empty layer".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.locations == 0 || self.stimuli == 0 || self.locations > self.pixels() {
            return bad("inconsistent output dimensions".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_feature_length() {
        let c = NetConfig::default();
        c.validate().unwrap();
        assert_eq!(c.feature_len(), 9216);
        assert_eq!(c.features.spatial_group_width() * c.features.spatial_groups, 64);
        assert_eq!(c.features.pointwise_group_width() * c.features.pointwise_groups, 64);
        assert_eq!(c.clone().with_encoding(StateEncoding::Predictions2d).feature_len(), 72);
    }

    #[test]
    fn rejects_indivisible_groups() {
        let mut c = NetConfig::default();
        c.features.spatial_groups = 7;
        assert!(c.validate().is_err());
        NetConfig::reduced().validate().unwrap();
    }
}
