//! The segmentation network: a grid of convolutional nodes arranged as
//! densely nested U-shapes, per-node channel/spatial attention on fusion
//! nodes, and a multi-scale head that fuses one terminal node per depth
//! level into a full-resolution probability map.
//!
//! Grid geometry: node (i, j) lives at depth level i (spatial extent H/2^i,
//! width `channels[i]`) and column j, with j ranging 0..=I-i. Column 0 is the
//! encoder chain; every later column fuses same-level predecessors, a
//! max-pooled feature from the level above, and an upsampled feature from
//! the level below. Ablation variants prune those directions.

mod build;
mod checkpoint;
mod forward;
mod wiring;

pub use build::{build_params, xavier_bound};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC};
pub use forward::{forward, run_inference, soft_iou_loss, ForwardOptions, ForwardPass, SOFT_IOU_EPS};
pub use wiring::{wiring, InputRef, NodeWiring, Transform, Wiring};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Skip-connection topology.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Dense same-level links plus pooled and upsampled cross-level links.
    Full,
    /// Plain U shape: encoder chain plus one decoder node per level.
    PlainSkip,
    /// Dense same-level and upsampled links only.
    LeftToRight,
    /// Immediate predecessor plus pooled and upsampled links; no long-range
    /// dense connections.
    TopToBottom,
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Variant::Full),
            // no_dnim kept as a config alias for the plain-U ablation
            "plain_skip" | "no_dnim" => Ok(Variant::PlainSkip),
            "left_to_right" => Ok(Variant::LeftToRight),
            "top_to_bottom" => Ok(Variant::TopToBottom),
            other => Err(Error::Config(format!("unknown variant {other:?}"))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Variant::Full => "full",
            Variant::PlainSkip => "plain_skip",
            Variant::LeftToRight => "left_to_right",
            Variant::TopToBottom => "top_to_bottom",
        };
        f.write_str(s)
    }
}

/// Attention configuration for fusion nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attention {
    /// Channel attention then spatial attention.
    Full,
    NoChannel,
    NoSpatial,
    None,
    /// Replace concatenation fusion with projected element-wise summation;
    /// no attention parameters at all.
    SumFusion,
}

impl Attention {
    pub fn channel_enabled(self) -> bool {
        matches!(self, Attention::Full | Attention::NoSpatial)
    }

    pub fn spatial_enabled(self) -> bool {
        matches!(self, Attention::Full | Attention::NoChannel)
    }
}

impl FromStr for Attention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Attention::Full),
            "no_channel" => Ok(Attention::NoChannel),
            "no_spatial" => Ok(Attention::NoSpatial),
            "none" => Ok(Attention::None),
            "sum_fusion" => Ok(Attention::SumFusion),
            other => Err(Error::Config(format!("unknown attention mode {other:?}"))),
        }
    }
}

impl fmt::Display for Attention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Attention::Full => "full",
            Attention::NoChannel => "no_channel",
            Attention::NoSpatial => "no_spatial",
            Attention::None => "none",
            Attention::SumFusion => "sum_fusion",
        };
        f.write_str(s)
    }
}

/// Complete architectural description. Parameter names, shapes, and initial
/// values are a pure function of this struct.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// Number of down-sampling steps I; levels run 0..=I.
    pub depth: usize,
    /// Channel width per level, length I+1.
    pub channels: Vec<usize>,
    /// Reduction ratio of the shared attention perceptron.
    pub mlp_reduction: usize,
    pub variant: Variant,
    pub attention: Attention,
    /// Levels whose terminal nodes the fusion head consumes; sorted, unique.
    pub head_levels: Vec<usize>,
    /// Initialization seed.
    pub seed: u64,
}

impl NetworkSpec {
    /// Paper-scale default: depth 4, widths 16..256, every level in the head.
    pub fn default_full() -> Self {
        NetworkSpec {
            depth: 4,
            channels: vec![16, 32, 64, 128, 256],
            mlp_reduction: 4,
            variant: Variant::Full,
            attention: Attention::Full,
            head_levels: vec![0, 1, 2, 3, 4],
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::Config("network depth must be at least 1".into()));
        }
        if self.channels.len() != self.depth + 1 {
            return Err(Error::Config(format!(
                "channels length {} does not match depth {} (+1)",
                self.channels.len(),
                self.depth
            )));
        }
        if self.channels.iter().any(|&c| c == 0) {
            return Err(Error::Config("channel widths must be positive".into()));
        }
        if self.mlp_reduction == 0 {
            return Err(Error::Config("mlp reduction must be positive".into()));
        }
        if self.attention.channel_enabled() {
            for (i, &c) in self.channels.iter().enumerate().take(self.depth) {
                if c % self.mlp_reduction != 0 {
                    return Err(Error::Config(format!(
                        "channels[{i}] = {c} not divisible by mlp reduction {}",
                        self.mlp_reduction
                    )));
                }
            }
        }
        if self.head_levels.is_empty() {
            return Err(Error::Config("head must consume at least one level".into()));
        }
        for pair in self.head_levels.windows(2) {
            if pair[0] >= pair[1] {
                return Err(Error::Config("head levels must be sorted and unique".into()));
            }
        }
        if *self.head_levels.last().expect("non-empty") > self.depth {
            return Err(Error::Config(format!(
                "head level {} exceeds depth {}",
                self.head_levels.last().expect("non-empty"),
                self.depth
            )));
        }
        Ok(())
    }

    /// Smallest input extent the grid accepts (divisibility by 2^depth).
    pub fn extent_divisor(&self) -> usize {
        1 << self.depth
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_spec_validates() {
        NetworkSpec::default_full().validate().unwrap();
    }

    #[test]
    fn channel_length_mismatch_is_config_error() {
        let mut s = NetworkSpec::default_full();
        s.channels.pop();
        assert!(matches!(s.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn reduction_must_divide_attended_widths() {
        let mut s = NetworkSpec::default_full();
        s.channels = vec![6, 32, 64, 128, 256];
        s.mlp_reduction = 4;
        assert!(s.validate().is_err());
        s.attention = Attention::None;
        assert!(s.validate().is_ok());
    }

    #[test]
    fn variant_aliases_parse() {
        assert_eq!("no_dnim".parse::<Variant>().unwrap(), Variant::PlainSkip);
        assert_eq!("plain_skip".parse::<Variant>().unwrap(), Variant::PlainSkip);
        assert!("nope".parse::<Variant>().is_err());
    }
}
