//! Static connectivity of the node grid. Everything downstream (parameter
//! build order, forward order, checkpoints) iterates the wiring in the order
//! produced here, so this order is part of the on-disk format.

use serde::{Deserialize, Serialize};

use super::{Attention, NetworkSpec, Variant};
use crate::error::Result;

/// How a source feature is brought to the consuming node's extent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    /// Same level; used as-is.
    Direct,
    /// From one level shallower; 2x max-pooled.
    Pooled,
    /// From one level deeper; 2x bilinearly upsampled.
    Upsampled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputRef {
    pub src: (usize, usize),
    pub transform: Transform,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeWiring {
    pub i: usize,
    pub j: usize,
    /// Fusion inputs in contract order: same-level columns ascending, then
    /// pooled, then upsampled. Empty for node (0,0), which reads the image.
    pub inputs: Vec<InputRef>,
    /// Channel count entering the node's conv block (after concatenation,
    /// or after projection for summed fusion).
    pub in_channels: usize,
    pub out_channels: usize,
    /// Encoder nodes max-pool their block output before publishing it.
    pub pool_after: bool,
    /// Channel/spatial attention applies to this node's block output.
    pub attended: bool,
    /// Inputs are projected to `out_channels` and summed instead of
    /// concatenated.
    pub summed: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Wiring {
    /// Nodes in computation order; every input refers to an earlier entry.
    pub nodes: Vec<NodeWiring>,
    /// Terminal node per level, index = level. The head upsamples terminal
    /// `t` of level i by 2^i.
    pub terminals: Vec<(usize, usize)>,
}

impl Wiring {
    pub fn node(&self, i: usize, j: usize) -> Option<&NodeWiring> {
        self.nodes.iter().find(|n| n.i == i && n.j == j)
    }

    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        self.nodes.iter().position(|n| n.i == i && n.j == j)
    }
}

/// Derive the full grid for a validated spec.
pub fn wiring(spec: &NetworkSpec) -> Result<Wiring> {
    spec.validate()?;
    let depth = spec.depth;
    let ch = &spec.channels;
    let attended = |j: usize| {
        j > 0
            && matches!(
                spec.attention,
                Attention::Full | Attention::NoChannel | Attention::NoSpatial
            )
    };
    let summed = |j: usize| j > 0 && spec.attention == Attention::SumFusion;

    let mut nodes = Vec::new();

    let encoder = |i: usize| NodeWiring {
        i,
        j: 0,
        inputs: if i == 0 {
            Vec::new()
        } else {
            vec![InputRef { src: (i - 1, 0), transform: Transform::Direct }]
        },
        in_channels: if i == 0 { 1 } else { ch[i - 1] },
        out_channels: ch[i],
        pool_after: i > 0,
        attended: false,
        summed: false,
    };

    match spec.variant {
        Variant::PlainSkip => {
            for i in 0..=depth {
                nodes.push(encoder(i));
            }
            // One decoder per level above the bottom, deepest first.
            for i in (0..depth).rev() {
                let below_j = if i + 1 == depth { 0 } else { 1 };
                let inputs = vec![
                    InputRef { src: (i, 0), transform: Transform::Direct },
                    InputRef { src: (i + 1, below_j), transform: Transform::Upsampled },
                ];
                let raw = ch[i] + ch[i + 1];
                nodes.push(NodeWiring {
                    i,
                    j: 1,
                    inputs,
                    in_channels: if summed(1) { ch[i] } else { raw },
                    out_channels: ch[i],
                    pool_after: false,
                    attended: attended(1),
                    summed: summed(1),
                });
            }
        }
        Variant::Full | Variant::LeftToRight | Variant::TopToBottom => {
            // Anti-diagonal stages: within stage d = i + j, deeper nodes
            // first so (i+1, j-1) is ready before (i, j).
            for d in 0..=depth {
                for i in (0..=d).rev() {
                    let j = d - i;
                    if j == 0 {
                        nodes.push(encoder(i));
                        continue;
                    }
                    let mut inputs = Vec::new();
                    match spec.variant {
                        Variant::Full | Variant::LeftToRight => {
                            for k in 0..j {
                                inputs.push(InputRef {
                                    src: (i, k),
                                    transform: Transform::Direct,
                                });
                            }
                        }
                        Variant::TopToBottom => {
                            inputs.push(InputRef {
                                src: (i, j - 1),
                                transform: Transform::Direct,
                            });
                        }
                        Variant::PlainSkip => unreachable!(),
                    }
                    if spec.variant != Variant::LeftToRight && i > 0 {
                        inputs.push(InputRef { src: (i - 1, j), transform: Transform::Pooled });
                    }
                    inputs.push(InputRef {
                        src: (i + 1, j - 1),
                        transform: Transform::Upsampled,
                    });
                    let raw: usize = inputs.iter().map(|r| ch[r.src.0]).sum();
                    nodes.push(NodeWiring {
                        i,
                        j,
                        inputs,
                        in_channels: if summed(j) { ch[i] } else { raw },
                        out_channels: ch[i],
                        pool_after: false,
                        attended: attended(j),
                        summed: summed(j),
                    });
                }
            }
        }
    }

    let terminals: Vec<(usize, usize)> = match spec.variant {
        Variant::PlainSkip => (0..=depth)
            .map(|i| if i == depth { (i, 0) } else { (i, 1) })
            .collect(),
        _ => (0..=depth).map(|i| (i, depth - i)).collect(),
    };

    Ok(Wiring { nodes, terminals })
}
