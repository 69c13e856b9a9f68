//! Forward pass: translates the wiring into tape operations. One call
//! builds one single-image graph; training runs one tape per sample.

use std::collections::HashMap;

use super::wiring::{Transform, Wiring};
use super::NetworkSpec;
use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::params::ParamSet;
use crate::raster::ImageBase;
use crate::tensor::TensorBase;
use crate::Graph;

pub const SOFT_IOU_EPS: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Default)]
pub struct ForwardOptions {
    /// Diagnostic switch: skip attention multiplications so the structural
    /// path can be tested in isolation. Attention parameters stay unused.
    pub force_attention_identity: bool,
}

/// Handles into the built graph.
pub struct ForwardPass {
    /// Final probability map node, shape (1, H, W), values strictly in (0,1).
    pub prob: NodeId,
    /// Published output of every grid node, in wiring order.
    pub nodes: Vec<((usize, usize), NodeId)>,
}

struct Binder<'a> {
    params: &'a ParamSet,
    bound: HashMap<String, NodeId>,
}

impl<'a> Binder<'a> {
    fn get(&mut self, g: &mut Graph, name: &str) -> Result<NodeId> {
        if let Some(&id) = self.bound.get(name) {
            return Ok(id);
        }
        let p = self
            .params
            .get(name)
            .ok_or_else(|| Error::Config(format!("missing parameter {name}")))?;
        let id = g.param(name, &p.value)?;
        self.bound.insert(name.into(), id);
        Ok(id)
    }
}

fn conv_block(
    g: &mut Graph,
    b: &mut Binder,
    prefix: &str,
    x: NodeId,
    in_c: usize,
    out_c: usize,
) -> Result<NodeId> {
    let w1 = b.get(g, &format!("{prefix}.conv1.weight"))?;
    let b1 = b.get(g, &format!("{prefix}.conv1.bias"))?;
    let h = g.conv2d(x, w1, b1, 1, 1)?;
    let h = g.relu(h);
    let w2 = b.get(g, &format!("{prefix}.conv2.weight"))?;
    let b2 = b.get(g, &format!("{prefix}.conv2.bias"))?;
    let mut y = g.conv2d(h, w2, b2, 1, 1)?;
    if in_c == out_c {
        y = g.add(y, x)?;
    }
    Ok(g.relu(y))
}

fn attention(
    g: &mut Graph,
    b: &mut Binder,
    spec: &NetworkSpec,
    prefix: &str,
    x: NodeId,
) -> Result<NodeId> {
    let mut cur = x;
    if spec.attention.channel_enabled() {
        let w1 = b.get(g, &format!("{prefix}.att.mlp1.weight"))?;
        let w2 = b.get(g, &format!("{prefix}.att.mlp2.weight"))?;
        let mx = g.global_max(cur)?;
        let av = g.global_avg(cur)?;
        let from_max = g.mlp_shared(w1, w2, mx)?;
        let from_avg = g.mlp_shared(w1, w2, av)?;
        let sum = g.add(from_max, from_avg)?;
        let gate = g.sigmoid(sum);
        cur = g.mul_channel(gate, cur)?;
    }
    if spec.attention.spatial_enabled() {
        let w = b.get(g, &format!("{prefix}.att.spatial.weight"))?;
        let bias = b.get(g, &format!("{prefix}.att.spatial.bias"))?;
        let cmax = g.channel_max(cur)?;
        let cmean = g.channel_mean(cur)?;
        let stacked = g.concat_channels(&[cmax, cmean])?;
        let conv = g.conv2d(stacked, w, bias, 1, 3)?;
        let gate = g.sigmoid(conv);
        cur = g.mul_spatial(gate, cur)?;
    }
    Ok(cur)
}

/// Build the forward graph for one input image node of shape (1, H, W).
pub fn forward(
    g: &mut Graph,
    spec: &NetworkSpec,
    wiring: &Wiring,
    params: &ParamSet,
    input: NodeId,
    opts: ForwardOptions,
) -> Result<ForwardPass> {
    let (c_in, h0, w0) = g.value(input).dims3()?;
    if c_in != 1 {
        return Err(Error::Shape(format!("network input must have 1 channel, got {c_in}")));
    }
    let div = spec.extent_divisor();
    if h0 == 0 || w0 == 0 || h0 % div != 0 || w0 % div != 0 {
        return Err(Error::Shape(format!(
            "input extent {h0}x{w0} not divisible by {div}"
        )));
    }

    let mut binder = Binder { params, bound: HashMap::new() };
    let mut published: HashMap<(usize, usize), NodeId> = HashMap::new();
    let mut order = Vec::with_capacity(wiring.nodes.len());

    for node in &wiring.nodes {
        let prefix = format!("node{}_{}", node.i, node.j);
        let fused = if node.inputs.is_empty() {
            input
        } else {
            let mut branches = Vec::with_capacity(node.inputs.len());
            for input_ref in &node.inputs {
                let src = *published
                    .get(&input_ref.src)
                    .ok_or_else(|| Error::Shape(format!("node {:?} not yet computed", input_ref.src)))?;
                let moved = match input_ref.transform {
                    Transform::Direct => src,
                    Transform::Pooled => g.maxpool2(src)?,
                    Transform::Upsampled => g.upsample2(src)?,
                };
                branches.push(moved);
            }
            if node.summed {
                let mut acc = None;
                for (k, &branch) in branches.iter().enumerate() {
                    let w = binder.get(g, &format!("{prefix}.proj{k}.weight"))?;
                    let bias = binder.get(g, &format!("{prefix}.proj{k}.bias"))?;
                    let proj = g.conv2d(branch, w, bias, 1, 0)?;
                    acc = Some(match acc {
                        None => proj,
                        Some(a) => g.add(a, proj)?,
                    });
                }
                acc.expect("fusion nodes have at least one input")
            } else if branches.len() == 1 {
                branches[0]
            } else {
                g.concat_channels(&branches)?
            }
        };

        let mut out = conv_block(g, &mut binder, &prefix, fused, node.in_channels, node.out_channels)?;
        if node.attended && !opts.force_attention_identity {
            out = attention(g, &mut binder, spec, &prefix, out)?;
        }
        if node.pool_after {
            out = g.maxpool2(out)?;
        }

        let (c, h, w) = g.value(out).dims3()?;
        let want = (node.out_channels, h0 >> node.i, w0 >> node.i);
        if (c, h, w) != want {
            return Err(Error::Shape(format!(
                "node ({},{}) produced {c}x{h}x{w}, expected {}x{}x{}",
                node.i, node.j, want.0, want.1, want.2
            )));
        }
        published.insert((node.i, node.j), out);
        order.push(((node.i, node.j), out));
    }

    let mut heads = Vec::with_capacity(spec.head_levels.len());
    for &level in &spec.head_levels {
        let (ti, tj) = wiring.terminals[level];
        let mut id = published[&(ti, tj)];
        for _ in 0..level {
            id = g.upsample2(id)?;
        }
        heads.push(id);
    }
    let fused = if heads.len() == 1 {
        heads[0]
    } else {
        g.concat_channels(&heads)?
    };
    let w = binder.get(g, "head.conv.weight")?;
    let bias = binder.get(g, "head.conv.bias")?;
    let logits = g.conv2d(fused, w, bias, 1, 0)?;
    let prob = g.sigmoid(logits);

    let (pc, ph, pw) = g.value(prob).dims3()?;
    if (pc, ph, pw) != (1, h0, w0) {
        return Err(Error::Shape(format!(
            "head produced {pc}x{ph}x{pw}, expected 1x{h0}x{w0}"
        )));
    }

    Ok(ForwardPass { prob, nodes: order })
}

/// Soft intersection-over-union loss between a probability node and a
/// binary mask constant, as a scalar graph node.
pub fn soft_iou_loss(g: &mut Graph, prob: NodeId, mask: NodeId) -> Result<NodeId> {
    g.soft_iou(prob, mask, SOFT_IOU_EPS)
}

/// Convenience inference entry: one image in, one probability map out.
pub fn run_inference(
    spec: &NetworkSpec,
    wiring: &Wiring,
    params: &ParamSet,
    image: &ImageBase<f64>,
) -> Result<ImageBase<f64>> {
    let mut g = Graph::new();
    let input = g.constant(image.to_tensor());
    let pass = forward(&mut g, spec, wiring, params, input, ForwardOptions::default())?;
    let prob: &TensorBase<f64> = g.value(pass.prob);
    ImageBase::from_tensor(prob)
}
