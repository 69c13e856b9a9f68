//! Parameter construction. Names, shapes, and initial values follow the
//! wiring order exactly; the checkpoint format serializes parameters in
//! this same order.

use rand::Rng;

use super::wiring::{wiring, Wiring};
use super::NetworkSpec;
use crate::error::Result;
use crate::params::ParamSet;
use crate::rng::substream;
use crate::tensor::TensorBase;

type Tensor = TensorBase<f64>;

/// Uniform bound sqrt(6 / (fan_in + fan_out)).
pub fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

fn conv_weight(rng: &mut impl Rng, out_c: usize, in_c: usize, k: usize) -> Tensor {
    let bound = xavier_bound(in_c * k * k, out_c * k * k);
    let n = out_c * in_c * k * k;
    let data: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 * bound - bound).collect();
    Tensor::new(&[out_c, in_c, k, k], data).expect("sized above")
}

fn linear_weight(rng: &mut impl Rng, out_c: usize, in_c: usize) -> Tensor {
    let bound = xavier_bound(in_c, out_c);
    let data: Vec<f64> = (0..out_c * in_c)
        .map(|_| rng.gen::<f64>() * 2.0 * bound - bound)
        .collect();
    Tensor::new(&[out_c, in_c], data).expect("sized above")
}

/// Names of the parameters a single grid node owns, in serialization order.
pub fn node_param_names(node: &super::wiring::NodeWiring, spec: &NetworkSpec) -> Vec<String> {
    let p = format!("node{}_{}", node.i, node.j);
    let mut names = Vec::new();
    if node.summed {
        for k in 0..node.inputs.len() {
            names.push(format!("{p}.proj{k}.weight"));
            names.push(format!("{p}.proj{k}.bias"));
        }
    }
    names.push(format!("{p}.conv1.weight"));
    names.push(format!("{p}.conv1.bias"));
    names.push(format!("{p}.conv2.weight"));
    names.push(format!("{p}.conv2.bias"));
    if node.attended {
        if spec.attention.channel_enabled() {
            names.push(format!("{p}.att.mlp1.weight"));
            names.push(format!("{p}.att.mlp2.weight"));
        }
        if spec.attention.spatial_enabled() {
            names.push(format!("{p}.att.spatial.weight"));
            names.push(format!("{p}.att.spatial.bias"));
        }
    }
    names
}

/// Build and initialize every parameter of the network described by `spec`.
/// Weights are Xavier-uniform from a single counter-keyed stream consumed in
/// declaration order; biases start at zero.
pub fn build_params(spec: &NetworkSpec) -> Result<(Wiring, ParamSet)> {
    let wiring = wiring(spec)?;
    let mut params = ParamSet::new();
    let mut rng = substream(spec.seed, "xavier", 0, 0);

    for node in &wiring.nodes {
        let p = format!("node{}_{}", node.i, node.j);
        if node.summed {
            for (k, input) in node.inputs.iter().enumerate() {
                let src_c = spec.channels[input.src.0];
                params.insert(
                    format!("{p}.proj{k}.weight"),
                    conv_weight(&mut rng, node.out_channels, src_c, 1),
                )?;
                params.insert(
                    format!("{p}.proj{k}.bias"),
                    Tensor::zeros(&[node.out_channels]),
                )?;
            }
        }
        params.insert(
            format!("{p}.conv1.weight"),
            conv_weight(&mut rng, node.out_channels, node.in_channels, 3),
        )?;
        params.insert(format!("{p}.conv1.bias"), Tensor::zeros(&[node.out_channels]))?;
        params.insert(
            format!("{p}.conv2.weight"),
            conv_weight(&mut rng, node.out_channels, node.out_channels, 3),
        )?;
        params.insert(format!("{p}.conv2.bias"), Tensor::zeros(&[node.out_channels]))?;
        if node.attended {
            let c = node.out_channels;
            if spec.attention.channel_enabled() {
                let hidden = c / spec.mlp_reduction;
                params.insert(format!("{p}.att.mlp1.weight"), linear_weight(&mut rng, hidden, c))?;
                params.insert(format!("{p}.att.mlp2.weight"), linear_weight(&mut rng, c, hidden))?;
            }
            if spec.attention.spatial_enabled() {
                params.insert(format!("{p}.att.spatial.weight"), conv_weight(&mut rng, 1, 2, 7))?;
                params.insert(format!("{p}.att.spatial.bias"), Tensor::zeros(&[1]))?;
            }
        }
    }

    let head_in: usize = spec.head_levels.iter().map(|&l| spec.channels[l]).sum();
    params.insert("head.conv.weight", conv_weight(&mut rng, 1, head_in, 1))?;
    params.insert("head.conv.bias", Tensor::zeros(&[1]))?;

    Ok((wiring, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{Attention, Variant};

    fn tiny_spec() -> NetworkSpec {
        NetworkSpec {
            depth: 2,
            channels: vec![4, 8, 16],
            mlp_reduction: 4,
            variant: Variant::Full,
            attention: Attention::Full,
            head_levels: vec![0, 1, 2],
            seed: 7,
        }
    }

    #[test]
    fn same_seed_same_values() {
        let (_, a) = build_params(&tiny_spec()).unwrap();
        let (_, b) = build_params(&tiny_spec()).unwrap();
        assert_eq!(a.len(), b.len());
        for (pa, pb) in a.iter().zip(b.iter()) {
            assert_eq!(pa.name, pb.name);
            assert_eq!(pa.value.data(), pb.value.data());
        }
    }

    #[test]
    fn different_seed_different_values() {
        let mut other = tiny_spec();
        other.seed = 8;
        let (_, a) = build_params(&tiny_spec()).unwrap();
        let (_, b) = build_params(&other).unwrap();
        let wa = a.get("node0_0.conv1.weight").unwrap();
        let wb = b.get("node0_0.conv1.weight").unwrap();
        assert_ne!(wa.value.data(), wb.value.data());
    }

    #[test]
    fn weights_respect_xavier_bound() {
        let (_, params) = build_params(&tiny_spec()).unwrap();
        let w = params.get("node0_0.conv1.weight").unwrap();
        let bound = xavier_bound(1 * 9, 4 * 9);
        assert!(w.value.data().iter().all(|v| v.abs() <= bound));
        assert!(w.value.data().iter().any(|v| v.abs() > bound * 0.5));
    }

    #[test]
    fn biases_start_at_zero() {
        let (_, params) = build_params(&tiny_spec()).unwrap();
        for p in params.iter() {
            if p.name.ends_with(".bias") {
                assert!(p.value.data().iter().all(|&v| v == 0.0), "{}", p.name);
            }
        }
    }

    #[test]
    fn attention_ablations_drop_their_parameters() {
        let mut s = tiny_spec();
        s.attention = Attention::NoSpatial;
        let (_, p) = build_params(&s).unwrap();
        assert!(p.get("node0_1.att.mlp1.weight").is_some());
        assert!(p.get("node0_1.att.spatial.weight").is_none());

        s.attention = Attention::None;
        let (_, p) = build_params(&s).unwrap();
        assert!(p.iter().all(|q| !q.name.contains(".att.")));

        s.attention = Attention::SumFusion;
        let (_, p) = build_params(&s).unwrap();
        assert!(p.iter().all(|q| !q.name.contains(".att.")));
        assert!(p.get("node0_1.proj0.weight").is_some());
    }

    #[test]
    fn head_width_tracks_selected_levels() {
        let mut s = tiny_spec();
        s.head_levels = vec![0, 2];
        let (_, p) = build_params(&s).unwrap();
        let w = p.get("head.conv.weight").unwrap();
        assert_eq!(w.value.shape(), &[1, 4 + 16, 1, 1]);
    }
}
