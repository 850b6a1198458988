//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use swarmfuse::agent::{AgentParams, Linear};
use swarmfuse::slam::{LikelihoodField, ScanPoints};
use swarmfuse::world::WorldModel;
use swarmfuse::Pose;

pub fn gt_field(world: &WorldModel) -> LikelihoodField {
    LikelihoodField::from_occupancy(world.layout, &world.occupied, 0.1)
}

/// Exhaustive search on a regular pose lattice around `center`.
pub fn grid_search(
    points: &ScanPoints,
    field: &LikelihoodField,
    center: &Pose,
    half_xy: f64,
    step_xy: f64,
    half_theta: f64,
    step_theta: f64,
) -> (Pose, f64) {
    let nxy = (half_xy / step_xy).round() as i64;
    let nth = (half_theta / step_theta).round() as i64;
    let mut best = (*center, f64::NEG_INFINITY);
    for i in -nxy..=nxy {
        for j in -nxy..=nxy {
            for k in -nth..=nth {
                let p = Pose::new(
                    center.x + i as f64 * step_xy,
                    center.y + j as f64 * step_xy,
                    center.theta + k as f64 * step_theta,
                );
                let s = points.score(field, &p);
                if s > best.1 {
                    best = (p, s);
                }
            }
        }
    }
    best
}

fn dense(layer: &Linear, x: &[f64], relu: bool) -> Vec<f64> {
    let (rows, cols) = layer.w.dim();
    assert_eq!(cols, x.len());
    let mut out = vec![0.0; rows];
    for (o, out_o) in out.iter_mut().enumerate() {
        let mut acc = layer.b[o];
        for (i, xi) in x.iter().enumerate() {
            acc += layer.w[[o, i]] * xi;
        }
        *out_o = if relu { acc.max(0.0) } else { acc };
    }
    out
}

fn chain(layers: &[Linear], x: &[f64], relu_last: bool) -> Vec<f64> {
    let mut h = x.to_vec();
    for (i, l) in layers.iter().enumerate() {
        h = dense(l, &h, relu_last || i + 1 < layers.len());
    }
    h
}

/// Multi-head self-attention over a sequence of token vectors.
fn attention(params: &AgentParams, tokens: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let att = &params.attention;
    let q: Vec<Vec<f64>> = tokens.iter().map(|t| dense(&att.q, t, false)).collect();
    let k: Vec<Vec<f64>> = tokens.iter().map(|t| dense(&att.k, t, false)).collect();
    let v: Vec<Vec<f64>> = tokens.iter().map(|t| dense(&att.v, t, false)).collect();
    let model = q[0].len();
    let dh = model / att.heads;
    let mut out = Vec::new();
    for qi in &q {
        let mut concat = vec![0.0; model];
        for h in 0..att.heads {
            let r = h * dh..(h + 1) * dh;
            let logits: Vec<f64> = k
                .iter()
                .map(|kj| {
                    qi[r.clone()]
                        .iter()
                        .zip(&kj[r.clone()])
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
                        / (dh as f64).sqrt()
                })
                .collect();
            let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
            let z: f64 = e.iter().sum();
            for (j, vj) in v.iter().enumerate() {
                for d in r.clone() {
                    concat[d] += e[j] / z * vj[d];
                }
            }
        }
        out.push(dense(&att.o, &concat, false));
    }
    out
}

/// Pre-squash policy mean and critic value, recomputed layer by layer.
pub fn reference_forward(params: &AgentParams, state: &[f64]) -> (f64, f64) {
    let b = chain(&params.backbone, state, true);
    let n = chain(&params.neck, &b, true);
    let a = attention(params, &[n]).remove(0);
    let m = chain(&params.policy, &a, false)[0];
    let critic_in = match &params.critic_backbone {
        Some(cb) => chain(cb, state, true),
        None => b,
    };
    let v = chain(&params.critic, &critic_in, false)[0];
    (m, v)
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}
