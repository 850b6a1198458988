//! Dense and attention layers with hand-derived backward passes.
//! Activations are row-major batches: one row per sample (or per token).

use ndarray::{s, Array1, Array2, Axis, Zip};
use rand::Rng;
use rand_distr::{Distribution, Uniform};

#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    /// `out x in`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Linear {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            w: Array2::zeros((output, input)),
            b: Array1::zeros(output),
        }
    }

    /// Uniform weights with variance `gain^2 / input`, zero bias.
    pub fn init<R: Rng + ?Sized>(input: usize, output: usize, gain: f64, rng: &mut R) -> Self {
        let k = gain * (3.0 / input as f64).sqrt();
        let dist = Uniform::new_inclusive(-k, k).expect("finite bounds");
        Self {
            w: Array2::from_shape_simple_fn((output, input), || dist.sample(rng)),
            b: Array1::zeros(output),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.w.t()) + &self.b
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward(&self, x: &Array2<f64>, g: &Array2<f64>, grad: &mut Linear) -> Array2<f64> {
        grad.w += &g.t().dot(x);
        grad.b += &g.sum_axis(Axis(0));
        g.dot(&self.w)
    }
}

pub fn relu(z: &Array2<f64>) -> Array2<f64> {
    z.mapv(|v| v.max(0.0))
}

/// `g * 1[z > 0]`.
pub fn relu_backward(z: &Array2<f64>, g: &Array2<f64>) -> Array2<f64> {
    let mut out = g.clone();
    Zip::from(&mut out).and(z).for_each(|o, &zz| {
        if zz <= 0.0 {
            *o = 0.0;
        }
    });
    out
}

/// Inputs and pre-activations of every layer of an MLP pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    relu_last: bool,
}

/// Runs `layers` in order with ReLU after each, except the last when `relu_last` is false.
pub fn mlp_forward(layers: &[Linear], x: &Array2<f64>, relu_last: bool) -> (Array2<f64>, MlpCache) {
    let mut inputs = Vec::with_capacity(layers.len());
    let mut pre = Vec::with_capacity(layers.len());
    let mut h = x.clone();
    for (i, l) in layers.iter().enumerate() {
        let z = l.forward(&h);
        inputs.push(h);
        h = if i + 1 < layers.len() || relu_last {
            relu(&z)
        } else {
            z.clone()
        };
        pre.push(z);
    }
    (h, MlpCache { inputs, pre, relu_last })
}

pub fn mlp_backward(layers: &[Linear], cache: &MlpCache, g: &Array2<f64>, grads: &mut [Linear]) -> Array2<f64> {
    let mut g = g.clone();
    for i in (0..layers.len()).rev() {
        if i + 1 < layers.len() || cache.relu_last {
            g = relu_backward(&cache.pre[i], &g);
        }
        g = layers[i].backward(&cache.inputs[i], &g, &mut grads[i]);
    }
    g
}

/// Multi-head scaled dot-product self-attention over `tokens` rows per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Attention {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
    pub heads: usize,
}

#[derive(Debug, Clone)]
pub struct AttentionCache {
    x: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    concat: Array2<f64>,
    /// Attention weights, one `tokens x tokens` block per (sample, head).
    weights: Vec<Array2<f64>>,
    tokens: usize,
}

impl Attention {
    pub fn zeros(input: usize, heads: usize, head_dim: usize, output: usize) -> Self {
        let model = heads * head_dim;
        Self {
            q: Linear::zeros(input, model),
            k: Linear::zeros(input, model),
            v: Linear::zeros(input, model),
            o: Linear::zeros(model, output),
            heads,
        }
    }

    pub fn init<R: Rng + ?Sized>(input: usize, heads: usize, head_dim: usize, output: usize, rng: &mut R) -> Self {
        let model = heads * head_dim;
        Self {
            q: Linear::init(input, model, 1.0, rng),
            k: Linear::init(input, model, 1.0, rng),
            v: Linear::init(input, model, 1.0, rng),
            o: Linear::init(model, output, 1.0, rng),
            heads,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.q.output_dim() / self.heads
    }

    /// `x` has `batch * tokens` rows, sample-major.
    pub fn forward(&self, x: &Array2<f64>, tokens: usize) -> (Array2<f64>, AttentionCache) {
        let rows = x.nrows();
        assert!(
            tokens > 0 && rows.is_multiple_of(tokens),
            "rows must be a multiple of tokens"
        );
        let q = self.q.forward(x);
        let k = self.k.forward(x);
        let v = self.v.forward(x);
        let dh = self.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();
        let mut concat = Array2::zeros((rows, self.heads * dh));
        let mut weights = Vec::with_capacity(rows / tokens * self.heads);
        for b in 0..rows / tokens {
            let r = b * tokens..(b + 1) * tokens;
            for h in 0..self.heads {
                let c = h * dh..(h + 1) * dh;
                let qh = q.slice(s![r.clone(), c.clone()]);
                let kh = k.slice(s![r.clone(), c.clone()]);
                let vh = v.slice(s![r.clone(), c.clone()]);
                let mut a = qh.dot(&kh.t()) * scale;
                for mut row in a.rows_mut() {
                    let m = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                    row.mapv_inplace(|v| (v - m).exp());
                    let sum = row.sum();
                    row /= sum;
                }
                concat.slice_mut(s![r.clone(), c]).assign(&a.dot(&vh));
                weights.push(a);
            }
        }
        let y = self.o.forward(&concat);
        (
            y,
            AttentionCache {
                x: x.clone(),
                q,
                k,
                v,
                concat,
                weights,
                tokens,
            },
        )
    }

    pub fn backward(&self, cache: &AttentionCache, g: &Array2<f64>, grad: &mut Attention) -> Array2<f64> {
        let tokens = cache.tokens;
        let rows = cache.x.nrows();
        let dh = self.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();
        let g_concat = self.o.backward(&cache.concat, g, &mut grad.o);
        let mut gq = Array2::zeros(cache.q.raw_dim());
        let mut gk = Array2::zeros(cache.k.raw_dim());
        let mut gv = Array2::zeros(cache.v.raw_dim());
        for b in 0..rows / tokens {
            let r = b * tokens..(b + 1) * tokens;
            for h in 0..self.heads {
                let c = h * dh..(h + 1) * dh;
                let a = &cache.weights[b * self.heads + h];
                let go = g_concat.slice(s![r.clone(), c.clone()]);
                let qh = cache.q.slice(s![r.clone(), c.clone()]);
                let kh = cache.k.slice(s![r.clone(), c.clone()]);
                let vh = cache.v.slice(s![r.clone(), c.clone()]);
                gv.slice_mut(s![r.clone(), c.clone()]).assign(&a.t().dot(&go));
                let ga = go.dot(&vh.t());
                // Softmax Jacobian row by row: gS = A * (gA - sum(gA * A)).
                let dot = (&ga * a).sum_axis(Axis(1)).insert_axis(Axis(1));
                let gs = a * &(&ga - &dot) * scale;
                gq.slice_mut(s![r.clone(), c.clone()]).assign(&gs.dot(&kh));
                gk.slice_mut(s![r.clone(), c]).assign(&gs.t().dot(&qh));
            }
        }
        let mut gx = self.q.backward(&cache.x, &gq, &mut grad.q);
        gx += &self.k.backward(&cache.x, &gk, &mut grad.k);
        gx += &self.v.backward(&cache.x, &gv, &mut grad.v);
        gx
    }
}
