//! Feature maps and the score function `f(x) = wᵀφ(x)`.
//!
//! `φ` is either the identity (a linear model) or a bias-free fully connected
//! network with leaky-ReLU activations. The penultimate activations are the
//! features `φ(x)`; the final layer is the linear weight vector `w`.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use crate::datasets::seeded_rng;
use crate::error::{Error, Result};

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureMapKind {
    Identity,
    Mlp,
}

impl FeatureMapKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            FeatureMapKind::Identity => "identity",
            FeatureMapKind::Mlp => "mlp",
        }
    }
}

impl std::str::FromStr for FeatureMapKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" | "linear" => Ok(Self::Identity),
            "mlp" => Ok(Self::Mlp),
            other => Err(Error::InvalidSpec(format!("unknown feature map {other:?}"))),
        }
    }
}

/// Architecture of `φ`: widths of the hidden layers, activation slope and
/// the initialization seed.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMapSpec {
    pub kind: FeatureMapKind,
    pub layer_widths: Vec<usize>,
    pub leaky_slope: f64,
    pub seed: u64,
}

impl FeatureMapSpec {
    pub fn identity() -> Self {
        Self {
            kind: FeatureMapKind::Identity,
            layer_widths: Vec::new(),
            leaky_slope: DEFAULT_LEAKY_SLOPE,
            seed: 0,
        }
    }

    pub fn mlp(layer_widths: Vec<usize>, seed: u64) -> Self {
        Self {
            kind: FeatureMapKind::Mlp,
            layer_widths,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
            seed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            FeatureMapKind::Identity if !self.layer_widths.is_empty() => {
                return Err(Error::InvalidSpec(
                    "identity feature map takes no hidden layers".into(),
                ))
            }
            FeatureMapKind::Mlp if self.layer_widths.is_empty() => {
                return Err(Error::InvalidSpec("mlp needs at least one hidden layer".into()))
            }
            _ => {}
        }
        if self.layer_widths.contains(&0) {
            return Err(Error::InvalidSpec("hidden layer widths must be positive".into()));
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return Err(Error::InvalidSpec(format!(
                "leaky slope must lie in (0, 1), got {}",
                self.leaky_slope
            )));
        }
        Ok(())
    }
}

/// Gradients of a scalar with respect to every model parameter, laid out like
/// [`Model`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub hidden: Vec<Array2<f64>>,
    pub w: Array1<f64>,
}

impl ParamGrads {
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for h in &self.hidden {
            out.extend(h.iter().copied());
        }
        out.extend(self.w.iter().copied());
        out
    }

    pub fn len(&self) -> usize {
        self.hidden.iter().map(|h| h.len()).sum::<usize>() + self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Parameters of `f(x) = wᵀφ(x)` plus the decision threshold applied by
/// [`decide`]: 1 for one-class models, 0 for the binary baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    spec: FeatureMapSpec,
    input_dim: usize,
    /// One `out × in` matrix per hidden layer, no bias.
    hidden: Vec<Array2<f64>>,
    w: Array1<f64>,
    threshold: f64,
}

/// Intermediate values of a batch forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Inputs to each hidden layer: `acts[0]` is the batch itself, the last
    /// entry is the feature matrix.
    pub acts: Vec<Array2<f64>>,
    /// Pre-activations of each hidden layer.
    pub pre: Vec<Array2<f64>>,
    pub scores: Array1<f64>,
}

impl ForwardCache {
    pub fn features(&self) -> &Array2<f64> {
        self.acts.last().expect("at least the input")
    }
}

impl Model {
    /// Glorot-uniform initialization, `U(±√(6/(fan_in+fan_out)))` per layer,
    /// drawn from the spec's seed. The output layer has fan-out 1.
    pub fn init(spec: FeatureMapSpec, input_dim: usize) -> Result<Self> {
        spec.validate()?;
        if input_dim == 0 {
            return Err(Error::InvalidSpec("input dimension must be positive".into()));
        }
        let mut rng = seeded_rng(spec.seed);
        let mut glorot = |rows: usize, cols: usize| {
            let bound = (6.0 / (rows + cols) as f64).sqrt();
            Array2::from_shape_fn((rows, cols), |_| rng.random_range(-bound..bound))
        };
        let mut hidden = Vec::with_capacity(spec.layer_widths.len());
        let mut fan_in = input_dim;
        for &width in &spec.layer_widths {
            hidden.push(glorot(width, fan_in));
            fan_in = width;
        }
        let w = glorot(1, fan_in).row(0).to_owned();
        Ok(Self {
            spec,
            input_dim,
            hidden,
            w,
            threshold: 1.0,
        })
    }

    /// Assembles a model from explicit parameters, checking that shapes chain.
    pub fn from_parts(
        spec: FeatureMapSpec,
        input_dim: usize,
        hidden: Vec<Array2<f64>>,
        w: Array1<f64>,
    ) -> Result<Self> {
        spec.validate()?;
        if hidden.len() != spec.layer_widths.len() {
            return Err(Error::DimensionMismatch {
                expected: spec.layer_widths.len(),
                found: hidden.len(),
            });
        }
        let mut fan_in = input_dim;
        for (h, &width) in hidden.iter().zip(&spec.layer_widths) {
            if h.nrows() != width {
                return Err(Error::DimensionMismatch {
                    expected: width,
                    found: h.nrows(),
                });
            }
            if h.ncols() != fan_in {
                return Err(Error::DimensionMismatch {
                    expected: fan_in,
                    found: h.ncols(),
                });
            }
            fan_in = width;
        }
        if w.len() != fan_in {
            return Err(Error::DimensionMismatch {
                expected: fan_in,
                found: w.len(),
            });
        }
        if hidden.iter().flat_map(|h| h.iter()).chain(w.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model parameters".into()));
        }
        Ok(Self {
            spec,
            input_dim,
            hidden,
            w,
            threshold: 1.0,
        })
    }

    /// Linear model `f(x) = wᵀx`.
    pub fn linear(w: Array1<f64>) -> Result<Self> {
        let d = w.len();
        Self::from_parts(FeatureMapSpec::identity(), d, Vec::new(), w)
    }

    pub fn spec(&self) -> &FeatureMapSpec {
        &self.spec
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn feature_dim(&self) -> usize {
        self.w.len()
    }

    pub fn hidden(&self) -> &[Array2<f64>] {
        &self.hidden
    }

    pub fn w(&self) -> &Array1<f64> {
        &self.w
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn set_w(&mut self, w: Array1<f64>) -> Result<()> {
        if w.len() != self.w.len() {
            return Err(Error::DimensionMismatch {
                expected: self.w.len(),
                found: w.len(),
            });
        }
        self.w = w;
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.hidden.iter().map(|h| h.len()).sum::<usize>() + self.w.len()
    }

    /// All parameters, hidden layers first (row-major), then `w`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for h in &self.hidden {
            out.extend(h.iter().copied());
        }
        out.extend(self.w.iter().copied());
        out
    }

    pub fn set_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::DimensionMismatch {
                expected: self.num_params(),
                found: params.len(),
            });
        }
        let mut it = params.iter().copied();
        for h in &mut self.hidden {
            h.iter_mut().for_each(|v| *v = it.next().expect("length checked"));
        }
        self.w.iter_mut().for_each(|v| *v = it.next().expect("length checked"));
        Ok(())
    }

    fn leaky(&self, v: f64) -> f64 {
        if v > 0.0 {
            v
        } else {
            self.spec.leaky_slope * v
        }
    }

    fn leaky_grad(&self, v: f64) -> f64 {
        if v > 0.0 {
            1.0
        } else {
            self.spec.leaky_slope
        }
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: cols,
            });
        }
        Ok(())
    }

    /// Score and feature vector of a single input.
    pub fn forward(&self, x: &ArrayView1<f64>) -> Result<(Score, Array1<f64>)> {
        self.check_input(x.len())?;
        let mut h = x.to_owned();
        for layer in &self.hidden {
            h = layer.dot(&h).mapv(|v| self.leaky(v));
        }
        let s = self.w.dot(&h);
        Ok((Score(s), h))
    }

    /// Forward pass over a batch (rows are samples), keeping what backward needs.
    pub fn forward_batch(&self, x: &ArrayView2<f64>) -> Result<ForwardCache> {
        self.check_input(x.ncols())?;
        let mut acts = Vec::with_capacity(self.hidden.len() + 1);
        let mut pre = Vec::with_capacity(self.hidden.len());
        acts.push(x.to_owned());
        for layer in &self.hidden {
            let a = acts.last().expect("non-empty").dot(&layer.t());
            acts.push(a.mapv(|v| self.leaky(v)));
            pre.push(a);
        }
        let scores = acts.last().expect("non-empty").dot(&self.w);
        Ok(ForwardCache { acts, pre, scores })
    }

    pub fn scores(&self, x: &ArrayView2<f64>) -> Result<Array1<f64>> {
        Ok(self.forward_batch(x)?.scores)
    }

    /// Penultimate-layer features `φ(x)` of every row.
    pub fn features(&self, x: &ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut cache = self.forward_batch(x)?;
        Ok(cache.acts.pop().expect("non-empty"))
    }

    /// Gradients of `Σᵢ gᵢ·f(xᵢ)` with respect to every parameter.
    pub fn backward(&self, x_batch: &ArrayView2<f64>, score_grads: &[f64]) -> Result<ParamGrads> {
        let cache = self.forward_batch(x_batch)?;
        self.backward_from_cache(&cache, score_grads)
    }

    pub fn backward_from_cache(&self, cache: &ForwardCache, score_grads: &[f64]) -> Result<ParamGrads> {
        let n = cache.scores.len();
        if score_grads.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: score_grads.len(),
            });
        }
        let g = ArrayView1::from(score_grads);
        let feats = cache.features();
        let grad_w = feats.t().dot(&g);

        let mut grad_hidden = vec![Array2::zeros((0, 0)); self.hidden.len()];
        if !self.hidden.is_empty() {
            // dL/dH for the feature layer is the outer product g wᵀ.
            let mut d_act = g
                .view()
                .insert_axis(Axis(1))
                .dot(&self.w.view().insert_axis(Axis(0)));
            for l in (0..self.hidden.len()).rev() {
                let mut d_pre = d_act;
                for (dv, &p) in d_pre.iter_mut().zip(cache.pre[l].iter()) {
                    *dv *= self.leaky_grad(p);
                }
                grad_hidden[l] = d_pre.t().dot(&cache.acts[l]);
                d_act = d_pre.dot(&self.hidden[l]);
            }
        }
        Ok(ParamGrads {
            hidden: grad_hidden,
            w: grad_w,
        })
    }

    /// Sum of squares of every parameter, `‖W‖²_F` over all layers including `w`.
    pub fn frobenius_sq(&self) -> f64 {
        frobenius_sq(self)
    }

    /// Smallest |pre-activation| over a batch; used to keep finite-difference
    /// probes away from activation kinks.
    pub fn min_abs_preactivation(&self, x: &ArrayView2<f64>) -> Result<f64> {
        let cache = self.forward_batch(x)?;
        Ok(cache
            .pre
            .iter()
            .flat_map(|p| p.iter())
            .fold(f64::INFINITY, |a, v| a.min(v.abs())))
    }
}

/// A score value `f(x)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Score(pub f64);

impl Score {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Decision rule: +1 iff `score ≥ threshold`.
pub fn decide(score: Score, threshold: f64) -> i8 {
    if score.0 >= threshold {
        1
    } else {
        -1
    }
}

pub fn frobenius_sq(model: &Model) -> f64 {
    model
        .hidden
        .iter()
        .flat_map(|h| h.iter())
        .chain(model.w.iter())
        .map(|v| v * v)
        .sum()
}

// ---------------------------------------------------------------------------
// Text serialization: one `key = value` per line, floats in shortest
// round-trip form, arrays comma separated in row-major order.

const MODEL_FORMAT: &str = "doc3-model";
const MODEL_VERSION: u32 = 1;

fn join_f64<'a>(vals: impl Iterator<Item = &'a f64>) -> String {
    let mut s = String::new();
    for (i, v) in vals.enumerate() {
        if i > 0 {
            s.push(',');
        }
        write!(s, "{v:?}").expect("write to string");
    }
    s
}

impl Model {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let widths: Vec<String> = self.spec.layer_widths.iter().map(|w| w.to_string()).collect();
        writeln!(out, "format = {MODEL_FORMAT}").unwrap();
        writeln!(out, "version = {MODEL_VERSION}").unwrap();
        writeln!(out, "kind = {}", self.spec.kind.as_str()).unwrap();
        writeln!(out, "input_dim = {}", self.input_dim).unwrap();
        writeln!(out, "layer_widths = {}", widths.join(",")).unwrap();
        writeln!(out, "activation = leaky_relu").unwrap();
        writeln!(out, "leaky_slope = {:?}", self.spec.leaky_slope).unwrap();
        writeln!(out, "seed = {}", self.spec.seed).unwrap();
        writeln!(out, "threshold = {:?}", self.threshold).unwrap();
        for (l, h) in self.hidden.iter().enumerate() {
            writeln!(out, "hidden.{l}.shape = {},{}", h.nrows(), h.ncols()).unwrap();
            writeln!(out, "hidden.{l} = {}", join_f64(h.iter())).unwrap();
        }
        writeln!(out, "w = {}", join_f64(self.w.iter())).unwrap();
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut kv = std::collections::BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::ModelFormat {
                line: i + 1,
                message: format!("expected key = value, got {line:?}"),
            })?;
            kv.insert(k.trim().to_string(), (i + 1, v.trim().to_string()));
        }
        let get = |k: &str| -> Result<(usize, &str)> {
            kv.get(k)
                .map(|(l, v)| (*l, v.as_str()))
                .ok_or_else(|| Error::ModelFormat {
                    line: 0,
                    message: format!("missing key {k:?}"),
                })
        };
        let bad = |line: usize, message: String| Error::ModelFormat { line, message };
        let parse_usize = |k: &str| -> Result<usize> {
            let (l, v) = get(k)?;
            v.parse().map_err(|_| bad(l, format!("{k}: not an integer: {v:?}")))
        };
        let parse_f64 = |k: &str| -> Result<f64> {
            let (l, v) = get(k)?;
            v.parse().map_err(|_| bad(l, format!("{k}: not a number: {v:?}")))
        };
        let parse_list = |k: &str| -> Result<Vec<f64>> {
            let (l, v) = get(k)?;
            if v.is_empty() {
                return Ok(Vec::new());
            }
            v.split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|_| bad(l, format!("{k}: bad number {t:?}"))))
                .collect()
        };

        let (l, fmt) = get("format")?;
        if fmt != MODEL_FORMAT {
            return Err(bad(l, format!("unknown format {fmt:?}")));
        }
        let version = parse_usize("version")?;
        if version != MODEL_VERSION as usize {
            return Err(bad(get("version")?.0, format!("unsupported version {version}")));
        }
        let (l, kind) = get("kind")?;
        let kind: FeatureMapKind = kind.parse().map_err(|e: Error| bad(l, e.to_string()))?;
        let input_dim = parse_usize("input_dim")?;
        let (l, widths) = get("layer_widths")?;
        let layer_widths: Vec<usize> = if widths.is_empty() {
            Vec::new()
        } else {
            widths
                .split(',')
                .map(|t| t.trim().parse().map_err(|_| bad(l, format!("bad width {t:?}"))))
                .collect::<Result<_>>()?
        };
        let spec = FeatureMapSpec {
            kind,
            layer_widths,
            leaky_slope: parse_f64("leaky_slope")?,
            seed: get("seed")?
                .1
                .parse()
                .map_err(|_| bad(get("seed").map(|p| p.0).unwrap_or(0), "bad seed".into()))?,
        };
        let mut hidden = Vec::new();
        for l in 0..spec.layer_widths.len() {
            let (line, shape) = get(&format!("hidden.{l}.shape"))?;
            let (r, c) = shape
                .split_once(',')
                .and_then(|(r, c)| Some((r.trim().parse::<usize>().ok()?, c.trim().parse::<usize>().ok()?)))
                .ok_or_else(|| bad(line, format!("bad shape {shape:?}")))?;
            let vals = parse_list(&format!("hidden.{l}"))?;
            let m = Array2::from_shape_vec((r, c), vals)
                .map_err(|e| bad(line, format!("hidden.{l}: {e}")))?;
            hidden.push(m);
        }
        let w = Array1::from(parse_list("w")?);
        let threshold = parse_f64("threshold")?;
        Ok(Self::from_parts(spec, input_dim, hidden, w)?.with_threshold(threshold))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn random_mlp(d: usize, widths: Vec<usize>, seed: u64) -> Model {
        Model::init(FeatureMapSpec::mlp(widths, seed), d).unwrap()
    }

    fn random_batch(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = seeded_rng(seed);
        Array2::from_shape_fn((n, d), |_| StandardNormal.sample(&mut rng))
    }

    /// Straight-line re-implementation with explicit loops.
    fn naive_forward(m: &Model, x: &[f64]) -> (f64, Vec<f64>) {
        let mut h = x.to_vec();
        for layer in m.hidden() {
            let mut next = vec![0.0; layer.nrows()];
            for (r, out) in next.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (c, hv) in h.iter().enumerate() {
                    acc += layer[[r, c]] * hv;
                }
                *out = if acc > 0.0 { acc } else { m.spec().leaky_slope * acc };
            }
            h = next;
        }
        let s = h.iter().zip(m.w().iter()).map(|(a, b)| a * b).sum();
        (s, h)
    }

    #[test]
    fn identity_forward() {
        let m = Model::linear(array![2.0, -1.0]).unwrap();
        let (s, f) = m.forward(&array![1.0, 1.0].view()).unwrap();
        assert_eq!(s.value(), 1.0);
        assert_eq!(f, array![1.0, 1.0]);
        assert!(m.forward(&array![1.0].view()).is_err());
    }

    #[test]
    fn zero_weights_score_zero() {
        let mut m = random_mlp(3, vec![4, 2], 1);
        m.set_w(Array1::zeros(2)).unwrap();
        let x = random_batch(5, 3, 2);
        assert!(m.scores(&x.view()).unwrap().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn mlp_forward_matches_naive() {
        let m = random_mlp(4, vec![6, 5], 3);
        let x = random_batch(10, 4, 4);
        let cache = m.forward_batch(&x.view()).unwrap();
        for (i, row) in x.rows().into_iter().enumerate() {
            let (s, h) = naive_forward(&m, row.as_slice().unwrap());
            assert!((cache.scores[i] - s).abs() <= 1e-12);
            for (a, b) in cache.features().row(i).iter().zip(&h) {
                assert!((a - b).abs() <= 1e-12);
            }
            let (single, _) = m.forward(&row).unwrap();
            assert!((single.value() - s).abs() <= 1e-12);
        }
    }

    #[test]
    fn identity_backward_closed_form() {
        let m = Model::linear(array![0.5, -2.0, 1.0]).unwrap();
        let x = random_batch(4, 3, 5);
        let g = [0.3, -1.0, 2.0, 0.0];
        let grads = m.backward(&x.view(), &g).unwrap();
        let expected = x.t().dot(&ArrayView1::from(&g));
        assert_eq!(grads.w, expected);
        assert!(grads.hidden.is_empty());
    }

    #[test]
    fn zero_score_grads_give_zero() {
        let m = random_mlp(3, vec![4, 3], 6);
        let x = random_batch(5, 3, 7);
        let grads = m.backward(&x.view(), &[0.0; 5]).unwrap();
        assert!(grads.to_flat().iter().all(|&v| v == 0.0));
        assert!(m.backward(&x.view(), &[0.0; 4]).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut checked = 0;
        for seed in 0..20 {
            let m = random_mlp(3, vec![5, 4], 100 + seed);
            let x = random_batch(6, 3, 200 + seed);
            if m.min_abs_preactivation(&x.view()).unwrap() < 1e-3 {
                continue;
            }
            checked += 1;
            let mut rng = seeded_rng(300 + seed);
            let g: Vec<f64> = (0..6).map(|_| StandardNormal.sample(&mut rng)).collect();
            let analytic = m.backward(&x.view(), &g).unwrap().to_flat();
            let theta = m.to_flat();
            let f = |p: &[f64]| {
                let mut mm = m.clone();
                mm.set_flat(p).unwrap();
                let s = mm.scores(&x.view()).unwrap();
                s.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>()
            };
            let h = 1e-6;
            for k in 0..theta.len() {
                let mut p = theta.clone();
                p[k] += h;
                let up = f(&p);
                p[k] -= 2.0 * h;
                let down = f(&p);
                let fd = (up - down) / (2.0 * h);
                let tol = 1e-4 * analytic[k].abs().max(fd.abs()).max(1e-3);
                assert!((fd - analytic[k]).abs() <= tol, "param {k}: {fd} vs {}", analytic[k]);
            }
        }
        assert!(checked >= 3, "only {checked} instances away from kinks");
    }

    #[test]
    fn decide_examples() {
        assert_eq!(decide(Score(1.0), 1.0), 1);
        assert_eq!(decide(Score(0.999), 1.0), -1);
        for k in -20..=20 {
            let s = k as f64 * 0.1;
            let expected = if s - 0.5 >= 0.0 { 1 } else { -1 };
            assert_eq!(decide(Score(s), 0.5), expected);
        }
    }

    #[test]
    fn frobenius_examples() {
        let mut m = random_mlp(2, vec![3], 9);
        m.set_flat(&vec![0.0; m.num_params()]).unwrap();
        assert_eq!(m.frobenius_sq(), 0.0);
        assert_eq!(Model::linear(array![3.0, 4.0]).unwrap().frobenius_sq(), 25.0);
        let m = random_mlp(4, vec![5, 3], 10);
        let oracle: f64 = m.to_flat().iter().map(|v| v * v).sum();
        assert!((m.frobenius_sq() - oracle).abs() <= 1e-12);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = random_mlp(3, vec![8, 4], 11);
        let b = random_mlp(3, vec![8, 4], 11);
        assert_eq!(a, b);
        let bound = (6.0f64 / 11.0).sqrt();
        assert!(a.hidden()[0].iter().all(|v| v.abs() <= bound));
        assert!(Model::init(FeatureMapSpec::mlp(vec![], 0), 2).is_err());
        let mut bad = FeatureMapSpec::mlp(vec![2], 0);
        bad.leaky_slope = 1.5;
        assert!(Model::init(bad, 2).is_err());
    }

    #[test]
    fn text_round_trip_exact() {
        let m = random_mlp(3, vec![4, 2], 12).with_threshold(0.0);
        let back = Model::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
        for (a, b) in m.to_flat().iter().zip(back.to_flat()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let lin = Model::linear(array![0.1, 1e-300, -7.25]).unwrap();
        assert_eq!(Model::from_text(&lin.to_text()).unwrap(), lin);
    }

    #[test]
    fn text_rejects_garbage() {
        assert!(Model::from_text("format = other\n").is_err());
        let m = Model::linear(array![1.0]).unwrap();
        let t = m.to_text().replace("w = 1.0", "w = 1.0,2.0");
        assert!(Model::from_text(&t).is_err());
    }

    proptest! {
        #[test]
        fn scores_homogeneous_in_w(c in -5.0f64..5.0, seed in 0u64..50) {
            let m = random_mlp(3, vec![4], seed);
            let x = random_batch(4, 3, seed + 1);
            let base = m.scores(&x.view()).unwrap();
            let mut scaled = m.clone();
            scaled.set_w(m.w() * c).unwrap();
            let s = scaled.scores(&x.view()).unwrap();
            for (a, b) in base.iter().zip(s.iter()) {
                prop_assert!((a * c - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }

        #[test]
        fn decide_invariant_under_monotone_map(s in -10.0f64..10.0, t in -10.0f64..10.0) {
            let f = |v: f64| v.powi(3) + 2.0 * v;
            prop_assert_eq!(decide(Score(s), t), decide(Score(f(s)), f(t)));
        }
    }
}
