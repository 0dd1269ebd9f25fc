//! DOC, DOC³ and binary-baseline objectives and a minibatch trainer.
//!
//! The trainer minimizes the sample-averaged form
//!
//! ```text
//! λ‖W‖²_F + (1/n) Σ L_T(f(xᵢ)) + (C_U / C) (1/m) Σ L_U(f(x*ⱼ)),   λ = 1/(2C)
//! ```
//!
//! For the hinge-sum (SVM) convention `½‖w‖² + C Σ L_T + C_U Σ L_U` use
//! [`Hyperparams::from_svm_scale`], which sets `c = C·n` and `c_u = C_U·m` so
//! both problems have the same minimizer.
//!
//! Each step samples `batch_train` training rows and `batch_univ` universum
//! rows uniformly with replacement; the minibatch means are unbiased
//! estimates of the full means above.

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;

use crate::datasets::{seeded_rng, Dataset, UniversumSet};
use crate::error::{Error, Result};
use crate::losses::{
    binary_cost_sensitive_loss, hinge_train_loss, softplus_train_loss, universum_loss_two_hinge,
    UniversumMargins,
};
use crate::models::{FeatureMapSpec, Model};

/// Loss applied to the normal-class training scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainLoss {
    Hinge,
    Softplus,
}

impl TrainLoss {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrainLoss::Hinge => "hinge",
            TrainLoss::Softplus => "softplus",
        }
    }

    fn eval(&self, scores: &[f64]) -> (f64, Vec<f64>) {
        match self {
            TrainLoss::Hinge => hinge_train_loss(scores),
            TrainLoss::Softplus => softplus_train_loss(scores),
        }
    }
}

impl std::str::FromStr for TrainLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hinge" => Ok(Self::Hinge),
            "softplus" => Ok(Self::Softplus),
            other => Err(Error::InvalidParameter(format!("unknown train loss {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl OptimizerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        }
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Self::Sgd),
            "adam" => Ok(Self::Adam),
            other => Err(Error::InvalidParameter(format!("unknown optimizer {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerSpec {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        Self::sgd(1e-3)
    }
}

impl OptimizerSpec {
    pub fn sgd(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn adam(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::Adam,
            ..Self::sgd(learning_rate)
        }
    }

    pub fn validate(&self) -> Result<()> {
        // Zero is accepted so that a run can be replayed as a no-op.
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.kind == OptimizerKind::Adam
            && !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2) && self.epsilon > 0.0)
        {
            return Err(Error::InvalidParameter("adam betas must lie in [0,1), epsilon > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    /// Trade-off `C`; the regularization weight is `λ = 1/(2C)`.
    pub c: f64,
    /// Universum weight `C_U`.
    pub c_u: f64,
    /// Insensitivity Δ of the universum loss.
    pub delta: f64,
    /// `c_pos / c_neg` for the binary baseline (`c_neg = 1`).
    pub cost_ratio: f64,
    pub train_loss: TrainLoss,
    pub optimizer: OptimizerSpec,
    pub iterations: usize,
    pub batch_train: usize,
    pub batch_univ: usize,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            c: 1.0,
            c_u: 0.0,
            delta: 0.0,
            cost_ratio: 1.0,
            train_loss: TrainLoss::Hinge,
            optimizer: OptimizerSpec::default(),
            iterations: 1000,
            batch_train: 64,
            batch_univ: 64,
            seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn lambda(&self) -> f64 {
        1.0 / (2.0 * self.c)
    }

    /// Sets `c` from a regularization weight, `c = 1/(2λ)`.
    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.c = 1.0 / (2.0 * lambda);
        self
    }

    /// Maps the sum-form problem `½‖w‖² + C Σ L_T + C_U Σ L_U` on `n`
    /// training and `m` universum samples onto the averaged form.
    pub fn from_svm_scale(c: f64, c_u: f64, n: usize, m: usize) -> Self {
        Self {
            c: c * n as f64,
            c_u: c_u * m as f64,
            ..Self::default()
        }
    }

    /// Maps `½‖w‖² + C Σ [C⁺[1-s]₊ + C⁻[1+s]₊]` with `C⁺/C⁻ = ratio`, `C⁻ = 1`,
    /// onto the weighted-mean binary objective.
    pub fn binary_from_svm_scale(c: f64, cost_ratio: f64, n_pos: usize, n_neg: usize) -> Self {
        Self {
            c: c * (cost_ratio * n_pos as f64 + n_neg as f64),
            cost_ratio,
            ..Self::default()
        }
    }

    pub fn margins(&self) -> Result<UniversumMargins> {
        UniversumMargins::new(self.delta)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        pos(self.c, "c")?;
        pos(self.cost_ratio, "cost_ratio")?;
        if !(self.c_u >= 0.0) || !self.c_u.is_finite() {
            return Err(Error::InvalidParameter(format!("c_u must be >= 0, got {}", self.c_u)));
        }
        self.margins()?;
        self.optimizer.validate()?;
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("iterations must be positive".into()));
        }
        if self.batch_train == 0 || self.batch_univ == 0 {
            return Err(Error::InvalidParameter("batch sizes must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Doc,
    Doc3,
    Binary,
}

impl Objective {
    pub fn as_str(&self) -> &'static str {
        match self {
            Objective::Doc => "doc",
            Objective::Doc3 => "doc3",
            Objective::Binary => "binary",
        }
    }
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "doc" => Ok(Self::Doc),
            "doc3" => Ok(Self::Doc3),
            "binary" => Ok(Self::Binary),
            other => Err(Error::Config(format!(
                "unknown objective {other:?} (expected doc, doc3 or binary)"
            ))),
        }
    }
}

/// Value of an objective split into its terms. `l_t`/`l_u` are per-sample
/// means; for the binary baseline they hold the positive/negative class means.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveParts {
    pub total: f64,
    pub l_t: f64,
    pub l_u: f64,
    pub regularizer: f64,
}

/// What the second sample set means for an objective.
#[derive(Debug, Clone, Copy)]
enum Second<'a> {
    None,
    Universum(ArrayView2<'a, f64>),
    Negatives(ArrayView2<'a, f64>),
}

/// Weights applied to the class means of the binary objective, so that the
/// minibatch estimate is unbiased for the full weighted mean.
fn binary_weights(hp: &Hyperparams, n_pos: usize, n_neg: usize) -> (f64, f64) {
    let wp = hp.cost_ratio * n_pos as f64;
    let wn = n_neg as f64;
    (wp / (wp + wn), wn / (wp + wn))
}

/// Objective value and flat gradient on explicit batches. `scale` holds the
/// full-set sizes used for the binary class weights.
fn value_and_grad(
    model: &Model,
    first: ArrayView2<f64>,
    second: Second,
    hp: &Hyperparams,
    full_sizes: (usize, usize),
    want_grad: bool,
) -> Result<(ObjectiveParts, Vec<f64>)> {
    let lambda = hp.lambda();
    let reg = lambda * model.frobenius_sq();
    let mut grad: Vec<f64> = if want_grad {
        model.to_flat().iter().map(|v| 2.0 * lambda * v).collect()
    } else {
        Vec::new()
    };
    let mut accumulate = |x: ArrayView2<f64>, g: &[f64]| -> Result<()> {
        if want_grad {
            let pg = model.backward(&x, g)?.to_flat();
            grad.iter_mut().zip(pg).for_each(|(a, b)| *a += b);
        }
        Ok(())
    };

    let s1 = model.scores(&first)?;
    let n1 = s1.len() as f64;
    let (mut total, l_t, l_u);
    match second {
        Second::Negatives(neg) => {
            let s2 = model.scores(&neg)?;
            let n2 = s2.len() as f64;
            let (wp, wn) = binary_weights(hp, full_sizes.0, full_sizes.1);
            let (lp, gp) = hp.train_loss.eval(s1.as_slice().expect("contiguous"));
            let (ln, _, gn) = binary_cost_sensitive_loss(&[], s2.as_slice().expect("contiguous"), 1.0, 1.0)?;
            l_t = lp / n1;
            l_u = ln / n2;
            total = reg + wp * l_t + wn * l_u;
            let gp: Vec<f64> = gp.iter().map(|g| g * wp / n1).collect();
            let gn: Vec<f64> = gn.iter().map(|g| g * wn / n2).collect();
            accumulate(first, &gp)?;
            accumulate(neg, &gn)?;
        }
        _ => {
            let (lt, gt) = hp.train_loss.eval(s1.as_slice().expect("contiguous"));
            l_t = lt / n1;
            total = reg + l_t;
            let gt: Vec<f64> = gt.iter().map(|g| g / n1).collect();
            accumulate(first, &gt)?;
            if let Second::Universum(u) = second {
                let su = model.scores(&u)?;
                let m = su.len() as f64;
                let (lu, gu) = universum_loss_two_hinge(su.as_slice().expect("contiguous"), &hp.margins()?);
                let weight = hp.c_u / hp.c;
                l_u = lu / m;
                total += weight * l_u;
                let gu: Vec<f64> = gu.iter().map(|g| g * weight / m).collect();
                accumulate(u, &gu)?;
            } else {
                l_u = 0.0;
            }
        }
    }
    if !want_grad {
        grad.clear();
    }
    let parts = ObjectiveParts {
        total,
        l_t,
        l_u,
        regularizer: reg,
    };
    Ok((parts, grad))
}

fn check_dims(model: &Model, d: usize) -> Result<()> {
    if model.input_dim() != d {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            found: d,
        });
    }
    Ok(())
}

/// `λ‖W‖²_F + (1/n) Σ L_T` over the whole training set.
pub fn objective_doc(model: &Model, data: &Dataset, hp: &Hyperparams) -> Result<f64> {
    Ok(objective_doc_parts(model, data, hp)?.total)
}

pub fn objective_doc_parts(model: &Model, data: &Dataset, hp: &Hyperparams) -> Result<ObjectiveParts> {
    check_dims(model, data.dim())?;
    Ok(value_and_grad(model, data.x().view(), Second::None, hp, (data.len(), 0), false)?.0)
}

/// DOC objective plus `(C_U/C)·(1/m) Σ L_U` with the two-hinge universum loss.
pub fn objective_doc3(model: &Model, data: &Dataset, univ: &UniversumSet, hp: &Hyperparams) -> Result<f64> {
    Ok(objective_doc3_parts(model, data, univ, hp)?.total)
}

pub fn objective_doc3_parts(
    model: &Model,
    data: &Dataset,
    univ: &UniversumSet,
    hp: &Hyperparams,
) -> Result<ObjectiveParts> {
    check_dims(model, data.dim())?;
    check_dims(model, univ.dim())?;
    Ok(value_and_grad(
        model,
        data.x().view(),
        Second::Universum(univ.x().view()),
        hp,
        (data.len(), univ.len()),
        false,
    )?
    .0)
}

/// `λ‖W‖²_F` plus the cost-weighted mean of the binary hinge terms.
pub fn objective_binary(model: &Model, pos: &Dataset, neg: &UniversumSet, hp: &Hyperparams) -> Result<f64> {
    check_dims(model, pos.dim())?;
    check_dims(model, neg.dim())?;
    Ok(value_and_grad(
        model,
        pos.x().view(),
        Second::Negatives(neg.x().view()),
        hp,
        (pos.len(), neg.len()),
        false,
    )?
    .0
    .total)
}

/// Full-batch objective and flat gradient (same parameter order as
/// [`Model::to_flat`]). `second` is the universum for DOC³ and the negative
/// class for the binary baseline; it is ignored for DOC.
pub fn full_objective_grad(
    model: &Model,
    objective: Objective,
    data: &Dataset,
    second: Option<&UniversumSet>,
    hp: &Hyperparams,
) -> Result<(ObjectiveParts, Vec<f64>)> {
    check_dims(model, data.dim())?;
    let sizes = (data.len(), second.map_or(0, |s| s.len()));
    let second = match (objective, second) {
        (Objective::Doc, _) => Second::None,
        (Objective::Doc3, Some(u)) => Second::Universum(u.x().view()),
        (Objective::Binary, Some(u)) => Second::Negatives(u.x().view()),
        (_, None) => {
            return Err(Error::Config(format!(
                "objective {} needs a second sample set",
                objective.as_str()
            )))
        }
    };
    if let Second::Universum(u) | Second::Negatives(u) = second {
        check_dims(model, u.ncols())?;
    }
    value_and_grad(model, data.x().view(), second, hp, sizes, true)
}

/// Per-iteration record of a training run. Values are minibatch estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace {
    pub objective_kind: Objective,
    pub objective: Vec<f64>,
    pub l_t: Vec<f64>,
    pub l_u: Vec<f64>,
    pub regularizer: Vec<f64>,
    pub model: Model,
    pub seed: u64,
    pub hyperparams: Hyperparams,
}

impl TrainTrace {
    pub fn final_objective(&self) -> f64 {
        *self.objective.last().expect("iterations > 0")
    }
}

enum OptState {
    Sgd,
    Adam { m: Vec<f64>, v: Vec<f64>, t: i32 },
}

impl OptState {
    fn new(spec: &OptimizerSpec, n: usize) -> Self {
        match spec.kind {
            OptimizerKind::Sgd => OptState::Sgd,
            OptimizerKind::Adam => OptState::Adam {
                m: vec![0.0; n],
                v: vec![0.0; n],
                t: 0,
            },
        }
    }

    fn step(&mut self, spec: &OptimizerSpec, params: &mut [f64], grad: &[f64]) {
        let lr = spec.learning_rate;
        match self {
            OptState::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= lr * g;
                }
            }
            OptState::Adam { m, v, t } => {
                *t += 1;
                let bc1 = 1.0 - spec.beta1.powi(*t);
                let bc2 = 1.0 - spec.beta2.powi(*t);
                for i in 0..params.len() {
                    m[i] = spec.beta1 * m[i] + (1.0 - spec.beta1) * grad[i];
                    v[i] = spec.beta2 * v[i] + (1.0 - spec.beta2) * grad[i] * grad[i];
                    let mhat = m[i] / bc1;
                    let vhat = v[i] / bc2;
                    params[i] -= lr * mhat / (vhat.sqrt() + spec.epsilon);
                }
            }
        }
    }
}

fn check_objective(iteration: usize, value: f64, initial: f64) -> Result<()> {
    if value.is_nan() {
        return Err(Error::NanObjective { iteration });
    }
    if value > 1e6 * initial.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::Diverged {
            iteration,
            value,
            initial,
        });
    }
    Ok(())
}

fn sample_rows<R: Rng>(rng: &mut R, x: &Array2<f64>, k: usize) -> Array2<f64> {
    let n = x.nrows();
    let idx: Vec<usize> = (0..k).map(|_| rng.random_range(0..n)).collect();
    x.select(Axis(0), &idx)
}

fn run(
    objective: Objective,
    data: &Dataset,
    second: Option<&UniversumSet>,
    hp: &Hyperparams,
    spec: FeatureMapSpec,
) -> Result<TrainTrace> {
    hp.validate()?;
    let mut model = Model::init(spec, data.dim())?;
    if let Some(s) = second {
        check_dims(&model, s.dim())?;
    }
    let mut rng = seeded_rng(hp.seed);
    let mut opt = OptState::new(&hp.optimizer, model.num_params());
    let sizes = (data.len(), second.map_or(0, |s| s.len()));

    let mut trace = TrainTrace {
        objective_kind: objective,
        objective: Vec::with_capacity(hp.iterations),
        l_t: Vec::with_capacity(hp.iterations),
        l_u: Vec::with_capacity(hp.iterations),
        regularizer: Vec::with_capacity(hp.iterations),
        model: model.clone(),
        seed: hp.seed,
        hyperparams: hp.clone(),
    };
    let mut initial = f64::NAN;
    let mut params = model.to_flat();
    for it in 0..hp.iterations {
        let tb = sample_rows(&mut rng, data.x(), hp.batch_train);
        let sb = match (objective, second) {
            (Objective::Doc, _) | (_, None) => None,
            (_, Some(s)) => Some(sample_rows(&mut rng, s.x(), hp.batch_univ)),
        };
        let sec = match (&sb, objective) {
            (Some(u), Objective::Doc3) => Second::Universum(u.view()),
            (Some(u), Objective::Binary) => Second::Negatives(u.view()),
            _ => Second::None,
        };
        let (parts, grad) = value_and_grad(&model, tb.view(), sec, hp, sizes, true)?;
        if it == 0 {
            initial = parts.total;
        }
        check_objective(it, parts.total, initial)?;
        trace.objective.push(parts.total);
        trace.l_t.push(parts.l_t);
        trace.l_u.push(parts.l_u);
        trace.regularizer.push(parts.regularizer);

        opt.step(&hp.optimizer, &mut params, &grad);
        if params.iter().any(|p| p.is_nan()) {
            return Err(Error::NanObjective { iteration: it });
        }
        model.set_flat(&params)?;
    }
    if objective == Objective::Binary {
        model = model.with_threshold(0.0);
    }
    trace.model = model;
    Ok(trace)
}

/// Trains DOC (no universum) or DOC³ (universum with `c_u > 0`).
pub fn train(
    data: &Dataset,
    univ: Option<&UniversumSet>,
    hp: &Hyperparams,
    spec: FeatureMapSpec,
) -> Result<TrainTrace> {
    match univ {
        Some(u) if hp.c_u > 0.0 => run(Objective::Doc3, data, Some(u), hp, spec),
        None if hp.c_u > 0.0 => Err(Error::Config(
            "c_u > 0 requires universum samples".into(),
        )),
        _ => run(Objective::Doc, data, None, hp, spec),
    }
}

/// Cost-sensitive binary SVM with the universum as the negative class. The
/// returned model decides with threshold 0.
pub fn train_binary_baseline(
    data_pos: &Dataset,
    data_neg: &UniversumSet,
    hp: &Hyperparams,
    spec: FeatureMapSpec,
) -> Result<TrainTrace> {
    run(Objective::Binary, data_pos, Some(data_neg), hp, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{hinge_train_loss, universum_loss};
    use ndarray::{array, Array1};
    use rand_distr::{Distribution, StandardNormal};

    fn randn(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = seeded_rng(seed);
        Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(&mut rng))
    }

    fn hp() -> Hyperparams {
        Hyperparams {
            c: 2.0,
            c_u: 0.5,
            delta: 0.1,
            ..Hyperparams::default()
        }
    }

    #[test]
    fn lambda_tracks_c() {
        let h = Hyperparams::default().with_lambda(0.05);
        assert!((h.c - 10.0).abs() < 1e-12);
        assert!((h.lambda() - 0.05).abs() < 1e-15);
        let s = Hyperparams::from_svm_scale(5.0, 1e-3, 10, 1000);
        assert_eq!(s.c, 50.0);
        assert!((s.c_u - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_model_doc_objective_is_one() {
        let data = Dataset::new(randn(7, 3, 1)).unwrap();
        let m = Model::linear(Array1::zeros(3)).unwrap();
        assert_eq!(objective_doc(&m, &data, &hp()).unwrap(), 1.0);
    }

    #[test]
    fn doc_ignores_universum_params() {
        let data = Dataset::new(randn(7, 3, 2)).unwrap();
        let m = Model::linear(array![0.3, -0.2, 0.9]).unwrap();
        let a = objective_doc(&m, &data, &hp()).unwrap();
        let b = objective_doc(&m, &data, &Hyperparams { c_u: 100.0, delta: 7.0, ..hp() }).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn doc_recomposes() {
        let data = Dataset::new(randn(9, 2, 3)).unwrap();
        let m = Model::init(FeatureMapSpec::mlp(vec![4], 5), 2).unwrap();
        let h = hp();
        let scores: Vec<f64> = data
            .x()
            .rows()
            .into_iter()
            .map(|r| m.forward(&r).unwrap().0.value())
            .collect();
        let mean_hinge: f64 =
            scores.iter().map(|s| hinge_train_loss(&[*s]).0).sum::<f64>() / scores.len() as f64;
        let expected = h.lambda() * m.frobenius_sq() + mean_hinge;
        assert!((objective_doc(&m, &data, &h).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn doc3_reduces_to_doc() {
        let data = Dataset::new(randn(9, 2, 4)).unwrap();
        let univ = UniversumSet::new(randn(6, 2, 5)).unwrap();
        let m = Model::linear(array![0.7, -0.4]).unwrap();
        let h0 = Hyperparams { c_u: 0.0, ..hp() };
        assert_eq!(
            objective_doc3(&m, &data, &univ, &h0).unwrap(),
            objective_doc(&m, &data, &h0).unwrap()
        );
        let scores = m.scores(&univ.x().view()).unwrap();
        let wide = scores.iter().map(|s| (1.0 - s).abs()).fold(0.0, f64::max);
        let hw = Hyperparams { delta: wide, ..hp() };
        assert_eq!(
            objective_doc3(&m, &data, &univ, &hw).unwrap(),
            objective_doc(&m, &data, &hw).unwrap()
        );
    }

    #[test]
    fn doc3_recomposes() {
        let data = Dataset::new(randn(9, 3, 6)).unwrap();
        let univ = UniversumSet::new(randn(5, 3, 7)).unwrap();
        let m = Model::init(FeatureMapSpec::mlp(vec![3, 2], 8), 3).unwrap();
        let h = hp();
        let su = m.scores(&univ.x().view()).unwrap();
        let margins = UniversumMargins::new(h.delta).unwrap();
        let mean_u = su.iter().map(|s| universum_loss(&[*s], &margins).0).sum::<f64>() / 5.0;
        let expected = objective_doc(&m, &data, &h).unwrap() + h.c_u / h.c * mean_u;
        assert!((objective_doc3(&m, &data, &univ, &h).unwrap() - expected).abs() < 1e-12);
        assert!(objective_doc3(&m, &data, &univ, &h).unwrap() >= objective_doc(&m, &data, &h).unwrap());
    }

    #[test]
    fn zero_learning_rate_is_noop() {
        let data = Dataset::new(randn(10, 2, 9)).unwrap();
        let spec = FeatureMapSpec::mlp(vec![3], 10);
        let h = Hyperparams {
            optimizer: OptimizerSpec::sgd(0.0),
            iterations: 20,
            c_u: 0.0,
            ..hp()
        };
        let t = train(&data, None, &h, spec.clone()).unwrap();
        assert_eq!(t.model, Model::init(spec, 2).unwrap());
        assert_eq!(t.objective.len(), 20);
    }

    #[test]
    fn single_point_stationary_solution() {
        // λw² + [1 - 2w]₊ is minimized at w = 1/2 when λ < 2.
        let c = 100.0;
        let lambda = 1.0 / (2.0 * c);
        let f = |w: f64| lambda * w * w + (1.0 - 2.0 * w).max(0.0);
        let grid_best = (0..=40000)
            .map(|k| -2.0 + k as f64 * 1e-4)
            .min_by(|a, b| f(*a).partial_cmp(&f(*b)).unwrap())
            .unwrap();
        assert!((grid_best - 0.5).abs() <= 1e-4);

        let data = Dataset::new(Array2::from_elem((5, 1), 2.0)).unwrap();
        let h = Hyperparams {
            c,
            c_u: 0.0,
            optimizer: OptimizerSpec::adam(1e-3),
            iterations: 4000,
            batch_train: 5,
            ..Hyperparams::default()
        };
        let t = train(&data, None, &h, FeatureMapSpec::identity()).unwrap();
        assert!((t.model.w()[0] - grid_best).abs() < 5e-3, "w = {}", t.model.w()[0]);
    }

    #[test]
    fn traces_are_reproducible() {
        let data = Dataset::new(randn(12, 3, 11)).unwrap();
        let univ = UniversumSet::new(randn(8, 3, 12)).unwrap();
        let h = Hyperparams {
            iterations: 50,
            batch_train: 4,
            batch_univ: 3,
            optimizer: OptimizerSpec::adam(1e-2),
            ..hp()
        };
        let spec = FeatureMapSpec::mlp(vec![4], 13);
        let a = train(&data, Some(&univ), &h, spec.clone()).unwrap();
        let b = train(&data, Some(&univ), &h, spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.objective_kind, Objective::Doc3);
    }

    #[test]
    fn universum_required_when_weighted() {
        let data = Dataset::new(randn(4, 2, 14)).unwrap();
        assert!(matches!(
            train(&data, None, &hp(), FeatureMapSpec::identity()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn divergence_is_caught() {
        let data = Dataset::new(randn(6, 2, 15)).unwrap();
        let h = Hyperparams {
            c: 0.5,
            c_u: 0.0,
            optimizer: OptimizerSpec::sgd(50.0),
            iterations: 100,
            batch_train: 6,
            ..Hyperparams::default()
        };
        assert!(matches!(
            train(&data, None, &h, FeatureMapSpec::identity()),
            Err(Error::Diverged { .. })
        ));
    }

    #[test]
    fn nan_objective_names_iteration() {
        assert!(matches!(check_objective(7, f64::NAN, 1.0), Err(Error::NanObjective { iteration: 7 })));
        assert!(check_objective(3, 2.0, 1.0).is_ok());
    }

    #[test]
    fn binary_model_thresholds_at_zero() {
        let pos = Dataset::new(randn(5, 2, 16) + 2.0).unwrap();
        let neg = UniversumSet::new(randn(7, 2, 17) - 2.0).unwrap();
        let h = Hyperparams {
            iterations: 200,
            batch_train: 5,
            batch_univ: 7,
            optimizer: OptimizerSpec::adam(1e-2),
            ..Hyperparams::default()
        };
        let t = train_binary_baseline(&pos, &neg, &h, FeatureMapSpec::identity()).unwrap();
        assert_eq!(t.model.threshold(), 0.0);
        assert_eq!(t.objective_kind, Objective::Binary);
    }

    #[test]
    fn binary_objective_symmetric_under_reflection() {
        let x = randn(6, 2, 18);
        let pos = Dataset::new(x.clone()).unwrap();
        let neg = UniversumSet::new(-&x).unwrap();
        let h = Hyperparams::default();
        let m = Model::linear(array![0.4, -1.1]).unwrap();
        let flipped = Model::linear(array![-0.4, 1.1]).unwrap();
        let swapped_pos = Dataset::new(-&x).unwrap();
        let swapped_neg = UniversumSet::new(x).unwrap();
        let a = objective_binary(&m, &pos, &neg, &h).unwrap();
        let b = objective_binary(&flipped, &swapped_pos, &swapped_neg, &h).unwrap();
        assert!((a - b).abs() < 1e-12);
    }
}
