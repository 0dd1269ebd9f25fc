//! Rademacher-complexity estimates and bounds for the linear-in-features
//! classes
//!
//! ```text
//! F_ind  = { x ↦ wᵀφ(x) : ‖w‖ ≤ Λ }
//! F_univ = { f ∈ F_ind : |wᵀuⱼ - 1| ≤ Δ for every universum feature uⱼ }
//! ```
//!
//! Both Monte-Carlo estimators draw the same Rademacher vectors for a given
//! seed, so their per-draw values can be compared directly.

use ndarray::{concatenate, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::seeded_rng;
use crate::error::{Error, Result};

/// Training features `z` (n × p) and universum features `u` (m × p).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBatch {
    z: Array2<f64>,
    u: Array2<f64>,
}

impl FeatureBatch {
    pub fn new(z: Array2<f64>, u: Array2<f64>) -> Result<Self> {
        if z.nrows() == 0 || u.nrows() == 0 {
            return Err(Error::InvalidParameter(
                "feature batch needs at least one training and one universum row".into(),
            ));
        }
        if z.ncols() != u.ncols() {
            return Err(Error::DimensionMismatch {
                expected: z.ncols(),
                found: u.ncols(),
            });
        }
        if z.iter().chain(u.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature batch".into()));
        }
        Ok(Self { z, u })
    }

    pub fn z(&self) -> &Array2<f64> {
        &self.z
    }

    pub fn u(&self) -> &Array2<f64> {
        &self.u
    }
}

/// Weight-norm budget `Λ` and universum band half-width `Δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassBudget {
    pub lambda_cap: f64,
    pub delta: f64,
}

impl ClassBudget {
    pub fn new(lambda_cap: f64, delta: f64) -> Result<Self> {
        let b = Self { lambda_cap, delta };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_cap > 0.0) || !self.lambda_cap.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda_cap must be positive and finite, got {}",
                self.lambda_cap
            )));
        }
        if !(self.delta >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "delta must be non-negative, got {}",
                self.delta
            )));
        }
        Ok(())
    }
}

/// Stacks `u` on top of `-u`.
pub fn build_v_matrix(u: &ArrayView2<f64>) -> Result<Array2<f64>> {
    if u.nrows() == 0 {
        return Err(Error::InvalidParameter("universum matrix has no rows".into()));
    }
    let neg = u.mapv(|v| -v);
    Ok(concatenate![Axis(0), *u, neg])
}

/// Monte-Carlo mean with its standard error and the individual draws.
#[derive(Debug, Clone, PartialEq)]
pub struct ErcEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub per_draw: Vec<f64>,
}

impl ErcEstimate {
    fn from_draws(per_draw: Vec<f64>) -> Self {
        let k = per_draw.len() as f64;
        let mean = per_draw.iter().sum::<f64>() / k;
        let var = per_draw.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
        Self {
            estimate: mean,
            stderr: (var / k).sqrt(),
            per_draw,
        }
    }
}

pub const DEFAULT_DRAWS: usize = 200;

fn rademacher_draws(n: usize, draws: usize, seed: u64) -> Vec<Array1<f64>> {
    let mut rng = seeded_rng(seed);
    (0..draws)
        .map(|_| Array1::from_shape_fn(n, |_| if rng.random::<bool>() { 1.0 } else { -1.0 }))
        .collect()
}

fn check_draws(draws: usize) -> Result<()> {
    if draws < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 draws, got {draws}")));
    }
    Ok(())
}

/// `(2/n) Zᵀσ`, the linear functional whose sup over the class is taken.
fn correlation_direction(z: &ArrayView2<f64>, sigma: &Array1<f64>) -> Array1<f64> {
    z.t().dot(sigma) * (2.0 / z.nrows() as f64)
}

/// Per draw the sup over the ball is `(2/n) Λ ‖Σσᵢzᵢ‖`.
pub fn erc_monte_carlo_ind(
    z: &ArrayView2<f64>,
    budget: &ClassBudget,
    draws: usize,
    seed: u64,
) -> Result<ErcEstimate> {
    budget.validate()?;
    check_draws(draws)?;
    if z.nrows() == 0 {
        return Err(Error::InvalidParameter("no training features".into()));
    }
    let per_draw = rademacher_draws(z.nrows(), draws, seed)
        .iter()
        .map(|s| {
            let g = correlation_direction(z, s);
            budget.lambda_cap * g.dot(&g).sqrt()
        })
        .collect();
    Ok(ErcEstimate::from_draws(per_draw))
}

/// Projector onto `{w : ‖w‖ ≤ Λ} ∩ {w : |wᵀuⱼ - 1| ≤ Δ ∀j}`.
struct Feasible<'a> {
    u: ArrayView2<'a, f64>,
    u_sq: Vec<f64>,
    lambda_cap: f64,
    lo: f64,
    hi: f64,
}

const DYKSTRA_CYCLES: usize = 5000;
const DYKSTRA_TOL: f64 = 1e-13;

impl<'a> Feasible<'a> {
    fn new(u: ArrayView2<'a, f64>, budget: &ClassBudget) -> Self {
        let u_sq = u.rows().into_iter().map(|r| r.dot(&r)).collect();
        Self {
            u,
            u_sq,
            lambda_cap: budget.lambda_cap,
            lo: 1.0 - budget.delta,
            hi: 1.0 + budget.delta,
        }
    }

    fn project_ball(&self, w: &mut Array1<f64>) {
        let norm = w.dot(w).sqrt();
        if norm > self.lambda_cap {
            *w *= self.lambda_cap / norm;
        }
    }

    fn project_slab(&self, j: usize, w: &mut Array1<f64>) {
        if self.u_sq[j] == 0.0 {
            return;
        }
        let uj = self.u.row(j);
        let s = w.dot(&uj);
        let target = s.clamp(self.lo, self.hi);
        if target != s {
            w.scaled_add((target - s) / self.u_sq[j], &uj);
        }
    }

    /// Dykstra's alternating projections, ball first when `with_ball`.
    fn project(&self, y: &Array1<f64>, with_ball: bool) -> Array1<f64> {
        let sets = self.u.nrows() + usize::from(with_ball);
        let mut x = y.clone();
        let mut incr = vec![Array1::<f64>::zeros(y.len()); sets];
        for _ in 0..DYKSTRA_CYCLES {
            // x can sit still for a whole cycle while the corrections move.
            let mut moved = 0.0f64;
            for (k, p) in incr.iter_mut().enumerate() {
                let mut t = &x + &*p;
                if with_ball && k == 0 {
                    self.project_ball(&mut t);
                } else {
                    self.project_slab(k - usize::from(with_ball), &mut t);
                }
                let next = &x + &*p - &t;
                moved = (&next - &*p).iter().chain((&t - &x).iter()).fold(moved, |a, v| a.max(v.abs()));
                *p = next;
                x = t;
            }
            if moved <= DYKSTRA_TOL * (1.0 + self.lambda_cap) {
                break;
            }
        }
        x
    }

    fn slab_violation(&self, j: usize, w: &ArrayView1<f64>) -> f64 {
        let s = w.dot(&self.u.row(j));
        (self.lo - s).max(s - self.hi).max(0.0)
    }

    fn worst_slab(&self, w: &ArrayView1<f64>) -> (usize, f64) {
        (0..self.u.nrows())
            .map(|j| (j, self.slab_violation(j, w)))
            .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a })
    }

    /// A feasible point, or the most violated slab.
    fn feasible_point(&self, p: usize) -> Result<Array1<f64>> {
        let w = self.project(&Array1::zeros(p), false);
        let (slab, violation) = self.worst_slab(&w.view());
        let tol = 1e-7 * (1.0 + self.lo.abs().max(self.hi.abs()));
        if violation > tol {
            return Err(Error::Infeasible { slab, violation });
        }
        // w is the minimum-norm slab point; outside the ball means empty.
        if w.dot(&w).sqrt() > self.lambda_cap * (1.0 + 1e-9) {
            // Prefer a slab that on its own lies beyond the ball.
            let reach = (0..self.u.nrows())
                .filter(|&j| self.u_sq[j] > 0.0)
                .map(|j| (j, self.lo.max(-self.hi).max(0.0) / self.u_sq[j].sqrt()))
                .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
            if reach.1 > self.lambda_cap {
                let mut closest = self.u.row(reach.0).to_owned();
                closest *= self.lambda_cap / self.u_sq[reach.0].sqrt();
                return Err(Error::Infeasible {
                    slab: reach.0,
                    violation: self.slab_violation(reach.0, &closest.view()),
                });
            }
            let mut scaled = w.clone();
            self.project_ball(&mut scaled);
            let (slab, violation) = self.worst_slab(&scaled.view());
            return Err(Error::Infeasible { slab, violation });
        }
        let mut w = w;
        self.project_ball(&mut w);
        Ok(w)
    }
}

const ASCENT_ITERATIONS: usize = 500;
const ASCENT_TOL: f64 = 1e-8;

/// Projected gradient ascent of `gᵀw` over the feasible set.
fn ascend(set: &Feasible, g: &Array1<f64>, start: &Array1<f64>) -> f64 {
    let gnorm = g.dot(g).sqrt();
    if gnorm == 0.0 {
        return 0.0;
    }
    let step = set.lambda_cap / gnorm;
    let mut w = start.clone();
    let mut value = g.dot(&w);
    for _ in 0..ASCENT_ITERATIONS {
        let y = &w + &(g * step);
        w = set.project(&y, true);
        let next = g.dot(&w);
        let done = (next - value).abs() <= ASCENT_TOL * value.abs().max(1.0);
        value = next;
        if done {
            break;
        }
    }
    // Keeps the reported point inside the ball exactly.
    set.project_ball(&mut w);
    g.dot(&w)
}

/// Per draw: `sup |(2/n) σᵀZw|` over the ball ∩ slab set, taken as the larger
/// of the two signed maximizations.
pub fn erc_monte_carlo_univ(
    batch: &FeatureBatch,
    budget: &ClassBudget,
    draws: usize,
    seed: u64,
) -> Result<ErcEstimate> {
    budget.validate()?;
    check_draws(draws)?;
    let z = batch.z.view();
    let set = Feasible::new(batch.u.view(), budget);
    let start = set.feasible_point(z.ncols())?;
    let sigmas = rademacher_draws(z.nrows(), draws, seed);
    let per_draw = sigmas
        .par_iter()
        .map(|s| {
            let g = correlation_direction(&z, s);
            let up = ascend(&set, &g, &start);
            let down = ascend(&set, &(-&g), &start);
            up.max(down).max(0.0)
        })
        .collect();
    Ok(ErcEstimate::from_draws(per_draw))
}

/// `(2Λ/n) √(Σ‖zᵢ‖²)`.
pub fn erc_bound_ind(z: &ArrayView2<f64>, budget: &ClassBudget) -> Result<f64> {
    budget.validate()?;
    let n = z.nrows();
    if n == 0 {
        return Err(Error::InvalidParameter("no training features".into()));
    }
    let sz: f64 = z.iter().map(|v| v * v).sum();
    Ok(2.0 * budget.lambda_cap / n as f64 * sz.sqrt())
}

/// `√(1 + 2γm(Δ² + 1)/Λ²)`.
pub fn k_gamma(gamma: f64, m: usize, delta: f64, lambda_cap: f64) -> f64 {
    (1.0 + 2.0 * gamma * m as f64 * (delta * delta + 1.0) / (lambda_cap * lambda_cap)).sqrt()
}

/// `tr(VZᵀZVᵀ) = 2 Σᵢⱼ (zᵢᵀuⱼ)²`, `tr(ZᵀZ)` and `tr(VVᵀ) = 2 Σ‖uⱼ‖²`.
fn traces(batch: &FeatureBatch) -> (f64, f64, f64) {
    let cross = batch.z.dot(&batch.u.t());
    let vzzv = 2.0 * cross.iter().map(|v| v * v).sum::<f64>();
    let zz = batch.z.iter().map(|v| v * v).sum::<f64>();
    let vv = 2.0 * batch.u.iter().map(|v| v * v).sum::<f64>();
    (vzzv, zz, vv)
}

/// `γ tr(VZᵀZVᵀ) / (tr(ZᵀZ) tr(I + γVVᵀ))` with `I` of size 2m.
pub fn sigma_gamma(gamma: f64, batch: &FeatureBatch) -> Result<f64> {
    if !(gamma >= 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be non-negative, got {gamma}")));
    }
    let (vzzv, zz, vv) = traces(batch);
    if zz == 0.0 {
        return Err(Error::UndefinedCorrelation("training features have zero trace".into()));
    }
    if gamma == 0.0 {
        return Ok(0.0);
    }
    if gamma.is_infinite() {
        return sigma_inf(batch);
    }
    let m2 = 2.0 * batch.u.nrows() as f64;
    Ok(gamma * vzzv / (zz * (m2 + gamma * vv)))
}

/// `tr(VZᵀZVᵀ) / (tr(ZᵀZ) tr(VVᵀ))`, the `γ → ∞` limit.
pub fn sigma_inf(batch: &FeatureBatch) -> Result<f64> {
    let (vzzv, zz, vv) = traces(batch);
    if zz == 0.0 || vv == 0.0 {
        return Err(Error::UndefinedCorrelation(
            "training or universum features have zero trace".into(),
        ));
    }
    Ok(vzzv / (zz * vv))
}

/// `{0} ∪ logspace(1e-6, 1e6, 49)`.
pub fn default_gamma_grid() -> Vec<f64> {
    let mut grid = vec![0.0];
    grid.extend((0..49).map(|k| 10f64.powf(-6.0 + 12.0 * k as f64 / 48.0)));
    grid
}

/// Minimum over the grid of `b.i · K(γ) √(1 - Σ(γ))`; points with
/// `Σ(γ) > 1` are skipped. Returns the bound and its minimizing `γ`.
pub fn erc_bound_univ(batch: &FeatureBatch, budget: &ClassBudget, gamma_grid: &[f64]) -> Result<(f64, f64)> {
    if !gamma_grid.contains(&0.0) {
        return Err(Error::InvalidParameter("gamma grid must contain 0".into()));
    }
    if gamma_grid.iter().any(|g| !(*g >= 0.0)) {
        return Err(Error::InvalidParameter("gamma grid entries must be non-negative".into()));
    }
    let bi = erc_bound_ind(&batch.z.view(), budget)?;
    if batch.z.iter().all(|v| *v == 0.0) {
        return Ok((bi, 0.0));
    }
    let m = batch.u.nrows();
    let mut best = (bi, 0.0);
    for &g in gamma_grid.iter().filter(|g| g.is_finite() && **g > 0.0) {
        let s = sigma_gamma(g, batch)?;
        if s > 1.0 {
            continue;
        }
        let value = bi * k_gamma(g, m, budget.delta, budget.lambda_cap) * (1.0 - s).sqrt();
        if value < best.0 {
            best = (value, g);
        }
    }
    Ok(best)
}

/// `Σξ/(κn) + (2/κ) erc + 3 √(ln(2/η)/(2n))`.
pub fn theorem1_rhs(xi: &[f64], erc: f64, kappa: f64, eta: f64, n: usize) -> Result<f64> {
    if !(kappa > 0.0) {
        return Err(Error::InvalidParameter(format!("kappa must be positive, got {kappa}")));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidParameter(format!("eta must lie in (0, 1), got {eta}")));
    }
    if n == 0 || xi.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: xi.len(),
        });
    }
    if xi.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidParameter("slacks must be non-negative".into()));
    }
    let nf = n as f64;
    Ok(xi.iter().sum::<f64>() / (kappa * nf)
        + 2.0 / kappa * erc
        + 3.0 * ((2.0 / eta).ln() / (2.0 * nf)).sqrt())
}

/// Inputs of the generalization bound evaluated alongside the ERC terms.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskBoundInputs {
    pub xi: Vec<f64>,
    pub kappa: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub lambda_cap: f64,
    pub delta: f64,
    pub draws: usize,
    pub erc_ind_mc: f64,
    pub erc_ind_stderr: f64,
    /// Absent when the universum class is empty.
    pub erc_univ_mc: Option<f64>,
    pub erc_univ_stderr: Option<f64>,
    pub univ_infeasible: Option<String>,
    pub bound_bi: f64,
    pub bound_bii: f64,
    pub gamma_star: f64,
    pub sigma_gamma_curve: Vec<(f64, f64)>,
    pub sigma_inf: f64,
    /// Uses the closed-form universum bound as the complexity term.
    pub theorem1_rhs: Option<f64>,
}

/// Every bound quantity for one feature batch. An empty universum class is
/// recorded in the report rather than failing the whole computation.
pub fn bound_report(
    batch: &FeatureBatch,
    budget: &ClassBudget,
    gamma_grid: &[f64],
    draws: usize,
    seed: u64,
    risk: Option<&RiskBoundInputs>,
) -> Result<BoundReport> {
    let ind = erc_monte_carlo_ind(&batch.z.view(), budget, draws, seed)?;
    let (erc_univ_mc, erc_univ_stderr, univ_infeasible) = match erc_monte_carlo_univ(batch, budget, draws, seed) {
        Ok(e) => (Some(e.estimate), Some(e.stderr), None),
        Err(e @ Error::Infeasible { .. }) => (None, None, Some(e.to_string())),
        Err(e) => return Err(e),
    };
    let bound_bi = erc_bound_ind(&batch.z.view(), budget)?;
    let (bound_bii, gamma_star) = erc_bound_univ(batch, budget, gamma_grid)?;
    let sigma_gamma_curve = gamma_grid
        .iter()
        .map(|&g| sigma_gamma(g, batch).map(|s| (g, s)))
        .collect::<Result<Vec<_>>>()?;
    let theorem1_rhs = risk
        .map(|t| theorem1_rhs(&t.xi, bound_bii, t.kappa, t.eta, t.xi.len()))
        .transpose()?;
    Ok(BoundReport {
        lambda_cap: budget.lambda_cap,
        delta: budget.delta,
        draws,
        erc_ind_mc: ind.estimate,
        erc_ind_stderr: ind.stderr,
        erc_univ_mc,
        erc_univ_stderr,
        univ_infeasible,
        bound_bi,
        bound_bii,
        gamma_star,
        sigma_gamma_curve,
        sigma_inf: sigma_inf(batch)?,
        theorem1_rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gauss(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = seeded_rng(seed);
        Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(&mut rng))
    }

    /// Universum rows rescaled so a known `w0` satisfies every slab.
    fn feasible_instance(n: usize, m: usize, p: usize, seed: u64) -> (FeatureBatch, ClassBudget, Array1<f64>) {
        let mut rng = seeded_rng(seed);
        let z = gauss(n, p, seed + 1);
        let w0 = Array1::from_shape_fn(p, |_| StandardNormal.sample(&mut rng));
        let mut u = gauss(m, p, seed + 2);
        let delta = rng.random_range(0.0..0.5);
        for mut r in u.rows_mut() {
            let s = r.dot(&w0);
            let target = 1.0 + rng.random_range(-delta..=delta);
            if s.abs() < 1e-3 {
                r.scaled_add(1.0, &w0);
            }
            let s = r.dot(&w0);
            r *= target / s;
        }
        let lam = w0.dot(&w0).sqrt() * rng.random_range(1.05..3.0);
        (FeatureBatch::new(z, u).unwrap(), ClassBudget::new(lam, delta).unwrap(), w0)
    }

    #[test]
    fn v_matrix_examples() {
        let v = build_v_matrix(&array![[1.0, 0.0]].view()).unwrap();
        assert_eq!(v, array![[1.0, 0.0], [-1.0, 0.0]]);
        let u = gauss(4, 3, 1);
        let v = build_v_matrix(&u.view()).unwrap();
        for i in 0..4 {
            assert!((&v.row(i) + &v.row(i + 4)).iter().all(|x| *x == 0.0));
        }
        let lhs = v.t().dot(&v);
        let rhs = u.t().dot(&u) * 2.0;
        for (a, b) in lhs.iter().zip(rhs.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(build_v_matrix(&Array2::<f64>::zeros((0, 2)).view()).is_err());
    }

    #[test]
    fn erc_single_point_is_exact() {
        let z = array![[3.0, 4.0]];
        let b = ClassBudget::new(2.0, 0.0).unwrap();
        let e = erc_monte_carlo_ind(&z.view(), &b, 50, 3).unwrap();
        assert_eq!(e.estimate, 20.0);
        assert_eq!(e.stderr, 0.0);
        assert_eq!(erc_bound_ind(&z.view(), &b).unwrap(), 20.0);
    }

    #[test]
    fn erc_zero_features() {
        let z = Array2::<f64>::zeros((5, 3));
        let b = ClassBudget::new(1.0, 0.0).unwrap();
        assert_eq!(erc_monte_carlo_ind(&z.view(), &b, 10, 0).unwrap().estimate, 0.0);
    }

    #[test]
    fn erc_ind_below_closed_form() {
        // Jensen: E‖Zᵀσ‖ ≤ √(E‖Zᵀσ‖²) = √(Σ‖zᵢ‖²).
        let mut rng = seeded_rng(4);
        for k in 0..100 {
            let n = rng.random_range(1..20);
            let p = rng.random_range(1..6);
            let z = gauss(n, p, 100 + k);
            let b = ClassBudget::new(rng.random_range(0.1..5.0), 0.0).unwrap();
            let e = erc_monte_carlo_ind(&z.view(), &b, 200, k).unwrap();
            let bound = erc_bound_ind(&z.view(), &b).unwrap();
            assert!(e.estimate <= bound + 3.0 * e.stderr + 1e-12);
        }
    }

    #[test]
    fn bound_ind_homogeneous() {
        let z = gauss(6, 3, 5);
        let b = ClassBudget::new(1.5, 0.0).unwrap();
        let base = erc_bound_ind(&z.view(), &b).unwrap();
        let scaled = erc_bound_ind(&(&z * 3.0).view(), &b).unwrap();
        assert!((scaled - 3.0 * base).abs() < 1e-12 * scaled);
    }

    #[test]
    fn k_gamma_examples() {
        assert_eq!(k_gamma(0.0, 5, 0.3, 2.0), 1.0);
        assert!((k_gamma(1.0, 2, 0.0, 1.0) - 5f64.sqrt()).abs() < 1e-15);
        let grid = default_gamma_grid();
        for w in grid.windows(2) {
            assert!(k_gamma(w[0], 3, 0.5, 2.0) <= k_gamma(w[1], 3, 0.5, 2.0));
        }
    }

    #[test]
    fn sigma_examples() {
        let b = FeatureBatch::new(array![[1.0, 0.0]], array![[1.0, 0.0]]).unwrap();
        assert_eq!(sigma_gamma(0.0, &b).unwrap(), 0.0);
        assert_eq!(sigma_inf(&b).unwrap(), 1.0);
        let orth = FeatureBatch::new(array![[1.0, 0.0], [2.0, 0.0]], array![[0.0, 3.0]]).unwrap();
        assert_eq!(sigma_inf(&orth).unwrap(), 0.0);
        let zero = FeatureBatch::new(array![[0.0, 0.0]], array![[0.0, 3.0]]).unwrap();
        assert!(matches!(sigma_gamma(1.0, &zero), Err(Error::UndefinedCorrelation(_))));
        assert!(matches!(sigma_inf(&zero), Err(Error::UndefinedCorrelation(_))));
    }

    #[test]
    fn traces_two_ways() {
        let batch = FeatureBatch::new(gauss(7, 4, 6), gauss(5, 4, 7)).unwrap();
        let v = build_v_matrix(&batch.u().view()).unwrap();
        let z = batch.z();
        let direct_vzzv = v.dot(&z.t()).dot(z).dot(&v.t()).diag().sum();
        let direct_zz = z.t().dot(z).diag().sum();
        let direct_vv = v.dot(&v.t()).diag().sum();
        let (vzzv, zz, vv) = traces(&batch);
        assert!((vzzv - direct_vzzv).abs() < 1e-10 * vzzv);
        assert!((zz - direct_zz).abs() < 1e-10 * zz);
        assert!((vv - direct_vv).abs() < 1e-10 * vv);
        // Σ(γ) from explicit matrices.
        let gamma = 0.7;
        let m2 = v.nrows();
        let tr_i = m2 as f64 + gamma * direct_vv;
        let explicit = gamma * direct_vzzv / (direct_zz * tr_i);
        assert!((sigma_gamma(gamma, &batch).unwrap() - explicit).abs() < 1e-10);
    }

    #[test]
    fn sigma_gamma_limit() {
        let batch = FeatureBatch::new(gauss(6, 3, 8), gauss(9, 3, 9)).unwrap();
        let a = sigma_gamma(1e12, &batch).unwrap();
        let b = sigma_inf(&batch).unwrap();
        assert!((a - b).abs() <= 1e-6 * b);
    }

    #[test]
    fn bound_univ_grid_zero_only() {
        let batch = FeatureBatch::new(gauss(6, 3, 10), gauss(4, 3, 11)).unwrap();
        let b = ClassBudget::new(2.0, 0.1).unwrap();
        let (v, g) = erc_bound_univ(&batch, &b, &[0.0]).unwrap();
        assert_eq!(v, erc_bound_ind(&batch.z().view(), &b).unwrap());
        assert_eq!(g, 0.0);
        assert!(erc_bound_univ(&batch, &b, &[1.0]).is_err());
    }

    #[test]
    fn bound_univ_tightens_with_correlated_universum() {
        // u close to z and a large budget make the derivative at γ = 0 negative.
        let z = gauss(10, 3, 12);
        let u = &z.slice(ndarray::s![..3, ..]) * 1.0 + gauss(3, 3, 13) * 0.01;
        let batch = FeatureBatch::new(z.clone(), u).unwrap();
        let b = ClassBudget::new(50.0, 0.0).unwrap();
        let bi = erc_bound_ind(&z.view(), &b).unwrap();
        let (bii, gstar) = erc_bound_univ(&batch, &b, &default_gamma_grid()).unwrap();
        assert!(gstar > 0.0);
        assert!(bii < bi);
        // Dense grid oracle lands near the default-grid minimum.
        let dense: Vec<f64> = std::iter::once(0.0)
            .chain((0..2000).map(|k| 10f64.powf(-6.0 + 12.0 * k as f64 / 1999.0)))
            .collect();
        let (dense_min, _) = erc_bound_univ(&batch, &b, &dense).unwrap();
        assert!(dense_min <= bii + 1e-12);
        assert!(bii <= dense_min * 1.05);
    }

    #[test]
    fn risk_bound_examples() {
        let eta = 2.0 / std::f64::consts::E.powi(2);
        let v = theorem1_rhs(&[0.0], 0.0, 1.0, eta, 1).unwrap();
        assert!((v - 3.0).abs() < 1e-12);
        assert!(theorem1_rhs(&[0.0], 0.0, 0.0, 0.5, 1).is_err());
        assert!(theorem1_rhs(&[0.0], 0.0, 1.0, 1.0, 1).is_err());
        assert!(theorem1_rhs(&[0.0], 0.0, 1.0, 0.0, 1).is_err());
        let mut prev = f64::INFINITY;
        for n in 1..50 {
            let v = theorem1_rhs(&vec![0.3; n], 0.2, 0.5, 0.1, n).unwrap();
            assert!(v <= prev);
            prev = v;
        }
        let xi = [0.1, 0.0, 0.7, 0.25];
        let (erc, kappa, eta) = (0.4, 0.8, 0.05);
        let a = xi.iter().sum::<f64>() / (kappa * 4.0);
        let b = 2.0 / kappa * erc;
        let c = 3.0 * ((2.0f64 / eta).ln() / 8.0).sqrt();
        assert!((theorem1_rhs(&xi, erc, kappa, eta, 4).unwrap() - (a + b + c)).abs() < 1e-14);
    }

    #[test]
    fn huge_delta_matches_inductive() {
        let batch = FeatureBatch::new(gauss(8, 3, 14), gauss(5, 3, 15)).unwrap();
        let b = ClassBudget::new(1.3, 1e9).unwrap();
        let ind = erc_monte_carlo_ind(&batch.z().view(), &b, 100, 2).unwrap();
        let univ = erc_monte_carlo_univ(&batch, &b, 100, 2).unwrap();
        for (a, u) in ind.per_draw.iter().zip(&univ.per_draw) {
            assert!((a - u).abs() <= 1e-9 * a.max(1.0));
        }
        let se = ind.stderr.max(univ.stderr);
        assert!((ind.estimate - univ.estimate).abs() <= 3.0 * se + 1e-9);
    }

    #[test]
    fn unique_feasible_point() {
        // u = e₁, e₂ with Δ = 0 leaves only w₀ = (1, 1).
        let z = array![[1.0, 2.0], [-0.5, 3.0], [2.0, -1.0]];
        let u = array![[1.0, 0.0], [0.0, 1.0]];
        let batch = FeatureBatch::new(z.clone(), u).unwrap();
        let b = ClassBudget::new(2.0, 0.0).unwrap();
        let est = erc_monte_carlo_univ(&batch, &b, 40, 5).unwrap();
        let w0 = array![1.0, 1.0];
        let sigmas = rademacher_draws(3, 40, 5);
        for (s, got) in sigmas.iter().zip(&est.per_draw) {
            let want = (2.0 / 3.0 * s.dot(&z.dot(&w0))).abs();
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
    }

    #[test]
    fn infeasible_names_slab() {
        // Second slab needs wᵀu = 1 with ‖u‖ tiny, far outside the ball.
        let batch = FeatureBatch::new(array![[1.0, 0.0]], array![[1.0, 0.0], [0.0, 0.01]]).unwrap();
        let b = ClassBudget::new(2.0, 0.0).unwrap();
        match erc_monte_carlo_univ(&batch, &b, 10, 0) {
            Err(Error::Infeasible { slab, violation }) => {
                assert_eq!(slab, 1);
                assert!(violation > 0.0);
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
        // Contradictory slabs.
        let batch = FeatureBatch::new(array![[1.0, 0.0]], array![[1.0, 0.0], [-1.0, 0.0]]).unwrap();
        assert!(matches!(
            erc_monte_carlo_univ(&batch, &b, 10, 0),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn per_draw_dominance() {
        for k in 0..20 {
            let (batch, b, _) = feasible_instance(12, 4, 3, 500 + k);
            let ind = erc_monte_carlo_ind(&batch.z().view(), &b, 50, k).unwrap();
            let univ = erc_monte_carlo_univ(&batch, &b, 50, k).unwrap();
            for (a, u) in ind.per_draw.iter().zip(&univ.per_draw) {
                assert!(*u <= a * (1.0 + 1e-12), "{u} > {a}");
            }
            let bi = erc_bound_ind(&batch.z().view(), &b).unwrap();
            let (bii, _) = erc_bound_univ(&batch, &b, &default_gamma_grid()).unwrap();
            assert!(bii <= bi + 1e-12);
        }
    }

    #[test]
    fn report_composes() {
        let (batch, b, _) = feasible_instance(10, 3, 3, 77);
        let t1 = RiskBoundInputs {
            xi: vec![0.1; 10],
            kappa: 1.0,
            eta: 0.05,
        };
        let grid = default_gamma_grid();
        let r = bound_report(&batch, &b, &grid, 30, 1, Some(&t1)).unwrap();
        assert_eq!(r.bound_bi, erc_bound_ind(&batch.z().view(), &b).unwrap());
        assert_eq!(r.sigma_gamma_curve.len(), grid.len());
        assert!(r.bound_bii <= r.bound_bi + 1e-12);
        assert!(r.erc_univ_mc.unwrap() <= r.erc_ind_mc * (1.0 + 1e-12));
        assert_eq!(
            r.theorem1_rhs.unwrap(),
            theorem1_rhs(&t1.xi, r.bound_bii, 1.0, 0.05, 10).unwrap()
        );
        let bad = FeatureBatch::new(array![[1.0, 0.0]], array![[1.0, 0.0], [-1.0, 0.0]]).unwrap();
        let r = bound_report(&bad, &b, &grid, 10, 0, None).unwrap();
        assert!(r.univ_infeasible.is_some() && r.erc_univ_mc.is_none());
    }

    proptest! {
        #[test]
        fn sigma_gamma_nonnegative_and_bounded(seed in 0u64..1000, gamma in 0.0f64..1e6) {
            let batch = FeatureBatch::new(gauss(4, 3, seed), gauss(3, 3, seed + 1)).unwrap();
            let s = sigma_gamma(gamma, &batch).unwrap();
            prop_assert!(s >= 0.0);
            prop_assert!(s <= sigma_inf(&batch).unwrap() + 1e-15);
            prop_assert!(sigma_inf(&batch).unwrap() <= 1.0 + 1e-15);
        }

        #[test]
        fn bound_bii_never_exceeds_bi(seed in 0u64..1000, lam in 0.1f64..100.0, delta in 0.0f64..2.0) {
            let batch = FeatureBatch::new(gauss(5, 3, seed), gauss(4, 3, seed + 1)).unwrap();
            let b = ClassBudget::new(lam, delta).unwrap();
            let (bii, _) = erc_bound_univ(&batch, &b, &default_gamma_grid()).unwrap();
            prop_assert!(bii <= erc_bound_ind(&batch.z().view(), &b).unwrap() + 1e-12);
        }
    }
}
