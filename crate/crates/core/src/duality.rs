//! Exact linear-kernel solvers connecting the one-class hinge problem
//!
//! ```text
//! min_w ½‖w‖² + C Σ [1 - wᵀzᵢ]₊
//! ```
//!
//! with the ν-SVM `min ½‖ŵ‖² + (1/(νn)) Σ ξᵢ - ρ`. Solving the first in the
//! dual gives `α`; with `δ = 1/Σα` the pair `(ŵ, ρ) = (δw, δ)` solves the
//! ν-SVM at `ν = 1/(Cnδ)`, and both rules share the boundary `wᵀx = 1`.

use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;

use crate::datasets::{seeded_rng, Dataset};
use crate::error::{Error, Result};

/// Solution of the hinge dual `max Σα - ½‖Σαᵢzᵢ‖²` over `[0, C]ⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Array1<f64>,
    /// Multipliers of `ξᵢ ≥ 0`, `βᵢ = C - αᵢ`.
    pub beta: Array1<f64>,
    pub w: Array1<f64>,
    /// Dual objective value.
    pub objective: f64,
    /// Primal hinge objective at `w`.
    pub primal_objective: f64,
    pub sweeps: usize,
}

impl DualSolution {
    pub fn gap(&self) -> f64 {
        self.primal_objective - self.objective
    }

    /// Number of `αᵢ` strictly inside `(0, C)`.
    pub fn free_count(&self, c: f64) -> usize {
        let tol = 1e-12 * c.max(1.0);
        self.alpha.iter().filter(|&&a| a > tol && a < c - tol).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualOptions {
    /// Seed of the fixed coordinate permutation.
    pub seed: u64,
    pub max_sweeps: usize,
    /// A sweep whose best single-coordinate improvement is below this ends
    /// the ascent.
    pub improvement_tol: f64,
    /// Required primal-dual gap on return.
    pub gap_tol: f64,
}

impl Default for DualOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            max_sweeps: 500_000,
            improvement_tol: 1e-12,
            gap_tol: 1e-6,
        }
    }
}

fn hinge_primal(w: &Array1<f64>, z: &ArrayView2<f64>, c: f64) -> f64 {
    let slack: f64 = z.rows().into_iter().map(|r| (1.0 - w.dot(&r)).max(0.0)).sum();
    0.5 * w.dot(w) + c * slack
}

pub fn solve_oneclass_dual(data: &Dataset, c: f64) -> Result<DualSolution> {
    solve_oneclass_dual_with(data, c, &DualOptions::default())
}

/// Cyclic coordinate ascent over a seeded fixed permutation. Each coordinate
/// step is the exact 1-D maximizer `αᵢ + (1 - wᵀzᵢ)/‖zᵢ‖²` clipped to `[0, C]`.
pub fn solve_oneclass_dual_with(data: &Dataset, c: f64, opts: &DualOptions) -> Result<DualSolution> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!("C must be positive, got {c}")));
    }
    let z = data.x().view();
    let (n, d) = z.dim();
    let sq: Vec<f64> = z.rows().into_iter().map(|r| r.dot(&r)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded_rng(opts.seed));

    let mut alpha = Array1::<f64>::zeros(n);
    let mut w = Array1::<f64>::zeros(d);
    let mut sweeps = 0;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let mut best = 0.0f64;
        for &i in &order {
            let zi = z.row(i);
            let g = 1.0 - w.dot(&zi);
            let target = if sq[i] > 0.0 { alpha[i] + g / sq[i] } else { c };
            let new = target.clamp(0.0, c);
            let step = new - alpha[i];
            if step != 0.0 {
                best = best.max(g * step - 0.5 * step * step * sq[i]);
                w.scaled_add(step, &zi);
                alpha[i] = new;
            }
        }
        if best < opts.improvement_tol {
            // Rebuild w to drop accumulated drift before certifying.
            w = z.t().dot(&alpha);
            let dual = alpha.sum() - 0.5 * w.dot(&w);
            if hinge_primal(&w, &z, c) - dual <= opts.gap_tol.min(1e-9) || best == 0.0 {
                break;
            }
        }
    }
    w = z.t().dot(&alpha);
    let objective = alpha.sum() - 0.5 * w.dot(&w);
    let primal_objective = hinge_primal(&w, &z, c);
    let gap = primal_objective - objective;
    if gap > opts.gap_tol {
        return Err(Error::NonConvergence { iterations: sweeps, gap });
    }
    let beta = alpha.mapv(|a| c - a);
    Ok(DualSolution {
        alpha,
        beta,
        w,
        objective,
        primal_objective,
        sweeps,
    })
}

/// Largest complementary-slackness product `|αᵢ(wᵀzᵢ - 1 + ξᵢ)|`,
/// `|βᵢξᵢ|` with `ξᵢ = [1 - wᵀzᵢ]₊`.
pub fn kkt_residual(sol: &DualSolution, data: &Dataset) -> f64 {
    let mut worst = 0.0f64;
    for (i, zi) in data.x().rows().into_iter().enumerate() {
        let s = sol.w.dot(&zi);
        let xi = (1.0 - s).max(0.0);
        worst = worst
            .max((sol.alpha[i] * (s - 1.0 + xi)).abs())
            .max((sol.beta[i] * xi).abs());
    }
    worst
}

/// Parameters of the equivalent ν-SVM solution.
#[derive(Debug, Clone, PartialEq)]
pub struct NuMapping {
    /// `δ = 1/Σα`.
    pub delta_scalar: f64,
    /// `ν = Σα/(Cn)`.
    pub nu: f64,
    /// `ρ = δ`.
    pub rho: f64,
    /// `ŵ = wδ`.
    pub w_hat: Array1<f64>,
}

pub fn map_to_nu(sol: &DualSolution, c: f64, n: usize) -> Result<NuMapping> {
    let sum: f64 = sol.alpha.sum();
    if !(sum > 0.0) {
        return Err(Error::DegenerateSolution(
            "all dual variables are zero (no support vectors)".into(),
        ));
    }
    if n == 0 || !(c > 0.0) {
        return Err(Error::InvalidParameter("need n > 0 and C > 0".into()));
    }
    let delta = 1.0 / sum;
    Ok(NuMapping {
        delta_scalar: delta,
        nu: sum / (c * n as f64),
        rho: delta,
        w_hat: &sol.w * delta,
    })
}

/// ν-SVM solution recovered from its dual.
#[derive(Debug, Clone, PartialEq)]
pub struct NuSvmSolution {
    pub alpha: Array1<f64>,
    pub w_hat: Array1<f64>,
    pub rho: f64,
    /// Set when no `αᵢ` lies strictly inside `(0, 1/(νn))`, so `ρ` came from
    /// the midpoint of the interval minimizing the primal in `ρ`.
    pub rho_flagged: bool,
    /// Every `ρ` in this interval is optimal for `ŵ`; a single point unless
    /// `rho_flagged`.
    pub rho_range: (f64, f64),
    /// Primal objective at `(ŵ, ρ)` minus the dual objective.
    pub gap: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuOptions {
    pub max_iterations: usize,
    pub gap_tol: f64,
}

impl Default for NuOptions {
    fn default() -> Self {
        Self {
            max_iterations: 2_000_000,
            gap_tol: 1e-8,
        }
    }
}

/// Euclidean projection onto `{α : 0 ≤ αᵢ ≤ ub, Σα = 1}`.
pub fn project_simplex_box(v: &ArrayView1<f64>, ub: f64) -> Array1<f64> {
    let n = v.len();
    let sum_at = |tau: f64| v.iter().map(|x| (x - tau).clamp(0.0, ub)).sum::<f64>();
    let vmax = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let vmin = v.iter().copied().fold(f64::INFINITY, f64::min);
    // sum_at(hi) = 0 and sum_at(lo) = n·ub ≥ 1.
    let (mut lo, mut hi) = (vmin - ub, vmax);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sum_at(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Exact solve on the active pattern found by bisection.
    let tau = 0.5 * (lo + hi);
    let (mut free_sum, mut free, mut upper) = (0.0, 0usize, 0usize);
    for &x in v.iter() {
        let t = x - tau;
        if t >= ub {
            upper += 1;
        } else if t > 0.0 {
            free += 1;
            free_sum += x;
        }
    }
    let tau = if free > 0 {
        (free_sum + ub * upper as f64 - 1.0) / free as f64
    } else {
        tau
    };
    let out = v.mapv(|x| (x - tau).clamp(0.0, ub));
    debug_assert_eq!(out.len(), n);
    out
}

/// Minimizer set of `g(ρ) = (1/(νn)) Σ [ρ - sᵢ]₊ - ρ` over the scores. The
/// upper end is infinite when `g` is flat to the right (`ν = 1`).
fn rho_interval(scores: &[f64], nu: f64) -> (f64, f64, f64) {
    let n = scores.len();
    let mut s = scores.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    let inv = 1.0 / (nu * n as f64);
    let mut prefix = 0.0;
    let mut values = Vec::with_capacity(n);
    for (k, &sk) in s.iter().enumerate() {
        values.push(inv * (k as f64 * sk - prefix) - sk);
        prefix += sk;
    }
    let best = values.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * (1.0 + best.abs());
    let lo_idx = values.iter().position(|&v| v <= best + tol).expect("non-empty");
    let hi_idx = values.iter().rposition(|&v| v <= best + tol).expect("non-empty");
    // Slope to the right of the largest score is 1/ν - 1; zero only at ν = 1.
    let hi = if hi_idx == n - 1 && inv * n as f64 - 1.0 <= 1e-12 {
        f64::INFINITY
    } else {
        s[hi_idx]
    };
    (best, s[lo_idx], hi)
}

fn nu_gap(w_hat: &Array1<f64>, scores: &[f64], nu: f64) -> f64 {
    let (g_min, _, _) = rho_interval(scores, nu);
    w_hat.dot(w_hat) + g_min
}

fn largest_eigenvalue_gram(z: &ArrayView2<f64>) -> f64 {
    // Power iteration on ZᵀZ (same non-zero spectrum as ZZᵀ).
    let d = z.ncols();
    let mut v = Array1::from_elem(d, 1.0 / (d as f64).sqrt());
    let mut lam = 0.0;
    for _ in 0..200 {
        let u = z.t().dot(&z.dot(&v));
        let norm = u.dot(&u).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        lam = v.dot(&u);
        v = u / norm;
    }
    let trace: f64 = z.iter().map(|x| x * x).sum();
    (lam * 1.01).min(trace).max(lam)
}

pub fn solve_nu_svm(data: &Dataset, nu: f64) -> Result<NuSvmSolution> {
    solve_nu_svm_with(data, nu, &NuOptions::default())
}

/// Projected gradient on `min ½αᵀKα` over the simplex-box with step `1/L`,
/// `L = λ_max(K)`.
pub fn solve_nu_svm_with(data: &Dataset, nu: f64, opts: &NuOptions) -> Result<NuSvmSolution> {
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(Error::InvalidParameter(format!("nu must lie in (0, 1], got {nu}")));
    }
    let z = data.x().view();
    let n = z.nrows();
    let ub = 1.0 / (nu * n as f64);
    let lip = largest_eigenvalue_gram(&z);
    let mut alpha = Array1::from_elem(n, 1.0 / n as f64);
    let mut w = z.t().dot(&alpha);
    let mut iterations = 0;
    if lip > 0.0 {
        let step = 1.0 / lip;
        while iterations < opts.max_iterations {
            iterations += 1;
            let grad = z.dot(&w);
            let next = project_simplex_box(&(&alpha - &(grad * step)).view(), ub);
            let moved = next
                .iter()
                .zip(alpha.iter())
                .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
            alpha = next;
            w = z.t().dot(&alpha);
            if iterations % 16 == 0 || moved == 0.0 {
                let scores: Vec<f64> = z.dot(&w).to_vec();
                let gap = nu_gap(&w, &scores, nu);
                if gap <= 1e-14 * (1.0 + w.dot(&w)) || moved == 0.0 {
                    break;
                }
            }
        }
    }
    let scores: Vec<f64> = z.dot(&w).to_vec();
    let gap = nu_gap(&w, &scores, nu);
    if gap > opts.gap_tol {
        return Err(Error::NonConvergence { iterations, gap });
    }

    let tol = 1e-9 * ub;
    let margin: Vec<f64> = alpha
        .iter()
        .zip(&scores)
        .filter(|(&a, _)| a > tol && a < ub - tol)
        .map(|(_, &s)| s)
        .collect();
    let (rho, rho_flagged, rho_range) = if margin.is_empty() {
        let (_, lo, hi) = rho_interval(&scores, nu);
        let rho = if hi.is_finite() { 0.5 * (lo + hi) } else { lo };
        (rho, true, (lo, hi))
    } else {
        let rho = margin.iter().sum::<f64>() / margin.len() as f64;
        (rho, false, (rho, rho))
    };
    Ok(NuSvmSolution {
        alpha,
        w_hat: w,
        rho,
        rho_flagged,
        rho_range,
        gap,
        iterations,
    })
}

/// Outcome of comparing `sign(wᵀx - 1)` with `sign(ŵᵀx - ρ)` on probes.
#[derive(Debug, Clone, PartialEq)]
pub struct CoincidenceReport {
    pub probes: usize,
    /// Probes within the tolerance of either boundary, not compared.
    pub near_boundary: usize,
    /// Indices of probes classified differently.
    pub disagreements: Vec<usize>,
}

pub const BOUNDARY_TOL: f64 = 1e-6;

pub fn verify_boundary_coincidence(
    w: &ArrayView1<f64>,
    w_hat: &ArrayView1<f64>,
    rho: f64,
    probes: &ArrayView2<f64>,
) -> Result<CoincidenceReport> {
    if probes.nrows() == 0 {
        return Err(Error::InvalidParameter("no probes".into()));
    }
    for len in [w.len(), w_hat.len()] {
        if len != probes.ncols() {
            return Err(Error::DimensionMismatch {
                expected: probes.ncols(),
                found: len,
            });
        }
    }
    let mut near = 0;
    let mut disagreements = Vec::new();
    for (i, x) in probes.rows().into_iter().enumerate() {
        let a = w.dot(&x) - 1.0;
        let b = w_hat.dot(&x) - rho;
        if a.abs() < BOUNDARY_TOL || b.abs() < BOUNDARY_TOL {
            near += 1;
        } else if (a > 0.0) != (b > 0.0) {
            disagreements.push(i);
        }
    }
    Ok(CoincidenceReport {
        probes: probes.nrows(),
        near_boundary: near,
        disagreements,
    })
}

/// Every number produced by the hinge → ν-SVM round trip.
#[derive(Debug, Clone, PartialEq)]
pub struct DualityCheck {
    pub c: f64,
    pub n: usize,
    pub hinge: DualSolution,
    pub hinge_gap: f64,
    pub kkt_residual: f64,
    pub mapping: NuMapping,
    pub nu_svm: NuSvmSolution,
    /// Offset used for the ν-SVM boundary. Equals `nu_svm.rho` unless `ρ` is
    /// not unique and the mapped `δ` lies in the optimal interval.
    pub rho_compared: f64,
    pub coincidence: CoincidenceReport,
}

impl DualityCheck {
    /// Whether the boundary comparison used an optimal ν-SVM offset: either
    /// `ρ` is unique, or the mapped `δ` is one of the optimal offsets.
    pub fn verifiable(&self) -> bool {
        !self.nu_svm.rho_flagged || rho_in_range(self.mapping.rho, self.nu_svm.rho_range)
    }
}

fn rho_in_range(rho: f64, (lo, hi): (f64, f64)) -> bool {
    rho >= lo - 1e-9 * (1.0 + lo.abs()) && rho <= hi + 1e-9 * (1.0 + hi.abs())
}

/// Runs hinge dual → ν mapping → ν-SVM → boundary comparison.
pub fn duality_pipeline(data: &Dataset, c: f64, probes: &ArrayView2<f64>) -> Result<DualityCheck> {
    let hinge = solve_oneclass_dual(data, c)?;
    let kkt = kkt_residual(&hinge, data);
    let mapping = map_to_nu(&hinge, c, data.len())?;
    let nu_svm = solve_nu_svm(data, mapping.nu.min(1.0))?;
    let rho_compared = if nu_svm.rho_flagged && rho_in_range(mapping.rho, nu_svm.rho_range) {
        mapping.rho
    } else {
        nu_svm.rho
    };
    let coincidence =
        verify_boundary_coincidence(&hinge.w.view(), &nu_svm.w_hat.view(), rho_compared, probes)?;
    Ok(DualityCheck {
        c,
        n: data.len(),
        hinge_gap: hinge.gap(),
        kkt_residual: kkt,
        hinge,
        mapping,
        nu_svm,
        rho_compared,
        coincidence,
    })
}
