use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rayon::prelude::*;

use super::config::Config;
use super::report::{
    CorrelationResult, DualityResult, Report, SweepPoint, SweepResult, SynthResult, TrainSummary,
};
use crate::complexity::{
    bound_report, default_gamma_grid, erc_bound_ind, theorem1_rhs, ClassBudget, FeatureBatch, RiskBoundInputs,
    DEFAULT_DRAWS,
};
use crate::datasets::{
    generate_gaussian, generate_noise_universum, load_csv, seeded_rng, write_csv_to, Dataset, GaussianSpec,
    LabeledTestSet, NoiseKind, UniversumSet,
};
use crate::duality::duality_pipeline;
use crate::error::{Error, Result};
use crate::evaluation::{correlation_diagnostic, evaluate, margin_slacks, roc_points, split_scores};
use crate::models::{decide, FeatureMapKind, FeatureMapSpec, Model, Score, DEFAULT_LEAKY_SLOPE};
use crate::training::{
    train, train_binary_baseline, Hyperparams, Objective, OptimizerKind, OptimizerSpec, TrainLoss, TrainTrace,
};

/// Files produced by a command, written only once everything succeeded.
pub(crate) struct Outputs {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub(crate) fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    fn add_csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let report = |e: csv::Error| Error::Report(e.to_string());
        w.write_record(header).map_err(report)?;
        for row in rows {
            w.write_record(row.iter().map(|v| format!("{v:?}"))).map_err(report)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Report(e.to_string()))?;
        self.add(name, bytes);
        Ok(())
    }

    fn add_matrix(&mut self, name: &str, x: &ArrayView2<f64>, labels: Option<&[i8]>) -> Result<()> {
        let mut buf = Vec::new();
        write_csv_to(&mut buf, x, labels)?;
        self.add(name, buf);
        Ok(())
    }

    pub(crate) fn names(&self) -> Vec<String> {
        self.files.iter().map(|(n, _)| n.clone()).collect()
    }

    pub(crate) fn commit(self, report: &Report) -> Result<()> {
        std::fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        for (name, bytes) in &self.files {
            let p = self.dir.join(name);
            std::fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
        }
        report.save(&self.dir.join("report.toml"))
    }
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    load_csv(path)?.into_dataset()
}

fn load_universum(path: &Path) -> Result<UniversumSet> {
    UniversumSet::new(load_dataset(path)?.into_inner())
}

fn load_test(path: &Path) -> Result<LabeledTestSet> {
    load_csv(path)?.into_labeled()
}

fn derive_seed(seed: u64, k: u64) -> u64 {
    seed.wrapping_mul(4).wrapping_add(k)
}

#[derive(Debug, Clone, PartialEq)]
pub enum UniversumSource {
    Gaussian { mu: Vec<f64>, sigma: Vec<f64>, count: usize },
    Noise { kind: NoiseKind, count: usize },
}

/// Synthetic normal/anomaly/universum setup.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub train_mu: Vec<f64>,
    pub train_sigma: Vec<f64>,
    pub train_count: usize,
    /// Normal-class test rows.
    pub test_count: usize,
    pub anomaly_mu: Vec<f64>,
    pub anomaly_sigma: Vec<f64>,
    pub anomaly_count: usize,
    pub universum: UniversumSource,
}

impl SynthSpec {
    /// Two-dimensional illustration: ten normal training points, a shifted
    /// anomaly class and a universum far along the second axis.
    pub fn paper_synthetic() -> Self {
        Self {
            train_mu: vec![1.0, 1.0],
            train_sigma: vec![0.25, 1.0],
            train_count: 10,
            test_count: 1000,
            anomaly_mu: vec![0.25, 1.0],
            anomaly_sigma: vec![0.25, 1.0],
            anomaly_count: 1000,
            universum: UniversumSource::Gaussian {
                mu: vec![0.75, 6.0],
                sigma: vec![0.25, 1.0],
                count: 1000,
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub train: Dataset,
    pub test: LabeledTestSet,
    pub universum: UniversumSet,
}

/// Draws every set from its own stream derived from `seed`.
pub fn synthesize(spec: &SynthSpec, seed: u64) -> Result<SynthData> {
    let gauss = |mu: &[f64], sigma: &[f64], count, k| {
        generate_gaussian(&GaussianSpec {
            mu: mu.to_vec(),
            sigma: sigma.to_vec(),
            count,
            seed: derive_seed(seed, k),
        })
    };
    let train = gauss(&spec.train_mu, &spec.train_sigma, spec.train_count, 0)?;
    let pos = gauss(&spec.train_mu, &spec.train_sigma, spec.test_count, 1)?;
    let neg = gauss(&spec.anomaly_mu, &spec.anomaly_sigma, spec.anomaly_count, 2)?;
    let test = LabeledTestSet::from_classes(pos.x(), neg.x())?;
    let universum = match &spec.universum {
        UniversumSource::Gaussian { mu, sigma, count } => {
            UniversumSet::paired(gauss(mu, sigma, *count, 3)?.into_inner(), &train)?
        }
        UniversumSource::Noise { kind, count } => {
            let u = generate_noise_universum(*count, train.dim(), *kind, derive_seed(seed, 3))?;
            UniversumSet::paired(u.x().clone(), &train)?
        }
    };
    Ok(SynthData { train, test, universum })
}

const SYNTH_KEYS: &[&str] = &[
    "synth.preset",
    "synth.train.mu",
    "synth.train.sigma",
    "synth.train.count",
    "synth.test.count",
    "synth.anomaly.mu",
    "synth.anomaly.sigma",
    "synth.anomaly.count",
    "synth.universum.kind",
    "synth.universum.mu",
    "synth.universum.sigma",
    "synth.universum.count",
];

fn synth_spec(cfg: &Config) -> Result<SynthSpec> {
    let mut spec = match cfg.str("synth.preset") {
        Some("paper-synthetic") => SynthSpec::paper_synthetic(),
        Some(other) => return Err(Error::Config(format!("unknown preset `{other}`"))),
        None => {
            let mu = cfg.list("synth.train.mu")?.ok_or_else(|| Error::Config(
                "set synth.preset or synth.train.mu".into(),
            ))?;
            SynthSpec {
                train_sigma: vec![1.0; mu.len()],
                anomaly_mu: mu.clone(),
                anomaly_sigma: vec![1.0; mu.len()],
                universum: UniversumSource::Noise {
                    kind: NoiseKind::Gaussian01,
                    count: 100,
                },
                train_mu: mu,
                train_count: 10,
                test_count: 100,
                anomaly_count: 100,
            }
        }
    };
    if let Some(v) = cfg.list("synth.train.mu")? {
        spec.train_mu = v;
    }
    if let Some(v) = cfg.list("synth.train.sigma")? {
        spec.train_sigma = v;
    }
    spec.train_count = cfg.get_or("synth.train.count", spec.train_count)?;
    spec.test_count = cfg.get_or("synth.test.count", spec.test_count)?;
    if let Some(v) = cfg.list("synth.anomaly.mu")? {
        spec.anomaly_mu = v;
    }
    if let Some(v) = cfg.list("synth.anomaly.sigma")? {
        spec.anomaly_sigma = v;
    }
    spec.anomaly_count = cfg.get_or("synth.anomaly.count", spec.anomaly_count)?;
    let (old_mu, old_sigma, old_count) = match &spec.universum {
        UniversumSource::Gaussian { mu, sigma, count } => (Some(mu.clone()), Some(sigma.clone()), *count),
        UniversumSource::Noise { count, .. } => (None, None, *count),
    };
    let count = cfg.get_or("synth.universum.count", old_count)?;
    let kind = cfg.str("synth.universum.kind").map(str::to_string).unwrap_or_else(|| {
        match spec.universum {
            UniversumSource::Gaussian { .. } => "gaussian".into(),
            UniversumSource::Noise { kind: NoiseKind::Gaussian01, .. } => "gaussian01".into(),
            UniversumSource::Noise { kind: NoiseKind::Uniform01, .. } => "uniform01".into(),
        }
    });
    spec.universum = if kind == "gaussian" {
        let mu = cfg.list("synth.universum.mu")?.or(old_mu).ok_or_else(|| {
            Error::Config("gaussian universum needs synth.universum.mu".into())
        })?;
        let sigma = cfg
            .list("synth.universum.sigma")?
            .or(old_sigma)
            .unwrap_or_else(|| vec![1.0; mu.len()]);
        UniversumSource::Gaussian { mu, sigma, count }
    } else {
        let kind: NoiseKind = kind
            .parse()
            .map_err(|_| Error::Config(format!("synth.universum.kind: unknown `{kind}`")))?;
        UniversumSource::Noise { kind, count }
    };
    validate_synth(&spec)?;
    Ok(spec)
}

fn validate_synth(spec: &SynthSpec) -> Result<()> {
    let check = |mu: &[f64], sigma: &[f64], count| {
        GaussianSpec {
            mu: mu.to_vec(),
            sigma: sigma.to_vec(),
            count,
            seed: 0,
        }
        .validate()
    };
    check(&spec.train_mu, &spec.train_sigma, spec.train_count)?;
    check(&spec.train_mu, &spec.train_sigma, spec.test_count)?;
    check(&spec.anomaly_mu, &spec.anomaly_sigma, spec.anomaly_count)?;
    let d = spec.train_mu.len();
    let ud = match &spec.universum {
        UniversumSource::Gaussian { mu, sigma, count } => {
            check(mu, sigma, *count)?;
            mu.len()
        }
        UniversumSource::Noise { count, .. } => {
            if *count == 0 {
                return Err(Error::InvalidSpec("universum count must be positive".into()));
            }
            d
        }
    };
    if spec.anomaly_mu.len() != d || ud != d {
        return Err(Error::InvalidSpec("all classes must share the input dimension".into()));
    }
    Ok(())
}

pub(crate) fn cmd_synth(cfg: &Config, seed: u64, report: &mut Report, out: &mut Outputs) -> Result<()> {
    cfg.check_known(SYNTH_KEYS)?;
    let spec = synth_spec(cfg)?;
    let data = synthesize(&spec, seed)?;
    out.add_matrix("train.csv", &data.train.x().view(), None)?;
    out.add_matrix("test.csv", &data.test.x().view(), Some(data.test.y()))?;
    out.add_matrix("universum.csv", &data.universum.x().view(), None)?;
    report.results.synth = Some(SynthResult {
        train_rows: data.train.len(),
        test_rows: data.test.len(),
        universum_rows: data.universum.len(),
        files: out.names(),
    });
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyForm {
    /// `C` multiplies loss sums: `½‖w‖² + C Σ L_T + C_U Σ L_U`.
    Sum,
    /// `C` and `C_U` are used directly in the averaged objective.
    Mean,
}

const TRAIN_KEYS: &[&str] = &[
    "data.train",
    "data.universum",
    "train.objective",
    "train.form",
    "train.c",
    "train.c_u",
    "train.delta",
    "train.cost_ratio",
    "train.loss",
    "train.optimizer",
    "train.learning_rate",
    "train.iterations",
    "train.batch_train",
    "train.batch_univ",
    "model.kind",
    "model.widths",
    "model.leaky_slope",
    "model.seed",
];

/// A validated training setup with its data already loaded.
#[derive(Debug, Clone)]
pub struct TrainPlan {
    pub objective: Objective,
    pub form: PenaltyForm,
    pub c: f64,
    pub c_u: f64,
    pub delta: f64,
    pub base: Hyperparams,
    pub spec: FeatureMapSpec,
    pub train: Dataset,
    pub univ: Option<UniversumSet>,
    pub warnings: Vec<String>,
}

impl TrainPlan {
    pub fn from_config(cfg: &Config, seed: u64) -> Result<Self> {
        let objective: Objective = cfg.get_or("train.objective", Objective::Doc)?;
        let form = match cfg.str("train.form").unwrap_or("sum") {
            "sum" => PenaltyForm::Sum,
            "mean" => PenaltyForm::Mean,
            other => return Err(Error::Config(format!("train.form: expected sum or mean, got `{other}`"))),
        };
        let mut warnings = Vec::new();
        let c: f64 = cfg.get_or("train.c", 1.0)?;
        let mut c_u: f64 = cfg.get_or("train.c_u", 0.0)?;
        match objective {
            Objective::Doc if c_u != 0.0 => {
                warnings.push(format!("train.c_u = {c_u} ignored for objective doc"));
                c_u = 0.0;
            }
            Objective::Doc3 if !(c_u > 0.0) => {
                return Err(Error::Config("objective doc3 needs train.c_u > 0".into()));
            }
            _ => {}
        }
        let needs_univ = matches!(objective, Objective::Doc3 | Objective::Binary);
        let univ_path = cfg.path("data.universum");
        if needs_univ && univ_path.is_none() {
            return Err(Error::Config(format!(
                "objective {} needs data.universum",
                objective.as_str()
            )));
        }
        let kind: FeatureMapKind = cfg.get_or("model.kind", FeatureMapKind::Identity)?;
        let spec = FeatureMapSpec {
            kind,
            layer_widths: cfg.list("model.widths")?.unwrap_or_default(),
            leaky_slope: cfg.get_or("model.leaky_slope", DEFAULT_LEAKY_SLOPE)?,
            seed: cfg.get_or("model.seed", seed)?,
        };
        spec.validate()?;
        let optimizer_kind: OptimizerKind = cfg.get_or("train.optimizer", OptimizerKind::Adam)?;
        let lr = cfg.get_or("train.learning_rate", 0.01)?;
        let optimizer = match optimizer_kind {
            OptimizerKind::Adam => OptimizerSpec::adam(lr),
            OptimizerKind::Sgd => OptimizerSpec::sgd(lr),
        };
        let base = Hyperparams {
            delta: cfg.get_or("train.delta", 0.0)?,
            cost_ratio: cfg.get_or("train.cost_ratio", 1.0)?,
            train_loss: cfg.get_or("train.loss", TrainLoss::Hinge)?,
            optimizer,
            iterations: cfg.get_or("train.iterations", 2000)?,
            seed,
            ..Hyperparams::default()
        };
        let batch_train: Option<usize> = cfg.get("train.batch_train")?;
        let batch_univ: Option<usize> = cfg.get("train.batch_univ")?;
        // Validate the numeric settings before touching any data file.
        if !(c > 0.0 && c.is_finite()) || !(c_u >= 0.0 && c_u.is_finite()) {
            return Err(Error::InvalidParameter(format!("need C > 0 and C_U >= 0, got {c} and {c_u}")));
        }
        let mut probe = base.clone();
        probe.c = 1.0;
        probe.validate()?;
        if batch_train == Some(0) || batch_univ == Some(0) {
            return Err(Error::InvalidParameter("batch sizes must be positive".into()));
        }

        let train_data = load_dataset(&cfg.require_path("data.train")?)?;
        let univ = match (&univ_path, needs_univ) {
            (Some(p), true) => Some(UniversumSet::paired(load_universum(p)?.x().clone(), &train_data)?),
            (Some(_), false) => {
                warnings.push("data.universum unused by objective doc".into());
                None
            }
            (None, _) => None,
        };
        let mut base = base;
        base.batch_train = batch_train.unwrap_or(train_data.len());
        base.batch_univ = batch_univ.unwrap_or(univ.as_ref().map_or(1, |u| u.len()));
        let plan = Self {
            objective,
            form,
            c,
            c_u,
            delta: base.delta,
            base,
            spec,
            train: train_data,
            univ,
            warnings,
        };
        plan.hyperparams(c, c_u, plan.delta, seed)?.validate()?;
        Ok(plan)
    }

    /// Hyperparameters of the averaged objective for one `(C, C_U, Δ)`.
    pub fn hyperparams(&self, c: f64, c_u: f64, delta: f64, seed: u64) -> Result<Hyperparams> {
        let n = self.train.len();
        let m = self.univ.as_ref().map_or(0, |u| u.len());
        let mut hp = self.base.clone();
        hp.delta = delta;
        hp.seed = seed;
        let c_u = if self.objective == Objective::Doc { 0.0 } else { c_u };
        match (self.form, self.objective) {
            (PenaltyForm::Mean, _) => {
                hp.c = c;
                hp.c_u = c_u;
            }
            (PenaltyForm::Sum, Objective::Binary) => {
                let mapped = Hyperparams::binary_from_svm_scale(c, hp.cost_ratio, n, m);
                hp.c = mapped.c;
                hp.c_u = 0.0;
            }
            (PenaltyForm::Sum, _) => {
                let mapped = Hyperparams::from_svm_scale(c, c_u, n, m);
                hp.c = mapped.c;
                hp.c_u = mapped.c_u;
            }
        }
        hp.validate()?;
        Ok(hp)
    }

    pub fn run(&self, c: f64, c_u: f64, delta: f64, seed: u64) -> Result<TrainTrace> {
        let hp = self.hyperparams(c, c_u, delta, seed)?;
        let spec = self.spec.clone();
        match self.objective {
            Objective::Binary => {
                let neg = self.univ.as_ref().expect("checked in from_config");
                train_binary_baseline(&self.train, neg, &hp, spec)
            }
            Objective::Doc => train(&self.train, None, &hp, spec),
            Objective::Doc3 => train(&self.train, self.univ.as_ref(), &hp, spec),
        }
    }
}

fn summarize(trace: &TrainTrace) -> TrainSummary {
    let last = |v: &[f64]| v.last().copied().unwrap_or(0.0);
    TrainSummary {
        objective: trace.objective_kind.as_str().to_string(),
        c: trace.hyperparams.c,
        c_u: trace.hyperparams.c_u,
        lambda: trace.hyperparams.lambda(),
        iterations: trace.objective.len(),
        final_objective: trace.final_objective(),
        final_l_t: last(&trace.l_t),
        final_l_u: last(&trace.l_u),
        final_regularizer: last(&trace.regularizer),
        frobenius_sq: trace.model.frobenius_sq(),
        threshold: trace.model.threshold(),
    }
}

pub(crate) fn cmd_train(cfg: &Config, seed: u64, report: &mut Report, out: &mut Outputs) -> Result<()> {
    cfg.check_known(TRAIN_KEYS)?;
    let plan = TrainPlan::from_config(cfg, seed)?;
    report.warnings.extend(plan.warnings.iter().cloned());
    let trace = plan.run(plan.c, plan.c_u, plan.delta, seed)?;
    out.add("model.txt", trace.model.to_text().into_bytes());
    out.add_csv(
        "trace.csv",
        &["iteration", "objective", "l_t", "l_u", "regularizer"],
        (0..trace.objective.len()).map(|i| {
            vec![
                i as f64,
                trace.objective[i],
                trace.l_t[i],
                trace.l_u[i],
                trace.regularizer[i],
            ]
        }),
    )?;
    report.results.train = Some(summarize(&trace));
    Ok(())
}

const EVAL_KEYS: &[&str] = &[
    "data.model",
    "data.test",
    "data.train",
    "data.universum",
    "eval.grid_points",
];

/// Scores on a regular grid covering the test data, for 2-D inputs.
fn boundary_grid(model: &Model, x: &Array2<f64>, points: usize) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::with_capacity(points * points);
    let bounds: Vec<(f64, f64)> = (0..2)
        .map(|j| {
            let col = x.column(j);
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let pad = 0.1 * (hi - lo).max(1e-9);
            (lo - pad, hi + pad)
        })
        .collect();
    let step = |(lo, hi): (f64, f64), k: usize| lo + (hi - lo) * k as f64 / (points - 1) as f64;
    let grid = Array2::from_shape_fn((points * points, 2), |(r, j)| {
        let k = if j == 0 { r / points } else { r % points };
        step(bounds[j], k)
    });
    let s = model.scores(&grid.view())?;
    for (row, v) in grid.rows().into_iter().zip(s.iter()) {
        rows.push(vec![row[0], row[1], *v, decide(Score(*v), model.threshold()) as f64]);
    }
    Ok(rows)
}

pub(crate) fn cmd_eval(cfg: &Config, _seed: u64, report: &mut Report, out: &mut Outputs) -> Result<()> {
    cfg.check_known(EVAL_KEYS)?;
    let points: usize = cfg.get_or("eval.grid_points", 50)?;
    if points < 2 {
        return Err(Error::Config("eval.grid_points must be at least 2".into()));
    }
    let model_path = cfg.require_path("data.model")?;
    let test_path = cfg.require_path("data.test")?;
    let model = Model::load(&model_path)?;
    let test = load_test(&test_path)?;
    let train_data = cfg.path("data.train").map(|p| load_dataset(&p)).transpose()?;
    let univ = cfg.path("data.universum").map(|p| load_universum(&p)).transpose()?;
    let r = evaluate(&model, &test, univ.as_ref(), train_data.as_ref())?;
    let (pos, neg) = split_scores(&model, &test)?;
    out.add_csv(
        "roc.csv",
        &["fpr", "tpr"],
        roc_points(&pos, &neg)?.into_iter().map(|(f, t)| vec![f, t]),
    )?;
    if model.input_dim() == 2 {
        out.add_csv(
            "boundary.csv",
            &["x0", "x1", "score", "decision"],
            boundary_grid(&model, test.x(), points)?,
        )?;
    }
    report.results.eval = Some(r);
    Ok(())
}

const CORR_KEYS: &[&str] = &["data.model", "data.train", "data.universum"];

pub(crate) fn cmd_corr(cfg: &Config, _seed: u64, report: &mut Report, _out: &mut Outputs) -> Result<()> {
    cfg.check_known(CORR_KEYS)?;
    let model = Model::load(&cfg.require_path("data.model")?)?;
    let train_data = load_dataset(&cfg.require_path("data.train")?)?;
    let univ = load_universum(&cfg.require_path("data.universum")?)?;
    let (raw, features) = correlation_diagnostic(&model, &train_data, &univ)?;
    report.results.correlation = Some(CorrelationResult {
        sigma_inf_raw: raw,
        sigma_inf_features: features,
    });
    Ok(())
}

const BOUND_KEYS: &[&str] = &[
    "data.model",
    "data.train",
    "data.universum",
    "bound.kappa",
    "bound.eta",
    "bound.lambda_cap",
    "bound.delta",
    "bound.draws",
    "bound.gammas",
];

pub(crate) fn cmd_bound(cfg: &Config, seed: u64, report: &mut Report, out: &mut Outputs) -> Result<()> {
    cfg.check_known(BOUND_KEYS)?;
    let kappa: f64 = cfg.get_or("bound.kappa", 1.0)?;
    let eta: f64 = cfg.get_or("bound.eta", 0.05)?;
    let draws: usize = cfg.get_or("bound.draws", DEFAULT_DRAWS)?;
    let delta: f64 = cfg.get_or("bound.delta", 0.0)?;
    let cap: Option<f64> = cfg.get("bound.lambda_cap")?;
    let grid = cfg.list("bound.gammas")?.unwrap_or_else(default_gamma_grid);
    // Parameter checks that do not need the model.
    theorem1_rhs(&[0.0], 0.0, kappa, eta, 1)?;
    ClassBudget::new(cap.unwrap_or(1.0), delta)?;
    if draws < 2 {
        return Err(Error::Config("bound.draws must be at least 2".into()));
    }
    if !grid.contains(&0.0) {
        return Err(Error::Config("bound.gammas must contain 0".into()));
    }

    let model = Model::load(&cfg.require_path("data.model")?)?;
    let train_data = load_dataset(&cfg.require_path("data.train")?)?;
    let univ = load_universum(&cfg.require_path("data.universum")?)?;
    let lambda_cap = match cap {
        Some(v) => v,
        None => {
            report.warnings.push("bound.lambda_cap taken from the model's weight norm".into());
            model.frobenius_sq().sqrt()
        }
    };
    let budget = ClassBudget::new(lambda_cap, delta)?;
    let batch = FeatureBatch::new(
        model.features(&train_data.x().view())?,
        model.features(&univ.x().view())?,
    )?;
    let t1 = RiskBoundInputs {
        xi: margin_slacks(&model, &train_data)?,
        kappa,
        eta,
    };
    let r = bound_report(&batch, &budget, &grid, draws, seed, Some(&t1))?;
    if let Some(msg) = &r.univ_infeasible {
        report.warnings.push(format!("universum class empty: {msg}"));
    }
    out.add_csv(
        "sigma_gamma.csv",
        &["gamma", "sigma"],
        r.sigma_gamma_curve.iter().map(|(g, s)| vec![*g, *s]),
    )?;
    report.results.bound = Some(r);
    Ok(())
}

const DUALITY_KEYS: &[&str] = &["data.train", "duality.c", "duality.probes", "duality.probe_margin"];

pub(crate) fn cmd_duality(cfg: &Config, seed: u64, report: &mut Report, _out: &mut Outputs) -> Result<()> {
    cfg.check_known(DUALITY_KEYS)?;
    let c: f64 = cfg.get_or("duality.c", 1.0)?;
    let probes: usize = cfg.get_or("duality.probes", 10_000)?;
    let margin: f64 = cfg.get_or("duality.probe_margin", 0.5)?;
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::Config(format!("duality.c must be positive, got {c}")));
    }
    if probes == 0 || !(margin >= 0.0) {
        return Err(Error::Config("duality.probes must be positive and probe_margin >= 0".into()));
    }
    let data = load_dataset(&cfg.require_path("data.train")?)?;
    let x = data.x();
    let mut rng = seeded_rng(seed);
    let bounds: Vec<(f64, f64)> = x
        .columns()
        .into_iter()
        .map(|col| {
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let pad = margin * (hi - lo) + 1e-3;
            (lo - pad, hi + pad)
        })
        .collect();
    let p = Array2::from_shape_fn((probes, data.dim()), |(_, j)| rng.random_range(bounds[j].0..=bounds[j].1));
    let chk = duality_pipeline(&data, c, &p.view())?;
    if !chk.verifiable() {
        report.warnings.push(
            "no margin support vector and the mapped rho is outside the optimal interval".into(),
        );
    }
    report.results.duality = Some(DualityResult {
        c,
        n: chk.n,
        nu: chk.mapping.nu,
        delta_scalar: chk.mapping.delta_scalar,
        rho_mapped: chk.mapping.rho,
        rho_nu_svm: chk.nu_svm.rho,
        rho_flagged: chk.nu_svm.rho_flagged,
        rho_compared: chk.rho_compared,
        verifiable: chk.verifiable(),
        hinge_gap: chk.hinge_gap,
        nu_gap: chk.nu_svm.gap,
        kkt_residual: chk.kkt_residual,
        free_alphas: chk.hinge.free_count(c),
        sweeps: chk.hinge.sweeps,
        probes: chk.coincidence.probes,
        near_boundary: chk.coincidence.near_boundary,
        disagreements: chk.coincidence.disagreements.len(),
        w: chk.hinge.w.to_vec(),
        w_hat: chk.nu_svm.w_hat.to_vec(),
    });
    Ok(())
}

const SWEEP_EXTRA_KEYS: &[&str] = &[
    "data.test",
    "sweep.c",
    "sweep.c_u",
    "sweep.delta",
    "sweep.repeats",
    "bound.kappa",
    "bound.eta",
];

struct RunOutcome {
    auc: f64,
    bound: Option<f64>,
}

fn sweep_run(plan: &TrainPlan, test: &LabeledTestSet, point: (f64, f64, f64), seed: u64, kappa: f64, eta: f64) -> Result<RunOutcome> {
    let trace = plan.run(point.0, point.1, point.2, seed)?;
    let model = &trace.model;
    let r = evaluate(model, test, None, None)?;
    let lambda_cap = model.frobenius_sq().sqrt();
    let bound = if lambda_cap > 0.0 {
        let z = model.features(&plan.train.x().view())?;
        let erc = erc_bound_ind(&z.view(), &ClassBudget::new(lambda_cap, point.2)?)?;
        let xi = margin_slacks(model, &plan.train)?;
        Some(theorem1_rhs(&xi, erc, kappa, eta, xi.len())?)
    } else {
        None
    };
    Ok(RunOutcome { auc: r.auc, bound })
}

pub(crate) fn cmd_sweep(cfg: &Config, seed: u64, report: &mut Report, _out: &mut Outputs) -> Result<()> {
    let known: Vec<&str> = TRAIN_KEYS.iter().chain(SWEEP_EXTRA_KEYS).copied().collect();
    cfg.check_known(&known)?;
    let plan = TrainPlan::from_config(cfg, seed)?;
    let cs = cfg.list("sweep.c")?.unwrap_or_else(|| vec![plan.c]);
    let cus = cfg.list("sweep.c_u")?.unwrap_or_else(|| vec![plan.c_u]);
    let deltas = cfg.list("sweep.delta")?.unwrap_or_else(|| vec![plan.delta]);
    let repeats: usize = cfg.get_or("sweep.repeats", 1)?;
    let kappa: f64 = cfg.get_or("bound.kappa", 1.0)?;
    let eta: f64 = cfg.get_or("bound.eta", 0.05)?;
    theorem1_rhs(&[0.0], 0.0, kappa, eta, 1)?;
    if repeats == 0 || cs.is_empty() || cus.is_empty() || deltas.is_empty() {
        return Err(Error::Config("sweep grid and repeats must be non-empty".into()));
    }
    let mut grid = Vec::new();
    for &c in &cs {
        for &cu in &cus {
            for &d in &deltas {
                grid.push((c, cu, d));
            }
        }
    }
    for &(c, cu, d) in &grid {
        plan.hyperparams(c, cu, d, seed)
            .map_err(|e| Error::Config(format!("grid point C={c} C_U={cu} delta={d}: {e}")))?;
    }
    let test = load_test(&cfg.require_path("data.test")?)?;
    report.warnings.extend(plan.warnings.iter().cloned());

    let jobs: Vec<(usize, u64)> = (0..grid.len())
        .flat_map(|g| (0..repeats as u64).map(move |r| (g, r)))
        .collect();
    let outcomes: Vec<Result<RunOutcome>> = jobs
        .par_iter()
        .map(|&(g, r)| sweep_run(&plan, &test, grid[g], seed.wrapping_add(r), kappa, eta))
        .collect();

    let mut points = Vec::with_capacity(grid.len());
    for (g, &(c, c_u, delta)) in grid.iter().enumerate() {
        let mut aucs = Vec::new();
        let mut bounds = Vec::new();
        let mut errors = Vec::new();
        for (&(jg, r), o) in jobs.iter().zip(&outcomes) {
            if jg != g {
                continue;
            }
            match o {
                Ok(o) => {
                    aucs.push(o.auc);
                    bounds.extend(o.bound);
                }
                Err(e) => errors.push(format!("repeat {r}: {e}")),
            }
        }
        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        let auc_mean = mean(&aucs);
        let auc_std = auc_mean.map(|m| {
            if aucs.len() < 2 {
                0.0
            } else {
                (aucs.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (aucs.len() - 1) as f64).sqrt()
            }
        });
        points.push(SweepPoint {
            c,
            c_u,
            delta,
            runs_ok: aucs.len(),
            auc_mean,
            auc_std,
            theorem1_rhs_mean: mean(&bounds),
            errors,
        });
    }
    let best = points
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.auc_mean.map(|a| (i, a)))
        .fold(None, |acc: Option<(usize, f64)>, (i, a)| match acc {
            Some((_, b)) if b >= a => acc,
            _ => Some((i, a)),
        })
        .map(|(i, _)| i);
    report.results.sweep = Some(SweepResult { repeats, points, best });
    Ok(())
}
