//! Experiment harness: wires config -> sampling -> optimization -> metrics
//! and emits plot-ready CSV files plus a manifest that reproduces the run.
//!
//! Three experiment families:
//! - `convergence`: per-iteration traces for several basis ranks p at fixed n
//! - `sweep-n`: summary metrics versus the jammer count n under a p-rule
//! - `sweep-pj`: summary metrics versus the jamming power P_j
//!
//! Metrics are scored on the dataset named by `eval_seed`, a fresh draw by
//! default so the summary is out-of-sample; set `eval_seed` equal to the
//! training seed to score the sample average actually minimized.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::channel::{sample_dataset, SystemConfig};
use crate::error::{Error, Result};
use crate::io::{config_from_kv, config_to_kv, read_kv, write_complex_matrix_csv, write_kv};
use crate::objective::{evaluate, pe_lower_bound, CovertMetrics};
use crate::optimizer::{run, OptimizerOptions, OptimizerTrace};
use crate::scalar::{dbm_to_mw, mw_to_dbm, rc, Real};
use crate::stiefel::StiefelPoint;

pub const TRACE_HEADER: [&str; 7] = [
    "iter",
    "g1_mean",
    "g2_mean",
    "total",
    "grad_norm",
    "step",
    "feasibility",
];

pub const SUMMARY_HEADER: [&str; 6] = ["n", "p", "Pj_dbm", "Pi_db", "pe_lower", "covert_rate"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Convergence,
    SweepN,
    SweepPj,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::SweepN => "sweep_n",
            ExperimentKind::SweepPj => "sweep_pj",
        })
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "convergence" => Ok(ExperimentKind::Convergence),
            "sweep_n" | "sweep-n" => Ok(ExperimentKind::SweepN),
            "sweep_pj" | "sweep-pj" => Ok(ExperimentKind::SweepPj),
            other => Err(Error::Parse(format!("unknown experiment kind {other:?}"))),
        }
    }
}

/// Rule mapping a swept jammer count n to the basis rank p.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PRule {
    Half,
    Third,
    Sixth,
}

impl PRule {
    pub fn divisor(self) -> usize {
        match self {
            PRule::Half => 2,
            PRule::Third => 3,
            PRule::Sixth => 6,
        }
    }

    /// p = n / divisor; rejects n that does not divide evenly.
    pub fn apply(self, n: usize) -> Result<usize> {
        let d = self.divisor();
        if n == 0 || !n.is_multiple_of(d) {
            return Err(Error::Config(format!(
                "p-rule n/{d} needs n divisible by {d}, got n={n}"
            )));
        }
        Ok(n / d)
    }
}

impl fmt::Display for PRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n/{}", self.divisor())
    }
}

impl FromStr for PRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n/2" | "half" => Ok(PRule::Half),
            "n/3" | "third" => Ok(PRule::Third),
            "n/6" | "sixth" => Ok(PRule::Sixth),
            other => Err(Error::Parse(format!(
                "unknown p-rule {other:?}, expected n/2|n/3|n/6"
            ))),
        }
    }
}

/// Full description of one experiment run.
#[derive(Debug, Clone)]
pub struct ExperimentSpec<R: Real> {
    pub kind: ExperimentKind,
    pub base: SystemConfig<R>,
    pub opts: OptimizerOptions<R>,
    /// basis ranks traced by `convergence`
    pub convergence_p: Vec<usize>,
    /// jammer counts swept by `sweep_n`
    pub sweep_n: Vec<usize>,
    pub p_rule: PRule,
    /// jamming powers (dBm) swept by `sweep_pj`
    pub sweep_pj_dbm: Vec<R>,
    /// seed for the evaluation dataset (train data uses `opts.seed`)
    pub eval_seed: u64,
    /// emit the P_a -> 0 diagnostic file in `sweep_pj`
    pub pa_zero_check: bool,
}

impl<R: Real> ExperimentSpec<R> {
    /// Desk-scale experiment around the reference instance n=18, p=6.
    pub fn desk_default(kind: ExperimentKind, seed: u64) -> Result<Self> {
        let base = SystemConfig::desk_default(18, 6, seed)?;
        let opts = OptimizerOptions::desk_default(base.t, seed);
        Ok(Self {
            kind,
            base,
            opts,
            convergence_p: vec![3, 6, 9],
            sweep_n: vec![18, 24, 30, 36],
            p_rule: PRule::Third,
            sweep_pj_dbm: vec![rc(0.0), rc(5.0), rc(10.0), rc(15.0)],
            // out-of-sample scoring by default; set eval_seed = seed to
            // score on the training draw itself
            eval_seed: seed.wrapping_add(1),
            pa_zero_check: true,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        self.opts.validate()?;
        match self.kind {
            ExperimentKind::Convergence => {
                if self.convergence_p.is_empty() {
                    return Err(Error::Config("convergence needs at least one p".into()));
                }
                for &p in &self.convergence_p {
                    if p == 0 || p > self.base.n {
                        return Err(Error::Config(format!(
                            "convergence p={p} outside 1..=n={}",
                            self.base.n
                        )));
                    }
                }
            }
            ExperimentKind::SweepN => {
                if self.sweep_n.is_empty() {
                    return Err(Error::Config("sweep_n list is empty".into()));
                }
                for &n in &self.sweep_n {
                    self.p_rule.apply(n)?;
                }
            }
            ExperimentKind::SweepPj => {
                if self.sweep_pj_dbm.is_empty() {
                    return Err(Error::Config("sweep_pj list is empty".into()));
                }
            }
        }
        Ok(())
    }

    /// Derives the config for one sweep point: jammer count `n`, rank `p`,
    /// scalar knobs inherited from the base, per-n channel constants frozen
    /// from the sampling seed.
    pub fn point_config(&self, n: usize, p: usize) -> Result<SystemConfig<R>> {
        if n == self.base.n {
            let mut cfg = self.base.clone();
            cfg.p = p;
            cfg.validate()?;
            return Ok(cfg);
        }
        let mut cfg = SystemConfig::desk_default(n, p, self.opts.seed)?;
        cfg.p_a = self.base.p_a;
        cfg.p_j = self.base.p_j;
        cfg.sigma_w2 = self.base.sigma_w2;
        cfg.sigma_b2 = self.base.sigma_b2;
        cfg.h_ab = self.base.h_ab;
        cfg.sigma_aw2 = self.base.sigma_aw2;
        cfg.mu = self.base.mu;
        cfg.t = self.base.t;
        cfg.scaled = self.base.scaled;
        // uncertainty profiles: replicate the base's first entry
        let jb = self.base.sigma_jb2[0];
        let jw = self.base.sigma_jw2[0];
        cfg.sigma_jb2.fill(jb);
        cfg.sigma_jw2.fill(jw);
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Result of optimizing one sweep point and scoring it out-of-sample.
#[derive(Debug, Clone)]
pub struct PointResult<R: Real> {
    pub cfg: SystemConfig<R>,
    pub trace: OptimizerTrace<R>,
    pub metrics: CovertMetrics<R>,
    /// metrics of the unoptimized full-space baseline X = I_n
    pub baseline: CovertMetrics<R>,
}

/// Optimize one (config, options) instance and evaluate it on a fresh
/// dataset drawn from `eval_seed`.
pub fn run_point<R: Real>(
    cfg: &SystemConfig<R>,
    opts: &OptimizerOptions<R>,
    eval_seed: u64,
) -> Result<PointResult<R>> {
    let train = sample_dataset(cfg, opts.seed)?;
    let x0 = StiefelPoint::random(cfg.n, cfg.p, opts.seed)?;
    let trace = run(&train, cfg, &x0, opts).map_err(|e| e.into_error())?;

    let eval = sample_dataset(cfg, eval_seed)?;
    let metrics = evaluate(&trace.x_star, &eval, cfg)?;

    // Gaussian-noise baseline: full-space AN, p = n, X = I_n. Its power
    // scale n/p = 1, so score it under an unscaled p = n config.
    let mut base_cfg = cfg.clone();
    base_cfg.p = cfg.n;
    let base_eval = sample_dataset(&base_cfg, eval_seed)?;
    let eye = StiefelPoint::identity_basis(cfg.n, cfg.n)?;
    let baseline = evaluate(&eye, &base_eval, &base_cfg)?;

    Ok(PointResult {
        cfg: cfg.clone(),
        trace,
        metrics,
        baseline,
    })
}

fn fmt_real<R: Real>(v: R) -> String {
    format!("{:?}", v.to_f64().unwrap_or(f64::NAN))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))
}

fn write_trace_csv<R: Real>(trace: &OptimizerTrace<R>, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(Error::from)?;
    w.write_record(TRACE_HEADER)?;
    for r in &trace.records {
        w.write_record([
            r.k1.to_string(),
            fmt_real(r.g1_mean),
            fmt_real(r.g2_mean),
            fmt_real(r.total),
            fmt_real(r.grad_norm),
            fmt_real(r.step),
            fmt_real(r.feasibility),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

fn write_x_star<R: Real>(
    trace: &OptimizerTrace<R>,
    opts: &OptimizerOptions<R>,
    dir: &Path,
    tag: &str,
) -> Result<()> {
    let x = &trace.x_star;
    write_complex_matrix_csv(x.matrix(), &dir.join(format!("x_star_{tag}.csv")))?;
    let mut kv = BTreeMap::new();
    kv.insert("n".to_string(), x.n().to_string());
    kv.insert("p".to_string(), x.p().to_string());
    kv.insert("seed".to_string(), opts.seed.to_string());
    kv.insert("epochs".to_string(), trace.epochs_run.to_string());
    kv.insert("converged".to_string(), trace.converged.to_string());
    kv.insert(
        "final_grad_norm".to_string(),
        fmt_real(trace.final_grad_norm),
    );
    write_kv(&kv, &dir.join(format!("x_star_{tag}.meta")))
}

struct SummaryWriter {
    w: csv::Writer<std::fs::File>,
    path: PathBuf,
}

impl SummaryWriter {
    fn create(path: PathBuf) -> Result<Self> {
        let mut w = csv::Writer::from_path(&path).map_err(Error::from)?;
        w.write_record(SUMMARY_HEADER)?;
        Ok(Self { w, path })
    }

    fn row<R: Real>(&mut self, cfg: &SystemConfig<R>, p: usize, m: &CovertMetrics<R>) -> Result<()> {
        for v in [m.interference_db, m.pe_lower, m.covert_rate] {
            if !v.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite summary value for n={}, p={p}",
                    cfg.n
                )));
            }
        }
        self.w.write_record([
            cfg.n.to_string(),
            p.to_string(),
            fmt_real(mw_to_dbm(cfg.p_j)),
            fmt_real(m.interference_db),
            fmt_real(m.pe_lower),
            fmt_real(m.covert_rate),
        ])?;
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        self.w
            .flush()
            .map_err(|e| Error::io(self.path.display().to_string(), e))
    }
}

/// Per-iteration traces for each requested basis rank at fixed n.
/// Emits `trace_n{n}_p{p}.csv`, the optimized basis files, and `manifest.txt`.
pub fn run_convergence<R: Real>(spec: &ExperimentSpec<R>, out_dir: &Path) -> Result<Vec<PathBuf>> {
    spec.validate()?;
    if spec.kind != ExperimentKind::Convergence {
        return Err(Error::Config("spec kind is not convergence".into()));
    }
    ensure_dir(out_dir)?;
    write_manifest(spec, out_dir)?;

    let points: Vec<Result<(usize, PointResult<R>)>> = spec
        .convergence_p
        .par_iter()
        .map(|&p| {
            let cfg = spec.point_config(spec.base.n, p)?;
            Ok((p, run_point(&cfg, &spec.opts, spec.eval_seed)?))
        })
        .collect();

    let mut files = Vec::new();
    for res in points {
        let (p, pr) = res?;
        let tag = format!("n{}_p{}", spec.base.n, p);
        let path = out_dir.join(format!("trace_{tag}.csv"));
        write_trace_csv(&pr.trace, &path)?;
        write_x_star(&pr.trace, &spec.opts, out_dir, &tag)?;
        files.push(path);
    }
    Ok(files)
}

/// Summary metrics versus the jammer count under the p-rule. For each n the
/// file carries the optimized row (p from the rule) and the unoptimized
/// full-space baseline row (p = n, P_i = 0 dB by construction).
pub fn run_sweep_n<R: Real>(spec: &ExperimentSpec<R>, out_dir: &Path) -> Result<PathBuf> {
    spec.validate()?;
    if spec.kind != ExperimentKind::SweepN {
        return Err(Error::Config("spec kind is not sweep_n".into()));
    }
    ensure_dir(out_dir)?;
    write_manifest(spec, out_dir)?;

    let points: Vec<Result<(usize, usize, PointResult<R>)>> = spec
        .sweep_n
        .par_iter()
        .map(|&n| {
            let p = spec.p_rule.apply(n)?;
            let cfg = spec.point_config(n, p)?;
            Ok((n, p, run_point(&cfg, &spec.opts, spec.eval_seed)?))
        })
        .collect();

    let path = out_dir.join("summary_sweep_n.csv");
    let mut sw = SummaryWriter::create(path.clone())?;
    for res in points {
        let (n, p, pr) = res?;
        sw.row(&pr.cfg, p, &pr.metrics)?;
        sw.row(&pr.cfg, n, &pr.baseline)?;
        write_x_star(&pr.trace, &spec.opts, out_dir, &format!("n{n}_p{p}"))?;
    }
    sw.finish()?;
    Ok(path)
}

/// Summary metrics versus the jamming power; the basis is re-optimized per
/// P_j since the covertness term depends on it. Optionally emits the exact
/// P_a -> 0 diagnostic (`pa_zero_check.csv`): pe_lower = 1, covert_rate = 0.
pub fn run_sweep_pj<R: Real>(spec: &ExperimentSpec<R>, out_dir: &Path) -> Result<PathBuf> {
    spec.validate()?;
    if spec.kind != ExperimentKind::SweepPj {
        return Err(Error::Config("spec kind is not sweep_pj".into()));
    }
    ensure_dir(out_dir)?;
    write_manifest(spec, out_dir)?;

    let points: Vec<Result<(R, PointResult<R>)>> = spec
        .sweep_pj_dbm
        .par_iter()
        .map(|&pj_dbm| {
            let mut cfg = spec.point_config(spec.base.n, spec.base.p)?;
            cfg.p_j = dbm_to_mw(pj_dbm);
            Ok((pj_dbm, run_point(&cfg, &spec.opts, spec.eval_seed)?))
        })
        .collect();

    let path = out_dir.join("summary_sweep_pj.csv");
    let mut sw = SummaryWriter::create(path.clone())?;
    let mut last: Option<PointResult<R>> = None;
    for res in points {
        let (pj_dbm, pr) = res?;
        sw.row(&pr.cfg, pr.cfg.p, &pr.metrics)?;
        write_x_star(
            &pr.trace,
            &spec.opts,
            out_dir,
            &format!("pj{}", fmt_real(pj_dbm)),
        )?;
        last = Some(pr);
    }
    sw.finish()?;

    if spec.pa_zero_check {
        // silent-Alice limit at the last optimized basis: both hypotheses
        // coincide, so the KL term vanishes identically
        let pr = last.expect("sweep list validated non-empty");
        let mut cfg0 = pr.cfg.clone();
        cfg0.p_a = R::zero();
        let eval = sample_dataset(&pr.cfg, spec.eval_seed)?;
        let m = evaluate(&pr.trace.x_star, &eval, &cfg0)?;
        if m.kl != R::zero() || m.pe_lower != R::one() {
            return Err(Error::Numerical(
                "silent-Alice diagnostic is not exact".into(),
            ));
        }
        let mut sw = SummaryWriter::create(out_dir.join("pa_zero_check.csv"))?;
        sw.row(&cfg0, cfg0.p, &m)?;
        sw.finish()?;
    }
    Ok(path)
}

/// Dispatch on the spec's kind; returns the emitted file paths.
pub fn run_experiment<R: Real>(spec: &ExperimentSpec<R>, out_dir: &Path) -> Result<Vec<PathBuf>> {
    match spec.kind {
        ExperimentKind::Convergence => run_convergence(spec, out_dir),
        ExperimentKind::SweepN => Ok(vec![run_sweep_n(spec, out_dir)?]),
        ExperimentKind::SweepPj => Ok(vec![run_sweep_pj(spec, out_dir)?]),
    }
}

fn list_to_string<T: ToString>(items: &[T]) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn real_list_to_string<R: Real>(items: &[R]) -> String {
    items
        .iter()
        .map(|&v| fmt_real(v))
        .collect::<Vec<_>>()
        .join(",")
}

/// Flat key=value form of the full experiment: system config plus solver and
/// sweep settings. Readable back via [`experiment_from_kv`].
pub fn experiment_to_kv<R: Real>(spec: &ExperimentSpec<R>) -> BTreeMap<String, String> {
    let mut kv = config_to_kv(&spec.base);
    kv.insert("kind".into(), spec.kind.to_string());
    kv.insert("variant".into(), spec.opts.variant.to_string());
    kv.insert("alpha0".into(), fmt_real(spec.opts.alpha0));
    kv.insert("lambda_decay".into(), fmt_real(spec.opts.lambda_decay));
    kv.insert("m_l".into(), spec.opts.m_l.to_string());
    kv.insert("max_epochs".into(), spec.opts.max_epochs.to_string());
    kv.insert("grad_tol".into(), fmt_real(spec.opts.grad_tol));
    kv.insert("log_every".into(), spec.opts.log_every.to_string());
    kv.insert("seed".into(), spec.opts.seed.to_string());
    kv.insert("eval_seed".into(), spec.eval_seed.to_string());
    kv.insert("convergence_p".into(), list_to_string(&spec.convergence_p));
    kv.insert("sweep_n".into(), list_to_string(&spec.sweep_n));
    kv.insert("p_rule".into(), spec.p_rule.to_string());
    kv.insert("sweep_pj_dbm".into(), real_list_to_string(&spec.sweep_pj_dbm));
    kv.insert("pa_zero_check".into(), spec.pa_zero_check.to_string());
    // the termination criterion is a concrete choice, so record it
    kv.insert(
        "stopping_rule".into(),
        "grad_norm<=grad_tol at epoch boundary, or max_epochs".into(),
    );
    kv
}

fn parse_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<T>()
                .map_err(|_| Error::Parse(format!("bad {what} entry {tok:?}")))
        })
        .collect()
}

pub fn experiment_from_kv<R: Real>(kv: &BTreeMap<String, String>) -> Result<ExperimentSpec<R>> {
    let get = |key: &str| -> Result<&String> {
        kv.get(key)
            .ok_or_else(|| Error::Parse(format!("missing experiment key {key:?}")))
    };
    let base = config_from_kv::<R>(kv)?;
    let opts = OptimizerOptions::<R> {
        variant: get("variant")?.parse()?,
        alpha0: rc(get("alpha0")?
            .parse::<f64>()
            .map_err(|_| Error::Parse("bad alpha0".into()))?),
        lambda_decay: rc(get("lambda_decay")?
            .parse::<f64>()
            .map_err(|_| Error::Parse("bad lambda_decay".into()))?),
        m_l: get("m_l")?
            .parse()
            .map_err(|_| Error::Parse("bad m_l".into()))?,
        max_epochs: get("max_epochs")?
            .parse()
            .map_err(|_| Error::Parse("bad max_epochs".into()))?,
        grad_tol: rc(get("grad_tol")?
            .parse::<f64>()
            .map_err(|_| Error::Parse("bad grad_tol".into()))?),
        seed: get("seed")?
            .parse()
            .map_err(|_| Error::Parse("bad seed".into()))?,
        log_every: get("log_every")?
            .parse()
            .map_err(|_| Error::Parse("bad log_every".into()))?,
    };
    let pj: Vec<f64> = parse_list(get("sweep_pj_dbm")?, "sweep_pj_dbm")?;
    let spec = ExperimentSpec {
        kind: get("kind")?.parse()?,
        base,
        opts,
        convergence_p: parse_list(get("convergence_p")?, "convergence_p")?,
        sweep_n: parse_list(get("sweep_n")?, "sweep_n")?,
        p_rule: get("p_rule")?.parse()?,
        sweep_pj_dbm: pj.into_iter().map(rc).collect(),
        eval_seed: get("eval_seed")?
            .parse()
            .map_err(|_| Error::Parse("bad eval_seed".into()))?,
        pa_zero_check: get("pa_zero_check")?
            .parse()
            .map_err(|_| Error::Parse("bad pa_zero_check".into()))?,
    };
    spec.validate()?;
    Ok(spec)
}

fn write_manifest<R: Real>(spec: &ExperimentSpec<R>, out_dir: &Path) -> Result<()> {
    write_kv(&experiment_to_kv(spec), &out_dir.join("manifest.txt"))
}

/// Load a previously written manifest (or a hand-written config file).
pub fn load_spec<R: Real>(path: &Path) -> Result<ExperimentSpec<R>> {
    experiment_from_kv(&read_kv(path)?)
}

/// `pe_lower` of the unjammed/silent configuration is exactly 1; exposed for
/// sanity checks.
pub fn silent_alice_pe<R: Real>() -> R {
    pe_lower_bound(R::zero()).expect("zero KL is in-domain")
}
