//! Two-loop R-SVRG solver on the complex Stiefel manifold, plus R-SGD and
//! full-gradient Riemannian descent baselines.
//!
//! Each epoch refreshes an anchored full Riemannian gradient; the inner loop
//! combines fresh per-sample gradients with transported anchor terms into the
//! variance-reduced direction xi and steps via the QR retraction. Per-sample
//! anchor gradients are cached when the full gradient is assembled, so every
//! inner iteration costs exactly one new sample-gradient evaluation.

use std::fmt::Write as _;

use rand::Rng;

use crate::channel::{ChannelDataset, SystemConfig};
use crate::error::{Error, Result};
use crate::objective::{euclidean_grad_sample, objective_full, ObjectiveValue};
use crate::rng::{self, STREAM_SAMPLING};
use crate::scalar::{rc, Real};
use crate::stiefel::{retract, tangent_project, CMatrix, StiefelPoint, TangentVector};

/// Solver selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// two-loop variance-reduced solver
    Rsvrg,
    /// plain per-sample Riemannian stochastic gradient
    Rsgd,
    /// full Riemannian gradient descent
    Rgd,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rsvrg" => Ok(Variant::Rsvrg),
            "rsgd" => Ok(Variant::Rsgd),
            "rgd" => Ok(Variant::Rgd),
            other => Err(Error::Parse(format!(
                "unknown variant {other:?}, expected rsvrg|rsgd|rgd"
            ))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Rsvrg => "rsvrg",
            Variant::Rsgd => "rsgd",
            Variant::Rgd => "rgd",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerOptions<R: Real> {
    pub variant: Variant,
    /// initial step size alpha_0
    pub alpha0: R,
    /// decay rate lambda in alpha_0 (1 + alpha_0 lambda floor(k1/m_l))^-1
    pub lambda_decay: R,
    /// inner-loop length (iterations per epoch)
    pub m_l: usize,
    /// outer-loop cap
    pub max_epochs: usize,
    /// stop at epoch boundaries once ||grad f|| falls below this
    pub grad_tol: R,
    /// RNG seed for the index-sampling stream
    pub seed: u64,
    /// inner-loop trace cadence (records every `log_every` iterations);
    /// epoch boundaries are always recorded
    pub log_every: usize,
}

impl<R: Real> OptimizerOptions<R> {
    /// Reference hyperparameters: alpha_0 = 1e-3, lambda = 20, m_l = 5T,
    /// 50 epochs cap, gradient tolerance 1e-4.
    pub fn desk_default(t: usize, seed: u64) -> Self {
        Self {
            variant: Variant::Rsvrg,
            alpha0: rc(1e-3),
            lambda_decay: rc(20.0),
            m_l: 5 * t.max(1),
            max_epochs: 50,
            grad_tol: rc(1e-4),
            seed,
            log_every: 25,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha0 <= R::zero() {
            return Err(Error::Config("alpha0 must be positive".into()));
        }
        if self.lambda_decay <= R::zero() {
            return Err(Error::Config("lambda_decay must be positive".into()));
        }
        if self.m_l == 0 {
            return Err(Error::Config("m_l must be >= 1".into()));
        }
        if self.grad_tol < R::zero() {
            return Err(Error::Config("grad_tol must be >= 0".into()));
        }
        if self.log_every == 0 {
            return Err(Error::Config("log_every must be >= 1".into()));
        }
        Ok(())
    }
}

/// One trace row; `k1` is the running inner-iteration count across epochs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord<R: Real> {
    pub epoch: usize,
    pub inner: usize,
    pub k1: usize,
    pub g1_mean: R,
    pub g2_mean: R,
    pub total: R,
    pub grad_norm: R,
    pub step: R,
    pub feasibility: R,
}

/// Full run log plus the final point and the evaluation accounting.
#[derive(Debug, Clone)]
pub struct OptimizerTrace<R: Real> {
    pub records: Vec<TraceRecord<R>>,
    pub x_star: StiefelPoint<R>,
    pub converged: bool,
    pub epochs_run: usize,
    pub inner_iterations: usize,
    /// per-sample gradient evaluations spent inside inner loops
    pub inner_sample_evals: u64,
    /// per-sample gradient evaluations spent on per-epoch full gradients
    pub anchor_sample_evals: u64,
    /// evaluations spent purely on trace logging (objective + gradient rows)
    pub logging_sample_evals: u64,
    pub final_grad_norm: R,
}

impl<R: Real> OptimizerTrace<R> {
    /// Inner-loop cost in units of one full-gradient computation.
    pub fn full_gradient_equivalents(&self, t: usize) -> f64 {
        self.inner_sample_evals as f64 / t.max(1) as f64
    }
}

/// Run failure carrying the partial trace for diagnostics.
#[derive(Debug)]
pub enum OptimizerError<R: Real> {
    NonFinite {
        k1: usize,
        message: String,
        trace: Box<OptimizerTrace<R>>,
    },
    Core(Error),
}

impl<R: Real> std::fmt::Display for OptimizerError<R> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OptimizerError::NonFinite { k1, message, .. } => {
                write!(f, "numerical failure at k1={k1}: {message}")
            }
            OptimizerError::Core(e) => e.fmt(f),
        }
    }
}

impl<R: Real> std::error::Error for OptimizerError<R> {}

impl<R: Real> From<Error> for OptimizerError<R> {
    fn from(e: Error) -> Self {
        OptimizerError::Core(e)
    }
}

impl<R: Real> OptimizerError<R> {
    /// Collapse into the library error type, dropping the partial trace.
    pub fn into_error(self) -> Error {
        match self {
            OptimizerError::NonFinite { k1, message, .. } => {
                Error::Numerical(format!("at k1={k1}: {message}"))
            }
            OptimizerError::Core(e) => e,
        }
    }
}

/// alpha_0 (1 + alpha_0 lambda floor(k1/m_l))^-1: constant within an epoch,
/// harmonically decaying across epochs.
pub fn step_size<R: Real>(k1: usize, opts: &OptimizerOptions<R>) -> R {
    let floor = rc::<R>((k1 / opts.m_l) as f64);
    opts.alpha0 / (R::one() + opts.alpha0 * opts.lambda_decay * floor)
}

/// Dataset-mean Riemannian gradient: projection of the Euclidean mean.
pub fn riemannian_full_gradient<R: Real>(
    x: &StiefelPoint<R>,
    ds: &ChannelDataset<R>,
    cfg: &SystemConfig<R>,
) -> Result<TangentVector<R>> {
    let g = crate::objective::euclidean_grad_full(x, ds, cfg)?;
    tangent_project(x, &g)
}

/// Variance-reduced direction at `x_cur`:
/// grad f_t(x_cur) - P_{x_cur}(grad f_t(anchor) - grad f(anchor)).
///
/// The transport is the tangent projection at the target point, so the
/// anchor terms enter as ambient matrices.
pub fn svrg_gradient<R: Real>(
    x_cur: &StiefelPoint<R>,
    x_anchor: &StiefelPoint<R>,
    sample_index: usize,
    ds: &ChannelDataset<R>,
    cfg: &SystemConfig<R>,
    full_grad_anchor: &TangentVector<R>,
) -> Result<TangentVector<R>> {
    let s = ds
        .samples
        .get(sample_index)
        .ok_or_else(|| Error::Dimension(format!("sample index {sample_index} out of range")))?;
    let grad_cur = tangent_project(x_cur, &euclidean_grad_sample(x_cur, s, cfg)?)?;
    let grad_anchor = tangent_project(x_anchor, &euclidean_grad_sample(x_anchor, s, cfg)?)?;
    let correction = tangent_project(x_cur, &(grad_anchor.matrix() - full_grad_anchor.matrix()))?;
    TangentVector::new(x_cur.clone(), grad_cur.matrix() - correction.matrix())
}

struct RunState<R: Real> {
    trace: OptimizerTrace<R>,
}

impl<R: Real> RunState<R> {
    fn check_finite(
        &mut self,
        k1: usize,
        value: &ObjectiveValue<R>,
        grad_norm: R,
    ) -> std::result::Result<(), OptimizerError<R>> {
        if value.total.is_finite() && grad_norm.is_finite() {
            return Ok(());
        }
        let mut message = String::new();
        let _ = write!(
            message,
            "objective {:?}, gradient norm {:?}",
            value.total.to_f64(),
            grad_norm.to_f64()
        );
        Err(OptimizerError::NonFinite {
            k1,
            message,
            trace: Box::new(self.trace.clone()),
        })
    }

    fn record(&mut self, rec: TraceRecord<R>) {
        self.trace.records.push(rec);
    }
}

fn trace_record<R: Real>(
    epoch: usize,
    inner: usize,
    k1: usize,
    value: &ObjectiveValue<R>,
    grad_norm: R,
    step: R,
    x: &StiefelPoint<R>,
) -> TraceRecord<R> {
    TraceRecord {
        epoch,
        inner,
        k1,
        g1_mean: value.g1_mean,
        g2_mean: value.g2_mean,
        total: value.total,
        grad_norm,
        step,
        feasibility: x.feasibility_residual(),
    }
}

/// Run the selected solver from `x0`.
///
/// All variants stop when the full Riemannian gradient norm at an epoch
/// boundary is at most `grad_tol`, or after `max_epochs` epochs. For `rgd`
/// one epoch is one full-gradient step. Deterministic under a fixed seed.
pub fn run<R: Real>(
    ds: &ChannelDataset<R>,
    cfg: &SystemConfig<R>,
    x0: &StiefelPoint<R>,
    opts: &OptimizerOptions<R>,
) -> std::result::Result<OptimizerTrace<R>, OptimizerError<R>> {
    opts.validate()?;
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::EmptyDataset.into());
    }
    if x0.n() != cfg.n {
        return Err(Error::Dimension(format!(
            "x0 has {} rows, config expects n={}",
            x0.n(),
            cfg.n
        ))
        .into());
    }
    if !x0.is_feasible(rc(1e-10)) {
        return Err(Error::Domain("initial point is not feasible".into()).into());
    }

    let t = ds.len();
    let mut st = RunState {
        trace: OptimizerTrace {
            records: Vec::new(),
            x_star: x0.clone(),
            converged: false,
            epochs_run: 0,
            inner_iterations: 0,
            inner_sample_evals: 0,
            anchor_sample_evals: 0,
            logging_sample_evals: 0,
            final_grad_norm: R::zero(),
        },
    };
    let mut sampler = rng::stream(opts.seed, STREAM_SAMPLING);
    let mut x = x0.clone();
    let mut k1 = 0usize;

    for epoch in 0..=opts.max_epochs {
        // epoch boundary: full gradient at the anchor, with the per-sample
        // Riemannian gradients kept for reuse in the inner loop
        let mut per_sample: Vec<CMatrix<R>> = Vec::with_capacity(t);
        let mut mean = CMatrix::<R>::zeros(x.n(), x.p());
        for s in &ds.samples {
            let g = tangent_project(&x, &euclidean_grad_sample(&x, s, cfg)?)?;
            mean += g.matrix();
            per_sample.push(g.into_matrix());
        }
        mean /= nalgebra::Complex::new(rc::<R>(t as f64), R::zero());
        let full_grad = tangent_project(&x, &mean)?;
        st.trace.anchor_sample_evals += t as u64;

        let value = objective_full(&x, ds, cfg)?;
        st.trace.logging_sample_evals += t as u64;
        let grad_norm = full_grad.norm();
        st.check_finite(k1, &value, grad_norm)?;
        st.record(trace_record(
            epoch,
            0,
            k1,
            &value,
            grad_norm,
            step_size(k1, opts),
            &x,
        ));
        st.trace.final_grad_norm = grad_norm;
        st.trace.epochs_run = epoch;

        if grad_norm <= opts.grad_tol {
            st.trace.converged = true;
            break;
        }
        if epoch == opts.max_epochs {
            break;
        }

        match opts.variant {
            Variant::Rgd => {
                // one full-gradient step per epoch
                let alpha = step_size(k1, opts);
                x = retract(&x, &full_grad.scale(-alpha))?;
                k1 += 1;
                st.trace.inner_iterations = k1;
            }
            Variant::Rsvrg | Variant::Rsgd => {
                for q in 1..=opts.m_l {
                    let idx = sampler.random_range(0..t);
                    let alpha = step_size(k1, opts);
                    let xi = match opts.variant {
                        Variant::Rsvrg => {
                            let grad_cur =
                                tangent_project(&x, &euclidean_grad_sample(&x, &ds.samples[idx], cfg)?)?;
                            st.trace.inner_sample_evals += 1;
                            let correction =
                                tangent_project(&x, &(&per_sample[idx] - full_grad.matrix()))?;
                            TangentVector::new(x.clone(), grad_cur.matrix() - correction.matrix())?
                        }
                        _ => {
                            st.trace.inner_sample_evals += 1;
                            tangent_project(&x, &euclidean_grad_sample(&x, &ds.samples[idx], cfg)?)?
                        }
                    };
                    x = retract(&x, &xi.scale(-alpha))?;
                    k1 += 1;
                    st.trace.inner_iterations = k1;

                    if q % opts.log_every == 0 && q != opts.m_l {
                        let value = objective_full(&x, ds, cfg)?;
                        let g = riemannian_full_gradient(&x, ds, cfg)?;
                        st.trace.logging_sample_evals += 2 * t as u64;
                        let gn = g.norm();
                        st.check_finite(k1, &value, gn)?;
                        st.record(trace_record(epoch + 1, q, k1, &value, gn, alpha, &x));
                    }
                }
                // next anchor X~^l is the last inner iterate, i.e. x as left here
            }
        }
        st.trace.x_star = x.clone();
    }

    st.trace.x_star = x;
    Ok(st.trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::sample_dataset;

    fn desk(n: usize, p: usize, t: usize, seed: u64) -> (SystemConfig<f64>, ChannelDataset<f64>) {
        let mut cfg = SystemConfig::desk_default(n, p, seed).unwrap();
        cfg.t = t;
        let ds = sample_dataset(&cfg, seed).unwrap();
        (cfg, ds)
    }

    #[test]
    fn step_size_schedule() {
        let mut opts = OptimizerOptions::<f64>::desk_default(20, 0);
        opts.alpha0 = 1e-3;
        opts.lambda_decay = 20.0;
        opts.m_l = 100;
        for k in 0..100 {
            assert_eq!(step_size(k, &opts), 1e-3);
        }
        assert!((step_size(100, &opts) - 1e-3 / 1.02).abs() < 1e-12);
        assert!(step_size(1000, &opts) < step_size(100, &opts));
        // constant within each epoch
        assert_eq!(step_size(150, &opts), step_size(100, &opts));
    }

    #[test]
    fn step_size_sums() {
        let mut opts = OptimizerOptions::<f64>::desk_default(20, 0);
        opts.m_l = 1;
        let mut sum = 0.0f64;
        let mut sum_100k = 0.0f64;
        let mut sum_sq = 0.0f64;
        for k in 0..1_000_000usize {
            let a = step_size(k, &opts);
            sum += a;
            if k < 100_000 {
                sum_100k += a;
            }
            sum_sq += a * a;
        }
        // harmonic-like: the plain sum keeps growing by ~ln(10)/lambda per
        // decade, while the squared sum settles near alpha0/lambda * pi^2/6
        assert!(sum > 0.4);
        assert!(sum - sum_100k > 0.1);
        assert!(sum_sq < 5e-3);
        let tail_sq: f64 = (900_000..1_000_000)
            .map(|k| step_size(k, &opts).powi(2))
            .sum();
        assert!(tail_sq < 1e-9);
        let tail: f64 = (1_000_000..1_001_000).map(|k| step_size(k, &opts)).sum();
        assert!(tail > 0.0);
    }

    #[test]
    fn svrg_gradient_at_anchor_is_full_gradient() {
        let (cfg, ds) = desk(4, 2, 6, 1);
        let x = StiefelPoint::<f64>::random(4, 2, 2).unwrap();
        let full = riemannian_full_gradient(&x, &ds, &cfg).unwrap();
        for t in 0..ds.len() {
            let xi = svrg_gradient(&x, &x, t, &ds, &cfg, &full).unwrap();
            assert!(
                (xi.matrix() - full.matrix()).norm() < 1e-12,
                "sample {t} deviates"
            );
        }
    }

    #[test]
    fn svrg_gradient_unbiased() {
        let (cfg, ds) = desk(4, 2, 12, 3);
        let anchor = StiefelPoint::<f64>::random(4, 2, 4).unwrap();
        let xi0 = riemannian_full_gradient(&anchor, &ds, &cfg).unwrap();
        // move to a nearby distinct point
        let step = tangent_project(&anchor, xi0.matrix()).unwrap().scale(-0.05);
        let x_cur = retract(&anchor, &step).unwrap();
        let full_anchor = riemannian_full_gradient(&anchor, &ds, &cfg).unwrap();

        let mut mean = CMatrix::<f64>::zeros(4, 2);
        for t in 0..ds.len() {
            mean += svrg_gradient(&x_cur, &anchor, t, &ds, &cfg, &full_anchor)
                .unwrap()
                .into_matrix();
        }
        mean /= nalgebra::Complex::new(ds.len() as f64, 0.0);
        let full_cur = riemannian_full_gradient(&x_cur, &ds, &cfg).unwrap();
        assert!((&mean - full_cur.matrix()).norm() < 1e-12);
    }

    #[test]
    fn svrg_gradient_single_sample_dataset() {
        let (cfg, ds) = desk(4, 2, 1, 5);
        let anchor = StiefelPoint::<f64>::random(4, 2, 6).unwrap();
        let x_cur = StiefelPoint::<f64>::random(4, 2, 7).unwrap();
        let full_anchor = riemannian_full_gradient(&anchor, &ds, &cfg).unwrap();
        let xi = svrg_gradient(&x_cur, &anchor, 0, &ds, &cfg, &full_anchor).unwrap();
        let direct = riemannian_full_gradient(&x_cur, &ds, &cfg).unwrap();
        assert!((xi.matrix() - direct.matrix()).norm() < 1e-13);
    }

    #[test]
    fn svrg_gradient_index_out_of_range() {
        let (cfg, ds) = desk(4, 2, 3, 8);
        let x = StiefelPoint::<f64>::random(4, 2, 9).unwrap();
        let full = riemannian_full_gradient(&x, &ds, &cfg).unwrap();
        assert!(svrg_gradient(&x, &x, 3, &ds, &cfg, &full).is_err());
    }

    #[test]
    fn run_degenerate_stop_and_determinism() {
        let (cfg, ds) = desk(4, 2, 8, 10);
        let x0 = StiefelPoint::<f64>::random(4, 2, 11).unwrap();
        let mut opts = OptimizerOptions::<f64>::desk_default(8, 12);
        opts.grad_tol = f64::INFINITY;
        let tr = run(&ds, &cfg, &x0, &opts).unwrap();
        assert!(tr.converged);
        assert_eq!(tr.epochs_run, 0);
        assert_eq!(tr.records.len(), 1);
        assert_eq!(tr.inner_sample_evals, 0);
        assert!((tr.x_star.matrix() - x0.matrix()).norm() == 0.0);

        // determinism
        let mut opts = OptimizerOptions::<f64>::desk_default(8, 12);
        opts.m_l = 20;
        opts.max_epochs = 3;
        opts.grad_tol = 0.0;
        let a = run(&ds, &cfg, &x0, &opts).unwrap();
        let b = run(&ds, &cfg, &x0, &opts).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.x_star.matrix(), b.x_star.matrix());
    }

    #[test]
    fn run_feasibility_and_descent() {
        let (cfg, ds) = desk(6, 2, 32, 13);
        let x0 = StiefelPoint::<f64>::random(6, 2, 14).unwrap();
        let mut opts = OptimizerOptions::<f64>::desk_default(32, 15);
        opts.m_l = 160;
        opts.max_epochs = 4;
        opts.grad_tol = 0.0;
        opts.log_every = 10;
        let tr = run(&ds, &cfg, &x0, &opts).unwrap();
        for r in &tr.records {
            assert!(r.feasibility < 1e-10, "residual {}", r.feasibility);
        }
        // k1 strictly increasing across records
        for w in tr.records.windows(2) {
            assert!(w[1].k1 > w[0].k1);
        }
        // objective drops from the start to the final epoch boundary
        let first = tr.records.first().unwrap().total;
        let last = tr.records.last().unwrap().total;
        assert!(last < first, "no descent: {first} -> {last}");
        assert!(!tr.x_star.matrix().iter().any(|z| !z.re.is_finite()));
    }

    #[test]
    fn run_variants_and_accounting() {
        let (cfg, ds) = desk(4, 2, 16, 20);
        let x0 = StiefelPoint::<f64>::random(4, 2, 21).unwrap();
        for variant in [Variant::Rsvrg, Variant::Rsgd, Variant::Rgd] {
            let mut opts = OptimizerOptions::<f64>::desk_default(16, 22);
            opts.variant = variant;
            opts.m_l = 32;
            opts.max_epochs = 2;
            opts.grad_tol = 0.0;
            let tr = run(&ds, &cfg, &x0, &opts).unwrap();
            assert_eq!(tr.epochs_run, 2);
            match variant {
                Variant::Rgd => {
                    assert_eq!(tr.inner_iterations, 2);
                    assert_eq!(tr.inner_sample_evals, 0);
                }
                _ => {
                    assert_eq!(tr.inner_iterations, 64);
                    assert_eq!(tr.inner_sample_evals, 64);
                }
            }
            assert_eq!(tr.anchor_sample_evals, 3 * 16);
        }
    }

    #[test]
    fn run_rejects_bad_inputs() {
        let (cfg, ds) = desk(4, 2, 4, 30);
        let opts = OptimizerOptions::<f64>::desk_default(4, 31);
        let wrong = StiefelPoint::<f64>::random(6, 2, 32).unwrap();
        assert!(run(&ds, &cfg, &wrong, &opts).is_err());

        let x0 = StiefelPoint::<f64>::random(4, 2, 33).unwrap();
        let mut bad = opts.clone();
        bad.alpha0 = 0.0;
        assert!(run(&ds, &cfg, &x0, &bad).is_err());
        let mut bad = opts;
        bad.m_l = 0;
        assert!(run(&ds, &cfg, &x0, &bad).is_err());
    }

    #[test]
    fn variant_parse_round_trip() {
        for v in [Variant::Rsvrg, Variant::Rsgd, Variant::Rgd] {
            assert_eq!(v.to_string().parse::<Variant>().unwrap(), v);
        }
        assert!("adam".parse::<Variant>().is_err());
    }
}
