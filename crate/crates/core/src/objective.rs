//! Per-sample losses, the sample-average objective and its Euclidean
//! gradients, and the covert-performance metrics (received-signal variances,
//! KL divergence, Pinsker detection-error bound, covert rate, interference
//! power at Bob).
//!
//! Evaluation convention: X lives on the unit manifold X^H X = I_p and the
//! power rescaling X X^H -> (n/p) X X^H is applied internally whenever
//! `cfg.scaled` is set. Gradients use the conjugate-gradient convention
//! D f(X)[xi] = Re tr(grad^H xi).

use nalgebra::Complex;

use crate::channel::{ChannelDataset, ChannelSample, SystemConfig};
use crate::error::{Error, Result};
use crate::scalar::{rc, Real};
use crate::stiefel::{CMatrix, CVector, StiefelPoint};

/// Objective decomposition: total = g1_mean + mu * g2_mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue<R: Real> {
    pub g1_mean: R,
    pub g2_mean: R,
    pub total: R,
}

/// Summary covert metrics for a fixed basis on an evaluation dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovertMetrics<R: Real> {
    /// dataset mean of lambda_0 (mW)
    pub lambda0: R,
    /// dataset mean of lambda_1 (mW)
    pub lambda1: R,
    /// dataset mean KL divergence (nats)
    pub kl: R,
    /// Pinsker lower bound on P_FA + P_MD
    pub pe_lower: R,
    /// bits per channel use
    pub covert_rate: R,
    /// interference power at Bob relative to the Gaussian baseline (dB)
    pub interference_db: R,
}

fn check_channel_dim<R: Real>(x: &StiefelPoint<R>, len: usize) -> Result<()> {
    if len != x.n() {
        return Err(Error::Dimension(format!(
            "channel vector length {len} does not match basis rows {}",
            x.n()
        )));
    }
    Ok(())
}

/// Interference quadratic form at Bob: (n/p) ||X^H h_jb||^2 under scaling.
pub fn g1_sample<R: Real>(
    x: &StiefelPoint<R>,
    h_jb: &CVector<R>,
    cfg: &SystemConfig<R>,
) -> Result<R> {
    check_channel_dim(x, h_jb.len())?;
    let proj = x.matrix().adjoint() * h_jb;
    Ok(cfg.power_scale() * proj.norm_squared())
}

/// Per-sample received variances at Willie: (lambda_0, lambda_1).
pub fn variances<R: Real>(
    x: &StiefelPoint<R>,
    h_aw: Complex<R>,
    h_jw: &CVector<R>,
    cfg: &SystemConfig<R>,
) -> Result<(R, R)> {
    check_channel_dim(x, h_jw.len())?;
    let proj = x.matrix().adjoint() * h_jw;
    let lambda0 = cfg.p_j * cfg.power_scale() * proj.norm_squared() + cfg.sigma_w2;
    let lambda1 = cfg.p_a * h_aw.norm_sqr() + lambda0;
    Ok((lambda0, lambda1))
}

/// KL divergence between two zero-mean complex Gaussians with variances
/// (lambda1 || lambda0): ln(l1/l0) + l0/l1 - 1.
pub fn kl_divergence<R: Real>(lambda0: R, lambda1: R) -> Result<R> {
    if lambda0 <= R::zero() || lambda1 <= R::zero() {
        return Err(Error::Domain(format!(
            "variances must be positive, got ({:?}, {:?})",
            lambda0.to_f64(),
            lambda1.to_f64()
        )));
    }
    Ok((lambda1 / lambda0).ln() + lambda0 / lambda1 - R::one())
}

/// Per-sample covertness loss: the KL divergence of the two hypotheses at
/// Willie for this channel draw. Always >= 0.
pub fn g2_sample<R: Real>(
    x: &StiefelPoint<R>,
    h_aw: Complex<R>,
    h_jw: &CVector<R>,
    cfg: &SystemConfig<R>,
) -> Result<R> {
    let (l0, l1) = variances(x, h_aw, h_jw, cfg)?;
    kl_divergence(l0, l1)
}

/// Sample-average objective (1/T) sum(g1 + mu g2).
pub fn objective_full<R: Real>(
    x: &StiefelPoint<R>,
    ds: &ChannelDataset<R>,
    cfg: &SystemConfig<R>,
) -> Result<ObjectiveValue<R>> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut g1 = R::zero();
    let mut g2 = R::zero();
    for s in &ds.samples {
        g1 += g1_sample(x, &s.h_jb, cfg)?;
        g2 += g2_sample(x, s.h_aw, &s.h_jw, cfg)?;
    }
    let t = rc::<R>(ds.len() as f64);
    let g1_mean = g1 / t;
    let g2_mean = g2 / t;
    Ok(ObjectiveValue {
        g1_mean,
        g2_mean,
        total: g1_mean + cfg.mu * g2_mean,
    })
}

/// Euclidean gradient of g1 + mu g2 for one sample, conjugate-gradient
/// convention, with the (n/p) factors folded in to match the objective.
pub fn euclidean_grad_sample<R: Real>(
    x: &StiefelPoint<R>,
    s: &ChannelSample<R>,
    cfg: &SystemConfig<R>,
) -> Result<CMatrix<R>> {
    check_channel_dim(x, s.h_jb.len())?;
    check_channel_dim(x, s.h_jw.len())?;
    let scale = cfg.power_scale();
    let two_s = Complex::new(rc::<R>(2.0) * scale, R::zero());

    // d g1 = 2 (n/p) h_jb h_jb^H X
    let xh_hjb = x.matrix().adjoint() * &s.h_jb;
    let mut grad = &s.h_jb * xh_hjb.adjoint() * two_s;

    // d g2 = 2 (n/p) P_j c h_jw h_jw^H X with c = 1/l1 - 1/l0 + A/l1^2
    let (l0, l1) = variances(x, s.h_aw, &s.h_jw, cfg)?;
    let a = cfg.p_a * s.h_aw.norm_sqr();
    let coeff = R::one() / l1 - R::one() / l0 + a / (l1 * l1);
    let xh_hjw = x.matrix().adjoint() * &s.h_jw;
    grad += &s.h_jw * xh_hjw.adjoint() * two_s * Complex::new(cfg.mu * cfg.p_j * coeff, R::zero());
    Ok(grad)
}

/// Dataset-mean Euclidean gradient.
pub fn euclidean_grad_full<R: Real>(
    x: &StiefelPoint<R>,
    ds: &ChannelDataset<R>,
    cfg: &SystemConfig<R>,
) -> Result<CMatrix<R>> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut acc = CMatrix::<R>::zeros(x.n(), x.p());
    for s in &ds.samples {
        acc += euclidean_grad_sample(x, s, cfg)?;
    }
    Ok(acc / Complex::new(rc::<R>(ds.len() as f64), R::zero()))
}

/// Pinsker lower bound on the detection error: max(0, 1 - sqrt(kl/2)),
/// clamped into [0, 1].
pub fn pe_lower_bound<R: Real>(kl_mean: R) -> Result<R> {
    if kl_mean < R::zero() {
        return Err(Error::Domain("mean KL divergence must be >= 0".into()));
    }
    let v = R::one() - (kl_mean * rc(0.5)).sqrt();
    Ok(v.max(R::zero()).min(R::one()))
}

/// Covert rate at Bob, bits per channel use; the expectation in the
/// denominator is replaced by the dataset mean of g1.
pub fn covert_rate<R: Real>(
    x: &StiefelPoint<R>,
    ds: &ChannelDataset<R>,
    cfg: &SystemConfig<R>,
) -> Result<R> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut g1 = R::zero();
    for s in &ds.samples {
        g1 += g1_sample(x, &s.h_jb, cfg)?;
    }
    let g1_mean = g1 / rc(ds.len() as f64);
    let snr = cfg.p_a * cfg.h_ab.norm_sqr() / (cfg.p_j * g1_mean + cfg.sigma_b2);
    Ok(rc::<R>(0.5) * (R::one() + snr).ln() / rc(2.0f64.ln()))
}

/// Interference power at Bob in dB relative to the Gaussian baseline
/// (full-space basis I_n): 10 log10(g1_mean(X) / mean ||h_jb||^2).
pub fn interference_power_db<R: Real>(
    x: &StiefelPoint<R>,
    ds: &ChannelDataset<R>,
    cfg: &SystemConfig<R>,
) -> Result<R> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut g1 = R::zero();
    let mut baseline = R::zero();
    for s in &ds.samples {
        g1 += g1_sample(x, &s.h_jb, cfg)?;
        baseline += s.h_jb.norm_squared();
    }
    if baseline <= R::zero() {
        return Err(Error::DegenerateData(
            "baseline interference power is zero".into(),
        ));
    }
    Ok(rc::<R>(10.0) * (g1 / baseline).log10())
}

/// All summary metrics for (X, dataset).
pub fn evaluate<R: Real>(
    x: &StiefelPoint<R>,
    ds: &ChannelDataset<R>,
    cfg: &SystemConfig<R>,
) -> Result<CovertMetrics<R>> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut l0_acc = R::zero();
    let mut l1_acc = R::zero();
    let mut kl_acc = R::zero();
    for s in &ds.samples {
        let (l0, l1) = variances(x, s.h_aw, &s.h_jw, cfg)?;
        l0_acc += l0;
        l1_acc += l1;
        kl_acc += kl_divergence(l0, l1)?;
    }
    let t = rc::<R>(ds.len() as f64);
    let kl = kl_acc / t;
    Ok(CovertMetrics {
        lambda0: l0_acc / t,
        lambda1: l1_acc / t,
        kl,
        pe_lower: pe_lower_bound(kl)?,
        covert_rate: covert_rate(x, ds, cfg)?,
        interference_db: interference_power_db(x, ds, cfg)?,
    })
}
