//! Monte Carlo channel sampling under the imperfect-CSI model, and the
//! artificial-noise signal draws v = sqrt(n/p) X a with a ~ CN(0, I_p).

use nalgebra::{Complex, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{self, STREAM_AN, STREAM_CONFIG, STREAM_DATASET};
use crate::scalar::{dbm_to_mw, rc, Real};
use crate::stiefel::{CVector, StiefelPoint};

/// System parameters. Powers and noise variances are stored in linear mW;
/// use [`SystemConfig::from_dbm_powers`] or the desk defaults to build one
/// from the dBm values quoted in configs.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig<R: Real> {
    /// jammer count
    pub n: usize,
    /// AN basis rank
    pub p: usize,
    /// Alice transmit power, linear mW
    pub p_a: R,
    /// per-jammer transmit power, linear mW
    pub p_j: R,
    /// Willie noise variance, linear mW
    pub sigma_w2: R,
    /// Bob noise variance, linear mW
    pub sigma_b2: R,
    /// known Alice-Bob coefficient
    pub h_ab: Complex<R>,
    /// known parts of the jammer-Bob coefficients, length n
    pub h_jb_hat: CVector<R>,
    /// jammer-Bob uncertainty variances, length n
    pub sigma_jb2: DVector<R>,
    /// Alice-Willie variance
    pub sigma_aw2: R,
    /// jammer-Willie variances, length n
    pub sigma_jw2: DVector<R>,
    /// objective weight on the covertness term
    pub mu: R,
    /// sample count
    pub t: usize,
    /// apply the sqrt(n/p) power rescaling inside objective evaluation
    pub scaled: bool,
}

impl<R: Real> SystemConfig<R> {
    /// Desk-scale defaults: P_a = 15 dBm, P_j = 10 dBm, noise 0 dBm, T = 1000,
    /// mu = 1, unit uncertainty variances. The known parts h_ab and h_jb_hat
    /// are drawn once from CN(0, 1) on the config stream of `seed` and frozen.
    pub fn desk_default(n: usize, p: usize, seed: u64) -> Result<Self> {
        let mut rng = rng::stream(seed, STREAM_CONFIG);
        let h_ab = complex_gaussian(&mut rng, R::one());
        let h_jb_hat = CVector::<R>::from_fn(n, |_, _| complex_gaussian(&mut rng, R::one()));
        let cfg = Self {
            n,
            p,
            p_a: dbm_to_mw(rc(15.0)),
            p_j: dbm_to_mw(rc(10.0)),
            sigma_w2: dbm_to_mw(rc(0.0)),
            sigma_b2: dbm_to_mw(rc(0.0)),
            h_ab,
            h_jb_hat,
            sigma_jb2: DVector::from_element(n, R::one()),
            sigma_aw2: R::one(),
            sigma_jw2: DVector::from_element(n, R::one()),
            mu: R::one(),
            t: 1000,
            scaled: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.p > self.n {
            return Err(Error::Config(format!(
                "require 1 <= p <= n, got n={}, p={}",
                self.n, self.p
            )));
        }
        if self.t == 0 {
            return Err(Error::Config("sample count T must be >= 1".into()));
        }
        for (name, v) in [
            ("P_a", self.p_a),
            ("P_j", self.p_j),
            ("sigma_w2", self.sigma_w2),
            ("sigma_b2", self.sigma_b2),
            ("mu", self.mu),
        ] {
            if v <= R::zero() {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.sigma_aw2 < R::zero() {
            return Err(Error::Config("sigma_aw2 must be nonnegative".into()));
        }
        if self.h_jb_hat.len() != self.n
            || self.sigma_jb2.len() != self.n
            || self.sigma_jw2.len() != self.n
        {
            return Err(Error::Config(
                "per-jammer vectors must have length n".into(),
            ));
        }
        if self.sigma_jb2.iter().any(|&v| v < R::zero())
            || self.sigma_jw2.iter().any(|&v| v < R::zero())
        {
            return Err(Error::Config("variances must be nonnegative".into()));
        }
        Ok(())
    }

    /// n/p when the power rescaling is on, else 1.
    pub fn power_scale(&self) -> R {
        if self.scaled {
            rc::<R>(self.n as f64) / rc(self.p as f64)
        } else {
            R::one()
        }
    }

    /// sqrt(n/p) (the AN amplitude scale).
    pub fn an_scale(&self) -> R {
        self.power_scale().sqrt()
    }
}

/// One joint realization of the channel coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSample<R: Real> {
    pub h_jb: CVector<R>,
    pub h_aw: Complex<R>,
    pub h_jw: CVector<R>,
}

/// T ordered samples reproducible from (config, seed).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDataset<R: Real> {
    pub samples: Vec<ChannelSample<R>>,
    pub seed: u64,
}

impl<R: Real> ChannelDataset<R> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// CN(0, sigma2): independent real and imaginary parts, each N(0, sigma2/2).
pub fn complex_gaussian<R: Real, G: Rng + ?Sized>(rng: &mut G, sigma2: R) -> Complex<R> {
    let s = (sigma2 * rc(0.5)).sqrt();
    let re = R::std_normal(rng) * s;
    let im = R::std_normal(rng) * s;
    Complex::new(re, im)
}

/// Draws T joint samples on the dataset stream of `seed`. Per sample the
/// draw order is fixed: h_jb coordinates, then h_aw, then h_jw coordinates.
pub fn sample_dataset<R: Real>(cfg: &SystemConfig<R>, seed: u64) -> Result<ChannelDataset<R>> {
    cfg.validate()?;
    let mut rng = rng::stream(seed, STREAM_DATASET);
    let mut samples = Vec::with_capacity(cfg.t);
    for _ in 0..cfg.t {
        let h_jb = CVector::<R>::from_fn(cfg.n, |k, _| {
            cfg.h_jb_hat[k] + complex_gaussian(&mut rng, cfg.sigma_jb2[k])
        });
        let h_aw = complex_gaussian(&mut rng, cfg.sigma_aw2);
        let h_jw = CVector::<R>::from_fn(cfg.n, |k, _| complex_gaussian(&mut rng, cfg.sigma_jw2[k]));
        samples.push(ChannelSample { h_jb, h_aw, h_jw });
    }
    Ok(ChannelDataset { samples, seed })
}

/// One AN realization v = scale * X * a with a fresh a ~ CN(0, I_p), drawn
/// on the AN stream of `seed`.
pub fn generate_an_signal<R: Real>(x: &StiefelPoint<R>, scale: R, seed: u64) -> CVector<R> {
    let mut rng = rng::stream(seed, STREAM_AN);
    generate_an_signal_with_rng(x, scale, &mut rng)
}

/// Same as [`generate_an_signal`] with an injected generator.
pub fn generate_an_signal_with_rng<R: Real, G: Rng + ?Sized>(
    x: &StiefelPoint<R>,
    scale: R,
    rng: &mut G,
) -> CVector<R> {
    let a = CVector::<R>::from_fn(x.p(), |_, _| complex_gaussian(rng, R::one()));
    (x.matrix() * a) * Complex::new(scale, R::zero())
}

/// Monte Carlo estimate of the per-symbol AN power
/// (1/n) mean ||sqrt(n/p) X a||^2 over `draws` realizations; expected 1.
pub fn verify_symbol_power<R: Real>(x: &StiefelPoint<R>, draws: usize, seed: u64) -> Result<R> {
    let mut rng = rng::stream(seed, STREAM_AN);
    verify_symbol_power_with_rng(x, draws, &mut rng)
}

pub fn verify_symbol_power_with_rng<R: Real, G: Rng + ?Sized>(
    x: &StiefelPoint<R>,
    draws: usize,
    rng: &mut G,
) -> Result<R> {
    if draws == 0 {
        return Err(Error::Config("draws must be >= 1".into()));
    }
    let scale = (rc::<R>(x.n() as f64) / rc(x.p() as f64)).sqrt();
    let mut acc = R::zero();
    for _ in 0..draws {
        let v = generate_an_signal_with_rng(x, scale, rng);
        acc += v.norm_squared();
    }
    Ok(acc / rc(draws as f64) / rc(x.n() as f64))
}
