//! Geometry of the complex Stiefel manifold St(p, n, C), the set of n×p
//! complex matrices with orthonormal columns.
//!
//! Provides feasibility checks, tangent projection, the Riemannian metric,
//! the QR retraction with the positive-diagonal convention, projection-based
//! vector transport, the inverse retraction, and the 2n×2p real-block
//! representation used for cross-checks against the real Stiefel manifold.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::rng::{self, STREAM_INIT};
use crate::scalar::{rc, Real};

pub type CMatrix<R> = DMatrix<Complex<R>>;
pub type CVector<R> = DVector<Complex<R>>;

/// Default feasibility / tangency tolerance (about 100x accumulated
/// double-precision QR error at small dimensions).
pub const DEFAULT_TOL: f64 = 1e-10;

/// A point on St(p, n, C): an n×p complex matrix X with X^H X = I_p.
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelPoint<R: Real> {
    data: CMatrix<R>,
}

/// A tangent vector xi at a base point X, satisfying X^H xi + xi^H X = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector<R: Real> {
    base: StiefelPoint<R>,
    data: CMatrix<R>,
}

/// The 2n×2p real representation [[Re X, Im X], [-Im X, Re X]].
#[derive(Debug, Clone, PartialEq)]
pub struct RealRepresentation<R: Real> {
    pub data: DMatrix<R>,
}

fn check_dims(n: usize, p: usize) -> Result<()> {
    if p == 0 || n == 0 || p > n {
        return Err(Error::Dimension(format!(
            "Stiefel dimensions require 1 <= p <= n, got n={n}, p={p}"
        )));
    }
    Ok(())
}

/// (A + A^H) / 2
fn herm_part<R: Real>(a: &CMatrix<R>) -> CMatrix<R> {
    (a + a.adjoint()) * Complex::new(rc::<R>(0.5), R::zero())
}

/// (A - A^H) / 2
#[cfg(test)]
fn skew_part<R: Real>(a: &CMatrix<R>) -> CMatrix<R> {
    (a - a.adjoint()) * Complex::new(rc::<R>(0.5), R::zero())
}

/// Q-factor of the thin complex QR decomposition, with the phases chosen so
/// the R-factor has strictly positive real diagonal. This makes qf(.) a
/// function: qf(X R) = X for any upper-triangular R with positive diagonal.
pub fn qf<R: Real>(a: &CMatrix<R>) -> Result<CMatrix<R>> {
    let p = a.ncols();
    let scale = a.norm() + R::one();
    let qr = nalgebra::linalg::QR::new(a.clone());
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..p {
        let d = r[(j, j)];
        let mag = (d.re * d.re + d.im * d.im).sqrt();
        if mag <= rc::<R>(1e-13) * scale {
            return Err(Error::RankDeficient {
                index: j,
                magnitude: mag.to_f64().unwrap_or(0.0),
            });
        }
        // multiply column j by the unit phase of r_jj so the corrected
        // R-factor diagonal becomes |r_jj| > 0
        let phase = d / Complex::new(mag, R::zero());
        for i in 0..q.nrows() {
            q[(i, j)] *= phase;
        }
    }
    Ok(q)
}

impl<R: Real> StiefelPoint<R> {
    /// Wraps a matrix after checking dimensions and feasibility.
    pub fn new(data: CMatrix<R>) -> Result<Self> {
        check_dims(data.nrows(), data.ncols())?;
        let point = Self { data };
        let res = point.feasibility_residual();
        if res > rc(DEFAULT_TOL) {
            return Err(Error::Numerical(format!(
                "matrix is not on the Stiefel manifold: ||X^H X - I||_F = {:e}",
                res.to_f64().unwrap_or(f64::NAN)
            )));
        }
        Ok(point)
    }

    /// Wraps a matrix without the feasibility check.
    pub fn from_matrix_unchecked(data: CMatrix<R>) -> Self {
        Self { data }
    }

    /// Random point: Q-factor of an n×p matrix with i.i.d. standard complex
    /// Gaussian entries, drawn from the initialization stream of `seed`.
    pub fn random(n: usize, p: usize, seed: u64) -> Result<Self> {
        check_dims(n, p)?;
        let mut rng = rng::stream(seed, STREAM_INIT);
        let inv_sqrt2 = rc::<R>(std::f64::consts::FRAC_1_SQRT_2);
        let mut g = CMatrix::<R>::zeros(n, p);
        for j in 0..p {
            for i in 0..n {
                let re = R::std_normal(&mut rng) * inv_sqrt2;
                let im = R::std_normal(&mut rng) * inv_sqrt2;
                g[(i, j)] = Complex::new(re, im);
            }
        }
        Ok(Self { data: qf(&g)? })
    }

    /// First p columns of I_n.
    pub fn identity_basis(n: usize, p: usize) -> Result<Self> {
        check_dims(n, p)?;
        Ok(Self {
            data: CMatrix::<R>::identity(n, p),
        })
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn p(&self) -> usize {
        self.data.ncols()
    }

    pub fn matrix(&self) -> &CMatrix<R> {
        &self.data
    }

    /// ||X^H X - I_p||_F
    pub fn feasibility_residual(&self) -> R {
        let gram = self.data.adjoint() * &self.data;
        let p = self.data.ncols();
        (gram - CMatrix::<R>::identity(p, p)).norm()
    }

    pub fn is_feasible(&self, tol: R) -> bool {
        self.feasibility_residual() <= tol
    }

    /// Real-block representation of Fact-1 type equivalence.
    pub fn real_representation(&self) -> RealRepresentation<R> {
        RealRepresentation {
            data: real_block(&self.data),
        }
    }
}

/// [[Re M, Im M], [-Im M, Re M]] for an arbitrary complex matrix.
pub fn real_block<R: Real>(m: &CMatrix<R>) -> DMatrix<R> {
    let (n, p) = m.shape();
    let mut out = DMatrix::<R>::zeros(2 * n, 2 * p);
    for j in 0..p {
        for i in 0..n {
            let z = m[(i, j)];
            out[(i, j)] = z.re;
            out[(i, j + p)] = z.im;
            out[(i + n, j)] = -z.im;
            out[(i + n, j + p)] = z.re;
        }
    }
    out
}

impl<R: Real> RealRepresentation<R> {
    /// Block-structure residual: top-left vs bottom-right and top-right vs
    /// negated bottom-left, summed in Frobenius norm.
    pub fn block_structure_residual(&self) -> R {
        let (rows, cols) = self.data.shape();
        let (n, p) = (rows / 2, cols / 2);
        let tl = self.data.view((0, 0), (n, p));
        let tr = self.data.view((0, p), (n, p));
        let bl = self.data.view((n, 0), (n, p));
        let br = self.data.view((n, p), (n, p));
        ((tl - br).norm_squared() + (tr + bl).norm_squared()).sqrt()
    }

    /// ||X̄^T X̄ - I_{2p}||_F
    pub fn feasibility_residual(&self) -> R {
        let cols = self.data.ncols();
        (self.data.transpose() * &self.data - DMatrix::<R>::identity(cols, cols)).norm()
    }
}

impl<R: Real> TangentVector<R> {
    /// Wraps (base, data) after checking the tangency condition.
    pub fn new(base: StiefelPoint<R>, data: CMatrix<R>) -> Result<Self> {
        if data.shape() != base.data.shape() {
            return Err(Error::Dimension(format!(
                "tangent data shape {:?} does not match base {:?}",
                data.shape(),
                base.data.shape()
            )));
        }
        let v = Self { base, data };
        let res = v.tangency_residual();
        if res > rc(DEFAULT_TOL) {
            return Err(Error::Numerical(format!(
                "vector is not tangent: ||X^H xi + xi^H X||_F = {:e}",
                res.to_f64().unwrap_or(f64::NAN)
            )));
        }
        Ok(v)
    }

    pub fn from_parts_unchecked(base: StiefelPoint<R>, data: CMatrix<R>) -> Self {
        Self { base, data }
    }

    pub fn zero(base: StiefelPoint<R>) -> Self {
        let (n, p) = base.data.shape();
        Self {
            base,
            data: CMatrix::<R>::zeros(n, p),
        }
    }

    pub fn base(&self) -> &StiefelPoint<R> {
        &self.base
    }

    pub fn matrix(&self) -> &CMatrix<R> {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix<R> {
        self.data
    }

    /// ||X^H xi + xi^H X||_F
    pub fn tangency_residual(&self) -> R {
        let m = self.base.data.adjoint() * &self.data;
        (&m + m.adjoint()).norm()
    }

    pub fn norm(&self) -> R {
        self.data.norm()
    }

    pub fn scale(&self, a: R) -> Self {
        Self {
            base: self.base.clone(),
            data: &self.data * Complex::new(a, R::zero()),
        }
    }
}

/// Orthogonal projection of an ambient matrix onto the tangent space at X:
/// xi = G - X herm(X^H G), equivalently (I - X X^H) G + X skew(X^H G).
pub fn tangent_project<R: Real>(x: &StiefelPoint<R>, g: &CMatrix<R>) -> Result<TangentVector<R>> {
    if g.shape() != x.data.shape() {
        return Err(Error::Dimension(format!(
            "gradient shape {:?} does not match point {:?}",
            g.shape(),
            x.data.shape()
        )));
    }
    let xhg = x.data.adjoint() * g;
    let data = g - &x.data * herm_part(&xhg);
    Ok(TangentVector {
        base: x.clone(),
        data,
    })
}

/// Riemannian metric Re tr(xi^H eta); the factor-1/2 of the real-block form
/// cancels its 2x redundancy.
pub fn metric<R: Real>(xi: &TangentVector<R>, eta: &TangentVector<R>) -> Result<R> {
    if xi.base != eta.base {
        return Err(Error::BasePointMismatch);
    }
    Ok(frobenius_inner(&xi.data, &eta.data))
}

/// Re tr(A^H B)
pub fn frobenius_inner<R: Real>(a: &CMatrix<R>, b: &CMatrix<R>) -> R {
    let mut acc = R::zero();
    for (x, y) in a.iter().zip(b.iter()) {
        acc += x.re * y.re + x.im * y.im;
    }
    acc
}

/// QR retraction R_X(xi) = qf(X + xi).
pub fn retract<R: Real>(x: &StiefelPoint<R>, xi: &TangentVector<R>) -> Result<StiefelPoint<R>> {
    if xi.base != *x {
        return Err(Error::BasePointMismatch);
    }
    let q = qf(&(&x.data + &xi.data))?;
    Ok(StiefelPoint { data: q })
}

/// Vector transport to the tangent space at Y; the formula depends only on
/// the target point, so it applies to any ambient matrix of matching shape.
pub fn transport<R: Real>(y: &StiefelPoint<R>, xi: &CMatrix<R>) -> Result<TangentVector<R>> {
    tangent_project(y, xi)
}

/// Inverse retraction: the tangent vector eta at `base` with
/// retract(base, eta) = target. Solves R^H (target^H base) + (base^H target) R = 2I
/// for upper-triangular R with positive diagonal, then eta = target R - base.
pub fn inverse_retract<R: Real>(
    base: &StiefelPoint<R>,
    target: &StiefelPoint<R>,
) -> Result<TangentVector<R>> {
    if base.data.shape() != target.data.shape() {
        return Err(Error::Dimension(format!(
            "points have different shapes: {:?} vs {:?}",
            base.data.shape(),
            target.data.shape()
        )));
    }
    let m = base.data.adjoint() * &target.data;
    let r = match solve_triangular_factor_recursive(&m) {
        Ok(r) => r,
        Err(_) => solve_triangular_factor_dense(&m)?,
    };
    let p = m.nrows();
    for j in 0..p {
        if r[(j, j)].re <= R::zero() {
            return Err(Error::NoSolution(format!(
                "triangular factor has non-positive diagonal at {j}; points too far apart"
            )));
        }
    }
    let data = &target.data * &r - &base.data;
    Ok(TangentVector {
        base: base.clone(),
        data,
    })
}

/// Column-by-column forward recursion for the upper-triangular factor:
/// column j of R is determined by the Hermitian constraint rows (0..=j, j)
/// once columns 0..j are known.
fn solve_triangular_factor_recursive<R: Real>(m: &CMatrix<R>) -> Result<CMatrix<R>> {
    let p = m.nrows();
    let mut r = CMatrix::<R>::zeros(p, p);
    for j in 0..p {
        // unknowns: r[0..j, j] complex, r[j, j] real -> 2j + 1 reals
        let dim = 2 * j + 1;
        let mut a = DMatrix::<R>::zeros(dim, dim);
        let mut b = DVector::<R>::zeros(dim);
        // complex rows i < j: sum_k m[i,k] r[k,j] = -conj((M R)_{j,i})
        for i in 0..j {
            let mut c = Complex::new(R::zero(), R::zero());
            for k in 0..=i {
                c += m[(j, k)] * r[(k, i)];
            }
            let rhs = -c.conj();
            for k in 0..j {
                a[(2 * i, 2 * k)] = m[(i, k)].re;
                a[(2 * i, 2 * k + 1)] = -m[(i, k)].im;
                a[(2 * i + 1, 2 * k)] = m[(i, k)].im;
                a[(2 * i + 1, 2 * k + 1)] = m[(i, k)].re;
            }
            a[(2 * i, 2 * j)] = m[(i, j)].re;
            a[(2 * i + 1, 2 * j)] = m[(i, j)].im;
            b[2 * i] = rhs.re;
            b[2 * i + 1] = rhs.im;
        }
        // real row i = j: Re sum_k m[j,k] r[k,j] = 1
        for k in 0..j {
            a[(2 * j, 2 * k)] = m[(j, k)].re;
            a[(2 * j, 2 * k + 1)] = -m[(j, k)].im;
        }
        a[(2 * j, 2 * j)] = m[(j, j)].re;
        b[2 * j] = R::one();

        let lu = a.clone().lu();
        let sol = lu
            .solve(&b)
            .ok_or_else(|| Error::NoSolution("singular column system".into()))?;
        let residual = (&a * &sol - &b).norm();
        if residual > rc::<R>(1e-8) * (b.norm() + R::one()) {
            return Err(Error::NoSolution("ill-conditioned column system".into()));
        }
        for k in 0..j {
            r[(k, j)] = Complex::new(sol[2 * k], sol[2 * k + 1]);
        }
        r[(j, j)] = Complex::new(sol[2 * j], R::zero());
    }
    Ok(r)
}

/// Dense fallback: one real linear system over all triangular unknowns.
fn solve_triangular_factor_dense<R: Real>(m: &CMatrix<R>) -> Result<CMatrix<R>> {
    let p = m.nrows();
    // unknown layout: for each column j, [Re r_0j, Im r_0j, ..., Re r_jj]
    let mut offset = vec![0usize; p];
    let mut dim = 0usize;
    for (j, off) in offset.iter_mut().enumerate() {
        *off = dim;
        dim += 2 * j + 1;
    }
    let idx_re = |offset: &[usize], k: usize, j: usize| offset[j] + 2 * k;
    let idx_im = |offset: &[usize], k: usize, j: usize| offset[j] + 2 * k + 1;

    let mut a = DMatrix::<R>::zeros(dim, dim);
    let mut b = DVector::<R>::zeros(dim);
    let mut row = 0usize;
    for j in 0..p {
        for i in 0..=j {
            // (M R)_{ij} + conj((M R)_{ji}) = 2 delta_ij
            // (M R)_{ij} = sum_{k<=j} m[i,k] r[k,j]; conj((M R)_{ji}) = sum_{k<=i} conj(m[j,k] r[k,i])
            if i < j {
                // complex equation: two real rows
                for k in 0..=j {
                    let c = m[(i, k)];
                    a[(row, idx_re(&offset, k, j))] += c.re;
                    a[(row + 1, idx_re(&offset, k, j))] += c.im;
                    if k < j {
                        a[(row, idx_im(&offset, k, j))] += -c.im;
                        a[(row + 1, idx_im(&offset, k, j))] += c.re;
                    }
                }
                for k in 0..=i {
                    let c = m[(j, k)];
                    // conj(c * r[k,i]) contributes Re = c.re*Re r - (-c.im)*Im r ... expand:
                    // conj(c z) = (c.re z.re - c.im z.im) - i (c.re z.im + c.im z.re)... careful:
                    // c z = (c.re z.re - c.im z.im) + i(c.re z.im + c.im z.re)
                    // conj(c z).re = c.re z.re - c.im z.im
                    // conj(c z).im = -(c.re z.im + c.im z.re)
                    a[(row, idx_re(&offset, k, i))] += c.re;
                    a[(row + 1, idx_re(&offset, k, i))] += -c.im;
                    if k < i {
                        a[(row, idx_im(&offset, k, i))] += -c.im;
                        a[(row + 1, idx_im(&offset, k, i))] += -c.re;
                    }
                }
                b[row] = R::zero();
                b[row + 1] = R::zero();
                row += 2;
            } else {
                // i == j: real equation 2 Re (M R)_{jj} = 2
                for k in 0..=j {
                    let c = m[(j, k)];
                    a[(row, idx_re(&offset, k, j))] += c.re;
                    if k < j {
                        a[(row, idx_im(&offset, k, j))] += -c.im;
                    }
                }
                b[row] = R::one();
                row += 1;
            }
        }
    }
    debug_assert_eq!(row, dim);
    let sol = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::NoSolution("singular base^H target system".into()))?;
    let mut r = CMatrix::<R>::zeros(p, p);
    for j in 0..p {
        for k in 0..j {
            r[(k, j)] = Complex::new(sol[idx_re(&offset, k, j)], sol[idx_im(&offset, k, j)]);
        }
        r[(j, j)] = Complex::new(sol[idx_re(&offset, j, j)], R::zero());
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    type P = StiefelPoint<f64>;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn random_point_is_feasible_and_deterministic() {
        let x = P::random(4, 2, 7).unwrap();
        assert!(x.feasibility_residual() < 1e-12);
        let y = P::random(4, 2, 7).unwrap();
        assert_eq!(x.matrix(), y.matrix());
        let z = P::random(4, 2, 8).unwrap();
        assert_ne!(x.matrix(), z.matrix());
    }

    #[test]
    fn random_point_1x1_has_unit_modulus() {
        let x = P::random(1, 1, 3).unwrap();
        assert!((x.matrix()[(0, 0)].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn invalid_dimensions_rejected() {
        assert!(P::random(2, 3, 0).is_err());
        assert!(P::random(0, 0, 0).is_err());
    }

    #[test]
    fn feasibility_residual_values() {
        let x = P::identity_basis(4, 2).unwrap();
        assert_eq!(x.feasibility_residual(), 0.0);

        // 2 * identity basis: ||4I - I||_F = 3 sqrt(p)
        let m = CMatrix::<f64>::identity(4, 2) * c(2.0, 0.0);
        let y = P::from_matrix_unchecked(m);
        assert!((y.feasibility_residual() - 3.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn tangent_project_idempotent_and_orthogonal() {
        let x = P::random(5, 2, 11).unwrap();
        let mut g = CMatrix::<f64>::zeros(5, 2);
        for (k, v) in g.iter_mut().enumerate() {
            *v = c((k as f64 * 0.37).sin(), (k as f64 * 0.71).cos());
        }
        let xi = tangent_project(&x, &g).unwrap();
        assert!(xi.tangency_residual() < 1e-12);

        // equivalent split form: (I - X X^H) G + X skew(X^H G)
        let xm = x.matrix();
        let split = (&g - xm * (xm.adjoint() * &g)) + xm * skew_part(&(xm.adjoint() * &g));
        assert!((xi.matrix() - split).norm() < 1e-13);
        let xi2 = tangent_project(&x, xi.matrix()).unwrap();
        assert!((xi.matrix() - xi2.matrix()).norm() < 1e-12);
        // residual lies in the normal space: metric-orthogonal to the projection
        let residual = &g - xi.matrix();
        assert!(frobenius_inner(xi.matrix(), &residual).abs() < 1e-10);
    }

    #[test]
    fn project_of_normal_direction_is_zero() {
        // G = X H with H Hermitian lies in the normal space
        let x = P::random(4, 2, 5).unwrap();
        let mut h = CMatrix::<f64>::zeros(2, 2);
        h[(0, 0)] = c(1.3, 0.0);
        h[(1, 1)] = c(-0.4, 0.0);
        h[(0, 1)] = c(0.2, 0.7);
        h[(1, 0)] = c(0.2, -0.7);
        let g = x.matrix() * h;
        let xi = tangent_project(&x, &g).unwrap();
        assert!(xi.norm() < 1e-12);
    }

    #[test]
    fn project_e2_at_e1() {
        let x = P::identity_basis(2, 1).unwrap();
        let mut g = CMatrix::<f64>::zeros(2, 1);
        g[(1, 0)] = c(1.0, 0.0);
        let xi = tangent_project(&x, &g).unwrap();
        assert!((xi.matrix() - g).norm() < 1e-14);
    }

    #[test]
    fn metric_basics() {
        let x = P::random(3, 2, 1).unwrap();
        let zero = TangentVector::zero(x.clone());
        assert_eq!(metric(&zero, &zero).unwrap(), 0.0);

        let mut d = CMatrix::<f64>::zeros(3, 2);
        d[(2, 0)] = c(1.0, 0.0);
        let xi = tangent_project(&x, &d).unwrap();
        let eta = tangent_project(&x, &(&d * c(0.0, 1.0))).unwrap();
        assert!((metric(&xi, &eta).unwrap() - metric(&eta, &xi).unwrap()).abs() < 1e-14);

        let y = P::random(3, 2, 2).unwrap();
        let other = TangentVector::zero(y);
        assert!(matches!(
            metric(&xi, &other),
            Err(Error::BasePointMismatch)
        ));
    }

    #[test]
    fn metric_single_entry() {
        let x = P::identity_basis(3, 1).unwrap();
        let mut d = CMatrix::<f64>::zeros(3, 1);
        d[(1, 0)] = c(1.0, 0.0);
        let xi = TangentVector::new(x, d).unwrap();
        assert!((metric(&xi, &xi).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn retract_zero_is_identity() {
        let x = P::random(4, 2, 9).unwrap();
        let y = retract(&x, &TangentVector::zero(x.clone())).unwrap();
        assert!((x.matrix() - y.matrix()).norm() < 1e-14);
    }

    #[test]
    fn retract_feasible_and_rigid() {
        let x = P::random(6, 3, 21).unwrap();
        let mut d = CMatrix::<f64>::zeros(6, 3);
        for (k, v) in d.iter_mut().enumerate() {
            *v = c((k as f64 + 0.5).sin(), (k as f64 * 1.3).cos());
        }
        let xi = tangent_project(&x, &d).unwrap();
        let y = retract(&x, &xi).unwrap();
        assert!(y.feasibility_residual() < 1e-10);

        let t = 1e-6;
        let yt = retract(&x, &xi.scale(t)).unwrap();
        let slope = (yt.matrix() - x.matrix()) / c(t, 0.0);
        assert!((slope - xi.matrix()).norm() < 1e-4);
    }

    #[test]
    fn retract_rank_deficient_errors() {
        let x = P::identity_basis(2, 2).unwrap();
        // xi = -X is tangent? No, but from_parts_unchecked lets us force X + xi = 0
        let xi = TangentVector::from_parts_unchecked(x.clone(), -x.matrix().clone());
        assert!(matches!(
            retract(&x, &xi),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn transport_properties() {
        let x = P::random(5, 2, 31).unwrap();
        let y = P::random(5, 2, 32).unwrap();
        let mut d = CMatrix::<f64>::zeros(5, 2);
        for (k, v) in d.iter_mut().enumerate() {
            *v = c((k as f64).cos(), (2.0 * k as f64).sin());
        }
        let xi = tangent_project(&x, &d).unwrap();

        // zero transports to zero
        let z = transport(&y, &CMatrix::<f64>::zeros(5, 2)).unwrap();
        assert_eq!(z.norm(), 0.0);

        // transport at the own base point leaves tangents unchanged
        let same = transport(&x, xi.matrix()).unwrap();
        assert!((same.matrix() - xi.matrix()).norm() < 1e-12);

        // result tangent at target, linear in the argument
        let t = transport(&y, xi.matrix()).unwrap();
        assert!(t.tangency_residual() < 1e-10);
        let eta = tangent_project(&x, &(&d * c(0.3, -0.9))).unwrap();
        let lin_lhs = transport(
            &y,
            &(xi.matrix() * c(2.5, 0.0) + eta.matrix() * c(-1.25, 0.0)),
        )
        .unwrap();
        let lin_rhs = transport(&y, xi.matrix()).unwrap().matrix() * c(2.5, 0.0)
            + transport(&y, eta.matrix()).unwrap().matrix() * c(-1.25, 0.0);
        assert!((lin_lhs.matrix() - &lin_rhs).norm() < 1e-12);
    }

    #[test]
    fn inverse_retract_identity_and_round_trip() {
        let x = P::random(6, 3, 41).unwrap();
        let zero = inverse_retract(&x, &x).unwrap();
        assert!(zero.norm() < 1e-12);

        let mut d = CMatrix::<f64>::zeros(6, 3);
        for (k, v) in d.iter_mut().enumerate() {
            *v = c((k as f64 * 0.21).sin(), (k as f64 * 0.83).cos());
        }
        let mut xi = tangent_project(&x, &d).unwrap();
        xi = xi.scale(0.4 / xi.norm());
        let y = retract(&x, &xi).unwrap();

        let eta = inverse_retract(&x, &y).unwrap();
        assert!(eta.tangency_residual() < 1e-10);
        let y2 = retract(&x, &eta).unwrap();
        assert!((y.matrix() - y2.matrix()).norm() < 1e-8);
    }

    #[test]
    fn inverse_retract_dense_fallback_agrees() {
        let x = P::random(5, 3, 51).unwrap();
        let mut d = CMatrix::<f64>::zeros(5, 3);
        for (k, v) in d.iter_mut().enumerate() {
            *v = c((k as f64 * 0.5).cos(), (k as f64 * 0.11).sin());
        }
        let mut xi = tangent_project(&x, &d).unwrap();
        xi = xi.scale(0.3 / xi.norm());
        let y = retract(&x, &xi).unwrap();
        let m = x.matrix().adjoint() * y.matrix();
        let r1 = solve_triangular_factor_recursive(&m).unwrap();
        let r2 = solve_triangular_factor_dense(&m).unwrap();
        assert!((&r1 - &r2).norm() < 1e-10);
    }

    #[test]
    fn real_representation_cases() {
        // x = 1 (n = p = 1) -> 2x2 identity
        let one = P::new(CMatrix::<f64>::from_element(1, 1, c(1.0, 0.0))).unwrap();
        assert!((one.real_representation().data - DMatrix::<f64>::identity(2, 2)).norm() < 1e-15);

        // x = i -> [[0, 1], [-1, 0]]
        let i = P::new(CMatrix::<f64>::from_element(1, 1, c(0.0, 1.0))).unwrap();
        let rep = i.real_representation();
        let expected = DMatrix::<f64>::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!((&rep.data - expected).norm() < 1e-15);

        let x = P::random(4, 2, 61).unwrap();
        let rep = x.real_representation();
        assert!(rep.feasibility_residual() < 1e-10);
        assert_eq!(rep.block_structure_residual(), 0.0);
    }

    #[test]
    fn unitary_group_case_p_equals_n() {
        // degenerate p = n: (I - X X^H) vanishes, formulas still apply
        let x = P::random(3, 3, 77).unwrap();
        let mut d = CMatrix::<f64>::zeros(3, 3);
        for (k, v) in d.iter_mut().enumerate() {
            *v = c((k as f64 * 0.9).sin(), (k as f64 * 0.4).cos());
        }
        let xi = tangent_project(&x, &d).unwrap();
        assert!(xi.tangency_residual() < 1e-12);
        let proj_part = (CMatrix::<f64>::identity(3, 3) - x.matrix() * x.matrix().adjoint())
            * d.clone();
        assert!(proj_part.norm() < 1e-12);
        let y = retract(&x, &xi.scale(0.1)).unwrap();
        assert!(y.feasibility_residual() < 1e-10);
    }

    #[test]
    fn works_in_f32() {
        let x = StiefelPoint::<f32>::random(4, 2, 7).unwrap();
        assert!(x.feasibility_residual() < 1e-5);
    }
}
