//! In-process property checks for the manifold geometry and the objective
//! gradients; one pass/fail line per check.

use covertan::channel::{complex_gaussian, sample_dataset};
use covertan::objective::{euclidean_grad_full, objective_full};
use covertan::rng;
use covertan::stiefel::{
    frobenius_inner, inverse_retract, metric, real_block, retract, tangent_project,
};
use covertan::{CMatrix, StiefelPoint, SystemConfig};

fn random_ambient(n: usize, p: usize, seed: u64) -> CMatrix {
    let mut rng = rng::stream(seed, rng::STREAM_INIT);
    CMatrix::from_fn(n, p, |_, _| complex_gaussian(&mut rng, 1.0))
}

struct Report {
    all_ok: bool,
}

impl Report {
    fn check(&mut self, name: &str, ok: bool, detail: String) {
        if ok {
            println!("PASS {name}");
        } else {
            println!("FAIL {name}: {detail}");
            self.all_ok = false;
        }
    }
}

fn geometry_checks(rep: &mut Report, seed: u64) {
    let (n, p) = (8, 3);
    let x = StiefelPoint::random(n, p, seed).unwrap();
    let g = random_ambient(n, p, seed.wrapping_add(1));
    let xi = tangent_project(&x, &g).unwrap();

    let r = xi.tangency_residual();
    rep.check("projection tangency", r < 1e-12, format!("residual {r:e}"));

    let xi2 = tangent_project(&x, xi.matrix()).unwrap();
    let r = (xi.matrix() - xi2.matrix()).norm();
    rep.check("projection idempotence", r < 1e-12, format!("residual {r:e}"));

    let y = retract(&x, &xi).unwrap();
    let r = y.feasibility_residual();
    rep.check("retraction feasibility", r < 1e-10, format!("residual {r:e}"));

    // d/dt R_x(t xi) at t = 0 equals xi
    let t = 1e-6;
    let plus = retract(&x, &xi.scale(t)).unwrap();
    let minus = retract(&x, &xi.scale(-t)).unwrap();
    let slope = (plus.matrix() - minus.matrix()) / num_complex::Complex::new(2.0 * t, 0.0);
    let r = (&slope - xi.matrix()).norm() / xi.norm();
    rep.check("retraction rigidity", r < 1e-4, format!("slope error {r:e}"));

    // transport = projection at the target: tangency and linearity
    let eta = tangent_project(&x, &random_ambient(n, p, seed.wrapping_add(2))).unwrap();
    let ta = tangent_project(&y, xi.matrix()).unwrap();
    let tb = tangent_project(&y, eta.matrix()).unwrap();
    let tsum = tangent_project(&y, &(xi.matrix() + eta.matrix())).unwrap();
    let lin = (tsum.matrix() - ta.matrix() - tb.matrix()).norm();
    let tan = ta.tangency_residual().max(tb.tangency_residual());
    rep.check(
        "transport tangency+linearity",
        tan < 1e-12 && lin < 1e-12,
        format!("tangency {tan:e}, linearity {lin:e}"),
    );

    // real 2n x 2p representation is multiplicative and orthogonality-preserving
    let a = real_block(x.matrix());
    let gram = a.transpose() * &a;
    let r = (&gram - nalgebra::DMatrix::<f64>::identity(2 * p, 2 * p)).norm();
    let ab = real_block(&(x.matrix() * xi.matrix().adjoint()));
    let split = real_block(x.matrix()) * real_block(xi.matrix()).transpose();
    let mult = (&ab - &split).norm();
    rep.check(
        "real/complex equivalence",
        r < 1e-10 && mult < 1e-10,
        format!("orthogonality {r:e}, multiplicativity {mult:e}"),
    );

    // inverse retraction round trip
    let small = xi.scale(0.1 / xi.norm().max(1.0));
    let y2 = retract(&x, &small).unwrap();
    let back = inverse_retract(&x, &y2).unwrap();
    let r = (back.matrix() - small.matrix()).norm();
    rep.check(
        "inverse-retraction round trip",
        r < 1e-8,
        format!("residual {r:e}"),
    );

    // metric positivity
    let m = metric(&xi, &xi).unwrap();
    rep.check("metric positivity", m > 0.0, format!("<xi,xi> = {m:e}"));
}

fn gradient_checks(rep: &mut Report, seed: u64) {
    for (n, p) in [(4usize, 2usize), (8, 4), (18, 6)] {
        let mut cfg = SystemConfig::desk_default(n, p, seed).unwrap();
        cfg.t = 16;
        let ds = sample_dataset(&cfg, seed.wrapping_add(1)).unwrap();
        let x = StiefelPoint::random(n, p, seed.wrapping_add(2)).unwrap();
        let grad = euclidean_grad_full(&x, &ds, &cfg).unwrap();

        let mut worst = 0.0f64;
        let step = 1e-6;
        for d in 0..20 {
            let dir = random_ambient(n, p, seed.wrapping_add(10 + d));
            let dir = &dir / num_complex::Complex::new(dir.norm(), 0.0);
            let fp = objective_full(
                &StiefelPoint::from_matrix_unchecked(
                    x.matrix() + &dir * num_complex::Complex::new(step, 0.0),
                ),
                &ds,
                &cfg,
            )
            .unwrap()
            .total;
            let fm = objective_full(
                &StiefelPoint::from_matrix_unchecked(
                    x.matrix() - &dir * num_complex::Complex::new(step, 0.0),
                ),
                &ds,
                &cfg,
            )
            .unwrap()
            .total;
            let fd = (fp - fm) / (2.0 * step);
            let analytic = frobenius_inner(&grad, &dir);
            let rel = (fd - analytic).abs() / analytic.abs().max(1e-12);
            worst = worst.max(rel);
        }
        rep.check(
            &format!("gradient finite differences (n={n}, p={p})"),
            worst < 1e-5,
            format!("worst relative error {worst:e}"),
        );
    }
}

fn estimator_check(rep: &mut Report, seed: u64) {
    use covertan::optimizer::{riemannian_full_gradient, svrg_gradient};
    let mut cfg = SystemConfig::desk_default(8, 4, seed).unwrap();
    cfg.t = 32;
    let ds = sample_dataset(&cfg, seed).unwrap();
    let anchor = StiefelPoint::random(8, 4, seed.wrapping_add(1)).unwrap();
    let full_anchor = riemannian_full_gradient(&anchor, &ds, &cfg).unwrap();
    let step = full_anchor.scale(-0.05);
    let x = retract(&anchor, &step).unwrap();

    let mut mean = CMatrix::zeros(8, 4);
    for t in 0..ds.len() {
        mean += svrg_gradient(&x, &anchor, t, &ds, &cfg, &full_anchor)
            .unwrap()
            .into_matrix();
    }
    mean /= num_complex::Complex::new(ds.len() as f64, 0.0);
    let full = riemannian_full_gradient(&x, &ds, &cfg).unwrap();
    let r = (&mean - full.matrix()).norm();
    rep.check("estimator unbiasedness", r < 1e-12, format!("residual {r:e}"));
}

/// Runs every check; returns true when all pass.
pub fn run_all(seed: u64) -> bool {
    let mut rep = Report { all_ok: true };
    geometry_checks(&mut rep, seed);
    gradient_checks(&mut rep, seed);
    estimator_check(&mut rep, seed);
    if rep.all_ok {
        println!("selftest: all checks passed");
    } else {
        println!("selftest: FAILURES detected");
    }
    rep.all_ok
}
