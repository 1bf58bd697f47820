//! Translation- and evolution-equation checks for the constructed
//! families: every built-in soliton must satisfy the six first-order
//! operator identities by finite differences, keep the Lyapunov equation
//! along the whole grid, and agree with an independently integrated copy.

use vessels::construction::{
    build_soliton, evolved_b, evolved_c, evolved_x, integrate_prevessel_ode, Soliton, SolitonSpec,
};
use vessels::{cx, C64, Matrix};

fn cz(re: f64, im: f64) -> C64 {
    cx(re, im)
}

fn solitons() -> Vec<(&'static str, Soliton<f64>)> {
    vec![
        ("exponential", build_soliton(SolitonSpec::Exponential { k: 1.0, m: 0.3 }).unwrap()),
        ("rational", build_soliton(SolitonSpec::Rational { b: cz(1.0, 0.0), k: 1.0 }).unwrap()),
        (
            "two-dim",
            build_soliton(SolitonSpec::TwoDim {
                k1: 1.0,
                k2: 2.0,
                b1: cz(1.0, 0.0),
                b2: cz(0.5, 0.0),
            })
            .unwrap(),
        ),
        (
            "two-dim degenerate",
            build_soliton(SolitonSpec::TwoDim {
                k1: 1.4,
                k2: 1.4,
                b1: cz(0.8, 0.3),
                b2: cz(0.5, -0.2),
            })
            .unwrap(),
        ),
    ]
}

fn fd_x(f: &dyn Fn(f64) -> Matrix<f64>, x: f64, h: f64) -> Matrix<f64> {
    let num = &(&f(x + h) - &f(x - h)).scale_re(8.0) - &(&f(x + 2.0 * h) - &f(x - 2.0 * h));
    num.scale_re(1.0 / (12.0 * h))
}

const POINTS: [(f64, f64); 6] = [
    (0.0, 0.0),
    (0.4, 0.1),
    (-0.7, -0.15),
    (1.1, 0.05),
    (0.25, -0.2),
    (0.9, 0.3),
];

#[test]
fn translation_equation_for_b() {
    // dB/dx = -(A B sigma2 + B gamma) sigma1^{-1}
    for (name, sol) in solitons() {
        let fam = &sol.family;
        let a = Matrix::diag(&fam.data.lambdas);
        for &(x, t) in &POINTS {
            let db = fd_x(&|y| evolved_b(&fam.data, &fam.params, y, t), x, 1e-4);
            let b = evolved_b(&fam.data, &fam.params, x, t);
            let want = (&(&(&a * &b) * &fam.params.sigma2) + &(&b * &fam.params.gamma))
                .map(|z| -z);
            let want = &want * fam.params.sigma1_inv();
            assert!(
                db.approx_eq(&want, 1e-6, 1e-6),
                "{name} at ({x},{t}): {:.3e}",
                (&db - &want).norm_inf()
            );
        }
    }
}

#[test]
fn translation_equation_for_c() {
    // dC/dx = sigma1^{-1}(-sigma2 C A_zeta + gamma C)
    for (name, sol) in solitons() {
        let fam = &sol.family;
        let az = Matrix::diag(&fam.data.mus);
        for &(x, t) in &POINTS {
            let dc = fd_x(&|y| evolved_c(&fam.data, &fam.params, y, t), x, 1e-4);
            let c = evolved_c(&fam.data, &fam.params, x, t);
            let inner = &(&(&fam.params.sigma2.map(|z| -z) * &c) * &az)
                + &(&fam.params.gamma * &c);
            let want = fam.params.sigma1_inv() * &inner;
            assert!(
                dc.approx_eq(&want, 1e-6, 1e-6),
                "{name} at ({x},{t}): {:.3e}",
                (&dc - &want).norm_inf()
            );
        }
    }
}

#[test]
fn translation_equation_for_x() {
    // dX/dx = B sigma2 C
    for (name, sol) in solitons() {
        let fam = &sol.family;
        for &(x, t) in &POINTS {
            let dx = fd_x(&|y| evolved_x(&fam.data, &fam.params, y, t), x, 1e-4);
            let b = evolved_b(&fam.data, &fam.params, x, t);
            let c = evolved_c(&fam.data, &fam.params, x, t);
            let want = &(&b * &fam.params.sigma2) * &c;
            assert!(
                dx.approx_eq(&want, 1e-6, 1e-6),
                "{name} at ({x},{t}): {:.3e}",
                (&dx - &want).norm_inf()
            );
        }
    }
}

#[test]
fn evolution_equation_for_b() {
    // dB/dt = i A dB/dx
    for (name, sol) in solitons() {
        let fam = &sol.family;
        let a = Matrix::diag(&fam.data.lambdas);
        for &(x, t) in &POINTS {
            let dbt = fd_x(&|u| evolved_b(&fam.data, &fam.params, x, u), t, 1e-4);
            let dbx = fd_x(&|y| evolved_b(&fam.data, &fam.params, y, t), x, 1e-4);
            let want = (&a * &dbx).scale(cz(0.0, 1.0));
            assert!(
                dbt.approx_eq(&want, 1e-6, 1e-6),
                "{name} at ({x},{t}): {:.3e}",
                (&dbt - &want).norm_inf()
            );
        }
    }
}

#[test]
fn evolution_equation_for_c() {
    // dC/dt = -i dC/dx A_zeta
    for (name, sol) in solitons() {
        let fam = &sol.family;
        let az = Matrix::diag(&fam.data.mus);
        for &(x, t) in &POINTS {
            let dct = fd_x(&|u| evolved_c(&fam.data, &fam.params, x, u), t, 1e-4);
            let dcx = fd_x(&|y| evolved_c(&fam.data, &fam.params, y, t), x, 1e-4);
            let want = (&dcx * &az).scale(cz(0.0, -1.0));
            assert!(
                dct.approx_eq(&want, 1e-6, 1e-6),
                "{name} at ({x},{t}): {:.3e}",
                (&dct - &want).norm_inf()
            );
        }
    }
}

#[test]
fn evolution_equation_for_x() {
    // dX/dt = i A B sigma2 C - i B sigma2 C A_zeta + i B gamma C
    for (name, sol) in solitons() {
        let fam = &sol.family;
        let a = Matrix::diag(&fam.data.lambdas);
        let az = Matrix::diag(&fam.data.mus);
        for &(x, t) in &POINTS {
            let dxt = fd_x(&|u| evolved_x(&fam.data, &fam.params, x, u), t, 1e-4);
            let b = evolved_b(&fam.data, &fam.params, x, t);
            let c = evolved_c(&fam.data, &fam.params, x, t);
            let bs2c = &(&b * &fam.params.sigma2) * &c;
            let i = cz(0.0, 1.0);
            let want = &(&(&a * &bs2c).scale(i) + &(&bs2c * &az).scale(-i))
                + &(&(&b * &fam.params.gamma) * &c).scale(i);
            assert!(
                dxt.approx_eq(&want, 1e-6, 1e-6),
                "{name} at ({x},{t}): {:.3e}",
                (&dxt - &want).norm_inf()
            );
        }
    }
}

#[test]
fn lyapunov_permanence_along_the_line() {
    // the anchor residual is zero by construction; along the line it may
    // only pick up rounding, bounded here by 10x the anchor value plus a
    // machine floor
    for (name, sol) in solitons() {
        let fam = &sol.family;
        let anchor = fam.node_at(0.0, 0.0).lyapunov_residual();
        let floor = 10.0 * anchor + 1e-12;
        for i in 0..=40 {
            let x = -2.0 + 4.0 * i as f64 / 40.0;
            for &t in &[-0.3, 0.0, 0.2] {
                let r = fam.node_at(x, t).lyapunov_residual();
                let scale = fam.node_at(x, t).x_op.norm_inf().max(1.0);
                assert!(
                    r <= floor * scale,
                    "{name} at ({x},{t}): residual {r:.3e}, scale {scale:.3e}"
                );
            }
        }
    }
}

#[test]
fn closed_form_agrees_with_independent_integration() {
    for (name, sol) in solitons() {
        let fam = &sol.family;
        for &x in &[0.6, -0.8] {
            let (b_rk, c_rk, x_rk) = integrate_prevessel_ode(&fam.data, &fam.params, x, 800);
            let (b, c, xm) = fam.operators_at(x, 0.0);
            assert!(b.approx_eq(&b_rk, 1e-8, 1e-8), "{name} B at {x}");
            assert!(c.approx_eq(&c_rk, 1e-8, 1e-8), "{name} C at {x}");
            assert!(xm.approx_eq(&x_rk, 1e-8, 1e-8), "{name} X at {x}");
        }
    }
}

#[test]
fn gauge_slice_realizes_same_potential_through_construction() {
    // building from gauge-compatible data (B0, X0 jointly rescaled) gives
    // the same transfer function at every x, hence the same potential
    let sol = build_soliton(SolitonSpec::TwoDim {
        k1: 1.0,
        k2: 2.0,
        b1: cz(1.0, 0.0),
        b2: cz(0.5, 0.0),
    })
    .unwrap();
    let mut data2 = sol.family.data.clone();
    data2.b0 = data2.b0.scale(cz(0.5, 0.0));
    data2.x0 = data2.x0.scale(cz(0.5, 0.0));
    let fam2 =
        vessels::construction::VesselFamily::new(data2, sol.family.params.clone()).unwrap();
    for &(x, t) in &POINTS {
        let s1 = sol.family.state(x, t).unwrap().transfer(cz(3.0, 1.0)).unwrap();
        let s2 = fam2.state(x, t).unwrap().transfer(cz(3.0, 1.0)).unwrap();
        assert!(s1.approx_eq(&s2, 1e-12, 1e-12));
    }
}
