//! Property tests for the calculus invariants: wedge antisymmetry, d^2 = 0,
//! the Leibniz rule, quadrature stability, and parser round trips.

use proptest::prelude::*;
use std::sync::Arc;

use gerbecalc::calculus::expr::{parse_expr, Expr, ExprRef};
use gerbecalc::calculus::form::{ChartCoeffs, ExprMat, MatrixForm};

/// Small random trigonometric expressions in two variables (and optionally
/// t), built from a coefficient table so shrinking stays meaningful.
fn trig_expr(coeffs: &[f64], with_t: bool) -> ExprRef {
    let two_pi = Expr::mul(&Expr::real(2.0), &Arc::new(Expr::Pi));
    let mut acc = Expr::real(coeffs[0]);
    let args: Vec<ExprRef> = if with_t {
        vec![Expr::coord(0), Expr::coord(1), Expr::param(0)]
    } else {
        vec![Expr::coord(0), Expr::coord(1)]
    };
    for (k, var) in args.iter().enumerate() {
        let arg = Expr::mul(&two_pi, var);
        let c = coeffs[1 + 2 * k];
        let s = coeffs[2 + 2 * k];
        acc = Expr::add(&acc, &Expr::mul(&Expr::real(c), &Expr::cos(&arg)));
        acc = Expr::add(&acc, &Expr::mul(&Expr::real(s), &Expr::sin(&arg)));
    }
    acc
}

fn scalar_form(deg_tuples: &[&[u8]], coeff_sets: &[Vec<f64>], n_params: usize) -> MatrixForm {
    let mut coeffs = ChartCoeffs::new();
    for (t, c) in deg_tuples.iter().zip(coeff_sets) {
        coeffs.insert(t.to_vec(), ExprMat::scalar(trig_expr(c, n_params > 0)));
    }
    MatrixForm::literal(2, n_params, 1, vec![coeffs]).unwrap()
}

fn coeff_vec() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.0f64..1.0, 7)
}

fn point() -> impl Strategy<Value = [f64; 2]> {
    [0.0f64..1.0, 0.0f64..1.0]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    /// wedge(a, b) = (-1)^{pq} wedge(b, a) for scalar forms.
    #[test]
    fn wedge_graded_antisymmetry(ca in coeff_vec(), cb in coeff_vec(), p in point()) {
        // a of degree 1, b of degree 1: sign -1
        let a = scalar_form(&[&[0]], std::slice::from_ref(&ca), 0);
        let b = scalar_form(&[&[1]], std::slice::from_ref(&cb), 0);
        let ab = a.wedge(&b).unwrap().eval(0, &p, 0).unwrap();
        let ba = b.wedge(&a).unwrap().eval(0, &p, 0).unwrap();
        prop_assert!(ab.add(&ba).unwrap().max_abs() <= 1e-10);

        // a of degree 0, b of degree 2: sign +1
        let a0 = scalar_form(&[&[]], &[ca], 0);
        let b2 = scalar_form(&[&[0, 1]], &[cb], 0);
        let ab = a0.wedge(&b2).unwrap().eval(0, &p, 0).unwrap();
        let ba = b2.wedge(&a0).unwrap().eval(0, &p, 0).unwrap();
        prop_assert!(ab.sub(&ba).unwrap().max_abs() <= 1e-10);
    }

    /// d(d(f)) = 0 pointwise for functions and 1-forms.
    #[test]
    fn d_squared_is_zero(c0 in coeff_vec(), c1 in coeff_vec(), p in point()) {
        let f = scalar_form(&[&[]], &[c0], 0);
        let ddf = f.exterior_d().exterior_d().eval(0, &p, 0).unwrap();
        prop_assert!(ddf.max_abs() <= 1e-10, "ddf = {}", ddf.max_abs());
        let w = scalar_form(&[&[0]], &[c1], 0);
        let ddw = w.exterior_d().exterior_d().eval(0, &p, 0).unwrap();
        prop_assert!(ddw.max_abs() <= 1e-10);
    }

    /// d(a ^ b) = da ^ b + (-1)^deg(a) a ^ db.
    #[test]
    fn leibniz_rule(ca in coeff_vec(), cb in coeff_vec(), p in point()) {
        let a = scalar_form(&[&[0]], &[ca], 0); // degree 1
        let b = scalar_form(&[&[]], &[cb], 0);  // degree 0
        let lhs = a.wedge(&b).unwrap().exterior_d();
        let rhs = a
            .exterior_d()
            .wedge(&b)
            .unwrap()
            .sub(&a.wedge(&b.exterior_d()).unwrap())
            .unwrap();
        let r = lhs
            .eval(0, &p, 0)
            .unwrap()
            .sub(&rhs.eval(0, &p, 0).unwrap())
            .unwrap()
            .max_abs();
        prop_assert!(r <= 1e-9, "leibniz residual {r}");
    }

    /// Doubling the quadrature nodes moves analytic fiber integrals by
    /// less than 1e-10.
    #[test]
    fn quadrature_is_converged(c in coeff_vec(), p in point()) {
        let w = scalar_form(&[&[0, 2]], &[c], 1); // f(x, t) dx1 ^ dt
        let i16 = w.fiber_integrate(16).unwrap().eval(0, &p, 0).unwrap();
        let i32v = w.fiber_integrate(32).unwrap().eval(0, &p, 0).unwrap();
        prop_assert!(i16.sub(&i32v).unwrap().max_abs() <= 1e-10);
    }

    /// parse(print(e)) evaluates identically to e.
    #[test]
    fn print_parse_round_trip(c in coeff_vec(), p in point()) {
        let e = trig_expr(&c, false);
        let text = e.to_string();
        let back = parse_expr(&text).unwrap();
        let ctx = gerbecalc::calculus::jet::EvalCtx::space(2);
        let v1 = gerbecalc::calculus::jet::eval_value(&e, &p, &ctx).unwrap();
        let v2 = gerbecalc::calculus::jet::eval_value(&back, &p, &ctx).unwrap();
        prop_assert!((v1 - v2).norm() <= 1e-12 * (1.0 + v1.norm()));
    }

    /// Jets obey the product rule exactly against symbolic differentiation.
    #[test]
    fn jet_product_rule(ca in coeff_vec(), cb in coeff_vec(), p in point()) {
        let a = trig_expr(&ca, false);
        let b = trig_expr(&cb, false);
        let prod = Expr::mul(&a, &b);
        let ctx = gerbecalc::calculus::jet::EvalCtx::space(2);
        let j = gerbecalc::calculus::jet::eval_jet(&prod, &p, &ctx, 1).unwrap();
        for axis in 0..2 {
            let sym = Expr::add(
                &Expr::mul(&a.diff_coord(axis), &b),
                &Expr::mul(&a, &b.diff_coord(axis)),
            );
            let want = gerbecalc::calculus::jet::eval_value(&sym, &p, &ctx).unwrap();
            prop_assert!((j.grad_at(axis) - want).norm() <= 1e-11);
        }
    }
}
