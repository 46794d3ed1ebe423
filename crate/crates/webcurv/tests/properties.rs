//! Property tests for the structural invariants: jet calculus obeys the
//! Leibniz and chain rules coefficientwise, potentials integrate areas
//! consistently, and the symplectic curvature keeps its algebraic
//! symmetries at arbitrary inputs.

use proptest::prelude::*;

use webcurv::expr::parse;
use webcurv::jets::{Jet, JetContext};
use webcurv::potential::{build_potential, region_area, DEFAULT_TOL};
use webcurv::webgeom::{symplectic_curvature, WebModel};

/// A 2-variable polynomial jet of order 3 with the given nine coefficients.
fn poly_jet(c: &[f64; 9], x0: f64, y0: f64) -> Jet {
    let ctx = JetContext::new(2, 3).unwrap();
    let x = Jet::variable(ctx, 0, x0).unwrap();
    let y = Jet::variable(ctx, 1, y0).unwrap();
    let mut acc = Jet::constant(ctx, c[0]);
    let terms: [(usize, usize, f64); 8] = [
        (1, 0, c[1]),
        (0, 1, c[2]),
        (1, 1, c[3]),
        (2, 0, c[4]),
        (0, 2, c[5]),
        (2, 1, c[6]),
        (1, 2, c[7]),
        (3, 0, c[8]),
    ];
    for (i, j, v) in terms {
        let mut t = Jet::constant(ctx, v);
        for _ in 0..i {
            t = t.mul(&x);
        }
        for _ in 0..j {
            t = t.mul(&y);
        }
        acc = acc.add(&t);
    }
    acc
}

fn max_coeff_diff(a: &Jet, b: &Jet) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..=3u8 {
        for j in 0..=3u8 {
            if (i + j) as usize <= a.order().min(b.order()) {
                worst = worst.max((a.coeff(&[i, j]) - b.coeff(&[i, j])).abs());
            }
        }
    }
    worst
}

fn small() -> impl Strategy<Value = f64> {
    (-1.0f64..1.0).prop_map(|v| (v * 64.0).round() / 64.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Leibniz rule: ∂(fg) = f ∂g + g ∂f, coefficient by coefficient.
    #[test]
    fn jet_product_rule(
        cf in prop::array::uniform9(small()),
        cg in prop::array::uniform9(small()),
        x0 in small(),
        y0 in small(),
    ) {
        let f = poly_jet(&cf, x0, y0);
        let g = poly_jet(&cg, x0, y0);
        for var in 0..2 {
            let lhs = f.mul(&g).derivative(var);
            let rhs = f.mul(&g.derivative(var)).add(&g.mul(&f.derivative(var)));
            prop_assert!(max_coeff_diff(&lhs, &rhs) < 1e-12);
        }
    }

    /// Chain rule through exp: ∂ e^f = e^f ∂f.
    #[test]
    fn jet_chain_rule_exp(
        cf in prop::array::uniform9(small()),
        x0 in small(),
        y0 in small(),
    ) {
        let f = poly_jet(&cf, x0, y0);
        let ef = f.exp();
        for var in 0..2 {
            let lhs = ef.derivative(var);
            let rhs = ef.mul(&f.derivative(var));
            prop_assert!(max_coeff_diff(&lhs, &rhs) < 1e-9);
        }
    }

    /// Jet evaluation agrees with direct evaluation of the same polynomial.
    #[test]
    fn jet_value_matches_direct_evaluation(
        cf in prop::array::uniform9(small()),
        x0 in small(),
        y0 in small(),
    ) {
        let f = poly_jet(&cf, x0, y0);
        let direct = cf[0]
            + cf[1] * x0
            + cf[2] * y0
            + cf[3] * x0 * y0
            + cf[4] * x0 * x0
            + cf[5] * y0 * y0
            + cf[6] * x0 * x0 * y0
            + cf[7] * x0 * y0 * y0
            + cf[8] * x0 * x0 * x0;
        prop_assert!((f.value() - direct).abs() < 1e-12);
    }
}

fn exp_xy() -> WebModel {
    WebModel::Explicit {
        n: 1,
        entries: vec![vec![parse("exp(x1*y1)", &["x1", "y1"]).unwrap()]],
        params: vec![],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// Region areas are antisymmetric under corner swaps and additive under
    /// splitting, for an arbitrary rectangle in the window.
    #[test]
    fn region_area_antisymmetric_and_additive(
        x0 in -0.4f64..0.0,
        x1 in 0.05f64..0.4,
        xm in -0.02f64..0.02,
        y0 in -0.4f64..0.0,
        y1 in 0.05f64..0.4,
    ) {
        let m = exp_xy();
        let h = build_potential(&m, [[-0.5, 0.5], [-0.5, 0.5]], 0.0, 0.0, DEFAULT_TOL).unwrap();
        let full = region_area(&h, (x0, y0), (x1, y1)).unwrap();
        let swapped = region_area(&h, (x1, y0), (x0, y1)).unwrap();
        prop_assert!((full + swapped).abs() < 1e-9);
        let left = region_area(&h, (x0, y0), (xm, y1)).unwrap();
        let right = region_area(&h, (xm, y0), (x1, y1)).unwrap();
        prop_assert!((full - left - right).abs() < 1e-9);
    }

    /// Rs stays antisymmetric in (Z, W) and vanishes on leaf-tangent last
    /// slots for arbitrary points and vectors.
    #[test]
    fn rs_symmetries_hold_at_arbitrary_inputs(
        p in prop::array::uniform2(-0.4f64..0.4),
        x in prop::array::uniform2(-1.0f64..1.0),
        y in prop::array::uniform2(-1.0f64..1.0),
        z in prop::array::uniform2(-1.0f64..1.0),
        w in prop::array::uniform2(-1.0f64..1.0),
    ) {
        let m = exp_xy();
        let rs = |a: &[f64], b: &[f64], c: &[f64], d: &[f64]| {
            symplectic_curvature(&m, &p, a, b, c, d).unwrap()
        };
        let r0 = rs(&x, &y, &z, &w);
        let scale = r0.abs().max(1.0);
        prop_assert!((r0 + rs(&x, &y, &w, &z)).abs() / scale < 1e-10);
        prop_assert!(rs(&x, &y, &[z[0], 0.0], &[w[0], 0.0]).abs() / scale < 1e-10);
        prop_assert!(rs(&x, &y, &[0.0, z[1]], &[0.0, w[1]]).abs() / scale < 1e-10);
    }
}
