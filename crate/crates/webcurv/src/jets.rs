//! Truncated multivariate Taylor-series ("jet") arithmetic.
//!
//! A [`Jet`] stores the Taylor coefficients of a scalar function at a base
//! point, truncated at a fixed total degree.  Arithmetic and elementary
//! functions on jets propagate those coefficients exactly through the
//! truncation order, which gives exact higher partial derivatives of any
//! composed smooth expression — the engine behind every derivative taken by
//! this crate (connection coefficients, curvature, the ρ_k/σ_k derivative
//! towers, mixed log-derivatives of volume coefficients, ...).

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

/// Errors from jet construction and arithmetic.
#[derive(Debug, Error)]
pub enum JetError {
    #[error("variable index {index} out of range for {num_vars} variables")]
    IndexOutOfRange { index: usize, num_vars: usize },
    #[error("jet context must have at least one variable")]
    BadContext,
    #[error("singular division: divisor has zero constant term")]
    SingularDivision,
    #[error("branch error: {func} requires {requirement}, got constant term {value}")]
    Branch {
        func: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("multi-index degree {degree} exceeds jet order {order}")]
    OrderExceeded { degree: usize, order: usize },
    #[error("multi-index has {got} entries, jet has {expected} variables")]
    IndexArity { got: usize, expected: usize },
}

/// Shape of a family of jets: number of variables and truncation order.
///
/// All jets combined by a binary operation must share the variable count;
/// the order of a combined jet is the minimum of the operand orders, so
/// derivative-taking (which lowers the order by one) composes soundly with
/// the rest of the arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JetContext {
    pub num_vars: usize,
    pub order: usize,
}

impl JetContext {
    pub fn new(num_vars: usize, order: usize) -> Result<Self, JetError> {
        if num_vars == 0 {
            return Err(JetError::BadContext);
        }
        Ok(JetContext { num_vars, order })
    }
}

/// Multi-index of partial-derivative orders, one exponent per variable.
pub type MultiIndex = Vec<u8>;

fn degree(alpha: &[u8]) -> usize {
    alpha.iter().map(|&e| e as usize).sum()
}

fn multi_factorial(alpha: &[u8]) -> f64 {
    alpha.iter().map(|&e| factorial(e as usize)).product()
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Truncated Taylor expansion of a scalar at a point.
///
/// `coeffs[α]` is `(∂^α f)(p) / α!`; absent multi-indices are zero.  Only
/// multi-indices of total degree ≤ `order` are ever stored.
#[derive(Debug, Clone)]
pub struct Jet {
    num_vars: usize,
    order: usize,
    coeffs: BTreeMap<MultiIndex, f64>,
}

impl Jet {
    /// Jet of a constant function.
    pub fn constant(ctx: JetContext, value: f64) -> Jet {
        let mut coeffs = BTreeMap::new();
        if value != 0.0 {
            coeffs.insert(vec![0; ctx.num_vars], value);
        }
        Jet {
            num_vars: ctx.num_vars,
            order: ctx.order,
            coeffs,
        }
    }

    /// Jet of the coordinate function `x_index` at a point where it takes
    /// `value`: constant term `value`, unit linear term, nothing else.
    pub fn variable(ctx: JetContext, index: usize, value: f64) -> Result<Jet, JetError> {
        if index >= ctx.num_vars {
            return Err(JetError::IndexOutOfRange {
                index,
                num_vars: ctx.num_vars,
            });
        }
        let mut jet = Jet::constant(ctx, value);
        if ctx.order >= 1 {
            let mut alpha = vec![0u8; ctx.num_vars];
            alpha[index] = 1;
            jet.coeffs.insert(alpha, 1.0);
        }
        Ok(jet)
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn context(&self) -> JetContext {
        JetContext {
            num_vars: self.num_vars,
            order: self.order,
        }
    }

    /// Constant term: the value of the represented function at the base point.
    pub fn value(&self) -> f64 {
        self.coeffs
            .get(&vec![0u8; self.num_vars])
            .copied()
            .unwrap_or(0.0)
    }

    /// Taylor coefficient of `alpha` (zero if absent or out of range).
    pub fn coeff(&self, alpha: &[u8]) -> f64 {
        self.coeffs.get(alpha).copied().unwrap_or(0.0)
    }

    /// Partial derivative `∂^α f` at the base point: `coeff(α) · α!`.
    pub fn partial(&self, alpha: &[u8]) -> Result<f64, JetError> {
        if alpha.len() != self.num_vars {
            return Err(JetError::IndexArity {
                got: alpha.len(),
                expected: self.num_vars,
            });
        }
        let d = degree(alpha);
        if d > self.order {
            return Err(JetError::OrderExceeded {
                degree: d,
                order: self.order,
            });
        }
        Ok(self.coeff(alpha) * multi_factorial(alpha))
    }

    fn assert_compatible(&self, other: &Jet) {
        assert_eq!(
            self.num_vars, other.num_vars,
            "jets combined across different variable counts"
        );
    }

    fn insert(coeffs: &mut BTreeMap<MultiIndex, f64>, alpha: MultiIndex, v: f64) {
        if v != 0.0 {
            *coeffs.entry(alpha).or_insert(0.0) += v;
        }
    }

    pub fn add(&self, other: &Jet) -> Jet {
        self.assert_compatible(other);
        let order = self.order.min(other.order);
        let mut coeffs = BTreeMap::new();
        for (a, &v) in self.coeffs.iter().chain(other.coeffs.iter()) {
            if degree(a) <= order {
                Self::insert(&mut coeffs, a.clone(), v);
            }
        }
        coeffs.retain(|_, v| *v != 0.0);
        Jet {
            num_vars: self.num_vars,
            order,
            coeffs,
        }
    }

    pub fn sub(&self, other: &Jet) -> Jet {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Jet {
        let mut out = self.clone();
        for v in out.coeffs.values_mut() {
            *v = -*v;
        }
        out
    }

    pub fn scale(&self, c: f64) -> Jet {
        let mut out = self.clone();
        if c == 0.0 {
            out.coeffs.clear();
            return out;
        }
        for v in out.coeffs.values_mut() {
            *v *= c;
        }
        out
    }

    pub fn add_scalar(&self, c: f64) -> Jet {
        let mut out = self.clone();
        let zero = vec![0u8; self.num_vars];
        let e = out.coeffs.entry(zero).or_insert(0.0);
        *e += c;
        if *e == 0.0 {
            out.coeffs.remove(&vec![0u8; self.num_vars]);
        }
        out
    }

    /// Truncated Cauchy product.
    pub fn mul(&self, other: &Jet) -> Jet {
        self.assert_compatible(other);
        let order = self.order.min(other.order);
        let mut coeffs = BTreeMap::new();
        for (a, &va) in &self.coeffs {
            let da = degree(a);
            if da > order {
                continue;
            }
            for (b, &vb) in &other.coeffs {
                if da + degree(b) > order {
                    continue;
                }
                let sum: MultiIndex = a.iter().zip(b.iter()).map(|(&x, &y)| x + y).collect();
                Self::insert(&mut coeffs, sum, va * vb);
            }
        }
        coeffs.retain(|_, v| *v != 0.0);
        Jet {
            num_vars: self.num_vars,
            order,
            coeffs,
        }
    }

    pub fn div(&self, other: &Jet) -> Result<Jet, JetError> {
        Ok(self.mul(&other.recip()?))
    }

    /// Series reciprocal: composition with 1/x about the constant term.
    pub fn recip(&self) -> Result<Jet, JetError> {
        let a0 = self.value();
        if a0 == 0.0 {
            return Err(JetError::SingularDivision);
        }
        let order = self.order;
        let mut outer = Vec::with_capacity(order + 1);
        let mut c = 1.0 / a0;
        for _ in 0..=order {
            outer.push(c);
            c = -c / a0;
        }
        Ok(self.compose_univariate(&outer))
    }

    /// Horner evaluation of `Σ outer[k] · (self − self.value())^k`.
    ///
    /// `outer[k]` must be the k-th Taylor coefficient (derivative over k!) of
    /// the outer function about the jet's constant term.
    fn compose_univariate(&self, outer: &[f64]) -> Jet {
        let ctx = self.context();
        let u = self.add_scalar(-self.value());
        let mut result = Jet::constant(ctx, *outer.last().unwrap_or(&0.0));
        for &c in outer.iter().rev().skip(1) {
            result = result.mul(&u).add_scalar(c);
        }
        result
    }

    pub fn exp(&self) -> Jet {
        let e0 = self.value().exp();
        let outer: Vec<f64> = (0..=self.order).map(|k| e0 / factorial(k)).collect();
        self.compose_univariate(&outer)
    }

    pub fn log(&self) -> Result<Jet, JetError> {
        let a0 = self.value();
        if a0 <= 0.0 {
            return Err(JetError::Branch {
                func: "log",
                requirement: "a positive constant term",
                value: a0,
            });
        }
        Ok(self.log_series(a0, a0.ln()))
    }

    /// `log|f|`: smooth wherever `f` is nonzero, with the same derivative
    /// tower as `log` on either sign of the constant term.
    pub fn abs_log(&self) -> Result<Jet, JetError> {
        let a0 = self.value();
        if a0 == 0.0 {
            return Err(JetError::Branch {
                func: "abs_log",
                requirement: "a nonzero constant term",
                value: a0,
            });
        }
        Ok(self.log_series(a0, a0.abs().ln()))
    }

    fn log_series(&self, a0: f64, c0: f64) -> Jet {
        let mut outer = Vec::with_capacity(self.order + 1);
        outer.push(c0);
        // k-th Taylor coefficient of log|x| about a0: (-1)^(k+1) / (k a0^k).
        let mut pw = 1.0;
        for k in 1..=self.order {
            pw *= a0;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            outer.push(sign / (k as f64 * pw));
        }
        self.compose_univariate(&outer)
    }

    pub fn sqrt(&self) -> Result<Jet, JetError> {
        let a0 = self.value();
        if a0 <= 0.0 {
            return Err(JetError::Branch {
                func: "sqrt",
                requirement: "a positive constant term",
                value: a0,
            });
        }
        let r0 = a0.sqrt();
        // Binomial series: coefficient k is C(1/2, k) · a0^(1/2 - k).
        let mut outer = Vec::with_capacity(self.order + 1);
        let mut binom = 1.0;
        let mut pw = r0;
        for k in 0..=self.order {
            if k > 0 {
                binom *= (0.5 - (k as f64 - 1.0)) / k as f64;
                pw /= a0;
            }
            outer.push(binom * pw);
        }
        Ok(self.compose_univariate(&outer))
    }

    pub fn sin(&self) -> Jet {
        self.trig(f64::sin)
    }

    pub fn cos(&self) -> Jet {
        self.trig(f64::cos)
    }

    fn trig(&self, f: fn(f64) -> f64) -> Jet {
        let a0 = self.value();
        let outer: Vec<f64> = (0..=self.order)
            .map(|k| f(a0 + k as f64 * std::f64::consts::FRAC_PI_2) / factorial(k))
            .collect();
        self.compose_univariate(&outer)
    }

    /// Integer power by repeated multiplication; negative exponents go
    /// through the series reciprocal.
    pub fn powi(&self, e: i32) -> Result<Jet, JetError> {
        let base = if e < 0 { self.recip()? } else { self.clone() };
        let mut result = Jet::constant(base.context(), 1.0);
        for _ in 0..e.unsigned_abs() {
            result = result.mul(&base);
        }
        Ok(result)
    }

    /// Jet of `∂f/∂x_var`, exact through `order − 1`.
    pub fn derivative(&self, var: usize) -> Jet {
        assert!(var < self.num_vars, "derivative variable out of range");
        let order = self.order.saturating_sub(1);
        let mut coeffs = BTreeMap::new();
        for (a, &v) in &self.coeffs {
            if a[var] == 0 {
                continue;
            }
            let mut b = a.clone();
            b[var] -= 1;
            if degree(&b) <= order {
                Self::insert(&mut coeffs, b, v * a[var] as f64);
            }
        }
        Jet {
            num_vars: self.num_vars,
            order,
            coeffs,
        }
    }

    /// Drop all coefficients above `order` and lower the stated order.
    pub fn truncate(&self, order: usize) -> Jet {
        let order = order.min(self.order);
        let mut out = self.clone();
        out.order = order;
        out.coeffs.retain(|a, _| degree(a) <= order);
        out
    }

    /// Largest absolute coefficient (used by residual norms in tests).
    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.values().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        Jet::add(self, rhs)
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        Jet::sub(self, rhs)
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        Jet::mul(self, rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet::neg(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ctx(n: usize, order: usize) -> JetContext {
        JetContext::new(n, order).unwrap()
    }

    #[test]
    fn seed_variable_coefficients() {
        let j = Jet::variable(ctx(2, 2), 0, 3.0).unwrap();
        assert_eq!(j.coeff(&[0, 0]), 3.0);
        assert_eq!(j.coeff(&[1, 0]), 1.0);
        assert_eq!(j.coeff(&[0, 1]), 0.0);
        assert_eq!(j.partial(&[1, 0]).unwrap(), 1.0);

        let k = Jet::variable(ctx(1, 6), 0, 0.0).unwrap();
        assert_eq!(k.value(), 0.0);
        assert_eq!(k.coeff(&[1]), 1.0);
    }

    #[test]
    fn seed_out_of_range() {
        assert!(Jet::variable(ctx(2, 2), 2, 0.0).is_err());
    }

    #[test]
    fn square_of_coordinate() {
        // (x)^2 Taylor at 3: 9 + 6(x-3) + (x-3)^2.
        let x = Jet::variable(ctx(1, 2), 0, 3.0).unwrap();
        let sq = x.mul(&x);
        assert_eq!(sq.coeff(&[0]), 9.0);
        assert_eq!(sq.coeff(&[1]), 6.0);
        assert_eq!(sq.coeff(&[2]), 1.0);
    }

    #[test]
    fn mul_by_one_is_identity() {
        let x = Jet::variable(ctx(2, 3), 0, 1.5).unwrap();
        let one = Jet::constant(ctx(2, 3), 1.0);
        let prod = x.mul(&one);
        assert_eq!(prod.coeff(&[0, 0]), 1.5);
        assert_eq!(prod.coeff(&[1, 0]), 1.0);
    }

    #[test]
    fn self_division_is_one() {
        let x = Jet::variable(ctx(1, 5), 0, 2.0).unwrap();
        let q = x.div(&x).unwrap();
        assert_relative_eq!(q.coeff(&[0]), 1.0, max_relative = 1e-14);
        for k in 1..=5u8 {
            assert!(q.coeff(&[k]).abs() < 1e-14, "order {k} residue");
        }
    }

    #[test]
    fn division_by_zero_constant_term_fails() {
        let x = Jet::variable(ctx(1, 3), 0, 0.0).unwrap();
        let one = Jet::constant(ctx(1, 3), 1.0);
        assert!(matches!(one.div(&x), Err(JetError::SingularDivision)));
    }

    #[test]
    fn exp_series_at_zero() {
        let x = Jet::variable(ctx(1, 3), 0, 0.0).unwrap();
        let e = x.exp();
        assert_relative_eq!(e.coeff(&[0]), 1.0);
        assert_relative_eq!(e.coeff(&[1]), 1.0);
        assert_relative_eq!(e.coeff(&[2]), 0.5);
        assert_relative_eq!(e.coeff(&[3]), 1.0 / 6.0);
    }

    #[test]
    fn sqrt_of_constant() {
        let c = Jet::constant(ctx(1, 4), 4.0);
        assert_relative_eq!(c.sqrt().unwrap().value(), 2.0);
        assert!(Jet::constant(ctx(1, 2), -1.0).sqrt().is_err());
    }

    #[test]
    fn abs_log_negative_branch() {
        // log|-2 + x| at x=0: constant log 2, linear -1/2.
        let x = Jet::variable(ctx(1, 4), 0, -2.0).unwrap();
        let l = x.abs_log().unwrap();
        assert_relative_eq!(l.value(), 2.0f64.ln(), max_relative = 1e-14);
        assert_relative_eq!(l.coeff(&[1]), -0.5, max_relative = 1e-14);
        // Finite-difference cross-check of the linear coefficient.
        let h = 1e-6;
        let fd = (((-2.0 + h) as f64).abs().ln() - ((-2.0 - h) as f64).abs().ln()) / (2.0 * h);
        assert_relative_eq!(l.coeff(&[1]), fd, max_relative = 1e-8);
        assert!(Jet::constant(ctx(1, 2), 0.0).abs_log().is_err());
    }

    #[test]
    fn partial_of_exp_xy() {
        let c = ctx(2, 4);
        let x = Jet::variable(c, 0, 0.0).unwrap();
        let y = Jet::variable(c, 1, 0.0).unwrap();
        let e = x.mul(&y).exp();
        assert_relative_eq!(e.partial(&[1, 1]).unwrap(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(e.partial(&[0, 0]).unwrap(), 1.0);
    }

    #[test]
    fn partial_of_monomial() {
        // ∂⁴(s²t³)/∂s²∂t² = 12t, so 12 at (1,1).
        let c = ctx(2, 6);
        let s = Jet::variable(c, 0, 1.0).unwrap();
        let t = Jet::variable(c, 1, 1.0).unwrap();
        let m = s.powi(2).unwrap().mul(&t.powi(3).unwrap());
        assert_relative_eq!(m.partial(&[2, 2]).unwrap(), 12.0, max_relative = 1e-13);
    }

    #[test]
    fn derivative_lowers_order_and_shifts() {
        let c = ctx(2, 4);
        let x = Jet::variable(c, 0, 1.0).unwrap();
        let y = Jet::variable(c, 1, 2.0).unwrap();
        let f = x.powi(3).unwrap().mul(&y); // x^3 y
        let fx = f.derivative(0); // 3x^2 y
        assert_eq!(fx.order(), 3);
        assert_relative_eq!(fx.value(), 6.0, max_relative = 1e-14);
        assert_relative_eq!(fx.partial(&[1, 0]).unwrap(), 12.0, max_relative = 1e-14);
    }

    #[test]
    fn min_order_propagates_through_ops() {
        let a = Jet::variable(ctx(1, 5), 0, 1.0).unwrap();
        let b = Jet::variable(ctx(1, 3), 0, 1.0).unwrap();
        assert_eq!(a.mul(&b).order(), 3);
        assert_eq!(a.add(&b).order(), 3);
        assert_eq!(a.truncate(2).order(), 2);
    }

    #[test]
    fn chain_rule_against_finite_differences() {
        // exp(p(x)) for a fixed quartic p, derivative orders <= 3.
        let p = |x: f64| 0.3 * x.powi(4) - 1.1 * x.powi(2) + 0.5 * x + 0.2;
        let x0 = 0.7;
        let c = ctx(1, 6);
        let x = Jet::variable(c, 0, x0).unwrap();
        let px = x
            .powi(4)
            .unwrap()
            .scale(0.3)
            .add(&x.powi(2).unwrap().scale(-1.1))
            .add(&x.scale(0.5))
            .add_scalar(0.2);
        let f = px.exp();
        let h = 1e-4;
        let fv = |x: f64| p(x).exp();
        let fd1 = (fv(x0 + h) - fv(x0 - h)) / (2.0 * h);
        let fd2 = (fv(x0 + h) - 2.0 * fv(x0) + fv(x0 - h)) / (h * h);
        let fd3 = (fv(x0 + 2.0 * h) - 2.0 * fv(x0 + h) + 2.0 * fv(x0 - h) - fv(x0 - 2.0 * h))
            / (2.0 * h * h * h);
        assert_relative_eq!(f.partial(&[1]).unwrap(), fd1, max_relative = 1e-6);
        assert_relative_eq!(f.partial(&[2]).unwrap(), fd2, max_relative = 1e-6);
        assert_relative_eq!(f.partial(&[3]).unwrap(), fd3, max_relative = 1e-4);
    }

    #[test]
    fn trig_derivatives() {
        let x = Jet::variable(ctx(1, 4), 0, 0.3).unwrap();
        let s = x.sin();
        let cjet = x.cos();
        assert_relative_eq!(s.partial(&[1]).unwrap(), 0.3f64.cos(), max_relative = 1e-14);
        assert_relative_eq!(s.partial(&[2]).unwrap(), -0.3f64.sin(), max_relative = 1e-13);
        assert_relative_eq!(cjet.partial(&[1]).unwrap(), -0.3f64.sin(), max_relative = 1e-14);
    }

    #[test]
    fn truncation_closure() {
        let c = ctx(3, 3);
        let x = Jet::variable(c, 0, 1.0).unwrap();
        let y = Jet::variable(c, 1, 2.0).unwrap();
        let z = Jet::variable(c, 2, -1.0).unwrap();
        let f = x
            .mul(&y)
            .mul(&z)
            .exp()
            .add(&x.powi(5).unwrap());
        for alpha in f.coeffs.keys() {
            assert!(degree(alpha) <= 3);
        }
    }
}
