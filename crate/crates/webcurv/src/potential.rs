//! Double potentials h with ω = d_x d_y h for planar (leaf dimension 1)
//! webs: construction by iterated Gauss–Legendre quadrature, symplectic
//! region areas from corner values, and the quadrilateral flatness
//! conditions evaluated on coordinate integral curves.

use std::sync::OnceLock;

use thiserror::Error;

use crate::webgeom::{GeomError, WebModel};

#[derive(Debug, Error)]
pub enum PotentialError {
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("quadrature did not converge: achieved error {achieved:e} above tolerance {tol:e}")]
    Quadrature { achieved: f64, tol: f64 },
    #[error("bisection bracket failure on [{lo}, {hi}]: no sign change (coefficient not single-signed?)")]
    Bracket { lo: f64, hi: f64 },
    #[error("invalid probe: {0}")]
    BadProbe(&'static str),
    #[error("potentials are only defined for 2D webs, got leaf dimension {n}")]
    NotPlanar { n: usize },
    #[error("point ({x}, {y}) outside window")]
    OutsideWindow { x: f64, y: f64 },
}

/// Default quadrature tolerance target.
pub const DEFAULT_TOL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Gauss–Legendre quadrature
// ---------------------------------------------------------------------------

const GL_ORDER: usize = 20;

/// Nodes and weights of the 20-point Gauss–Legendre rule on [-1, 1],
/// computed once by Newton iteration on the Legendre polynomial.
fn gl_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_ORDER;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            // Tricomi initial guess for the i-th root (descending order).
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                // Evaluate P_n and P_n' by the three-term recurrence.
                let (mut p0, mut p1) = (1.0f64, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (mut p0, mut p1) = (1.0f64, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        (nodes, weights)
    })
}

/// One Gauss–Legendre panel over [x0,x1]×[y0,y1].
fn gl_panel<F>(f: &F, x0: f64, x1: f64, y0: f64, y1: f64) -> Result<f64, PotentialError>
where
    F: Fn(f64, f64) -> Result<f64, PotentialError>,
{
    let (nodes, weights) = gl_rule();
    let (cx, hx) = (0.5 * (x0 + x1), 0.5 * (x1 - x0));
    let (cy, hy) = (0.5 * (y0 + y1), 0.5 * (y1 - y0));
    let mut sum = 0.0;
    for (xi, wi) in nodes.iter().zip(weights.iter()) {
        let x = cx + hx * xi;
        let mut row = 0.0;
        for (yj, wj) in nodes.iter().zip(weights.iter()) {
            row += wj * f(x, cy + hy * yj)?;
        }
        sum += wi * row;
    }
    Ok(sum * hx * hy)
}

/// Iterated 2D quadrature: one coarse panel against a 2×2 refinement (the
/// single adaptive bisection level); returns the refined value and the
/// achieved error estimate.
pub fn integrate2d<F>(
    f: &F,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    tol: f64,
) -> Result<(f64, f64), PotentialError>
where
    F: Fn(f64, f64) -> Result<f64, PotentialError>,
{
    if x0 == x1 || y0 == y1 {
        return Ok((0.0, 0.0));
    }
    let coarse = gl_panel(f, x0, x1, y0, y1)?;
    let (mx, my) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
    let refined = gl_panel(f, x0, mx, y0, my)?
        + gl_panel(f, mx, x1, y0, my)?
        + gl_panel(f, x0, mx, my, y1)?
        + gl_panel(f, mx, x1, my, y1)?;
    let achieved = (refined - coarse).abs();
    if achieved > tol.max(tol * refined.abs()) {
        return Err(PotentialError::Quadrature { achieved, tol });
    }
    Ok((refined, achieved))
}

// ---------------------------------------------------------------------------
// Double potential
// ---------------------------------------------------------------------------

/// A double potential h with ω = d_x d_y h for a planar web, normalized so
/// that h vanishes on the two axes through the base point.
#[derive(Debug, Clone)]
pub struct DoublePotential {
    model: WebModel,
    base: (f64, f64),
    window: [[f64; 2]; 2],
    tol: f64,
}

/// Construct the double potential h(x,y) = ∫_{x₀}^{x}∫_{y₀}^{y} ω-coefficient
/// for a 2D web on the given window.
pub fn build_potential(
    m: &WebModel,
    window: [[f64; 2]; 2],
    x0: f64,
    y0: f64,
    tol: f64,
) -> Result<DoublePotential, PotentialError> {
    if m.leaf_dim() != 1 {
        return Err(PotentialError::NotPlanar { n: m.leaf_dim() });
    }
    let h = DoublePotential {
        model: m.clone(),
        base: (x0, y0),
        window,
        tol,
    };
    if !h.contains(x0, y0) {
        return Err(PotentialError::OutsideWindow { x: x0, y: y0 });
    }
    // Probe once so construction reports quadrature failure early.
    h.eval(window[0][1], window[1][1])?;
    Ok(h)
}

impl DoublePotential {
    pub fn base(&self) -> (f64, f64) {
        self.base
    }

    pub fn window(&self) -> [[f64; 2]; 2] {
        self.window
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        let eps = 1e-12;
        x >= self.window[0][0] - eps
            && x <= self.window[0][1] + eps
            && y >= self.window[1][0] - eps
            && y <= self.window[1][1] + eps
    }

    /// The ω coefficient A(x, y) of the underlying 2D web.
    pub fn omega_coeff(&self, x: f64, y: f64) -> Result<f64, PotentialError> {
        Ok(self.model.omega_values(&[x, y])?[0][0])
    }

    /// h(x, y) with the achieved quadrature error estimate.
    pub fn eval_with_err(&self, x: f64, y: f64) -> Result<(f64, f64), PotentialError> {
        if !self.contains(x, y) {
            return Err(PotentialError::OutsideWindow { x, y });
        }
        let f = |u: f64, v: f64| self.omega_coeff(u, v);
        integrate2d(&f, self.base.0, x, self.base.1, y, self.tol)
    }

    /// h(x, y), normalized so h(x₀,·) = h(·,y₀) = 0.
    pub fn eval(&self, x: f64, y: f64) -> Result<f64, PotentialError> {
        Ok(self.eval_with_err(x, y)?.0)
    }
}

/// Symplectic area of the coordinate rectangle [x,x']×[y,y'] from four
/// corner values of h.
pub fn region_area(
    h: &DoublePotential,
    c0: (f64, f64),
    c1: (f64, f64),
) -> Result<f64, PotentialError> {
    let (x, y) = c0;
    let (xp, yp) = c1;
    Ok(h.eval(xp, yp)? + h.eval(x, y)? - h.eval(xp, y)? - h.eval(x, yp)?)
}

// ---------------------------------------------------------------------------
// Quadrilateral flatness conditions
// ---------------------------------------------------------------------------

/// Three strictly ordered parameters on each coordinate axis.
#[derive(Debug, Clone, Copy)]
pub struct QuadProbe {
    pub p: [f64; 3],
    pub q: [f64; 3],
}

impl QuadProbe {
    pub fn new(p: [f64; 3], q: [f64; 3]) -> Result<Self, PotentialError> {
        if !(p[0] < p[1] && p[1] < p[2]) || !(q[0] < q[1] && q[1] < q[2]) {
            return Err(PotentialError::BadProbe("parameters must be strictly ordered"));
        }
        Ok(QuadProbe { p, q })
    }
}

/// Which quadrilateral flatness condition to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadWhich {
    EqualSplit,
    Cut,
    Product,
}

/// Residuals of one quadrilateral condition evaluation.
#[derive(Debug, Clone)]
pub enum QuadOutcome {
    /// a·c − b·d over the four subregions of the 2×2 grid centered at
    /// (p₂, q₂).
    Product { residual: f64 },
    /// Center found by bisection so that the two column areas and the two
    /// row areas each split equally; `residual` is the largest deviation of
    /// the four subregion areas from their mean.
    EqualSplit { p2: f64, q2: f64, residual: f64 },
    /// Premise residuals (outer halves equal across q₂; a = b) and the
    /// conclusion residual (largest pairwise deviation among a, b, c, d).
    Cut {
        premise: [f64; 2],
        conclusion: f64,
    },
}

/// The four subregion areas of the 2×2 grid with corners from the probe:
/// a = [p1,p2]×[q1,q2], b = [p1,p2]×[q2,q3], c = [p2,p3]×[q2,q3],
/// d = [p2,p3]×[q1,q2].
fn subregions(h: &DoublePotential, p: [f64; 3], q: [f64; 3]) -> Result<[f64; 4], PotentialError> {
    Ok([
        region_area(h, (p[0], q[0]), (p[1], q[1]))?,
        region_area(h, (p[0], q[1]), (p[1], q[2]))?,
        region_area(h, (p[1], q[1]), (p[2], q[2]))?,
        region_area(h, (p[1], q[0]), (p[2], q[1]))?,
    ])
}

/// Bisection for m in (lo, hi) with area([lo,m]×strip) = area([m,hi]×strip).
fn equal_split_point<F>(balance: F, lo: f64, hi: f64) -> Result<f64, PotentialError>
where
    F: Fn(f64) -> Result<f64, PotentialError>,
{
    let mut a = lo;
    let mut b = hi;
    let fa = balance(a)?;
    let fb = balance(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(PotentialError::Bracket { lo, hi });
    }
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        let fm = balance(m)?;
        if fm == 0.0 || b - a < 1e-13 * (hi - lo).abs() {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Evaluate one quadrilateral flatness condition at the probe.
pub fn quad_condition(
    h: &DoublePotential,
    probe: &QuadProbe,
    which: QuadWhich,
) -> Result<QuadOutcome, PotentialError> {
    match which {
        QuadWhich::Product => {
            let [a, b, c, d] = subregions(h, probe.p, probe.q)?;
            Ok(QuadOutcome::Product {
                residual: a * c - b * d,
            })
        }
        QuadWhich::EqualSplit => {
            let (p1, p3) = (probe.p[0], probe.p[2]);
            let (q1, q3) = (probe.q[0], probe.q[2]);
            let p2 = equal_split_point(
                |m| {
                    Ok(region_area(h, (p1, q1), (m, q3))? - region_area(h, (m, q1), (p3, q3))?)
                },
                p1,
                p3,
            )?;
            let q2 = equal_split_point(
                |m| {
                    Ok(region_area(h, (p1, q1), (p3, m))? - region_area(h, (p1, m), (p3, q3))?)
                },
                q1,
                q3,
            )?;
            let areas = subregions(h, [p1, p2, p3], [q1, q2, q3])?;
            let mean = areas.iter().sum::<f64>() / 4.0;
            let residual = areas
                .iter()
                .map(|v| (v - mean).abs())
                .fold(0.0f64, f64::max);
            Ok(QuadOutcome::EqualSplit { p2, q2, residual })
        }
        QuadWhich::Cut => {
            let [a, b, c, d] = subregions(h, probe.p, probe.q)?;
            // Premise 1: the whole column strips across q2 have equal areas.
            let left = region_area(h, (probe.p[0], probe.q[0]), (probe.p[2], probe.q[1]))?;
            let right = region_area(h, (probe.p[0], probe.q[1]), (probe.p[2], probe.q[2]))?;
            // Premise 2: a = b.
            let premise = [left - right, a - b];
            let vals = [a, b, c, d];
            let mut conclusion = 0.0f64;
            for i in 0..4 {
                for j in i + 1..4 {
                    conclusion = conclusion.max((vals[i] - vals[j]).abs());
                }
            }
            Ok(QuadOutcome::Cut {
                premise,
                conclusion,
            })
        }
    }
}
