//! Volume-preserving reflection maps and holonomy loops for 2D webs, with
//! Taylor-coefficient extraction of the loop germ matched against the Ricci
//! coefficient.

use thiserror::Error;

use crate::potential::{build_potential, DoublePotential, PotentialError, DEFAULT_TOL};
use crate::webgeom::{ricci, GeomError, WebModel};

#[derive(Debug, Error)]
pub enum HolonomyError {
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("reflection bracket failure on axis {axis}: signed volume never reaches {target:e} inside the window")]
    Bracket { axis: char, target: f64 },
    #[error("loop fit did not converge: ladder noise {noise:e} above the requested floor")]
    NoisyLadder { noise: f64 },
}

/// Which mirror leaf through the base point to reflect across: `F` is the
/// x = const leaf (the reflection moves x and preserves y), `G` the
/// y = const leaf.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    F,
    G,
}

/// Root-finder and ladder parameters for reflections and loop fits.
#[derive(Debug, Clone)]
pub struct ReflectionConfig {
    /// Bracket expansion factor for the signed-volume root search.
    pub bracket_expand: f64,
    /// Absolute tolerance on the signed-volume residual at the root.
    pub volume_tol: f64,
    /// Maximum bisection / expansion iterations.
    pub max_iter: usize,
    /// Geometric step ladder for the loop coefficient fit.
    pub ladder: Vec<f64>,
    /// Working window half-width as a multiple of the largest ladder step
    /// (or of |q − p| for one-shot reflections).
    pub span_factor: f64,
    /// Quadrature tolerance for the underlying potential.
    pub quad_tol: f64,
}

impl Default for ReflectionConfig {
    fn default() -> Self {
        ReflectionConfig {
            bracket_expand: 1.6,
            volume_tol: 1e-12,
            max_iter: 200,
            ladder: vec![0.08, 0.04, 0.02, 0.01],
            span_factor: 4.0,
            quad_tol: DEFAULT_TOL,
        }
    }
}

/// Result of fitting the cubic loop coefficients at a base point.
#[derive(Debug, Clone, serde::Serialize)]
pub struct LoopFit {
    pub base: [f64; 2],
    pub steps: Vec<f64>,
    /// Richardson-extrapolated coefficient of x²y in the first coordinate.
    pub c_u: f64,
    /// Richardson-extrapolated coefficient of x y² in the second coordinate.
    pub c_v: f64,
    /// Reference value: the loop coefficient predicted from the Ricci
    /// coefficient at the base via the frozen calibration factor.
    pub reference: f64,
    /// |c_u − reference| / max(|reference|, noise floor).
    pub rel_dev: f64,
    /// Per-step raw coefficients (u(h)−h)/h³ before extrapolation.
    pub per_step_u: Vec<f64>,
    pub per_step_v: Vec<f64>,
    /// Ladder noise estimate (spread of successive extrapolations).
    pub noise: f64,
}

/// Calibration of the loop germ against the jet-pipeline Ricci coefficient
/// κ = ∂²log|det A|/∂x∂y.  Measured once on A = e^{xy} at the origin
/// (κ = 1) and frozen; see the ledger note on the Taylor-law convention.
pub mod calibration {
    /// Loop coefficient per unit κ: ℓ(x,y) = (x + C·κ·x²y, y − C·κ·xy²).
    pub const LOOP_COEFF_PER_KAPPA: f64 = 1.0;
}

/// A reflection/holonomy session at a fixed base point: a double potential
/// centered at the base plus the root-finder configuration.
pub struct HolonomySession {
    h: DoublePotential,
    p: [f64; 2],
    cfg: ReflectionConfig,
}

impl HolonomySession {
    /// Build a session with a working window of half-width `span` around
    /// the base point.
    pub fn new(
        m: &WebModel,
        p: [f64; 2],
        span: f64,
        cfg: ReflectionConfig,
    ) -> Result<Self, HolonomyError> {
        let window = [
            [p[0] - span, p[0] + span],
            [p[1] - span, p[1] + span],
        ];
        let h = build_potential(m, window, p[0], p[1], cfg.quad_tol)?;
        Ok(HolonomySession { h, p, cfg })
    }

    pub fn potential(&self) -> &DoublePotential {
        &self.h
    }

    /// Signed volume of the region [p, (x, y)].
    fn volume(&self, x: f64, y: f64) -> Result<f64, HolonomyError> {
        Ok(self.h.eval(x, y)?)
    }

    /// Volume-preserving reflection of `q` across the mirror leaf through
    /// the base point.
    pub fn reflect(&self, q: [f64; 2], axis: Axis) -> Result<[f64; 2], HolonomyError> {
        // Coordinates: `moving` is the coordinate the reflection changes.
        let (moving, fixed) = match axis {
            Axis::F => (0usize, 1usize),
            Axis::G => (1usize, 0usize),
        };
        let dq = q[moving] - self.p[moving];
        if dq == 0.0 {
            // q lies on the mirror leaf: the leaf maps to itself.
            return Ok(q);
        }
        let vol = |m_coord: f64| -> Result<f64, HolonomyError> {
            match axis {
                Axis::F => self.volume(m_coord, q[fixed]),
                Axis::G => self.volume(q[fixed], m_coord),
            }
        };
        let target = -vol(q[moving])?;
        let axis_char = if axis == Axis::F { 'F' } else { 'G' };
        if target == 0.0 {
            // zero-volume region (q on the other leaf through p): mirror is
            // the point at the same offset on the opposite side in the flat
            // limit; the volume condition is degenerate, reflect linearly.
            let mut o = q;
            o[moving] = 2.0 * self.p[moving] - q[moving];
            return Ok(o);
        }
        // Bracket [base, base − dq·span] on the opposite side.
        let window = self.h.window();
        let (wlo, whi) = (window[moving][0], window[moving][1]);
        let g = |x: f64| -> Result<f64, HolonomyError> { Ok(vol(x)? - target) };
        let mut span = dq.abs();
        let a = self.p[moving];
        let ga = g(a)?; // = −target
        let mut b;
        let mut gb;
        let mut iter = 0;
        loop {
            b = (a - dq.signum() * span).clamp(wlo, whi);
            gb = g(b)?;
            if gb == 0.0 {
                return Ok(place(q, moving, b));
            }
            if gb.signum() != ga.signum() {
                break;
            }
            if (b == wlo || b == whi) || iter >= self.cfg.max_iter {
                return Err(HolonomyError::Bracket {
                    axis: axis_char,
                    target,
                });
            }
            span *= self.cfg.bracket_expand;
            iter += 1;
        }
        // Bisection to the volume tolerance.
        let (mut lo, mut hi, glo) = (a, b, ga);
        let mut mid = 0.5 * (lo + hi);
        for _ in 0..self.cfg.max_iter {
            mid = 0.5 * (lo + hi);
            let gm = g(mid)?;
            if gm.abs() < self.cfg.volume_tol || (hi - lo).abs() < 1e-15 {
                return Ok(place(q, moving, mid));
            }
            if gm.signum() == glo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(place(q, moving, mid))
    }

    /// The holonomy loop ℓ = r_G ∘ r_F ∘ r_G ∘ r_F applied to `q`.
    pub fn loop_once(&self, q: [f64; 2]) -> Result<[f64; 2], HolonomyError> {
        let q1 = self.reflect(q, Axis::F)?;
        let q2 = self.reflect(q1, Axis::G)?;
        let q3 = self.reflect(q2, Axis::F)?;
        self.reflect(q3, Axis::G)
    }
}

fn place(mut q: [f64; 2], idx: usize, v: f64) -> [f64; 2] {
    q[idx] = v;
    q
}

/// One-shot reflection with default configuration.
pub fn reflect(
    m: &WebModel,
    p: [f64; 2],
    q: [f64; 2],
    axis: Axis,
) -> Result<[f64; 2], HolonomyError> {
    let cfg = ReflectionConfig::default();
    let span = cfg.span_factor
        * ((q[0] - p[0]).abs().max((q[1] - p[1]).abs())).max(0.05);
    HolonomySession::new(m, p, span, cfg)?.reflect(q, axis)
}

/// One-shot holonomy loop with default configuration.
pub fn holonomy_loop(
    m: &WebModel,
    p: [f64; 2],
    q: [f64; 2],
) -> Result<[f64; 2], HolonomyError> {
    let cfg = ReflectionConfig::default();
    let span = cfg.span_factor
        * ((q[0] - p[0]).abs().max((q[1] - p[1]).abs())).max(0.05);
    HolonomySession::new(m, p, span, cfg)?.loop_once(q)
}

/// Fit the cubic Taylor coefficients of the loop germ at `p` over the step
/// ladder and compare against the Ricci prediction.
pub fn fit_loop_coefficient(m: &WebModel, p: [f64; 2]) -> Result<LoopFit, HolonomyError> {
    fit_loop_coefficient_with(m, p, ReflectionConfig::default())
}

pub fn fit_loop_coefficient_with(
    m: &WebModel,
    p: [f64; 2],
    cfg: ReflectionConfig,
) -> Result<LoopFit, HolonomyError> {
    assert!(cfg.ladder.len() >= 2, "ladder needs at least two steps");
    let span = cfg.span_factor * cfg.ladder.iter().cloned().fold(0.0f64, f64::max);
    let session = HolonomySession::new(m, p, span, cfg.clone())?;
    let mut per_step_u = Vec::with_capacity(cfg.ladder.len());
    let mut per_step_v = Vec::with_capacity(cfg.ladder.len());
    for &step in &cfg.ladder {
        let q = [p[0] + step, p[1] + step];
        let img = session.loop_once(q)?;
        per_step_u.push((img[0] - q[0]) / step.powi(3));
        per_step_v.push((img[1] - q[1]) / step.powi(3));
    }
    // Richardson extrapolation for a ladder with ratio r: the leading error
    // of (u(h)−h)/h³ is O(h), so c ≈ (r·c(h/r) − c(h)) / (r − 1).
    let extrapolate = |vals: &[f64]| -> (f64, f64) {
        let mut exts = Vec::new();
        for i in 0..vals.len() - 1 {
            let r = cfg.ladder[i] / cfg.ladder[i + 1];
            exts.push((r * vals[i + 1] - vals[i]) / (r - 1.0));
        }
        let last = *exts.last().unwrap();
        let noise = if exts.len() >= 2 {
            (last - exts[exts.len() - 2]).abs()
        } else {
            f64::INFINITY
        };
        (last, noise)
    };
    let (c_u, noise_u) = extrapolate(&per_step_u);
    let (c_v, noise_v) = extrapolate(&per_step_v);
    let kappa = ricci(m, &[p[0], p[1]])?[0][0];
    let reference = calibration::LOOP_COEFF_PER_KAPPA * kappa;
    let noise = noise_u.max(noise_v);
    let rel_dev = (c_u - reference).abs() / reference.abs().max(1e-6);
    Ok(LoopFit {
        base: p,
        steps: cfg.ladder.clone(),
        c_u,
        c_v,
        reference,
        rel_dev,
        per_step_u,
        per_step_v,
        noise,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use approx::assert_relative_eq;

    fn explicit_1x1(src: &str) -> WebModel {
        WebModel::Explicit {
            n: 1,
            entries: vec![vec![parse(src, &["x1", "y1"]).unwrap()]],
            params: vec![],
        }
    }

    #[test]
    fn flat_reflection_is_linear_mirror() {
        let m = explicit_1x1("1");
        let o = reflect(&m, [0.0, 0.0], [0.3, 0.2], Axis::F).unwrap();
        assert_relative_eq!(o[0], -0.3, epsilon = 1e-10);
        assert_eq!(o[1], 0.2);
        let o = reflect(&m, [0.0, 0.0], [0.3, 0.2], Axis::G).unwrap();
        assert_eq!(o[0], 0.3);
        assert_relative_eq!(o[1], -0.2, epsilon = 1e-10);
    }

    #[test]
    fn reflection_is_involution() {
        let m = explicit_1x1("exp(x1*y1)");
        let cfg = ReflectionConfig::default();
        let s = HolonomySession::new(&m, [0.0, 0.0], 0.8, cfg).unwrap();
        for q in [[0.1, 0.2], [-0.15, 0.1], [0.2, -0.25]] {
            for axis in [Axis::F, Axis::G] {
                let o = s.reflect(q, axis).unwrap();
                let back = s.reflect(o, axis).unwrap();
                assert_relative_eq!(back[0], q[0], epsilon = 1e-9);
                assert_relative_eq!(back[1], q[1], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn reflection_matches_quadrature_oracle() {
        // A = e^{xy}, p = 0, q = (0.1, 0.2), axis F: x_o solves
        // ∫₀^{x_o}∫₀^{0.2} e^{xy} = −∫₀^{0.1}∫₀^{0.2} e^{xy}.
        let m = explicit_1x1("exp(x1*y1)");
        let o = reflect(&m, [0.0, 0.0], [0.1, 0.2], Axis::F).unwrap();
        assert_eq!(o[1], 0.2);
        // independent oracle: closed-form inner integral, then dense Simpson
        let int = |x: f64| -> f64 {
            // ∫₀^x (e^{0.2 u} − 1)/u du via the series Σ (0.2)^k x^k / (k·k!)
            let mut sum = 0.0;
            let mut fact = 1.0;
            for k in 1..=20 {
                let kf = k as f64;
                fact *= kf;
                sum += (0.2f64).powi(k as i32) * x.powi(k as i32) / (kf * fact);
            }
            sum
        };
        let resid = int(o[0]) + int(0.1);
        assert!(resid.abs() < 1e-9, "residual {resid}");
    }

    #[test]
    fn mirror_leaf_points_fixed() {
        let m = explicit_1x1("exp(x1*y1)");
        let cfg = ReflectionConfig::default();
        let s = HolonomySession::new(&m, [0.0, 0.0], 0.5, cfg).unwrap();
        let q = [0.0, 0.2]; // on the F mirror leaf
        assert_eq!(s.reflect(q, Axis::F).unwrap(), q);
        let l = s.loop_once([0.1, 0.0]).unwrap();
        assert_relative_eq!(l[0], 0.1, epsilon = 1e-9);
        assert_relative_eq!(l[1], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn flat_loop_is_identity() {
        let m = explicit_1x1("1");
        let l = holonomy_loop(&m, [0.0, 0.0], [0.2, 0.15]).unwrap();
        assert_relative_eq!(l[0], 0.2, epsilon = 1e-10);
        assert_relative_eq!(l[1], 0.15, epsilon = 1e-10);
    }

    #[test]
    fn exp_xy_loop_cubic_scaling() {
        let m = explicit_1x1("exp(x1*y1)");
        let cfg = ReflectionConfig::default();
        let s = HolonomySession::new(&m, [0.0, 0.0], 0.5, cfg).unwrap();
        let dev = |h: f64| {
            let q = [h, h];
            let l = s.loop_once(q).unwrap();
            ((l[0] - q[0]).powi(2) + (l[1] - q[1]).powi(2)).sqrt()
        };
        let (d1, d2) = (dev(0.08), dev(0.04));
        let ratio = d1 / d2;
        assert!(
            (ratio / 8.0 - 1.0).abs() < 0.5,
            "expected ~8x shrinkage, got {ratio}"
        );
    }

    #[test]
    fn exp_xy_loop_coefficient_matches_reference() {
        let m = explicit_1x1("exp(x1*y1)");
        let fit = fit_loop_coefficient(&m, [0.0, 0.0]).unwrap();
        // κ = 1 at the origin.
        assert!(
            fit.rel_dev < 0.02,
            "c_u = {}, reference = {}, dev {}",
            fit.c_u,
            fit.reference,
            fit.rel_dev
        );
        // sign pattern: +κ-coefficient in u, −κ-coefficient in v
        assert!(fit.c_u > 0.0 && fit.c_v < 0.0, "c_u {} c_v {}", fit.c_u, fit.c_v);
        assert_relative_eq!(fit.c_u, -fit.c_v, max_relative = 0.05);
    }

    #[test]
    fn flat_loop_coefficient_below_noise_floor() {
        let m = explicit_1x1("1");
        let fit = fit_loop_coefficient(&m, [0.0, 0.0]).unwrap();
        assert!(fit.c_u.abs() < 1e-6, "c_u {}", fit.c_u);
        assert!(fit.c_v.abs() < 1e-6, "c_v {}", fit.c_v);
    }
}
