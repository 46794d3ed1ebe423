//! Core bi-Lagrangian geometry in adapted coordinates.
//!
//! A web on R^{2n} is described by the coefficient matrix field
//! `A_ij = ω(∂x_i, ∂y_j)`.  Everything else is derived from jets of A:
//!
//! * connection 1-form blocks  γ_F = (d_xA·A⁻¹)^T,  γ_G = A⁻¹·d_yA
//! * curvature 2-form blocks   Ω_F = d_y(d_xA·A⁻¹)^T,  Ω_G = d_x(A⁻¹·d_yA)
//! * Ricci coefficients        κ_ij = ∂²log|det A| / ∂x_i ∂y_j
//! * the symplectic curvature tensor Rs(X,Y,Z,W) = ω(R(Z,W)Y, X)
//!
//! Coordinates are ordered (x_1..x_n, y_1..y_n); 1-forms are stored as
//! length-2n component vectors and 2-forms as antisymmetric 2n×2n component
//! matrices in that basis.

use serde::Serialize;
use thiserror::Error;

use crate::expr::EvalError;
use crate::jets::{Jet, JetContext, JetError};
use crate::models::{RaySpaceModel, TangentLineModel};

/// Errors from geometric evaluation.
#[derive(Debug, Error)]
pub enum GeomError {
    #[error("degenerate coefficient matrix: |det A| = {det:e} below 1e-12")]
    Degenerate { det: f64 },
    #[error("separation violated: |x - y| = {dist:e} below delta_sep = {min:e}")]
    SeparationViolated { dist: f64, min: f64 },
    #[error("tangency: det(gamma_L', gamma_K') = {value:e} vanishes")]
    Tangency { value: f64 },
    #[error("inflection: det(gamma_{curve}', gamma_{curve}'') = {value:e} vanishes")]
    Inflection { curve: char, value: f64 },
    #[error("chord tangency: det(gamma_{curve}', chord) = {value:e} vanishes")]
    ChordTangency { curve: char, value: f64 },
    #[error("transversality: factor {factor} of the volume coefficient vanishes ({value:e})")]
    Transversality { factor: &'static str, value: f64 },
    #[error("jet order {got} too low, need at least {needed}")]
    OrderTooLow { needed: usize, got: usize },
    #[error("point has {got} coordinates, model lives on R^{expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Jet(#[from] JetError),
}

/// Hard floor under |det A| below which the matrix is treated as singular.
pub const DET_FLOOR: f64 = 1e-12;

/// How a base coordinate enters a jet evaluation: as the seeded jet variable
/// with the given index, or frozen at its numeric value.
#[derive(Debug, Clone, Copy)]
pub enum Seed {
    Var(usize),
    Frozen,
}

/// Seed the base coordinates `coords` into jets of a context with `num_vars`
/// variables at the given truncation order.
pub fn seed_coords(
    coords: &[f64],
    seeds: &[Seed],
    num_vars: usize,
    order: usize,
) -> Result<Vec<Jet>, GeomError> {
    let ctx = JetContext::new(num_vars, order)?;
    coords
        .iter()
        .zip(seeds.iter())
        .map(|(&v, seed)| match seed {
            Seed::Var(k) => Ok(Jet::variable(ctx, *k, v)?),
            Seed::Frozen => Ok(Jet::constant(ctx, v)),
        })
        .collect()
}

/// A declared bi-Lagrangian web.
#[derive(Debug, Clone)]
pub enum WebModel {
    /// A given directly as an n×n matrix of expressions in (x_1..x_n, y_1..y_n).
    Explicit {
        n: usize,
        entries: Vec<Vec<crate::expr::Expr>>,
        params: Vec<f64>,
    },
    /// Separable A(x,y) = f(x)·g(y); flat by construction.
    Product {
        n: usize,
        f: Vec<Vec<crate::expr::Expr>>,
        g: Vec<Vec<crate::expr::Expr>>,
        params: Vec<f64>,
    },
    /// Web of rays through two disjoint hypersurfaces.
    RaySpace(RaySpaceModel),
    /// Planar web of tangent lines of two curves.
    TangentLines(TangentLineModel),
    /// 2D section of a higher-dimensional model: keep coordinates x_row and
    /// y_col active, freeze the rest at the stored values.
    Slice {
        base: Box<WebModel>,
        row: usize,
        col: usize,
        frozen: Vec<f64>,
    },
}

impl WebModel {
    /// Leaf dimension n; the web lives on R^{2n}.
    pub fn leaf_dim(&self) -> usize {
        match self {
            WebModel::Explicit { n, .. } | WebModel::Product { n, .. } => *n,
            WebModel::RaySpace(m) => m.leaf_dim(),
            WebModel::TangentLines(_) => 1,
            WebModel::Slice { .. } => 1,
        }
    }

    /// Jets of every A_ij at `p`, seeded in all 2n coordinates.
    pub fn omega_jets(&self, p: &[f64], order: usize) -> Result<Vec<Vec<Jet>>, GeomError> {
        let dim = 2 * self.leaf_dim();
        if p.len() != dim {
            return Err(GeomError::DimensionMismatch {
                expected: dim,
                got: p.len(),
            });
        }
        let seeds: Vec<Seed> = (0..dim).map(Seed::Var).collect();
        self.omega_jets_mapped(p, &seeds, dim, order)
    }

    /// Jets of A_ij with an explicit coordinate-to-variable mapping; used by
    /// slices and by parameter-diagonal derivative extraction.
    pub fn omega_jets_mapped(
        &self,
        coords: &[f64],
        seeds: &[Seed],
        num_vars: usize,
        order: usize,
    ) -> Result<Vec<Vec<Jet>>, GeomError> {
        let a = match self {
            WebModel::Explicit { n, entries, params } => {
                let mut vars = seed_coords(coords, seeds, num_vars, order)?;
                let ctx = JetContext::new(num_vars, order)?;
                vars.extend(params.iter().map(|&v| Jet::constant(ctx, v)));
                let mut a = Vec::with_capacity(*n);
                for row in entries {
                    let mut out = Vec::with_capacity(*n);
                    for e in row {
                        out.push(crate::expr::eval_jet(e, &vars)?);
                    }
                    a.push(out);
                }
                a
            }
            WebModel::Product { n, f, g, params } => {
                let mut vars = seed_coords(coords, seeds, num_vars, order)?;
                let ctx = JetContext::new(num_vars, order)?;
                vars.extend(params.iter().map(|&v| Jet::constant(ctx, v)));
                let eval_mat = |m: &Vec<Vec<crate::expr::Expr>>| -> Result<Vec<Vec<Jet>>, GeomError> {
                    m.iter()
                        .map(|row| {
                            row.iter()
                                .map(|e| Ok(crate::expr::eval_jet(e, &vars)?))
                                .collect()
                        })
                        .collect()
                };
                let fm = eval_mat(f)?;
                let gm = eval_mat(g)?;
                debug_assert_eq!(fm.len(), *n);
                mat_mul(&fm, &gm)
            }
            WebModel::RaySpace(m) => m.omega_jets_mapped(coords, seeds, num_vars, order)?,
            WebModel::TangentLines(m) => m.omega_jets_mapped(coords, seeds, num_vars, order)?,
            WebModel::Slice {
                base,
                row,
                col,
                frozen,
            } => {
                let nb = base.leaf_dim();
                let mut full = frozen.clone();
                full[*row] = coords[0];
                full[nb + *col] = coords[1];
                let mut full_seeds = vec![Seed::Frozen; 2 * nb];
                full_seeds[*row] = seeds[0];
                full_seeds[nb + *col] = seeds[1];
                let a = base.omega_jets_mapped(&full, &full_seeds, num_vars, order)?;
                vec![vec![a[*row][*col].clone()]]
            }
        };
        let det = mat_det(&a)?;
        if det.value().abs() < DET_FLOOR {
            return Err(GeomError::Degenerate { det: det.value() });
        }
        Ok(a)
    }

    /// Plain values of A at `p` (order-0 jets, constant terms).
    pub fn omega_values(&self, p: &[f64]) -> Result<Vec<Vec<f64>>, GeomError> {
        let a = self.omega_jets(p, 0)?;
        Ok(a.iter()
            .map(|row| row.iter().map(|j| j.value()).collect())
            .collect())
    }
}

// ---------------------------------------------------------------------------
// Jet matrix algebra
// ---------------------------------------------------------------------------

pub(crate) fn mat_mul(a: &[Vec<Jet>], b: &[Vec<Jet>]) -> Vec<Vec<Jet>> {
    let n = a.len();
    let m = b[0].len();
    let k = b.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Vec::with_capacity(m);
        for j in 0..m {
            let mut acc = a[i][0].mul(&b[0][j]);
            for l in 1..k {
                acc = acc.add(&a[i][l].mul(&b[l][j]));
            }
            row.push(acc);
        }
        out.push(row);
    }
    out
}

fn mat_identity(ctx: JetContext, n: usize) -> Vec<Vec<Jet>> {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| Jet::constant(ctx, if i == j { 1.0 } else { 0.0 }))
                .collect()
        })
        .collect()
}

/// Determinant of a jet matrix by Gaussian elimination with partial pivoting
/// on constant terms.
pub(crate) fn mat_det(a: &[Vec<Jet>]) -> Result<Jet, GeomError> {
    let n = a.len();
    let mut m: Vec<Vec<Jet>> = a.to_vec();
    let ctx = m[0][0].context();
    let mut det = Jet::constant(ctx, 1.0);
    let mut sign = 1.0;
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r1, &r2| {
                m[r1][col]
                    .value()
                    .abs()
                    .total_cmp(&m[r2][col].value().abs())
            })
            .unwrap();
        if m[pivot_row][col].value().abs() < DET_FLOOR {
            return Err(GeomError::Degenerate {
                det: m[pivot_row][col].value(),
            });
        }
        if pivot_row != col {
            m.swap(pivot_row, col);
            sign = -sign;
        }
        let pivot = m[col][col].clone();
        det = det.mul(&pivot);
        for row in col + 1..n {
            let factor = m[row][col].div(&pivot)?;
            for j in col..n {
                let sub = factor.mul(&m[col][j]);
                m[row][j] = m[row][j].sub(&sub);
            }
        }
    }
    Ok(det.scale(sign))
}

/// Series inverse: invert the constant term with f64 Gauss elimination, then
/// refine by Newton iteration X ← X(2I − AX), which doubles the correct
/// Taylor order each step.
pub(crate) fn mat_inv(a: &[Vec<Jet>]) -> Result<Vec<Vec<Jet>>, GeomError> {
    let n = a.len();
    let ctx = a[0][0].context();
    let order = a
        .iter()
        .flatten()
        .map(|j| j.order())
        .min()
        .unwrap_or(ctx.order);
    let a0: Vec<Vec<f64>> = a
        .iter()
        .map(|row| row.iter().map(|j| j.value()).collect())
        .collect();
    let inv0 = real_mat_inv(&a0)?;
    let mut x: Vec<Vec<Jet>> = inv0
        .iter()
        .map(|row| row.iter().map(|&v| Jet::constant(ctx, v)).collect())
        .collect();
    let id2 = mat_identity(ctx, n)
        .iter()
        .map(|row| row.iter().map(|j| j.scale(2.0)).collect())
        .collect::<Vec<Vec<Jet>>>();
    let mut correct = 0usize; // correct through this Taylor order
    while correct < order {
        let ax = mat_mul(a, &x);
        let mut corr = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = Vec::with_capacity(n);
            for j in 0..n {
                row.push(id2[i][j].sub(&ax[i][j]));
            }
            corr.push(row);
        }
        x = mat_mul(&x, &corr);
        correct = 2 * correct + 1;
    }
    Ok(x)
}

/// Plain f64 matrix inverse by Gauss–Jordan with partial pivoting.
pub fn real_mat_inv(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, GeomError> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    let mut det = 1.0;
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r1, &r2| m[r1][col].abs().total_cmp(&m[r2][col].abs()))
            .unwrap();
        det *= m[pivot_row][col];
        if m[pivot_row][col].abs() < DET_FLOOR {
            return Err(GeomError::Degenerate { det });
        }
        m.swap(pivot_row, col);
        let pivot = m[col][col];
        for v in m[col].iter_mut() {
            *v /= pivot;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = m[row][col];
            if factor != 0.0 {
                for j in 0..2 * n {
                    m[row][j] -= factor * m[col][j];
                }
            }
        }
    }
    Ok(m.iter().map(|row| row[n..].to_vec()).collect())
}

pub(crate) fn real_mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let m = b[0].len();
    let k = b.len();
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| (0..k).map(|l| a[i][l] * b[l][j]).sum())
                .collect()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Connection and curvature
// ---------------------------------------------------------------------------

/// Matrix of 1-forms: `comps[i][j][a]` is the dx_a / dy_{a-n} component of
/// the (i,j) entry.
#[derive(Debug, Clone, Serialize)]
pub struct ConnectionBlock {
    pub comps: Vec<Vec<Vec<f64>>>,
}

/// Matrix of 2-forms: `comps[i][j][a][b]` is the e_a∧e_b component of the
/// (i,j) entry; each component matrix is antisymmetric.
#[derive(Debug, Clone, Serialize)]
pub struct TwoFormBlock {
    pub comps: Vec<Vec<Vec<Vec<f64>>>>,
}

impl TwoFormBlock {
    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flatten()
            .flatten()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Component of entry (i,j) on dx_k ∧ dy_l.
    pub fn mixed(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let n = self.comps.len();
        self.comps[i][j][k][n + l]
    }
}

/// Connection and curvature data at one point.
#[derive(Debug, Clone, Serialize)]
pub struct CurvatureReport {
    pub point: Vec<f64>,
    pub gamma_f: ConnectionBlock,
    pub gamma_g: ConnectionBlock,
    pub omega_f: TwoFormBlock,
    pub omega_g: TwoFormBlock,
    pub ricci: Vec<Vec<f64>>,
    pub det_a: f64,
    pub flat_residual: f64,
}

/// Jets of the connection-form components.
///
/// Returns (G_F, G_G) where `G_F[k][i][l]` is the jet of the dx_l component
/// of γ_F entry (k,i) — the frame transforms as ∇_X ∂x_i = Σ_k γ_F[k][i](X) ∂x_k
/// — and `G_G[k][j][l]` the dy_l component of γ_G entry (k,j).
fn gamma_jets(a: &[Vec<Jet>]) -> Result<(Vec<Vec<Vec<Jet>>>, Vec<Vec<Vec<Jet>>>), GeomError> {
    let n = a.len();
    let inv = mat_inv(a)?;
    // dxa[l][i][m] = ∂A_im/∂x_l, dya[l][m][j] = ∂A_mj/∂y_l
    let mut g_f = vec![vec![Vec::with_capacity(n); n]; n];
    let mut g_g = vec![vec![Vec::with_capacity(n); n]; n];
    for k in 0..n {
        for i in 0..n {
            for l in 0..n {
                // (d_xA·A^{-1})^T entry (k,i) over dx_l: Σ_m ∂A_im/∂x_l · inv_mk
                let mut acc = a[i][0].derivative(l).mul(&inv[0][k]);
                for m in 1..n {
                    acc = acc.add(&a[i][m].derivative(l).mul(&inv[m][k]));
                }
                g_f[k][i].push(acc);
                // (A^{-1}·d_yA) entry (k,i) over dy_l: Σ_m inv_km · ∂A_mi/∂y_l
                let mut acc = inv[k][0].mul(&a[0][i].derivative(n + l));
                for m in 1..n {
                    acc = acc.add(&inv[k][m].mul(&a[m][i].derivative(n + l)));
                }
                g_g[k][i].push(acc);
            }
        }
    }
    Ok((g_f, g_g))
}

/// Connection 1-form blocks γ_F (dx components) and γ_G (dy components).
pub fn connection_forms(
    m: &WebModel,
    p: &[f64],
) -> Result<(ConnectionBlock, ConnectionBlock), GeomError> {
    let n = m.leaf_dim();
    let a = m.omega_jets(p, 2)?;
    let (g_f, g_g) = gamma_jets(&a)?;
    let dim = 2 * n;
    let pack = |g: &Vec<Vec<Vec<Jet>>>, y_block: bool| ConnectionBlock {
        comps: (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let mut v = vec![0.0; dim];
                        for l in 0..n {
                            v[if y_block { n + l } else { l }] = g[i][j][l].value();
                        }
                        v
                    })
                    .collect()
            })
            .collect(),
    };
    Ok((pack(&g_f, false), pack(&g_g, true)))
}

/// Curvature 2-form blocks Ω_F = d_y γ_F and Ω_G = d_x γ_G.
pub fn curvature_forms(
    m: &WebModel,
    p: &[f64],
) -> Result<(TwoFormBlock, TwoFormBlock), GeomError> {
    let a = m.omega_jets(p, 3)?;
    curvature_forms_from_jets(&a)
}

pub(crate) fn curvature_forms_from_jets(
    a: &[Vec<Jet>],
) -> Result<(TwoFormBlock, TwoFormBlock), GeomError> {
    let n = a.len();
    let dim = 2 * n;
    let (g_f, g_g) = gamma_jets(a)?;
    let mut of = vec![vec![vec![vec![0.0; dim]; dim]; n]; n];
    let mut og = of.clone();
    for k in 0..n {
        for i in 0..n {
            for l in 0..n {
                for q in 0..n {
                    // d_y(G dx_l) = Σ_q ∂G/∂y_q dy_q ∧ dx_l, so the dx_l∧dy_q
                    // component is −∂G/∂y_q.
                    let c = -g_f[k][i][l].derivative(n + q).value();
                    of[k][i][l][n + q] = c;
                    of[k][i][n + q][l] = -c;
                    // d_x(G dy_l) = Σ_q ∂G/∂x_q dx_q ∧ dy_l.
                    let c = g_g[k][i][l].derivative(q).value();
                    og[k][i][q][n + l] = c;
                    og[k][i][n + l][q] = -c;
                }
            }
        }
    }
    Ok((TwoFormBlock { comps: of }, TwoFormBlock { comps: og }))
}

/// Ricci coefficients κ_ij = ∂² log|det A| / ∂x_i ∂y_j.
pub fn ricci(m: &WebModel, p: &[f64]) -> Result<Vec<Vec<f64>>, GeomError> {
    let n = m.leaf_dim();
    let a = m.omega_jets(p, 2)?;
    let logdet = mat_det(&a)?.abs_log()?;
    let dim = 2 * n;
    let mut kappa = vec![vec![0.0; n]; n];
    for (i, row) in kappa.iter_mut().enumerate() {
        for (j, k) in row.iter_mut().enumerate() {
            let mut alpha = vec![0u8; dim];
            alpha[i] = 1;
            alpha[n + j] += 1;
            *k = logdet.partial(&alpha)?;
        }
    }
    Ok(kappa)
}

/// det A at p (constant term).
pub fn det_a(m: &WebModel, p: &[f64]) -> Result<f64, GeomError> {
    let a = m.omega_jets(p, 1)?;
    Ok(mat_det(&a)?.value())
}

/// Symplectic curvature Rs(X,Y,Z,W) = ω(R(Z,W)Y, X) for tangent vectors
/// given by coordinate components of length 2n.
pub fn symplectic_curvature(
    m: &WebModel,
    p: &[f64],
    x: &[f64],
    y: &[f64],
    z: &[f64],
    w: &[f64],
) -> Result<f64, GeomError> {
    let n = m.leaf_dim();
    let dim = 2 * n;
    for v in [x, y, z, w] {
        if v.len() != dim {
            return Err(GeomError::DimensionMismatch {
                expected: dim,
                got: v.len(),
            });
        }
    }
    let a = m.omega_jets(p, 3)?;
    let (of, og) = curvature_forms_from_jets(&a)?;
    let aval: Vec<Vec<f64>> = a
        .iter()
        .map(|row| row.iter().map(|j| j.value()).collect())
        .collect();
    // Curvature endomorphism R(Z,W): block-diagonal in the coordinate frame,
    // R(Z,W)∂x_i = Σ_k Ω_F[k][i](Z,W) ∂x_k and likewise for ∂y with Ω_G.
    let eval2 = |comp: &Vec<Vec<f64>>| -> f64 {
        let mut acc = 0.0;
        for a_idx in 0..dim {
            for b_idx in 0..dim {
                acc += comp[a_idx][b_idx] * z[a_idx] * w[b_idx];
            }
        }
        acc
    };
    // V = R(Z,W)·Y in coordinate components.
    let mut v = vec![0.0; dim];
    for k in 0..n {
        for i in 0..n {
            v[k] += eval2(&of.comps[k][i]) * y[i];
            v[n + k] += eval2(&og.comps[k][i]) * y[n + i];
        }
    }
    // ω(V, X) = Σ_ij A_ij (V_{x_i} X_{y_j} − V_{y_j} X_{x_i}).
    let mut rs = 0.0;
    for i in 0..n {
        for j in 0..n {
            rs += aval[i][j] * (v[i] * x[n + j] - v[n + j] * x[i]);
        }
    }
    Ok(rs)
}

/// Sup-norm distance of the multiplicative cross-ratio
/// A(x,y)·A(x0,y)⁻¹·A(x0,y0)·A(x,y0)⁻¹ from the identity.  Zero (to
/// tolerance) whenever A factors as f(x)·g(y).
pub fn flatness_cross_ratio(m: &WebModel, p: &[f64], base: &[f64]) -> Result<f64, GeomError> {
    let n = m.leaf_dim();
    let (x, y) = p.split_at(n);
    let (x0, y0) = base.split_at(n);
    let corner = |xs: &[f64], ys: &[f64]| -> Vec<f64> {
        let mut c = xs.to_vec();
        c.extend_from_slice(ys);
        c
    };
    let a_xy = m.omega_values(&corner(x, y))?;
    let a_x0y = m.omega_values(&corner(x0, y))?;
    let a_x0y0 = m.omega_values(&corner(x0, y0))?;
    let a_xy0 = m.omega_values(&corner(x, y0))?;
    let prod = real_mat_mul(
        &real_mat_mul(&a_xy, &real_mat_inv(&a_x0y)?),
        &real_mat_mul(&a_x0y0, &real_mat_inv(&a_xy0)?),
    );
    let mut res = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            res = res.max((prod[i][j] - target).abs());
        }
    }
    Ok(res)
}

/// Residual of ∇-parallelism of the Hamiltonian frame field X_{y_i} (whose
/// ∂x_k components are row i of A⁻¹) along the leaf direction ∂x_m; the
/// canonical connection makes this vanish identically.
pub fn hamiltonian_frame_check(
    m: &WebModel,
    p: &[f64],
    i: usize,
    m_dir: usize,
) -> Result<f64, GeomError> {
    let n = m.leaf_dim();
    let a = m.omega_jets(p, 2)?;
    let inv = mat_inv(&a)?;
    let (g_f, _) = gamma_jets(&a)?;
    let mut res = 0.0f64;
    for k in 0..n {
        let mut comp = inv[i][k].derivative(m_dir).value();
        for j in 0..n {
            comp += inv[i][j].value() * g_f[k][j][m_dir].value();
        }
        res = res.max(comp.abs());
    }
    Ok(res)
}

/// Full curvature report at one point.
pub fn curvature_report(m: &WebModel, p: &[f64]) -> Result<CurvatureReport, GeomError> {
    let a = m.omega_jets(p, 3)?;
    let (gamma_f, gamma_g) = connection_forms(m, p)?;
    let (omega_f, omega_g) = curvature_forms_from_jets(&a)?;
    let flat_residual = omega_f.max_abs().max(omega_g.max_abs());
    Ok(CurvatureReport {
        point: p.to_vec(),
        gamma_f,
        gamma_g,
        omega_f,
        omega_g,
        ricci: ricci(m, p)?,
        det_a: mat_det(&a)?.value(),
        flat_residual,
    })
}

/// Cartan structure residual: sup-norm difference between the direct
/// curvature blocks and dγ + γ∧γ computed from jets of the connection
/// components, including the dx∧dx / dy∧dy parts which must cancel.
pub fn cartan_residual(m: &WebModel, p: &[f64]) -> Result<f64, GeomError> {
    let n = m.leaf_dim();
    let dim = 2 * n;
    let a = m.omega_jets(p, 3)?;
    let (of, og) = curvature_forms_from_jets(&a)?;
    let (g_f, g_g) = gamma_jets(&a)?;
    // Full exterior derivative and wedge on each block.  γ_F has only dx
    // components (index l in 0..n means dx_l) and γ_G only dy components.
    let mut worst = 0.0f64;
    for (block, direct, is_f) in [(&g_f, &of, true), (&g_g, &og, false)] {
        for k in 0..n {
            for i in 0..n {
                // dγ: for component G over basis form e_c (c = l or n+l),
                // add ∂G/∂e_a on e_a∧e_c.
                let mut two = vec![vec![0.0; dim]; dim];
                for l in 0..n {
                    let c = if is_f { l } else { n + l };
                    for a_idx in 0..dim {
                        let d = block[k][i][l].derivative(a_idx).value();
                        two[a_idx][c] += d;
                        two[c][a_idx] -= d;
                    }
                }
                // γ∧γ entry (k,i) = Σ_m γ[k][m]∧γ[m][i]; both factors live in
                // the same (dx or dy) sub-basis.
                for m_idx in 0..n {
                    for l1 in 0..n {
                        for l2 in 0..n {
                            let v =
                                block[k][m_idx][l1].value() * block[m_idx][i][l2].value();
                            let (c1, c2) = if is_f { (l1, l2) } else { (n + l1, n + l2) };
                            two[c1][c2] += v;
                            two[c2][c1] -= v;
                        }
                    }
                }
                for a_idx in 0..dim {
                    for b_idx in 0..dim {
                        let diff = (two[a_idx][b_idx] - direct.comps[k][i][a_idx][b_idx]).abs();
                        worst = worst.max(diff);
                    }
                }
            }
        }
    }
    Ok(worst)
}
