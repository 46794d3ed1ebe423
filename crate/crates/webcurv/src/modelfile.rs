//! JSON model files: declare a web by kind, expressions and parameters.
//!
//! Schema (all fields except `kind`, `n` and `exprs` optional):
//!
//! ```json
//! {
//!   "kind": "explicit" | "product" | "ray_space" | "tangent_lines",
//!   "n": 2,
//!   "params": {"r": 1.0},
//!   "exprs": {"A[1][1]": "exp(x1*y1)", ...},
//!   "probe": {"window": [[-0.5, 0.5], [-0.5, 0.5]], "points": [[0.0, 0.0]]},
//!   "options": {"jet_order": 3, "delta_sep": 1e-3, "tol": 1e-9}
//! }
//! ```
//!
//! Expression roles by kind (indices 1-based):
//! - `explicit`: `A[i][j]` over variables `x1..xn, y1..yn`;
//! - `product`: `f[i][j]` over `x1..xn` and `g[i][j]` over `y1..yn` (both
//!   parsed against the full coordinate list);
//! - `ray_space` with `n` = ambient dimension: either graphs `f`, `g` over
//!   `s1..s{n-1}`, or (n = 2) planar curves `x[1]`, `x[2]` over `s` and
//!   `y[1]`, `y[2]` over `t`;
//! - `tangent_lines`: graphs `f` over `s` and `g` over `t`, or parametrized
//!   curves `curve_L[1]`, `curve_L[2]` over `s` and `curve_K[*]` over `t`.
//!
//! Parameter names are appended to each variable list in sorted order, so
//! expressions may reference them by name.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::expr::{parse, Expr};
use crate::models::{RaySpaceModel, TangentLineModel};
use crate::webgeom::WebModel;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("cannot read model file: {0}")]
    Io(#[from] std::io::Error),
    #[error("model file is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("model schema error: {0}")]
    Schema(String),
    #[error("expression `{role}` does not parse: {message}")]
    Expr { role: String, message: String },
}

fn schema(msg: impl Into<String>) -> ModelFileError {
    ModelFileError::Schema(msg.into())
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    /// Coordinate window `[lo, hi]` per coordinate.
    pub window: Option<Vec<[f64; 2]>>,
    /// Explicit probe points.
    pub points: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OptionsSpec {
    pub jet_order: Option<usize>,
    pub delta_sep: Option<f64>,
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub kind: String,
    pub n: usize,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub exprs: BTreeMap<String, String>,
    #[serde(default)]
    pub probe: ProbeSpec,
    #[serde(default)]
    pub options: OptionsSpec,
}

impl ModelFile {
    pub fn from_str(text: &str) -> Result<Self, ModelFileError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ModelFileError> {
        Self::from_str(&std::fs::read_to_string(path)?)
    }

    fn param_names(&self) -> Vec<&str> {
        self.params.keys().map(|s| s.as_str()).collect()
    }

    fn param_values(&self) -> Vec<f64> {
        self.params.values().copied().collect()
    }

    fn parse_role(&self, role: &str, coord_vars: &[String]) -> Result<Expr, ModelFileError> {
        let src = self
            .exprs
            .get(role)
            .ok_or_else(|| schema(format!("missing expression `{role}`")))?;
        let mut vars: Vec<&str> = coord_vars.iter().map(|s| s.as_str()).collect();
        vars.extend(self.param_names());
        parse(src, &vars).map_err(|e| ModelFileError::Expr {
            role: role.to_string(),
            message: e.to_string(),
        })
    }

    fn known_roles(&self, allowed: &[String]) -> Result<(), ModelFileError> {
        for role in self.exprs.keys() {
            if !allowed.iter().any(|a| a == role) {
                return Err(schema(format!(
                    "unknown expression role `{role}` for kind `{}`",
                    self.kind
                )));
            }
        }
        Ok(())
    }

    /// Build the web model this file declares.
    pub fn build(&self) -> Result<WebModel, ModelFileError> {
        let n = self.n;
        if n == 0 {
            return Err(schema("n must be positive"));
        }
        let xy: Vec<String> = (1..=n)
            .map(|i| format!("x{i}"))
            .chain((1..=n).map(|i| format!("y{i}")))
            .collect();
        match self.kind.as_str() {
            "explicit" => {
                let roles: Vec<String> = (1..=n)
                    .flat_map(|i| (1..=n).map(move |j| format!("A[{i}][{j}]")))
                    .collect();
                self.known_roles(&roles)?;
                let mut entries = Vec::with_capacity(n);
                for i in 1..=n {
                    let mut row = Vec::with_capacity(n);
                    for j in 1..=n {
                        row.push(self.parse_role(&format!("A[{i}][{j}]"), &xy)?);
                    }
                    entries.push(row);
                }
                Ok(WebModel::Explicit {
                    n,
                    entries,
                    params: self.param_values(),
                })
            }
            "product" => {
                let roles: Vec<String> = (1..=n)
                    .flat_map(|i| {
                        (1..=n).flat_map(move |j| [format!("f[{i}][{j}]"), format!("g[{i}][{j}]")])
                    })
                    .collect();
                self.known_roles(&roles)?;
                let mat = |name: &str| -> Result<Vec<Vec<Expr>>, ModelFileError> {
                    (1..=n)
                        .map(|i| {
                            (1..=n)
                                .map(|j| self.parse_role(&format!("{name}[{i}][{j}]"), &xy))
                                .collect()
                        })
                        .collect()
                };
                Ok(WebModel::Product {
                    n,
                    f: mat("f")?,
                    g: mat("g")?,
                    params: self.param_values(),
                })
            }
            "ray_space" => {
                if n < 2 {
                    return Err(schema("ray_space needs ambient dimension n >= 2"));
                }
                let graphs = self.exprs.contains_key("f") || self.exprs.contains_key("g");
                let mut model = if graphs {
                    self.known_roles(&["f".to_string(), "g".to_string()])?;
                    let sv: Vec<String> = (1..n).map(|i| format!("s{i}")).collect();
                    RaySpaceModel::graphs(
                        n,
                        self.parse_role("f", &sv)?,
                        self.parse_role("g", &sv)?,
                        self.param_values(),
                    )
                } else {
                    if n != 2 {
                        return Err(schema("planar-curve ray_space models need n = 2"));
                    }
                    let roles: Vec<String> = ["x[1]", "x[2]", "y[1]", "y[2]"]
                        .iter()
                        .map(|s| s.to_string())
                        .collect();
                    self.known_roles(&roles)?;
                    let sv = vec!["s".to_string()];
                    let tv = vec!["t".to_string()];
                    RaySpaceModel::planar_curves(
                        [self.parse_role("x[1]", &sv)?, self.parse_role("x[2]", &sv)?],
                        [self.parse_role("y[1]", &tv)?, self.parse_role("y[2]", &tv)?],
                        self.param_values(),
                    )
                };
                if let Some(d) = self.options.delta_sep {
                    if !(d > 0.0) {
                        return Err(schema("delta_sep must be positive"));
                    }
                    model.delta_sep = d;
                }
                Ok(WebModel::RaySpace(model))
            }
            "tangent_lines" => {
                if n != 1 {
                    return Err(schema("tangent_lines models are planar: n must be 1"));
                }
                let graphs = self.exprs.contains_key("f") || self.exprs.contains_key("g");
                let sv = vec!["s".to_string()];
                let tv = vec!["t".to_string()];
                let model = if graphs {
                    self.known_roles(&["f".to_string(), "g".to_string()])?;
                    TangentLineModel::from_graphs(
                        self.parse_role("f", &sv)?,
                        self.parse_role("g", &tv)?,
                        self.param_values(),
                    )
                } else {
                    let roles: Vec<String> = ["curve_L[1]", "curve_L[2]", "curve_K[1]", "curve_K[2]"]
                        .iter()
                        .map(|s| s.to_string())
                        .collect();
                    self.known_roles(&roles)?;
                    TangentLineModel {
                        curve_l: [
                            self.parse_role("curve_L[1]", &sv)?,
                            self.parse_role("curve_L[2]", &sv)?,
                        ],
                        curve_k: [
                            self.parse_role("curve_K[1]", &tv)?,
                            self.parse_role("curve_K[2]", &tv)?,
                        ],
                        params: self.param_values(),
                    }
                };
                Ok(WebModel::TangentLines(model))
            }
            other => Err(schema(format!(
                "unknown kind `{other}`; expected explicit, product, ray_space or tangent_lines"
            ))),
        }
    }

    /// Probe points: the explicit list, validated against the window and the
    /// model's coordinate dimension.
    pub fn probe_points(&self, model: &WebModel) -> Result<Vec<Vec<f64>>, ModelFileError> {
        let dim = 2 * model.leaf_dim();
        let points = self.probe.points.clone().unwrap_or_default();
        for p in &points {
            if p.len() != dim {
                return Err(schema(format!(
                    "probe point {p:?} has {} coordinates, model needs {dim}",
                    p.len()
                )));
            }
            if let Some(w) = &self.probe.window {
                if w.len() != dim {
                    return Err(schema(format!(
                        "window has {} entries, model needs {dim}",
                        w.len()
                    )));
                }
                for (c, [lo, hi]) in p.iter().zip(w) {
                    if c < lo || c > hi {
                        return Err(schema(format!("probe point {p:?} outside window")));
                    }
                }
            }
        }
        Ok(points)
    }

    /// Uniform grid of `per_axis` points per coordinate over the window.
    pub fn grid_points(
        &self,
        model: &WebModel,
        per_axis: usize,
    ) -> Result<Vec<Vec<f64>>, ModelFileError> {
        let dim = 2 * model.leaf_dim();
        let w = self
            .probe
            .window
            .as_ref()
            .ok_or_else(|| schema("--grid needs probe.window in the model file"))?;
        if w.len() != dim {
            return Err(schema(format!(
                "window has {} entries, model needs {dim}",
                w.len()
            )));
        }
        if per_axis == 0 {
            return Err(schema("grid size must be positive"));
        }
        let axis = |[lo, hi]: &[f64; 2]| -> Vec<f64> {
            if per_axis == 1 {
                vec![0.5 * (lo + hi)]
            } else {
                (0..per_axis)
                    .map(|k| lo + (hi - lo) * k as f64 / (per_axis - 1) as f64)
                    .collect()
            }
        };
        let axes: Vec<Vec<f64>> = w.iter().map(axis).collect();
        let mut points = vec![vec![]];
        for ax in &axes {
            let mut next = Vec::with_capacity(points.len() * ax.len());
            for p in &points {
                for &v in ax {
                    let mut q = p.clone();
                    q.push(v);
                    next.push(q);
                }
            }
            points = next;
        }
        Ok(points)
    }
}
