//! JSON formats: metric spec files and the expression-tree encoding.

use std::path::Path;

use confinv_core::catalog::{self, MetricTerm};
use confinv_core::variation::TorusMetricSpec;
use confinv_core::{ExpressionTree as E, MetricJet};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{CliResult, Failure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Flat,
    SphereStereographic,
    HyperbolicBall,
    ConformallyFlat,
    PerturbedFlat,
    TorusFamily,
}

/// A metric spec file.
///
/// `params` depends on the type: an expression tree `w` for
/// `conformally_flat` (metric `e^{2w}δ`), a term list for `perturbed_flat`,
/// and the torus fields (`active_dims`, `perturbation`, `log_factor`,
/// `direction`, `grid`) for `torus_family`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSpecFile {
    #[serde(rename = "type")]
    pub kind: MetricKind,
    pub dim: usize,
    #[serde(default)]
    pub point: Vec<f64>,
    #[serde(default)]
    pub params: Value,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl MetricSpecFile {
    pub fn parse(text: &str) -> CliResult<MetricSpecFile> {
        let spec: MetricSpecFile =
            serde_json::from_str(text).map_err(|e| Failure::Input(format!("spec file: {e}")))?;
        spec.check_shape()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> CliResult<MetricSpecFile> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
        MetricSpecFile::parse(&text)
    }

    fn check_shape(&self) -> CliResult<()> {
        if !(3..=8).contains(&self.dim) {
            return Err(Failure::Input(format!("dim {} outside 3..=8", self.dim)));
        }
        if self.kind != MetricKind::TorusFamily && self.point.len() != self.dim {
            return Err(Failure::Input(format!(
                "point has {} coordinates, expected {}",
                self.point.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// `w` of a `conformally_flat` spec.
    pub fn log_factor(&self) -> CliResult<E> {
        expr_from_json(&self.params)
    }

    /// Terms of a `perturbed_flat` spec; `null` means none.
    pub fn terms(&self) -> CliResult<Vec<MetricTerm>> {
        if self.params.is_null() {
            return Ok(Vec::new());
        }
        serde_json::from_value(self.params.clone()).map_err(|e| Failure::Input(format!("perturbation terms: {e}")))
    }

    /// Metric jet at `point`.
    pub fn metric(&self) -> CliResult<MetricJet> {
        self.metric_at(&self.point)
    }

    /// Same family, another chart point.
    pub fn metric_at(&self, point: &[f64]) -> CliResult<MetricJet> {
        let n = self.dim;
        let m = match self.kind {
            MetricKind::Flat => catalog::flat(n, point),
            MetricKind::SphereStereographic => catalog::sphere_stereographic(n, point),
            MetricKind::HyperbolicBall => catalog::hyperbolic_ball(n, point),
            MetricKind::ConformallyFlat => catalog::conformally_flat(n, point, &self.log_factor()?),
            MetricKind::PerturbedFlat => catalog::perturbed_flat(n, point, &self.terms()?),
            MetricKind::TorusFamily => {
                return Err(Failure::Input("torus_family specs describe a family, not a point metric".into()))
            }
        };
        m.map_err(Failure::at_load)
    }

    /// Validated torus family.
    pub fn torus(&self) -> CliResult<TorusMetricSpec> {
        if self.kind != MetricKind::TorusFamily {
            return Err(Failure::Input("expected a torus_family spec".into()));
        }
        let mut fields = match &self.params {
            Value::Object(m) => m.clone(),
            Value::Null => Map::new(),
            _ => return Err(Failure::Input("torus_family params must be an object".into())),
        };
        fields.insert("dim".into(), json!(self.dim));
        fields.entry("active_dims").or_insert(json!(1));
        let spec: TorusMetricSpec =
            serde_json::from_value(Value::Object(fields)).map_err(|e| Failure::Input(format!("torus params: {e}")))?;
        spec.validate().map_err(Failure::at_load)?;
        Ok(spec)
    }

    pub fn from_torus(spec: &TorusMetricSpec, seed: Option<u64>) -> MetricSpecFile {
        let mut params = serde_json::to_value(spec).expect("torus spec serializes");
        if let Value::Object(m) = &mut params {
            m.remove("dim");
        }
        MetricSpecFile { kind: MetricKind::TorusFamily, dim: spec.dim, point: Vec::new(), params, seed }
    }
}

fn arg_list(v: &Value) -> CliResult<Vec<E>> {
    match v.get("args") {
        Some(Value::Array(a)) => a.iter().map(expr_from_json).collect(),
        _ => Err(Failure::Input(format!("expression node needs \"args\": {v}"))),
    }
}

fn unary(v: &Value) -> CliResult<E> {
    let mut args = arg_list(v)?;
    if args.len() != 1 {
        return Err(Failure::Input(format!("expected one argument: {v}")));
    }
    Ok(args.remove(0))
}

fn number(v: &Value) -> CliResult<f64> {
    v.get("value").and_then(Value::as_f64).ok_or_else(|| Failure::Input(format!("expression node needs \"value\": {v}")))
}

/// Decodes `{"op", "args", "value", "index"}`.
pub fn expr_from_json(v: &Value) -> CliResult<E> {
    let op = v
        .get("op")
        .and_then(Value::as_str)
        .ok_or_else(|| Failure::Input(format!("expression node without \"op\": {v}")))?;
    Ok(match op {
        "const" => E::constant(number(v)?),
        "coord" => E::coord(
            v.get("index")
                .and_then(Value::as_u64)
                .ok_or_else(|| Failure::Input(format!("coord node needs \"index\": {v}")))? as usize,
        ),
        "add" => E::sum(arg_list(v)?),
        "mul" => E::product(arg_list(v)?),
        "div" => {
            let mut a = arg_list(v)?;
            if a.len() != 2 {
                return Err(Failure::Input(format!("div takes two arguments: {v}")));
            }
            let den = a.pop().unwrap();
            E::quotient(a.pop().unwrap(), den)
        }
        "pow" => unary(v)?.pow(number(v)?),
        "exp" => unary(v)?.exp(),
        "log" => unary(v)?.log(),
        "sin" => unary(v)?.sin(),
        "cos" => unary(v)?.cos(),
        other => return Err(Failure::Input(format!("unknown op {other:?}"))),
    })
}

pub fn expr_to_json(e: &E) -> Value {
    let un = |op: &str, x: &E| json!({ "op": op, "args": [expr_to_json(x)] });
    match e {
        E::Const(c) => json!({ "op": "const", "value": c }),
        E::Coord(i) => json!({ "op": "coord", "index": i }),
        E::Add(xs) => json!({ "op": "add", "args": xs.iter().map(expr_to_json).collect::<Vec<_>>() }),
        E::Mul(xs) => json!({ "op": "mul", "args": xs.iter().map(expr_to_json).collect::<Vec<_>>() }),
        E::Div(a, b) => json!({ "op": "div", "args": [expr_to_json(a), expr_to_json(b)] }),
        E::Pow(x, p) => json!({ "op": "pow", "args": [expr_to_json(x)], "value": p }),
        E::Exp(x) => un("exp", x),
        E::Log(x) => un("log", x),
        E::Sin(x) => un("sin", x),
        E::Cos(x) => un("cos", x),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expression_round_trip() {
        let e = E::quotient(
            E::sum(vec![E::coord(0).sin(), E::constant(2.0)]),
            E::product(vec![E::coord(1).exp(), E::coord(2).cos().pow(1.5)]),
        )
        .log();
        assert_eq!(expr_from_json(&expr_to_json(&e)).unwrap(), e);
    }

    #[test]
    fn rejects_bad_nodes() {
        assert!(expr_from_json(&json!({"op": "tan", "args": []})).is_err());
        assert!(expr_from_json(&json!({"op": "coord"})).is_err());
        assert!(expr_from_json(&json!({"op": "div", "args": [{"op": "const", "value": 1}]})).is_err());
    }

    #[test]
    fn torus_params_default() {
        let s = MetricSpecFile::parse(r#"{"type": "torus_family", "dim": 5, "params": {"active_dims": 2}}"#).unwrap();
        let t = s.torus().unwrap();
        assert_eq!(t.grid, confinv_core::variation::DEFAULT_GRID);
        assert_eq!(MetricSpecFile::from_torus(&t, None).torus().unwrap(), t);
    }

    #[test]
    fn dimension_and_point_checks() {
        assert!(MetricSpecFile::parse(r#"{"type": "flat", "dim": 9, "point": []}"#).is_err());
        assert!(MetricSpecFile::parse(r#"{"type": "flat", "dim": 3, "point": [0, 0]}"#).is_err());
        let h = MetricSpecFile::parse(r#"{"type": "hyperbolic_ball", "dim": 3, "point": [1, 0, 0]}"#).unwrap();
        assert!(matches!(h.metric(), Err(Failure::Input(_))));
    }
}
