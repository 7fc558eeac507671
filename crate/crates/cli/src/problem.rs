//! Problem-file schema. A problem file is the declarative twin of the
//! lambda1 flag sets: geometry, potential, solver. Unknown keys are
//! rejected, defaults are filled in before the run, and the filled-in
//! form is echoed into the result record so a run is reproducible from
//! its own output.

use serde::{Deserialize, Serialize};
use subrumin::field::{Coefficient, ScalarField};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub geometry: Geometry,
    #[serde(default)]
    pub potential: Potential,
    #[serde(default)]
    pub solver: Solver,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    #[serde(rename = "type")]
    pub kind: GeometryKind,
    #[serde(default = "default_k")]
    pub k: u32,
}

fn default_k() -> u32 {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryKind {
    Torus,
    Nilmanifold,
    Circle,
}

/// Potential one-form a dx + b dy + h alpha, coefficients given either
/// as plain numbers or as expression strings. `f_gauge` is an optional
/// gauge function applied as a -> a + d_H f before solving; the spectrum
/// must not notice it.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Potential {
    pub a: CoeffSpec,
    pub b: CoeffSpec,
    pub h: CoeffSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_gauge: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoeffSpec {
    Number(f64),
    Expr(String),
}

impl Default for CoeffSpec {
    fn default() -> Self {
        CoeffSpec::Number(0.0)
    }
}

impl CoeffSpec {
    pub fn to_coefficient(&self, field: &str) -> Result<Coefficient, String> {
        match self {
            CoeffSpec::Number(v) => Ok(Coefficient::Const(*v)),
            CoeffSpec::Expr(src) => match ScalarField::parse(src) {
                Ok(f) => Ok(Coefficient::Field(f)),
                Err(e) => Err(format!("potential.{field}: {e}")),
            },
        }
    }

    /// Constant value, or an error naming the coefficient, for solver
    /// paths that cannot take a genuine field.
    pub fn require_const(&self, field: &str) -> Result<f64, String> {
        match self {
            CoeffSpec::Number(v) => Ok(*v),
            CoeffSpec::Expr(src) => {
                // A closed-form expression with no variables is still a
                // constant; fold it instead of refusing.
                let f = ScalarField::parse(src)
                    .map_err(|e| format!("potential.{field}: {e}"))?;
                let v0 = f.eval(0.11, 0.23, 0.31);
                let v1 = f.eval(0.71, 0.53, 0.87);
                match (v0, v1) {
                    (Ok(a), Ok(b)) if (a - b).abs() <= 1e-12 * (1.0 + a.abs()) => Ok(a),
                    _ => Err(format!(
                        "potential.{field} must be constant for this method; got expression {src:?}"
                    )),
                }
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Solver {
    pub method: Method,
    /// Grid sizes per axis: [nv, nw] for fd and sector, [n] for circle,
    /// [nx, ny, nz] for grid3d. Ignored by exact.
    pub grid: Vec<u32>,
    /// Sector scan half-width m_max for the nilmanifold sector method.
    pub sectors: u32,
    pub tol: f64,
    pub seed: u64,
}

impl Default for Solver {
    fn default() -> Self {
        Solver {
            method: Method::Fd,
            grid: vec![64, 64],
            sectors: 2,
            tol: 1e-8,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Closed-form eigenvalue; requires constant coefficients.
    #[value(alias = "closed")]
    Exact,
    Sector,
    Grid3d,
    Fd,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Sector => "sector",
            Method::Grid3d => "grid3d",
            Method::Fd => "fd",
        }
    }
}

/// Parse and schema-check a problem file. Grid arity and the
/// geometry/method pairing are checked here so a bad file never reaches
/// a solver; coefficient expressions are checked at conversion time.
pub fn load_problem(path: &str) -> Result<ProblemFile, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{path}: {e}"))?;
    let pf: ProblemFile =
        serde_json::from_str(&text).map_err(|e| format!("{path}: {e}"))?;
    validate(&pf)?;
    Ok(pf)
}

pub fn validate(pf: &ProblemFile) -> Result<(), String> {
    let m = pf.solver.method;
    let allowed: &[Method] = match pf.geometry.kind {
        GeometryKind::Torus => &[Method::Exact, Method::Fd],
        GeometryKind::Nilmanifold => &[Method::Exact, Method::Sector, Method::Grid3d],
        GeometryKind::Circle => &[Method::Exact, Method::Fd],
    };
    if !allowed.contains(&m) {
        return Err(format!(
            "solver.method {:?} does not apply to geometry {:?}",
            m.name(),
            pf.geometry.kind
        ));
    }
    let need = match (pf.geometry.kind, m) {
        (_, Method::Exact) => 0,
        (GeometryKind::Circle, Method::Fd) => 1,
        (_, Method::Fd) | (_, Method::Sector) => 2,
        (_, Method::Grid3d) => 3,
    };
    if need > 0 && pf.solver.grid.len() != need {
        return Err(format!(
            "solver.grid must have {need} entries for method {}; got {:?}",
            m.name(),
            pf.solver.grid
        ));
    }
    if pf.solver.grid.iter().any(|&n| n == 0) {
        return Err(format!("solver.grid entries must be positive; got {:?}", pf.solver.grid));
    }
    if !(pf.solver.tol > 0.0) {
        return Err(format!("solver.tol must be positive; got {}", pf.solver.tol));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_materialize() {
        let pf: ProblemFile =
            serde_json::from_str(r#"{"geometry": {"type": "torus"}}"#).unwrap();
        assert_eq!(pf.geometry.k, 1);
        assert!(matches!(pf.potential.a, CoeffSpec::Number(v) if v == 0.0));
        assert_eq!(pf.solver.grid, vec![64, 64]);
        assert_eq!(pf.solver.sectors, 2);
        assert_eq!(pf.solver.seed, 0);
        validate(&pf).unwrap();
    }

    #[test]
    fn unknown_keys_rejected_at_every_level() {
        for bad in [
            r#"{"geometry": {"type": "torus"}, "extra": 1}"#,
            r#"{"geometry": {"type": "torus", "radius": 2}}"#,
            r#"{"geometry": {"type": "torus"}, "potential": {"c": 1}}"#,
            r#"{"geometry": {"type": "torus"}, "solver": {"mode": "fd"}}"#,
        ] {
            assert!(serde_json::from_str::<ProblemFile>(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn coefficients_take_numbers_or_expressions() {
        let pf: ProblemFile = serde_json::from_str(
            r#"{"geometry": {"type": "nilmanifold", "k": 2},
                "potential": {"a": 1.5, "b": "sin(2*pi*y)"},
                "solver": {"method": "sector"}}"#,
        )
        .unwrap();
        assert!(matches!(pf.potential.a, CoeffSpec::Number(v) if v == 1.5));
        pf.potential.b.to_coefficient("b").unwrap();
        assert!(pf.potential.b.require_const("b").is_err());
        assert!(
            CoeffSpec::Expr("pi/2".into()).require_const("a").unwrap()
                - std::f64::consts::FRAC_PI_2
                < 1e-14
        );
    }

    #[test]
    fn method_geometry_pairing_enforced() {
        let pf: ProblemFile = serde_json::from_str(
            r#"{"geometry": {"type": "torus"}, "solver": {"method": "sector"}}"#,
        )
        .unwrap();
        assert!(validate(&pf).unwrap_err().contains("sector"));
        let pf: ProblemFile = serde_json::from_str(
            r#"{"geometry": {"type": "circle"}, "solver": {"method": "fd", "grid": [64, 64]}}"#,
        )
        .unwrap();
        assert!(validate(&pf).unwrap_err().contains("grid"));
    }
}
