//! Scalar fields on coordinates (x, y, z): parsing, evaluation, and exact
//! first and second derivatives by forward-mode automatic differentiation.

mod dual;
mod parse;

pub use dual::{Dual, Scalar};
pub use parse::{parse, print, BinOp, FieldExpr, ParseError, UnaryFn, Var};

use std::fmt;

#[derive(Clone, Debug, PartialEq)]
pub enum EvalError {
    DivisionByZero { at: [f64; 3] },
    ZeroToNegativePower { at: [f64; 3], exponent: i32 },
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::DivisionByZero { at } => {
                write!(f, "division by zero at ({}, {}, {})", at[0], at[1], at[2])
            }
            EvalError::ZeroToNegativePower { at, exponent } => write!(
                f,
                "zero raised to negative power {exponent} at ({}, {}, {})",
                at[0], at[1], at[2]
            ),
        }
    }
}

impl std::error::Error for EvalError {}

/// Evaluate over any scalar type carrying derivative structure. The guard
/// values are the plain point coordinates, used only for error reporting.
pub fn eval_scalar<T: Scalar>(
    e: &FieldExpr,
    x: T,
    y: T,
    z: T,
    at: [f64; 3],
) -> Result<T, EvalError> {
    match e {
        FieldExpr::Number(v) => Ok(T::from_f64(*v)),
        FieldExpr::Pi => Ok(T::from_f64(std::f64::consts::PI)),
        FieldExpr::Var(Var::X) => Ok(x),
        FieldExpr::Var(Var::Y) => Ok(y),
        FieldExpr::Var(Var::Z) => Ok(z),
        FieldExpr::Unary(func, inner) => {
            let v = eval_scalar(inner, x, y, z, at)?;
            Ok(match func {
                UnaryFn::Sin => v.sin(),
                UnaryFn::Cos => v.cos(),
                UnaryFn::Exp => v.exp(),
                UnaryFn::Neg => -v,
            })
        }
        FieldExpr::Binary(op, l, r) => {
            let a = eval_scalar(l, x, y, z, at)?;
            let b = eval_scalar(r, x, y, z, at)?;
            match op {
                BinOp::Add => Ok(a + b),
                BinOp::Sub => Ok(a - b),
                BinOp::Mul => Ok(a * b),
                BinOp::Div => {
                    if b.value() == 0.0 {
                        Err(EvalError::DivisionByZero { at })
                    } else {
                        Ok(a / b)
                    }
                }
            }
        }
        FieldExpr::Pow(base, n) => {
            let a = eval_scalar(base, x, y, z, at)?;
            if *n < 0 && a.value() == 0.0 {
                return Err(EvalError::ZeroToNegativePower { at, exponent: *n });
            }
            Ok(a.powi(*n))
        }
    }
}

/// Value and all coordinate derivatives through second order at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Derivs {
    pub value: f64,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    pub dxx: f64,
    pub dxy: f64,
    pub dxz: f64,
    pub dyy: f64,
    pub dyz: f64,
    pub dzz: f64,
}

impl Derivs {
    /// Horizontal frame derivative X = d/dx + y d/dz.
    pub fn x_frame(&self, y: f64) -> f64 {
        self.dx + y * self.dz
    }

    /// Horizontal frame derivative Y = d/dy.
    pub fn y_frame(&self) -> f64 {
        self.dy
    }

    /// Vertical frame derivative Z = d/dz.
    pub fn z_frame(&self) -> f64 {
        self.dz
    }

    /// X(Xf) = f_xx + 2y f_xz + y^2 f_zz.
    pub fn xx_frame(&self, y: f64) -> f64 {
        self.dxx + 2.0 * y * self.dxz + y * y * self.dzz
    }

    /// X(Yf) = f_xy + y f_yz.
    pub fn xy_frame(&self, y: f64) -> f64 {
        self.dxy + y * self.dyz
    }

    /// Y(Xf) = f_xy + f_z + y f_yz. Differs from X(Yf) by Zf: [Y, X] = Z.
    pub fn yx_frame(&self, y: f64) -> f64 {
        self.dxy + self.dz + y * self.dyz
    }

    /// Y(Yf) = f_yy.
    pub fn yy_frame(&self) -> f64 {
        self.dyy
    }

    /// X(Zf) = f_xz + y f_zz.
    pub fn xz_frame(&self, y: f64) -> f64 {
        self.dxz + y * self.dzz
    }

    /// Y(Zf) = f_yz.
    pub fn yz_frame(&self) -> f64 {
        self.dyz
    }
}

type D1 = Dual<f64>;
type D2 = Dual<Dual<f64>>;

/// Full jet at a point: three first-order passes and six second-order
/// passes of nested duals. No finite differencing anywhere.
pub fn eval_with_derivatives(
    e: &FieldExpr,
    x: f64,
    y: f64,
    z: f64,
) -> Result<Derivs, EvalError> {
    let at = [x, y, z];
    let c = |v: f64| D1::constant(v);
    let s = |v: f64| D1::seeded(v);

    let fx = eval_scalar(e, s(x), c(y), c(z), at)?;
    let fy = eval_scalar(e, c(x), s(y), c(z), at)?;
    let fz = eval_scalar(e, c(x), c(y), s(z), at)?;

    // Second order: outer seed on one variable, inner seed on another.
    // d2(a, b) yields d^2 f / (da db) in .eps.eps.
    let d2 = |i: usize, j: usize| -> Result<f64, EvalError> {
        let mk = |k: usize, v: f64| -> D2 {
            let inner = if k == j { s(v) } else { c(v) };
            let outer_eps = if k == i { c(1.0) } else { c(0.0) };
            Dual {
                re: inner,
                eps: outer_eps,
            }
        };
        let r = eval_scalar(e, mk(0, x), mk(1, y), mk(2, z), at)?;
        Ok(r.eps.eps)
    };

    Ok(Derivs {
        value: fx.re,
        dx: fx.eps,
        dy: fy.eps,
        dz: fz.eps,
        dxx: d2(0, 0)?,
        dxy: d2(0, 1)?,
        dxz: d2(0, 2)?,
        dyy: d2(1, 1)?,
        dyz: d2(1, 2)?,
        dzz: d2(2, 2)?,
    })
}

pub(crate) mod smart {
    use super::{BinOp, FieldExpr, UnaryFn};

    pub fn num(v: f64) -> FieldExpr {
        FieldExpr::Number(v)
    }

    pub fn add(a: FieldExpr, b: FieldExpr) -> FieldExpr {
        match (a, b) {
            (FieldExpr::Number(x), FieldExpr::Number(y)) => num(x + y),
            (FieldExpr::Number(x), b) if x == 0.0 => b,
            (a, FieldExpr::Number(y)) if y == 0.0 => a,
            (a, b) => FieldExpr::Binary(BinOp::Add, Box::new(a), Box::new(b)),
        }
    }

    pub fn sub(a: FieldExpr, b: FieldExpr) -> FieldExpr {
        match (a, b) {
            (FieldExpr::Number(x), FieldExpr::Number(y)) => num(x - y),
            (a, FieldExpr::Number(y)) if y == 0.0 => a,
            (FieldExpr::Number(x), b) if x == 0.0 => neg(b),
            (a, b) => FieldExpr::Binary(BinOp::Sub, Box::new(a), Box::new(b)),
        }
    }

    pub fn mul(a: FieldExpr, b: FieldExpr) -> FieldExpr {
        match (a, b) {
            (FieldExpr::Number(x), FieldExpr::Number(y)) => num(x * y),
            (FieldExpr::Number(x), _) | (_, FieldExpr::Number(x)) if x == 0.0 => num(0.0),
            (FieldExpr::Number(x), b) if x == 1.0 => b,
            (a, FieldExpr::Number(y)) if y == 1.0 => a,
            (a, b) => FieldExpr::Binary(BinOp::Mul, Box::new(a), Box::new(b)),
        }
    }

    pub fn div(a: FieldExpr, b: FieldExpr) -> FieldExpr {
        match (a, b) {
            (a, FieldExpr::Number(y)) if y == 1.0 => a,
            (a, b) => FieldExpr::Binary(BinOp::Div, Box::new(a), Box::new(b)),
        }
    }

    pub fn neg(a: FieldExpr) -> FieldExpr {
        match a {
            FieldExpr::Number(x) => num(-x),
            FieldExpr::Unary(UnaryFn::Neg, inner) => *inner,
            a => FieldExpr::Unary(UnaryFn::Neg, Box::new(a)),
        }
    }

    pub fn powe(a: FieldExpr, n: i32) -> FieldExpr {
        match n {
            0 => num(1.0),
            1 => a,
            _ => FieldExpr::Pow(Box::new(a), n),
        }
    }

    pub fn fun(f: UnaryFn, a: FieldExpr) -> FieldExpr {
        FieldExpr::Unary(f, Box::new(a))
    }
}

/// Coordinate derivative of an expression tree, lightly folded (zero and
/// one absorption, constant arithmetic). Folding can erase a division
/// subterm whose factor is structurally zero, so a derivative tree may
/// evaluate where the original would report division by zero.
pub fn diff(e: &FieldExpr, var: Var) -> FieldExpr {
    use smart::*;
    match e {
        FieldExpr::Number(_) | FieldExpr::Pi => num(0.0),
        FieldExpr::Var(v) => num(if *v == var { 1.0 } else { 0.0 }),
        FieldExpr::Unary(UnaryFn::Neg, u) => neg(diff(u, var)),
        FieldExpr::Unary(UnaryFn::Sin, u) => mul(fun(UnaryFn::Cos, (**u).clone()), diff(u, var)),
        FieldExpr::Unary(UnaryFn::Cos, u) => {
            neg(mul(fun(UnaryFn::Sin, (**u).clone()), diff(u, var)))
        }
        FieldExpr::Unary(UnaryFn::Exp, u) => mul(fun(UnaryFn::Exp, (**u).clone()), diff(u, var)),
        FieldExpr::Binary(BinOp::Add, a, b) => add(diff(a, var), diff(b, var)),
        FieldExpr::Binary(BinOp::Sub, a, b) => sub(diff(a, var), diff(b, var)),
        FieldExpr::Binary(BinOp::Mul, a, b) => add(
            mul(diff(a, var), (**b).clone()),
            mul((**a).clone(), diff(b, var)),
        ),
        FieldExpr::Binary(BinOp::Div, a, b) => div(
            sub(
                mul(diff(a, var), (**b).clone()),
                mul((**a).clone(), diff(b, var)),
            ),
            powe((**b).clone(), 2),
        ),
        FieldExpr::Pow(a, n) => mul(
            mul(num(*n as f64), powe((**a).clone(), n - 1)),
            diff(a, var),
        ),
    }
}

/// A parsed scalar field ready for repeated evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    expr: FieldExpr,
    source: String,
}

impl ScalarField {
    pub fn parse(src: &str) -> Result<Self, ParseError> {
        let expr = parse(src)?;
        Ok(ScalarField {
            source: print(&expr),
            expr,
        })
    }

    pub fn from_expr(expr: FieldExpr) -> Self {
        ScalarField {
            source: print(&expr),
            expr,
        }
    }

    pub fn expr(&self) -> &FieldExpr {
        &self.expr
    }

    /// Canonical printed form; parsing it back reproduces `expr` exactly.
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, x: f64, y: f64, z: f64) -> Result<f64, EvalError> {
        eval_scalar(&self.expr, x, y, z, [x, y, z])
    }

    pub fn jet(&self, x: f64, y: f64, z: f64) -> Result<Derivs, EvalError> {
        eval_with_derivatives(&self.expr, x, y, z)
    }

    pub fn differentiate(&self, var: Var) -> ScalarField {
        ScalarField::from_expr(diff(&self.expr, var))
    }

    /// True when the expression tree never mentions z, so the field descends
    /// to functions of the torus coordinates alone.
    pub fn is_z_free(&self) -> bool {
        fn scan(e: &FieldExpr) -> bool {
            match e {
                FieldExpr::Var(Var::Z) => false,
                FieldExpr::Number(_) | FieldExpr::Pi | FieldExpr::Var(_) => true,
                FieldExpr::Unary(_, inner) => scan(inner),
                FieldExpr::Binary(_, l, r) => scan(l) && scan(r),
                FieldExpr::Pow(base, _) => scan(base),
            }
        }
        scan(&self.expr)
    }
}

impl fmt::Display for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

/// Coefficient of a differential form: either a closed-form constant or a
/// sampled scalar field.
#[derive(Clone, Debug, PartialEq)]
pub enum Coefficient {
    Const(f64),
    Field(ScalarField),
}

impl Coefficient {
    pub fn eval(&self, x: f64, y: f64, z: f64) -> Result<f64, EvalError> {
        match self {
            Coefficient::Const(v) => Ok(*v),
            Coefficient::Field(f) => f.eval(x, y, z),
        }
    }

    pub fn jet(&self, x: f64, y: f64, z: f64) -> Result<Derivs, EvalError> {
        match self {
            Coefficient::Const(v) => Ok(Derivs {
                value: *v,
                ..Derivs::default()
            }),
            Coefficient::Field(f) => f.jet(x, y, z),
        }
    }

    pub fn is_z_free(&self) -> bool {
        match self {
            Coefficient::Const(_) => true,
            Coefficient::Field(f) => f.is_z_free(),
        }
    }
}

impl From<f64> for Coefficient {
    fn from(v: f64) -> Self {
        Coefficient::Const(v)
    }
}

impl From<ScalarField> for Coefficient {
    fn from(f: ScalarField) -> Self {
        Coefficient::Field(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn jet(src: &str, x: f64, y: f64, z: f64) -> Derivs {
        ScalarField::parse(src).unwrap().jet(x, y, z).unwrap()
    }

    #[test]
    fn polynomial_jet_matches_hand_calculation() {
        // f = x^2 y at (1, 2, 0): f = 2, f_x = 2xy = 4, f_y = x^2 = 1,
        // f_xx = 2y = 4, f_xy = 2x = 2, rest zero.
        let d = jet("x^2*y", 1.0, 2.0, 0.0);
        assert!((d.value - 2.0).abs() < 1e-15);
        assert!((d.dx - 4.0).abs() < 1e-15);
        assert!((d.dy - 1.0).abs() < 1e-15);
        assert!((d.dxx - 4.0).abs() < 1e-15);
        assert!((d.dxy - 2.0).abs() < 1e-15);
        assert_eq!(d.dz, 0.0);
        assert_eq!(d.dzz, 0.0);
    }

    #[test]
    fn frame_derivatives_of_height_monomial() {
        // f = 2xz - x^2 y at (1, 1, 1): Xf = f_x + y f_z = (2z - 2xy) + y(2x) = 2z = 2.
        let d = jet("2*x*z - x^2*y", 1.0, 1.0, 1.0);
        assert!((d.x_frame(1.0) - 2.0).abs() < 1e-15);
        // Yf = -x^2 = -1, Zf = 2x = 2.
        assert!((d.y_frame() + 1.0).abs() < 1e-15);
        assert!((d.z_frame() - 2.0).abs() < 1e-15);
        // X(Xf): f_xx + 2y f_xz + y^2 f_zz = -2y + 2y*2 + 0 = 2y = 2.
        assert!((d.xx_frame(1.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn trig_jet() {
        let two_pi = 2.0 * std::f64::consts::PI;
        let d = jet("sin(2*pi*y)", 0.3, 0.0, 0.7);
        assert!((d.dy - two_pi).abs() < 1e-12);
        assert!(d.dx.abs() < 1e-15 && d.dz.abs() < 1e-15);
        let d = jet("sin(2*pi*y)", 0.0, 0.25, 0.0);
        assert!((d.value - 1.0).abs() < 1e-12);
        assert!((d.dyy + two_pi * two_pi).abs() < 1e-9);
    }

    #[test]
    fn mixed_partials_commute() {
        let f = ScalarField::parse("exp(x*y)*sin(y*z) + x^3*z^2").unwrap();
        let d = f.jet(0.7, -0.4, 1.3).unwrap();
        // dxy, dxz, dyz each computed once; symmetry is structural in the
        // nested-dual evaluation, so probe against a transposed seeding.
        let at = [0.7, -0.4, 1.3];
        let c = |v: f64| Dual::<f64>::constant(v);
        let s = |v: f64| Dual::<f64>::seeded(v);
        // d/dy then d/dx, outer seed on y
        let r: Dual<Dual<f64>> = eval_scalar(
            f.expr(),
            Dual { re: s(0.7), eps: c(0.0) },
            Dual { re: c(-0.4), eps: c(1.0) },
            Dual { re: c(1.3), eps: c(0.0) },
            at,
        )
        .unwrap();
        assert!((r.eps.eps - d.dxy).abs() < 1e-12);
    }

    #[test]
    fn division_by_zero_reports_point() {
        let f = ScalarField::parse("1/(x - 1)").unwrap();
        match f.eval(1.0, 0.0, 0.0) {
            Err(EvalError::DivisionByZero { at }) => assert_eq!(at, [1.0, 0.0, 0.0]),
            other => panic!("expected division error, got {other:?}"),
        }
        assert!(f.eval(2.0, 0.0, 0.0).is_ok());
    }

    #[test]
    fn zero_to_negative_power_rejected() {
        let f = ScalarField::parse("x^-1").unwrap();
        assert!(matches!(
            f.eval(0.0, 1.0, 1.0),
            Err(EvalError::ZeroToNegativePower { exponent: -1, .. })
        ));
    }

    #[test]
    fn z_freeness_detection() {
        assert!(ScalarField::parse("x^2 + sin(y)").unwrap().is_z_free());
        assert!(!ScalarField::parse("x*z").unwrap().is_z_free());
        // z appearing only inside an unused branch still counts as mention
        assert!(!ScalarField::parse("0*z + 1").unwrap().is_z_free());
    }

    #[test]
    fn symbolic_derivative_matches_jet() {
        for src in [
            "x^2*y",
            "2*x*z - x^2*y",
            "sin(2*pi*y)*cos(x)",
            "exp(x*y)/(2 + cos(z))",
            "-(x + y)^3",
        ] {
            let f = ScalarField::parse(src).unwrap();
            for var in [Var::X, Var::Y, Var::Z] {
                let g = f.differentiate(var);
                for &(x, y, z) in &[(0.3, -0.7, 1.1), (1.0, 2.0, 0.5), (-0.4, 0.9, -1.3)] {
                    let jet = f.jet(x, y, z).unwrap();
                    let expect = match var {
                        Var::X => jet.dx,
                        Var::Y => jet.dy,
                        Var::Z => jet.dz,
                    };
                    let got = g.eval(x, y, z).unwrap();
                    assert!(
                        (got - expect).abs() <= 1e-12 * expect.abs().max(1.0),
                        "d/d{var:?} of {src} at ({x},{y},{z}): {got} vs {expect}"
                    );
                }
            }
        }
    }

    #[test]
    fn derivative_folding_keeps_trees_small() {
        // d/dx of x^2*y is 2*x*y after folding, not a sum with zero terms.
        let f = ScalarField::parse("x^2*y").unwrap();
        let g = f.differentiate(Var::X);
        assert_eq!(g.source(), "2*x*y");
        let h = f.differentiate(Var::Z);
        assert_eq!(h.source(), "0");
    }

    #[test]
    fn canonical_source_round_trips() {
        let f = ScalarField::parse("-(x + y)^2 * 3").unwrap();
        let g = ScalarField::parse(f.source()).unwrap();
        assert_eq!(f.expr(), g.expr());
        assert_eq!(f.source(), g.source());
    }
}
