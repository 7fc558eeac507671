//! Generated-expression properties: the printer and parser are inverse
//! up to print normal form, and the three derivative engines (symbolic,
//! nested duals, central differences) agree wherever they are defined.

use proptest::prelude::*;
use subrumin::field::{diff, parse, print, BinOp, FieldExpr, ScalarField, UnaryFn, Var};

fn leaf() -> impl Strategy<Value = FieldExpr> {
    prop_oneof![
        Just(FieldExpr::Pi),
        Just(FieldExpr::Var(Var::X)),
        Just(FieldExpr::Var(Var::Y)),
        Just(FieldExpr::Var(Var::Z)),
        Just(FieldExpr::Number(0.0)),
        Just(FieldExpr::Number(1.0)),
        (-10.0..10.0f64).prop_map(FieldExpr::Number),
    ]
}

fn expr() -> impl Strategy<Value = FieldExpr> {
    leaf().prop_recursive(4, 48, 3, |inner| {
        prop_oneof![
            (
                prop_oneof![
                    Just(BinOp::Add),
                    Just(BinOp::Sub),
                    Just(BinOp::Mul),
                    Just(BinOp::Div)
                ],
                inner.clone(),
                inner.clone()
            )
                .prop_map(|(op, a, b)| FieldExpr::Binary(op, Box::new(a), Box::new(b))),
            (
                prop_oneof![
                    Just(UnaryFn::Sin),
                    Just(UnaryFn::Cos),
                    Just(UnaryFn::Exp),
                    Just(UnaryFn::Neg)
                ],
                inner.clone()
            )
                .prop_map(|(f, a)| FieldExpr::Unary(f, Box::new(a))),
            (inner, -3..5i32).prop_map(|(a, n)| FieldExpr::Pow(Box::new(a), n)),
        ]
    })
}

const PROBES: [[f64; 3]; 5] = [
    [0.3, -0.7, 1.1],
    [0.0, 0.0, 0.0],
    [1.0, 1.0, -1.0],
    [-2.2, 0.4, 0.9],
    [0.5, 2.0, -3.0],
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn print_parse_round_trip(e in expr()) {
        let s = print(&e);
        let back = parse(&s).expect("printer output must parse");
        // Print normal form is a fixed point.
        prop_assert_eq!(print(&back), s.clone());
        let f = ScalarField::from_expr(e);
        let g = ScalarField::from_expr(back);
        for p in PROBES {
            let a = f.eval(p[0], p[1], p[2]);
            let b = g.eval(p[0], p[1], p[2]);
            match (a, b) {
                (Ok(u), Ok(v)) => {
                    let scale = u.abs().max(v.abs()).max(1.0);
                    if scale < 1e12 {
                        prop_assert!((u - v).abs() <= 1e-9 * scale,
                            "{} reparsed as {} differs at {:?}: {} vs {}", f.source(), g.source(), p, u, v);
                    }
                }
                (Err(_), Err(_)) => {}
                (a, b) => prop_assert!(false, "definedness changed across round trip: {:?} vs {:?}", a, b),
            }
        }
    }

    #[test]
    fn symbolic_and_dual_derivatives_agree(e in expr()) {
        let f = ScalarField::from_expr(e);
        for (var, pick) in [
            (Var::X, 0usize),
            (Var::Y, 1),
            (Var::Z, 2),
        ] {
            let sym = ScalarField::from_expr(diff(f.expr(), var));
            for p in PROBES {
                let (Ok(jet), Ok(sv)) = (f.jet(p[0], p[1], p[2]), sym.eval(p[0], p[1], p[2])) else {
                    continue;
                };
                let dv = [jet.dx, jet.dy, jet.dz][pick];
                let scale = dv.abs().max(sv.abs()).max(1.0);
                if scale < 1e9 {
                    prop_assert!((dv - sv).abs() <= 1e-6 * scale,
                        "d/d{:?} of {} disagrees at {:?}: dual {} vs symbolic {}",
                        var, f.source(), p, dv, sv);
                }
            }
        }
    }
}

#[test]
fn central_differences_corroborate_both_engines() {
    let cases = [
        "sin(2*pi*x)*cos(y) + exp(0.3*z)",
        "x^3 - 2*x*y*z + z^-2",
        "exp(sin(x) + cos(y*z))",
        "(x + y)^2 / (1 + z^2)",
    ];
    let at = [0.4, -0.6, 1.3];
    let h = 1e-5;
    for src in cases {
        let f = ScalarField::parse(src).unwrap();
        let jet = f.jet(at[0], at[1], at[2]).unwrap();
        for (axis, dual_val) in [(0, jet.dx), (1, jet.dy), (2, jet.dz)] {
            let mut hi = at;
            let mut lo = at;
            hi[axis] += h;
            lo[axis] -= h;
            let central = (f.eval(hi[0], hi[1], hi[2]).unwrap()
                - f.eval(lo[0], lo[1], lo[2]).unwrap())
                / (2.0 * h);
            let scale = central.abs().max(1.0);
            assert!(
                (central - dual_val).abs() <= 1e-7 * scale,
                "{src} axis {axis}: central {central} vs dual {dual_val}"
            );
        }
        // Mixed second derivative, both orders, against a wide stencil.
        let sym_xy = ScalarField::from_expr(diff(&diff(f.expr(), Var::X), Var::Y));
        let sxy = sym_xy.eval(at[0], at[1], at[2]).unwrap();
        assert!(
            (jet.dxy - sxy).abs() <= 1e-8 * sxy.abs().max(1.0),
            "{src}: dxy {0} vs symbolic {sxy}",
            jet.dxy
        );
    }
}
