use proptest::prelude::*;

use super::*;
use crate::error::Error;

fn env(pairs: &[(&str, f64)]) -> Bindings {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn eval_str(src: &str, pairs: &[(&str, f64)]) -> f64 {
    evaluate(&parse(src).unwrap(), &env(pairs)).unwrap()
}

#[test]
fn precedence_and_associativity() {
    assert_eq!(eval_str("2+3*4", &[]), 14.0);
    assert_eq!(eval_str("2^3^2", &[]), 512.0);
    assert_eq!(eval_str("10-4-3", &[]), 3.0);
    assert_eq!(eval_str("64/4/2", &[]), 8.0);
    assert_eq!(eval_str("-2^2", &[]), -4.0);
    assert_eq!(eval_str("2^-1", &[]), 0.5);
    assert_eq!(eval_str("-3*-2", &[]), 6.0);
    assert_eq!(eval_str(" ( 1 + 2 ) * 3 ", &[]), 9.0);
}

#[test]
fn spec_examples() {
    assert_eq!(eval_str("v1^2/2 - q1^2/2", &[("q1", 1.0), ("v1", 0.0)]), -0.5);
    assert_eq!(eval_str("sin(t)", &[("t", 0.0)]), 0.0);
    assert_eq!(eval_str("q1*v2 - q2*v1", &[("q1", 2.0), ("q2", 0.0), ("v1", 0.0), ("v2", 0.5)]), 1.0);
    assert!((eval_str("exp(q1)", &[("q1", 1.0)]) - 2.718281828459045).abs() < 1e-12);
}

#[test]
fn functions_and_literals() {
    assert_eq!(eval_str("pow(2, 10)", &[]), 1024.0);
    assert_eq!(eval_str("abs(-1.5e-3)", &[]), 1.5e-3);
    assert_eq!(eval_str("sqrt(16)+log(1)+cos(0)+tan(0)", &[]), 5.0);
    assert_eq!(eval_str(".5 + 2.", &[]), 2.5);
    assert_eq!(eval_str("1E+2", &[]), 100.0);
}

#[test]
fn syntax_errors_carry_offsets() {
    match parse("1 + * 2") {
        Err(Error::Syntax { offset, expected }) => {
            assert_eq!(offset, 4);
            assert!(expected.contains("number"));
        }
        other => panic!("{other:?}"),
    }
    assert!(matches!(parse("(1+2"), Err(Error::Syntax { offset: 4, .. })));
    assert!(matches!(parse("1 2"), Err(Error::Syntax { offset: 2, .. })));
    assert!(matches!(parse("3 # 4"), Err(Error::Syntax { offset: 2, .. })));
    assert!(matches!(parse("1e"), Err(Error::Syntax { .. })));
    assert!(matches!(parse(""), Err(Error::Syntax { offset: 0, .. })));
    assert!(matches!(parse("pow(1)"), Err(Error::Syntax { .. })));
    assert!(matches!(parse("sin(1, 2)"), Err(Error::Syntax { .. })));
}

#[test]
fn unknown_function() {
    assert_eq!(parse("2 + cosh(q1)"), Err(Error::UnknownFunction { name: "cosh".into(), offset: 4 }));
}

#[test]
fn declared_names() {
    let names = Names::new(2, ["k"]);
    let e = parse_with_names("k*q2 + v1 + t", &names).unwrap();
    assert_eq!(e.free_names(), vec!["k", "q2", "v1", "t"]);
    assert!(matches!(e, Expr::Binary(..)));
    assert_eq!(
        parse_with_names("q3", &names),
        Err(Error::UnknownIdentifier { name: "q3".into(), offset: 0 })
    );
    assert!(matches!(parse_with_names("q0", &names), Err(Error::UnknownIdentifier { .. })));
    assert!(matches!(parse_with_names("1 + m", &names), Err(Error::UnknownIdentifier { offset: 4, .. })));
    // Without a names set the same identifier is only an evaluation-time error.
    let e = parse("m").unwrap();
    assert_eq!(evaluate(&e, &Bindings::new()), Err(Error::UnboundVariable("m".into())));
}

#[test]
fn domain_errors() {
    let empty = Bindings::new();
    for src in ["sqrt(-1)", "log(-2)", "log(0)", "1/0", "(-8)^0.5", "0^-1"] {
        assert!(matches!(evaluate(&parse(src).unwrap(), &empty), Err(Error::Domain(_))), "{src}");
    }
    assert_eq!(eval_str("(-2)^3", &[]), -8.0);
}

#[test]
fn compiled_matches_tree_walk() {
    let e = parse("k*q1^2/2 + sin(v1)*exp(-t)").unwrap();
    let order = ["t", "q1", "v1", "k"];
    let c = Compiled::new(&e, &|n| order.iter().position(|o| *o == n)).unwrap();
    let slots = [0.3, -1.2, 0.7, 2.5];
    let direct = evaluate(&e, &order.iter().zip(slots).map(|(k, v)| (k.to_string(), v)).collect()).unwrap();
    assert_eq!(c.eval(&slots).unwrap().to_bits(), direct.to_bits());
    assert!(Compiled::new(&e, &|n| (n == "t").then_some(0)).is_err());
}

fn arb_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0.0f64..1e6).prop_map(Expr::Num),
        (0u32..40).prop_map(|k| Expr::Num(k as f64)),
        (1e-12f64..1e-3).prop_map(Expr::Num),
        prop::sample::select(vec!["t", "q1", "q2", "v1", "v2", "mass"]).prop_map(|n| Expr::Var(n.into())),
    ];
    leaf.prop_recursive(5, 48, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (
                prop::sample::select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow]),
                inner.clone(),
                inner.clone()
            )
                .prop_map(|(op, a, b)| Expr::Binary(op, Box::new(a), Box::new(b))),
            (prop::sample::select(Func::ALL.to_vec()), inner.clone(), inner).prop_map(|(f, a, b)| {
                let args = if f.arity() == 2 { vec![a, b] } else { vec![a] };
                Expr::Call(f, args)
            }),
        ]
    })
}

proptest! {
    #[test]
    fn print_parse_round_trip(e in arb_expr()) {
        let printed = e.to_string();
        let reparsed = parse(&printed).unwrap();
        prop_assert_eq!(reparsed, e);
    }

    #[test]
    fn evaluation_is_deterministic(e in arb_expr(), t in -2.0f64..2.0, q in -2.0f64..2.0) {
        let env = env(&[("t", t), ("q1", q), ("q2", 0.5), ("v1", -q), ("v2", 1.5), ("mass", 2.0)]);
        let a = evaluate(&e, &env);
        let b = evaluate(&e, &env);
        match (a, b) {
            (Ok(x), Ok(y)) => prop_assert_eq!(x.to_bits(), y.to_bits()),
            (Err(x), Err(y)) => prop_assert_eq!(x, y),
            _ => prop_assert!(false, "evaluation outcome changed between calls"),
        }
    }
}
