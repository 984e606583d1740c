use proptest::prelude::*;

use super::*;

fn parse(text: &str, n: usize, k: usize) -> Expression {
    Expression::parse(text, n, k).unwrap()
}

fn central(e: &Expression, x: &[f64], var: usize, h: f64) -> f64 {
    let mut plus = x.to_vec();
    let mut minus = x.to_vec();
    plus[var] += h;
    minus[var] -= h;
    (e.eval_at(&plus, &[]).unwrap() - e.eval_at(&minus, &[]).unwrap()) / (2.0 * h)
}

#[test]
fn parses_quartic() {
    let e = parse("x1^4 - 2*x1^2", 1, 0);
    let expected = Node::Sub(
        Box::new(Node::Pow(Box::new(Node::Var(0)), 4)),
        Box::new(Node::Mul(
            Box::new(Node::Num(2.0)),
            Box::new(Node::Pow(Box::new(Node::Var(0)), 2)),
        )),
    );
    assert_eq!(e.root(), &expected);
    assert_eq!(e.to_string(), "x1^4 - 2*x1^2");
}

#[test]
fn grammar_exercise() {
    let e = parse("x1^2 + sin(x2)", 2, 0);
    assert_eq!(e.eval_at(&[2.0, 0.0], &[]).unwrap(), 4.0);
    assert_eq!(parse("2 - 3 - 4", 0, 0).eval_at(&[], &[]).unwrap(), -5.0);
    assert_eq!(parse("8 / 4 / 2", 0, 0).eval_at(&[], &[]).unwrap(), 1.0);
    assert_eq!(parse("2^-1", 0, 0).eval_at(&[], &[]).unwrap(), 0.5);
    assert_eq!(parse("1.5e2 + .5", 0, 0).eval_at(&[], &[]).unwrap(), 150.5);
    assert_eq!(parse("  p1 *( x1 + 1 ) ", 1, 1).eval_at(&[2.0], &[3.0]).unwrap(), 9.0);
}

#[test]
fn power_binds_tighter_than_unary_minus() {
    let e = parse("-x1^2", 1, 0);
    assert_eq!(e.eval_at(&[3.0], &[]).unwrap(), -9.0);
    assert_eq!(parse("(-x1)^2", 1, 0).eval_at(&[3.0], &[]).unwrap(), 9.0);
    assert_eq!(parse("2*-x1", 1, 0).eval_at(&[3.0], &[]).unwrap(), -6.0);
}

#[test]
fn dimension_errors() {
    assert!(matches!(
        Expression::parse("x3 + 1", 2, 0),
        Err(ExprError::Dimension { offset: 0, .. })
    ));
    assert!(matches!(
        Expression::parse("x1 + p1", 1, 0),
        Err(ExprError::Dimension { offset: 5, .. })
    ));
    assert!(matches!(
        Expression::parse("x0", 2, 0),
        Err(ExprError::Dimension { .. })
    ));
}

#[test]
fn parse_error_offsets() {
    let err = Expression::parse("x1^^2", 1, 0).unwrap_err();
    assert_eq!(err.offset(), 3);
    let err = Expression::parse("x1^2.5", 1, 0).unwrap_err();
    assert_eq!(err.offset(), 3);
    let err = Expression::parse("(x1 + 1", 1, 0).unwrap_err();
    assert_eq!(err.offset(), 7);
    let err = Expression::parse("x1 $ 2", 1, 0).unwrap_err();
    assert_eq!(err.offset(), 3);
    let err = Expression::parse("sin x1", 1, 0).unwrap_err();
    assert_eq!(err.offset(), 4);
    let err = Expression::parse("foo(x1)", 1, 0).unwrap_err();
    assert_eq!(err.offset(), 0);
    let err = Expression::parse("", 1, 0).unwrap_err();
    assert_eq!(err.offset(), 0);
    let err = Expression::parse("1e", 1, 0).unwrap_err();
    assert_eq!(err.offset(), 2);
    assert!(Expression::parse("x1^100000", 1, 0).is_err());
}

#[test]
fn deep_nesting_is_rejected_not_overflowed() {
    let deep = format!("{}x1{}", "(".repeat(10_000), ")".repeat(10_000));
    assert!(Expression::parse(&deep, 1, 0).is_err());
    let long = vec!["x1"; 5000].join(" + ");
    assert!(Expression::parse(&long, 1, 0).is_err());
    let ok = vec!["x1"; 200].join(" + ");
    assert!(Expression::parse(&ok, 1, 0).is_ok());
}

#[test]
fn eval_examples() {
    let quartic = parse("x1^4 - 2*x1^2", 1, 0);
    // 1 - 2
    assert_eq!(quartic.eval_at(&[1.0], &[]).unwrap(), -1.0);
    assert!(matches!(
        parse("log(x1)", 1, 0).eval_at(&[-1.0], &[]),
        Err(EvalError::DomainViolation { func: "log", .. })
    ));
    assert!(matches!(
        parse("sqrt(x1)", 1, 0).eval_at(&[-1e-300], &[]),
        Err(EvalError::DomainViolation { .. })
    ));
    assert_eq!(parse("1/x1", 1, 0).eval_at(&[0.0], &[]), Err(EvalError::DivByZero));
    assert_eq!(parse("x1^-2", 1, 0).eval_at(&[0.0], &[]), Err(EvalError::DivByZero));
    assert_eq!(parse("exp(x1)", 1, 0).eval_at(&[1000.0], &[]), Err(EvalError::Overflow));
    assert!(matches!(
        quartic.eval_at(&[1.0, 2.0], &[]),
        Err(EvalError::Dimension { .. })
    ));
}

#[test]
fn derivative_examples() {
    let quartic = parse("x1^4 - 2*x1^2", 1, 0);
    let g = quartic.differentiate(0);
    assert_eq!(g.to_string(), "4*x1^3 - 4*x1");
    for x in [-1.5, -1.0, 0.0, 0.3, 1.0, 2.0] {
        let closed = 4.0 * x * (x * x - 1.0);
        assert!((g.eval_at(&[x], &[]).unwrap() - closed).abs() <= 1e-12);
    }
    assert_eq!(parse("x1^2", 1, 0).differentiate(0).to_string(), "2*x1");
    assert_eq!(parse("x1^2", 2, 0).differentiate(1).to_string(), "0");
    let h = g.differentiate(0);
    assert_eq!(h.eval_at(&[1.0], &[]).unwrap(), 8.0);
    assert_eq!(h.eval_at(&[0.0], &[]).unwrap(), -4.0);
}

#[test]
fn derivatives_print_and_reparse_identically() {
    let sources = [
        "x1^4 - 2*x1^2",
        "sin(x1*x2) + exp(-x2)",
        "log(x1^2 + 1)/sqrt(x2 + 3)",
        "(x1 - p1)^2 + p2*x2^3",
        "cos(x1)^-2 - x1/(x2 + 2)",
    ];
    for src in sources {
        let e = parse(src, 2, 2);
        for var in 0..2 {
            let d = e.differentiate(var);
            let back = Expression::parse(&d.to_string(), 2, 2).unwrap();
            assert_eq!(back, d, "{src} d/dx{}", var + 1);
            let dd = d.differentiate(1 - var);
            let back = Expression::parse(&dd.to_string(), 2, 2).unwrap();
            assert_eq!(back, dd);
        }
    }
}

#[test]
fn elementary_derivatives_match_central_differences() {
    let cases = [
        ("sin(x1)", 0.4),
        ("cos(x1)", 0.4),
        ("exp(x1)", 0.0),
        ("log(x1)", 1.7),
        ("sqrt(x1)", 2.5),
        ("1/x1", 1.3),
        ("x1^-3", 1.1),
        ("x1/(1 + x1^2)", -0.6),
    ];
    for (src, x) in cases {
        let e = parse(src, 1, 0);
        let d = e.differentiate(0).eval_at(&[x], &[]).unwrap();
        let fd = central(&e, &[x], 0, 1e-5);
        assert!((d - fd).abs() <= 1e-8 * (1.0 + d.abs()), "{src}: {d} vs {fd}");
    }
}

#[test]
fn substitution_folds_parameters() {
    let e = parse("(x1 - p1)^2 + p2*3", 1, 2);
    let s = e.substitute_params(&[2.0, 1.0]);
    assert_eq!(s.param_dim(), 0);
    assert!(!s.has_params());
    assert_eq!(s.to_string(), "(x1 - 2)^2 + 3");
    assert_eq!(s, e.substitute_params(&[2.0, 1.0]));
    assert_ne!(s, e.substitute_params(&[2.0, 1.5]));
}

#[test]
fn from_node_checks_indices() {
    assert!(Expression::from_node(Node::Var(2), 2, 0).is_err());
    assert!(Expression::from_node(Node::Param(0), 2, 0).is_err());
    assert!(Expression::from_node(Node::Pow(Box::new(Node::Var(0)), i32::MIN), 1, 0).is_err());
    assert!(Expression::from_node(Node::Var(1), 2, 0).is_ok());
}

fn arb_node() -> impl Strategy<Value = Node> {
    let leaf = prop_oneof![
        prop::sample::select(vec![0.0, 1.0, 2.0, 0.5, 3.25, -1.5, 1e-3, 7.0]).prop_map(Node::Num),
        (0usize..2).prop_map(Node::Var),
        Just(Node::Param(0)),
    ];
    leaf.prop_recursive(5, 48, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| Node::Neg(Box::new(a))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Node::Add(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Node::Sub(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Node::Mul(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Node::Div(Box::new(a), Box::new(b))),
            (inner.clone(), -3i32..5).prop_map(|(a, e)| Node::Pow(Box::new(a), e)),
            (
                inner,
                prop::sample::select(vec![Func::Sin, Func::Cos, Func::Exp, Func::Log, Func::Sqrt])
            )
                .prop_map(|(a, f)| Node::Call(f, Box::new(a))),
        ]
    })
}

fn same_outcome(a: &Result<f64, EvalError>, b: &Result<f64, EvalError>) -> bool {
    match (a, b) {
        (Ok(x), Ok(y)) => x.to_bits() == y.to_bits(),
        (Err(x), Err(y)) => std::mem::discriminant(x) == std::mem::discriminant(y),
        _ => false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn printed_form_evaluates_identically(
        node in arb_node(),
        envs in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0, -2.0f64..2.0), 100),
    ) {
        let e = Expression::from_node(node, 2, 1).unwrap();
        let text = e.to_string();
        let back = Expression::parse(&text, 2, 1).unwrap();
        for (x1, x2, p1) in envs {
            let x = [x1, x2];
            let p = [p1];
            prop_assert!(
                same_outcome(&e.eval_at(&x, &p), &back.eval_at(&x, &p)),
                "{} at {:?}", text, (x1, x2, p1)
            );
        }
    }

    #[test]
    fn second_derivatives_commute(
        node in arb_node(),
        points in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0, -1.0f64..1.0), 10),
    ) {
        let e = Expression::from_node(node, 2, 1).unwrap();
        let h01 = e.differentiate(0).differentiate(1);
        let h10 = e.differentiate(1).differentiate(0);
        for (x1, x2, p1) in points {
            let x = [x1, x2];
            if let (Ok(a), Ok(b)) = (h01.eval_at(&x, &[p1]), h10.eval_at(&x, &[p1])) {
                if a.abs().max(b.abs()) < 1e6 {
                    prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs())),
                        "{} : {} vs {}", e, a, b);
                }
            }
        }
    }
}
