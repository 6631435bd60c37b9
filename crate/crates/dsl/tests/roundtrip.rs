use proptest::prelude::*;
use seldiff_dsl::ast::*;
use seldiff_dsl::{file_to_string, parse, Span};

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0.0f64..100.0).prop_map(ExprKind::Num),
        prop::sample::select(vec!["x", "y", "z"]).prop_map(|v| ExprKind::Var(v.to_string())),
    ]
    .prop_map(|kind| Expr { kind, span: Span::default() })
}

fn expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(4, 32, 3, |inner| {
        let e = |kind| Expr { kind, span: Span::default() };
        prop_oneof![
            inner.clone().prop_map(move |a| e(ExprKind::Neg(Box::new(a)))),
            (prop::sample::select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div]), inner.clone(), inner.clone())
                .prop_map(move |(op, a, b)| e(ExprKind::Binary(op, Box::new(a), Box::new(b)))),
            (prop::sample::select(vec!["relu", "exp", "abs"]), inner.clone()).prop_map(move |(f, a)| e(ExprKind::Call(
                Ident { name: f.to_string(), span: Span::default() },
                vec![a]
            ))),
            (guard(inner.clone()), inner.clone(), inner.clone()).prop_map(move |(g, a, b)| e(ExprKind::Select(vec![
                Arm { guard: Some(g), value: a, span: Span::default() },
                Arm { guard: None, value: b, span: Span::default() },
            ]))),
        ]
    })
}

fn guard(inner: impl Strategy<Value = Expr> + Clone + 'static) -> impl Strategy<Value = Guard> {
    let ops = vec![CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge, CmpOp::Eq, CmpOp::Ne];
    let atom = (prop::sample::select(ops), inner.clone(), inner).prop_map(|(op, a, b)| Guard::Cmp(op, a, b));
    atom.prop_recursive(2, 8, 3, |g| {
        prop_oneof![
            prop::collection::vec(g.clone(), 2..4).prop_map(Guard::And),
            prop::collection::vec(g.clone(), 2..4).prop_map(Guard::Or),
            g.prop_map(|x| Guard::Not(Box::new(x))),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn printed_sources_reparse_to_the_same_tree(body in expr(), lets in prop::collection::vec(expr(), 0..3)) {
        let id = |n: &str| Ident { name: n.to_string(), span: Span::default() };
        let f = FnDef {
            name: id("f"),
            params: vec![id("x"), id("y"), id("z")],
            lets: lets.into_iter().enumerate().map(|(i, value)| Let { name: id(&format!("v{i}")), value }).collect(),
            body,
            span: Span::default(),
        };
        let file = SourceFile { functions: vec![f] };
        let text = file_to_string(&file);
        let back = parse(&text).map_err(|d| TestCaseError::fail(format!("{d:?}\n{text}")))?;
        prop_assert_eq!(back, file);
    }

    #[test]
    fn diagnostics_are_deterministic(src in "[a-z(){};=<>+*/ 0-9,\\-]{0,60}") {
        let a = parse(&src).err();
        let b = parse(&src).err();
        prop_assert_eq!(a, b);
    }
}
