#![no_main]

use libfuzzer_sys::fuzz_target;
use randopt_core::Expression;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(e) = Expression::parse(text, 3, 2) else {
        return;
    };
    let printed = e.to_string();
    let back = Expression::parse(&printed, 3, 2).expect("printed form reparses");
    assert_eq!(back.to_string(), printed);
    let (x, p) = ([0.5, -1.25, 2.0], [0.75, -3.0]);
    match (e.eval_at(&x, &p), back.eval_at(&x, &p)) {
        (Ok(a), Ok(b)) => assert!(a == b || (a - b).abs() <= 1e-12 * a.abs().max(1.0), "{printed}: {a} vs {b}"),
        (a, b) => assert_eq!(a.is_ok(), b.is_ok(), "{printed}"),
    }
    for var in 0..3 {
        let d = e.differentiate(var);
        Expression::parse(&d.to_string(), 3, 2).expect("derivative reparses");
    }
});
