//! Public forward-backward contractor.

use super::{Constraint, Tape};
use crate::interval::{Interval, IntervalBox};

/// HC4-revise: contract the box against a single constraint.
///
/// The result is a sub-box of the input; no point of the input box that
/// satisfies the constraint is ever removed. When the constraint is
/// proved infeasible the returned box is empty (every component EMPTY).
///
/// Repeated occurrences of a variable are projected independently and
/// intersected, the classical HC4 weakness: `x - x = 0` contracts
/// nothing even though the constraint is vacuous.
///
/// Panics if the constraint mentions a variable absent from the box.
pub fn hc4_revise(c: &Constraint, b: &IntervalBox) -> IntervalBox {
    let tape = Tape::compile(std::slice::from_ref(&c.body), b.names())
        .unwrap_or_else(|e| panic!("hc4_revise: {e}"));
    let mut vals = b.vals().to_vec();
    let mut fwd = Vec::new();
    let mut adj = Vec::new();
    if tape.hc4_revise(c.admissible(), &mut vals, &mut fwd, &mut adj) {
        b.with_vals(vals)
    } else {
        b.with_vals(vec![Interval::EMPTY; b.len()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::interval::Interval;

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi)
    }

    #[test]
    fn ternary_sum_contracts_all_three() {
        let c = Constraint::eq0(Expr::var("x") + Expr::var("y") - Expr::var("z"));
        let b = IntervalBox::from_pairs(&[
            ("x", iv(0.0, 10.0)),
            ("y", iv(0.0, 10.0)),
            ("z", iv(0.0, 5.0)),
        ]);
        let out = hc4_revise(&c, &b);
        for v in ["x", "y", "z"] {
            assert_eq!(out.get(v).unwrap(), iv(0.0, 5.0));
        }
    }

    #[test]
    fn x_minus_x_contracts_nothing() {
        let x = Expr::var("x");
        let c = Constraint::eq0(x.clone() - x.clone());
        let b = IntervalBox::from_pairs(&[("x", iv(-7.0, 3.0))]);
        let out = hc4_revise(&c, &b);
        assert_eq!(out.get("x").unwrap(), iv(-7.0, 3.0));
    }

    #[test]
    fn infeasible_inequality_gives_empty_box() {
        let c = Constraint::le0(Expr::var("x").sqr() + 1.0);
        let b = IntervalBox::from_pairs(&[("x", iv(-5.0, 5.0))]);
        let out = hc4_revise(&c, &b);
        assert!(out.is_empty_box());
    }

    #[test]
    fn inequality_contracts_upper_side() {
        // x^2 <= 4 on [-5, 5] contracts to about [-2, 2].
        let c = Constraint::le0(Expr::var("x").sqr() - 4.0);
        let b = IntervalBox::from_pairs(&[("x", iv(-5.0, 5.0))]);
        let out = hc4_revise(&c, &b);
        let x = out.get("x").unwrap();
        assert!(x.contains(2.0) && x.contains(-2.0));
        assert!(x.hi() <= 2.0 + 1e-12 && x.lo() >= -2.0 - 1e-12);
    }

    mod monotonicity {
        use super::*;
        use proptest::prelude::*;

        fn sub_interval(outer: Interval, t0: f64, t1: f64) -> Interval {
            let w = outer.width();
            let lo = outer.lo() + t0 * 0.5 * w;
            let hi = outer.hi() - t1 * 0.5 * w;
            Interval::new(lo, hi.max(lo))
        }

        proptest! {
            // box' inside box implies hc4(box') inside hc4(box).
            #[test]
            fn hc4_monotone_under_box_inclusion(
                c0 in -3.0f64..3.0,
                c1 in -3.0f64..3.0,
                c2 in -3.0f64..3.0,
                xa in -4.0f64..4.0, xw in 0.01f64..3.0,
                ya in -4.0f64..4.0, yw in 0.01f64..3.0,
                ts in proptest::array::uniform4(0.0f64..0.9),
                eq in proptest::bool::ANY,
            ) {
                let x = Expr::var("x");
                let y = Expr::var("y");
                let body = Expr::constant(c0) * x.clone() * y.clone()
                    + Expr::constant(c1) * x.sqr()
                    + Expr::constant(c2) * y.clone()
                    - 1.0;
                let c = if eq { Constraint::eq0(body) } else { Constraint::le0(body) };
                let outer = IntervalBox::from_pairs(&[
                    ("x", iv(xa, xa + xw)),
                    ("y", iv(ya, ya + yw)),
                ]);
                let inner = outer.with_vals(vec![
                    sub_interval(iv(xa, xa + xw), ts[0], ts[1]),
                    sub_interval(iv(ya, ya + yw), ts[2], ts[3]),
                ]);
                let co = hc4_revise(&c, &outer);
                let ci = hc4_revise(&c, &inner);
                prop_assert!(ci.is_subset(&co));
            }
        }
    }

    #[test]
    fn conservativeness_sampled() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(0xc0_45e7);
        // b0 + b1 - 1 = 0: feasible points must survive contraction.
        let c = Constraint::eq0(Expr::var("b0") + Expr::var("b1") - 1.0);
        let b = IntervalBox::from_pairs(&[("b0", iv(-1.0, 1.0)), ("b1", iv(-1.0, 1.0))]);
        let out = hc4_revise(&c, &b);
        for _ in 0..1000 {
            let p: f64 = rng.gen_range(0.0..1.0);
            // (p, 1-p) is feasible up to rounding; check containment.
            assert!(out.get("b0").unwrap().contains(p));
            assert!(out.get("b1").unwrap().contains(1.0 - p));
        }
    }
}
