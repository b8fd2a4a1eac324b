//! Forward-mode symbolic differentiation of expression DAGs.
//!
//! Derivatives are built with the smart constructors, so the zero and
//! one factors that dominate partial derivatives of polynomial systems
//! fold away immediately. Shared nodes are differentiated once per
//! (node, variable) pair via a pointer-keyed memo, keeping the result a
//! DAG instead of an exponentially unfolded tree.

use super::{BinOp, Expr, Node, UnOp};
use std::collections::HashMap;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DiffError {
    /// abs has no derivative expression in this op set.
    NotDifferentiable(&'static str),
}

impl fmt::Display for DiffError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiffError::NotDifferentiable(op) => {
                write!(f, "operation '{op}' is not differentiable")
            }
        }
    }
}

impl std::error::Error for DiffError {}

/// Partial derivative of e with respect to `var`.
pub fn differentiate(e: &Expr, var: &str) -> Result<Expr, DiffError> {
    let mut memo = HashMap::new();
    diff_memo(e, var, &mut memo)
}

fn diff_memo(
    e: &Expr,
    var: &str,
    memo: &mut HashMap<*const Node, Expr>,
) -> Result<Expr, DiffError> {
    let key = std::sync::Arc::as_ptr(&e.0);
    if let Some(d) = memo.get(&key) {
        return Ok(d.clone());
    }
    let d = match e.node() {
        Node::Var(n) => {
            if n == var {
                Expr::constant(1.0)
            } else {
                Expr::constant(0.0)
            }
        }
        Node::Const(_) => Expr::constant(0.0),
        Node::Unary(op, c) => {
            let dc = diff_memo(c, var, memo)?;
            match op {
                UnOp::Neg => dc.neg(),
                UnOp::Sqr => Expr::constant(2.0).mul(c).mul(&dc),
                UnOp::Powi(n) => Expr::constant(*n as f64).mul(&c.powi(n - 1)).mul(&dc),
                UnOp::Sqrt => dc.div(&Expr::constant(2.0).mul(&c.sqrt())),
                UnOp::Sin => c.cos().mul(&dc),
                UnOp::Cos => c.sin().mul(&dc).neg(),
                UnOp::Abs => return Err(DiffError::NotDifferentiable("abs")),
            }
        }
        Node::Binary(op, l, r) => {
            let dl = diff_memo(l, var, memo)?;
            let dr = diff_memo(r, var, memo)?;
            match op {
                BinOp::Add => dl.add(&dr),
                BinOp::Sub => dl.sub(&dr),
                BinOp::Mul => dl.mul(r).add(&l.mul(&dr)),
                BinOp::Div => dl.mul(r).sub(&l.mul(&dr)).div(&r.sqr()),
            }
        }
    };
    memo.insert(key, d.clone());
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::evaluate;
    use crate::interval::{Interval, IntervalBox};

    fn point_box(pairs: &[(&str, f64)]) -> IntervalBox {
        IntervalBox::from_pairs(
            &pairs
                .iter()
                .map(|(n, x)| (*n, Interval::point(*x)))
                .collect::<Vec<_>>(),
        )
    }

    fn d_at(e: &Expr, var: &str, b: &IntervalBox) -> f64 {
        let d = differentiate(e, var).unwrap();
        let v = evaluate(&d, b).unwrap();
        v.midpoint().unwrap()
    }

    /// Central finite difference on the midpoint values.
    fn fd_at(e: &Expr, var: &str, b: &IntervalBox, h: f64) -> f64 {
        let x0 = b.get(var).unwrap().midpoint().unwrap();
        let mut bp = b.clone();
        let i = b.index_of(var).unwrap();
        bp.set(i, Interval::point(x0 + h));
        let fp = evaluate(e, &bp).unwrap().midpoint().unwrap();
        bp.set(i, Interval::point(x0 - h));
        let fm = evaluate(e, &bp).unwrap().midpoint().unwrap();
        (fp - fm) / (2.0 * h)
    }

    #[test]
    fn polynomial_rules() {
        // d/dx (x^3 - 2x + 5) = 3x^2 - 2
        let x = Expr::var("x");
        let e = x.powi(3) - Expr::constant(2.0) * x.clone() + 5.0;
        let b = point_box(&[("x", 1.5)]);
        let expect = 3.0 * 1.5_f64 * 1.5 - 2.0;
        assert!((d_at(&e, "x", &b) - expect).abs() < 1e-12);
    }

    #[test]
    fn quotient_rule() {
        let x = Expr::var("x");
        let y = Expr::var("y");
        let e = x.clone() / y.clone();
        let b = point_box(&[("x", 3.0), ("y", 2.0)]);
        assert!((d_at(&e, "x", &b) - 0.5).abs() < 1e-14);
        assert!((d_at(&e, "y", &b) - (-0.75)).abs() < 1e-14);
    }

    #[test]
    fn zero_partials_fold_away() {
        // The b1-partial of b0*c0 is the constant 0, not a tree of zeros.
        let e = Expr::var("b0") * Expr::var("c0");
        let d = differentiate(&e, "b1").unwrap();
        assert_eq!(d.to_string(), "0");
    }

    #[test]
    fn abs_is_rejected() {
        let e = Expr::var("x").abs();
        assert!(matches!(
            differentiate(&e, "x"),
            Err(DiffError::NotDifferentiable("abs"))
        ));
    }

    #[test]
    fn matches_central_differences() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(0x5eed_d1ff);
        // A mildly nasty composite: sin, sqrt, powers, division.
        let x = Expr::var("x");
        let y = Expr::var("y");
        let e = (x.sqr() * y.clone() + (y.sqr() + 1.0).sqrt()).sin()
            + x.powi(3) / (y.clone() + 3.0);
        for _ in 0..200 {
            let xv: f64 = rng.gen_range(-2.0..2.0);
            let yv: f64 = rng.gen_range(-2.0..2.0);
            let b = point_box(&[("x", xv), ("y", yv)]);
            for var in ["x", "y"] {
                let sym = d_at(&e, var, &b);
                let fd = fd_at(&e, var, &b, 1e-6);
                let scale = sym.abs().max(fd.abs()).max(1.0);
                assert!(
                    (sym - fd).abs() / scale < 1e-6,
                    "{var} at ({xv},{yv}): sym={sym} fd={fd}"
                );
            }
        }
    }
}
