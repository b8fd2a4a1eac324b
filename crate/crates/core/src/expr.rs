//! Symbolic expression DAGs over named variables, interval evaluation,
//! and the two contractors built on them (HC4 forward-backward and the
//! interval Newton operator for square systems).
//!
//! Expressions are immutable reference-counted DAGs. Smart constructors
//! fold constants and strip 0/1 identities so generated order conditions
//! and their derivatives stay small, but never merge repeated variable
//! occurrences: `x - x` evaluates to a width-2 interval on x in [0,1],
//! which is the documented dependency effect of natural interval
//! extension (and what the contractors assume).

mod compiled;
mod diff;
mod hc4;
mod newton;

pub use hc4::hc4_revise;
pub use newton::newton_contract;

pub(crate) use compiled::Tape;
pub(crate) use diff::differentiate;
pub(crate) use newton::NewtonSystem;

use crate::interval::{Interval, IntervalBox};
use std::fmt;
use std::sync::Arc;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum UnOp {
    Neg,
    Sqr,
    Sqrt,
    Sin,
    Cos,
    Abs,
    /// Integer power with fixed nonnegative exponent.
    Powi(u32),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug)]
pub enum Node {
    Var(String),
    Const(Interval),
    Unary(UnOp, Expr),
    Binary(BinOp, Expr, Expr),
}

/// Shared-structure expression handle.
#[derive(Clone, Debug)]
pub struct Expr(Arc<Node>);

impl Expr {
    pub fn var(name: impl Into<String>) -> Expr {
        Expr(Arc::new(Node::Var(name.into())))
    }

    pub fn val(v: Interval) -> Expr {
        Expr(Arc::new(Node::Const(v)))
    }

    pub fn constant(x: f64) -> Expr {
        Expr::val(Interval::point(x))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub(crate) fn as_const(&self) -> Option<Interval> {
        match &*self.0 {
            Node::Const(v) => Some(*v),
            _ => None,
        }
    }

    fn is_const_point(&self, x: f64) -> bool {
        matches!(self.as_const(), Some(v) if v.is_point() && v.lo() == x)
    }

    pub fn add(&self, rhs: &Expr) -> Expr {
        if let (Some(a), Some(b)) = (self.as_const(), rhs.as_const()) {
            return Expr::val(a.add(&b));
        }
        if self.is_const_point(0.0) {
            return rhs.clone();
        }
        if rhs.is_const_point(0.0) {
            return self.clone();
        }
        Expr(Arc::new(Node::Binary(BinOp::Add, self.clone(), rhs.clone())))
    }

    pub fn sub(&self, rhs: &Expr) -> Expr {
        if let (Some(a), Some(b)) = (self.as_const(), rhs.as_const()) {
            return Expr::val(a.sub(&b));
        }
        if rhs.is_const_point(0.0) {
            return self.clone();
        }
        if self.is_const_point(0.0) {
            return rhs.neg();
        }
        Expr(Arc::new(Node::Binary(BinOp::Sub, self.clone(), rhs.clone())))
    }

    pub fn mul(&self, rhs: &Expr) -> Expr {
        if let (Some(a), Some(b)) = (self.as_const(), rhs.as_const()) {
            return Expr::val(a.mul(&b));
        }
        if self.is_const_point(0.0) || rhs.is_const_point(0.0) {
            return Expr::constant(0.0);
        }
        if self.is_const_point(1.0) {
            return rhs.clone();
        }
        if rhs.is_const_point(1.0) {
            return self.clone();
        }
        Expr(Arc::new(Node::Binary(BinOp::Mul, self.clone(), rhs.clone())))
    }

    pub fn div(&self, rhs: &Expr) -> Expr {
        if let (Some(a), Some(b)) = (self.as_const(), rhs.as_const()) {
            return Expr::val(a.div(&b));
        }
        if rhs.is_const_point(1.0) {
            return self.clone();
        }
        Expr(Arc::new(Node::Binary(BinOp::Div, self.clone(), rhs.clone())))
    }

    pub fn neg(&self) -> Expr {
        if let Some(a) = self.as_const() {
            return Expr::val(a.neg());
        }
        if let Node::Unary(UnOp::Neg, inner) = &*self.0 {
            return inner.clone();
        }
        Expr(Arc::new(Node::Unary(UnOp::Neg, self.clone())))
    }

    pub fn sqr(&self) -> Expr {
        if let Some(a) = self.as_const() {
            return Expr::val(a.sqr());
        }
        Expr(Arc::new(Node::Unary(UnOp::Sqr, self.clone())))
    }

    pub fn powi(&self, n: u32) -> Expr {
        match n {
            0 => Expr::constant(1.0),
            1 => self.clone(),
            2 => self.sqr(),
            _ => {
                if let Some(a) = self.as_const() {
                    return Expr::val(a.powi(n));
                }
                Expr(Arc::new(Node::Unary(UnOp::Powi(n), self.clone())))
            }
        }
    }

    pub fn sqrt(&self) -> Expr {
        if let Some(a) = self.as_const() {
            return Expr::val(a.sqrt());
        }
        Expr(Arc::new(Node::Unary(UnOp::Sqrt, self.clone())))
    }

    pub fn sin(&self) -> Expr {
        Expr(Arc::new(Node::Unary(UnOp::Sin, self.clone())))
    }

    pub fn cos(&self) -> Expr {
        Expr(Arc::new(Node::Unary(UnOp::Cos, self.clone())))
    }

    pub fn abs(&self) -> Expr {
        if let Some(a) = self.as_const() {
            return Expr::val(a.abs());
        }
        Expr(Arc::new(Node::Unary(UnOp::Abs, self.clone())))
    }

    /// Sum of expressions; empty sum is 0.
    pub fn sum(terms: impl IntoIterator<Item = Expr>) -> Expr {
        let mut it = terms.into_iter();
        let first = match it.next() {
            Some(e) => e,
            None => return Expr::constant(0.0),
        };
        it.fold(first, |acc, e| acc.add(&e))
    }

    /// Variable names appearing in the expression, in first-occurrence order.
    pub fn variables(&self) -> Vec<String> {
        let mut seen = Vec::new();
        let mut stack = vec![self.clone()];
        let mut visited: Vec<*const Node> = Vec::new();
        while let Some(e) = stack.pop() {
            let p = Arc::as_ptr(&e.0);
            if visited.contains(&p) {
                continue;
            }
            visited.push(p);
            match &*e.0 {
                Node::Var(n) => {
                    if !seen.contains(n) {
                        seen.push(n.clone());
                    }
                }
                Node::Const(_) => {}
                Node::Unary(_, c) => stack.push(c.clone()),
                Node::Binary(_, l, r) => {
                    stack.push(r.clone());
                    stack.push(l.clone());
                }
            }
        }
        seen
    }
}

macro_rules! impl_binop {
    ($trait:ident, $method:ident) => {
        impl std::ops::$trait for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::$method(self, rhs)
            }
        }
        impl std::ops::$trait for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$method(&self, &rhs)
            }
        }
        impl std::ops::$trait<f64> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::$method(self, &Expr::constant(rhs))
            }
        }
        impl std::ops::$trait<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::$method(&self, &Expr::constant(rhs))
            }
        }
    };
}

impl_binop!(Add, add);
impl_binop!(Sub, sub);
impl_binop!(Mul, mul);
impl_binop!(Div, div);

impl std::ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(&self)
    }
}

impl fmt::Display for Expr {
    /// Prefix s-expression form, e.g. "(+ (* b0 c0) (* b1 c1))".
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.0 {
            Node::Var(n) => write!(f, "{n}"),
            Node::Const(v) => {
                if v.is_point() {
                    write!(f, "{}", v.lo())
                } else {
                    write!(f, "{v}")
                }
            }
            Node::Unary(op, c) => {
                let name = match op {
                    UnOp::Neg => "neg",
                    UnOp::Sqr => "sqr",
                    UnOp::Sqrt => "sqrt",
                    UnOp::Sin => "sin",
                    UnOp::Cos => "cos",
                    UnOp::Abs => "abs",
                    UnOp::Powi(n) => return write!(f, "(powi {n} {c})"),
                };
                write!(f, "({name} {c})")
            }
            Node::Binary(op, l, r) => {
                let name = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                };
                write!(f, "({name} {l} {r})")
            }
        }
    }
}

/// Relation a constraint body is held to.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Relation {
    /// body = 0
    Eq0,
    /// body <= 0
    Le0,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub body: Expr,
    pub relation: Relation,
}

impl Constraint {
    pub fn eq0(body: Expr) -> Constraint {
        Constraint {
            body,
            relation: Relation::Eq0,
        }
    }

    pub fn le0(body: Expr) -> Constraint {
        Constraint {
            body,
            relation: Relation::Le0,
        }
    }

    /// a = b encoded as a - b = 0.
    pub fn eq(a: Expr, b: Expr) -> Constraint {
        Constraint::eq0(a.sub(&b))
    }

    /// a <= b encoded as a - b <= 0.
    pub fn le(a: Expr, b: Expr) -> Constraint {
        Constraint::le0(a.sub(&b))
    }

    /// Admissible values of the body under the relation.
    pub fn admissible(&self) -> Interval {
        match self.relation {
            Relation::Eq0 => Interval::ZERO,
            Relation::Le0 => Interval::new(f64::NEG_INFINITY, 0.0),
        }
    }

    /// Interval test: could some point of the box satisfy the constraint?
    pub fn possibly_holds(&self, b: &IntervalBox) -> Result<bool, EvalError> {
        let v = evaluate(&self.body, b)?;
        Ok(!v.intersect(&self.admissible()).is_empty())
    }

    /// Interval proof that every point of the box satisfies the constraint.
    /// Equalities can only be certain when the body evaluates to exactly 0.
    pub fn certainly_holds(&self, b: &IntervalBox) -> Result<bool, EvalError> {
        let v = evaluate(&self.body, b)?;
        Ok(match self.relation {
            Relation::Eq0 => v == Interval::ZERO,
            Relation::Le0 => !v.is_empty() && v.hi() <= 0.0,
        })
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.relation {
            Relation::Eq0 => write!(f, "{} = 0", self.body),
            Relation::Le0 => write!(f, "{} <= 0", self.body),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalError {
    UnknownVariable(String),
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::UnknownVariable(n) => write!(f, "unknown variable '{n}'"),
        }
    }
}

impl std::error::Error for EvalError {}

/// Natural interval extension of e over the box. Shared subexpressions
/// are evaluated once.
pub fn evaluate(e: &Expr, b: &IntervalBox) -> Result<Interval, EvalError> {
    let tape = Tape::compile(std::slice::from_ref(e), b.names())?;
    Ok(tape.eval_root(0, b.vals()))
}

/// Replace variables by constant intervals. Unmapped variables stay
/// symbolic; the smart constructors collapse terms that the
/// substitution kills (notably anything multiplied by an exact zero).
pub fn substitute(e: &Expr, bindings: &std::collections::HashMap<String, Interval>) -> Expr {
    fn walk(
        e: &Expr,
        bindings: &std::collections::HashMap<String, Interval>,
        memo: &mut std::collections::HashMap<*const Node, Expr>,
    ) -> Expr {
        let key = Arc::as_ptr(&e.0);
        if let Some(r) = memo.get(&key) {
            return r.clone();
        }
        let r = match e.node() {
            Node::Var(n) => match bindings.get(n) {
                Some(v) => Expr::val(*v),
                None => e.clone(),
            },
            Node::Const(_) => e.clone(),
            Node::Unary(op, c) => {
                let c = walk(c, bindings, memo);
                match op {
                    UnOp::Neg => c.neg(),
                    UnOp::Sqr => c.sqr(),
                    UnOp::Sqrt => c.sqrt(),
                    UnOp::Sin => c.sin(),
                    UnOp::Cos => c.cos(),
                    UnOp::Abs => c.abs(),
                    UnOp::Powi(n) => c.powi(*n),
                }
            }
            Node::Binary(op, l, r2) => {
                let l = walk(l, bindings, memo);
                let r2 = walk(r2, bindings, memo);
                match op {
                    BinOp::Add => l.add(&r2),
                    BinOp::Sub => l.sub(&r2),
                    BinOp::Mul => l.mul(&r2),
                    BinOp::Div => l.div(&r2),
                }
            }
        };
        memo.insert(key, r.clone());
        r
    }
    let mut memo = std::collections::HashMap::new();
    walk(e, bindings, &mut memo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval::Interval;

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi)
    }

    #[test]
    fn evaluate_sum() {
        let e = Expr::var("x") + Expr::var("y");
        let b = IntervalBox::from_pairs(&[("x", iv(0.0, 1.0)), ("y", iv(2.0, 3.0))]);
        assert_eq!(evaluate(&e, &b).unwrap(), iv(2.0, 4.0));
    }

    #[test]
    fn dependency_effect_vs_sqr() {
        let x = Expr::var("x");
        let b = IntervalBox::from_pairs(&[("x", iv(-1.0, 1.0))]);
        // x*x over [-1,1] suffers the dependency effect...
        let prod = x.clone() * x.clone();
        assert_eq!(evaluate(&prod, &b).unwrap(), iv(-1.0, 1.0));
        // ...while the single-occurrence sqr node is tight.
        assert_eq!(evaluate(&x.sqr(), &b).unwrap(), iv(0.0, 1.0));
    }

    #[test]
    fn unknown_variable_errors() {
        let e = Expr::var("z");
        let b = IntervalBox::from_pairs(&[("x", iv(0.0, 1.0))]);
        assert_eq!(
            evaluate(&e, &b),
            Err(EvalError::UnknownVariable("z".into()))
        );
    }

    #[test]
    fn constructors_simplify() {
        let x = Expr::var("x");
        assert_eq!((x.clone() + 0.0).to_string(), "x");
        assert_eq!((x.clone() * 1.0).to_string(), "x");
        assert_eq!((x.clone() * 0.0).to_string(), "0");
        assert_eq!(x.powi(1).to_string(), "x");
        assert_eq!(x.powi(0).to_string(), "1");
        assert_eq!((-(-x.clone())).to_string(), "x");
        let folded = Expr::constant(2.0) + Expr::constant(3.0);
        assert_eq!(folded.to_string(), "5");
    }

    #[test]
    fn display_prefix_form() {
        let e = Expr::var("b0") * Expr::var("c0") + Expr::var("b1") * Expr::var("c1");
        assert_eq!(e.to_string(), "(+ (* b0 c0) (* b1 c1))");
        let e2 = Expr::var("x").sqr().sqrt();
        assert_eq!(e2.to_string(), "(sqrt (sqr x))");
        let e3 = Expr::var("x").powi(5);
        assert_eq!(e3.to_string(), "(powi 5 x)");
    }

    #[test]
    fn variables_in_order() {
        let e = Expr::var("b1") * Expr::var("a10") + Expr::var("b1") + Expr::var("c0");
        assert_eq!(e.variables(), vec!["b1", "a10", "c0"]);
    }

    #[test]
    fn substitute_folds_zero_terms() {
        use std::collections::HashMap;
        let e = Expr::var("b0") * Expr::var("a01") * Expr::var("c1") + Expr::var("b1");
        let mut m = HashMap::new();
        m.insert("a01".to_string(), Interval::ZERO);
        let s = substitute(&e, &m);
        assert_eq!(s.to_string(), "b1");
        assert_eq!(s.variables(), vec!["b1"]);
    }

    #[test]
    fn constraint_tests() {
        let c = Constraint::eq0(Expr::var("x").sqr() - 4.0);
        let b_in = IntervalBox::from_pairs(&[("x", iv(1.0, 3.0))]);
        let b_out = IntervalBox::from_pairs(&[("x", iv(5.0, 6.0))]);
        assert!(c.possibly_holds(&b_in).unwrap());
        assert!(!c.possibly_holds(&b_out).unwrap());
        let ineq = Constraint::le0(Expr::var("x") - 4.0);
        assert!(ineq.certainly_holds(&b_in).unwrap());
        assert!(!ineq.certainly_holds(&b_out).unwrap());
        assert!(ineq.possibly_holds(&b_out).is_ok());
    }
}
