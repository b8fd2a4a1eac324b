//! Flat evaluation tapes compiled from expression DAGs.
//!
//! A tape is a postorder slot list: every child sits at a lower index
//! than its parents, shared subexpressions (by Rc identity) occupy one
//! slot, and variables are resolved to box indices at compile time. The
//! forward pass is a single left-to-right scan; the HC4 backward pass is
//! a single right-to-left scan. Nothing in the hot path hashes strings.

use super::{BinOp, EvalError, Expr, Node, UnOp};
use crate::interval::{
    self, acos_down, acos_up, asin_down, asin_up, nth_root_down, nth_root_up, Interval,
};
use std::collections::HashMap;
use std::sync::Arc;

#[derive(Clone, Copy, Debug)]
enum Slot {
    Var(usize),
    Const(Interval),
    Un(UnOp, usize),
    Bin(BinOp, usize, usize),
}

pub(crate) struct Tape {
    slots: Vec<Slot>,
    roots: Vec<usize>,
}

impl Tape {
    /// Compile one or more expressions against a variable name table.
    /// Subexpressions shared between roots are emitted once.
    pub(crate) fn compile(exprs: &[Expr], names: &[String]) -> Result<Tape, EvalError> {
        let mut slots = Vec::new();
        let mut memo: HashMap<*const Node, usize> = HashMap::new();
        let mut roots = Vec::with_capacity(exprs.len());
        for e in exprs {
            roots.push(emit(e, names, &mut slots, &mut memo)?);
        }
        Ok(Tape { slots, roots })
    }

    pub(crate) fn roots(&self) -> usize {
        self.roots.len()
    }

    /// Forward sweep; fills `fwd` with one value per slot.
    pub(crate) fn forward(&self, vals: &[Interval], fwd: &mut Vec<Interval>) {
        fwd.clear();
        fwd.reserve(self.slots.len());
        for slot in &self.slots {
            let v = match *slot {
                Slot::Var(i) => vals[i],
                Slot::Const(c) => c,
                Slot::Un(op, c) => apply_un(op, fwd[c]),
                Slot::Bin(op, l, r) => apply_bin(op, fwd[l], fwd[r]),
            };
            fwd.push(v);
        }
    }

    pub(crate) fn root_value(&self, root: usize, fwd: &[Interval]) -> Interval {
        fwd[self.roots[root]]
    }

    /// One-shot evaluation of a single root (allocates scratch).
    pub(crate) fn eval_root(&self, root: usize, vals: &[Interval]) -> Interval {
        let mut fwd = Vec::new();
        self.forward(vals, &mut fwd);
        self.root_value(root, &fwd)
    }

    /// HC4-revise: forward sweep, seed the root with `admissible`, then
    /// project backwards and intersect into `vals`. Returns false when
    /// the constraint is proved infeasible on the box (vals are then in
    /// an unspecified partially-contracted state; callers must treat the
    /// box as empty).
    ///
    /// Requires a single-root tape: with several roots the non-root
    /// slots would act as spurious anchors in the backward scan.
    pub(crate) fn hc4_revise(
        &self,
        admissible: Interval,
        vals: &mut [Interval],
        fwd: &mut Vec<Interval>,
        adj: &mut Vec<Interval>,
    ) -> bool {
        debug_assert_eq!(self.roots.len(), 1);
        self.forward(vals, fwd);
        let root = self.roots[0];
        let seed = fwd[root].intersect(&admissible);
        if seed.is_empty() {
            return false;
        }
        adj.clear();
        adj.extend_from_slice(fwd);
        adj[root] = seed;
        for i in (0..self.slots.len()).rev() {
            let w = adj[i];
            if w.is_empty() {
                return false;
            }
            match self.slots[i] {
                Slot::Var(_) | Slot::Const(_) => {}
                Slot::Un(op, c) => {
                    adj[c] = backward_un(op, w, adj[c]);
                    if adj[c].is_empty() {
                        return false;
                    }
                }
                Slot::Bin(op, l, r) => {
                    let (nl, nr) = backward_bin(op, w, fwd[l], fwd[r], adj[l], adj[r]);
                    adj[l] = nl;
                    adj[r] = nr;
                    if nl.is_empty() || nr.is_empty() {
                        return false;
                    }
                }
            }
        }
        for (i, slot) in self.slots.iter().enumerate() {
            if let Slot::Var(v) = *slot {
                let t = vals[v].intersect(&adj[i]);
                if t.is_empty() {
                    return false;
                }
                vals[v] = t;
            }
        }
        true
    }
}

fn emit(
    e: &Expr,
    names: &[String],
    slots: &mut Vec<Slot>,
    memo: &mut HashMap<*const Node, usize>,
) -> Result<usize, EvalError> {
    let key = Arc::as_ptr(&e.0);
    if let Some(&i) = memo.get(&key) {
        return Ok(i);
    }
    let slot = match e.node() {
        Node::Var(n) => {
            let idx = names
                .iter()
                .position(|m| m == n)
                .ok_or_else(|| EvalError::UnknownVariable(n.clone()))?;
            Slot::Var(idx)
        }
        Node::Const(v) => Slot::Const(*v),
        Node::Unary(op, c) => {
            let ci = emit(c, names, slots, memo)?;
            Slot::Un(*op, ci)
        }
        Node::Binary(op, l, r) => {
            let li = emit(l, names, slots, memo)?;
            let ri = emit(r, names, slots, memo)?;
            Slot::Bin(*op, li, ri)
        }
    };
    let i = slots.len();
    slots.push(slot);
    memo.insert(key, i);
    Ok(i)
}

fn apply_un(op: UnOp, c: Interval) -> Interval {
    match op {
        UnOp::Neg => c.neg(),
        UnOp::Sqr => c.sqr(),
        UnOp::Sqrt => c.sqrt(),
        UnOp::Sin => c.sin(),
        UnOp::Cos => c.cos(),
        UnOp::Abs => c.abs(),
        UnOp::Powi(n) => c.powi(n),
    }
}

fn apply_bin(op: BinOp, l: Interval, r: Interval) -> Interval {
    match op {
        BinOp::Add => l.add(&r),
        BinOp::Sub => l.sub(&r),
        BinOp::Mul => l.mul(&r),
        BinOp::Div => l.div(&r),
    }
}

fn nonneg() -> Interval {
    Interval::new(0.0, f64::INFINITY)
}

/// Refine `cur` against { x : exists d in den with x*d in num }.
/// Extended division, both branches intersected with cur, then hulled.
fn mul_project(num: Interval, den: Interval, cur: Interval) -> Interval {
    if den == Interval::ZERO {
        // x*0 in num: any x works iff 0 in num.
        return if num.contains(0.0) {
            cur
        } else {
            Interval::EMPTY
        };
    }
    let (p, q) = num.div_extended(&den);
    let a = cur.intersect(&p);
    match q {
        Some(q) => a.hull(&cur.intersect(&q)),
        None => a,
    }
}

fn backward_bin(
    op: BinOp,
    w: Interval,
    fl: Interval,
    fr: Interval,
    al: Interval,
    ar: Interval,
) -> (Interval, Interval) {
    match op {
        BinOp::Add => (al.intersect(&w.sub(&fr)), ar.intersect(&w.sub(&fl))),
        BinOp::Sub => (al.intersect(&w.add(&fr)), ar.intersect(&fl.sub(&w))),
        BinOp::Mul => (mul_project(w, fr, al), mul_project(w, fl, ar)),
        BinOp::Div => {
            // w = l/r: l in w*r, and r in l/w (extended).
            (al.intersect(&w.mul(&fr)), mul_project(fl, w, ar))
        }
    }
}

fn backward_un(op: UnOp, w: Interval, ac: Interval) -> Interval {
    match op {
        UnOp::Neg => ac.intersect(&w.neg()),
        UnOp::Sqr => even_power_project(w, ac, 2),
        UnOp::Powi(n) if n % 2 == 0 => even_power_project(w, ac, n),
        UnOp::Powi(n) => {
            // Odd powers are monotone bijections of the real line.
            let lo = signed_root_down(w.lo(), n);
            let hi = signed_root_up(w.hi(), n);
            ac.intersect(&Interval::new(lo, hi))
        }
        UnOp::Sqrt => {
            let s = w.intersect(&nonneg());
            if s.is_empty() {
                Interval::EMPTY
            } else {
                ac.intersect(&s.sqr())
            }
        }
        UnOp::Abs => {
            let s = w.intersect(&nonneg());
            if s.is_empty() {
                Interval::EMPTY
            } else {
                ac.intersect(&Interval::new(-s.hi(), s.hi()))
            }
        }
        UnOp::Sin => trig_project(w, ac, true),
        UnOp::Cos => trig_project(w, ac, false),
    }
}

/// Preimage refinement for x^n in w with n even: |x| in [w.lo^(1/n), w.hi^(1/n)].
/// Both sign branches are clipped to the current domain before hulling,
/// so a one-sided domain keeps only its own branch.
fn even_power_project(w: Interval, ac: Interval, n: u32) -> Interval {
    let s = w.intersect(&nonneg());
    if s.is_empty() {
        return Interval::EMPTY;
    }
    let r = Interval::new(nth_root_down(s.lo(), n), nth_root_up(s.hi(), n));
    ac.intersect(&r).hull(&ac.intersect(&r.neg()))
}

fn signed_root_down(y: f64, n: u32) -> f64 {
    if y >= 0.0 {
        nth_root_down(y, n)
    } else if y == f64::NEG_INFINITY {
        f64::MIN
    } else {
        -nth_root_up(-y, n)
    }
}

fn signed_root_up(y: f64, n: u32) -> f64 {
    if y >= 0.0 {
        nth_root_up(y, n)
    } else if y == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        -nth_root_down(-y, n)
    }
}

/// Preimage refinement for sin(x) in w (is_sin) or cos(x) in w, over the
/// branches that meet `cur`. Falls back to `cur` (no contraction) when
/// cur is unbounded or spans too many periods to enumerate cheaply.
fn trig_project(w: Interval, cur: Interval, is_sin: bool) -> Interval {
    let w = w.intersect(&Interval::new(-1.0, 1.0));
    if w.is_empty() {
        return Interval::EMPTY;
    }
    if !cur.is_bounded() || cur.width() > 32.0 * interval::TWO_PI_LOOSE {
        return cur;
    }
    let pi = interval::pi_enclosure();
    let mut res = Interval::EMPTY;
    if is_sin {
        // x = k*pi + (-1)^k * asin(w)
        let base = Interval::new(asin_down(w.lo()), asin_up(w.hi()));
        let k_lo = (cur.lo() / std::f64::consts::PI).floor() as i64 - 1;
        let k_hi = (cur.hi() / std::f64::consts::PI).ceil() as i64 + 1;
        for k in k_lo..=k_hi {
            let kpi = pi.mul(&Interval::point(k as f64));
            let t = if k.rem_euclid(2) == 0 {
                kpi.add(&base)
            } else {
                kpi.sub(&base)
            };
            res = res.hull(&cur.intersect(&t));
        }
    } else {
        // x = 2k*pi +/- acos(w); acos is decreasing so endpoints swap.
        let base = Interval::new(acos_down(w.hi()), acos_up(w.lo()));
        let k_lo = (cur.lo() / interval::TWO_PI_LOOSE).floor() as i64 - 1;
        let k_hi = (cur.hi() / interval::TWO_PI_LOOSE).ceil() as i64 + 1;
        for k in k_lo..=k_hi {
            let kpi2 = pi.mul(&Interval::point(2.0 * k as f64));
            res = res.hull(&cur.intersect(&kpi2.add(&base)));
            res = res.hull(&cur.intersect(&kpi2.sub(&base)));
        }
    }
    res
}
