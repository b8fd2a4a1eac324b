//! Interval Newton contractor: midpoint expansion, floating-point
//! midpoint-inverse preconditioning, and a Hansen-Sengupta sweep with
//! extended division.
//!
//! The contractor accepts any m x n equality system. A square subsystem
//! is selected by full-pivot elimination on the midpoint Jacobian; with
//! m > n the certificate then speaks for the selected equations only,
//! which is exactly what the solver's certification policy expects, and
//! with m < n the unselected variables ride along as interval
//! parameters and nothing is ever certified.
//!
//! Point-width components are exact parameters, not unknowns: they are
//! excluded from pivot selection and from the strict-containment
//! requirement, so a system whose remaining variables form a full-rank
//! square block can still certify (e.g. after a variable is pinned to an
//! exact float).

use super::{differentiate, Constraint, Expr, Relation, Tape};
use crate::interval::{Interval, IntervalBox};

pub(crate) struct NewtonSystem {
    f_tape: Tape,
    j_tape: Tape, // row-major m x n
    m: usize,
    n: usize,
}

#[derive(Debug)]
pub(crate) enum NewtonBuildError {
    NotDifferentiable,
    UnknownVariable(String),
}

#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct NewtonOutcome {
    pub empty: bool,
    /// Existence and uniqueness proof succeeded for the selected square
    /// subsystem: every raw Newton update landed strictly inside the
    /// corresponding input component, with no extended division.
    pub certified: bool,
}

impl NewtonSystem {
    pub(crate) fn build(eqs: &[Expr], names: &[String]) -> Result<NewtonSystem, NewtonBuildError> {
        let m = eqs.len();
        let n = names.len();
        let mut jac = Vec::with_capacity(m * n);
        for e in eqs {
            for name in names {
                let d = differentiate(e, name)
                    .map_err(|_| NewtonBuildError::NotDifferentiable)?;
                jac.push(d);
            }
        }
        let f_tape = Tape::compile(eqs, names).map_err(|e| match e {
            super::EvalError::UnknownVariable(v) => NewtonBuildError::UnknownVariable(v),
        })?;
        let j_tape = Tape::compile(&jac, names).map_err(|e| match e {
            super::EvalError::UnknownVariable(v) => NewtonBuildError::UnknownVariable(v),
        })?;
        Ok(NewtonSystem { f_tape, j_tape, m, n })
    }

    /// One Newton application, contracting `b` in place.
    pub(crate) fn contract(&self, b: &mut IntervalBox, fwd: &mut Vec<Interval>) -> NewtonOutcome {
        debug_assert_eq!(b.len(), self.n);
        if b.is_empty_box() {
            return NewtonOutcome { empty: true, certified: false };
        }
        if b.vals().iter().any(|v| !v.is_bounded()) {
            return NewtonOutcome::default();
        }
        let (m, n) = (self.m, self.n);
        let mid: Vec<f64> = b
            .vals()
            .iter()
            .map(|v| v.midpoint().expect("bounded non-empty"))
            .collect();

        // F at the midpoint (rigorous point-box evaluation).
        let mid_vals: Vec<Interval> = mid.iter().map(|&x| Interval::point(x)).collect();
        self.f_tape.forward(&mid_vals, fwd);
        let fmid: Vec<Interval> = (0..m).map(|i| self.f_tape.root_value(i, fwd)).collect();

        // Interval Jacobian over the whole box.
        self.j_tape.forward(b.vals(), fwd);
        let jbox: Vec<Interval> = (0..m * n)
            .map(|i| self.j_tape.root_value(i, fwd))
            .collect();

        // Midpoint Jacobian; unbounded entries get a 0 surrogate (they
        // only degrade the preconditioner, never soundness).
        let jmid: Vec<f64> = jbox
            .iter()
            .map(|v| v.midpoint().unwrap_or(0.0))
            .collect();

        let active: Vec<bool> = b.vals().iter().map(|v| !v.is_point()).collect();
        let n_active = active.iter().filter(|&&a| a).count();
        let (rows, cols) = select_square(&jmid, m, n, &active);
        let r = rows.len();
        if r == 0 {
            return NewtonOutcome::default(); // singular: identity fallback
        }

        // C = inverse of the selected r x r midpoint block.
        let mut block = vec![0.0; r * r];
        for i in 0..r {
            for j in 0..r {
                block[i * r + j] = jmid[rows[i] * n + cols[j]];
            }
        }
        let c = match invert(&block, r) {
            Some(c) => c,
            None => return NewtonOutcome::default(),
        };

        // Preconditioned system: A = C * J[rows], d = -C * F(mid)[rows].
        let mut a = vec![Interval::ZERO; r * n];
        let mut d = vec![Interval::ZERO; r];
        for i in 0..r {
            for k in 0..r {
                let cik = Interval::point(c[i * r + k]);
                if cik == Interval::ZERO {
                    continue;
                }
                for j in 0..n {
                    let t = cik.mul(&jbox[rows[k] * n + j]);
                    a[i * n + j] = a[i * n + j].add(&t);
                }
                d[i] = d[i].sub(&cik.mul(&fmid[rows[k]]));
            }
        }

        // Hansen-Sengupta sweep in pivot order with sequential updates.
        let orig: Vec<Interval> = b.vals().to_vec();
        let mut certified = true;
        for i in 0..r {
            let v = cols[i];
            let mut num = d[i];
            for j in 0..n {
                if j == v {
                    continue;
                }
                let aij = a[i * n + j];
                if aij == Interval::ZERO {
                    continue;
                }
                let dx = b.vals()[j].sub(&Interval::point(mid[j]));
                num = num.sub(&aij.mul(&dx));
            }
            let den = a[i * n + v];
            let cur = b.vals()[v];
            let center = Interval::point(mid[v]);
            let new = if den == Interval::ZERO {
                certified = false;
                if num.contains(0.0) {
                    cur // 0*(x-mid) = num: no information
                } else {
                    Interval::EMPTY
                }
            } else if den.contains(0.0) {
                certified = false;
                let (p, q) = num.div_extended(&den);
                let first = cur.intersect(&center.add(&p));
                match q {
                    Some(q) => first.hull(&cur.intersect(&center.add(&q))),
                    None => first,
                }
            } else {
                let nv = center.add(&num.div(&den));
                if !nv.is_interior(&orig[v]) {
                    certified = false;
                }
                cur.intersect(&nv)
            };
            if new.is_empty() {
                let empties = vec![Interval::EMPTY; n];
                for (idx, e) in empties.into_iter().enumerate() {
                    b.set(idx, e);
                }
                return NewtonOutcome { empty: true, certified: false };
            }
            b.set(v, new);
        }
        NewtonOutcome {
            empty: false,
            certified: certified && r > 0 && r == n_active,
        }
    }

    /// Plain floating-point Newton iteration from `x` toward the equality
    /// manifold, square-ified by full-pivot subsystem selection (non-pivot
    /// coordinates stay fixed as local parameters). No enclosure claim is
    /// made: callers must re-verify the returned point with interval
    /// evaluation. Returns false when the iteration hits NaN or a singular
    /// pivot block before getting anywhere.
    pub(crate) fn polish(&self, x: &mut [f64], fwd: &mut Vec<Interval>) -> bool {
        let (m, n) = (self.m, self.n);
        let mut prev = f64::INFINITY;
        for _ in 0..10 {
            let vals: Vec<Interval> = x.iter().map(|&v| Interval::point(v)).collect();
            self.f_tape.forward(&vals, fwd);
            let mut f = Vec::with_capacity(m);
            for i in 0..m {
                match self.f_tape.root_value(i, fwd).midpoint() {
                    Some(v) => f.push(v),
                    None => return false,
                }
            }
            let fmax = f.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
            if fmax < 1e-15 {
                return true;
            }
            if fmax >= prev {
                // Stalled or diverging; hand the current point to the caller.
                return prev.is_finite();
            }
            prev = fmax;
            self.j_tape.forward(&vals, fwd);
            let j: Vec<f64> = (0..m * n)
                .map(|i| self.j_tape.root_value(i, fwd).midpoint().unwrap_or(0.0))
                .collect();
            let active = vec![true; n];
            let (rows, cols) = select_square(&j, m, n, &active);
            let r = rows.len();
            if r == 0 {
                return false;
            }
            let mut block = vec![0.0; r * r];
            for i in 0..r {
                for k in 0..r {
                    block[i * r + k] = j[rows[i] * n + cols[k]];
                }
            }
            let Some(c) = invert(&block, r) else {
                return false;
            };
            for i in 0..r {
                let mut dx = 0.0;
                for k in 0..r {
                    dx += c[i * r + k] * f[rows[k]];
                }
                x[cols[i]] -= dx;
            }
            if x.iter().any(|v| !v.is_finite()) {
                return false;
            }
        }
        true
    }
}

/// Full-pivot row/column selection on an m x n matrix, restricted to
/// active columns. Returns pivot row indices (equations) and pivot
/// column indices (variables), both in pivot order, stopping at rank
/// deficiency.
fn select_square(jmid: &[f64], m: usize, n: usize, active: &[bool]) -> (Vec<usize>, Vec<usize>) {
    let mut a = jmid.to_vec();
    let mut row_perm: Vec<usize> = (0..m).collect();
    let mut col_perm: Vec<usize> = (0..n).filter(|&j| active[j]).collect();
    let n_act = col_perm.len();
    let r_max = m.min(n_act);
    let mut first_pivot = 0.0f64;
    let mut rank = 0;
    for k in 0..r_max {
        let (mut bi, mut bj, mut bv) = (k, k, 0.0f64);
        for i in k..m {
            for j in k..n_act {
                let v = a[row_perm[i] * n + col_perm[j]].abs();
                if v > bv {
                    (bi, bj, bv) = (i, j, v);
                }
            }
        }
        if k == 0 {
            first_pivot = bv;
        }
        if bv == 0.0 || bv < 1e-13 * first_pivot {
            break;
        }
        row_perm.swap(k, bi);
        col_perm.swap(k, bj);
        let pr = row_perm[k];
        let pc = col_perm[k];
        let piv = a[pr * n + pc];
        for i in (k + 1)..m {
            let ri = row_perm[i];
            let factor = a[ri * n + pc] / piv;
            if factor == 0.0 {
                continue;
            }
            for j in k..n_act {
                let cj = col_perm[j];
                a[ri * n + cj] -= factor * a[pr * n + cj];
            }
        }
        rank = k + 1;
    }
    (row_perm[..rank].to_vec(), col_perm[..rank].to_vec())
}

/// Gauss-Jordan inverse with partial pivoting; None when singular.
fn invert(mat: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut a = mat.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for k in 0..n {
        let mut p = k;
        for i in (k + 1)..n {
            if a[i * n + k].abs() > a[p * n + k].abs() {
                p = i;
            }
        }
        if a[p * n + k] == 0.0 {
            return None;
        }
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
                inv.swap(k * n + j, p * n + j);
            }
        }
        let piv = a[k * n + k];
        for j in 0..n {
            a[k * n + j] /= piv;
            inv[k * n + j] /= piv;
        }
        for i in 0..n {
            if i == k {
                continue;
            }
            let f = a[i * n + k];
            if f == 0.0 {
                continue;
            }
            for j in 0..n {
                a[i * n + j] -= f * a[k * n + j];
                inv[i * n + j] -= f * inv[k * n + j];
            }
        }
    }
    if a.iter().any(|x| !x.is_finite()) || inv.iter().any(|x| !x.is_finite()) {
        return None;
    }
    Some(inv)
}

/// Interval Newton on a square equality system.
///
/// Contracts the box toward the roots of the system; every root inside
/// the input box is preserved. Returns the empty box when the system
/// has no root in the box, and falls back to the identity when the
/// midpoint Jacobian is singular or an expression is not differentiable.
///
/// Panics when the system is not square over the box variables or when
/// a constraint is not an equality.
pub fn newton_contract(system: &[Constraint], b: &IntervalBox) -> IntervalBox {
    assert_eq!(
        system.len(),
        b.len(),
        "newton_contract: system must be square"
    );
    assert!(
        system.iter().all(|c| c.relation == Relation::Eq0),
        "newton_contract: equality constraints only"
    );
    let bodies: Vec<Expr> = system.iter().map(|c| c.body.clone()).collect();
    let sys = match NewtonSystem::build(&bodies, b.names()) {
        Ok(s) => s,
        Err(NewtonBuildError::NotDifferentiable) => return b.clone(),
        Err(NewtonBuildError::UnknownVariable(v)) => {
            panic!("newton_contract: unknown variable '{v}'")
        }
    };
    let mut out = b.clone();
    let mut fwd = Vec::new();
    let outcome = sys.contract(&mut out, &mut fwd);
    if outcome.empty {
        b.with_vals(vec![Interval::EMPTY; b.len()])
    } else {
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi)
    }

    fn sq(c: Constraint, b: &IntervalBox) -> IntervalBox {
        newton_contract(std::slice::from_ref(&c), b)
    }

    #[test]
    fn quadratic_contains_root_and_shrinks() {
        let c = Constraint::eq0(Expr::var("x").sqr() - 4.0);
        let b = IntervalBox::from_pairs(&[("x", iv(1.0, 3.0))]);
        let out = sq(c, &b);
        let x = out.get("x").unwrap();
        assert!(x.contains(2.0));
        assert!(x.width() < iv(1.0, 3.0).width());
    }

    #[test]
    fn quadratic_no_root_gives_empty() {
        let c = Constraint::eq0(Expr::var("x").sqr() - 4.0);
        let b = IntervalBox::from_pairs(&[("x", iv(5.0, 6.0))]);
        assert!(sq(c, &b).is_empty_box());
    }

    #[test]
    fn linear_collapses_in_one_step() {
        let c = Constraint::eq0(Expr::var("x") - 1.0);
        let b = IntervalBox::from_pairs(&[("x", iv(0.0, 9.0))]);
        let x = sq(c, &b).get("x").unwrap();
        assert!(x.contains(1.0));
        assert!(x.width() <= 1.0_f64.next_up() - 1.0);
    }

    #[test]
    fn singular_jacobian_identity_fallback() {
        // Midpoint Jacobian of x^2-4 at mid 0 is 0: no contraction.
        let c = Constraint::eq0(Expr::var("x").sqr() - 4.0);
        let b = IntervalBox::from_pairs(&[("x", iv(-3.0, 3.0))]);
        let out = sq(c, &b);
        assert_eq!(out.get("x").unwrap(), iv(-3.0, 3.0));
    }

    #[test]
    fn abs_falls_back_to_identity() {
        let c = Constraint::eq0(Expr::var("x").abs() - 1.0);
        let b = IntervalBox::from_pairs(&[("x", iv(0.5, 2.0))]);
        let out = sq(c, &b);
        assert_eq!(out.get("x").unwrap(), iv(0.5, 2.0));
    }

    #[test]
    fn two_by_two_system() {
        // x + y = 3, x*y = 2 has roots (1,2) and (2,1); on a box around
        // (2,1) the contractor should keep (2,1) and tighten.
        let x = Expr::var("x");
        let y = Expr::var("y");
        let cs = [
            Constraint::eq0(x.clone() + y.clone() - 3.0),
            Constraint::eq0(x.clone() * y.clone() - 2.0),
        ];
        let b = IntervalBox::from_pairs(&[("x", iv(1.6, 2.5)), ("y", iv(0.6, 1.4))]);
        let out = newton_contract(&cs, &b);
        assert!(!out.is_empty_box());
        assert!(out.get("x").unwrap().contains(2.0));
        assert!(out.get("y").unwrap().contains(1.0));
        let shrunk = out.get("x").unwrap().width() < 0.9
            && out.get("y").unwrap().width() < 0.8;
        assert!(shrunk);
    }

    #[test]
    fn certification_flag_on_tight_root() {
        let x = Expr::var("x");
        let sys = NewtonSystem::build(
            &[x.sqr() - 2.0],
            &["x".to_string()],
        )
        .unwrap();
        let mut b = IntervalBox::from_pairs(&[("x", iv(1.3, 1.5))]);
        let mut fwd = Vec::new();
        let oc = sys.contract(&mut b, &mut fwd);
        assert!(!oc.empty);
        assert!(oc.certified, "sqrt(2) strictly inside [1.3,1.5]");
        assert!(b.get("x").unwrap().contains(std::f64::consts::SQRT_2));
    }

    #[test]
    fn overdetermined_consistent_system_contracts() {
        // Three consistent equations, two unknowns; root (1, 2).
        let x = Expr::var("x");
        let y = Expr::var("y");
        let sys = NewtonSystem::build(
            &[
                x.clone() + y.clone() - 3.0,
                x.clone() - y.clone() + 1.0,
                x.sqr() + y.clone() - 3.0,
            ],
            &["x".to_string(), "y".to_string()],
        )
        .unwrap();
        let mut b = IntervalBox::from_pairs(&[("x", iv(0.5, 1.6)), ("y", iv(1.2, 2.6))]);
        let mut fwd = Vec::new();
        let oc = sys.contract(&mut b, &mut fwd);
        assert!(!oc.empty);
        assert!(b.get("x").unwrap().contains(1.0));
        assert!(b.get("y").unwrap().contains(2.0));
    }

    #[test]
    fn underdetermined_contracts_without_certifying() {
        // One equation, two unknowns: the solution set is a curve.
        let x = Expr::var("x");
        let y = Expr::var("y");
        let sys = NewtonSystem::build(
            &[x.clone() + y.clone() - 1.0],
            &["x".to_string(), "y".to_string()],
        )
        .unwrap();
        let mut b = IntervalBox::from_pairs(&[("x", iv(0.0, 2.0)), ("y", iv(0.4, 0.6))]);
        let mut fwd = Vec::new();
        let oc = sys.contract(&mut b, &mut fwd);
        assert!(!oc.empty);
        assert!(!oc.certified);
        // x must contract toward [0.4, 0.6].
        let xo = b.get("x").unwrap();
        assert!(xo.contains(0.5) && xo.width() < 0.5);
    }

    #[test]
    fn point_components_are_parameters() {
        // y pinned to an exact float: the 1x1 subsystem over x alone
        // certifies the root of x^2 - y at x = 2.
        let x = Expr::var("x");
        let y = Expr::var("y");
        let sys = NewtonSystem::build(
            &[x.sqr() - y],
            &["x".to_string(), "y".to_string()],
        )
        .unwrap();
        let mut b = IntervalBox::from_pairs(&[("x", iv(1.5, 2.5)), ("y", iv(4.0, 4.0))]);
        let mut fwd = Vec::new();
        let oc = sys.contract(&mut b, &mut fwd);
        assert!(!oc.empty);
        assert!(oc.certified, "pinned parameter must not block certification");
        assert!(b.get("x").unwrap().contains(2.0));
        assert_eq!(b.get("y").unwrap(), iv(4.0, 4.0));
    }

    #[test]
    fn conservativeness_sampled_roots() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(0x4e3a70);
        // Roots of x^2 - t = 0 for random t stay inside the contraction.
        for _ in 0..200 {
            let t: f64 = rng.gen_range(0.25..9.0);
            let c = Constraint::eq0(Expr::var("x").sqr() - t);
            let b = IntervalBox::from_pairs(&[("x", iv(0.1, 3.5))]);
            let out = sq(c, &b);
            let root = t.sqrt();
            if root >= 0.1 && root <= 3.5 {
                assert!(
                    out.get("x").unwrap().contains(root),
                    "lost root {root} of x^2-{t}"
                );
            }
        }
    }
}
