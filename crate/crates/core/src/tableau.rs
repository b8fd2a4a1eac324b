//! Method specifications, Butcher tableaux, and the glue between them:
//! structural constraints, CSP assembly, next-order cost construction,
//! order verification, and a line-oriented interchange format.
//!
//! The derivation pipeline is: describe the wanted method as a
//! [`MethodSpec`], turn it into a constraint system with [`build_csp`]
//! (optionally a cost with [`build_cost`]), solve with the solver module,
//! and convert solution boxes back to [`ButcherTableau`] values with
//! [`ButcherTableau::from_box`]. [`verify_order`] closes the loop by
//! re-checking every order condition on the interval entries.

pub mod catalog;
mod format;

pub use format::{parse, serialize, TableauParseError};

use std::collections::{BTreeSet, HashMap};

use crate::expr::{evaluate, Constraint, Expr};
use crate::interval::{Interval, IntervalBox};
use crate::solver::{Csp, SolverError};
use crate::trees::{
    self, coefficients, elementary_weight, order_conditions, Rational, RootedTree, TreesError,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TableauError {
    InconsistentFlags(&'static str),
    BadShape(String),
    /// A variable expected in a solution box is missing.
    MissingVariable(String),
    Trees(TreesError),
    Solver(SolverError),
}

impl std::fmt::Display for TableauError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TableauError::InconsistentFlags(m) => write!(f, "inconsistent flags: {m}"),
            TableauError::BadShape(m) => write!(f, "bad tableau shape: {m}"),
            TableauError::MissingVariable(v) => write!(f, "missing variable '{v}'"),
            TableauError::Trees(e) => write!(f, "{e}"),
            TableauError::Solver(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for TableauError {}

impl From<TreesError> for TableauError {
    fn from(e: TreesError) -> TableauError {
        TableauError::Trees(e)
    }
}

impl From<SolverError> for TableauError {
    fn from(e: SolverError) -> TableauError {
        TableauError::Solver(e)
    }
}

/// Monotonicity requirement on the abscissae c.
///
/// Strict and weak emit the same closed-form constraints c_i - c_{i+1} <= 0:
/// interval certification works with closed sets, so a strict inequality
/// cannot be distinguished from its closure. The variants are kept apart
/// because they document different intents, and None (needed e.g. to find
/// both two-stage SDIRK solutions) omits the constraints entirely.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum COrder {
    Strict,
    Weak,
    None,
}

/// What kind of Runge-Kutta method to derive.
///
/// Structure flags are independent and combine freely except where
/// physically contradictory (validated in [`MethodSpec::validate`]):
/// `explicit` zeroes the diagonal and upper triangle, `dirk` the strict
/// upper triangle, `singly` equates the diagonal entries (without forcing
/// triangularity: the catalog's S3O4 is fully implicit with an equal
/// diagonal), `explicit_first_line` zeroes row 0, and `stiffly_accurate`
/// ties the last row of A to b.
#[derive(Debug, Clone)]
pub struct MethodSpec {
    pub s: usize,
    pub p: u32,
    pub explicit: bool,
    pub dirk: bool,
    pub singly: bool,
    pub explicit_first_line: bool,
    pub stiffly_accurate: bool,
    pub c_order: COrder,
    pub a_domain: Interval,
    pub b_domain: Interval,
    pub c_domain: Interval,
}

impl MethodSpec {
    /// Fully implicit spec with the default domains A,b in [-1,1],
    /// c in [0,1], and strict c ordering.
    pub fn new(s: usize, p: u32) -> MethodSpec {
        MethodSpec {
            s,
            p,
            explicit: false,
            dirk: false,
            singly: false,
            explicit_first_line: false,
            stiffly_accurate: false,
            c_order: COrder::Strict,
            a_domain: Interval::new(-1.0, 1.0),
            b_domain: Interval::new(-1.0, 1.0),
            c_domain: Interval::new(0.0, 1.0),
        }
    }

    pub fn validate(&self) -> Result<(), TableauError> {
        if self.s < 1 {
            return Err(TableauError::BadShape("need at least one stage".into()));
        }
        if self.p < 1 {
            return Err(TableauError::BadShape("order must be at least 1".into()));
        }
        if self.explicit && (self.dirk || self.singly) {
            // dirk is implied by explicit and singly would pin the whole
            // diagonal to zero twice over; both flags signal confusion.
            return Err(TableauError::InconsistentFlags(
                "explicit already fixes the triangle; drop dirk/singly",
            ));
        }
        for (name, d) in [
            ("a", self.a_domain),
            ("b", self.b_domain),
            ("c", self.c_domain),
        ] {
            if d.is_empty() || !d.is_bounded() {
                return Err(TableauError::BadShape(format!(
                    "{name} domain must be nonempty and bounded"
                )));
            }
        }
        Ok(())
    }

    /// Entries of A forced to zero by the structure flags.
    fn zero_entries(&self) -> BTreeSet<(usize, usize)> {
        let mut z = BTreeSet::new();
        for i in 0..self.s {
            for j in 0..self.s {
                let zero = (self.explicit && j >= i)
                    || (self.dirk && j > i)
                    || (self.explicit_first_line && i == 0);
                if zero {
                    z.insert((i, j));
                }
            }
        }
        z
    }
}

/// The constraints implied by a spec's structure flags alone (no order
/// conditions): zero entries, diagonal equalities, stiffly-accurate row
/// ties, the always-on row sums c_i = sum_j a_ij, and the c ordering.
pub fn structural_constraints(spec: &MethodSpec) -> Vec<Constraint> {
    let s = spec.s;
    let mut out = Vec::new();
    for &(i, j) in &spec.zero_entries() {
        out.push(Constraint::eq0(Expr::var(trees::var_a(i, j))));
    }
    if spec.singly {
        for i in 0..s.saturating_sub(1) {
            out.push(Constraint::eq(
                Expr::var(trees::var_a(i, i)),
                Expr::var(trees::var_a(i + 1, i + 1)),
            ));
        }
    }
    if spec.stiffly_accurate {
        for j in 0..s {
            out.push(Constraint::eq(
                Expr::var(trees::var_a(s - 1, j)),
                Expr::var(trees::var_b(j)),
            ));
        }
    }
    for i in 0..s {
        let row = Expr::sum((0..s).map(|j| Expr::var(trees::var_a(i, j))));
        out.push(Constraint::eq(Expr::var(trees::var_c(i)), row));
    }
    if spec.c_order != COrder::None {
        for i in 0..s.saturating_sub(1) {
            out.push(Constraint::le(
                Expr::var(trees::var_c(i)),
                Expr::var(trees::var_c(i + 1)),
            ));
        }
    }
    out
}

/// Substitution map sending every structurally zero entry to [0,0].
fn zero_substitution(spec: &MethodSpec) -> HashMap<String, Interval> {
    spec.zero_entries()
        .iter()
        .map(|&(i, j)| (trees::var_a(i, j), Interval::ZERO))
        .collect()
}

/// Keep a constraint unless substitution reduced it to the trivially
/// true 0 = 0 / 0 <= 0 (a structural identity, e.g. a row-sum of an
/// explicit first stage).
fn nontrivial(c: Constraint) -> Option<Constraint> {
    match c.body.as_const() {
        Some(v) if v == Interval::ZERO => None,
        _ => Some(c),
    }
}

/// Assemble the derivation CSP for a spec: variables are b, c, and the
/// structurally free entries of A (in that order); constraints are the
/// order conditions for (s, p) plus the structural constraints, with
/// structurally zero entries substituted away rather than carried as
/// [0,0] variables.
pub fn build_csp(spec: &MethodSpec) -> Result<Csp, TableauError> {
    spec.validate()?;
    let s = spec.s;
    let zeros = spec.zero_entries();
    let subst = zero_substitution(spec);

    let mut pairs: Vec<(String, Interval)> = Vec::new();
    for i in 0..s {
        pairs.push((trees::var_b(i), spec.b_domain));
    }
    for i in 0..s {
        pairs.push((trees::var_c(i), spec.c_domain));
    }
    for i in 0..s {
        for j in 0..s {
            if !zeros.contains(&(i, j)) {
                pairs.push((trees::var_a(i, j), spec.a_domain));
            }
        }
    }
    let named: Vec<(&str, Interval)> = pairs.iter().map(|(n, d)| (n.as_str(), *d)).collect();
    let domains = IntervalBox::from_pairs(&named);

    let mut cons: Vec<Constraint> = Vec::new();
    for oc in order_conditions(s, spec.p)? {
        let c = oc.constraint();
        let body = crate::expr::substitute(&c.body, &subst);
        cons.extend(nontrivial(Constraint {
            body,
            relation: c.relation,
        }));
    }
    for c in structural_constraints(spec) {
        // Zero constraints are already folded into the substitution; the
        // remaining structural constraints are substituted the same way.
        let body = crate::expr::substitute(&c.body, &subst);
        cons.extend(nontrivial(Constraint {
            body,
            relation: c.relation,
        }));
    }

    Ok(Csp::new(domains, cons)?)
}

/// Next-order cost: sum over trees of order exactly p+1 of the squared
/// order-condition residual (phi(tau) - 1/gamma(tau))^2, with structural
/// zeros substituted. Minimizing it drives a p-order method as close to
/// order p+1 as its structure allows.
pub fn build_cost(spec: &MethodSpec) -> Result<Expr, TableauError> {
    spec.validate()?;
    let subst = zero_substitution(spec);
    let mut terms = Vec::new();
    for t in trees::enumerate(spec.p + 1)? {
        let gamma = coefficients(&t).gamma;
        let phi = elementary_weight(&t, spec.s, true);
        let body = crate::expr::substitute(&phi, &subst)
            .sub(&Expr::val(Rational::new(1, gamma as i64).to_interval()));
        terms.push(body.sqr());
    }
    Ok(Expr::sum(terms))
}

// ---------------------------------------------------------------------------
// Tableau data model.

/// A Runge-Kutta scheme with interval entries: every real tableau drawn
/// componentwise from (A, b, c) is one concrete method, and verified
/// properties hold for at least one (inclusion proofs) or all (certain
/// inequality proofs) of them depending on the property.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    pub name: String,
    /// Free-form structure tags carried through the interchange format
    /// (e.g. "explicit", "stifflyAccurate"); no semantics in this module.
    pub flags: Vec<String>,
    pub declared_order: u32,
    pub a: Vec<Vec<Interval>>,
    pub b: Vec<Interval>,
    pub c: Vec<Interval>,
}

impl ButcherTableau {
    pub fn new(
        name: &str,
        declared_order: u32,
        a: Vec<Vec<Interval>>,
        b: Vec<Interval>,
        c: Vec<Interval>,
    ) -> Result<ButcherTableau, TableauError> {
        let s = b.len();
        if s == 0 {
            return Err(TableauError::BadShape("empty tableau".into()));
        }
        if c.len() != s || a.len() != s || a.iter().any(|row| row.len() != s) {
            return Err(TableauError::BadShape(format!(
                "A must be {s}x{s} and c length {s}"
            )));
        }
        if a.iter().flatten().chain(&b).chain(&c).any(|v| v.is_empty()) {
            return Err(TableauError::BadShape("empty interval entry".into()));
        }
        Ok(ButcherTableau {
            name: name.to_string(),
            flags: Vec::new(),
            declared_order,
            a,
            b,
            c,
        })
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    /// Build from a solver box over b_i/c_i/a_ij variables. Entries of A
    /// absent from the box are structural zeros.
    pub fn from_box(
        bx: &IntervalBox,
        s: usize,
        declared_order: u32,
        name: &str,
    ) -> Result<ButcherTableau, TableauError> {
        let need = |n: String| {
            bx.get(&n)
                .ok_or(TableauError::MissingVariable(n))
        };
        let mut b = Vec::with_capacity(s);
        let mut c = Vec::with_capacity(s);
        for i in 0..s {
            b.push(need(trees::var_b(i))?);
            c.push(need(trees::var_c(i))?);
        }
        let a = (0..s)
            .map(|i| {
                (0..s)
                    .map(|j| bx.get(&trees::var_a(i, j)).unwrap_or(Interval::ZERO))
                    .collect()
            })
            .collect();
        ButcherTableau::new(name, declared_order, a, b, c)
    }

    /// All entries as a named box (zeros included), the evaluation
    /// environment for elementary-weight expressions.
    pub fn as_box(&self) -> IntervalBox {
        let s = self.stages();
        let mut pairs: Vec<(String, Interval)> = Vec::new();
        for i in 0..s {
            pairs.push((trees::var_b(i), self.b[i]));
        }
        for i in 0..s {
            pairs.push((trees::var_c(i), self.c[i]));
        }
        for i in 0..s {
            for j in 0..s {
                pairs.push((trees::var_a(i, j), self.a[i][j]));
            }
        }
        let named: Vec<(&str, Interval)> = pairs.iter().map(|(n, v)| (n.as_str(), *v)).collect();
        IntervalBox::from_pairs(&named)
    }

    /// Row-sum residuals sum_j a_ij - c_i; each should contain 0 for a
    /// consistent tableau.
    pub fn row_sum_residuals(&self) -> Vec<Interval> {
        self.a
            .iter()
            .zip(&self.c)
            .map(|(row, ci)| {
                let mut acc = Interval::ZERO;
                for v in row {
                    acc = acc.add(v);
                }
                acc.sub(ci)
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Order verification.

/// One order condition evaluated on a tableau.
#[derive(Debug, Clone)]
pub struct ConditionRow {
    pub tree: RootedTree,
    pub order: u32,
    /// Interval evaluation of the elementary weight phi(tree).
    pub weight: Interval,
    pub target: Rational,
    /// Rigorous containment: the tight enclosure of the target rational
    /// is a subset of the weight interval. May conservatively answer
    /// false when the weight is within one ulp of the target.
    pub contains: bool,
}

#[derive(Debug, Clone)]
pub struct OrderReport {
    pub rows: Vec<ConditionRow>,
    /// True iff every condition of order <= p contains its target.
    pub verified: bool,
    /// Interval enclosure of sqrt(sum of squared residuals) over the
    /// trees of order p+1: the Euclidean distance-to-next-order
    /// diagnostic.
    pub next_order_distance: Interval,
}

/// Evaluate every order condition with r(tau) <= p on the tableau's
/// interval entries, plus the distance-to-order-(p+1) diagnostic.
pub fn verify_order(t: &ButcherTableau, p: u32) -> Result<OrderReport, TableauError> {
    let s = t.stages();
    let bx = t.as_box();
    let mut rows = Vec::new();
    let mut verified = true;
    for oc in order_conditions(s, p)? {
        let weight = evaluate(&oc.weight, &bx).expect("as_box covers all weight variables");
        let contains = oc.rhs.to_interval().is_subset(&weight);
        verified &= contains;
        rows.push(ConditionRow {
            order: oc.tree.order(),
            tree: oc.tree,
            weight,
            target: oc.rhs,
            contains,
        });
    }

    let mut dist2 = Interval::ZERO;
    for tree in trees::enumerate(p + 1)? {
        let gamma = coefficients(&tree).gamma;
        let phi = elementary_weight(&tree, s, true);
        let w = evaluate(&phi, &bx).expect("as_box covers all weight variables");
        let residual = w.sub(&Rational::new(1, gamma as i64).to_interval());
        dist2 = dist2.add(&residual.sqr());
    }

    Ok(OrderReport {
        rows,
        verified,
        next_order_distance: dist2.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{branch_and_prune, SolveConfig};

    #[test]
    fn structural_counts_match_flag_contracts() {
        let mut spec = MethodSpec::new(3, 3);
        spec.c_order = COrder::None;
        let base = structural_constraints(&spec).len(); // 3 row sums
        assert_eq!(base, 3);

        spec.explicit = true;
        assert_eq!(structural_constraints(&spec).len() - base, 6); // s(s+1)/2 zeros
        spec.explicit = false;

        spec.stiffly_accurate = true;
        assert_eq!(structural_constraints(&spec).len() - base, 3); // a_2j = b_j
        spec.stiffly_accurate = false;

        spec.singly = true;
        assert_eq!(structural_constraints(&spec).len() - base, 2); // diagonal ties
        spec.singly = false;

        spec.c_order = COrder::Strict;
        assert_eq!(structural_constraints(&spec).len() - base, 2);
        spec.c_order = COrder::Weak;
        assert_eq!(structural_constraints(&spec).len() - base, 2);
    }

    #[test]
    fn flag_validation() {
        let mut spec = MethodSpec::new(2, 2);
        spec.explicit = true;
        spec.singly = true;
        assert!(matches!(
            spec.validate(),
            Err(TableauError::InconsistentFlags(_))
        ));
        let mut spec = MethodSpec::new(3, 4);
        spec.singly = true;
        spec.stiffly_accurate = true;
        assert!(spec.validate().is_ok());
    }

    #[test]
    fn fully_implicit_two_stage_order_four_csp_shape() {
        // 8 order conditions + 2 row sums + 1 ordering over 8 variables.
        let spec = MethodSpec::new(2, 4);
        let csp = build_csp(&spec).unwrap();
        assert_eq!(csp.constraints().len(), 11);
        let names: Vec<&str> = csp
            .domains()
            .names()
            .iter()
            .map(|s| s.as_str())
            .collect();
        assert_eq!(
            names,
            ["b0", "b1", "c0", "c1", "a00", "a01", "a10", "a11"]
        );
        assert_eq!(csp.domains().get("b0").unwrap(), Interval::new(-1.0, 1.0));
        assert_eq!(csp.domains().get("c0").unwrap(), Interval::new(0.0, 1.0));
    }

    #[test]
    fn stiffly_accurate_two_stage_csp_matches_reference_listing() {
        // 2 order conditions + 2 row sums + 2 stiffly-accurate ties +
        // 1 weak ordering = 7 constraints.
        let mut spec = MethodSpec::new(2, 2);
        spec.stiffly_accurate = true;
        spec.c_order = COrder::Weak;
        let csp = build_csp(&spec).unwrap();
        assert_eq!(csp.constraints().len(), 7);
    }

    #[test]
    fn explicit_euler_is_forced() {
        let mut spec = MethodSpec::new(1, 1);
        spec.explicit = true;
        spec.c_order = COrder::None;
        let csp = build_csp(&spec).unwrap();
        // Variables are just b0 and c0: the only A entry is a zero.
        assert_eq!(csp.domains().names().len(), 2);
        let paving = branch_and_prune(&csp, &SolveConfig::default());
        assert_eq!(paving.solutions.len(), 1);
        let t = ButcherTableau::from_box(&paving.solutions[0], 1, 1, "euler").unwrap();
        assert!(t.b[0].contains(1.0) && t.b[0].width() < 1e-12);
        assert!(t.c[0].contains(0.0) && t.c[0].width() < 1e-12);
        assert_eq!(t.a[0][0], Interval::ZERO);
        assert!(verify_order(&t, 1).unwrap().verified);
    }

    #[test]
    fn order_conditions_hold_at_exact_gauss_legendre_point() {
        // Check each CSP equality of the (s=2, p=4) system at the exact
        // Gauss-Legendre tableau; every equality must admit 0 and the
        // ordering constraint must certainly hold.
        let spec = MethodSpec::new(2, 4);
        let csp = build_csp(&spec).unwrap();
        let s3 = Interval::point(3.0).sqrt();
        let six = Interval::point(6.0);
        let half = Interval::point(0.5);
        let quarter = Interval::point(0.25);
        let c0 = half.sub(&s3.div(&six));
        let c1 = half.add(&s3.div(&six));
        let gl = IntervalBox::from_pairs(&[
            ("b0", half),
            ("b1", half),
            ("c0", c0),
            ("c1", c1),
            ("a00", quarter),
            ("a01", quarter.sub(&s3.div(&six))),
            ("a10", quarter.add(&s3.div(&six))),
            ("a11", quarter),
        ]);
        for c in csp.constraints() {
            assert!(
                c.possibly_holds(&gl).unwrap(),
                "constraint {c} refuted at Gauss-Legendre"
            );
        }
    }

    #[test]
    fn cost_vanishes_at_gauss_legendre_and_not_at_kutta() {
        // Gauss-Legendre s=2 has order 4, so the p=3 next-order cost
        // (four order-4 residuals) contains zero there.
        let spec = MethodSpec::new(2, 3);
        let cost = build_cost(&spec).unwrap();
        let gl = catalog::gauss_legendre2();
        let v = evaluate(&cost, &gl.as_box()).unwrap();
        assert!(v.contains(0.0), "cost at GL2: {v}");
        assert!(v.hi() < 1e-28);

        // Kutta(3,3) is order 3 but not 4: its p=3 cost is the squared
        // distance reported by the order report.
        let mut spec3 = MethodSpec::new(3, 3);
        spec3.explicit = true;
        let cost3 = build_cost(&spec3).unwrap();
        let kutta = catalog::kutta33();
        let v3 = evaluate(&cost3, &kutta.as_box()).unwrap();
        assert!(v3.lo() > 0.0);
        let report = verify_order(&kutta, 3).unwrap();
        let d = report.next_order_distance;
        assert!(d.sqr().intersect(&v3) != Interval::EMPTY);
    }

    #[test]
    fn verify_order_rk4() {
        let rk4 = catalog::rk4();
        let r4 = verify_order(&rk4, 4).unwrap();
        assert!(r4.verified);
        assert_eq!(r4.rows.len(), 8);
        // RK4 is not order 5.
        let r5 = verify_order(&rk4, 5).unwrap();
        assert!(!r5.verified);
        // Distance to order 5 is a positive, tightly bounded diagnostic.
        assert!(r4.next_order_distance.lo() > 0.0);
    }

    #[test]
    fn row_sums_hold_on_catalog_rk4() {
        for r in catalog::rk4().row_sum_residuals() {
            assert!(r.contains(0.0));
        }
    }

    #[test]
    fn from_box_rejects_missing_variables() {
        let bx = IntervalBox::from_pairs(&[("b0", Interval::ONE)]);
        assert!(matches!(
            ButcherTableau::from_box(&bx, 1, 1, "broken"),
            Err(TableauError::MissingVariable(_))
        ));
    }
}
