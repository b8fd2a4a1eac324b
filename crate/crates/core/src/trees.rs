//! Rooted trees, their combinatorial coefficients, and Butcher order
//! conditions.
//!
//! A canonical tree stores its children as a sorted vector, so
//! structural equality is tree isomorphism and the derived Ord gives
//! the deterministic enumeration order used everywhere downstream
//! (constraint systems, reports, golden tests).

use crate::expr::{Constraint, Expr};
use crate::interval::Interval;
use std::collections::HashMap;
use std::fmt;

/// Canonical rooted tree: children sorted, leaf = no children.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct RootedTree {
    children: Vec<RootedTree>,
}

impl RootedTree {
    pub fn leaf() -> RootedTree {
        RootedTree { children: Vec::new() }
    }

    /// Build from children in any order; sorts into canonical form.
    pub fn node(mut children: Vec<RootedTree>) -> RootedTree {
        children.sort();
        RootedTree { children }
    }

    pub fn children(&self) -> &[RootedTree] {
        &self.children
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Node count r(t).
    pub fn order(&self) -> u32 {
        1 + self.children.iter().map(|c| c.order()).sum::<u32>()
    }

    /// Chain of n nodes (each node one child).
    pub fn chain(n: u32) -> RootedTree {
        assert!(n >= 1);
        let mut t = RootedTree::leaf();
        for _ in 1..n {
            t = RootedTree::node(vec![t]);
        }
        t
    }

    /// Star of n nodes (root with n-1 leaf children).
    pub fn star(n: u32) -> RootedTree {
        assert!(n >= 1);
        RootedTree::node(vec![RootedTree::leaf(); (n - 1) as usize])
    }
}

impl fmt::Display for RootedTree {
    /// Level-nesting notation: the children of the root inside
    /// brackets, e.g. "[]" for the leaf and "[[],[[]]]" for the
    /// 4-node tree with a leaf child and a chain-2 child.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, c) in self.children.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "]")
    }
}

/// Exact rational number; the only arithmetic the module needs is
/// construction in lowest terms and conversion to a tight interval.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct Rational {
    num: i64,
    den: i64,
}

impl Rational {
    pub fn new(num: i64, den: i64) -> Rational {
        assert!(den != 0, "zero denominator");
        let sign = if (num < 0) != (den < 0) { -1 } else { 1 };
        let (n, d) = (num.unsigned_abs(), den.unsigned_abs());
        let g = gcd(n, d).max(1);
        Rational {
            num: sign * (n / g) as i64,
            den: (d / g) as i64,
        }
    }

    pub fn num(&self) -> i64 {
        self.num
    }

    pub fn den(&self) -> i64 {
        self.den
    }

    /// Tight enclosure: exact when the value is dyadic, within 1 ulp
    /// otherwise. Exactness of the f64 conversion requires |num| and
    /// den below 2^53, which every gamma up to order 10 satisfies.
    pub fn to_interval(&self) -> Interval {
        Interval::point(self.num as f64).div(&Interval::point(self.den as f64))
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TreesError {
    OrderOutOfRange { order: u32, max: u32 },
}

impl fmt::Display for TreesError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreesError::OrderOutOfRange { order, max } => {
                write!(f, "order {order} out of range (1..={max})")
            }
        }
    }
}

impl std::error::Error for TreesError {}

const ENUMERATE_MAX: u32 = 10;
const CONDITIONS_MAX: u32 = 8;

/// All canonical rooted trees with exactly p nodes, sorted.
pub fn enumerate(p: u32) -> Result<Vec<RootedTree>, TreesError> {
    if p < 1 || p > ENUMERATE_MAX {
        return Err(TreesError::OrderOutOfRange { order: p, max: ENUMERATE_MAX });
    }
    let by_order = enumerate_up_to(p);
    Ok(by_order.into_iter().last().unwrap())
}

/// Trees of every order 1..=p, each list sorted.
fn enumerate_up_to(p: u32) -> Vec<Vec<RootedTree>> {
    let mut by_order: Vec<Vec<RootedTree>> = Vec::with_capacity(p as usize);
    for n in 1..=p {
        if n == 1 {
            by_order.push(vec![RootedTree::leaf()]);
            continue;
        }
        let mut out = Vec::new();
        let mut acc = Vec::new();
        child_multisets((n - 1) as usize, None, &by_order, &mut acc, &mut out);
        out.sort();
        by_order.push(out);
    }
    by_order
}

/// Extend `acc` with non-decreasing child sequences totalling `total`
/// nodes; every complete sequence becomes one canonical tree in `out`.
/// The non-decreasing discipline generates each multiset exactly once.
fn child_multisets(
    total: usize,
    min: Option<&RootedTree>,
    by_order: &[Vec<RootedTree>],
    acc: &mut Vec<RootedTree>,
    out: &mut Vec<RootedTree>,
) {
    if total == 0 {
        out.push(RootedTree { children: acc.clone() });
        return;
    }
    for r in 1..=total {
        for t in &by_order[r - 1] {
            if let Some(m) = min {
                if t < m {
                    continue;
                }
            }
            acc.push(t.clone());
            child_multisets(total - r, Some(t), by_order, acc, out);
            acc.pop();
        }
    }
}

/// Combinatorial coefficients of a tree. gamma and alpha are exact
/// (they are integers; gamma is the density, alpha the number of
/// monotonic labellings r!/(sigma*gamma), reported but never used in
/// constraints).
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct TreeCoefficients {
    pub r: u32,
    pub gamma: u64,
    pub alpha: u64,
}

pub fn coefficients(t: &RootedTree) -> TreeCoefficients {
    let r = t.order();
    let gamma = density(t);
    let sigma = symmetry(t);
    let fact: u64 = (1..=r as u64).product();
    debug_assert_eq!(fact % (sigma * gamma), 0, "alpha must be integral");
    TreeCoefficients { r, gamma, alpha: fact / (sigma * gamma) }
}

fn density(t: &RootedTree) -> u64 {
    t.order() as u64 * t.children.iter().map(density).product::<u64>()
}

fn symmetry(t: &RootedTree) -> u64 {
    let mut sigma = 1u64;
    let mut run = 1u64;
    for i in 0..t.children.len() {
        sigma *= symmetry(&t.children[i]);
        if i > 0 {
            if t.children[i] == t.children[i - 1] {
                run += 1;
                sigma *= run; // accumulates run! across the run
            } else {
                run = 1;
            }
        }
    }
    sigma
}

pub fn var_b(i: usize) -> String {
    format!("b{i}")
}

pub fn var_c(i: usize) -> String {
    format!("c{i}")
}

/// a-variable name; compact "a01" for single-digit stage indices, with
/// an underscore separator beyond that to stay unambiguous.
pub fn var_a(i: usize, j: usize) -> String {
    if i <= 9 && j <= 9 {
        format!("a{i}{j}")
    } else {
        format!("a{i}_{j}")
    }
}

/// Elementary weight phi(t) as an expression over b_i, c_i, a_ij.
///
/// phi(t) = sum_i b_i prod_k g_i(child_k), with g_i(leaf) = c_i when
/// c_substitution is set (the paper-style condition list) and
/// g_i(leaf) = sum_j a_ij otherwise. Repeated children become integer
/// powers; the per-subtree g tables are shared across the outer sum so
/// the result is a DAG, not a tree.
pub fn elementary_weight(t: &RootedTree, s: usize, c_substitution: bool) -> Expr {
    assert!(s >= 1);
    let mut tables: HashMap<RootedTree, Vec<Expr>> = HashMap::new();
    let terms = (0..s).map(|i| {
        let factor = children_product(t.children(), i, s, c_substitution, &mut tables);
        Expr::var(var_b(i)).mul(&factor)
    });
    Expr::sum(terms)
}

/// prod over the (grouped) children of g_i(child)^multiplicity.
fn children_product(
    children: &[RootedTree],
    i: usize,
    s: usize,
    c_sub: bool,
    tables: &mut HashMap<RootedTree, Vec<Expr>>,
) -> Expr {
    let mut product = Expr::constant(1.0);
    let mut k = 0;
    while k < children.len() {
        let mut mult = 1;
        while k + mult < children.len() && children[k + mult] == children[k] {
            mult += 1;
        }
        let g = g_table(&children[k], s, c_sub, tables)[i].clone();
        product = product.mul(&g.powi(mult as u32));
        k += mult;
    }
    product
}

/// g_i(t) for all stages i, cached per subtree so shared subtrees share
/// expression nodes.
fn g_table<'a>(
    t: &RootedTree,
    s: usize,
    c_sub: bool,
    tables: &'a mut HashMap<RootedTree, Vec<Expr>>,
) -> &'a Vec<Expr> {
    if !tables.contains_key(t) {
        let entries: Vec<Expr> = if t.is_leaf() {
            (0..s)
                .map(|i| {
                    if c_sub {
                        Expr::var(var_c(i))
                    } else {
                        Expr::sum((0..s).map(|j| Expr::var(var_a(i, j))))
                    }
                })
                .collect()
        } else {
            let mut inner: Vec<Expr> = Vec::with_capacity(s);
            for j in 0..s {
                inner.push(children_product(t.children(), j, s, c_sub, tables));
            }
            (0..s)
                .map(|i| {
                    Expr::sum(
                        (0..s).map(|j| Expr::var(var_a(i, j)).mul(&inner[j])),
                    )
                })
                .collect()
        };
        tables.insert(t.clone(), entries);
    }
    tables.get(t).unwrap()
}

/// One Butcher order condition: phi(tree) = 1/gamma(tree).
#[derive(Clone, Debug)]
pub struct OrderCondition {
    pub tree: RootedTree,
    pub weight: Expr,
    pub rhs: Rational,
}

impl OrderCondition {
    /// The condition as an equality constraint weight - rhs = 0, with
    /// the rational rhs converted to its tight interval enclosure.
    pub fn constraint(&self) -> Constraint {
        Constraint::eq0(self.weight.sub(&Expr::val(self.rhs.to_interval())))
    }
}

/// Order conditions for an s-stage method of order p: one per tree of
/// order <= p, in enumeration order, c-substituted (row-sum constraints
/// tying c to A are the tableau module's business).
pub fn order_conditions(s: usize, p: u32) -> Result<Vec<OrderCondition>, TreesError> {
    if p < 1 || p > CONDITIONS_MAX {
        return Err(TreesError::OrderOutOfRange { order: p, max: CONDITIONS_MAX });
    }
    assert!(s >= 1);
    let mut out = Vec::new();
    for trees in enumerate_up_to(p) {
        for t in trees {
            let weight = elementary_weight(&t, s, true);
            let gamma = density(&t);
            out.push(OrderCondition {
                weight,
                rhs: Rational::new(1, gamma as i64),
                tree: t,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::evaluate;
    use crate::interval::IntervalBox;
    use std::collections::BTreeSet;

    #[test]
    fn enumeration_counts() {
        let expect = [1usize, 1, 2, 4, 9, 20, 48];
        for (i, &n) in expect.iter().enumerate() {
            assert_eq!(enumerate(i as u32 + 1).unwrap().len(), n, "order {}", i + 1);
        }
    }

    #[test]
    fn cumulative_counts() {
        // 8, 17, 37, 85, 200 trees up to orders 4..8.
        let expect = [(4u32, 8usize), (5, 17), (6, 37), (7, 85), (8, 200)];
        for (p, total) in expect {
            let sum: usize = (1..=p).map(|q| enumerate(q).unwrap().len()).sum();
            assert_eq!(sum, total, "cumulative through order {p}");
        }
    }

    #[test]
    fn enumerate_guards() {
        assert!(enumerate(0).is_err());
        assert!(enumerate(11).is_err());
        assert_eq!(enumerate(1).unwrap(), vec![RootedTree::leaf()]);
    }

    #[test]
    fn enumeration_is_sorted_and_unique() {
        for p in 1..=7 {
            let ts = enumerate(p).unwrap();
            for w in ts.windows(2) {
                assert!(w[0] < w[1]);
            }
        }
    }

    /// Independent oracle: generate all ordered trees (children order
    /// significant, counted by Catalan numbers), canonicalize, dedup.
    fn ordered_canonical(n: usize, memo: &mut Vec<Vec<RootedTree>>) -> Vec<RootedTree> {
        if memo.len() >= n {
            return memo[n - 1].clone();
        }
        // Ensure all smaller sizes are present.
        for k in memo.len() + 1..=n {
            let mut out = Vec::new();
            // Ordered sequences of subtrees totalling k-1 nodes.
            fn seqs(
                total: usize,
                memo: &Vec<Vec<RootedTree>>,
                acc: &mut Vec<RootedTree>,
                out: &mut Vec<RootedTree>,
            ) {
                if total == 0 {
                    out.push(RootedTree::node(acc.clone()));
                    return;
                }
                for r in 1..=total {
                    for t in memo[r - 1].clone() {
                        acc.push(t);
                        seqs(total - r, memo, acc, out);
                        acc.pop();
                    }
                }
            }
            let mut acc = Vec::new();
            seqs(k - 1, memo, &mut acc, &mut out);
            memo.push(out);
        }
        memo[n - 1].clone()
    }

    #[test]
    fn matches_ordered_tree_oracle() {
        let mut memo: Vec<Vec<RootedTree>> = Vec::new();
        for p in 1..=7u32 {
            let all = ordered_canonical(p as usize, &mut memo);
            let dedup: BTreeSet<RootedTree> = all.into_iter().collect();
            let ours: BTreeSet<RootedTree> = enumerate(p).unwrap().into_iter().collect();
            assert_eq!(dedup, ours, "order {p}");
        }
    }

    #[test]
    fn gamma_low_order_table() {
        assert_eq!(coefficients(&RootedTree::leaf()).gamma, 1);
        assert_eq!(coefficients(&RootedTree::chain(2)).gamma, 2);
        assert_eq!(coefficients(&RootedTree::star(3)).gamma, 3);
        assert_eq!(coefficients(&RootedTree::chain(3)).gamma, 6);
        let order4: BTreeSet<u64> = enumerate(4)
            .unwrap()
            .iter()
            .map(|t| coefficients(t).gamma)
            .collect();
        assert_eq!(order4, BTreeSet::from([4, 8, 12, 24]));
    }

    #[test]
    fn gamma_chain_and_star() {
        let mut fact = 1u64;
        for n in 1..=8u32 {
            fact *= n as u64;
            assert_eq!(coefficients(&RootedTree::chain(n)).gamma, fact);
            assert_eq!(coefficients(&RootedTree::star(n)).gamma, n as u64);
        }
        assert_eq!(coefficients(&RootedTree::chain(5)).gamma, 120);
    }

    #[test]
    fn alpha_values() {
        // alpha counts monotonic labellings; over all trees of order p
        // they add up to (p-1)!.
        for p in 1..=7u32 {
            let sum: u64 = enumerate(p)
                .unwrap()
                .iter()
                .map(|t| coefficients(t).alpha)
                .sum();
            let expect: u64 = (1..p.max(1) as u64).product();
            assert_eq!(sum, expect, "order {p}");
        }
        // Spot values: the 4-node tree [[],[[]]] has alpha 3.
        let t = RootedTree::node(vec![RootedTree::leaf(), RootedTree::chain(2)]);
        assert_eq!(coefficients(&t).alpha, 3);
        assert_eq!(coefficients(&RootedTree::star(4)).alpha, 1);
    }

    #[test]
    fn display_level_nesting() {
        assert_eq!(RootedTree::leaf().to_string(), "[]");
        assert_eq!(RootedTree::chain(3).to_string(), "[[[]]]");
        let t = RootedTree::node(vec![RootedTree::chain(2), RootedTree::leaf()]);
        assert_eq!(t.to_string(), "[[],[[]]]");
    }

    #[test]
    fn weight_examples() {
        let leaf = RootedTree::leaf();
        assert_eq!(elementary_weight(&leaf, 2, true).to_string(), "(+ b0 b1)");
        let chain2 = RootedTree::chain(2);
        assert_eq!(
            elementary_weight(&chain2, 2, true).to_string(),
            "(+ (* b0 c0) (* b1 c1))"
        );
        let bushy3 = RootedTree::star(3);
        assert_eq!(
            elementary_weight(&bushy3, 2, true).to_string(),
            "(+ (* b0 (sqr c0)) (* b1 (sqr c1)))"
        );
        assert_eq!(
            elementary_weight(&chain2, 2, false).to_string(),
            "(+ (* b0 (+ a00 a01)) (* b1 (+ a10 a11)))"
        );
    }

    #[test]
    fn rhs_multiset_s3_p4() {
        let conds = order_conditions(3, 4).unwrap();
        assert_eq!(conds.len(), 8);
        let rhs: BTreeSet<String> = conds.iter().map(|c| c.rhs.to_string()).collect();
        let expect: BTreeSet<String> = ["1", "1/2", "1/3", "1/6", "1/4", "1/8", "1/12", "1/24"]
            .into_iter()
            .map(String::from)
            .collect();
        assert_eq!(rhs, expect);
    }

    #[test]
    fn order_conditions_guards_and_p1() {
        assert!(order_conditions(2, 0).is_err());
        assert!(order_conditions(2, 9).is_err());
        let conds = order_conditions(3, 1).unwrap();
        assert_eq!(conds.len(), 1);
        assert_eq!(conds[0].weight.to_string(), "(+ (+ b0 b1) b2)");
        assert_eq!(conds[0].rhs, Rational::new(1, 1));
    }

    #[test]
    fn rational_reduction_and_interval() {
        let r = Rational::new(2, 4);
        assert_eq!((r.num(), r.den()), (1, 2));
        assert!(r.to_interval().is_point());
        let third = Rational::new(1, 3).to_interval();
        assert!(third.lo() < third.hi());
        assert!(third.contains(1.0 / 3.0));
        assert!(third.width() <= f64::EPSILON);
        assert_eq!(Rational::new(-3, -6), Rational::new(1, 2));
        assert_eq!(Rational::new(3, -6).to_string(), "-1/2");
    }

    /// Theorem-level restatement: a tableau of order 4 makes every
    /// weight expression evaluate to an interval containing 1/gamma.
    #[test]
    fn weights_contain_rhs_on_classic_rk4() {
        let third = Interval::point(1.0).div(&Interval::point(3.0));
        let sixth = Interval::point(1.0).div(&Interval::point(6.0));
        let half = Interval::point(0.5);
        let mut pairs: Vec<(String, Interval)> = Vec::new();
        let b = [sixth, third, third, sixth];
        let c = [Interval::ZERO, half, half, Interval::ONE];
        for i in 0..4 {
            pairs.push((var_b(i), b[i]));
            pairs.push((var_c(i), c[i]));
            for j in 0..4 {
                pairs.push((var_a(i, j), Interval::ZERO));
            }
        }
        let set = |pairs: &mut Vec<(String, Interval)>, n: &str, v: Interval| {
            let slot = pairs.iter_mut().find(|(name, _)| name == n).unwrap();
            slot.1 = v;
        };
        set(&mut pairs, "a10", half);
        set(&mut pairs, "a21", half);
        set(&mut pairs, "a32", Interval::ONE);
        let owned: Vec<(&str, Interval)> =
            pairs.iter().map(|(n, v)| (n.as_str(), *v)).collect();
        let tableau = IntervalBox::from_pairs(&owned);
        for cond in order_conditions(4, 4).unwrap() {
            let v = evaluate(&cond.weight, &tableau).unwrap();
            let rhs = cond.rhs.to_interval();
            assert!(
                !v.intersect(&rhs).is_empty(),
                "tree {} weight {} rhs {}",
                cond.tree,
                v,
                rhs
            );
        }
    }
}
