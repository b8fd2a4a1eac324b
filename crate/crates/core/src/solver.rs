//! Branch-and-prune solving of interval constraint systems.
//!
//! A [`Csp`] pairs a box of variable domains with a list of constraints.
//! [`branch_and_prune`] pavés the feasible set into `solutions` (boxes proved
//! to contain exactly one solution via interval Newton, or proved entirely
//! feasible when only inequalities are present) and `undecided` (boxes shrunk
//! below the resolution threshold that could not be decided either way).
//! Every discarded box is proved infeasible, so the paving is a covering of
//! the true solution set.
//!
//! [`minimize`] runs a best-first branch-and-bound on an epsilon-relaxed
//! feasible set and returns certified two-sided bounds on the global minimum.
//! [`refine`] re-solves a system with extra pinning constraints appended,
//! the mechanism used to zoom a paving onto a known or desired solution.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use crate::expr::{BinOp, Constraint, EvalError, Expr, NewtonSystem, Node, Relation, Tape, UnOp};
use crate::interval::{Interval, IntervalBox};

/// Relative shrink of a variable's width that counts as progress and
/// re-queues the constraints touching it. Below this, propagation is
/// considered stalled and the solver falls back to bisection.
const SHRINK_FRACTION: f64 = 0.01;

/// Outer contraction rounds per node (HC4 fixpoint alternated with Newton).
/// A bound, not a tuning knob: each round must shrink some variable by
/// SHRINK_FRACTION or the loop exits early.
const MAX_CONTRACT_ROUNDS: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolverError {
    /// A constraint or cost mentions a variable absent from the domain box.
    UnknownVariable(String),
    /// A domain component is empty or unbounded.
    InvalidDomain(String),
    /// The epsilon-relaxed feasible set of a minimization is provably empty.
    InfeasibleRelaxation,
}

impl std::fmt::Display for SolverError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolverError::UnknownVariable(n) => write!(f, "unknown variable '{n}'"),
            SolverError::InvalidDomain(n) => write!(f, "domain of '{n}' is empty or unbounded"),
            SolverError::InfeasibleRelaxation => {
                write!(f, "relaxed feasible set is provably empty")
            }
        }
    }
}

impl std::error::Error for SolverError {}

impl From<EvalError> for SolverError {
    fn from(e: EvalError) -> SolverError {
        match e {
            EvalError::UnknownVariable(n) => SolverError::UnknownVariable(n),
        }
    }
}

/// A numerical constraint satisfaction problem: bounded domains plus
/// equality and inequality constraints over those variables.
#[derive(Debug, Clone)]
pub struct Csp {
    domains: IntervalBox,
    constraints: Vec<Constraint>,
}

impl Csp {
    /// Validates that every domain component is nonempty and bounded and
    /// that every constraint only mentions domain variables.
    pub fn new(domains: IntervalBox, constraints: Vec<Constraint>) -> Result<Csp, SolverError> {
        for (name, v) in domains.names().iter().zip(domains.vals()) {
            if v.is_empty() || !v.is_bounded() {
                return Err(SolverError::InvalidDomain(name.clone()));
            }
        }
        for c in &constraints {
            for var in c.body.variables() {
                if domains.index_of(&var).is_none() {
                    return Err(SolverError::UnknownVariable(var));
                }
            }
        }
        Ok(Csp {
            domains,
            constraints,
        })
    }

    pub fn domains(&self) -> &IntervalBox {
        &self.domains
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }
}

/// Contractors applied at every node, in the order given.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContractorKind {
    /// Constraint-wise forward/backward propagation to an AC-3 fixpoint.
    Hc4,
    /// Interval Newton on the equality subsystem. Also the only source of
    /// solution certificates for systems with equalities.
    Newton,
}

#[derive(Debug, Clone)]
pub struct SolveConfig {
    /// Boxes whose largest relative width falls below this are parked as
    /// undecided instead of being split further.
    pub box_epsilon: f64,
    /// Maximum number of boxes popped from the work list before the solver
    /// gives up and drains the remainder into `undecided`.
    pub max_nodes: u64,
    pub contractors: Vec<ContractorKind>,
    /// Worker threads for branch-and-prune. The paving is deterministic for
    /// any fixed worker count, and identical across counts after the final
    /// normalizing sort. Minimization is always sequential.
    pub workers: usize,
}

impl Default for SolveConfig {
    fn default() -> SolveConfig {
        SolveConfig {
            box_epsilon: 1e-12,
            max_nodes: 2_000_000,
            contractors: vec![ContractorKind::Hc4, ContractorKind::Newton],
            workers: 1,
        }
    }
}

impl SolveConfig {
    fn validate(&self) {
        assert!(
            self.box_epsilon > 0.0 && self.box_epsilon.is_finite(),
            "box_epsilon must be positive"
        );
        assert!(self.max_nodes > 0, "max_nodes must be positive");
        assert!(self.workers > 0, "workers must be positive");
    }
}

/// Result of a branch-and-prune run. `solutions` are certified boxes,
/// `undecided` are unresolved boxes at the resolution limit (or coarser
/// unprocessed boxes when `budget_exhausted` is set). Both lists are
/// sorted lexicographically by bounds, so equal inputs produce bytewise
/// equal pavings regardless of worker count.
#[derive(Debug, Clone)]
pub struct Paving {
    pub solutions: Vec<IntervalBox>,
    pub undecided: Vec<IntervalBox>,
    pub budget_exhausted: bool,
    pub nodes_processed: u64,
}

impl Paving {
    /// True when the solver proved there are no solutions: every box of the
    /// initial domain was refuted and the node budget was never hit.
    pub fn is_unsat(&self) -> bool {
        self.solutions.is_empty() && self.undecided.is_empty() && !self.budget_exhausted
    }

    /// Hull of every box in the paving; None for an empty paving.
    pub fn hull(&self) -> Option<IntervalBox> {
        let mut it = self.solutions.iter().chain(&self.undecided);
        let first = it.next()?.clone();
        Some(it.fold(first, |acc, b| acc.hull(b)))
    }
}

/// Global minimization of `cost` over the feasible set of `csp`, with every
/// equality g = 0 relaxed to |g| <= relax_eps so the feasible set has volume
/// and points can be certified feasible by interval evaluation.
#[derive(Debug, Clone)]
pub struct OptProblem {
    pub csp: Csp,
    pub cost: Expr,
    pub relax_eps: f64,
}

#[derive(Debug, Clone)]
pub struct OptResult {
    /// Point box for the best relaxed-feasible point found, if any.
    pub incumbent: Option<IntervalBox>,
    /// Certified enclosure of the minimum over the relaxed feasible set:
    /// lo is a lower bound for every relaxed-feasible point, hi is the
    /// certified cost of the incumbent.
    pub cost_bounds: Interval,
    pub budget_exhausted: bool,
    pub nodes_processed: u64,
}

/// Two inequality constraints pinning `var` to `range`, for [`refine`].
pub fn pin(var: &str, range: Interval) -> Vec<Constraint> {
    assert!(!range.is_empty(), "pin range must be nonempty");
    vec![
        Constraint::le0(Expr::var(var).sub(&Expr::constant(range.hi()))),
        Constraint::le0(Expr::constant(range.lo()).sub(&Expr::var(var))),
    ]
}

// ---------------------------------------------------------------------------
// Compiled form shared by every node (and every worker thread).

struct CompiledCon {
    tape: Tape,
    admissible: Interval,
    relation: Relation,
    /// Domain indices this constraint reads, deduplicated.
    vars: Vec<usize>,
}

struct Compiled {
    cons: Vec<CompiledCon>,
    /// For each variable, the constraints that mention it.
    var_to_cons: Vec<Vec<usize>>,
    /// Newton system over the equality bodies; None when there are no
    /// equalities, Newton is not configured, or some equality is not
    /// differentiable.
    newton: Option<NewtonSystem>,
    has_eq: bool,
    use_hc4: bool,
    /// Original search domains; inflation certificates must stay inside.
    domains: IntervalBox,
}

impl Compiled {
    fn build(csp: &Csp, config: &SolveConfig) -> Compiled {
        let names = csp.domains.names();
        let mut cons = Vec::with_capacity(csp.constraints.len());
        let mut var_to_cons = vec![Vec::new(); names.len()];
        for (ci, c) in csp.constraints.iter().enumerate() {
            let tape = Tape::compile(std::slice::from_ref(&c.body), names)
                .expect("Csp::new validated variable coverage");
            let vars: Vec<usize> = c
                .body
                .variables()
                .iter()
                .map(|v| csp.domains.index_of(v).unwrap())
                .collect();
            for &v in &vars {
                var_to_cons[v].push(ci);
            }
            cons.push(CompiledCon {
                tape,
                admissible: c.admissible(),
                relation: c.relation,
                vars,
            });
        }
        let has_eq = csp
            .constraints
            .iter()
            .any(|c| c.relation == Relation::Eq0);
        let use_newton = config.contractors.contains(&ContractorKind::Newton);
        let newton = if use_newton && has_eq {
            let eqs: Vec<Expr> = csp
                .constraints
                .iter()
                .filter(|c| c.relation == Relation::Eq0)
                .map(|c| c.body.clone())
                .collect();
            NewtonSystem::build(&eqs, names).ok()
        } else {
            None
        };
        Compiled {
            cons,
            var_to_cons,
            newton,
            has_eq,
            use_hc4: config.contractors.contains(&ContractorKind::Hc4),
            domains: csp.domains.clone(),
        }
    }

    /// AC-3 style HC4 fixpoint: revise every constraint, re-queueing the
    /// neighbours of any variable that shrank significantly. Returns false
    /// when some constraint is proved infeasible (box contents are then
    /// unspecified).
    fn hc4_fixpoint(&self, b: &mut IntervalBox, s: &mut Scratch) -> bool {
        s.queue.clear();
        s.in_queue.clear();
        s.in_queue.resize(self.cons.len(), true);
        s.queue.extend(0..self.cons.len());
        while let Some(ci) = s.queue.pop_front() {
            s.in_queue[ci] = false;
            let con = &self.cons[ci];
            s.old_w.clear();
            s.old_w
                .extend(con.vars.iter().map(|&v| b.vals()[v].width()));
            if !con
                .tape
                .hc4_revise(con.admissible, b.vals_mut(), &mut s.fwd, &mut s.adj)
            {
                return false;
            }
            for (k, &v) in con.vars.iter().enumerate() {
                if significant_shrink(s.old_w[k], b.vals()[v].width()) {
                    for &cj in &self.var_to_cons[v] {
                        if !s.in_queue[cj] {
                            s.in_queue[cj] = true;
                            s.queue.push_back(cj);
                        }
                    }
                }
            }
        }
        true
    }

    /// Full contraction pass: HC4 fixpoint alternated with interval Newton
    /// until neither makes significant progress. Returns None when the box
    /// is proved infeasible, otherwise whether the final Newton application
    /// certified a unique solution of the equality subsystem.
    fn contract(&self, b: &mut IntervalBox, s: &mut Scratch) -> Option<bool> {
        let mut certified = false;
        for _ in 0..MAX_CONTRACT_ROUNDS {
            if self.use_hc4 && !self.hc4_fixpoint(b, s) {
                return None;
            }
            let Some(newton) = &self.newton else { break };
            s.old_w.clear();
            s.old_w.extend(b.vals().iter().map(|v| v.width()));
            let outcome = newton.contract(b, &mut s.fwd);
            if outcome.empty {
                return None;
            }
            // Sticky: once a pass proves a unique root in the box, later
            // contractions only discard non-solutions, so the certificate
            // keeps holding even when they can no longer shrink strictly.
            certified = certified || outcome.certified;
            let progressed = b
                .vals()
                .iter()
                .zip(&s.old_w)
                .any(|(v, &ow)| significant_shrink(ow, v.width()));
            if !progressed {
                break;
            }
        }
        Some(certified)
    }

    /// Classify a contracted box. Newton may have shrunk the box after the
    /// last HC4 pass, so equalities are re-checked for consistency here.
    fn classify(&self, b: &IntervalBox, s: &mut Scratch, newton_certified: bool) -> Class {
        let mut all_ineq_certain = true;
        // An equality whose enclosure is exactly [0,0] holds at every
        // point of the box; if all equalities do, existence needs no
        // Newton certificate. Covers roots pinned to exact floats (often
        // on the domain boundary), where strict-interior contraction is
        // impossible.
        let mut all_eq_exact = true;
        for con in &self.cons {
            let v = {
                con.tape.forward(b.vals(), &mut s.fwd);
                con.tape.root_value(0, &s.fwd)
            };
            match con.relation {
                Relation::Eq0 => {
                    if !v.contains(0.0) {
                        return Class::Refuted;
                    }
                    if !(v.is_point() && v.lo() == 0.0) {
                        all_eq_exact = false;
                    }
                }
                Relation::Le0 => {
                    // Empty evaluation means the body is undefined on the
                    // whole box (e.g. division by an exact zero), so no
                    // point can satisfy the constraint.
                    if v.is_empty() || v.lo() > 0.0 {
                        return Class::Refuted;
                    }
                    if v.hi() > 0.0 {
                        all_ineq_certain = false;
                    }
                }
            }
        }
        let eq_certified = !self.has_eq || newton_certified || all_eq_exact;
        if eq_certified && all_ineq_certain {
            Class::Solution
        } else {
            Class::Inconclusive
        }
    }

    /// Last-chance certification for an uncertified leaf. HC4 can collapse
    /// a box onto a root faster than Newton runs, leaving it too thin for
    /// the strict-containment test (a 1-ulp box has no interior). Re-running
    /// Newton on a slightly inflated copy restores room for the certificate.
    /// The inflation stays inside the original domains, so pinned (point)
    /// components keep acting as exact parameters and any certified root
    /// still lies in the requested search region.
    fn certify_by_inflation(&self, b: &IntervalBox, s: &mut Scratch) -> Option<IntervalBox> {
        let newton = self.newton.as_ref()?;
        let mut vals = Vec::with_capacity(b.vals().len());
        for (v, dom) in b.vals().iter().zip(self.domains.vals()) {
            // Exact points stay exact parameters. HC4 only deletes
            // non-solutions, so a component it collapsed to [x,x] has value
            // exactly x at every solution of the leaf; inflating it instead
            // would park the root on the inflation boundary whenever x sits
            // on a domain edge (pins, the leading explicit abscissa).
            if v.is_point() {
                vals.push(*v);
                continue;
            }
            let m = v.midpoint()?;
            let h = (4.0 * v.width()).max(m.abs().max(1.0) * 1e-14);
            vals.push(Interval::new(m - h, m + h).intersect(dom));
        }
        let mut nb = b.with_vals(vals);
        let mut certified = false;
        for _ in 0..3 {
            let outcome = newton.contract(&mut nb, &mut s.fwd);
            if outcome.empty {
                return None;
            }
            if outcome.certified {
                certified = true;
                break;
            }
        }
        if !certified {
            return None;
        }
        // The root is in nb; every constraint must still be consistent over
        // the reported box for it to count as a solution (inequalities with
        // certainty, equality residuals at least straddling zero).
        let out = b.hull(&nb);
        for con in &self.cons {
            con.tape.forward(out.vals(), &mut s.fwd);
            let v = con.tape.root_value(0, &s.fwd);
            let ok = match con.relation {
                Relation::Eq0 => v.contains(0.0),
                Relation::Le0 => !v.is_empty() && v.hi() <= 0.0,
            };
            if !ok {
                return None;
            }
        }
        Some(out)
    }
}

enum Class {
    Refuted,
    Solution,
    Inconclusive,
}

/// Per-worker reusable buffers.
#[derive(Default)]
struct Scratch {
    fwd: Vec<Interval>,
    adj: Vec<Interval>,
    queue: VecDeque<usize>,
    in_queue: Vec<bool>,
    old_w: Vec<f64>,
}

fn significant_shrink(old: f64, new: f64) -> bool {
    if old.is_infinite() {
        return new.is_finite();
    }
    old > 0.0 && old - new >= SHRINK_FRACTION * old
}

// ---------------------------------------------------------------------------
// Public contraction entry point.

/// Contract `b` under the constraints of `csp` to a propagation fixpoint
/// without splitting. Sound: only proved-infeasible regions are removed.
/// Returns an all-empty box when the whole input is refuted.
pub fn contract_fixpoint(csp: &Csp, b: &IntervalBox, config: &SolveConfig) -> IntervalBox {
    config.validate();
    assert_eq!(
        csp.domains.names(),
        b.names(),
        "box variables must match the csp"
    );
    let compiled = Compiled::build(csp, config);
    let mut s = Scratch::default();
    let mut out = b.clone();
    match compiled.contract(&mut out, &mut s) {
        Some(_) => out,
        None => {
            let n = b.vals().len();
            b.with_vals(vec![Interval::EMPTY; n])
        }
    }
}

// ---------------------------------------------------------------------------
// Branch and prune.

struct SeqOut {
    solutions: Vec<IntervalBox>,
    undecided: Vec<IntervalBox>,
    /// Stack left unprocessed when a spill target was hit (warmup mode).
    leftover: Vec<IntervalBox>,
    processed: u64,
    exhausted: bool,
}

/// Depth-first worker loop. `spill_at` makes it stop early once the stack
/// grows to that size, handing the remainder back for parallel splitting.
fn run_seq(
    comp: &Compiled,
    mut stack: Vec<IntervalBox>,
    budget: u64,
    eps: f64,
    spill_at: Option<usize>,
) -> SeqOut {
    let mut s = Scratch::default();
    let mut out = SeqOut {
        solutions: Vec::new(),
        undecided: Vec::new(),
        leftover: Vec::new(),
        processed: 0,
        exhausted: false,
    };
    while let Some(mut b) = stack.pop() {
        if out.processed >= budget {
            // Out of budget: everything not yet examined stays in the
            // covering as undecided.
            out.undecided.push(b);
            out.undecided.append(&mut stack);
            out.exhausted = true;
            break;
        }
        out.processed += 1;
        let Some(certified) = comp.contract(&mut b, &mut s) else {
            continue;
        };
        match comp.classify(&b, &mut s, certified) {
            Class::Refuted => continue,
            Class::Solution => {
                out.solutions.push(b);
                continue;
            }
            Class::Inconclusive => {}
        }
        if b.max_relative_width() < eps {
            match comp.certify_by_inflation(&b, &mut s) {
                Some(sol) => out.solutions.push(sol),
                None => out.undecided.push(b),
            }
            continue;
        }
        let (idx, _) = b.widest_relative();
        let (lo, hi) = b.bisect(idx);
        if lo.vals()[idx] == b.vals()[idx] || hi.vals()[idx] == b.vals()[idx] {
            // Bisection cannot split this component any further.
            match comp.certify_by_inflation(&b, &mut s) {
                Some(sol) => out.solutions.push(sol),
                None => out.undecided.push(b),
            }
            continue;
        }
        stack.push(hi);
        stack.push(lo);
        if let Some(target) = spill_at {
            if stack.len() >= target {
                out.leftover = stack;
                break;
            }
        }
    }
    out
}

/// Pave the solution set of `csp`: alternate contraction and bisection until
/// every box is refuted, certified, or below `config.box_epsilon` in relative
/// width. See [`Paving`] for the guarantees.
pub fn branch_and_prune(csp: &Csp, config: &SolveConfig) -> Paving {
    config.validate();
    let comp = Compiled::build(csp, config);
    let root = csp.domains.clone();
    let eps = config.box_epsilon;

    let (mut solutions, mut undecided, mut processed, mut exhausted);
    if config.workers <= 1 {
        let o = run_seq(&comp, vec![root], config.max_nodes, eps, None);
        solutions = o.solutions;
        undecided = o.undecided;
        processed = o.processed;
        exhausted = o.exhausted;
    } else {
        // Sequential warmup to build enough frontier boxes to share out.
        let target = config.workers * 8;
        let warm = run_seq(
            &comp,
            vec![root],
            config.max_nodes.min(4 * target as u64),
            eps,
            Some(target),
        );
        solutions = warm.solutions;
        undecided = warm.undecided;
        processed = warm.processed;
        exhausted = warm.exhausted;
        if !warm.leftover.is_empty() {
            let mut chunks: Vec<Vec<IntervalBox>> = vec![Vec::new(); config.workers];
            for (i, b) in warm.leftover.into_iter().enumerate() {
                chunks[i % config.workers].push(b);
            }
            chunks.retain(|c| !c.is_empty());
            let remaining = config.max_nodes.saturating_sub(processed);
            let per = remaining / chunks.len() as u64;
            let extra = remaining % chunks.len() as u64;
            let outs: Vec<SeqOut> = std::thread::scope(|scope| {
                let comp = &comp;
                let handles: Vec<_> = chunks
                    .into_iter()
                    .enumerate()
                    .map(|(i, chunk)| {
                        let budget = per + if (i as u64) < extra { 1 } else { 0 };
                        scope.spawn(move || run_seq(comp, chunk, budget, eps, None))
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().unwrap()).collect()
            });
            for o in outs {
                solutions.extend(o.solutions);
                undecided.extend(o.undecided);
                processed += o.processed;
                exhausted |= o.exhausted;
            }
        }
    }

    // Only equality pavings are merged: there a solution box means "contains
    // a certified root", which any hull of such boxes preserves. For pure
    // inequality systems a solution box is an inner box (every point
    // feasible), and hulling face-adjacent inner boxes would leak outside
    // the feasible region.
    if comp.has_eq {
        solutions = merge_overlapping(solutions);
    }
    solutions.sort_unstable_by(box_cmp);
    undecided.sort_unstable_by(box_cmp);
    Paving {
        solutions,
        undecided,
        budget_exhausted: exhausted,
        nodes_processed: processed,
    }
}

/// Collapse overlapping solution boxes into their hulls. Certified boxes
/// from disjoint branches are disjoint, but inflation certificates (see
/// `certify_by_inflation`) can poke a few ulps past a leaf and re-prove
/// the root a neighbouring leaf already holds; overlap therefore means
/// the same root, and the hull still encloses it.
fn merge_overlapping(mut boxes: Vec<IntervalBox>) -> Vec<IntervalBox> {
    loop {
        let mut merged_any = false;
        let mut out: Vec<IntervalBox> = Vec::with_capacity(boxes.len());
        'next: for b in boxes {
            for kept in &mut out {
                let overlaps = kept
                    .vals()
                    .iter()
                    .zip(b.vals())
                    .all(|(x, y)| !x.intersect(y).is_empty());
                if overlaps {
                    *kept = kept.hull(&b);
                    merged_any = true;
                    continue 'next;
                }
            }
            out.push(b);
        }
        boxes = out;
        if !merged_any {
            return boxes;
        }
    }
}

/// Lexicographic order on box bounds; total because total_cmp is.
fn box_cmp(a: &IntervalBox, b: &IntervalBox) -> Ordering {
    for (x, y) in a.vals().iter().zip(b.vals()) {
        let o = x
            .lo()
            .total_cmp(&y.lo())
            .then_with(|| x.hi().total_cmp(&y.hi()));
        if o != Ordering::Equal {
            return o;
        }
    }
    Ordering::Equal
}

/// Re-solve `csp` with `pinning` constraints appended. Pins are ordinary
/// constraints (typically interval bounds on single variables from [`pin`]);
/// an empty resulting paving with `is_unsat` true proves the pinning is
/// inconsistent with the system.
pub fn refine(csp: &Csp, pinning: &[Constraint], config: &SolveConfig) -> Paving {
    let mut pinned = csp.clone();
    for c in pinning {
        for var in c.body.variables() {
            assert!(
                pinned.domains.index_of(&var).is_some(),
                "pin references unknown variable '{var}'"
            );
        }
        // Single-variable bounds also tighten the search domain itself, so a
        // point pin keeps its variable a fixed parameter through Newton
        // certification (certificates never inflate past the domain). A pin
        // disjoint from the domain is left to HC4, which refutes it.
        if let Some((name, bound)) = pin_bound(c) {
            let i = pinned.domains.index_of(&name).unwrap();
            let cur = pinned.domains.vals()[i];
            let tightened = cur.intersect(&bound);
            if !tightened.is_empty() {
                pinned.domains.vals_mut()[i] = tightened;
            }
        }
        pinned.constraints.push(c.clone());
    }
    branch_and_prune(&pinned, config)
}

/// Recognize the one-variable bound shapes [`pin`] emits and return the
/// implied half-line. `var - c <= 0` caps the domain at c from above,
/// `c - var <= 0` from below; a pin at zero arrives pre-simplified as a
/// bare `var` or `-var` body.
fn pin_bound(c: &Constraint) -> Option<(String, Interval)> {
    if c.relation != Relation::Le0 {
        return None;
    }
    let below = |x: f64| Interval::new(f64::NEG_INFINITY, x);
    let above = |x: f64| Interval::new(x, f64::INFINITY);
    match c.body.node() {
        Node::Var(n) => Some((n.clone(), below(0.0))),
        Node::Unary(UnOp::Neg, e) => match e.node() {
            Node::Var(n) => Some((n.clone(), above(0.0))),
            _ => None,
        },
        Node::Binary(BinOp::Sub, l, r) => match (l.node(), r.node()) {
            (Node::Var(n), Node::Const(v)) if v.is_point() => Some((n.clone(), below(v.lo()))),
            (Node::Const(v), Node::Var(n)) if v.is_point() => Some((n.clone(), above(v.lo()))),
            _ => None,
        },
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Minimization.

/// Heap node ordered so the smallest cost lower bound pops first, with the
/// insertion sequence number breaking ties deterministically.
struct HeapNode {
    cost_lo: f64,
    seq: u64,
    b: IntervalBox,
}

impl PartialEq for HeapNode {
    fn eq(&self, other: &HeapNode) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapNode {}
impl PartialOrd for HeapNode {
    fn partial_cmp(&self, other: &HeapNode) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapNode {
    fn cmp(&self, other: &HeapNode) -> Ordering {
        // BinaryHeap is a max-heap; reverse so the smallest bound wins.
        other
            .cost_lo
            .total_cmp(&self.cost_lo)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Best-first branch-and-bound minimization over the epsilon-relaxed
/// feasible set. Always sequential: the incumbent update order affects
/// pruning, and determinism here outweighs parallel speedup.
///
/// Guarantees on success: `cost_bounds.lo` <= cost of every relaxed-feasible
/// point, and `cost_bounds.hi` is the certified cost of the incumbent, a
/// point proved feasible for the relaxation by interval evaluation.
pub fn minimize(p: &OptProblem, config: &SolveConfig) -> Result<OptResult, SolverError> {
    config.validate();
    assert!(
        p.relax_eps > 0.0 && p.relax_eps.is_finite(),
        "relax_eps must be positive"
    );
    let names = p.csp.domains.names();
    for var in p.cost.variables() {
        if p.csp.domains.index_of(&var).is_none() {
            return Err(SolverError::UnknownVariable(var));
        }
    }

    // Relax every equality g = 0 to the pair g - eps <= 0, -g - eps <= 0.
    let eps_e = Expr::constant(p.relax_eps);
    let mut relaxed_cons = Vec::new();
    for c in &p.csp.constraints {
        match c.relation {
            Relation::Eq0 => {
                relaxed_cons.push(Constraint::le0(c.body.sub(&eps_e)));
                relaxed_cons.push(Constraint::le0(c.body.neg().sub(&eps_e)));
            }
            Relation::Le0 => relaxed_cons.push(c.clone()),
        }
    }
    let relaxed = Csp {
        domains: p.csp.domains.clone(),
        constraints: relaxed_cons,
    };
    let comp = Compiled::build(&relaxed, config);
    let cost_tape = Tape::compile(std::slice::from_ref(&p.cost), names)
        .expect("cost variables validated above");

    // Float Newton polisher over the unrelaxed equalities. A raw box
    // midpoint only meets a tight relaxation once the box width is below
    // about sqrt(relax_eps), which best-first splitting may never reach;
    // polishing the midpoint onto the equality manifold first makes the
    // probe land, and the point is still verified rigorously afterwards.
    let eq_bodies: Vec<Expr> = p
        .csp
        .constraints
        .iter()
        .filter(|c| c.relation == Relation::Eq0)
        .map(|c| c.body.clone())
        .collect();
    let polisher = if eq_bodies.is_empty() {
        None
    } else {
        NewtonSystem::build(&eq_bodies, names).ok()
    };

    let mut s = Scratch::default();
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    let mut ub = f64::INFINITY;
    let mut incumbent: Option<IntervalBox> = None;
    // Lower bound pool: min over leaf boxes, cost-pruned boxes, and nodes
    // drained at budget exhaustion. Every relaxed-feasible point lies in
    // some box accounted for by one of these.
    let mut pool_lo = f64::INFINITY;
    let mut processed = 0u64;
    let mut exhausted = false;

    let root = p.csp.domains.clone();
    let root_lo = cost_tape.eval_root(0, root.vals()).lo();
    heap.push(HeapNode {
        cost_lo: root_lo,
        seq,
        b: root,
    });

    while let Some(node) = heap.pop() {
        if processed >= config.max_nodes {
            pool_lo = pool_lo.min(node.cost_lo);
            for n in heap.drain() {
                pool_lo = pool_lo.min(n.cost_lo);
            }
            exhausted = true;
            break;
        }
        processed += 1;
        let mut b = node.b;
        if comp.contract(&mut b, &mut s).is_none() {
            continue;
        }
        // Cost window: discard the part of the box whose cost provably
        // exceeds the incumbent.
        if ub.is_finite()
            && !cost_tape.hc4_revise(
                Interval::new(f64::NEG_INFINITY, ub),
                b.vals_mut(),
                &mut s.fwd,
                &mut s.adj,
            )
        {
            continue;
        }
        let cost_iv = cost_tape.eval_root(0, b.vals());
        if cost_iv.is_empty() {
            // Cost undefined on the whole box; no feasible point here can
            // be compared, and the domain restriction elsewhere keeps the
            // bound sound only if such boxes never contain feasible points.
            // Treat conservatively as an undecidable leaf.
            pool_lo = pool_lo.min(f64::NEG_INFINITY);
            continue;
        }
        if cost_iv.lo() >= ub {
            pool_lo = pool_lo.min(cost_iv.lo());
            continue;
        }

        // Midpoint probe: certify feasibility and cost at a point.
        if let Some(mid) = b.midpoint() {
            let feasible = comp.cons.iter().all(|con| {
                con.tape.forward(mid.vals(), &mut s.fwd);
                let v = con.tape.root_value(0, &s.fwd);
                !v.is_empty() && v.hi() <= 0.0
            });
            if feasible {
                let c = cost_tape.eval_root(0, mid.vals());
                if !c.is_empty() && c.hi() < ub {
                    ub = c.hi();
                    incumbent = Some(mid.clone());
                }
            }

            // Polished probe, throttled once an incumbent exists.
            if let Some(ns) = &polisher {
                if incumbent.is_none() || processed % 64 == 0 {
                    let mut x: Vec<f64> = mid.vals().iter().map(|v| v.lo()).collect();
                    if ns.polish(&mut x, &mut s.fwd)
                        && x.iter()
                            .zip(p.csp.domains.vals())
                            .all(|(xi, d)| d.contains(*xi))
                    {
                        let pb = mid.with_vals(x.into_iter().map(Interval::point).collect());
                        let feasible = comp.cons.iter().all(|con| {
                            con.tape.forward(pb.vals(), &mut s.fwd);
                            let v = con.tape.root_value(0, &s.fwd);
                            !v.is_empty() && v.hi() <= 0.0
                        });
                        if feasible {
                            let c = cost_tape.eval_root(0, pb.vals());
                            if !c.is_empty() && c.hi() < ub {
                                ub = c.hi();
                                incumbent = Some(pb);
                            }
                        }
                    }
                }
            }
        }

        if b.max_relative_width() < config.box_epsilon {
            pool_lo = pool_lo.min(cost_iv.lo());
            continue;
        }
        let (idx, _) = b.widest_relative();
        let (lo_b, hi_b) = b.bisect(idx);
        if lo_b.vals()[idx] == b.vals()[idx] || hi_b.vals()[idx] == b.vals()[idx] {
            pool_lo = pool_lo.min(cost_iv.lo());
            continue;
        }
        for child in [lo_b, hi_b] {
            seq += 1;
            heap.push(HeapNode {
                cost_lo: cost_iv.lo(),
                seq,
                b: child,
            });
        }
    }

    if incumbent.is_none() && !exhausted {
        return Err(SolverError::InfeasibleRelaxation);
    }
    let lb = pool_lo.min(ub);
    Ok(OptResult {
        incumbent,
        cost_bounds: Interval::new(lb, ub),
        budget_exhausted: exhausted,
        nodes_processed: processed,
    })
}

// ---------------------------------------------------------------------------
// Export.

/// CSV rendering of a paving: one row per box, a status column plus
/// `<var>_lo`/`<var>_hi` columns. Bounds print in shortest round-trip
/// form, so parsing them back reproduces the exact binary values.
pub fn paving_csv(p: &Paving) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    let Some(sample) = p.solutions.first().or_else(|| p.undecided.first()) else {
        out.push_str("status\n");
        return out;
    };
    for n in sample.names() {
        let _ = write!(out, "{n}_lo,{n}_hi,");
    }
    out.push_str("status\n");
    for (list, tag) in [(&p.solutions, "solution"), (&p.undecided, "undecided")] {
        for b in list {
            for v in b.vals() {
                let _ = write!(out, "{},{},", v.lo(), v.hi());
            }
            out.push_str(tag);
            out.push('\n');
        }
    }
    out
}
