//! rkderive: derive, optimize, verify, and analyze Runge-Kutta methods
//! with validated interval arithmetic.
//!
//! Exit codes are a stable contract: 0 success, 1 a requested check
//! failed, 2 usage or parse error, 3 proven infeasible, 4 search budget
//! or resolution exhausted without a certificate.

mod pins;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rkderive::expr::Expr;
use rkderive::interval::{Interval, IntervalBox};
use rkderive::properties::{
    algebraic_stability_check, explicit_step, pave_stability, symplecticity_check,
    StabilityClass, StabilityVerdict,
};
use rkderive::solver::{
    branch_and_prune, minimize, pin, refine, Csp, OptProblem, Paving, SolveConfig,
};
use rkderive::tableau::{
    build_cost, build_csp, parse as parse_tableau, serialize as serialize_tableau,
    ButcherTableau, COrder, MethodSpec,
};
use rkderive::trees::{coefficients, elementary_weight, enumerate};

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_UNSAT: u8 = 3;
const EXIT_BUDGET: u8 = 4;

#[derive(Parser)]
#[command(
    name = "rkderive",
    about = "Validated derivation and analysis of Runge-Kutta methods",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Derive all methods with the requested structure and order.
    Derive(DeriveArgs),
    /// Minimize the distance to a higher order, optionally refining a
    /// pinned region into a validated tableau.
    Optimize(OptimizeArgs),
    /// Check order conditions and optional properties of a tableau file.
    Verify(VerifyArgs),
    /// Pave the linear stability domain of an explicit method to CSV.
    Pave(PaveArgs),
    /// Integrate y' = lambda y with an explicit method (demo stepper).
    Step(StepArgs),
    /// List rooted trees and their order-condition data.
    Trees(TreesArgs),
}

#[derive(Args)]
struct StructureArgs {
    /// Number of stages.
    #[arg(long)]
    stages: usize,
    /// Requested order (exact order conditions up to this order).
    #[arg(long)]
    order: u32,
    /// Strictly lower triangular A.
    #[arg(long, conflicts_with_all = ["dirk", "sdirk"])]
    explicit: bool,
    /// Lower triangular A (diagonally implicit).
    #[arg(long, conflicts_with = "sdirk")]
    dirk: bool,
    /// Lower triangular A with a single repeated diagonal entry.
    #[arg(long)]
    sdirk: bool,
    /// Force the first row of A to zero (first stage explicit).
    #[arg(long)]
    explicit_first_line: bool,
    /// Last row of A equals b.
    #[arg(long)]
    stiffly_accurate: bool,
    /// Ordering imposed on the c abscissae.
    #[arg(long, value_enum, default_value_t = COrderArg::Strict)]
    c_order: COrderArg,
}

#[derive(Args)]
struct SolverArgs {
    /// Relative box width below which search stops refining.
    #[arg(long, default_value_t = 1e-12)]
    eps: f64,
    /// Node budget for branch-and-prune / branch-and-bound.
    #[arg(long, default_value_t = 2_000_000)]
    max_nodes: u64,
    /// Worker threads for branch-and-prune (results are identical for
    /// every worker count).
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct DeriveArgs {
    #[command(flatten)]
    structure: StructureArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Output tableau file; solution k of n > 1 goes to FILE-k.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OptimizeArgs {
    #[command(flatten)]
    structure: StructureArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Order whose conditions form the cost (must exceed --order).
    #[arg(long)]
    target_order: u32,
    /// Slack applied to every equality during minimization.
    #[arg(long, default_value_t = 1e-9)]
    relax_eps: f64,
    /// Pin file (`name range` lines); triggers a validated refine pass.
    #[arg(long)]
    pin: Option<PathBuf>,
    /// Output tableau file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// Tableau file to check.
    file: PathBuf,
    /// Order to verify by inclusion.
    #[arg(long)]
    order: u32,
    /// Also require M = b_i a_ij + b_j a_ji - b_i b_j to contain zero.
    #[arg(long)]
    symplectic: bool,
    /// Also require algebraic stability (b >= 0, M positive semidefinite).
    #[arg(long)]
    algebraic_stability: bool,
}

#[derive(Args)]
struct PaveArgs {
    /// Tableau file of an explicit method.
    file: PathBuf,
    #[arg(long, default_value_t = -5.0, allow_negative_numbers = true)]
    xmin: f64,
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    xmax: f64,
    #[arg(long, default_value_t = -4.0, allow_negative_numbers = true)]
    ymin: f64,
    #[arg(long, default_value_t = 4.0, allow_negative_numbers = true)]
    ymax: f64,
    /// Boxes still undecided at this width are classified boundary.
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
    /// Output CSV (x_lo,x_hi,y_lo,y_hi,class).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StepArgs {
    /// Tableau file of an explicit method.
    #[arg(long)]
    file: PathBuf,
    /// Step size.
    #[arg(long, allow_negative_numbers = true)]
    h: f64,
    /// Number of steps.
    #[arg(long, default_value_t = 10)]
    steps: u32,
    /// Initial state, comma separated.
    #[arg(long, default_value = "1.0", allow_hyphen_values = true)]
    y0: String,
    /// Coefficient of the test field y' = lambda y.
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    lambda: f64,
    /// Initial time.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    t0: f64,
}

#[derive(Args)]
struct TreesArgs {
    /// Largest tree order to list (at most 8).
    #[arg(long)]
    max_order: u32,
    /// Stage count used to spell out the elementary weights.
    #[arg(long, default_value_t = 2)]
    stages: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum COrderArg {
    Strict,
    Weak,
    None,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.cmd {
        Cmd::Derive(a) => cmd_derive(&a),
        Cmd::Optimize(a) => cmd_optimize(&a),
        Cmd::Verify(a) => cmd_verify(&a),
        Cmd::Pave(a) => cmd_pave(&a),
        Cmd::Step(a) => cmd_step(&a),
        Cmd::Trees(a) => cmd_trees(&a),
    };
    ExitCode::from(code)
}

// ---------------------------------------------------------------------------
// Shared plumbing.

fn method_spec(s: &StructureArgs) -> Result<MethodSpec, u8> {
    let mut spec = MethodSpec::new(s.stages, s.order);
    spec.explicit = s.explicit;
    spec.dirk = s.dirk || s.sdirk;
    spec.singly = s.sdirk;
    spec.explicit_first_line = s.explicit_first_line;
    spec.stiffly_accurate = s.stiffly_accurate;
    spec.c_order = match s.c_order {
        COrderArg::Strict => COrder::Strict,
        COrderArg::Weak => COrder::Weak,
        COrderArg::None => COrder::None,
    };
    spec.validate().map_err(|e| {
        eprintln!("error: {e}");
        EXIT_USAGE
    })?;
    Ok(spec)
}

fn spec_flags(spec: &MethodSpec) -> Vec<String> {
    let mut flags = Vec::new();
    if spec.explicit {
        flags.push("explicit".to_string());
    }
    if spec.dirk {
        flags.push("dirk".to_string());
    }
    if spec.singly {
        flags.push("singly".to_string());
    }
    if spec.explicit_first_line {
        flags.push("explicitFirstLine".to_string());
    }
    if spec.stiffly_accurate {
        flags.push("stifflyAccurate".to_string());
    }
    flags
}

fn solve_config(s: &SolverArgs) -> Result<SolveConfig, u8> {
    if !(s.eps > 0.0 && s.eps.is_finite()) || s.max_nodes == 0 || s.workers == 0 {
        eprintln!("error: --eps must be positive, --max-nodes and --workers at least 1");
        return Err(EXIT_USAGE);
    }
    let mut config = SolveConfig::default();
    config.box_epsilon = s.eps;
    config.max_nodes = s.max_nodes;
    config.workers = s.workers;
    Ok(config)
}

/// FILE for a single solution, FILE's stem + "-k" + extension otherwise.
fn numbered_path(out: &Path, k: usize, total: usize) -> PathBuf {
    if total <= 1 {
        return out.to_path_buf();
    }
    let stem = out.file_stem().unwrap_or_default().to_string_lossy();
    let name = match out.extension() {
        Some(ext) => format!("{stem}-{k}.{}", ext.to_string_lossy()),
        None => format!("{stem}-{k}"),
    };
    out.with_file_name(name)
}

fn out_name(out: &Path) -> String {
    out.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "method".to_string())
}

fn write_text(path: &Path, text: &str) -> Result<(), u8> {
    std::fs::write(path, text).map_err(|e| {
        eprintln!("error: cannot write {}: {e}", path.display());
        EXIT_USAGE
    })
}

fn read_tableau(path: &Path) -> Result<ButcherTableau, u8> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        EXIT_USAGE
    })?;
    parse_tableau(&text).map_err(|e| {
        eprintln!("{}:{}:{}: {}", path.display(), e.line, e.col, e.msg);
        EXIT_USAGE
    })
}

/// Write every certified solution of `paving` as a tableau file, or the
/// hull of the undecided boxes when nothing was certified. Returns the
/// exit code matching the paving outcome.
fn emit_paving(
    paving: &Paving,
    spec: &MethodSpec,
    out: &Path,
    flags: Vec<String>,
) -> u8 {
    println!("nodes processed: {}", paving.nodes_processed);
    println!("certified solutions: {}", paving.solutions.len());
    println!("undecided boxes: {}", paving.undecided.len());
    if !paving.solutions.is_empty() {
        let total = paving.solutions.len();
        for (i, sol) in paving.solutions.iter().enumerate() {
            let t = match ButcherTableau::from_box(sol, spec.s, spec.p, &out_name(out)) {
                Ok(mut t) => {
                    t.flags = flags.clone();
                    t
                }
                Err(e) => {
                    eprintln!("error: solution has unexpected shape: {e}");
                    return EXIT_USAGE;
                }
            };
            let path = numbered_path(out, i + 1, total);
            if let Err(code) = write_text(&path, &serialize_tableau(&t)) {
                return code;
            }
            println!("wrote {}", path.display());
        }
        return 0;
    }
    if paving.is_unsat() {
        println!("proven infeasible: no method satisfies the requested constraints");
        return EXIT_UNSAT;
    }
    if let Some(hull) = paving.hull() {
        if let Ok(mut t) = ButcherTableau::from_box(&hull, spec.s, spec.p, &out_name(out)) {
            let mut flags = flags;
            flags.push("hull".to_string());
            t.flags = flags;
            let mut text = String::from(
                "# hull of the undecided boxes; no solution was certified\n",
            );
            text.push_str(&serialize_tableau(&t));
            if let Err(code) = write_text(out, &text) {
                return code;
            }
            println!("wrote unvalidated hull to {}", out.display());
        }
    }
    if paving.budget_exhausted {
        println!("node budget exhausted before the search completed");
    } else {
        println!("resolution limit reached without a certificate");
    }
    EXIT_BUDGET
}

// ---------------------------------------------------------------------------
// Subcommands.

fn cmd_derive(args: &DeriveArgs) -> u8 {
    let spec = match method_spec(&args.structure) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let config = match solve_config(&args.solver) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let csp = match build_csp(&spec) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    println!(
        "csp: {} variables, {} constraints",
        csp.domains().len(),
        csp.constraints().len()
    );
    let paving = branch_and_prune(&csp, &config);
    emit_paving(&paving, &spec, &args.out, spec_flags(&spec))
}

fn cmd_optimize(args: &OptimizeArgs) -> u8 {
    let spec = match method_spec(&args.structure) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let config = match solve_config(&args.solver) {
        Ok(c) => c,
        Err(code) => return code,
    };
    if args.target_order <= spec.p {
        eprintln!("error: --target-order must exceed --order");
        return EXIT_USAGE;
    }
    if !(args.relax_eps > 0.0 && args.relax_eps.is_finite()) {
        eprintln!("error: --relax-eps must be positive");
        return EXIT_USAGE;
    }
    let csp = match build_csp(&spec) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let cost = match target_cost(&spec, args.target_order) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let problem = OptProblem {
        csp: csp.clone(),
        cost,
        relax_eps: args.relax_eps,
    };
    let result = match minimize(&problem, &config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    println!("cost enclosure: {}", result.cost_bounds);
    println!("nodes processed: {}", result.nodes_processed);
    if result.budget_exhausted {
        println!("note: node budget exhausted, the lower bound may be loose");
    }

    if let Some(pin_path) = &args.pin {
        let pin_list = match load_pins(pin_path, &csp) {
            Ok(p) => p,
            Err(code) => return code,
        };
        println!("refining with {} pinned variables", pin_list.len() / 2);
        let paving = refine(&csp, &pin_list, &config);
        return emit_paving(&paving, &spec, &args.out, spec_flags(&spec));
    }

    match &result.incumbent {
        Some(best) => {
            let mut t = match ButcherTableau::from_box(best, spec.s, spec.p, &out_name(&args.out))
            {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: incumbent has unexpected shape: {e}");
                    return EXIT_USAGE;
                }
            };
            let mut flags = spec_flags(&spec);
            flags.push("relaxed".to_string());
            t.flags = flags;
            let mut text = format!(
                "# relaxed incumbent (equalities within {}), not validated\n# cost enclosure {}\n",
                args.relax_eps, result.cost_bounds
            );
            text.push_str(&serialize_tableau(&t));
            if let Err(code) = write_text(&args.out, &text) {
                return code;
            }
            println!("wrote relaxed incumbent to {}", args.out.display());
            0
        }
        None if result.budget_exhausted => {
            println!("no feasible point found within the node budget");
            EXIT_BUDGET
        }
        None => {
            println!("proven infeasible: the relaxed constraint set is empty");
            EXIT_UNSAT
        }
    }
}

/// Squared order-condition residuals summed over every order from just
/// above the base order up to the target.
fn target_cost(spec: &MethodSpec, target: u32) -> Result<Expr, rkderive::tableau::TableauError> {
    let mut cost = build_cost(spec)?;
    for p in spec.p + 1..target {
        let mut higher = spec.clone();
        higher.p = p;
        cost = cost.add(&build_cost(&higher)?);
    }
    Ok(cost)
}

fn load_pins(path: &Path, csp: &Csp) -> Result<Vec<rkderive::expr::Constraint>, u8> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        EXIT_USAGE
    })?;
    let pairs = pins::parse_pins(&text).map_err(|e| {
        eprintln!("{}: {e}", path.display());
        EXIT_USAGE
    })?;
    let mut out = Vec::new();
    for (name, range) in pairs {
        if csp.domains().index_of(&name).is_none() {
            eprintln!(
                "error: pin references '{name}', which is not a variable of this problem"
            );
            return Err(EXIT_USAGE);
        }
        out.extend(pin(&name, range));
    }
    Ok(out)
}

fn cmd_verify(args: &VerifyArgs) -> u8 {
    let t = match read_tableau(&args.file) {
        Ok(t) => t,
        Err(code) => return code,
    };
    let report = match rkderive::tableau::verify_order(&t, args.order) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    for row in &report.rows {
        println!(
            "order {} tree {:<12} phi {} target {}{}",
            row.order,
            row.tree.to_string(),
            row.weight,
            row.target,
            if row.contains { "" } else { "  MISS" }
        );
    }
    println!(
        "order {} check: {}",
        args.order,
        if report.verified { "PASS" } else { "FAIL" }
    );
    println!(
        "distance to order {}: {}",
        args.order + 1,
        report.next_order_distance
    );
    let mut all_ok = report.verified;

    if args.symplectic {
        let rep = symplecticity_check(&t);
        for i in 0..rep.m.size() {
            let row: Vec<String> = (0..rep.m.size())
                .map(|j| rep.m.entry(i, j).to_string())
                .collect();
            println!("M[{i}] {}", row.join(" "));
        }
        println!(
            "symplectic check: {}",
            if rep.symplectic { "PASS" } else { "FAIL" }
        );
        all_ok &= rep.symplectic;
    }

    if args.algebraic_stability {
        match algebraic_stability_check(&t) {
            Ok(rep) => {
                let verdict = match rep.verdict {
                    StabilityVerdict::Stable => "stable",
                    StabilityVerdict::NotStable => "notStable",
                    StabilityVerdict::Unknown => "unknown",
                };
                println!("algebraic stability: {verdict}");
                if let Some(w) = rep.witness {
                    println!("negative eigenvalue witness: {w}");
                }
                if let Some(i) = rep.negative_weight {
                    println!("negative weight: b{i}");
                }
                all_ok &= rep.verdict == StabilityVerdict::Stable;
            }
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        }
    }
    if all_ok {
        0
    } else {
        EXIT_CHECK_FAILED
    }
}

fn cmd_pave(args: &PaveArgs) -> u8 {
    let t = match read_tableau(&args.file) {
        Ok(t) => t,
        Err(code) => return code,
    };
    let paving = match pave_stability(
        &t,
        Interval::new(args.xmin, args.xmax),
        Interval::new(args.ymin, args.ymax),
        args.eps,
    ) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let count = |class| {
        paving
            .boxes
            .iter()
            .filter(|(_, _, c)| *c == class)
            .count()
    };
    println!(
        "inside: {} boxes, area {:.6}",
        count(StabilityClass::Inside),
        paving.area(StabilityClass::Inside)
    );
    println!(
        "outside: {} boxes, area {:.6}",
        count(StabilityClass::Outside),
        paving.area(StabilityClass::Outside)
    );
    println!(
        "boundary: {} boxes, area {:.6}",
        count(StabilityClass::Boundary),
        paving.area(StabilityClass::Boundary)
    );
    if let Err(code) = write_text(&args.out, &paving.csv()) {
        return code;
    }
    println!("wrote {}", args.out.display());
    0
}

fn cmd_step(args: &StepArgs) -> u8 {
    let t = match read_tableau(&args.file) {
        Ok(t) => t,
        Err(code) => return code,
    };
    let y0: Result<Vec<f64>, _> = args
        .y0
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect();
    let y0 = match y0 {
        Ok(v) if !v.is_empty() => v,
        _ => {
            eprintln!("error: --y0 must be a comma separated list of numbers");
            return EXIT_USAGE;
        }
    };
    let names: Vec<String> = if y0.len() == 1 {
        vec!["y".to_string()]
    } else {
        (0..y0.len()).map(|i| format!("y{i}")).collect()
    };
    let field: Vec<Expr> = names
        .iter()
        .map(|n| Expr::constant(args.lambda).mul(&Expr::var(n)))
        .collect();
    let pairs: Vec<(&str, Interval)> = names
        .iter()
        .zip(&y0)
        .map(|(n, &v)| (n.as_str(), Interval::point(v)))
        .collect();
    let mut state = IntervalBox::from_pairs(&pairs);
    let mut time = Interval::point(args.t0);
    let h = Interval::point(args.h);
    println!("step 0 t {time} y {}", fmt_vals(&state));
    for k in 1..=args.steps {
        state = match explicit_step(&t, &field, time, &state, h) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        };
        time = time.add(&h);
        println!("step {k} t {time} y {}", fmt_vals(&state));
    }
    0
}

fn fmt_vals(b: &IntervalBox) -> String {
    b.vals()
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn cmd_trees(args: &TreesArgs) -> u8 {
    if args.max_order < 1 || args.max_order > 8 {
        eprintln!("error: --max-order must be between 1 and 8");
        return EXIT_USAGE;
    }
    if args.stages < 1 {
        eprintln!("error: --stages must be at least 1");
        return EXIT_USAGE;
    }
    let mut total = 0usize;
    for r in 1..=args.max_order {
        let mut trees = match enumerate(r) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        };
        // Table order: by density within each order, matching the usual
        // presentation of the condition list.
        trees.sort_by_key(|t| coefficients(t).gamma);
        println!("order {r}: {} trees", trees.len());
        for t in &trees {
            let co = coefficients(t);
            let phi = elementary_weight(t, args.stages, true);
            println!(
                "  tree {:<14} gamma {:<6} alpha {:<5} phi {}",
                t.to_string(),
                co.gamma,
                co.alpha,
                phi
            );
        }
        total += trees.len();
    }
    println!("total conditions through order {}: {total}", args.max_order);
    0
}
