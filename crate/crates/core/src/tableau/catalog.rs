//! Reference tableaux with rigorous interval entries.
//!
//! Entries come in three flavors. Dyadic and small-rational coefficients
//! are stored exactly (points, or one-ulp rational enclosures). Closed
//! forms with square roots are evaluated in interval arithmetic from
//! exact inputs, giving enclosures a few ulps wide. Methods without a
//! closed form (s3o4, erk-3-3) are frozen from high-precision solves as
//! decimal literals widened outward, so the true coefficients stay
//! inside. Two deliberately perturbed variants exist to exercise the
//! property checkers' failure detection; their declared order is only
//! what still survives the perturbation.

use crate::interval::Interval;
use crate::tableau::ButcherTableau;
use crate::trees::Rational;

fn pt(x: f64) -> Interval {
    Interval::point(x)
}

fn r(num: i64, den: i64) -> Interval {
    Rational::new(num, den).to_interval()
}

/// Outward enclosure of a decimal printed from a high-precision solve.
fn dec(s: &str) -> Interval {
    Interval::enclose_decimal(s).expect("catalog decimal literal")
}

/// Compressed bracket-digit literal, e.g. "0.19590[599,600]".
fn br(s: &str) -> Interval {
    s.parse().expect("catalog bracket literal")
}

fn entry(
    name: &str,
    order: u32,
    flags: &[&str],
    a: Vec<Vec<Interval>>,
    b: Vec<Interval>,
    c: Vec<Interval>,
) -> ButcherTableau {
    let mut t = ButcherTableau::new(name, order, a, b, c).expect("catalog shape");
    t.flags = flags.iter().map(|f| f.to_string()).collect();
    t
}

/// The classic fourth-order method.
pub fn rk4() -> ButcherTableau {
    entry(
        "rk4",
        4,
        &["explicit"],
        vec![
            vec![pt(0.0), pt(0.0), pt(0.0), pt(0.0)],
            vec![pt(0.5), pt(0.0), pt(0.0), pt(0.0)],
            vec![pt(0.0), pt(0.5), pt(0.0), pt(0.0)],
            vec![pt(0.0), pt(0.0), pt(1.0), pt(0.0)],
        ],
        vec![r(1, 6), r(1, 3), r(1, 3), r(1, 6)],
        vec![pt(0.0), pt(0.5), pt(0.5), pt(1.0)],
    )
}

/// Heun's two-stage second-order method (alpha = 1).
pub fn heun() -> ButcherTableau {
    entry(
        "heun",
        2,
        &["explicit"],
        vec![vec![pt(0.0), pt(0.0)], vec![pt(1.0), pt(0.0)]],
        vec![pt(0.5), pt(0.5)],
        vec![pt(0.0), pt(1.0)],
    )
}

/// Explicit midpoint method (alpha = 1/2).
pub fn midpoint() -> ButcherTableau {
    entry(
        "midpoint",
        2,
        &["explicit"],
        vec![vec![pt(0.0), pt(0.0)], vec![pt(0.5), pt(0.0)]],
        vec![pt(0.0), pt(1.0)],
        vec![pt(0.0), pt(0.5)],
    )
}

/// Kutta's three-stage third-order method.
pub fn kutta33() -> ButcherTableau {
    entry(
        "kutta-3-3",
        3,
        &["explicit"],
        vec![
            vec![pt(0.0), pt(0.0), pt(0.0)],
            vec![pt(0.5), pt(0.0), pt(0.0)],
            vec![pt(-1.0), pt(2.0), pt(0.0)],
        ],
        vec![r(1, 6), r(2, 3), r(1, 6)],
        vec![pt(0.0), pt(0.5), pt(1.0)],
    )
}

/// Ralston's two-stage method, minimal order-3 residual among
/// second-order explicit two-stage schemes.
pub fn ralston() -> ButcherTableau {
    entry(
        "ralston",
        2,
        &["explicit"],
        vec![vec![pt(0.0), pt(0.0)], vec![r(2, 3), pt(0.0)]],
        vec![pt(0.25), pt(0.75)],
        vec![pt(0.0), r(2, 3)],
    )
}

/// Two-stage Gauss-Legendre collocation, order 4.
pub fn gauss_legendre2() -> ButcherTableau {
    let s3 = pt(3.0).sqrt();
    let half = pt(0.5);
    let quarter = pt(0.25);
    let six = pt(6.0);
    entry(
        "gauss-legendre-2",
        4,
        &[],
        vec![
            vec![quarter, quarter.sub(&s3.div(&six))],
            vec![quarter.add(&s3.div(&six)), quarter],
        ],
        vec![half, half],
        vec![half.sub(&s3.div(&six)), half.add(&s3.div(&six))],
    )
}

/// Three-stage Gauss-Legendre collocation, order 6.
pub fn gauss_legendre3() -> ButcherTableau {
    let s15 = pt(15.0).sqrt();
    let half = pt(0.5);
    entry(
        "gauss-legendre-3",
        6,
        &[],
        vec![
            vec![
                r(5, 36),
                r(2, 9).sub(&s15.div(&pt(15.0))),
                r(5, 36).sub(&s15.div(&pt(30.0))),
            ],
            vec![
                r(5, 36).add(&s15.div(&pt(24.0))),
                r(2, 9),
                r(5, 36).sub(&s15.div(&pt(24.0))),
            ],
            vec![
                r(5, 36).add(&s15.div(&pt(30.0))),
                r(2, 9).add(&s15.div(&pt(15.0))),
                r(5, 36),
            ],
        ],
        vec![r(5, 18), r(4, 9), r(5, 18)],
        vec![half.sub(&s15.div(&pt(10.0))), half, half.add(&s15.div(&pt(10.0)))],
    )
}

/// Three-stage Lobatto IIIC, order 4, algebraically stable.
pub fn lobatto_iiic3() -> ButcherTableau {
    entry(
        "lobatto-iiic-3",
        4,
        &["stifflyAccurate"],
        vec![
            vec![r(1, 6), r(-1, 3), r(1, 6)],
            vec![r(1, 6), r(5, 12), r(-1, 12)],
            vec![r(1, 6), r(2, 3), r(1, 6)],
        ],
        vec![r(1, 6), r(2, 3), r(1, 6)],
        vec![pt(0.0), pt(0.5), pt(1.0)],
    )
}

/// Three-stage Lobatto IIIA, order 4, not algebraically stable.
pub fn lobatto_iiia3() -> ButcherTableau {
    entry(
        "lobatto-iiia-3",
        4,
        &["explicitFirstLine", "stifflyAccurate"],
        vec![
            vec![pt(0.0), pt(0.0), pt(0.0)],
            vec![r(5, 24), r(1, 3), r(-1, 24)],
            vec![r(1, 6), r(2, 3), r(1, 6)],
        ],
        vec![r(1, 6), r(2, 3), r(1, 6)],
        vec![pt(0.0), pt(0.5), pt(1.0)],
    )
}

/// Two-stage Radau IIA, order 3, stiffly accurate.
pub fn radau_iia2() -> ButcherTableau {
    entry(
        "radau-iia-2",
        3,
        &["stifflyAccurate"],
        vec![vec![r(5, 12), r(-1, 12)], vec![pt(0.75), pt(0.25)]],
        vec![pt(0.75), pt(0.25)],
        vec![r(1, 3), pt(1.0)],
    )
}

/// Singly-implicit stiffly accurate three-stage method of order 4, with
/// diagonal (3 - sqrt(3))/12. No closed form is known for the
/// off-diagonal entries; they are frozen from a 60-digit solve of the
/// eight order-4 conditions.
pub fn s3o4() -> ButcherTableau {
    let lam = dec("0.1056624327025935588727128048745106360881");
    let b0 = dec("0.388545388339147153634181410988489279349408");
    let b1 = dec("0.505792178958259287493105784137000084562492");
    entry(
        "s3o4",
        4,
        &["singly", "stifflyAccurate"],
        vec![
            vec![
                lam,
                dec("0.172855006561560752275998738215343097228135"),
                dec("-0.117419482603582260408943318045696268880739"),
            ],
            vec![
                dec("0.482099622053208611737624966049853709348952"),
                lam,
                dec("0.0681272866914064552680324186550100983917515"),
            ],
            vec![b0, b1, lam],
        ],
        vec![b0, b1, lam],
        vec![
            dec("0.161097956660572050739768225044157464435495"),
            dec("0.655889341447208625878370189579374443828803"),
            pt(1.0),
        ],
    )
}

/// Three-stage fifth-order method with an explicit first line: Radau I
/// collocation on the left Radau points, order 2s - 1.
pub fn s3o5() -> ButcherTableau {
    let s6 = pt(6.0).sqrt();
    let six = pt(6.0);
    entry(
        "s3o5",
        5,
        &["explicitFirstLine"],
        vec![
            vec![pt(0.0), pt(0.0), pt(0.0)],
            vec![
                pt(9.0).add(&s6).div(&pt(75.0)),
                pt(24.0).add(&s6).div(&pt(120.0)),
                pt(168.0).sub(&pt(73.0).mul(&s6)).div(&pt(600.0)),
            ],
            vec![
                pt(9.0).sub(&s6).div(&pt(75.0)),
                pt(168.0).add(&pt(73.0).mul(&s6)).div(&pt(600.0)),
                pt(24.0).sub(&s6).div(&pt(120.0)),
            ],
        ],
        vec![
            r(1, 9),
            pt(16.0).add(&s6).div(&pt(36.0)),
            pt(16.0).sub(&s6).div(&pt(36.0)),
        ],
        vec![pt(0.0), six.sub(&s6).div(&pt(10.0)), six.add(&s6).div(&pt(10.0))],
    )
}

/// Explicit three-stage third-order method minimizing the order-4
/// residual. No closed form; entries frozen as the published bracket
/// enclosures of the optimizing solve.
pub fn erk33() -> ButcherTableau {
    let c1 = br("0.4659048[706,929]");
    entry(
        "erk-3-3",
        3,
        &["explicit"],
        vec![
            vec![pt(0.0), pt(0.0), pt(0.0)],
            vec![c1, pt(0.0), pt(0.0)],
            vec![br("-0.154577[20,17]"), br("0.9552627[48,86]"), pt(0.0)],
        ],
        vec![
            br("0.19590[599,600]"),
            br("0.42961[399,400]"),
            br("0.3744800[0,1]"),
        ],
        vec![pt(0.0), c1, br("0.8006855[74,83]")],
    )
}

/// gauss-legendre-3 with a_12 collapsed to a single low-precision float,
/// off the true value by about 7e-9. Breaks symplecticity (and order 3)
/// at that scale; kept to exercise the checkers. Declared order 2: the
/// surviving conditions involve only b and c.
pub fn perturbed_gauss_legendre3() -> ButcherTableau {
    let mut t = gauss_legendre3();
    t.name = "gauss-legendre-3-perturbed".into();
    t.declared_order = 2;
    t.a[0][1] = pt(-0.035976674407720566);
    t
}

/// lobatto-iiic-3 with 1e-9 subtracted from a_11. Destroys algebraic
/// stability by a hair; kept to exercise the stability checker.
pub fn perturbed_lobatto_iiic3() -> ButcherTableau {
    let mut t = lobatto_iiic3();
    t.name = "lobatto-iiic-3-perturbed".into();
    t.declared_order = 2;
    t.a[1][1] = pt(5.0 / 12.0 - 1.0e-9);
    t
}

pub fn all() -> Vec<ButcherTableau> {
    vec![
        rk4(),
        heun(),
        midpoint(),
        kutta33(),
        ralston(),
        gauss_legendre2(),
        gauss_legendre3(),
        lobatto_iiic3(),
        lobatto_iiia3(),
        radau_iia2(),
        s3o4(),
        s3o5(),
        erk33(),
        perturbed_gauss_legendre3(),
        perturbed_lobatto_iiic3(),
    ]
}

pub fn find(name: &str) -> Option<ButcherTableau> {
    all().into_iter().find(|t| t.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tableau::verify_order;

    #[test]
    fn names_are_unique_and_findable() {
        let entries = all();
        for t in &entries {
            assert_eq!(find(&t.name).unwrap().name, t.name);
        }
        let mut names: Vec<_> = entries.iter().map(|t| t.name.clone()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), entries.len());
    }

    #[test]
    fn every_entry_verifies_at_its_declared_order() {
        for t in all() {
            let report = verify_order(&t, t.declared_order).unwrap();
            for row in &report.rows {
                assert!(
                    row.contains,
                    "{}: order-{} condition {} = {} misses {}",
                    t.name,
                    row.order,
                    row.tree,
                    row.weight,
                    row.target
                );
            }
            assert!(report.verified, "{}", t.name);
        }
    }

    #[test]
    fn declared_orders_are_sharp_for_unperturbed_entries() {
        for t in all() {
            if t.name.contains("perturbed") {
                continue;
            }
            let next = verify_order(&t, t.declared_order + 1).unwrap();
            assert!(
                !next.verified,
                "{} unexpectedly verifies at order {}",
                t.name,
                t.declared_order + 1
            );
        }
    }

    #[test]
    fn row_sums_are_consistent() {
        for t in all() {
            let perturbed = t.name.contains("perturbed");
            for (i, res) in t.row_sum_residuals().iter().enumerate() {
                if perturbed {
                    // The perturbations move one A entry by < 1e-8 without
                    // touching c, so the residual is small but nonzero.
                    assert!(res.lo().abs() < 1e-8, "{} row {i}: {res}", t.name);
                } else {
                    assert!(res.contains(0.0), "{} row {i}: {res}", t.name);
                }
            }
        }
    }

    #[test]
    fn entries_stay_tight() {
        // Frozen-decimal and bracket entries are the widest; nothing in
        // the catalog should be wider than the published bracket scale.
        for t in all() {
            for v in t.a.iter().flatten().chain(&t.b).chain(&t.c) {
                assert!(v.width() <= 1e-7, "{}: entry {v} too wide", t.name);
            }
        }
    }

    /// Published brackets round each endpoint to its nearest decimal, so
    /// a tighter enclosure can poke out by up to one unit in the last
    /// printed digit; widen by that unit before asking for containment.
    fn rounded(bracket: &str, unit: f64) -> Interval {
        let iv = br(bracket);
        Interval::new(iv.lo() - unit, iv.hi() + unit)
    }

    #[test]
    fn gauss_legendre2_matches_published_brackets() {
        let t = gauss_legendre2();
        assert!(t.c[0].is_subset(&rounded("0.21132486540[5,6]", 1e-12)));
        assert!(t.c[1].is_subset(&rounded("0.78867513459[5,6]", 1e-12)));
        assert!(t.a[0][1].is_subset(&rounded("-0.038675134594[9,8]", 1e-13)));
        assert!(t.a[1][0].is_subset(&rounded("0.53867513459[5,6]", 1e-12)));
        assert_eq!(t.b[0], pt(0.5));
        assert_eq!(t.a[0][0], pt(0.25));
    }

    #[test]
    fn s3o4_matches_published_brackets() {
        let t = s3o4();
        let rows = [
            ("c0", t.c[0], "0.1610979566[59,62]"),
            ("c1", t.c[1], "0.655889341[44,50]"),
            ("a00", t.a[0][0], "0.105662432[67,71]"),
            ("a01", t.a[0][1], "0.172855006[54,67]"),
            ("a02", t.a[0][2], "-0.117419482[69,58]"),
            ("a10", t.a[1][0], "0.482099622[04,10]"),
            ("a12", t.a[1][2], "0.068127286[68,74]"),
            ("b0", t.b[0], "0.3885453883[37,75]"),
            ("b1", t.b[1], "0.5057921789[56,65]"),
        ];
        for (name, v, bracket) in rows {
            assert!(v.is_subset(&br(bracket)), "{name}: {v} not in {bracket}");
        }
        // Equal diagonal, bitwise, and it encloses (3 - sqrt(3))/12.
        assert_eq!(t.a[0][0], t.a[1][1]);
        assert_eq!(t.a[0][0], t.a[2][2]);
        assert_eq!(t.a[2][2], t.b[2]);
        let closed = pt(3.0).sub(&pt(3.0).sqrt()).div(&pt(12.0));
        assert!(!t.a[0][0].intersect(&closed).is_empty());
        assert_eq!(t.c[2], pt(1.0));
    }

    #[test]
    fn s3o5_matches_published_brackets() {
        let t = s3o5();
        let rows = [
            ("c1", t.c[1], "0.355051025[64,86]"),
            ("c2", t.c[2], "0.844948974[23,34]"),
            ("a10", t.a[1][0], "0.152659863[17,33]"),
            ("a11", t.a[1][1], "0.220412414[50,61]"),
            ("a12", t.a[1][2], "-0.0180212520[53,23]"),
            ("a20", t.a[2][0], "0.087340136[65,87]"),
            ("a21", t.a[2][1], "0.57802125[20,21]"),
            ("a22", t.a[2][2], "0.179587585[44,52]"),
            ("b0", t.b[0], "0.111111111[03,26]"),
            ("b1", t.b[1], "0.512485826[00,36]"),
            ("b2", t.b[2], "0.376403062[61,80]"),
        ];
        for (name, v, bracket) in rows {
            assert!(v.is_subset(&br(bracket)), "{name}: {v} not in {bracket}");
        }
        assert_eq!(t.c[0], pt(0.0));
    }
}
