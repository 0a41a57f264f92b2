//! Acceptance suite: replays every shipped example end to end and checks the
//! published values at their stated tolerances. One test per criterion; each
//! prints a `PASS criterion N` line (visible with `--nocapture`).
//!
//! Structural property suites referenced by criterion 8 but owned by module
//! tests: printed worked-example relaxation matrices (moments unit tests),
//! lifting soundness and moment-side box inequalities (tests/properties.rs),
//! rigid-body annihilation (fem proptests), point-mass extraction round trip
//! (certify unit tests), SDPA byte determinism and round-trip objective
//! equality (tests/sdp_roundtrip.rs).

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use frameopt::baseline::{optimality_criteria, OcOptions};
use frameopt::certify::{
    run_hierarchy, CbarChoice, Certificate, HierarchyOptions, RunReport, StopRule,
};
use frameopt::fem::{assemble, compliance, grid_oracle, PinvOptions};
use frameopt::formulate::{scale_point, truss_upper_bound, variable_bounds};
use frameopt::sdpcore::SolverOptions;
use frameopt::structmodel::load_problem;
use frameopt::{Problem, Real};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../problems")
}

fn problem(file: &str) -> Problem {
    load_problem(&fixtures().join(file)).unwrap()
}

fn run(file: &str, opts: HierarchyOptions) -> RunReport<Real> {
    run_hierarchy(&problem(file), &opts).unwrap()
}

fn assert_near(got: f64, want: f64, tol: f64, what: &str) {
    assert!((got - want).abs() <= tol, "{what}: got {got}, want {want} +- {tol}");
}

fn assert_rel(got: f64, want: f64, rel: f64, what: &str) {
    assert!(
        (got - want).abs() <= rel * want.abs(),
        "{what}: got {got}, want {want} +- {:.1}%",
        rel * 100.0
    );
}

fn sorted_designs(certs: &Certificate<Real>) -> Vec<Vec<f64>> {
    let mut d: Vec<Vec<f64>> = certs.minimizers.iter().map(|m| m.design.clone()).collect();
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    d
}

// Shared hierarchy runs; several criteria read the same trace.
fn motivating_report() -> &'static RunReport<Real> {
    static R: OnceLock<RunReport<Real>> = OnceLock::new();
    R.get_or_init(|| {
        run("motivating.json", HierarchyOptions { stop: StopRule::Both, ..Default::default() })
    })
}

fn ex41_report() -> &'static RunReport<Real> {
    static R: OnceLock<RunReport<Real>> = OnceLock::new();
    R.get_or_init(|| {
        run("ex41.json", HierarchyOptions { stop: StopRule::Both, ..Default::default() })
    })
}

fn ex42_report() -> &'static RunReport<Real> {
    static R: OnceLock<RunReport<Real>> = OnceLock::new();
    R.get_or_init(|| {
        run("ex42.json", HierarchyOptions { stop: StopRule::Flat, ..Default::default() })
    })
}

fn ex43_report() -> &'static RunReport<Real> {
    static R: OnceLock<RunReport<Real>> = OnceLock::new();
    R.get_or_init(|| run("ex43.json", HierarchyOptions::default()))
}

fn cantilever_options() -> HierarchyOptions {
    HierarchyOptions {
        stop: StopRule::Both,
        r_max: 4,
        solver: SolverOptions { max_psd_dim: 2000, ..SolverOptions::default() },
        // The embedded solver terminates around a 1e-6 relative gap on the
        // order-4 relaxation (~3000 moments), which blurs the moment-matrix
        // spectrum at the 1e-5 level; the dominant eigenvalue sits 6 orders
        // above. The rank threshold must track solver accuracy here.
        rank_tol: 1e-4,
        ..Default::default()
    }
}

fn ex44_eb_report() -> &'static RunReport<Real> {
    static R: OnceLock<RunReport<Real>> = OnceLock::new();
    R.get_or_init(|| run("ex44_eb.json", cantilever_options()))
}

fn ex44_timo_report() -> &'static RunReport<Real> {
    static R: OnceLock<RunReport<Real>> = OnceLock::new();
    R.get_or_init(|| run("ex44_timo.json", cantilever_options()))
}

/// Criterion 1: the motivating two-element frame certifies at the global
/// optimum, the extracted minimizer matches, and the brute-force grid oracle
/// agrees independently.
fn criterion_1_motivating_problem() {
    let t0 = std::time::Instant::now();
    let rep = motivating_report();
    let solve_time = t0.elapsed().as_secs_f64();
    assert!(rep.certified(), "termination {:?}", rep.termination);
    let last = rep.best().unwrap();
    assert_near(last.upper_bound, 2.719, 1e-3, "certified objective");
    assert_near(last.lower_bound, 2.719, 1e-3, "lower bound");
    assert!(last.gap <= 1e-6 * last.upper_bound.max(1.0), "gap {}", last.gap);
    let designs = sorted_designs(last);
    assert_eq!(designs.len(), 1, "unique global minimizer");
    assert_near(designs[0][0], 0.894, 1e-3, "minimizer a1");
    assert_near(designs[0][1], 0.0, 1e-3, "minimizer a2");
    assert!(solve_time <= 10.0, "hierarchy took {solve_time:.1}s");

    let grid = grid_oracle(&problem("motivating.json"), 2000, 2).unwrap();
    // grid error: one step per axis
    let step = 0.894427 / 2000.0;
    assert!((grid.best_objective - 2.719).abs() <= 5e-3, "grid {}", grid.best_objective);
    assert!((grid.best_a[0] - designs[0][0]).abs() <= 2.0 * step);
    assert!(grid.best_a[1].abs() <= 2.0 * step);
    println!(
        "PASS criterion 1: certified c* = {:.4} at a = ({:.4}, {:.4}), grid oracle {:.4}, {:.1}s",
        last.upper_bound, designs[0][0], designs[0][1], grid.best_objective, solve_time
    );
}

/// Criterion 2: the three-global-optima frame reproduces the published bound
/// trace, flattens at order 4 with rank 3, and yields all three minimizers.
fn criterion_2_multiple_global_optima() {
    let t0 = std::time::Instant::now();
    let rep = ex41_report();
    let elapsed = t0.elapsed().as_secs_f64();
    let lb_expected = [(2u32, 5.065), (3, 7.647), (4, 7.738)];
    assert_eq!(rep.orders.len(), 3);
    for (cert, (r, lb)) in rep.orders.iter().zip(lb_expected) {
        assert_eq!(cert.order, r);
        assert_near(cert.lower_bound, lb, 5e-3, &format!("LB at order {r}"));
        assert_near(cert.upper_bound, 7.738, 1e-3, &format!("UB at order {r}"));
        assert_near(cert.design[0], 0.289, 2e-3, &format!("recovered a1 at order {r}"));
        assert_near(cert.design[1], 0.289, 2e-3, &format!("recovered a2 at order {r}"));
    }
    let last = rep.best().unwrap();
    assert!(last.flat, "flat at order 4");
    assert_eq!(last.s, Some(3), "three global minimizers");
    let vbar = 0.816597322_f64;
    let mut expected = vec![
        vec![vbar / 2.0_f64.sqrt(), 0.0],
        vec![0.0, vbar / 2.0_f64.sqrt()],
        vec![vbar * 2.0_f64.sqrt() / 4.0, vbar * 2.0_f64.sqrt() / 4.0],
    ];
    expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let designs = sorted_designs(last);
    assert_eq!(designs.len(), 3);
    for (got, want) in designs.iter().zip(&expected) {
        assert_near(got[0], want[0], 1e-3, "extracted design a1");
        assert_near(got[1], want[1], 1e-3, "extracted design a2");
    }
    assert!(elapsed <= 60.0, "took {elapsed:.1}s");
    println!(
        "PASS criterion 2: LB trace ({:.3}, {:.3}, {:.3}), flat s=3, three designs, {:.1}s",
        rep.orders[0].lower_bound, rep.orders[1].lower_bound, rep.orders[2].lower_bound, elapsed
    );
}

/// Criterion 3: the irreducible-gap variant flattens at order 3 with rank 2
/// while the epsilon gap stays at 0.521, and the two extracted minimizers
/// average to the first-order moments.
fn criterion_3_irreducible_gap() {
    let rep = ex42_report();
    let last = rep.best().unwrap();
    assert_eq!(last.order, 3);
    assert!(last.flat);
    assert_eq!(last.s, Some(2));
    assert_near(last.lower_bound, 1.640, 5e-3, "lower bound");
    assert_near(last.upper_bound, 2.161, 5e-3, "upper bound");
    assert_near(last.gap, 0.521, 1e-2, "gap");
    assert_near(last.design[0], 0.628, 2e-3, "recovered a1");
    assert_near(last.design[1], 0.628, 2e-3, "recovered a2");
    let designs = sorted_designs(last);
    assert_eq!(designs.len(), 2);
    assert_near(designs[0][0], 0.0, 2e-3, "first design a1");
    assert_near(designs[0][1], 1.256, 2e-3, "first design a2");
    assert_near(designs[1][0], 1.256, 2e-3, "second design a1");
    assert_near(designs[1][1], 0.0, 2e-3, "second design a2");

    // the first-order moments are a convex combination of the minimizers
    let gs = problem("ex42.json");
    let ps = assemble(&gs).unwrap();
    let bounds = variable_bounds(&ps).unwrap();
    let weights = ps.weights();
    let scaled: Vec<Vec<f64>> = last
        .minimizers
        .iter()
        .map(|m| scale_point(&m.design, &m.compliances, &bounds, &weights))
        .collect();
    let y1 = scale_point(&last.design, &last.compliances, &bounds, &weights);
    // fit theta by least squares on the area coordinates
    let (d0, d1) = (&scaled[0], &scaled[1]);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..2 {
        num += (y1[i] - d1[i]) * (d0[i] - d1[i]);
        den += (d0[i] - d1[i]) * (d0[i] - d1[i]);
    }
    let theta = (num / den).clamp(0.0, 1.0);
    for i in 0..2 {
        let combo = theta * d0[i] + (1.0 - theta) * d1[i];
        assert!(
            (combo - y1[i]).abs() <= 1e-4,
            "first-order moment {i}: {} vs convex combination {}",
            y1[i],
            combo
        );
    }
    println!(
        "PASS criterion 3: flat s=2, LB {:.4}, UB {:.4}, gap {:.3}, mean-of-minimizers theta {:.3}",
        last.lower_bound, last.upper_bound, last.gap, theta
    );
}

/// Criterion 4: the self-weight frame reproduces the published bound trace
/// within 1%, lands on the published design, and the grid oracle confirms
/// the global minimum location.
fn criterion_4_self_weight() {
    let rep = ex43_report();
    let expected = [
        (1u32, 48.246, 74.171, [0.050, 0.119]),
        (2, 68.328, 71.594, [0.034, 0.220]),
        (3, 70.442, 70.442, [0.022, 0.166]),
    ];
    assert_eq!(rep.orders.len(), 3);
    for (cert, (r, lb, ub, design)) in rep.orders.iter().zip(expected) {
        assert_eq!(cert.order, r);
        assert_rel(cert.lower_bound, lb, 0.01, &format!("LB at order {r}"));
        assert_rel(cert.upper_bound, ub, 0.01, &format!("UB at order {r}"));
        assert_near(cert.design[0], design[0], 5e-3, &format!("recovered a1 at order {r}"));
        assert_near(cert.design[1], design[1], 5e-3, &format!("recovered a2 at order {r}"));
    }
    let last = rep.best().unwrap();
    assert!(rep.certified());
    assert_near(last.design[0], 0.022, 5e-3, "final design a1");
    assert_near(last.design[1], 0.166, 5e-3, "final design a2");

    let grid = grid_oracle(&problem("ex43.json"), 1500, 2).unwrap();
    assert_rel(grid.best_objective, 70.442, 0.01, "grid minimum");
    assert_near(grid.best_a[0], 0.022, 5e-3, "grid argmin a1");
    assert_near(grid.best_a[1], 0.166, 5e-3, "grid argmin a2");
    println!(
        "PASS criterion 4: trace ({:.3}/{:.3}, {:.3}/{:.3}, {:.3}/{:.3}), design ({:.3}, {:.3})",
        rep.orders[0].lower_bound,
        rep.orders[0].upper_bound,
        rep.orders[1].lower_bound,
        rep.orders[1].upper_bound,
        rep.orders[2].lower_bound,
        rep.orders[2].upper_bound,
        last.design[0],
        last.design[1]
    );
}

/// Criterion 5: the Euler-Bernoulli cantilever certifies the published
/// thickness distribution; the Timoshenko variant achieves the bound-equality
/// certificate with a compliance above the Euler-Bernoulli one.
fn criterion_5_cantilever() {
    let t0 = std::time::Instant::now();
    let rep = ex44_eb_report();
    assert!(rep.certified(), "termination {:?} ({:?})", rep.termination, rep.failure);
    let last = rep.best().unwrap();
    assert_rel(last.upper_bound, 12.025, 0.005, "certified compliance");
    let expected = [2.775, 2.454, 2.086, 1.639, 1.047];
    for (i, (&got, &want)) in last.design.iter().zip(&expected).enumerate() {
        assert_near(got, want, 1e-2, &format!("thickness {i}"));
    }
    assert_eq!(last.s, Some(1), "unique minimizer rank");
    // epsilon certificate at the default relative target 1e-6 * max(1, |UB|)
    assert!(last.certified, "epsilon certificate");
    assert!(last.gap <= 1e-6 * last.upper_bound.max(1.0), "gap {}", last.gap);

    let timo = ex44_timo_report();
    assert!(timo.certified(), "timoshenko termination {:?} ({:?})", timo.termination, timo.failure);
    let tlast = timo.best().unwrap();
    assert!(tlast.certified, "timoshenko bound-equality certificate");
    assert!(
        tlast.upper_bound >= last.upper_bound - 1e-6,
        "shear flexibility cannot reduce compliance: {} vs {}",
        tlast.upper_bound,
        last.upper_bound
    );
    assert_rel(tlast.upper_bound, 12.922, 0.05, "timoshenko compliance");
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(elapsed <= 1800.0, "took {elapsed:.0}s");
    println!(
        "PASS criterion 5: EB c* = {:.4} (s={:?}), Timoshenko c* = {:.4}, {:.0}s",
        last.upper_bound, last.s, tlast.upper_bound, elapsed
    );
}

/// Criterion 6 (stretch): first-order bounds of the 22-element frame.
fn criterion_6_twenty_two_elements_first_order() {
    let rep = run(
        "ex45.json",
        HierarchyOptions {
            r_max: 1,
            solver: SolverOptions { max_psd_dim: 600, ..SolverOptions::default() },
            ..Default::default()
        },
    );
    assert_eq!(rep.orders.len(), 1);
    let c = &rep.orders[0];
    assert_rel(c.lower_bound, 1062.105, 0.01, "first-order lower bound");
    assert_rel(c.upper_bound, 3276.294, 0.01, "first-order upper bound");
    println!(
        "PASS criterion 6: r=1 bounds LB {:.3} / UB {:.3}",
        c.lower_bound, c.upper_bound
    );
}

/// Criterion 6, second order: matches the published certified optimum but
/// needs roughly 17k moments; run explicitly with
/// `cargo test -p frameopt --test acceptance -- --ignored` (external solver
/// or a large time budget recommended).
#[test]
#[ignore = "long-running: ~17k moment variables; the published reference run took 1492 s"]
fn criterion_6_twenty_two_elements_second_order() {
    let rep = run(
        "ex45.json",
        HierarchyOptions {
            r_min: Some(2),
            r_max: 2,
            solver: SolverOptions { max_psd_dim: 5000, ..SolverOptions::default() },
            ..Default::default()
        },
    );
    let c = rep.best().unwrap();
    assert_rel(c.lower_bound, 1668.584, 0.01, "second-order lower bound");
    assert_rel(c.upper_bound, 1668.584, 0.01, "second-order upper bound");
    println!("PASS criterion 6 (r=2): LB {:.3} / UB {:.3}", c.lower_bound, c.upper_bound);
}

/// Criterion 7: truss-bound sandwich on the motivating problem, both solves
/// in-repo: c* <= c_frame(truss design) <= c_truss.
fn criterion_7_truss_sandwich() {
    let gs = problem("motivating.json");
    let ps = assemble(&gs).unwrap();
    let tb = truss_upper_bound(&ps, &SolverOptions::default()).unwrap().expect("applicable");
    let frame_at_truss = compliance(&ps, &tb.design, PinvOptions::default()).unwrap();
    assert!(frame_at_truss.image_ok);
    let c_star = motivating_report().best().unwrap().upper_bound;
    let slack = -1e-8;
    assert!(
        frame_at_truss.objective - c_star >= slack,
        "c* {} vs frame-at-truss {}",
        c_star,
        frame_at_truss.objective
    );
    assert!(
        tb.objective - frame_at_truss.objective >= slack,
        "frame-at-truss {} vs truss {}",
        frame_at_truss.objective,
        tb.objective
    );
    println!(
        "PASS criterion 7: {:.4} <= {:.4} <= {:.4}",
        c_star, frame_at_truss.objective, tb.objective
    );
}

/// Criterion 8: cross-cutting properties over every stored run: lower bounds
/// non-decreasing in the order, every recovered design feasible and its
/// upper bound re-validated through the physics, first-order moment
/// inequalities clean. (Structural suites live in the module tests, see the
/// file header.)
fn criterion_8_property_suites() {
    let reports: Vec<(&str, &RunReport<Real>)> = vec![
        ("motivating", motivating_report()),
        ("ex41", ex41_report()),
        ("ex42", ex42_report()),
        ("ex43", ex43_report()),
        ("ex44_eb", ex44_eb_report()),
        ("ex44_timo", ex44_timo_report()),
    ];
    for (name, rep) in &reports {
        // monotone lower bounds
        for w in rep.orders.windows(2) {
            assert!(
                w[1].lower_bound >= w[0].lower_bound - 1e-6 * (1.0 + w[0].lower_bound.abs()),
                "{name}: LB decreased {} -> {}",
                w[0].lower_bound,
                w[1].lower_bound
            );
        }
        let gs = problem(&format!("{}.json", if *name == "motivating" { "motivating" } else { name }));
        let ps = assemble(&gs).unwrap();
        for cert in &rep.orders {
            assert!(
                matches!(
                    cert.solver_status,
                    frameopt::sdpcore::SolveStatus::Optimal
                        | frameopt::sdpcore::SolveStatus::Inaccurate
                ),
                "{name}: solver status {:?}",
                cert.solver_status
            );
            // recovery soundness
            let volume: f64 =
                ps.lengths.iter().zip(&cert.design).map(|(l, a)| l * a).sum();
            assert!(volume <= gs.volume_bound * (1.0 + 1e-9), "{name}: volume {volume}");
            for &a in &cert.design {
                assert!(a >= -1e-12, "{name}: negative area {a}");
            }
            // UB re-validated through the physics, independently of recovery
            let res = compliance(&ps, &cert.design, PinvOptions::default()).unwrap();
            assert!(res.image_ok, "{name}: recovered design infeasible");
            assert!(
                (res.objective - cert.upper_bound).abs() <= 1e-9 * (1.0 + res.objective),
                "{name}: UB {} vs reanalysis {}",
                cert.upper_bound,
                res.objective
            );
            // extracted minimizers attain the lower bound through the physics
            for m in &cert.minimizers {
                assert!(
                    (m.objective - cert.lower_bound).abs()
                        <= 1e-4 * (1.0 + cert.lower_bound.abs()),
                    "{name}: minimizer objective {} vs LB {}",
                    m.objective,
                    cert.lower_bound
                );
            }
        }
    }
    // the local baseline never beats a certified bound
    for (name, rep) in &reports {
        let file = format!("{}.json", name);
        let gs = problem(&file);
        let oc = optimality_criteria(&gs, &OcOptions::default()).unwrap();
        for cert in &rep.orders {
            // slack covers the embedded solver's terminal accuracy on the
            // largest relaxations (~1e-6 relative)
            assert!(
                oc.objective >= cert.lower_bound - 5e-5 * (1.0 + cert.lower_bound.abs()),
                "{name}: OC {} below LB {}",
                oc.objective,
                cert.lower_bound
            );
        }
    }
    println!("PASS criterion 8: monotone bounds, sound recovery, validated minimizers, OC above LB");
}

/// The acceptance gate: every criterion runs sequentially (full machine per
/// criterion, stable timings) and prints one pass/fail line; any failure
/// fails the gate at the end.
#[test]
fn acceptance_criteria() {
    let criteria: Vec<(&str, fn())> = vec![
        ("criterion 1", criterion_1_motivating_problem),
        ("criterion 2", criterion_2_multiple_global_optima),
        ("criterion 3", criterion_3_irreducible_gap),
        ("criterion 4", criterion_4_self_weight),
        ("criterion 5", criterion_5_cantilever),
        ("criterion 6", criterion_6_twenty_two_elements_first_order),
        ("criterion 7", criterion_7_truss_sandwich),
        ("criterion 8", criterion_8_property_suites),
    ];
    let mut failed = Vec::new();
    for (name, check) in criteria {
        match std::panic::catch_unwind(check) {
            Ok(()) => {}
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panic".into());
                println!("FAIL {name}: {msg}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
