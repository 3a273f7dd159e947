//! Acceptance gate: every numbered criterion prints one PASS/FAIL line
//! (visible with `--nocapture`) and fails the target if violated.

use std::process::Command;
use std::sync::Arc;

use hilfer::*;

fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn unit_kernel(name: &str) -> PsiKernel {
    builtin_kernels(name, 0.0, 1.0).unwrap()
}

/// Maclaurin erf, independent of the gamma/Lanczos machinery under test.
fn erf_series(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut term = x;
    let mut k = 0usize;
    while term.abs() > 1e-18 && k < 200 {
        sum += term / (2.0 * k as f64 + 1.0);
        k += 1;
        term *= -x * x / k as f64;
    }
    2.0 / std::f64::consts::PI.sqrt() * sum
}

fn power_rule_grading(delta: f64) -> f64 {
    if delta < 1.0 {
        5.0
    } else if delta > 1.0 {
        4.0
    } else {
        2.0
    }
}

fn power_rule_dev(name: &str, alpha: f64, delta: f64, n: usize) -> f64 {
    let kernel = unit_kernel(name);
    let mesh = build_graded_mesh(&kernel, n, power_rule_grading(delta)).unwrap();
    let mu = if delta < 1.0 { 1.0 - delta } else { 0.0 };
    let h = WeightedGridFunction::sample_weighted(Arc::clone(&mesh), mu, |_, w| {
        w.powf(mu + delta - 1.0)
    })
    .unwrap();
    let out = frac_integral(alpha, &h).unwrap();
    let mut worst = out.values()[0].abs();
    for j in 1..mesh.nodes().len() {
        let exact = power_rule_exact(&kernel, alpha, delta, mesh.nodes()[j]).unwrap();
        worst = worst.max((out.values()[j] - mesh.w(j).powf(mu) * exact).abs());
    }
    worst
}

#[test]
fn criterion_01_power_rule_matrix() {
    let start = std::time::Instant::now();
    let mut worst_dev = 0.0_f64;
    let mut worst_ratio = 0.0_f64;
    for name in ["linear", "sqrt_shift", "exp"] {
        for alpha in [0.3, 0.5, 0.9] {
            for delta in [0.5, 1.0, 1.5] {
                let e1024 = power_rule_dev(name, alpha, delta, 1024);
                let e512 = power_rule_dev(name, alpha, delta, 512);
                worst_dev = worst_dev.max(e1024);
                // Cases the quadrature reproduces to machine precision have
                // no discretization error left to halve; skip their ratio.
                if e1024 > 1e-12 {
                    worst_ratio = worst_ratio.max(e1024 / e512);
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst_dev <= 5e-4 && worst_ratio <= 0.4 && secs < 30.0;
    report(
        "1 (power rule, 27 cases)",
        pass,
        &format!("max weighted dev {worst_dev:.3e} (tol 5e-4), worst N-refinement ratio {worst_ratio:.3} (tol 0.4), {secs:.1}s"),
    );
}

#[test]
fn criterion_02_semigroup_matrix() {
    let mut worst = 0.0_f64;
    for (alpha, beta_ord) in [(0.5, 0.5), (0.3, 0.9)] {
        for name in ["linear", "exp"] {
            for power in [0.0, 0.2] {
                let kernel = unit_kernel(name);
                let r = if power > 0.0 { 4.0 } else { 2.0 };
                let mesh = build_graded_mesh(&kernel, 1024, r).unwrap();
                let h = WeightedGridFunction::sample_weighted(Arc::clone(&mesh), 0.0, |_, w| {
                    w.powf(power)
                })
                .unwrap();
                worst = worst.max(check_semigroup(alpha, beta_ord, &h).unwrap());
            }
        }
    }
    report(
        "2 (semigroup)",
        worst <= 5e-4,
        &format!("max deviation {worst:.3e} (tol 5e-4)"),
    );
}

#[test]
fn criterion_03_left_inverse_and_expansion() {
    let order = FractionalOrder::new(0.5, 1.0 / 3.0).unwrap();
    let gamma = order.gamma();
    let mut worst = 0.0_f64;
    for name in ["linear", "sqrt_shift", "exp"] {
        let kernel = unit_kernel(name);
        let mesh = build_graded_mesh(&kernel, 1024, 4.0).unwrap();
        for power in [0.0, 0.5] {
            let h =
                WeightedGridFunction::sample_weighted(Arc::clone(&mesh), 0.0, |_, w| w.powf(power))
                    .unwrap();
            worst = worst.max(check_left_inverse(order, &h).unwrap());
        }
        let seed_plus =
            WeightedGridFunction::sample_weighted(Arc::clone(&mesh), 1.0 - gamma, |_, w| {
                0.7 + 0.4 * w.powf(1.0 - gamma) * w.powf(0.5)
            })
            .unwrap();
        let u_a = 0.7 * gamma_fn(gamma).unwrap();
        worst = worst.max(check_integral_inversion(order, &seed_plus, u_a).unwrap());
    }
    report(
        "3 (left inverse + expansion)",
        worst <= 1e-2,
        &format!("max interior deviation {worst:.3e} (tol 1e-2)"),
    );
}

#[test]
fn criterion_04_mittag_leffler_oracles() {
    let policy = MlSeriesPolicy::default();
    let dev_e = (mittag_leffler(1.0, 1.0, 1.0, policy).unwrap() - std::f64::consts::E).abs();
    let mut dev_cosh = 0.0_f64;
    for z in [0.25, 1.0, 4.0] {
        let got = mittag_leffler(2.0, 1.0, z, policy).unwrap();
        dev_cosh = dev_cosh.max((got - z.sqrt().cosh()).abs());
    }
    let half = mittag_leffler(0.5, 1.0, 0.5, policy).unwrap();
    let oracle = 0.25_f64.exp() * (1.0 + erf_series(0.5));
    let dev_half = (half - oracle).abs();
    // The 7-digit reference value 1.9523620 carries its own rounding slack;
    // the erf-based oracle is the operative target at 1e-7.
    let dev_printed = (half - 1.952_362_0).abs();
    let pass = dev_e <= 1e-10 && dev_cosh <= 1e-10 && dev_half <= 1e-7 && dev_printed <= 2e-6;
    report(
        "4 (Mittag-Leffler oracles)",
        pass,
        &format!(
            "|E11(1)-e| = {dev_e:.2e} (tol 1e-10), max |E21(z)-cosh| = {dev_cosh:.2e} (tol 1e-10), |E½¹(0.5)-erf oracle| = {dev_half:.2e} (tol 1e-7)"
        ),
    );
}

#[test]
fn criterion_05_linear_problem_exactness() {
    let start = std::time::Instant::now();
    let problem = ProblemSpec::new(
        unit_kernel("linear"),
        FractionalOrder::new(0.5, 1.0).unwrap(),
        1.0,
        RhsSpec::LinearInU { lambda: 0.5 },
    )
    .unwrap();
    let report_s = solve_cauchy(&problem, &SolveConfig::default()).unwrap();
    let mesh = report_s.solution.mesh_arc();
    let mut worst_rel = 0.0_f64;
    for j in 0..mesh.nodes().len() {
        let exact =
            mittag_leffler(0.5, 1.0, 0.5 * mesh.w(j).sqrt(), MlSeriesPolicy::default()).unwrap();
        worst_rel = worst_rel.max((report_s.solution.values()[j] - exact).abs() / exact);
    }
    let end_value = report_s.solution.values()[mesh.last_index()];
    let secs = start.elapsed().as_secs_f64();
    let pass = worst_rel <= 1e-3 && (end_value - 1.952_362_0).abs() <= 2e-3 && secs < 10.0;
    report(
        "5 (linear-problem exactness)",
        pass,
        &format!(
            "max rel error {worst_rel:.3e} (tol 1e-3), u(1) = {end_value:.7} (ref 1.9523620 ± 2e-3), {secs:.1}s"
        ),
    );
}

fn demo_problem() -> ProblemSpec {
    ProblemSpec::new(
        unit_kernel("sqrt_shift"),
        FractionalOrder::new(0.5, 1.0 / 3.0).unwrap(),
        1.0,
        RhsSpec::Saturating,
    )
    .unwrap()
}

#[test]
fn criterion_06_showcase_reproduction() {
    let problem = demo_problem();
    let cfg = SolveConfig::default();
    let partition = partition_domain(&problem, &cfg).unwrap();
    let eta = partition.contraction_constants[0];
    let solve = solve_cauchy(&problem, &cfg).unwrap();
    let hist = &solve.delta_history[0];
    let mut worst_ratio = 0.0_f64;
    for pair in hist.windows(2) {
        if pair[0] > 1e-13 && pair[1] > 1e-13 {
            worst_ratio = worst_ratio.max(pair[1] / pair[0]);
        }
    }
    let demo_exit = Command::new(env!("CARGO_BIN_EXE_hilfer"))
        .arg("demo")
        .output()
        .expect("spawn demo");
    let pass = (eta - 0.1044).abs() <= 5e-4
        && solve.final_residual <= 1e-10
        && worst_ratio <= 0.12
        && demo_exit.status.code() == Some(0);
    report(
        "6 (showcase contraction check)",
        pass,
        &format!(
            "eta = {eta:.5} (ref 0.1044 ± 5e-4), residual {:.2e} (tol 1e-10), sweep ratio {worst_ratio:.4} (tol 0.12), demo exit {:?}",
            solve.final_residual,
            demo_exit.status.code()
        ),
    );
}

fn builtin_catalog() -> Vec<(&'static str, ProblemSpec)> {
    vec![
        (
            "power_source",
            ProblemSpec::new(
                unit_kernel("linear"),
                FractionalOrder::new(0.5, 0.5).unwrap(),
                1.0,
                RhsSpec::PowerSource { c: 1.0, delta: 1.0 },
            )
            .unwrap(),
        ),
        (
            "linear",
            ProblemSpec::new(
                unit_kernel("linear"),
                FractionalOrder::new(0.5, 1.0).unwrap(),
                1.0,
                RhsSpec::LinearInU { lambda: 0.5 },
            )
            .unwrap(),
        ),
        (
            "implicit_contraction",
            ProblemSpec::new(
                unit_kernel("sqrt_shift"),
                FractionalOrder::new(0.5, 1.0 / 3.0).unwrap(),
                1.0,
                RhsSpec::ImplicitContraction { g0: 1.0, c: 0.5 },
            )
            .unwrap(),
        ),
        (
            "example5",
            ProblemSpec::new(
                unit_kernel("sqrt_shift"),
                FractionalOrder::new(0.5, 1.0 / 3.0).unwrap(),
                1.0,
                RhsSpec::Saturating,
            )
            .unwrap(),
        ),
    ]
}

#[test]
fn criterion_07_contraction_law_on_catalog() {
    let cfg = SolveConfig {
        mesh_n: 256,
        ..SolveConfig::default()
    };
    let mut detail = String::new();
    let mut pass = true;
    for (name, problem) in &builtin_catalog() {
        let solve = solve_cauchy(problem, &cfg).unwrap();
        let norm = weighted_sup_norm(&solve.solution);
        let floor = (1e-13_f64).max(1e3 * f64::EPSILON * norm);
        let mut worst_excess = 0.0_f64;
        for (k, hist) in solve.delta_history.iter().enumerate() {
            let eta = solve.partition.contraction_constants[k];
            // Ratios from the second sweep pair on: the first sweep measures
            // the distance of the seed, not the contraction factor.
            for pair in hist.windows(2).skip(1) {
                if pair[0] > floor && pair[1] > floor {
                    worst_excess = worst_excess.max(pair[1] / pair[0] - 1.1 * eta);
                }
            }
        }
        if worst_excess > 0.0 {
            pass = false;
        }
        detail.push_str(&format!("{name}: excess {worst_excess:.2e}; "));
    }
    report(
        "7 (contraction law r_{k+1}/r_k <= 1.1 eta)",
        pass,
        detail.trim_end_matches("; "),
    );
}

#[test]
fn criterion_08_gronwall_consistency() {
    let kernel = unit_kernel("linear");
    let mesh = build_graded_mesh(&kernel, 256, 1.0).unwrap();
    // Half order: series versus the closed Mittag-Leffler form, argument <= 10.
    let v = WeightedGridFunction::constant(Arc::clone(&mesh), 0.0, 1.0).unwrap();
    let inp = GronwallInput::with_constant_h(v, 1.0, 0.5).unwrap();
    let out = gronwall_envelope(&inp, 150).unwrap();
    let cf = out.closed_form.as_ref().expect("constant data closed form");
    let mut worst_half = 0.0_f64;
    for j in 0..mesh.nodes().len() {
        worst_half = worst_half.max((out.envelope.values()[j] - cf[j]).abs() / cf[j]);
    }
    // Classical order: the envelope is the exponential.
    let v1 = WeightedGridFunction::constant(Arc::clone(&mesh), 0.0, 1.0).unwrap();
    let inp1 = GronwallInput::with_constant_h(v1, 1.3, 1.0).unwrap();
    let out1 = gronwall_envelope(&inp1, 150).unwrap();
    let mut worst_one = 0.0_f64;
    for (j, &t) in mesh.nodes().iter().enumerate() {
        let exact = (1.3 * t).exp();
        worst_one = worst_one.max((out1.envelope.values()[j] - exact).abs() / exact);
    }
    let pass = worst_half <= 1e-6 && worst_one <= 1e-8;
    report(
        "8 (Gronwall series vs closed forms)",
        pass,
        &format!("half-order vs E_a: {worst_half:.3e} (tol 1e-6); classical vs exp: {worst_one:.3e} (tol 1e-8)"),
    );
}

#[test]
fn criterion_09_data_dependence_validity() {
    let cfg = SolveConfig {
        mesh_n: 256,
        ..SolveConfig::default()
    };
    let mut pass = true;
    let mut detail = String::new();
    for (name, problem) in &builtin_catalog() {
        for delta in [0.01, 0.1] {
            let rep = verify_dependence(
                problem,
                &Perturbation::Data(DataPerturbation { delta }),
                &cfg,
            )
            .unwrap();
            let min_margin = rep.min_margin();
            if min_margin < -5e-4 {
                pass = false;
            }
            if *name == "linear" {
                let worst_abs = rep.margin.iter().fold(0.0_f64, |m, &x| m.max(x.abs()));
                if worst_abs > 1e-3 {
                    pass = false;
                }
                detail.push_str(&format!(
                    "{name} d={delta}: min margin {min_margin:.1e}, tight |margin| {worst_abs:.1e}; "
                ));
            } else {
                detail.push_str(&format!("{name} d={delta}: min margin {min_margin:.1e}; "));
            }
        }
    }
    report(
        "9 (data-dependence bound on catalog)",
        pass,
        detail.trim_end_matches("; "),
    );
}

#[test]
fn criterion_10_byte_identical_csv() {
    let dir = std::env::temp_dir().join(format!("hilfer-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let out = dir.join("run.csv");
    let cfg_path = dir.join("case.cfg");
    std::fs::write(
        &cfg_path,
        format!(
            "kernel = sqrt_shift\na = 0\nb = 1\nalpha = 0.5\nbeta = 0.3333333333333333\n\
             u_a = 1\nrhs = example5\nmesh_N = 96\nout = {}\n",
            out.display()
        ),
    )
    .unwrap();

    let mut pass = true;
    let mut detail = String::new();
    for (sub, extra) in [
        ("solve", vec![]),
        ("bounds", vec!["--mode=data", "--delta=0.01"]),
    ] {
        let mut bytes = Vec::new();
        for attempt in 0..2 {
            let status = Command::new(env!("CARGO_BIN_EXE_hilfer"))
                .arg(sub)
                .arg(&cfg_path)
                .args(&extra)
                .output()
                .expect("spawn subcommand");
            if status.status.code() != Some(0) {
                pass = false;
                detail.push_str(&format!("{sub} exit {:?}; ", status.status.code()));
            }
            bytes.push(std::fs::read(&out).expect("read CSV"));
            if attempt == 0 {
                std::fs::remove_file(&out).unwrap();
            }
        }
        let identical = bytes[0] == bytes[1];
        if !identical {
            pass = false;
        }
        detail.push_str(&format!(
            "{sub}: {} bytes, repeat identical = {identical}; ",
            bytes[0].len()
        ));
    }
    std::fs::remove_dir_all(&dir).ok();
    report(
        "10 (deterministic CSV)",
        pass,
        detail.trim_end_matches("; "),
    );
}
