//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Each criterion reruns the relevant scenario checks and also confirms the
//! tolerance and probe count they used are no looser than stated.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use optmom::checks::RunContext;
use optmom::linalg::Vector;
use optmom::phase_space::{hamiltonian_vector_field, Probes};
use optmom::reduction::reduced_form;
use optmom::report::{csv_string, CheckReport};
use optmom::scenarios::{self, Scenario};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn run(s: &Scenario, select: &str, seed: u64) -> Result<Vec<CheckReport>, String> {
    s.run(&RunContext::new(seed), Some(select))
        .map_err(|e| e.to_string())
}

fn find<'a>(reports: &'a [CheckReport], name: &str) -> Result<&'a CheckReport, String> {
    reports
        .iter()
        .find(|r| r.check == name)
        .ok_or_else(|| format!("no report `{name}`"))
}

/// A named report that passed with at most `tol` and at least `probes` probes.
fn expect(reports: &[CheckReport], name: &str, tol: f64, probes: usize) -> Result<f64, String> {
    let r = find(reports, name)?;
    if !r.passed {
        return Err(r.text_line());
    }
    if r.tolerance > tol * (1.0 + 1e-12) {
        return Err(format!(
            "{name}: tolerance {:e} looser than {tol:e}",
            r.tolerance
        ));
    }
    if r.probes < probes {
        return Err(format!("{name}: {} probes, need {probes}", r.probes));
    }
    Ok(r.max_residual)
}

fn within(start: Instant, limit: Duration) -> Result<Duration, String> {
    let t = start.elapsed();
    if t > limit {
        return Err(format!("took {t:.2?}, limit {limit:?}"));
    }
    Ok(t)
}

fn torus() -> Outcome {
    let start = Instant::now();
    let s = scenarios::torus();
    let reports = run(&s, "*", 1)?;
    expect(&reports, "rank.shift", 0.0, 50)?;
    let drift = expect(&reports, "noether.optimal.shift", 1e-8, 20)?;
    let bracket = expect(&reports, "quotient_bracket.zero.shift", 1e-8, 50)?;
    let absent = find(&reports, "momentum.absent.shift")?;
    if !absent.passed {
        return Err(absent.text_line());
    }
    let horizon = s.case(Some("shift")).map_err(|e| e.to_string())?.horizon;
    if horizon < 10.0 {
        return Err(format!("horizon {horizon} below 10"));
    }
    let t = within(start, Duration::from_secs(10))?;
    Ok(format!(
        "drift {drift:.1e}, bracket {bracket:.1e}, not Hamiltonian, {t:.2?}"
    ))
}

fn r3() -> Outcome {
    let start = Instant::now();
    let s = scenarios::r3();
    let reports = run(&s, "*", 1)?;
    let fd = expect(&reports, "field.x_y", 1e-10, 100)?;
    let conserved = expect(&reports, "label.conserved.random", 1e-10, 20 * 100)?;
    let casimir = expect(&reports, "casimir.x_plus_z", 1e-12, 1)?;
    // B e_y read off the tensor by hand: the second column, (1, 0, -1).
    let case = s.case(None).map_err(|e| e.to_string())?;
    let xy = hamiltonian_vector_field(case.e.poisson(), &case.e.sigma()[0])
        .map_err(|e| e.to_string())?;
    let z = Vector::from_vec(vec![0.4, -1.3, 2.2]);
    let oracle = Vector::from_vec(vec![1.0, 0.0, -1.0]);
    if xy.eval(&z) != oracle {
        return Err(format!("X_y = {:?}", xy.eval(&z).as_slice()));
    }
    let t = within(start, Duration::from_secs(5))?;
    Ok(format!(
        "X_y FD {fd:.1e}, dJ.X_f {conserved:.1e}, casimir {casimir:.1e}, {t:.2?}"
    ))
}

fn c3() -> Outcome {
    let start = Instant::now();
    let s = scenarios::c3();
    let reports = run(&s, "*", 1)?;
    let period = expect(&reports, "flow.period.su3", 1e-7, 20)?;
    expect(&reports, "rank.generic.su3", 0.0, 50)?;
    expect(&reports, "rank.origin.su3", 0.0, 1)?;
    let angle = expect(&reports, "eq34.free.s1", 1e-6, 50)?;
    let failed: Vec<&str> = reports
        .iter()
        .filter(|r| !r.passed)
        .map(|r| r.check.as_str())
        .collect();
    if !failed.is_empty() {
        return Err(format!("failing: {failed:?}"));
    }
    let t = within(start, Duration::from_secs(30))?;
    Ok(format!(
        "period {period:.1e}, rank 1/0, angle {angle:.1e}, {t:.2?}"
    ))
}

fn involutivity() -> Outcome {
    let mut count = 0;
    let mut cases = 0;
    let mut worst: f64 = 0.0;
    for s in scenarios::all() {
        cases += s.cases.len();
        let reports = run(&s, "distribution.involutive.*", 1)?;
        for r in &reports {
            worst = worst.max(expect(&reports, &r.check, 1e-5, 30)?);
            count += 1;
        }
    }
    if count != cases {
        return Err(format!(
            "{count} involutivity checks for {cases} distributions"
        ));
    }
    let reports = run(&scenarios::r3(), "control.involutive.contact", 1)?;
    let control = find(&reports, "control.involutive.contact")?;
    if !control.passed || control.max_residual < 0.1 {
        return Err(control.text_line());
    }
    Ok(format!(
        "{count} distributions, worst angle {worst:.1e}; control angle {:.2}",
        control.max_residual
    ))
}

fn optimal_reduction() -> Outcome {
    let s = scenarios::c3();
    let reports = run(&s, "reduced.*.cp2_r1", 1)?;
    let well = expect(&reports, "reduced.well_defined.cp2_r1", 1e-6, 100)?;
    let closed = expect(&reports, "reduced.closed.cp2_r1", 1e-5, 1)?;
    let (case, red) = s
        .reduction(Some("s1"), Some("cp2_r1"))
        .map_err(|e| e.to_string())?;
    let rep = reduced_form(
        &case.e,
        &red.level,
        &red.chart,
        &red.g_rho,
        &Probes::new(100, 5),
        1e-6,
        1e-8,
    )
    .map_err(|e| e.to_string())?;
    if rep.dim != 4 || rep.min_singular < 1e-3 || !rep.well_defined.passed {
        return Err(format!(
            "dim {}, min singular {:e}",
            rep.dim, rep.min_singular
        ));
    }
    Ok(format!(
        "well-defined {well:.1e}, min singular {:.3e}, closed {closed:.1e}",
        rep.min_singular
    ))
}

fn reduced_dynamics() -> Outcome {
    let reports = run(&scenarios::c3(), "reduced.*.cp2_r1*", 1)?;
    let commute = expect(&reports, "reduced.flow_commutes.cp2_r1.re_z1z2", 1e-5, 20)?;
    let bracket = expect(&reports, "reduced.bracket.cp2_r1", 1e-6, 50)?;
    Ok(format!(
        "flow commutation {commute:.1e}, reduced bracket {bracket:.1e}"
    ))
}

fn mw_comparison() -> Outcome {
    let reports = run(&scenarios::c3(), "mw.*", 1)?;
    let form = expect(&reports, "mw.form.cp2_r1", 1e-6, 50)?;
    expect(&reports, "mw.dim.cp2_r1", 0.0, 1)?;
    let z2 = scenarios::z2();
    let reports = run(&z2, "*", 1)?;
    expect(&reports, "reduced.dim.origin", 0.0, 1)?;
    expect(&reports, "mw.dim.origin", 0.0, 1)?;
    expect(&reports, "rank.origin.minus_identity", 0.0, 1)?;
    expect(&reports, "rank.generic.minus_identity", 0.0, 50)?;
    let (_, red) = z2
        .reduction(None, Some("origin"))
        .map_err(|e| e.to_string())?;
    if red.expected_dim != 0 {
        return Err("origin does not reduce to a point".into());
    }
    Ok(format!("MW form {form:.1e}; Z2 origin reduces to a point"))
}

fn linear_identities() -> Outcome {
    let z2 = run(&scenarios::z2(), "*", 1)?;
    let fixtures = run(&scenarios::fixtures(), "*", 1)?;
    for (reports, key) in [(&z2, "minus_identity"), (&fixtures, "s1_weight")] {
        let iso = find(reports, &format!("dual_iso.{key}"))?;
        if !iso.passed || !iso.max_residual.is_finite() {
            return Err(iso.text_line());
        }
        expect(reports, &format!("span.{key}"), 1e-6, 1)?;
    }
    Ok("dual isomorphism and span equality on Z2 and the weighted circle".into())
}

fn suite_csv(seed: u64) -> Result<(String, bool), String> {
    let mut csv = String::new();
    let mut all_pass = true;
    for s in scenarios::all() {
        let reports = run(&s, "*", seed)?;
        all_pass &= reports.iter().all(|r| r.passed);
        csv.push_str(&csv_string(&reports));
    }
    Ok((csv, all_pass))
}

fn determinism() -> Outcome {
    let start = Instant::now();
    let (a, pass_a) = suite_csv(42)?;
    let (b, _) = suite_csv(42)?;
    let t = within(start, Duration::from_secs(180))?;
    if a != b {
        return Err("CSV differs between runs".into());
    }
    if !pass_a {
        return Err("suite has failing checks at seed 42".into());
    }
    Ok(format!(
        "{} CSV bytes identical, two full runs in {t:.2?}",
        a.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("torus example", torus),
        ("R3 example", r3),
        ("C3 example", c3),
        ("involutivity", involutivity),
        ("optimal reduction", optimal_reduction),
        ("reduced dynamics", reduced_dynamics),
        ("MW comparison", mw_comparison),
        ("linear identities", linear_identities),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {} PASS {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} FAIL {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
