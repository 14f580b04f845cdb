//! End-to-end acceptance checks. Runs without the libtest harness so each
//! criterion prints exactly one PASS/FAIL line.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::ExitCode;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use schiffer_lab::bessel::{bessel_j, bessel_root, RootKind};
use schiffer_lab::curve::{AmbientField, BoundaryScalar, FourierCurve, Frame};
use schiffer_lab::experiments::{random_alpha, run_experiment, ExperimentId, Outcome};
use schiffer_lab::fem::{eig_with_multiplicity, solve_eigs, BoundaryCondition, Domain};
use schiffer_lab::riemann::{apply_l1, invert_l1, metric, riemannian_gradient, torsion, MetricSpec};
use schiffer_lab::shape::{dlambda_neumann, multi_matrix_neumann, relative_gap};
use schiffer_lab::Result;

type Verdict = Result<(bool, String)>;

const LAMBDA_UNIT_DISK: f64 = 1.356766;

fn experiment(id: ExperimentId, config: Value, out: &Path) -> Result<Outcome> {
    run_experiment(id, config, out)
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    let text = fs::read_to_string(path).unwrap();
    csv::Reader::from_reader(text.as_bytes()).records().map(|r| r.unwrap()).collect()
}

fn disk(h: f64) -> Result<std::sync::Arc<Domain>> {
    Domain::new(FourierCurve::circle([0.0, 0.0], 1.0), h)
}

fn criterion_1(_: &Path) -> Verdict {
    let j01 = bessel_root(0, 1, RootKind::Function)?;
    let exact = j01 * j01;
    let coarse = solve_eigs(&disk(0.05)?, BoundaryCondition::Dirichlet, 1)?[0].lambda;
    let fine = solve_eigs(&disk(0.025)?, BoundaryCondition::Dirichlet, 1)?[0].lambda;
    let rel = relative_gap(coarse, exact);
    let ratio = (coarse - exact).abs() / (fine - exact).abs();
    Ok((rel < 5e-3 && ratio >= 3.0, format!("λ₁ = {coarse:.6} (rel err {rel:.2e}), error ratio on halving {ratio:.2}")))
}

fn criterion_2(_: &Path) -> Verdict {
    let jp11 = bessel_root(1, 1, RootKind::Derivative)?;
    let pairs = solve_eigs(&disk(0.05)?, BoundaryCondition::Neumann, 2)?;
    let rel = relative_gap(pairs[1].lambda, jp11 * jp11);
    Ok((
        rel < 0.01 && pairs[0].lambda.abs() <= 1e-6,
        format!("λ₁ = {:.2e}, λ₂ = {:.6} (rel err {rel:.2e})", pairs[0].lambda, pairs[1].lambda),
    ))
}

fn criterion_3(out: &Path) -> Verdict {
    let ellipse = json!({"kind": "ellipse", "a": 1.2, "b": 1.0 / 1.2});
    let runs = [
        ("disk/dirichlet", json!({"kind": "circle"}), "lambda_dirichlet", None),
        ("disk/neumann", json!({"kind": "circle"}), "lambda_neumann", Some(5)),
        ("ellipse/dirichlet", ellipse.clone(), "lambda_dirichlet", None),
        ("ellipse/neumann", ellipse, "lambda_neumann", Some(1)),
    ];
    let mut ok = true;
    let mut worst: f64 = 0.0;
    let mut ratios = Vec::new();
    for (name, curve, quantity, mode) in runs {
        let dir = out.join(name.replace('/', "-"));
        let outcome = experiment(
            ExperimentId::FdCheck,
            json!({"curve": curve, "quantity": quantity, "mode": mode, "random_alpha": 5, "max_gap": 0.02, "seed": 3}),
            &dir,
        )?;
        ok &= outcome.passed();
        for row in csv_rows(&dir.join("fd_check.csv")) {
            worst = worst.max(row[6].parse::<f64>().unwrap());
            if quantity == "lambda_dirichlet" {
                ratios.push(row[7].parse::<f64>().unwrap());
            }
        }
    }
    let mean_ratio = ratios.iter().sum::<f64>() / ratios.len() as f64;
    Ok((ok, format!("worst gap {worst:.2e} over 24 fields; −½ variant / FD = {mean_ratio:.4} (recorded)")))
}

fn criterion_4(_: &Path) -> Verdict {
    let d = disk(0.05)?;
    let jp11 = bessel_root(1, 1, RootKind::Derivative)?;
    let target = -2.0 * jp11 * jp11;
    let cluster = eig_with_multiplicity(&d, BoundaryCondition::Neumann, jp11 * jp11, 0.05)?;
    let one = BoundaryScalar::constant(d.nodes(), 1.0);
    let m = multi_matrix_neumann(&cluster, &one)?;
    let gaps: Vec<f64> = m.eigenvalues.iter().map(|v| relative_gap(*v, target)).collect();
    let e = Domain::new(FourierCurve::ellipse([0.0, 0.0], 1.2, 1.0 / 1.2), 0.05)?;
    let simple = solve_eigs(&e, BoundaryCondition::Neumann, 2)?.remove(1);
    let alpha = BoundaryScalar::from_fourier(e.nodes(), &[1.0, 0.4, -0.3, 0.2, 0.1]);
    let scalar = dlambda_neumann(std::slice::from_ref(&simple), &alpha)?.value;
    let reduced = multi_matrix_neumann(std::slice::from_ref(&simple), &alpha)?.eigenvalues[0];
    let p1 = (scalar - reduced).abs();
    Ok((
        cluster.len() == 2 && gaps.iter().all(|g| *g < 0.02) && p1 <= 1e-10,
        format!("eigenvalues {:?} vs {target:.4}; p = 1 reduction diff {p1:.1e}", m.eigenvalues),
    ))
}

fn criterion_5(out: &Path) -> Verdict {
    let dir = out.join("monotonicity");
    let outcome = experiment(ExperimentId::Monotonicity, json!({"radii": [0.5, 0.75, 1.0, 1.25], "tol": 0.01}), &dir)?;
    let detail = outcome.checks.iter().map(|c| c.detail.clone()).collect::<Vec<_>>().join("; ");
    Ok((outcome.passed(), detail))
}

fn criterion_6(out: &Path) -> Verdict {
    let j11 = bessel_root(1, 1, RootKind::Function)?;
    let dir = out.join("schiffer-disk");
    let disk = experiment(ExperimentId::SchifferCheck, json!({"max_neumann": 0.02, "max_dirichlet": 0.02}), &dir)?;
    let rows = csv_rows(&dir.join("schiffer.csv"));
    let lambda: f64 = rows[0][3].parse().unwrap();
    let trace: f64 = rows[0][4].parse().unwrap();
    let flux: f64 = rows[1][4].parse().unwrap();
    let witness = relative_gap(lambda, j11 * j11) < 0.01
        && relative_gap(trace, bessel_j(0, j11)) < 0.02
        && relative_gap(flux, LAMBDA_UNIT_DISK) < 0.02;
    let ellipse = experiment(
        ExperimentId::SchifferCheck,
        json!({"curve": {"kind": "ellipse", "a": 1.3, "b": 1.0 / 1.3}, "min_neumann": 0.1, "min_dirichlet": 0.1}),
        &out.join("schiffer-ellipse"),
    )?;
    Ok((
        disk.passed() && witness && ellipse.passed(),
        format!(
            "disk residuals {:.2e} / {:.2e}; witness λ = {lambda:.4}, trace {trace:.5}, |flux| {flux:.5}; ellipse residuals {} / {}",
            rows[0][1].parse::<f64>().unwrap(),
            rows[1][1].parse::<f64>().unwrap(),
            ellipse.checks[0].detail,
            ellipse.checks[1].detail
        ),
    ))
}

fn random_field(rng: &mut ChaCha8Rng) -> AmbientField {
    let mut terms = || (0..3).map(|_| (rng.random_range(0..3u32), rng.random_range(0..3u32), rng.random_range(-1.0..1.0))).collect();
    let x = terms();
    let y = terms();
    AmbientField::new(x, y)
}

fn criterion_7(_: &Path) -> Verdict {
    let curves: Vec<Frame> = [
        FourierCurve::circle([0.0, 0.0], 1.0),
        FourierCurve::ellipse([0.1, 0.2], 1.2, 1.0 / 1.2),
        FourierCurve::kidney(),
    ]
    .iter()
    .map(|c| c.frame(256))
    .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut duality, mut tors, mut l1): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let spec = MetricSpec::ga(1.0);
    for frame in &curves {
        let n = frame.nodes();
        let (_, density) = random_alpha(&mut rng, n);
        let grad = riemannian_gradient(&spec, frame, &density)?;
        for _ in 0..20 {
            let (_, alpha) = random_alpha(&mut rng, n);
            let lhs = frame.inner(&density, &alpha);
            duality = duality.max((lhs - metric(&spec, frame, &grad, &alpha)?).abs());
        }
        for _ in 0..10 {
            let (v, w) = (random_field(&mut rng), random_field(&mut rng));
            tors = tors.max(torsion(frame, 1.0, &v, &w).max_abs());
        }
        let (_, f) = random_alpha(&mut rng, n);
        let back = apply_l1(frame, 0.7, &invert_l1(frame, 0.7, &f)?)?;
        l1 = l1.max(back.zip_with(&f, |a, b| a - b).max_abs());
    }
    let circle = &curves[0];
    let one = BoundaryScalar::constant(circle.nodes(), 1.0);
    let ga = (metric(&spec, circle, &one, &one)? - 4.0 * PI).abs();
    Ok((
        duality <= 1e-10 && tors <= 1e-10 && l1 <= 1e-8 && ga <= 1e-10,
        format!("duality {duality:.1e}, torsion {tors:.1e}, L1 inversion {l1:.1e}, |G^A(1,1) − 4π| {ga:.1e}"),
    ))
}

fn criterion_8(out: &Path) -> Verdict {
    let dir = out.join("hessian");
    let outcome = experiment(
        ExperimentId::HessianCheck,
        json!({"functional": "j2", "samples": 20, "min_positivity": 0.9, "max_gap": 5e-2, "seed": 8}),
        &dir,
    )?;
    let extra = &outcome.manifest["extra"];
    let density = extra["density_max"].as_f64().unwrap();
    let winner = &extra["winning_convention"];
    let gamma: f64 = csv_rows(&dir.join("hessian.csv"))[0][1].parse().unwrap();
    let u2 = bessel_j(0, bessel_root(1, 1, RootKind::Function)?).powi(2);
    Ok((
        outcome.passed() && density < 1e-3 && winner.is_i64(),
        format!(
            "γ = {gamma:.6} (series −{u2:.6}); density max {density:.2e}; {}; winning s = {winner}, gap {:.2e}",
            outcome.checks.iter().map(|c| format!("{} {}", c.name, c.detail)).collect::<Vec<_>>().join(", "),
            extra["winning_gap"].as_f64().unwrap()
        ),
    ))
}

fn criterion_9(out: &Path) -> Verdict {
    let dir = out.join("flow");
    let outcome = experiment(
        ExperimentId::Flow,
        json!({"curve": {"kind": "perturbed-disk", "amplitude": 0.05, "harmonics": [2, 4], "area": PI},
               "functional": "j3", "max_iter": 200, "area": PI, "max_disk_defect": 1e-2}),
        &dir,
    )?;
    let iterates = csv_rows(&dir.join("flow.csv")).len();
    let extra = &outcome.manifest["extra"];
    Ok((
        outcome.passed() && iterates <= 201,
        format!(
            "{} after {} steps, final disk_defect {:.2e}; {}",
            extra["termination"].as_str().unwrap(),
            iterates - 1,
            extra["final_disk_defect"].as_f64().unwrap(),
            outcome.checks.iter().map(|c| format!("{} {}", c.name, c.passed)).collect::<Vec<_>>().join(", ")
        ),
    ))
}

fn criterion_10(out: &Path) -> Verdict {
    let cases = [
        ("disk", json!({"kind": "circle"}), true),
        ("ellipse", json!({"kind": "ellipse", "a": 1.2, "b": 1.0 / 1.2}), true),
        ("kidney", json!({"kind": "kidney"}), false),
    ];
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, curve, expect) in cases {
        let dir = out.join(format!("symmetry-{name}"));
        let outcome =
            experiment(ExperimentId::SymmetryCheck, json!({"curve": curve, "directions": 16, "expect_p0": expect}), &dir)?;
        let first = csv_rows(&dir.join("symmetry.csv"))[0][3].to_string();
        ok &= outcome.passed() && (expect || first == "false");
        let turning = outcome.manifest["extra"]["total_curvature"].as_f64().unwrap();
        notes.push(format!("{name}: p0(1,0) {first}, ∮K ds − 2π = {:.1e}", turning - 2.0 * PI));
    }
    Ok((ok, notes.join("; ")))
}

fn criterion_11(out: &Path) -> Verdict {
    let configs = [
        (ExperimentId::FdCheck, json!({"random_alpha": 3, "h": 0.08, "seed": 5}), "fd_check.csv"),
        (ExperimentId::HessianCheck, json!({"h": 0.08, "samples": 5, "seed": 5}), "positivity.csv"),
        (ExperimentId::Flow, json!({"max_iter": 3, "h": 0.1, "seed": 5}), "flow.csv"),
    ];
    let mut same = true;
    for (id, config, file) in configs {
        let a = out.join(format!("repeat-a-{}", id.label()));
        let b = out.join(format!("repeat-b-{}", id.label()));
        experiment(id, config.clone(), &a)?;
        experiment(id, config, &b)?;
        for entry in fs::read_dir(&a).unwrap() {
            let name = entry.unwrap().file_name();
            if name.to_string_lossy().ends_with(".csv") {
                same &= fs::read(a.join(&name)).unwrap() == fs::read(b.join(&name)).unwrap();
            }
        }
        same &= a.join(file).exists();
    }
    Ok((same, "fd-check, hessian-check and flow CSVs compared byte for byte".into()))
}

fn main() -> ExitCode {
    // seeds come from the configs below
    std::env::remove_var("SCHIFFER_LAB_SEED");
    let root = tempfile::tempdir().unwrap();
    let criteria: [(&str, fn(&Path) -> Verdict); 11] = [
        ("disk Dirichlet spectrum", criterion_1),
        ("disk Neumann spectrum", criterion_2),
        ("Hadamard FD agreement", criterion_3),
        ("multiple-eigenvalue matrices", criterion_4),
        ("Λ monotonicity", criterion_5),
        ("Schiffer disk witness", criterion_6),
        ("Riemannian identities", criterion_7),
        ("Hessian at the critical disk", criterion_8),
        ("flow convergence", criterion_9),
        ("geometry predicates", criterion_10),
        ("determinism", criterion_11),
    ];
    let results: Vec<(bool, String)> = std::thread::scope(|scope| {
        let handles: Vec<_> = criteria
            .iter()
            .enumerate()
            .map(|(i, (_, check))| {
                let dir = root.path().join(format!("c{}", i + 1));
                scope.spawn(move || {
                    let started = std::time::Instant::now();
                    let verdict = check(&dir);
                    let secs = started.elapsed().as_secs_f64();
                    match verdict {
                        Ok((ok, detail)) => (ok, format!("{detail} [{secs:.1}s]")),
                        Err(e) => (false, format!("error: {e} [{secs:.1}s]")),
                    }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap_or((false, "panicked".into()))).collect()
    });
    let mut failures = 0;
    for (i, ((name, _), (ok, detail))) in criteria.iter().zip(&results).enumerate() {
        println!("criterion {:>2} {}: {name}: {detail}", i + 1, if *ok { "PASS" } else { "FAIL" });
        failures += usize::from(!ok);
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
