//! Acceptance suite. Each test checks one criterion at its pinned tolerance
//! and prints a single `criterion N: PASS|FAIL` line.
//!
//! The report lines appear even under the default output capture; add
//! `-- --nocapture` to also see the per-cell detail.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sdpsi::certificate::{self, Multipliers};
use sdpsi::generators::{sample_instance, InstanceSpec, ModelParams, Seed};
use sdpsi::linalg::{psd_project, spectral_norm, sym_eig, sym_eig_ql, SymMatrix};
use sdpsi::model::{t1_cbm, CbmParams, LabelVector, QualityParams, SbmParams, SideKind};
use sdpsi::thresholds::{
    assess, cbm_graph_exponent, chernoff_exponent_sbm, chernoff_exponent_ternary, empirical_tail_exponent, eta_cbm,
    eta_sbm, log_over_loglog, sbm_graph_exponent, TailDistribution, ThresholdCase,
};
use sdpsi_cli::commands::{simulate, RunOptions};
use sdpsi_cli::config::{parse_configs, ExperimentConfig};
use sdpsi_cli::trials::{run_trials, summarize, TrialContext, TrialPlan};

// Written to the raw stderr handle so the line survives libtest's capture.
fn report(id: u32, ok: bool, detail: &str) {
    let line = format!("criterion {id}: {} ({detail})\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(ok, "criterion {id} failed: {detail}");
}

fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs()
}

// ---------------------------------------------------------------------------
// 1. Quoted threshold values to ±0.05.

#[test]
fn criterion_1_quoted_threshold_values() {
    use ThresholdCase::*;
    let cases = [
        (SbmPartial { a: 3.0, b: 1.0, beta: 0.8 }, 1.1),
        (SbmPartial { a: 3.0, b: 1.0, beta: 0.2 }, 0.5),
        (CbmPartial { a: 1.0, xi: 0.2, beta: 1.0 }, 1.2),
        (CbmPartial { a: 1.0, xi: 0.2, beta: 0.3 }, 0.5),
        (SbmNoisy { a: 4.0, b: 1.0, beta: 1.0 }, 1.1),
        (SbmNoisy { a: 4.0, b: 1.0, beta: 0.2 }, 0.6),
        (CbmNoisy { a: 4.0, xi: 0.25, beta: 1.1 }, 1.2),
        (CbmNoisy { a: 4.0, xi: 0.25, beta: 0.1 }, 0.6),
    ];
    let mut worst = 0.0f64;
    for (case, quoted) in cases {
        let s = assess(case).unwrap().score;
        worst = worst.max((s - quoted).abs());
    }
    report(1, worst <= 0.05, &format!("max |score - quoted| = {worst:.4} over {} cases", cases.len()));
}

// ---------------------------------------------------------------------------
// 2. Analytic identities to 1e-9.

#[test]
fn criterion_2_analytic_identities() {
    const TOL: f64 = 1e-9;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut guard_violations = 0usize;
    for _ in 0..1000 {
        let a: f64 = rng.gen_range(0.1..20.0);
        let xi: f64 = rng.gen_range(0.01..0.49);
        let b: f64 = rng.gen_range(0.1..a);
        // Zero-side-information reductions.
        let d = (1.0 - xi).sqrt() - xi.sqrt();
        worst = worst.max((eta_cbm(a, xi, 0.0).unwrap() - a * d * d).abs());
        let d = a.sqrt() - b.sqrt();
        worst = worst.max((eta_sbm(a, b, 0.0).unwrap() - d * d / 2.0).abs());
        // η(a, β*) = β* at the kink.
        let kink = (1.0 - 2.0 * xi) * a * t1_cbm(xi).unwrap();
        worst = worst.max((eta_cbm(a, xi, kink).unwrap() - kink).abs() / (1.0 + kink));
        // β > 1 forces η > 1.
        let beta = rng.gen_range(1.0 + 1e-6..6.0);
        if eta_cbm(a, xi, beta).unwrap() <= 1.0 || eta_sbm(a, b, beta).unwrap() <= 1.0 {
            guard_violations += 1;
        }
    }
    // Chernoff rate of the ternary sum against η on a 10×10×10 grid.
    let mut grid_worst = 0.0f64;
    for i in 0..10 {
        let a = 0.5 + 0.8 * i as f64;
        for j in 0..10 {
            let xi = 0.02 + 0.045 * j as f64;
            let t1 = t1_cbm(xi).unwrap();
            for k in 0..10 {
                let beta = 0.25 * k as f64;
                let c = chernoff_exponent_ternary(a * (1.0 - xi), a * xi, -beta / t1).unwrap();
                grid_worst = grid_worst.max((c - eta_cbm(a, xi, beta).unwrap()).abs());
            }
        }
    }
    // Cross-check the graph exponents used elsewhere.
    let ge = (cbm_graph_exponent(2.0f64, 0.05) - eta_cbm(2.0, 0.05, 0.0).unwrap()).abs()
        + (sbm_graph_exponent(4.0f64, 1.0) - eta_sbm(4.0, 1.0, 0.0).unwrap()).abs();
    let ok = worst <= TOL && grid_worst <= TOL && ge <= TOL && guard_violations == 0;
    report(
        2,
        ok,
        &format!("identity err {worst:.2e}, ternary grid err {grid_worst:.2e}, beta>1 guard violations {guard_violations}"),
    );
}

// ---------------------------------------------------------------------------
// 3. Table reproduction within a factor of 2 at n = 100, and monotone
// decrease from n = 100 to n = 300.

/// Rows with printed mean errors at n = 100 and n = 300.
const TABLE_ROWS: &[(&str, f64, f64)] = &[
    (r#"{"model":"sbm","side":"partial","a":3,"b":1,"beta":0.2}"#, 4.1e-2, 2.5e-2),
    (r#"{"model":"cbm","side":"partial","a":1,"xi":0.2,"beta":0.3}"#, 4.1e-2, 2.2e-2),
    (r#"{"model":"sbm","side":"noisy","a":4,"b":1,"beta":0.2}"#, 2.0e-2, 1.3e-2),
    (r#"{"model":"cbm","side":"noisy","a":4,"xi":0.25,"beta":0.1}"#, 2.9e-2, 1.4e-2),
    (r#"{"model":"sbm","side":"none","a":3,"b":1}"#, 0.14, 0.11),
    (r#"{"model":"sbm","side":"none","a":4,"b":1}"#, 2.3e-2, 1.6e-2),
    (r#"{"model":"cbm","side":"none","a":1,"xi":0.2}"#, 0.29, 0.22),
    (r#"{"model":"cbm","side":"none","a":4,"xi":0.25}"#, 3.0e-2, 1.5e-2),
];

const TABLE_TRIALS_N100: u64 = 200;
/// Trials per row at n = 300, where one trial costs up to ~8 s on one core.
const TABLE_TRIALS_N300: u64 = 40;

fn table_config(row: &str, n: usize, trials: u64) -> ExperimentConfig {
    let mut v: serde_json::Value = serde_json::from_str(row).unwrap();
    v["n"] = n.into();
    v["trials"] = trials.into();
    parse_configs(&v.to_string()).unwrap().remove(0)
}

#[test]
fn criterion_3_table_reproduction() {
    let mut ok = true;
    let mut lines = Vec::new();
    for &(row, printed100, printed300) in TABLE_ROWS {
        let (r100, _) = simulate(&table_config(row, 100, TABLE_TRIALS_N100), RunOptions::default()).unwrap();
        let (r300, _) = simulate(&table_config(row, 300, TABLE_TRIALS_N300), RunOptions::default()).unwrap();
        let ratio = r100.mean_error_rate / printed100;
        let within = (0.5..=2.0).contains(&ratio);
        let monotone = r300.mean_error_rate < r100.mean_error_rate;
        ok &= within && monotone && r100.failures == 0 && r300.failures == 0;
        lines.push(format!(
            "{row}: n=100 {:.4} (printed {printed100}, ratio {ratio:.2}, failures {}), n=300 {:.4} (printed {printed300}, failures {})",
            r100.mean_error_rate, r100.failures, r300.mean_error_rate, r300.failures
        ));
    }
    for l in &lines {
        println!("  {l}");
    }
    report(3, ok, &format!("{} rows, factor-2 band at n=100 and decrease to n=300", TABLE_ROWS.len()));
}

// ---------------------------------------------------------------------------
// 4. Relaxation against exhaustive maximum likelihood at n = 10.

const ORACLE_CELLS: &[&str] = &[
    r#"{"model":"cbm","side":"partial","n":10,"a":3,"xi":0.15,"beta":0.3}"#,
    r#"{"model":"cbm","side":"noisy","n":10,"a":3,"xi":0.15,"beta":0.5}"#,
    r#"{"model":"cbm","side":"general","n":10,"a":3,"xi":0.15,"beta":0.5,"beta1":0.5}"#,
    r#"{"model":"sbm","side":"partial","n":10,"a":4,"b":1,"beta":0.3}"#,
    r#"{"model":"sbm","side":"noisy","n":10,"a":4,"b":1,"beta":0.5}"#,
    r#"{"model":"sbm","side":"general","n":10,"a":4,"b":1,"beta":0.5,"beta1":0.5}"#,
];

#[test]
fn criterion_4_relaxation_matches_oracle() {
    let mut ok = true;
    let mut detail = Vec::new();
    for (k, cell) in ORACLE_CELLS.iter().enumerate() {
        let mut cfg = parse_configs(cell).unwrap().remove(0);
        cfg.trials = 500;
        cfg.seed = 4000 + k as u64;
        let (row, cell) = sdpsi_cli::commands::oracle_check(&cfg).unwrap();
        let s = cell.summary;
        let agree = s.ml_agreement.unwrap_or(0.0);
        ok &= s.objective_violations == 0 && s.ml_agreement_trials > 0 && agree == 1.0 && s.failures == 0;
        detail.push(format!(
            "{}/{}: exact {:.2}, agreement {agree} on {}, objective violations {}",
            row.echo.model, row.echo.side, row.exact_rate, s.ml_agreement_trials, s.objective_violations
        ));
    }
    for d in &detail {
        println!("  {d}");
    }
    report(4, ok, "500 instances per variant at n=10");
}

// ---------------------------------------------------------------------------
// 5. Certificate soundness.

/// Mixed regimes: cells on both sides of the threshold for every variant.
const CERT_CELLS: &[&str] = &[
    r#"{"model":"cbm","side":"partial","n":40,"a":3,"xi":0.1,"beta":0.5}"#,
    r#"{"model":"cbm","side":"partial","n":40,"a":1,"xi":0.2,"beta":0.3}"#,
    r#"{"model":"cbm","side":"noisy","n":40,"a":4,"xi":0.25,"beta":1.1}"#,
    r#"{"model":"cbm","side":"noisy","n":40,"a":4,"xi":0.25,"beta":0.1}"#,
    r#"{"model":"cbm","side":"general","n":40,"a":4,"xi":0.2,"beta":0.5,"beta1":1.5}"#,
    r#"{"model":"sbm","side":"partial","n":40,"a":6,"b":1,"beta":0.5}"#,
    r#"{"model":"sbm","side":"partial","n":40,"a":3,"b":1,"beta":0.2}"#,
    r#"{"model":"sbm","side":"noisy","n":40,"a":6,"b":1,"beta":1.0}"#,
    r#"{"model":"sbm","side":"noisy","n":40,"a":4,"b":1,"beta":0.2}"#,
    r#"{"model":"sbm","side":"general","n":40,"a":6,"b":1,"beta":0.5,"beta1":1.5}"#,
];

#[test]
fn criterion_5_certificate_soundness() {
    let mut seeds = 0u64;
    let mut valid = 0u64;
    let mut violations = 0u64;
    for (k, cell) in CERT_CELLS.iter().enumerate() {
        let cfg = parse_configs(cell).unwrap().remove(0);
        let spec = cfg.instance_spec().unwrap();
        let solver = cfg.solver.apply();
        let ctx = TrialContext {
            spec: &spec,
            solver: &solver,
            metric: cfg.error_metric,
            multipliers: cfg.multipliers(),
            plan: TrialPlan {
                certificate: true,
                oracle: false,
            },
            master: Seed(5000 + k as u64),
        };
        let records = run_trials(&ctx, 60);
        let s = summarize(&records);
        seeds += records.len() as u64;
        for r in &records {
            if r.certificate_valid == Some(true) {
                valid += 1;
                if !r.exact {
                    violations += 1;
                }
            }
        }
        println!("  {cell}: validity {:?}, exact {:.2}", s.certificate_validity_rate, s.exact_recovery_rate);
    }

    // S*v0 = 0 on every variant, for the truth of fresh instances.
    let mut worst_null = 0.0f64;
    for (k, cell) in CERT_CELLS.iter().enumerate() {
        let cfg = parse_configs(cell).unwrap().remove(0);
        let spec = cfg.instance_spec().unwrap();
        for t in 0..20 {
            let inst = sample_instance(&spec, Seed(9000 + 100 * k as u64 + t)).unwrap();
            let c = certificate::build_for_instance::<f64>(&spec, &inst, Multipliers::default()).unwrap();
            let v0 = c.null_vector(&inst.truth);
            let sv = c.s_star.matvec(&v0);
            worst_null = worst_null.max(sv.iter().map(|x| x * x).sum::<f64>().sqrt());
        }
    }
    let ok = seeds >= 500 && valid > 0 && violations == 0 && worst_null <= 1e-10;
    report(
        5,
        ok,
        &format!("{seeds} seeds, {valid} certified, {violations} certified-but-inexact, max |S*v0| {worst_null:.2e}"),
    );
}

// ---------------------------------------------------------------------------
// 6. Empirical tail exponents within ±35%.

const TAIL_SAMPLES: usize = 100_000;

#[test]
fn criterion_6_tail_exponents() {
    let (a, xi, n) = (2.0, 0.05, 100);
    let cbm = empirical_tail_exponent(
        TailDistribution::Ternary {
            rho1: a * (1.0 - xi),
            rho2: a * xi,
        },
        n,
        log_over_loglog,
        TAIL_SAMPLES,
        Seed(6),
    )
    .unwrap();
    let cbm_target = cbm_graph_exponent(a, xi);
    let cbm_err = rel_err(cbm.exponent, cbm_target);

    let (sa, sb) = (6.0, 1.0);
    let sbm = empirical_tail_exponent(
        TailDistribution::BinomDifference { a: sa, b: sb },
        n,
        log_over_loglog,
        TAIL_SAMPLES,
        Seed(7),
    )
    .unwrap();
    let sbm_target = chernoff_exponent_sbm(sa, sb, 0.0).unwrap();
    let sbm_err = rel_err(sbm.exponent, sbm_target);

    report(
        6,
        cbm_err <= 0.35 && sbm_err <= 0.35,
        &format!(
            "censored: {:.3} vs {cbm_target:.3} (rel {cbm_err:.2}); block: {:.3} vs {sbm_target:.3} (rel {sbm_err:.2})",
            cbm.exponent, sbm.exponent
        ),
    );
}

// ---------------------------------------------------------------------------
// 7. Eigendecomposition and PSD projection.

fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix<f64> {
    let mut m = SymMatrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            m.set(i, j, rng.gen_range(-1.0..1.0));
        }
    }
    m
}

#[test]
fn criterion_7_numerical_kernels() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_rec = 0.0f64;
    let mut worst_orth = 0.0f64;
    for k in 0..1000 {
        // Sizes cover 1..=200, the last draw at the cap.
        let n = if k == 999 { 200 } else { rng.gen_range(1..=200) };
        let a = random_sym(&mut rng, n);
        let scale = 1.0 + a.frob_norm();
        for e in [sym_eig(&a).unwrap(), sym_eig_ql(&a).unwrap()] {
            worst_rec = worst_rec.max(e.reconstruct().sub(&a).frob_norm() / scale);
            worst_orth = worst_orth.max(e.orthonormality_error());
        }
    }
    let mut worst_idem = 0.0f64;
    let mut expansions = 0usize;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=30);
        let a = random_sym(&mut rng, n);
        let b = random_sym(&mut rng, n);
        let pa = psd_project(&a).unwrap();
        let pb = psd_project(&b).unwrap();
        worst_idem = worst_idem.max(psd_project(&pa).unwrap().sub(&pa).frob_norm() / (1.0 + pa.frob_norm()));
        if pa.sub(&pb).frob_norm() > a.sub(&b).frob_norm() * (1.0 + 1e-10) + 1e-12 {
            expansions += 1;
        }
    }
    let ok = worst_rec <= 1e-8 && worst_orth <= 1e-8 && worst_idem <= 1e-8 && expansions == 0;
    report(
        7,
        ok,
        &format!("recon {worst_rec:.2e}, orth {worst_orth:.2e}, idempotence {worst_idem:.2e}, expansions {expansions}"),
    );
}

// ---------------------------------------------------------------------------
// 8. ‖G − E[G]‖ / √(log n) stays below 5.

/// E[G] given the labels, built directly from the edge laws.
fn expected_graph(model: &ModelParams, x: &LabelVector) -> SymMatrix<f64> {
    let n = x.len();
    let xs = x.as_slice();
    match model {
        ModelParams::Cbm(p) => {
            let pe = p.edge_prob(n).unwrap();
            SymMatrix::from_fn(n, |i, j| {
                if i == j {
                    0.0
                } else {
                    pe * (1.0 - 2.0 * p.xi) * (xs[i] * xs[j]) as f64
                }
            })
        }
        ModelParams::Sbm(p) => {
            let (pp, q) = p.edge_probs(n).unwrap();
            SymMatrix::from_fn(n, |i, j| {
                if i == j {
                    0.0
                } else if xs[i] == xs[j] {
                    pp
                } else {
                    q
                }
            })
        }
    }
}

#[test]
fn criterion_8_spectral_norm_echo() {
    let models = [
        ModelParams::Cbm(CbmParams::new(2.0, 0.2).unwrap()),
        ModelParams::Sbm(SbmParams::new(3.0, 1.0).unwrap()),
    ];
    let mut worst = 0.0f64;
    for model in models {
        for n in [100, 200, 400, 800] {
            let spec = InstanceSpec {
                n,
                model,
                side: SideKind::None,
                quality: QualityParams::new(0.0, 0.0).unwrap(),
                balanced: None,
            };
            for s in 0..50 {
                let inst = sample_instance(&spec, Seed(8000 + s)).unwrap();
                let dev = inst.graph.to_matrix::<f64>().sub(&expected_graph(&model, &inst.truth));
                let r = spectral_norm(&dev).unwrap() / (n as f64).ln().sqrt();
                worst = worst.max(r);
            }
        }
    }
    report(8, worst <= 5.0, &format!("max ratio {worst:.3} over 2 models x 4 sizes x 50 seeds"));
}
