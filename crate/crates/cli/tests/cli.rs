use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sdpsi_cli::commands::{threshold, CsvRow, SimulateRow};
use sdpsi_cli::config::{parse_configs, ModelName, SideName};
use sdpsi_cli::CliError;
use sdpsi::thresholds::{Branch, Verdict};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sdpsi"))
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Drops the trailing wall-time column of every line.
fn strip_wall_time(csv: &str) -> String {
    csv.lines()
        .map(|l| l.rsplit_once(',').map(|(head, _)| head).unwrap_or(l))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn threshold_prints_score_branch_and_verdict() {
    let o = bin()
        .args(["threshold", "--model", "sbm", "--side", "partial", "--a", "3", "--b", "1", "--beta", "0.8"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "model,side,a,b,xi,beta,beta1,score,branch,verdict");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let score: f64 = row[7].parse().unwrap();
    assert!((score - 1.068).abs() < 1e-3);
    assert_eq!(row[8], "additive");
    assert_eq!(row[9], "recoverable");

    let r = threshold(ModelName::Cbm, SideName::Noisy, 4.0, None, Some(0.25), 0.1, None).unwrap();
    assert!((r.score - 0.587).abs() < 1e-3);
    assert_eq!(r.verdict, Verdict::NotRecoverable);
    assert_eq!(r.branch, Branch::Eta);

    // Graph-only exponent a(√(1−ξ) − √ξ)².
    let r = threshold(ModelName::Cbm, SideName::None, 4.0, None, Some(0.25), 0.0, None).unwrap();
    let d = 0.75f64.sqrt() - 0.5;
    assert!((r.score - 4.0 * d * d).abs() < 1e-12);
    assert_eq!(r.branch, Branch::Additive);
}

#[test]
fn threshold_rejects_missing_parameters() {
    let o = bin().args(["threshold", "--model", "cbm", "--a", "4"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(matches!(
        threshold(ModelName::Sbm, SideName::Noisy, 1.0, Some(2.0), None, 0.1, None),
        Err(CliError::Config(_))
    ));
}

#[test]
fn config_schema_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        // b is required for the SBM.
        r#"{"model":"sbm","side":"partial","n":20,"a":3,"beta":0.2}"#,
        // xi is not a CBM-only field on the SBM.
        r#"{"model":"sbm","side":"partial","n":20,"a":3,"b":1,"xi":0.1,"beta":0.2}"#,
        // Unknown field.
        r#"{"model":"cbm","side":"none","n":20,"a":1,"xi":0.2,"colour":1}"#,
        // beta1 without general side information.
        r#"{"model":"cbm","side":"noisy","n":20,"a":1,"xi":0.2,"beta":0.5,"beta1":1}"#,
        // Edge probability above one.
        r#"{"model":"cbm","side":"none","n":10,"a":9,"xi":0.2}"#,
        "not json",
    ];
    for (k, body) in cases.iter().enumerate() {
        let p = write(dir.path(), &format!("c{k}.json"), body);
        let o = bin().arg("simulate").arg(&p).output().unwrap();
        assert_eq!(o.status.code(), Some(2), "case {k}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(parse_configs(body).is_err());
    }
    let o = bin().args(["simulate", "/nonexistent/config.json"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_header_is_frozen_and_reruns_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sim.json",
        r#"[{"model":"cbm","side":"partial","n":30,"a":3,"xi":0.1,"beta":0.4,"trials":12,"seed":5},
            {"model":"sbm","side":"noisy","n":30,"a":5,"b":1,"beta":0.6,"trials":12,"seed":5}]"#,
    );
    let out1 = dir.path().join("a.csv");
    let out2 = dir.path().join("b.csv");
    for (out, workers) in [(&out1, "1"), (&out2, "3")] {
        let o = bin()
            .args(["simulate", "--workers", workers, "--out"])
            .arg(out)
            .arg(&cfg)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = std::fs::read_to_string(&out1).unwrap();
    let b = std::fs::read_to_string(&out2).unwrap();
    let header = a.lines().next().unwrap();
    assert!(header.starts_with(
        "model,side,n,a,b,xi,beta,beta1,trials,mean_error_rate,err_ci_lo,err_ci_hi,exact_recovery_rate,seed"
    ));
    assert_eq!(header, SimulateRow::HEADER.join(","));
    assert_eq!(a.lines().count(), 3);
    assert_eq!(strip_wall_time(&a), strip_wall_time(&b));
}

#[test]
fn dump_trials_reproduces_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sim.json",
        r#"{"model":"cbm","side":"noisy","n":24,"a":3,"xi":0.1,"beta":0.5,"trials":15}"#,
    );
    let dump = dir.path().join("trials.jsonl");
    let o = bin()
        .args(["simulate", "--seed", "99", "--dump-trials"])
        .arg(&dump)
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let row: Vec<String> = text.lines().nth(1).unwrap().split(',').map(String::from).collect();
    let header: Vec<&str> = SimulateRow::HEADER.to_vec();
    let col = |name: &str| -> &str { &row[header.iter().position(|h| *h == name).unwrap()] };
    assert_eq!(col("seed"), "99");
    assert_eq!(col("trials"), "15");

    let records: Vec<serde_json::Value> = std::fs::read_to_string(&dump)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(records.len(), 15);
    let errors: Vec<f64> = records.iter().map(|r| r["error_rate"].as_f64().unwrap()).collect();
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    let exact = records.iter().filter(|r| r["exact"].as_bool().unwrap()).count() as f64 / 15.0;
    assert!((mean - col("mean_error_rate").parse::<f64>().unwrap()).abs() < 1e-12);
    assert!((exact - col("exact_recovery_rate").parse::<f64>().unwrap()).abs() < 1e-12);
    for (i, r) in records.iter().enumerate() {
        assert_eq!(r["index"].as_u64().unwrap(), i as u64);
    }
}

#[test]
fn overwhelming_side_information_gives_zero_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sim.json",
        r#"{"model":"cbm","side":"partial","n":100,"a":1,"xi":0.2,"beta":5,"trials":20}"#,
    );
    let o = bin().arg("simulate").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[9].parse::<f64>().unwrap(), 0.0);
    assert_eq!(row[12].parse::<f64>().unwrap(), 1.0);
}

#[test]
fn strict_exact_reports_recovery_failures() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sim.json",
        r#"{"model":"cbm","side":"none","n":30,"a":1,"xi":0.2,"trials":10}"#,
    );
    let o = bin().args(["simulate", "--strict-exact"]).arg(&cfg).output().unwrap();
    let text = stdout(&o);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let headline: f64 = row[9].parse().unwrap();
    let exact: f64 = row[12].parse().unwrap();
    assert!((headline - (1.0 - exact)).abs() < 1e-12);
}

#[test]
fn solver_failure_rate_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sim.json",
        r#"{"model":"cbm","side":"none","n":40,"a":2,"xi":0.2,"trials":4,"solver":{"max_iter":2}}"#,
    );
    let o = bin().arg("simulate").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(3));
    // Failures are reported, not dropped.
    let text = stdout(&o);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[14], "4");
}

#[test]
fn phase_grid_rows_carry_score_and_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "phase.json",
        r#"{"model":"sbm","side":"partial","n":40,"a":3,"b":1,"trials":10,
            "grid":{"param":"beta","values":[0.0,0.8,3.0]}}"#,
    );
    let o = bin().arg("phase").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let score_col = header.iter().position(|h| *h == "score").unwrap();
    let verdict_col = header.iter().position(|h| *h == "verdict").unwrap();
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    let scores: Vec<f64> = rows.iter().map(|r| r[score_col].parse().unwrap()).collect();
    assert!(scores[0] < scores[1] && scores[1] < scores[2]);
    assert_eq!(rows[0][verdict_col], "not_recoverable");
    assert_eq!(rows[2][verdict_col], "recoverable");
}

#[test]
fn oracle_check_refuses_large_n() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "o.json", r#"{"model":"cbm","side":"none","n":14,"a":2,"xi":0.1,"trials":2}"#);
    let o = bin().arg("oracle-check").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oracle_check_noiseless_is_exact_and_agrees() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "o.json",
        r#"[{"model":"cbm","side":"none","n":10,"a":4,"xi":0.0,"trials":30},
            {"model":"cbm","side":"partial","n":10,"a":4,"xi":0.0,"beta":0.3,"trials":30}]"#,
    );
    let o = bin().arg("oracle-check").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    for l in lines {
        let r: Vec<&str> = l.split(',').collect();
        // A noiseless connected graph pins the labels; isolated nodes do not.
        let exact: f64 = r[col("exact_rate")].parse().unwrap();
        assert!(exact > 0.5, "{l}");
        assert_eq!(r[col("ml_agreement")], "1");
        assert_eq!(r[col("objective_violations")], "0");
    }
}

#[test]
fn certify_validity_implies_exactness() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"[{"model":"cbm","side":"noisy","n":60,"a":4,"xi":0.25,"beta":1.1,"trials":40},
            {"model":"cbm","side":"noisy","n":60,"a":4,"xi":0.25,"beta":0.1,"trials":40}]"#,
    );
    let o = bin().arg("certify").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    let above: f64 = rows[0][col("certificate_validity_rate")].parse().unwrap();
    let below: f64 = rows[1][col("certificate_validity_rate")].parse().unwrap();
    assert!(below < above, "below {below}, above {above}");
    assert_eq!(rows[0][col("agreement")], "1");
}

#[test]
fn certify_validity_at_n300_above_threshold() {
    let cfg = parse_configs(r#"{"model":"cbm","side":"noisy","n":300,"a":4,"xi":0.25,"beta":1.1,"trials":12}"#)
        .unwrap()
        .remove(0);
    let (row, _) = sdpsi_cli::commands::certify(&cfg).unwrap();
    assert!(row.certificate_validity_rate >= 0.5, "{row:?}");
}
