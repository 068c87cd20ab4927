use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use covdist::identity::FactorIdentities;
use covdist::rkhs::{log_from_factor, FeatureFactor, GramBlocks};
use covdist_cli::{cmd_identity_check, format_value, EXIT_FAILURE};

fn covdist(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_covdist"))
        .args(args)
        .env_remove("COVDIST_SEED")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn dist_examples() {
    let dir = tempfile::tempdir().unwrap();
    let e1 = std::f64::consts::E - 1.0;
    let a = write(dir.path(), "a.csv", &format!("{e1:.17e},0\n0,{e1:.17e}\n"));
    let z = write(dir.path(), "z.csv", "0,0\n0,0\n");
    let o = covdist(&["dist", &a, &z, "--metric", "loghs", "--gamma", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), "1.414213562373\n");

    let d4 = write(dir.path(), "d4.csv", "4\n");
    let d1 = write(dir.path(), "d1.csv", "1\n");
    let o = covdist(&["dist", &d4, &d1, "--metric", "bw"]);
    assert_eq!(stdout(&o), "1.000000000000\n");

    let spd = write(dir.path(), "s.csv", "2,0.5,0\n0.5,1,0.25\n0,0.25,3\n");
    for metric in [
        "hs",
        "sqrt",
        "bw",
        "power-euclid",
        "log-euclid",
        "procrustes",
        "loghs",
        "aihs",
        "ai-exact",
        "sinkhorn",
    ] {
        let mut args = vec!["dist", &spd, &spd, "--metric", metric];
        match metric {
            "loghs" | "aihs" => args.extend(["--gamma", "0.5"]),
            "power-euclid" | "procrustes" => args.extend(["--alpha", "0.5"]),
            "sinkhorn" => args.extend(["--epsilon", "0.1"]),
            _ => {}
        }
        let o = covdist(&args);
        assert_eq!(stdout(&o), "0\n", "{metric}: {}", stderr(&o));
    }
}

#[test]
fn dist_input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.csv", "1,2\n2,zz\n");
    let ok = write(dir.path(), "ok.csv", "1,0\n0,1\n");
    let o = covdist(&["dist", &bad, &ok, "--metric", "hs"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("row 2, column 2"), "{}", stderr(&o));

    let big = write(dir.path(), "big.csv", "1,0,0\n0,1,0\n0,0,1\n");
    assert_eq!(covdist(&["dist", &ok, &big, "--metric", "hs"]).status.code(), Some(2));
    let asym = write(dir.path(), "asym.csv", "1,2\n0,1\n");
    assert_eq!(covdist(&["dist", &asym, &ok, "--metric", "hs"]).status.code(), Some(2));
    assert_eq!(covdist(&["dist", &ok, &ok, "--metric", "loghs"]).status.code(), Some(2));
    assert_eq!(
        covdist(&["dist", &ok, &ok, "--metric", "hs", "--gamma", "1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(covdist(&["dist", &ok, &ok, "--metric", "nope"]).status.code(), Some(2));
}

#[test]
fn dist_numerical_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let indef = write(dir.path(), "i.csv", "1,0\n0,-1\n");
    let ok = write(dir.path(), "ok.csv", "1,0\n0,1\n");
    let o = covdist(&["dist", &indef, &ok, "--metric", "bw"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("not PSD"), "{}", stderr(&o));
}

#[test]
fn number_format() {
    assert_eq!(format_value(2f64.sqrt()), "1.414213562373");
    assert_eq!(format_value(0.0), "0");
    assert_eq!(format_value(1.5e-7), "1.500000000000e-7");
}

const CONVERGE: &str = r#"
experiment = "smoke"
m = 20
path_counts = [10, 20]
gamma = 0.1
metrics = ["loghs"]
base_seed = 4

[kernel1]
family = "laplacian"
a = 1.0

[kernel2]
family = "laplacian"
a = 1.2
"#;

#[test]
fn converge_writes_rows_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", CONVERGE);
    let out = dir.path().join("r.csv");
    let out_s = out.to_string_lossy().into_owned();
    let o = covdist(&["converge", "--config", &cfg, "--out", &out_s]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let first = fs::read(&out).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "experiment,trial,N,m,metric,estimate,reference,abs_error,wall_time_ms"
    );
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("smoke,0,10,20,loghs,"));
    assert!(dir.path().join("r.csv.summary.csv").exists());

    covdist(&["converge", "--config", &cfg, "--out", &out_s]);
    assert_eq!(fs::read(&out).unwrap(), first);

    let o = Command::new(env!("CARGO_BIN_EXE_covdist"))
        .args(["converge", "--config", &cfg, "--out", &out_s])
        .env("COVDIST_SEED", "99")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_ne!(fs::read(&out).unwrap(), first);
}

#[test]
fn config_errors_exit_2_with_field_names() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv").to_string_lossy().into_owned();
    let typo = write(dir.path(), "t.toml", &CONVERGE.replace("gamma = 0.1", "gama = 0.1"));
    let o = covdist(&["converge", "--config", &typo, "--out", &out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("gama"), "{}", stderr(&o));

    let invalid = write(
        dir.path(),
        "v.toml",
        &CONVERGE.replace("m = 20", "m = 0").replace("0.1", "-1"),
    );
    let o = covdist(&["converge", "--config", &invalid, "--out", &out]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("m: ") && err.contains("gamma: "), "{err}");
}

#[test]
fn classify_single_repeat() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "sigma1 = 1.0\nsigma2 = 1.0\nm = 20\nN = 30\ntrain_per_class = 2\ntest_per_class = 10\nrepeats = 1\nmetrics = [\"hs\"]\n",
    );
    let out = dir.path().join("out");
    let o = covdist(&["classify", "--config", &cfg, "--out", &out.to_string_lossy()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut files: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    files.sort();
    assert_eq!(files, ["confusion_hs_0.csv", "errors.csv"]);
    let errors = fs::read_to_string(out.join("errors.csv")).unwrap();
    assert!(errors.starts_with("metric,mean_error,std_error,repeats\nhs,"));
    let counts: usize = fs::read_to_string(out.join("confusion_hs_0.csv"))
        .unwrap()
        .split([',', '\n'])
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>().unwrap())
        .sum();
    assert_eq!(counts, 20);
}

#[test]
fn oracle_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "o.toml",
        "variance1 = 1.0\nvariance2 = 4.0\nm = 200\ngamma = 0.1\nmetrics = [\"hs\", \"aihs\"]\n",
    );
    let out = dir.path().join("o.csv");
    let o = covdist(&["oracle", "--config", &cfg, "--out", &out.to_string_lossy()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("experiment,trial,m,metric,estimate,oracle,rel_error\noracle,0,200,hs,"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn identity_check_reports() {
    let o = covdist(&["identity-check", "--seed", "5", "--trials", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 3);
    assert_eq!(
        stdout(&o),
        stdout(&covdist(&["identity-check", "--seed", "5", "--trials", "3"]))
    );
    assert_eq!(covdist(&["identity-check", "--trials", "0"]).status.code(), Some(2));
}

fn loghs_negated_cross(f1: &FeatureFactor, g1: f64, f2: &FeatureFactor, g2: f64) -> covdist::Result<f64> {
    let plain = GramBlocks::from_factors(f1, g1, f2, g2)?.loghs_expanded()?.powi(2);
    let l1 = log_from_factor(&FeatureFactor::new(f1.as_matrix() / g1.sqrt())?)?;
    let l2 = log_from_factor(&FeatureFactor::new(f2.as_matrix() / g2.sqrt())?)?;
    Ok((plain + 4.0 * l1.as_matrix().dot(l2.as_matrix())).sqrt())
}

#[test]
fn identity_check_catches_tampering() {
    let tampered = FactorIdentities {
        loghs_from_factors: loghs_negated_cross,
        ..FactorIdentities::default()
    };
    let mut out = Vec::new();
    let err = cmd_identity_check(8, 4, &tampered, &mut out).unwrap_err();
    assert_eq!(err.code, EXIT_FAILURE);
    assert!(
        err.message.contains("loghs_from_factors (seed 8, trial"),
        "{}",
        err.message
    );
    assert!(String::from_utf8(out).unwrap().contains("FAIL"));
}

#[test]
fn shipped_configs_validate() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let result = if name.starts_with("convergence") {
            covdist::io::read_config::<covdist::ConvergenceConfig>(&path).map(|c| c.validate().is_ok())
        } else if name.starts_with("classify") {
            covdist::io::read_config::<covdist::ClassificationConfig>(&path).map(|c| c.validate().is_ok())
        } else {
            covdist::io::read_config::<covdist::OracleConfig>(&path).map(|c| c.validate().is_ok())
        };
        assert!(result.unwrap(), "{name}");
        seen += 1;
    }
    assert_eq!(seen, 4);
}
