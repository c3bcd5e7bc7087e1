use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use privshift::simulation::{gen_generalization_rep, generalization_coefficients, GeneralizationConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_privshift"));
    c.env_remove("PRIVSHIFT_SEED").env_remove("SOURCE_DATE_EPOCH");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

/// RCT and auxiliary CSVs shaped like the generalization study at p=4.
fn shifted_study(dir: &Path) -> (PathBuf, PathBuf) {
    let cfg = GeneralizationConfig::new(4, 1, 3);
    let coefs = generalization_coefficients(&cfg);
    let rep = gen_generalization_rep(&cfg, &coefs, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let names = ["x1", "x2", "x3", "x4", "xs"];
    let mut rct = format!("y,t,{}\n", names.join(","));
    for i in 0..rep.rct.n() {
        let x: Vec<String> = rep.rct.x().row(i).iter().map(|v| v.to_string()).collect();
        rct.push_str(&format!("{},{},{}\n", rep.rct.y()[i], u8::from(rep.rct.t()[i]), x.join(",")));
    }
    let mut aux = format!("y,{}\n", names.join(","));
    for row in rep.aux.values().row_iter() {
        let cells: Vec<String> = row.iter().skip(1).map(|v| v.to_string()).collect();
        aux.push_str(&cells.join(","));
        aux.push('\n');
    }
    (write(dir, "rct.csv", &rct), write(dir, "aux.csv", &aux))
}

#[test]
fn dp_gram_records_its_budget_and_prints_the_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let (_, aux) = shifted_study(dir.path());
    let out = dir.path().join("dp.json");
    let o = run(&["transform", "--input", s(&aux), "--method", "dp-gram", "--outcome", "y", "--epsilon", "3", "--delta", "1e-5", "--seed", "1", "--output", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let a = json(&out);
    assert_eq!(a["transform"]["method"], "dp");
    assert_eq!(a["transform"]["epsilon"], 3.0);
    assert_eq!(a["transform"]["delta"], 1e-5);
    assert_eq!(a["p"], 5);
    assert_eq!(a["matrix"].as_array().unwrap().len(), 49);
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("correlation ") && stdout.contains("total"), "{stdout}");
}

#[test]
fn zero_entry_noise_equals_the_exact_gram() {
    let dir = tempfile::tempdir().unwrap();
    let (_, aux) = shifted_study(dir.path());
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    assert_eq!(code(&run(&["transform", "--input", s(&aux), "--method", "gram", "--outcome", "y", "--output", s(&a)])), 0);
    assert_eq!(code(&run(&["transform", "--input", s(&aux), "--method", "en-gram", "--lambda", "0", "--outcome", "y", "--output", s(&b)])), 0);
    let (ja, jb) = (json(&a), json(&b));
    assert_eq!(ja["matrix"], jb["matrix"]);
    assert_eq!(ja["column_names"], jb["column_names"]);
    assert_eq!(jb["transform"]["lambda"], 0.0);
}

#[test]
fn equal_seeds_give_byte_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let (_, aux) = shifted_study(dir.path());
    for method in ["dp-gram", "en-gram"] {
        let paths: Vec<PathBuf> = (0..2).map(|i| dir.path().join(format!("{method}{i}.json"))).collect();
        for p in &paths {
            let o = run(&["transform", "--input", s(&aux), "--method", method, "--epsilon", "2", "--lambda", "1", "--outcome", "y", "--seed", "9", "--output", s(p)]
                .into_iter()
                .filter(|a| method == "dp-gram" || (*a != "--epsilon" && *a != "2"))
                .filter(|a| method == "en-gram" || (*a != "--lambda" && *a != "1"))
                .collect::<Vec<_>>());
            assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        }
        assert_eq!(std::fs::read(&paths[0]).unwrap(), std::fs::read(&paths[1]).unwrap());
    }
}

#[test]
fn seed_comes_from_the_environment_when_the_flag_is_absent() {
    let dir = tempfile::tempdir().unwrap();
    let (_, aux) = shifted_study(dir.path());
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    let o = bin()
        .args(["transform", "--input", s(&aux), "--method", "en-gram", "--outcome", "y", "--output", s(&a)])
        .env("PRIVSHIFT_SEED", "77")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let o = run(&["transform", "--input", s(&aux), "--method", "en-gram", "--outcome", "y", "--seed", "77", "--output", s(&b)]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&a)["seed"], 77);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn synthetic_rows_are_written_as_csv() {
    let dir = tempfile::tempdir().unwrap();
    let (_, aux) = shifted_study(dir.path());
    let out = dir.path().join("syn.csv");
    let o = run(&["transform", "--input", s(&aux), "--method", "synth", "--rows", "250", "--outcome", "y", "--output", s(&out)]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("y,x1,x2,x3,x4,xs\n"));
    assert_eq!(text.lines().count(), 251);
    let g = dir.path().join("syn.json");
    let o = run(&["transform", "--input", s(&aux), "--method", "synth", "--outcome", "y", "--output", s(&g)]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&g)["transform"]["method"], "synth-derived");
}

#[test]
fn bad_inputs_map_to_stable_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = write(dir.path(), "missing.csv", "y,x\n1,2\n3,\n");
    let intercept = write(dir.path(), "int.csv", "y,intercept,x\n1,1,2\n3,1,4\n5,1,5\n");
    let out = dir.path().join("o.json");
    assert_eq!(code(&run(&["transform", "--input", s(&missing), "--method", "gram", "--outcome", "y", "--output", s(&out)])), 2);
    assert_eq!(code(&run(&["transform", "--input", s(&intercept), "--method", "gram", "--outcome", "y", "--output", s(&out)])), 2);
    assert_eq!(code(&run(&["transform", "--input", "/nonexistent/in.csv", "--method", "gram", "--outcome", "y", "--output", s(&out)])), 4);
    assert_eq!(code(&run(&["transform", "--input", s(&missing), "--method", "bogus", "--outcome", "y", "--output", s(&out)])), 2);
    let ok = write(dir.path(), "ok.csv", "y,x\n1,2\n3,4\n5,7\n");
    assert_eq!(code(&run(&["transform", "--input", s(&ok), "--method", "dp-gram", "--outcome", "y", "--output", s(&out)])), 2);
    assert_eq!(code(&run(&["transform", "--input", s(&ok), "--method", "gram", "--outcome", "y", "--output", "/nonexistent/dir/o.json"])), 4);
    assert!(!out.exists());
}

#[test]
fn difference_in_means_of_two_rows() {
    let dir = tempfile::tempdir().unwrap();
    let rct = write(dir.path(), "rct.csv", "y,t\n2,1\n1,0\n");
    let out = dir.path().join("dm.json");
    let o = run(&["estimate", "--rct", s(&rct), "--estimator", "dm", "--outcome", "y", "--treatment", "t", "--output", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&out);
    assert_eq!(r["tau_hat"], 1.0);
    assert_eq!(r["estimator_id"], "diff_in_means");
    let manifest = json(&PathBuf::from(format!("{}.manifest.json", out.display())));
    assert_eq!(manifest["command"], "estimate");
    assert_eq!(manifest["args"]["seed"], 0);
}

#[test]
fn calibration_to_the_trial_itself_reduces_to_ipw() {
    let dir = tempfile::tempdir().unwrap();
    let (rct, _) = shifted_study(dir.path());
    let text = std::fs::read_to_string(&rct).unwrap();
    // The trial's own covariates (with the outcome) as auxiliary data.
    let own: String = text
        .lines()
        .map(|l| {
            let mut c: Vec<&str> = l.split(',').collect();
            c.remove(1);
            c.join(",") + "\n"
        })
        .collect();
    let own = write(dir.path(), "own.csv", &own);
    let art = dir.path().join("own.json");
    assert_eq!(code(&run(&["transform", "--input", s(&own), "--method", "gram", "--outcome", "y", "--output", s(&art)])), 0);
    let est = |e: &str| {
        let out = dir.path().join(format!("{e}.json"));
        let o = run(&["estimate", "--rct", s(&rct), "--aux", s(&art), "--estimator", e, "--outcome", "y", "--treatment", "t", "--output", s(&out)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        json(&out)["tau_hat"].as_f64().unwrap()
    };
    let (cw, ipw) = (est("cw"), est("ipw"));
    assert!((cw - ipw).abs() < 1e-8, "{cw} vs {ipw}");
}

#[test]
fn bootstrapped_acw_interval_is_finite() {
    let dir = tempfile::tempdir().unwrap();
    let (rct, aux) = shifted_study(dir.path());
    let out = dir.path().join("acw.json");
    let o = run(&["estimate", "--rct", s(&rct), "--aux", s(&aux), "--estimator", "acw", "--outcome", "y", "--treatment", "t", "--bootstrap", "100", "--seed", "4", "--output", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&out);
    let (lo, hi) = (r["ci_low"].as_f64().unwrap(), r["ci_high"].as_f64().unwrap());
    assert!(lo.is_finite() && hi.is_finite() && hi > lo);
    assert!(r["diagnostics"]["bootstrap_se"].as_f64().unwrap() > 0.0);
    for e in ["fipw", "loop"] {
        let out = dir.path().join(format!("{e}.json"));
        let o = run(&["estimate", "--rct", s(&rct), "--aux", s(&aux), "--estimator", e, "--outcome", "y", "--treatment", "t", "--output", s(&out)]);
        assert_eq!(code(&o), 0, "{e}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn unreachable_auxiliary_means_exit_with_the_residual() {
    let dir = tempfile::tempdir().unwrap();
    let rct = write(dir.path(), "rct.csv", "y,t,x\n1,1,0.1\n2,0,0.2\n3,1,0.3\n1,0,0.4\n");
    let aux = write(dir.path(), "aux.csv", "y,x\n1,5\n2,6\n3,7\n");
    let out = dir.path().join("cw.json");
    let o = run(&["estimate", "--rct", s(&rct), "--aux", s(&aux), "--estimator", "cw", "--outcome", "y", "--treatment", "t", "--output", s(&out)]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8(o.stderr).unwrap().contains("residual"));
    let o = run(&["estimate", "--rct", s(&rct), "--estimator", "cw", "--outcome", "y", "--treatment", "t", "--output", s(&out)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn zero_replicates_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let o = run(&["simulate", "--study", "generalization", "--p", "10", "--reps", "0", "--output", s(&out)]);
    assert_eq!(code(&o), 2);
    let o = run(&["simulate", "--study", "precision", "--p", "10", "--transforms", "dp:0", "--output", s(&out)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn simulate_is_reproducible_and_replayable() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a.csv"), dir.path().join("b.csv"), dir.path().join("c.csv"));
    let args = |out: &Path| {
        vec!["simulate", "--study", "precision", "--p", "5,8", "--generations", "4", "--assignments", "30", "--transforms", "gram,en:1,dp:3,synth", "--seed", "12", "--output"]
            .into_iter()
            .map(String::from)
            .chain([s(out).to_string()])
            .collect::<Vec<_>>()
    };
    assert_eq!(code(&bin().args(args(&a)).output().unwrap()), 0);
    assert_eq!(code(&bin().arg("--threads").arg("1").args(args(&b)).output().unwrap()), 0);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let manifest = format!("{}.manifest.json", a.display());
    let o = run(&["replay", "--manifest", &manifest, "--output", s(&c)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
    let text = std::fs::read_to_string(&a).unwrap();
    assert!(text.starts_with("study,p,estimator,transform,mse,bias2,variance,coverage,var_tau,re_dm,re_reg,failures\n"));
    assert_eq!(text.lines().count(), 1 + 2 * (2 + 2 * 4));
}

#[test]
fn reports_render_tables_and_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let res = dir.path().join("g.csv");
    let o = run(&["simulate", "--study", "generalization", "--p", "4", "--reps", "8", "--bootstrap", "5", "--transforms", "gram,en:1", "--seed", "3", "--output", s(&res)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (md, csv, plot) = (dir.path().join("t.md"), dir.path().join("t.csv"), dir.path().join("plot.csv"));
    let o = run(&["report", "--input", s(&res), "--table", "coverage", "--format", "markdown", "--output", s(&md), "--plot-data", s(&plot)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(code(&run(&["report", "--input", s(&res), "--table", "coverage", "--format", "csv", "--output", s(&csv)])), 0);
    let md = std::fs::read_to_string(&md).unwrap();
    let names: Vec<&str> = md.lines().skip(2).map(|l| l.trim_matches('|').split('|').next().unwrap().trim()).collect();
    assert_eq!(names, ["dm", "ols", "acw[gram]", "acw[en:1]"]);
    // Markdown cells equal the csv cells.
    let md_cells: Vec<Vec<String>> = md
        .lines()
        .enumerate()
        .filter(|(i, _)| *i != 1)
        .map(|(_, l)| l.trim_matches('|').split('|').map(|c| c.trim().to_string()).collect())
        .collect();
    let csv_cells: Vec<Vec<String>> = std::fs::read_to_string(&csv).unwrap().lines().map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(md_cells, csv_cells);
    let plot = std::fs::read_to_string(&plot).unwrap();
    assert!(plot.starts_with("study,p,row,component,value\n"));
    assert_eq!(plot.lines().count(), 1 + 2 * 4);
    assert_eq!(code(&run(&["report", "--input", s(&res), "--table", "precision"])), 2);

    let empty = write(dir.path(), "empty.csv", "study,p,estimator,transform,mse,bias2,variance,coverage,var_tau,re_dm,re_reg,failures\n");
    let o = run(&["report", "--input", s(&empty), "--table", "coverage"]);
    assert_eq!(code(&o), 2);
    assert!(!o.stderr.is_empty());
}
