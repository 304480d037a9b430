use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn windcast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_windcast")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const TINY: &[&str] = &[
    "--stage1_days=12",
    "--val_days=2",
    "--stage2_days=2",
    "--test_days=2",
    "--l_c1_days=2",
    "--max_epochs=2",
    "--window_stride=4",
    "--batch_size=64",
    "--lstm_hidden=8",
    "--conv1_kernels=2",
    "--conv2_kernels=2",
    "--fc=16,8,4",
    "--grid=0.5,5",
    "--mlp_max_epochs=5",
];

fn with_tiny<'a>(mut args: Vec<&'a str>) -> Vec<&'a str> {
    args.extend_from_slice(TINY);
    args
}

fn synth(dir: &Path, farms: &str, days: &str) {
    let o = windcast(&["synth", "--seed", "7", "--farms", farms, "--days", days, "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn synth_writes_one_csv_per_farm_deterministically() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    synth(a.path(), "3", "400");
    synth(b.path(), "3", "400");
    for f in ["wf1.csv", "wf2.csv", "wf3.csv"] {
        let x = fs::read(a.path().join(f)).unwrap();
        assert_eq!(x, fs::read(b.path().join(f)).unwrap());
        assert_eq!(String::from_utf8(x).unwrap().lines().count(), 1 + 400 * 96);
    }
    let manifest = fs::read_to_string(a.path().join("manifest.toml")).unwrap();
    assert!(manifest.contains("seed = 7") && manifest.contains("farms = 3"));
    let o = windcast(&["synth", "--days", "0", "--out", a.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn usage_and_data_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().to_str().unwrap();
    assert_eq!(code(&windcast(&["exp", "4", "--out", out])), 1);
    assert_eq!(code(&windcast(&["frobnicate"])), 1);
    assert_eq!(code(&windcast(&["--help"])), 0);
    let missing = d.path().join("absent.csv");
    let o = windcast(&["backtest", "--data", missing.to_str().unwrap(), "--out", out]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("absent.csv"));
    fs::write(d.path().join("wf1.csv"), "timestamp,power\n").unwrap();
    let o = windcast(&["ingest-check", "--data", d.path().join("wf1.csv").to_str().unwrap(), "--out", out]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let o = windcast(&["backtest", "--l_c1_days", "3", "--l_c2_days", "2", "--out", out]);
    assert_eq!(code(&o), 1);
}

#[test]
fn config_file_with_overrides() {
    let d = tempfile::tempdir().unwrap();
    synth(d.path(), "1", "20");
    let cfg = d.path().join("run.toml");
    let data = d.path().join("wf1.csv");
    fs::write(
        &cfg,
        format!(
            "[data]\ndata = [{:?}]\n[plan]\nstage1_days = 12\nval_days = 2\nstage2_days = 2\ntest_days = 2\nl_c1_days = 2\n[stage2]\nblender = \"gpr\"\n",
            data.to_str().unwrap()
        ),
    )
    .unwrap();
    let out = d.path().join("bt");
    let mut args = vec!["--config", cfg.to_str().unwrap(), "backtest", "--blender", "svr", "--out", out.to_str().unwrap()];
    args.extend_from_slice(&TINY[4..]);
    let o = windcast(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = fs::read_to_string(out.join("backtest_manifest.txt")).unwrap();
    assert!(m.contains("blender = svr"));
    let rows = fs::read_to_string(out.join("records.csv")).unwrap().lines().count() - 1;
    assert!(rows > 2 * 96 - 20 && rows <= 2 * 96, "{rows}");
    let manifest = fs::read_to_string(out.join("manifest.toml")).unwrap();
    assert!(manifest.contains("blender = \"svr\"") && manifest.contains("stage1_days = 12"));

    // The manifest alone reproduces the run.
    let again = d.path().join("again");
    let o = windcast(&[
        "--config",
        out.join("manifest.toml").to_str().unwrap(),
        "backtest",
        "--out",
        again.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(
        fs::read(out.join("records.csv")).unwrap(),
        fs::read(again.join("records.csv")).unwrap()
    );

    fs::write(&cfg, "[plan]\nstage_one = 3\n").unwrap();
    assert_eq!(code(&windcast(&["--config", cfg.to_str().unwrap(), "synth"])), 1);
}

#[test]
fn train_saves_a_loadable_model() {
    let d = tempfile::tempdir().unwrap();
    synth(d.path(), "2", "20");
    let out = d.path().join("m");
    let o = windcast(&with_tiny(vec![
        "train",
        "--arch",
        "mimo",
        "--data",
        d.path().join("wf2.csv").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = windcast::models::load_model(fs::File::open(out.join("wf2_mimo.model")).unwrap()).unwrap();
    assert_eq!(m.architecture, windcast::models::Architecture::Mimo);
    assert!(m.meta.epochs_run >= 1);
}

#[test]
fn experiments_then_report() {
    let d = tempfile::tempdir().unwrap();
    let base = [
        "--farms",
        "2",
        "--days",
        "110",
        "--seasons",
        "2",
        "--seeds",
        "0",
        "--scenario_search_days",
        "20",
    ];
    let e1 = d.path().join("e1");
    let mut a = vec!["exp", "1", "--out", e1.to_str().unwrap()];
    a.extend_from_slice(&base);
    let o = windcast(&with_tiny(a));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let res = fs::read_to_string(e1.join("results.csv")).unwrap();
    for arch in ["MIMO", "MISO", "SIMO", "SISO"] {
        assert_eq!(res.lines().filter(|l| l.contains(&format!(",{arch},"))).count(), 4);
    }
    assert_eq!(fs::read_to_string(e1.join("ttests.csv")).unwrap().lines().count(), 7);

    let e2 = d.path().join("e2");
    let mut a = vec!["exp", "2", "--out", e2.to_str().unwrap()];
    a.extend_from_slice(&base);
    let o = windcast(&with_tiny(a));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(e2.join("scenario.csv").exists());

    let o = windcast(&["report", "--out", e2.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["tables/accuracy.txt", "tables/accuracy.csv", "tables/scenario.txt", "plots/ci95.csv", "plots/target_ranges.csv"] {
        assert!(e2.join(f).exists(), "{f}");
    }
    let o = windcast(&["report", "--out", d.path().join("empty").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}
