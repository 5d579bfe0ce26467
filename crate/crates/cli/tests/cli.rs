use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use trajgan::data::load_scenes;
use trajgan::eval::read_csv;
use trajgan::training::load_checkpoint;

const TINY: &[&str] = &[
    "--t_obs",
    "4",
    "--t_pred",
    "8",
    "--batch_size",
    "2",
    "--embed_dim",
    "4",
    "--encoder_hidden",
    "6",
    "--pool_embed",
    "4",
    "--pool_out",
    "4",
    "--decoder_embed",
    "4",
    "--decoder_hidden",
    "6",
    "--noise_dim",
    "2",
    "--pool_dim",
    "4",
    "--d_embed",
    "4",
    "--d_hidden",
    "6",
    "--d_mlp",
    "4",
];

fn trajgan(out_root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trajgan"))
        .args(args)
        .env("TRAJGAN_OUT", out_root)
        .output()
        .expect("binary runs")
}

fn with_tiny<'a>(args: &[&'a str]) -> Vec<&'a str> {
    let mut v = args.to_vec();
    v.extend_from_slice(TINY);
    v
}

fn assert_ok(o: &Output) {
    assert!(
        o.status.success(),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    );
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Writes `n` synthetic scenes of 8 frames and returns the path.
fn gen(dir: &Path, name: &str, n: usize, seed: u64, jitter: f64) -> PathBuf {
    let path = dir.join(name);
    let (p, n, seed, jitter) = (
        path.to_str().unwrap(),
        n.to_string(),
        seed.to_string(),
        jitter.to_string(),
    );
    let o = trajgan(
        dir,
        &[
            "gen-synth",
            "--out",
            p,
            "--t_pred",
            "8",
            "--n_scenes",
            &n,
            "--synth_seed",
            &seed,
            "--jitter_std",
            &jitter,
        ],
    );
    assert_ok(&o);
    path
}

struct Fixture {
    _tmp: tempfile::TempDir,
    dir: PathBuf,
    real: PathBuf,
    synth: PathBuf,
}

fn fixture() -> Fixture {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_path_buf();
    let real = gen(&dir, "real.txt", 6, 1, 0.05);
    let synth = gen(&dir, "synth.txt", 6, 2, 0.0);
    Fixture {
        _tmp: tmp,
        dir,
        real,
        synth,
    }
}

fn train(f: &Fixture, label: &str, mode: &str, seed: &str) -> Output {
    let args = with_tiny(&[
        "train",
        "--real",
        f.real.to_str().unwrap(),
        "--synth",
        f.synth.to_str().unwrap(),
        "--mode",
        mode,
        "--steps",
        "3",
        "--seed",
        seed,
        "--label",
        label,
    ]);
    trajgan(&f.dir, &args)
}

#[test]
fn train_is_deterministic() {
    let f = fixture();
    assert_ok(&train(&f, "a", "aa-sgan", "7"));
    assert_ok(&train(&f, "b", "aa-sgan", "7"));
    let a = std::fs::read(f.dir.join("a/loss.log")).unwrap();
    let b = std::fs::read(f.dir.join("b/loss.log")).unwrap();
    assert_eq!(a, b);
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 4);
    assert!(f.dir.join("a/config.txt").exists());
}

#[test]
fn unknown_key_names_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let o = trajgan(tmp.path(), &["train", "--stepz", "3"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("stepz"));

    let cfg = tmp.path().join("c.txt");
    std::fs::write(&cfg, "steps = 3\nwobble = 1\n").unwrap();
    let o = trajgan(tmp.path(), &["train", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("wobble"));
}

#[test]
fn duplicate_flags_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let o = trajgan(
        tmp.path(),
        &["gen-synth", "--n_scenes", "3", "--n-scenes", "4"],
    );
    assert!(!o.status.success());
    assert!(stderr(&o).contains("more than once"));
}

#[test]
fn sgan_real_checkpoint_has_no_augmenter() {
    let f = fixture();
    assert_ok(&train(&f, "base", "sgan-real", "1"));
    let ck = f.dir.join("base/model.ckpt");
    assert!(load_checkpoint(&ck).unwrap().augmenter().is_err());
    let o = trajgan(
        &f.dir,
        &[
            "augment",
            "--checkpoint",
            ck.to_str().unwrap(),
            "--synth",
            f.synth.to_str().unwrap(),
        ],
    );
    assert!(!o.status.success());
    assert!(stderr(&o).contains("no Augmenter"));
}

#[test]
fn eval_defaults_and_errors() {
    let f = fixture();
    assert_ok(&train(&f, "m", "aa-sgan", "3"));
    let ck = f.dir.join("m/model.ckpt");
    let (ck_s, real_s) = (ck.to_str().unwrap(), f.real.to_str().unwrap());
    let eval = |label: &str| {
        let o = trajgan(
            &f.dir,
            &[
                "eval",
                "--checkpoint",
                ck_s,
                "--dataset",
                real_s,
                "--label",
                label,
            ],
        );
        assert_ok(&o);
        read_csv(f.dir.join(label).join("metrics.csv")).unwrap()
    };
    let a = eval("e1");
    assert_eq!(a.len(), 1);
    assert_eq!(a[0].n_samples, 20);
    assert_eq!(a[0].dataset_name, "real");
    assert_eq!(a, eval("e2"));
    let csv = std::fs::read_to_string(f.dir.join("e1/metrics.csv")).unwrap();
    assert!(csv.starts_with("dataset,ade,fde,n_scenes,N,seed\n"));

    let o = trajgan(
        &f.dir,
        &["eval", "--checkpoint", "missing.ckpt", "--dataset", real_s],
    );
    assert!(!o.status.success());
    let o = trajgan(
        &f.dir,
        &[
            "eval",
            "--checkpoint",
            ck_s,
            "--dataset",
            real_s,
            "--t_obs",
            "3",
        ],
    );
    assert!(!o.status.success());
    assert!(stderr(&o).contains("t_obs"));
    let o = trajgan(
        &f.dir,
        &[
            "eval",
            "--checkpoint",
            ck_s,
            "--dataset",
            real_s,
            "--n",
            "0",
        ],
    );
    assert!(!o.status.success());
}

#[test]
fn augment_round_trip() {
    let f = fixture();
    assert_ok(&train(&f, "ia", "independent-augmenter", "5"));
    assert!(f.dir.join("ia/augmented.txt").exists());
    let ck = f.dir.join("ia/model.ckpt");
    let run = |name: &str| {
        let out = f.dir.join(name);
        let o = trajgan(
            &f.dir,
            &[
                "augment",
                "--checkpoint",
                ck.to_str().unwrap(),
                "--synth",
                f.synth.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
            ],
        );
        assert_ok(&o);
        out
    };
    let a = run("aug1.txt");
    let b = run("aug2.txt");
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let scenes = load_scenes(&a, 4, 8).unwrap();
    assert_eq!(scenes.len(), load_scenes(&f.synth, 4, 8).unwrap().len());
    assert!(scenes.iter().all(|s| s.len() == Some(8)));
}

#[test]
fn benchmark_rows_and_precondition() {
    let f = fixture();
    let names = ["eth", "hotel", "univ", "zara1", "zara2"];
    let list: Vec<String> = names
        .iter()
        .enumerate()
        .map(|(k, n)| {
            format!(
                "{n}={}",
                gen(&f.dir, &format!("{n}.txt"), 3, 10 + k as u64, 0.05).display()
            )
        })
        .collect();
    let joined = list.join(",");
    let args = with_tiny(&[
        "benchmark",
        "--datasets",
        &joined,
        "--mode",
        "sgan-real",
        "--steps",
        "1",
        "--n",
        "2",
        "--label",
        "bench",
    ]);
    assert_ok(&trajgan(&f.dir, &args));
    let rows = read_csv(f.dir.join("bench/benchmark.csv")).unwrap();
    assert_eq!(rows.len(), 6);
    assert_eq!(rows[5].dataset_name, "average");
    let mean = rows[..5].iter().map(|r| r.ade).sum::<f64>() / 5.0;
    assert!((rows[5].ade - mean).abs() < 1e-12);

    let args = with_tiny(&["benchmark", "--datasets", &list[0], "--steps", "1"]);
    let o = trajgan(&f.dir, &args);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("at least 2"));
}

#[test]
fn plot_writes_svg() {
    let f = fixture();
    assert_ok(&train(&f, "p", "sgan-real", "2"));
    let ck = f.dir.join("p/model.ckpt");
    let out = f.dir.join("scene.svg");
    let o = trajgan(
        &f.dir,
        &[
            "plot",
            "--checkpoint",
            ck.to_str().unwrap(),
            "--dataset",
            f.real.to_str().unwrap(),
            "--scene",
            "1",
            "--n",
            "4",
            "--out",
            out.to_str().unwrap(),
        ],
    );
    assert_ok(&o);
    let svg = std::fs::read_to_string(&out).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains(">p<"));
}
