//! `trajgan` command-line driver.
//!
//! Every command reads an optional flat config file (`--config`) followed
//! by `--key value` settings. Outputs go under `$TRAJGAN_OUT/<label>`
//! (default `runs/<label>`).

mod settings;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use trajgan::data::{load_scenes, write_dataset, Scene};
use trajgan::eval::{
    ade, best_of_n_eval, format_table, leave_one_out, plot_scene, sample_predictions, scene_rng,
    write_csv, MetricsReport, NamedDataset, NamedPrediction,
};
use trajgan::synth::generate_synthetic_dataset;
use trajgan::training::{
    augment_scenes, load_checkpoint, Checkpoint, LossLog, Mode, TrainData, Trainer,
};

use settings::Settings;

pub const OUT_ENV: &str = "TRAJGAN_OUT";

#[derive(Parser, Debug)]
#[command(
    name = "trajgan",
    version,
    about = "Adversarially augmented pedestrian trajectory prediction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Settings as `--key value` pairs; they override the config file.
    #[arg(
        trailing_var_arg = true,
        allow_hyphen_values = true,
        value_name = "--KEY VALUE"
    )]
    settings: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train in the configured mode (needs `real`, and `synth` or synthetic keys).
    Train(Common),
    /// Best-of-N ADE/FDE of a checkpoint on `dataset`.
    Eval(Common),
    /// Write Augmenter outputs for the `synth` dataset to `out`.
    Augment(Common),
    /// Generate a synthetic straight-line dataset into `out`.
    GenSynth(Common),
    /// Leave-one-out over `datasets`.
    Benchmark(Common),
    /// SVG of one scene with each checkpoint's best-of-N prediction.
    Plot(Common),
}

fn run_dir(s: &Settings) -> Result<PathBuf> {
    let root = std::env::var_os(OUT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| "runs".into());
    let dir = root.join(&s.label);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn load_all(paths: &[PathBuf], t_obs: usize, t_pred: usize) -> Result<Vec<Scene>> {
    let mut out = Vec::new();
    for p in paths {
        let scenes = load_scenes(p, t_obs, t_pred)?;
        if scenes.is_empty() {
            bail!("{}: no complete {t_pred}-frame scenes", p.display());
        }
        out.extend(scenes);
    }
    Ok(out)
}

fn stem(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| p.display().to_string())
}

fn synthetic_scenes(s: &Settings) -> Result<Vec<Scene>> {
    let t = &s.train;
    match &s.synth_path {
        Some(p) => load_all(std::slice::from_ref(p), t.t_obs, t.t_pred),
        None => Ok(generate_synthetic_dataset(&s.synth, t.t_pred)?),
    }
}

fn train_data(s: &Settings, real: Vec<Scene>) -> Result<TrainData> {
    let mode = s.train.mode;
    if mode.needs_real() && real.is_empty() {
        bail!("mode {mode} needs real scenes; set `real`");
    }
    let synth = if mode.needs_synth() {
        synthetic_scenes(s)?
    } else {
        Vec::new()
    };
    Ok(TrainData { real, synth })
}

fn write_metrics(dir: &Path, name: &str, rows: &[MetricsReport]) -> Result<()> {
    let table = format_table(rows);
    print!("{table}");
    std::fs::write(dir.join(format!("{name}.txt")), &table)?;
    write_csv(rows, dir.join(format!("{name}.csv")))?;
    Ok(())
}

fn single_checkpoint(s: &Settings) -> Result<Checkpoint> {
    match s.checkpoint.as_slice() {
        [p] => load_checkpoint(p).with_context(|| format!("loading checkpoint {}", p.display())),
        [] => bail!("set `checkpoint`"),
        _ => bail!("this command takes exactly one checkpoint"),
    }
}

/// Flags may not contradict the sequence lengths a checkpoint was trained with.
fn check_lengths(s: &Settings, ck: &Checkpoint) -> Result<()> {
    let c = ck.config();
    for (key, given, stored) in [
        ("t_obs", s.train.t_obs, c.t_obs),
        ("t_pred", s.train.t_pred, c.t_pred),
    ] {
        if s.is_set(key) && given != stored {
            bail!("{key} = {given} conflicts with the checkpoint's {key} = {stored}");
        }
    }
    Ok(())
}

fn cmd_train(s: &Settings) -> Result<()> {
    s.train.validate()?;
    let t = &s.train;
    let real = load_all(&s.real, t.t_obs, t.t_pred)?;
    let data = train_data(s, real)?;
    let dir = run_dir(s)?;
    std::fs::write(dir.join("config.txt"), s.to_config_text())?;
    let ckpt_dir = dir.join("checkpoints");
    if s.checkpoint_every > 0 {
        std::fs::create_dir_all(&ckpt_dir)?;
    }
    let mut trainer = Trainer::new(t.clone())?;
    let mut log = LossLog::create(dir.join("loss.log"))?;
    eprintln!(
        "training {} for {} steps on {} real / {} synthetic scenes -> {}",
        t.mode,
        t.steps,
        data.real.len(),
        data.synth.len(),
        dir.display()
    );
    trainer.train(&data, t.steps, |tr, r| {
        log.append(r)?;
        let done = tr.step();
        if s.checkpoint_every > 0 && done % s.checkpoint_every == 0 {
            tr.save_checkpoint(ckpt_dir.join(format!("step_{done:06}.ckpt")))?;
        }
        Ok(())
    })?;
    let final_path = dir.join("model.ckpt");
    trainer.save_checkpoint(&final_path)?;
    eprintln!("saved {}", final_path.display());

    if t.mode == Mode::IndependentAugmenter {
        let out = augment_scenes(&trainer.models.augmenter, &data.synth, s.sample_seed)?;
        let path = dir.join("augmented.txt");
        write_dataset(&out, &path)?;
        eprintln!("wrote {} augmented scenes to {}", out.len(), path.display());
    }
    if let Some(test) = &s.test {
        let scenes = load_all(std::slice::from_ref(test), t.t_obs, t.t_pred)?;
        let report = best_of_n_eval(
            &trainer.models.generator,
            &stem(test),
            &scenes,
            s.n,
            s.sample_seed,
        )?;
        write_metrics(&dir, "metrics", &[report])?;
    }
    Ok(())
}

fn cmd_eval(s: &Settings) -> Result<()> {
    let ck = single_checkpoint(s)?;
    check_lengths(s, &ck)?;
    let c = ck.config();
    let path = s.dataset.as_ref().context("set `dataset`")?;
    let scenes = load_all(std::slice::from_ref(path), c.t_obs, c.t_pred)?;
    let report = best_of_n_eval(ck.generator(), &stem(path), &scenes, s.n, s.sample_seed)?;
    write_metrics(&run_dir(s)?, "metrics", &[report])
}

fn cmd_augment(s: &Settings) -> Result<()> {
    let ck = single_checkpoint(s)?;
    check_lengths(s, &ck)?;
    let a = ck.augmenter()?;
    let c = ck.config();
    let input = s
        .synth_path
        .as_ref()
        .context("set `synth` to the dataset to augment")?;
    let scenes = load_all(std::slice::from_ref(input), c.t_obs, c.t_pred)?;
    let out = augment_scenes(a, &scenes, s.sample_seed)?;
    let path = match &s.out {
        Some(p) => p.clone(),
        None => run_dir(s)?.join("augmented.txt"),
    };
    write_dataset(&out, &path)?;
    println!("wrote {} augmented scenes to {}", out.len(), path.display());
    Ok(())
}

fn cmd_gen_synth(s: &Settings) -> Result<()> {
    let scenes = generate_synthetic_dataset(&s.synth, s.train.t_pred)?;
    let path = match &s.out {
        Some(p) => p.clone(),
        None => run_dir(s)?.join("synthetic.txt"),
    };
    write_dataset(&scenes, &path)?;
    println!(
        "wrote {} synthetic scenes to {}",
        scenes.len(),
        path.display()
    );
    Ok(())
}

fn cmd_benchmark(s: &Settings) -> Result<()> {
    if s.datasets.len() < 2 {
        bail!(
            "benchmark needs at least 2 datasets in `datasets`, got {}",
            s.datasets.len()
        );
    }
    s.train.validate()?;
    let t = &s.train;
    let datasets = s
        .datasets
        .iter()
        .map(|(name, p)| {
            Ok(NamedDataset {
                name: name.clone(),
                scenes: load_all(std::slice::from_ref(p), t.t_obs, t.t_pred)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let synth = if t.mode.needs_synth() {
        synthetic_scenes(s)?
    } else {
        Vec::new()
    };
    let bench = leave_one_out(&datasets, s.n, s.sample_seed, |name, train| {
        eprintln!("split {name}: training on {} scenes", train.len());
        let mut trainer = Trainer::new(t.clone())?;
        let data = TrainData {
            real: if t.mode.needs_real() {
                train.to_vec()
            } else {
                Vec::new()
            },
            synth: synth.clone(),
        };
        trainer.train(&data, t.steps, |_, _| Ok(()))?;
        Ok(trainer.models.generator)
    })?;
    write_metrics(&run_dir(s)?, "benchmark", &bench.rows())
}

fn cmd_plot(s: &Settings) -> Result<()> {
    if s.checkpoint.is_empty() {
        bail!("set `checkpoint` (comma-separated for several models)");
    }
    let path = s.dataset.as_ref().context("set `dataset`")?;
    let cks = s
        .checkpoint
        .iter()
        .map(|p| load_checkpoint(p).with_context(|| format!("loading checkpoint {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let c = cks[0].config().clone();
    for ck in &cks {
        check_lengths(s, ck)?;
        if (ck.config().t_obs, ck.config().t_pred) != (c.t_obs, c.t_pred) {
            bail!("checkpoints disagree on t_obs/t_pred");
        }
    }
    let scenes = load_all(std::slice::from_ref(path), c.t_obs, c.t_pred)?;
    let scene = scenes
        .get(s.scene)
        .with_context(|| format!("scene {} out of range ({} scenes)", s.scene, scenes.len()))?;
    let mut predictions = Vec::new();
    for (p, ck) in s.checkpoint.iter().zip(&cks) {
        let samples = sample_predictions(
            ck.generator(),
            scene,
            s.n,
            &mut scene_rng(s.sample_seed, s.scene),
        )?;
        let mut best = (f64::INFINITY, 0);
        for (j, sample) in samples.iter().enumerate() {
            let mut total = 0.0;
            for (path, traj) in sample.iter().zip(&scene.trajectories) {
                total += ade(path, &traj.points[c.t_obs..])?;
            }
            if total < best.0 {
                best = (total, j);
            }
        }
        let mut name = stem(p);
        if name == "model" {
            if let Some(parent) = p.parent().and_then(|d| d.file_name()) {
                name = parent.to_string_lossy().into_owned();
            }
        }
        predictions.push(NamedPrediction {
            name,
            paths: samples[best.1].clone(),
        });
    }
    let out = match &s.out {
        Some(p) => p.clone(),
        None => run_dir(s)?.join(format!("scene_{}.svg", s.scene)),
    };
    plot_scene(scene, c.t_obs, &predictions, &out)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let (common, f): (&Common, fn(&Settings) -> Result<()>) = match &cli.command {
        Command::Train(c) => (c, cmd_train),
        Command::Eval(c) => (c, cmd_eval),
        Command::Augment(c) => (c, cmd_augment),
        Command::GenSynth(c) => (c, cmd_gen_synth),
        Command::Benchmark(c) => (c, cmd_benchmark),
        Command::Plot(c) => (c, cmd_plot),
    };
    let s = Settings::load(common.config.as_ref(), &common.settings)?;
    f(&s)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
