//! Flat settings shared by every command: training and synthetic-data keys
//! from the library plus paths and evaluation knobs.

use std::collections::BTreeSet;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use trajgan::config::{parse_value, read_kv_file, KeyValue};
use trajgan::eval::DEFAULT_N;
use trajgan::synth::SynthConfig;
use trajgan::training::TrainConfig;

#[derive(Debug, Clone)]
pub struct Settings {
    pub train: TrainConfig,
    pub synth: SynthConfig,
    /// Real training datasets.
    pub real: Vec<PathBuf>,
    /// Synthetic dataset; generated from `synth` when absent.
    pub synth_path: Option<PathBuf>,
    /// Held-out dataset scored after training.
    pub test: Option<PathBuf>,
    pub label: String,
    /// Save a checkpoint every this many steps; 0 saves only the final one.
    pub checkpoint_every: usize,
    pub checkpoint: Vec<PathBuf>,
    pub dataset: Option<PathBuf>,
    /// `name=path` pairs for the benchmark.
    pub datasets: Vec<(String, PathBuf)>,
    pub n: usize,
    /// Noise seed for eval, augment and plot.
    pub sample_seed: u64,
    pub out: Option<PathBuf>,
    pub scene: usize,
    explicit: BTreeSet<String>,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            synth: SynthConfig::default(),
            real: Vec::new(),
            synth_path: None,
            test: None,
            label: "run".into(),
            checkpoint_every: 0,
            checkpoint: Vec::new(),
            dataset: None,
            datasets: Vec::new(),
            n: DEFAULT_N,
            sample_seed: 0,
            out: None,
            scene: 0,
            explicit: BTreeSet::new(),
        }
    }
}

fn paths(v: &str) -> Vec<PathBuf> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(PathBuf::from)
        .collect()
}

impl Settings {
    /// Reads an optional config file, then applies `--key value` overrides.
    pub fn load(config: Option<&PathBuf>, overrides: &[String]) -> Result<Self> {
        let mut s = Self::default();
        if let Some(path) = config {
            for e in read_kv_file(path)? {
                s.set(&e.key, &e.value)
                    .with_context(|| format!("{}:{}", path.display(), e.line))?;
            }
        }
        let mut seen = BTreeSet::new();
        for (key, value) in parse_overrides(overrides)? {
            if !seen.insert(key.clone()) {
                bail!("flag --{key} given more than once");
            }
            s.set(&key, &value)?;
        }
        Ok(s)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let key = key.replace('-', "_");
        let known = match key.as_str() {
            "real" => {
                self.real = paths(v);
                true
            }
            "synth" => {
                self.synth_path = Some(v.into());
                true
            }
            "test" => {
                self.test = Some(v.into());
                true
            }
            "label" => {
                if v.is_empty() || v.contains(['/', '\\']) || v == "." || v == ".." {
                    bail!("label {v:?} is not a plain directory name");
                }
                self.label = v.into();
                true
            }
            "checkpoint_every" => {
                self.checkpoint_every = parse_value(&key, v)?;
                true
            }
            "checkpoint" => {
                self.checkpoint = paths(v);
                true
            }
            "dataset" => {
                self.dataset = Some(v.into());
                true
            }
            "datasets" => {
                self.datasets = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|item| match item.split_once('=') {
                        Some((name, path)) => (name.trim().to_string(), PathBuf::from(path.trim())),
                        None => {
                            let p = PathBuf::from(item);
                            let name = p
                                .file_stem()
                                .map(|s| s.to_string_lossy().into_owned())
                                .unwrap_or_else(|| item.to_string());
                            (name, p)
                        }
                    })
                    .collect();
                true
            }
            "n" => {
                self.n = parse_value(&key, v)?;
                true
            }
            "sample_seed" => {
                self.sample_seed = parse_value(&key, v)?;
                true
            }
            "out" => {
                self.out = Some(v.into());
                true
            }
            "scene" => {
                self.scene = parse_value(&key, v)?;
                true
            }
            _ => self.train.set(&key, v)? || self.synth.set(&key, v)?,
        };
        if !known {
            bail!("unknown config key `{key}`");
        }
        self.explicit.insert(key);
        Ok(())
    }

    /// Whether `key` was given in the config file or as a flag.
    pub fn is_set(&self, key: &str) -> bool {
        self.explicit.contains(key)
    }

    /// Effective settings as a config file that reproduces the run.
    pub fn to_config_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.train.entries().into_iter().chain(self.synth.entries()) {
            out.push_str(&format!("{k} = {v}\n"));
        }
        let join = |p: &[PathBuf]| {
            p.iter()
                .map(|p| p.display().to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        if !self.real.is_empty() {
            out.push_str(&format!("real = {}\n", join(&self.real)));
        }
        if let Some(p) = &self.synth_path {
            out.push_str(&format!("synth = {}\n", p.display()));
        }
        if let Some(p) = &self.test {
            out.push_str(&format!("test = {}\n", p.display()));
        }
        out.push_str(&format!("label = {}\n", self.label));
        out.push_str(&format!("checkpoint_every = {}\n", self.checkpoint_every));
        out.push_str(&format!("n = {}\n", self.n));
        out.push_str(&format!("sample_seed = {}\n", self.sample_seed));
        out
    }
}

/// Splits `--key value` / `--key=value` tokens into pairs.
pub fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(tok) = it.next() {
        let Some(flag) = tok.strip_prefix("--") else {
            bail!("unexpected argument {tok:?}; settings are given as --key value");
        };
        let (key, value) = match flag.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it
                    .next()
                    .with_context(|| format!("flag --{flag} needs a value"))?;
                (flag.to_string(), v.clone())
            }
        };
        out.push((key.replace('-', "_"), value));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn overrides_forms() {
        let p = parse_overrides(&args(&["--batch-size", "4", "--mode=sgan-real"])).unwrap();
        assert_eq!(
            p,
            vec![
                ("batch_size".into(), "4".into()),
                ("mode".into(), "sgan-real".into())
            ]
        );
        assert!(parse_overrides(&args(&["--steps"])).is_err());
        assert!(parse_overrides(&args(&["steps", "3"])).is_err());
    }

    #[test]
    fn duplicate_and_unknown_flags_rejected() {
        assert!(Settings::load(None, &args(&["--steps", "3", "--steps", "4"])).is_err());
        let e = Settings::load(None, &args(&["--stepz", "3"])).unwrap_err();
        assert!(e.to_string().contains("stepz"));
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.txt");
        std::fs::write(&cfg, "steps = 3\nmode = sgan-real\nn_scenes = 5\n").unwrap();
        let s = Settings::load(Some(&cfg), &args(&["--steps", "9"])).unwrap();
        assert_eq!(s.train.steps, 9);
        assert_eq!(s.synth.n_scenes, 5);
        assert!(s.is_set("mode") && !s.is_set("seed"));
    }

    #[test]
    fn datasets_list() {
        let s = Settings::load(None, &args(&["--datasets", "eth=a/eth.txt, b/hotel.txt"])).unwrap();
        assert_eq!(s.datasets[0], ("eth".into(), PathBuf::from("a/eth.txt")));
        assert_eq!(s.datasets[1].0, "hotel");
    }

    #[test]
    fn config_text_reloads() {
        let s = Settings::load(
            None,
            &args(&[
                "--mode",
                "sgan-hybrid",
                "--real_synth_ratio",
                "1:10",
                "--real",
                "x.txt",
            ]),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.txt");
        std::fs::write(&cfg, s.to_config_text()).unwrap();
        let back = Settings::load(Some(&cfg), &[]).unwrap();
        assert_eq!(back.train, s.train);
        assert_eq!(back.synth, s.synth);
        assert_eq!(back.real, s.real);
    }
}
