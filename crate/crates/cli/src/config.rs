use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use seqrec::data::{Split, SynthConfig};
use seqrec::eval::{parse_buckets, DEFAULT_BUCKETS};
use seqrec::optim::TrainConfig;
use seqrec::{Error, ModelKind, Result};
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Yoochoose,
    Internal,
}

impl Flavor {
    pub fn default_n(self) -> Vec<usize> {
        match self {
            Flavor::Yoochoose => vec![1, 5],
            Flavor::Internal => vec![1, 20],
        }
    }

    pub fn default_buckets(self) -> Vec<(usize, usize)> {
        match self {
            Flavor::Yoochoose => DEFAULT_BUCKETS.to_vec(),
            Flavor::Internal => vec![(2, 5), (6, 25), (26, 40)],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputSection {
    pub delimiter: String,
    pub header: bool,
    pub session_col: usize,
    pub time_col: usize,
    pub item_col: usize,
}

impl Default for InputSection {
    fn default() -> Self {
        InputSection {
            delimiter: ",".into(),
            header: false,
            session_col: 0,
            time_col: 1,
            item_col: 2,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Raw click log for `preprocess`.
    pub input: Option<PathBuf>,
    /// Dataset cache, or a run directory holding `dataset.bin`.
    pub data: Option<PathBuf>,
    /// Checkpoint file, or a training run directory.
    pub checkpoint: Option<PathBuf>,
    /// Report to compute uplift against (file or evaluation run directory).
    pub baseline_report: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    pub n_e: usize,
    pub n_h: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            kind: ModelKind::GruReLn,
            n_e: 100,
            n_h: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub k: usize,
    /// Empty means the dataset flavor's default.
    pub n: Vec<usize>,
    /// `lo-hi,lo-hi,...`; empty means the dataset flavor's default.
    pub buckets: String,
    pub max_offset: usize,
    pub resamples: usize,
    pub split: Split,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            k: 20,
            n: Vec::new(),
            buckets: String::new(),
            max_offset: 20,
            resamples: 1000,
            split: Split::Test,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds every random choice; copied into the train and synth sections.
    pub seed: u64,
    pub threads: usize,
    pub precision: Precision,
    pub dataset_flavor: Flavor,
    pub runs_root: PathBuf,
    /// Explicit output directory; otherwise `runs_root/<command>-<time>-<hash>`.
    pub run_dir: Option<PathBuf>,
    pub paths: Paths,
    pub input: InputSection,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub eval: EvalSection,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            threads: 1,
            precision: Precision::F32,
            dataset_flavor: Flavor::Yoochoose,
            runs_root: PathBuf::from("runs"),
            run_dir: None,
            paths: Paths::default(),
            input: InputSection::default(),
            model: ModelSection::default(),
            train: TrainConfig::default(),
            eval: EvalSection::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Fills flavor-dependent defaults and propagates the seed.
    pub fn resolve(&mut self) -> Result<()> {
        self.train.seed = self.seed;
        self.synth.seed = self.seed;
        if self.eval.n.is_empty() {
            self.eval.n = self.dataset_flavor.default_n();
        }
        if self.eval.buckets.is_empty() {
            let mut s = String::new();
            for (i, (lo, hi)) in self.dataset_flavor.default_buckets().into_iter().enumerate() {
                write!(s, "{}{lo}-{hi}", if i > 0 { "," } else { "" }).unwrap();
            }
            self.eval.buckets = s;
        }
        if self.threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        if self.eval.k == 0 || self.eval.n.contains(&0) {
            return Err(Error::Config("K and every N must be at least 1".into()));
        }
        if self.eval.max_offset == 0 {
            return Err(Error::Config("max_offset must be at least 1".into()));
        }
        self.buckets()?;
        self.train.validate()
    }

    pub fn buckets(&self) -> Result<Vec<(usize, usize)>> {
        parse_buckets(&self.eval.buckets)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    /// Short digest of the resolved configuration, independent of where the
    /// outputs go.
    pub fn hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.run_dir = None;
        let digest = Sha256::digest(c.to_toml()?.as_bytes());
        Ok(digest[..5].iter().map(|b| format!("{b:02x}")).collect())
    }

    /// Creates the output directory and writes the resolved configuration
    /// into it.
    pub fn create_run_dir(&self, command: &str) -> Result<PathBuf> {
        let dir = match &self.run_dir {
            Some(d) => d.clone(),
            None => {
                let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S");
                let base = format!("{command}-{stamp}-{}", self.hash()?);
                let mut dir = self.runs_root.join(&base);
                let mut i = 1;
                while dir.exists() {
                    dir = self.runs_root.join(format!("{base}-{i}"));
                    i += 1;
                }
                dir
            }
        };
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let path = dir.join("config.toml");
        std::fs::write(&path, self.to_toml()?).map_err(|e| Error::io(&path, e))?;
        Ok(dir)
    }
}

/// A file path, or a directory expected to contain `default_name`.
pub fn file_or_dir(path: &Path, default_name: &str) -> PathBuf {
    if path.is_dir() {
        path.join(default_name)
    } else {
        path.to_path_buf()
    }
}
