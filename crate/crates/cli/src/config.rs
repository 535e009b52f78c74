//! Pipeline configuration file (TOML or JSON). Every key is optional;
//! command-line flags take precedence over file values, which take
//! precedence over built-in defaults. Relative paths are resolved against
//! the directory holding the file.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;

use taug::augment::AugmentMode;

use crate::error::{CliError, Result};

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub paths: Paths,
    pub augment: AugmentSection,
    pub translate: TranslateSection,
    pub segment: SegmentSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub stats: StatsSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSection {
    pub threshold: Option<f64>,
    pub mode: Option<AugmentMode>,
}

/// Seconds as a number, or a string such as `"1s"` or `"250ms"`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum DelaySpec {
    Seconds(f64),
    Text(String),
}

impl DelaySpec {
    pub fn duration(&self) -> Result<Duration> {
        match self {
            DelaySpec::Seconds(s) => {
                Duration::try_from_secs_f64(*s).map_err(|e| CliError::Config(format!("delay {s}: {e}")))
            }
            DelaySpec::Text(t) => parse_delay(t).map_err(CliError::Config),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TranslateSection {
    pub backend: Option<String>,
    pub source_lang: Option<String>,
    pub target_lang: Option<String>,
    pub max_chars: Option<usize>,
    pub delay: Option<DelaySpec>,
    pub per_sentence: Option<bool>,
    pub max_retries: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentSection {
    pub window_size: Option<usize>,
    pub overlap: Option<usize>,
    pub max_seq_len: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub embed_dim: Option<usize>,
    pub dense_dims: Option<Vec<usize>>,
    pub dropout_rate: Option<f64>,
    pub learning_rate: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: Option<usize>,
    pub patience: Option<usize>,
    pub batch_size: Option<usize>,
    pub val_fraction: Option<f64>,
    pub seed: Option<u64>,
    pub vocab_words: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsSection {
    pub top: Option<usize>,
}

/// Accepts `humantime` spans (`1s`, `100ms`, `2m`) and bare seconds.
pub fn parse_delay(s: &str) -> std::result::Result<Duration, String> {
    if let Ok(secs) = s.trim().parse::<f64>() {
        return Duration::try_from_secs_f64(secs).map_err(|e| format!("delay `{s}`: {e}"));
    }
    humantime::parse_duration(s.trim()).map_err(|e| format!("delay `{s}`: {e}"))
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(CliError::Missing(path.display().to_string()));
        }
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let mut cfg: FileConfig = if is_json {
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        };
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve(base);
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let p = &mut self.paths;
        for slot in [
            &mut p.corpus,
            &mut p.lexicon,
            &mut p.vocab,
            &mut p.model,
            &mut p.stopwords,
            &mut p.out_dir,
        ] {
            if let Some(path) = slot.as_mut() {
                *path = base.join(&*path);
            }
        }
        if let Some(spec) = self.translate.backend.as_mut() {
            *spec = resolve_backend(spec, base);
        }
    }
}

/// `mock:<file>` paths are file-relative; `command:<exe>` only when the
/// executable is given as a path rather than looked up on `PATH`.
fn resolve_backend(spec: &str, base: &Path) -> String {
    match spec.split_once(':') {
        Some(("mock", file)) => format!("mock:{}", base.join(file).display()),
        Some(("command", exe)) if exe.contains('/') => format!("command:{}", base.join(exe).display()),
        _ => spec.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delays() {
        assert_eq!(parse_delay("1s").unwrap(), Duration::from_secs(1));
        assert_eq!(parse_delay("100ms").unwrap(), Duration::from_millis(100));
        assert_eq!(parse_delay("0.5").unwrap(), Duration::from_millis(500));
        assert_eq!(parse_delay("0").unwrap(), Duration::ZERO);
        assert!(parse_delay("soon").is_err());
        assert!(parse_delay("-1").is_err());
    }

    #[test]
    fn toml_sections_and_relative_paths() {
        let text = r#"
            [paths]
            corpus = "data/corpus.csv"
            [translate]
            backend = "mock:map.json"
            delay = "250ms"
            [train]
            epochs = 4
        "#;
        let mut cfg: FileConfig = toml::from_str(text).unwrap();
        cfg.resolve(Path::new("/etc/demo"));
        assert_eq!(cfg.paths.corpus.unwrap(), Path::new("/etc/demo/data/corpus.csv"));
        assert_eq!(cfg.translate.backend.unwrap(), "mock:/etc/demo/map.json");
        assert_eq!(cfg.translate.delay.unwrap().duration().unwrap(), Duration::from_millis(250));
        assert_eq!(cfg.train.epochs, Some(4));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("[train]\nepoch = 3\n").is_err());
    }

    #[test]
    fn path_backends_only() {
        assert_eq!(resolve_backend("command:trans", Path::new("/x")), "command:trans");
        assert_eq!(resolve_backend("command:./t.sh", Path::new("/x")), "command:/x/./t.sh");
        assert_eq!(resolve_backend("identity", Path::new("/x")), "identity");
    }
}
