//! Resolution of model settings: command-line flags override a JSON config
//! file, which overrides built-in defaults.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::Args;
use messyseg_core::features::{load_static_embeddings, ContextualSource, OovPolicy, SidecarProvider, StaticEmbeddingTable};
use messyseg_core::model::ModelConfig;
use messyseg_core::{Error, Result, TagScheme};

fn parse_scheme(s: &str) -> std::result::Result<TagScheme, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_source(s: &str) -> std::result::Result<ContextualSource, String> {
    match s {
        "degenerate" => Ok(ContextualSource::Degenerate),
        "windowed" => Ok(ContextualSource::Windowed),
        _ => Err(format!("unknown contextual source {s:?} (expected degenerate or windowed)")),
    }
}

#[derive(Args, Debug, Clone, Default)]
pub struct ModelFlags {
    /// JSON file with model settings; flags take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = parse_scheme)]
    pub scheme: Option<TagScheme>,
    #[arg(long)]
    pub no_distance: bool,
    #[arg(long)]
    pub no_static: bool,
    #[arg(long)]
    pub no_contextual: bool,
    /// How contextual layers are derived when no sidecar is given
    #[arg(long, value_parser = parse_source)]
    pub contextual_source: Option<ContextualSource>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub distance_divisor: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct EmbeddingFlags {
    /// Static embeddings: one token and its floats per line
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Precomputed contextual layers (JSON Lines keyed by doc_id)
    #[arg(long)]
    pub contextual_sidecar: Option<PathBuf>,
}

pub fn read_config_file(path: &Path) -> Result<ModelConfig> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        message: format!("{}: {e}", path.display()),
    })
}

impl ModelFlags {
    pub fn resolve(&self) -> Result<ModelConfig> {
        let mut c = match &self.config {
            Some(p) => read_config_file(p)?,
            None => ModelConfig::default(),
        };
        if let Some(s) = self.scheme {
            c.scheme = s;
        }
        if self.no_distance {
            c.use_distance = false;
        }
        if self.no_static {
            c.use_static = false;
        }
        if self.no_contextual {
            c.use_contextual = false;
        }
        macro_rules! set {
            ($($f:ident => $field:ident),*) => {$(
                if let Some(v) = self.$f {
                    c.$field = v;
                }
            )*};
        }
        set!(contextual_source => contextual_source, seed => seed, max_epochs => max_epochs,
             patience => patience, batch_size => batch_size, learning_rate => learning_rate,
             dropout => dropout, hidden_dim => hidden_dim, distance_divisor => distance_divisor);
        Ok(c)
    }
}

pub struct Inputs {
    pub statics: Arc<StaticEmbeddingTable>,
    pub sidecar: Option<Arc<SidecarProvider>>,
}

pub fn load_sidecar(path: &Path) -> Result<Arc<SidecarProvider>> {
    let sidecar = SidecarProvider::load(path)?;
    if sidecar.is_empty() {
        return Err(Error::Data(format!("{}: contextual sidecar is empty", path.display())));
    }
    Ok(Arc::new(sidecar))
}

/// Loads embedding inputs and makes `config` agree with their shapes.
pub fn load_inputs(flags: &EmbeddingFlags, config: &mut ModelConfig) -> Result<Inputs> {
    let statics = match &flags.embeddings {
        Some(p) => {
            let t = load_static_embeddings(p, OovPolicy::default())?;
            config.static_dim = t.dim();
            t
        }
        None => StaticEmbeddingTable::empty(config.static_dim, OovPolicy::default()),
    };
    let sidecar = match &flags.contextual_sidecar {
        Some(p) => {
            let s = load_sidecar(p)?;
            config.contextual_source = ContextualSource::Sidecar;
            if let Some((l, d)) = s.shape() {
                config.contextual_layers = l;
                config.contextual_dim = d;
            }
            Some(s)
        }
        None => None,
    };
    if config.contextual_source != ContextualSource::Sidecar {
        config.contextual_dim = config.static_dim;
    } else if sidecar.is_none() && config.use_contextual {
        return Err(Error::Usage("the configuration asks for a contextual sidecar; pass --contextual-sidecar".into()));
    }
    Ok(Inputs {
        statics: Arc::new(statics),
        sidecar,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_override_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        fs::write(&path, r#"{"seed": 11, "hidden_dim": 40, "scheme": "bi", "use_distance": false}"#).unwrap();
        let flags = ModelFlags {
            config: Some(path),
            seed: Some(5),
            ..Default::default()
        };
        let c = flags.resolve().unwrap();
        assert_eq!(c.seed, 5);
        assert_eq!(c.hidden_dim, 40);
        assert_eq!(c.scheme, TagScheme::Bi);
        assert!(!c.use_distance);
        assert_eq!(c.batch_size, ModelConfig::default().batch_size);
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        fs::write(&path, r#"{"hiden_dim": 40}"#).unwrap();
        let flags = ModelFlags {
            config: Some(path),
            ..Default::default()
        };
        assert!(matches!(flags.resolve(), Err(Error::Parse { .. })));
    }

    #[test]
    fn derived_contextual_dim_follows_static_table() {
        let mut c = ModelConfig {
            static_dim: 12,
            contextual_dim: 100,
            ..Default::default()
        };
        let inputs = load_inputs(&EmbeddingFlags::default(), &mut c).unwrap();
        assert_eq!(inputs.statics.dim(), 12);
        assert_eq!(c.contextual_dim, 12);
    }
}
