//! TOML configuration files.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sim::SimulationConfig;

/// 1-based line and column of byte `offset` in `text`.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

/// Parse configuration text. Syntax and schema errors carry the line and
/// column; range errors name the offending key.
pub fn parse_config(text: &str, path: &Path) -> Result<SimulationConfig> {
    let cfg: SimulationConfig = toml::from_str(text).map_err(|e| {
        let location = e
            .span()
            .map(|s| {
                let (line, col) = line_col(text, s.start);
                format!("line {line}, column {col}: ")
            })
            .unwrap_or_default();
        Error::Parse {
            path: path.to_path_buf(),
            message: format!("{location}{}", e.message()),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<SimulationConfig> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text, path)
}

/// TOML text of `cfg`.
pub fn render_config(cfg: &SimulationConfig) -> String {
    toml::to_string(cfg).expect("configuration serialises to TOML")
}
