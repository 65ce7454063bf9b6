use std::path::Path;

use clap::ValueEnum;
use rado_core::labeling::MAX_DEPTH;
use serde::Deserialize;

use crate::CliError;

/// Variable consulted for the search bound when neither a flag nor the config
/// file sets one.
pub const SEARCH_BOUND_ENV: &str = "RADO_SEARCH_BOUND";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Dot,
    Plain,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    search_bound: Option<usize>,
    backtrack_budget: Option<usize>,
    format: Option<Format>,
    #[serde(default)]
    depth_caps: CapsFile,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CapsFile {
    labeling: Option<usize>,
    treeorder: Option<usize>,
    copies: Option<usize>,
    fusion: Option<usize>,
    ramsey: Option<usize>,
}

/// Per-module depth caps, each at most the hard cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DepthCaps {
    pub labeling: usize,
    pub treeorder: usize,
    pub copies: usize,
    pub fusion: usize,
    pub ramsey: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config {
    pub search_bound: usize,
    pub backtrack_budget: usize,
    pub format: Format,
    pub depth_caps: DepthCaps,
}

/// Values given on the command line, which win over the file.
#[derive(Debug, Default)]
pub struct Overrides {
    pub search_bound: Option<usize>,
    pub backtrack_budget: Option<usize>,
    pub format: Option<Format>,
}

impl Config {
    /// Flags, then the config file, then (search bound only) the environment,
    /// then defaults.
    pub fn resolve(path: Option<&Path>, flags: Overrides, env: Option<String>) -> Result<Config, CliError> {
        let file: ConfigFile = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| CliError::Usage(format!("bad config {}: {e}", p.display())))?
            }
            None => ConfigFile::default(),
        };
        let env_bound = match env {
            Some(s) => Some(
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| CliError::Usage(format!("{SEARCH_BOUND_ENV}={s:?} is not a number")))?,
            ),
            None => None,
        };
        let search_bound = flags
            .search_bound
            .or(file.search_bound)
            .or(env_bound)
            .unwrap_or(rado_core::DEFAULT_SEARCH_BOUND);
        let backtrack_budget = flags
            .backtrack_budget
            .or(file.backtrack_budget)
            .unwrap_or(rado_core::ambient::DEFAULT_BACKTRACK_BUDGET);
        let caps = &file.depth_caps;
        let cap = |c: Option<usize>, name: &str| -> Result<usize, CliError> {
            let c = c.unwrap_or(MAX_DEPTH);
            if c > MAX_DEPTH {
                return Err(CliError::Usage(format!("depth cap {name} = {c} exceeds {MAX_DEPTH}")));
            }
            Ok(c)
        };
        let config = Config {
            search_bound,
            backtrack_budget,
            format: flags.format.or(file.format).unwrap_or_default(),
            depth_caps: DepthCaps {
                labeling: cap(caps.labeling, "labeling")?,
                treeorder: cap(caps.treeorder, "treeorder")?,
                copies: cap(caps.copies, "copies")?,
                fusion: cap(caps.fusion, "fusion")?,
                ramsey: cap(caps.ramsey, "ramsey")?,
            },
        };
        if config.search_bound == 0 || config.backtrack_budget == 0 {
            return Err(CliError::Usage("bounds must be positive".into()));
        }
        Ok(config)
    }

    pub fn check_depth(&self, depth: usize, cap: usize, what: &str) -> Result<(), CliError> {
        if depth > cap {
            return Err(CliError::Usage(format!(
                "{what} depth {depth} exceeds the configured cap {cap}"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn precedence() {
        let f = file("search_bound = 500\n");
        let c = Config::resolve(Some(f.path()), Overrides::default(), Some("7".into())).unwrap();
        assert_eq!(c.search_bound, 500);
        let flags = Overrides {
            search_bound: Some(9),
            ..Default::default()
        };
        assert_eq!(Config::resolve(Some(f.path()), flags, None).unwrap().search_bound, 9);
        assert_eq!(
            Config::resolve(None, Overrides::default(), Some("7".into()))
                .unwrap()
                .search_bound,
            7
        );
        assert_eq!(
            Config::resolve(None, Overrides::default(), None).unwrap().search_bound,
            10_000
        );
    }

    #[test]
    fn invalid_configs() {
        for text in [
            "search_bound = 0",
            "[depth_caps]\nfusion = 4",
            "colour = 1",
            "format = \"svg\"",
        ] {
            assert!(matches!(
                Config::resolve(Some(file(text).path()), Overrides::default(), None),
                Err(CliError::Usage(_))
            ));
        }
        assert!(Config::resolve(None, Overrides::default(), Some("lots".into())).is_err());
    }

    #[test]
    fn caps_and_format() {
        let f = file("format = \"plain\"\nbacktrack_budget = 40\n[depth_caps]\nlabeling = 2\n");
        let c = Config::resolve(Some(f.path()), Overrides::default(), None).unwrap();
        assert_eq!(c.format, Format::Plain);
        assert_eq!(c.backtrack_budget, 40);
        assert_eq!(c.depth_caps.labeling, 2);
        assert_eq!(c.depth_caps.fusion, MAX_DEPTH);
        assert!(c.check_depth(3, c.depth_caps.labeling, "label").is_err());
    }
}
