//! One module per subcommand. Every command returns the JSON summary
//! printed as the single line on standard output.

pub mod analyze;
pub mod evaluate;
pub mod experiment;
pub mod import;
pub mod predict;
pub mod synth;
pub mod train;

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::config::RunConfig;

/// Resolved global state shared by every command.
pub struct Ctx {
    pub cfg: RunConfig,
    pub seed: u64,
    pub threads: usize,
    pub out: PathBuf,
}

impl Ctx {
    /// Manifest config echo: resolved config plus global flags. Commands
    /// append their own arguments before passing it on.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut m = self.cfg.echo();
        m.insert("out".into(), self.out.display().to_string());
        m.insert("seed".into(), self.seed.to_string());
        m.insert("threads".into(), self.threads.to_string());
        m
    }
}
