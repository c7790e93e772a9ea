//! ASCII artifacts: a JSON report and CSV files with a versioned first line.

use crate::config::RunConfig;
use dualpde::{Error, Result};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const CSV_VERSION: &str = "dualpde-csv/1";
pub const REPORT_FORMAT: &str = "dualpde-report/1";

pub struct OutDir {
    pub root: PathBuf,
    pub written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|e| Error::Config(format!("cannot create output directory {}: {e}", root.display())))?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    fn write(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.root.join(name);
        std::fs::write(&path, body).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// `kind` names the schema; `header` lists the columns.
    pub fn csv(&mut self, name: &str, kind: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut s = format!("# {CSV_VERSION} {kind}\n{}\n", header.join(","));
        for r in rows {
            debug_assert_eq!(r.len(), header.len());
            s.push_str(&r.join(","));
            s.push('\n');
        }
        self.write(name, &s)
    }

    pub fn report(&mut self, cfg: &RunConfig, result: &impl Serialize) -> Result<()> {
        #[derive(Serialize)]
        struct Report<'a, T: Serialize> {
            format: &'static str,
            version: &'static str,
            command: Option<crate::config::Command>,
            seed: Option<u64>,
            config: &'a RunConfig,
            result: &'a T,
        }
        let rep = Report { format: REPORT_FORMAT, version: dualpde::VERSION, command: cfg.command, seed: cfg.run.seed, config: cfg, result };
        let mut body = serde_json::to_string_pretty(&rep).map_err(|e| Error::Internal(format!("report serialisation: {e}")))?;
        body.push('\n');
        self.write("report.json", &body)
    }
}

/// Long-format rows `t,x,component,value`.
#[derive(Default)]
pub struct FieldRows {
    pub rows: Vec<Vec<String>>,
}

impl FieldRows {
    pub fn push(&mut self, t: f64, x: f64, component: &str, value: f64) {
        self.rows.push(vec![num(t), num(x), component.to_string(), num(value)]);
    }
}

pub fn num(v: f64) -> String {
    let mut s = String::new();
    write!(s, "{v:e}").unwrap();
    s
}
