use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::{json, Value};

/// A plain table. Cells are preformatted so CSV output is byte-stable.
#[derive(Clone, Debug)]
pub struct Table {
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: Vec<&'static str>) -> Self {
        Table { name: name.into(), columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

/// Result of a subcommand: verdict, JSON summary and tables (first is primary).
#[derive(Clone, Debug)]
pub struct Report {
    pub command: &'static str,
    pub pass: bool,
    pub summary: Value,
    pub tables: Vec<Table>,
}

/// Identity of the run, repeated at the top of every output.
#[derive(Clone, Debug)]
pub struct Meta {
    pub config_hash: String,
    pub seed: u64,
}

impl Meta {
    pub fn comment_header(&self, command: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# treebolic {command}");
        let _ = writeln!(s, "# config_sha256={}", self.config_hash);
        let _ = writeln!(s, "# seed={}", self.seed);
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

impl Report {
    pub fn to_json(&self, meta: &Meta) -> String {
        let v = json!({
            "command": self.command,
            "config_sha256": meta.config_hash,
            "seed": meta.seed,
            "pass": self.pass,
            "summary": self.summary,
        });
        serde_json::to_string_pretty(&v).expect("json value serializes") + "\n"
    }

    pub fn table_csv(&self, meta: &Meta, k: usize) -> String {
        meta.comment_header(self.command) + &self.tables[k].to_csv()
    }

    fn file_stem(&self, k: usize) -> String {
        if k == 0 {
            self.command.to_string()
        } else {
            format!("{}-{}", self.command, self.tables[k].name)
        }
    }

    /// Primary emission for stdout.
    pub fn render(&self, meta: &Meta, format: Format) -> String {
        match format {
            Format::Json => self.to_json(meta),
            Format::Csv if !self.tables.is_empty() => self.table_csv(meta, 0),
            Format::Csv => meta.comment_header(self.command),
        }
    }

    /// Writes the JSON summary and one CSV per table into `dir`.
    pub fn write_all(&self, meta: &Meta, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write(&dir.join(format!("{}.json", self.command)), &self.to_json(meta))?;
        for k in 0..self.tables.len() {
            write(&dir.join(format!("{}.csv", self.file_stem(k))), &self.table_csv(meta, k))?;
        }
        Ok(())
    }
}

pub fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Shortest round-trip decimal form.
pub fn num(x: f64) -> String {
    format!("{x}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_carries_header_and_rows() {
        let mut t = Table::new("main", vec!["a", "b"]);
        t.push(vec![num(1.5), num(-2.0)]);
        let r = Report { command: "demo", pass: true, summary: json!({}), tables: vec![t] };
        let meta = Meta { config_hash: "ab".into(), seed: 7 };
        assert_eq!(r.render(&meta, Format::Csv), "# treebolic demo\n# config_sha256=ab\n# seed=7\na,b\n1.5,-2\n");
        assert!(r.render(&meta, Format::Json).contains("\"seed\": 7"));
    }
}
