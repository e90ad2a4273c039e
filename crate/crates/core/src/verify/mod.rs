//! Experiments that turn contraction, a-priori bounds and entropy identities
//! into measured values with explicit thresholds.
//!
//! Every experiment returns a [`Report`]; its pass flag is computed from the
//! recorded checks and nothing else.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

mod bounds;
mod contraction;
mod entropy;
mod ladder;

pub use bounds::{
    invariant_region, linfty_supersolution, mass_bound, mass_refinement, LinftyOptions, MassBoundOptions,
    SUPERSOLUTION_DET_THRESHOLD,
};
pub use contraction::{check_contraction, contraction_functional, FIdentity};
pub use entropy::{entropy_residual, kruzkov_residuals, KruzkovResiduals};
pub use ladder::{
    cancellation_scaling, characteristic_invariants, irreversibility, q_lemma, riemann_error, stability_cauchy,
    Regime, StabilityOptions,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Lt,
    Ge,
    Gt,
}

impl Relation {
    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Relation::Le => value <= threshold,
            Relation::Lt => value < threshold,
            Relation::Ge => value >= threshold,
            Relation::Gt => value > threshold,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Lt => "<",
            Relation::Ge => ">=",
            Relation::Gt => ">",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub threshold: f64,
}

impl Check {
    pub fn pass(&self) -> bool {
        self.relation.holds(self.value, self.threshold)
    }
}

/// Rectangular numeric table written as one CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(&self.header)?;
        for row in &self.rows {
            wtr.write_record(row.iter().map(|v| v.to_string()))?;
        }
        wtr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub name: String,
    /// Replay information: seed, grid, flux preset and so on.
    pub inputs: Vec<(String, String)>,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
}

impl Report {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.into(),
            ..Self::default()
        }
    }

    pub fn input(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.inputs.push((key.into(), value.to_string()));
        self
    }

    pub fn check(&mut self, name: &str, value: f64, relation: Relation, threshold: f64) -> &mut Self {
        self.checks.push(Check {
            name: name.into(),
            value,
            relation,
            threshold,
        });
        self
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(Check::pass)
    }

    /// `key=value` lines: inputs, then each check, then the pass flag.
    pub fn summary(&self) -> String {
        let mut s = format!("name={}\n", self.name);
        for (k, v) in &self.inputs {
            s.push_str(&format!("input.{k}={v}\n"));
        }
        for c in &self.checks {
            s.push_str(&format!("check.{}.value={}\n", c.name, c.value));
            s.push_str(&format!("check.{}.relation={}\n", c.name, c.relation.symbol()));
            s.push_str(&format!("check.{}.threshold={}\n", c.name, c.threshold));
            s.push_str(&format!("check.{}.pass={}\n", c.name, c.pass()));
        }
        s.push_str(&format!("pass={}\n", self.pass()));
        s
    }

    /// Writes `<name>_<table>.csv` per table and `<name>_summary.txt` into
    /// `dir`, returning the paths written.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        for t in &self.tables {
            let p = dir.join(format!("{}_{}.csv", self.name, t.name));
            let f = File::create(&p).map_err(|e| Error::io(&p, e))?;
            t.write_csv(BufWriter::new(f))?;
            written.push(p);
        }
        let p = dir.join(format!("{}_summary.txt", self.name));
        std::fs::write(&p, self.summary()).map_err(|e| Error::io(&p, e))?;
        written.push(p);
        Ok(written)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}: {}", self.name, if self.pass() { "PASS" } else { "FAIL" })?;
        for c in &self.checks {
            writeln!(
                f,
                "  [{}] {} = {:.6e} {} {:.6e}",
                if c.pass() { "ok" } else { "!!" },
                c.name,
                c.value,
                c.relation.symbol(),
                c.threshold
            )?;
        }
        Ok(())
    }
}
