//! Model files, CSV tables and run manifests.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coeffs::{AssumptionReport, Model, ModelSpec, SCoefficients};
use crate::error::{Error, Result};
use crate::meta::OccupationHistogram;
use crate::sim::{HittingEvent, Outcome};
use crate::spectral::SpectralSolution;

/// Version string recorded in manifests.
pub const VERSION: &str = env!("METALAB_VERSION");

/// Parses a model description, reporting schema problems with a JSON
/// pointer to the offending value.
pub fn parse_model_str(text: &str) -> Result<ModelSpec> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = json_pointer(&e.path().to_string());
        let inner = e.into_inner();
        let message = if inner.is_syntax() || inner.is_eof() {
            format!("malformed JSON: {inner}")
        } else {
            inner.to_string()
        };
        Error::Schema { pointer, message }
    })
}

fn json_pointer(path: &str) -> String {
    if path == "." || path.is_empty() {
        return String::new();
    }
    let mut out = String::new();
    for seg in path.split('.') {
        let mut rest = seg;
        let (head, tail) = match rest.find('[') {
            Some(i) => rest.split_at(i),
            None => (rest, ""),
        };
        if !head.is_empty() {
            out.push('/');
            out.push_str(&head.replace('~', "~0").replace('/', "~1"));
        }
        rest = tail;
        while let Some(end) = rest.find(']') {
            out.push('/');
            out.push_str(&rest[1..end]);
            rest = &rest[end + 1..];
        }
    }
    out
}

/// A parsed model with its assumption report.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub model: Model,
    pub report: AssumptionReport,
}

pub fn load_model(path: &Path) -> Result<LoadedModel> {
    let text = fs::read_to_string(path)?;
    let spec = parse_model_str(&text)?;
    let model = Model::new(spec)?;
    let report = model.check_assumptions();
    Ok(LoadedModel { model, report })
}

/// Shortest text that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Comma-separated table with a header row.
#[derive(Debug, Clone, Default)]
pub struct Table {
    text: String,
    columns: usize,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            text: header.join(",") + "\n",
            columns: header.len(),
        }
    }

    pub fn row(&mut self, cells: &[String]) {
        debug_assert_eq!(cells.len(), self.columns);
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn row_f64(&mut self, cells: &[f64]) {
        let v: Vec<String> = cells.iter().map(|c| fmt_f64(*c)).collect();
        self.row(&v);
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, &self.text)?;
        Ok(())
    }
}

fn outcome_name(o: Outcome) -> &'static str {
    match o {
        Outcome::Hit => "hit",
        Outcome::Timeout => "timeout",
        Outcome::NonFinite => "non_finite",
    }
}

/// `traj_index, outcome, t_hit, target_id, x0..x{d-1}, zeta`.
pub fn events_table(events: &[HittingEvent], dim: usize) -> Table {
    let mut header = vec!["traj_index".to_string(), "outcome".into(), "t_hit".into(), "target_id".into()];
    header.extend((0..dim).map(|i| format!("x{i}")));
    header.push("zeta".into());
    let mut t = Table::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
    for e in events {
        let mut row = vec![
            e.index.to_string(),
            outcome_name(e.outcome).into(),
            fmt_f64(e.time),
            e.target.map_or(String::new(), |v| v.to_string()),
        ];
        row.extend(e.state.iter().map(|v| fmt_f64(*v)));
        row.push(fmt_f64(e.zeta));
        t.row(&row);
    }
    t
}

/// Grid coordinates and the local coefficients.
pub fn coefficients_table(co: &SCoefficients) -> Table {
    let mut t = Table::new(&["y0", "y1", "alpha", "beta", "a00", "a01", "a11", "b0", "b1", "c0", "c1"]);
    for i in 0..co.grid.len() {
        let y = co.grid.coords(i);
        t.row_f64(&[
            y[0], y[1], co.alpha[i], co.beta[i], co.a[i][0], co.a[i][1], co.a[i][2], co.b[i][0], co.b[i][1], co.c[i][0],
            co.c[i][1],
        ]);
    }
    t
}

/// Grid coordinates, eigenfunction and stationary weights.
pub fn spectral_table(sol: &SpectralSolution) -> Table {
    let mut t = Table::new(&["y0", "y1", "phi", "pi"]);
    for i in 0..sol.grid.len() {
        let y = sol.grid.coords(i);
        t.row_f64(&[y[0], y[1], sol.phi[i], sol.pi[i]]);
    }
    t
}

pub fn lambda_table(curve: &[(f64, f64)]) -> Table {
    let mut sorted = curve.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut t = Table::new(&["gamma", "lambda"]);
    for (g, l) in sorted {
        t.row_f64(&[g, l]);
    }
    t
}

/// Bin centers and masses; the overflow bin is the last row with empty
/// coordinates.
pub fn histogram_table(h: &OccupationHistogram) -> Table {
    let mut t = Table::new(&["c0", "c1", "mass"]);
    for (b, m) in h.mass.iter().enumerate() {
        let c = h.spec.center(b);
        t.row_f64(&[c[0], c[1], *m]);
    }
    t.row(&[String::new(), String::new(), fmt_f64(h.overflow)]);
    t
}

/// Plot data as `(x, y, yerr)` triplets.
pub fn plot_table(points: &[(f64, f64, f64)]) -> Table {
    let mut t = Table::new(&["x", "y", "yerr"]);
    for &(x, y, e) in points {
        t.row_f64(&[x, y, e]);
    }
    t
}

/// Record of one command-line run, sufficient to rerun it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    /// Arguments after the program name.
    pub args: Vec<String>,
    pub version: String,
    /// Effective configuration.
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

/// Output directory of one run; collects the names of written files.
#[derive(Debug)]
pub struct RunDir {
    root: PathBuf,
    written: Vec<String>,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            written: vec![],
        })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn table(&mut self, name: &str, t: &Table) -> Result<()> {
        t.write(&self.root.join(name))?;
        self.written.push(name.into());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        fs::write(self.root.join(name), s)?;
        self.written.push(name.into());
        Ok(())
    }

    /// Writes `manifest.json` listing everything written so far.
    pub fn finish(mut self, command: &str, args: &[String], config: serde_json::Value) -> Result<PathBuf> {
        let mut outputs = std::mem::take(&mut self.written);
        outputs.push("manifest.json".into());
        let m = Manifest {
            command: command.into(),
            args: args.to_vec(),
            version: VERSION.into(),
            config,
            outputs,
        };
        let path = self.root.join("manifest.json");
        let mut s = serde_json::to_string_pretty(&m)?;
        s.push('\n');
        fs::write(&path, s)?;
        Ok(path)
    }
}

/// Human-readable assumption report.
pub fn format_report(r: &AssumptionReport) -> String {
    let mut s = String::new();
    for c in &r.checks {
        let _ = write!(
            s,
            "({}) {:<4} {}  value {}",
            c.name,
            if c.passed { "ok" } else { "FAIL" },
            c.description,
            fmt_f64(c.value)
        );
        if let Some(w) = &c.witness {
            let _ = write!(s, "  at {w:?}");
        }
        if !c.detail.is_empty() && !c.passed {
            let _ = write!(s, "  [{}]", c.detail);
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pointers() {
        assert_eq!(json_pointer("fields.v[1].type"), "/fields/v/1/type");
        assert_eq!(json_pointer("surfaces[0]"), "/surfaces/0");
        assert_eq!(json_pointer("."), "");
    }

    #[test]
    fn schema_errors_carry_location() {
        let bad = r#"{"dimension": 2, "surfaces": [{"kind": "point", "location": [0, 0]}],
            "fields": {"v": [{"type": "zero"}, {"type": "linear_at_pont"}]}}"#;
        match parse_model_str(bad) {
            Err(Error::Schema { pointer, .. }) => assert_eq!(pointer, "/fields/v/1/type"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_model_str("{\"dimension\": "), Err(Error::Schema { .. })));
    }

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 1e-300, -2.5e10] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }
}
