//! The versioned per-trial CSV schema.

use std::io::{BufRead, BufReader, Read, Write};

use crate::altproj::TestFunction;
use crate::error::{Error, Result};
use crate::harness::config::{Algorithm, ExperimentKind};
use crate::sampling::SamplingScheme;

/// First line of every CSV the harness writes.
pub const SCHEMA_HEADER: &str = "# maxnorm-lowrank v1";

pub const COLUMNS: [&str; 13] = [
    "experiment",
    "function",
    "scheme",
    "n",
    "m",
    "r",
    "trial",
    "seed",
    "algorithm",
    "relative_max_error",
    "baseline_relative_max_error",
    "bound",
    "wall_time_s",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialTag {
    Index(usize),
    /// Median over the trials of one grid point.
    Median,
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub experiment: ExperimentKind,
    pub function: TestFunction,
    pub scheme: SamplingScheme,
    pub n: usize,
    pub m: usize,
    /// Requested rank for altproj and tt; achieved rank for taylor and rff.
    pub r: usize,
    pub trial: TrialTag,
    pub seed: Option<u64>,
    pub algorithm: Algorithm,
    pub relative_max_error: f64,
    /// On median rows of matrix altproj runs: the baseline median.
    pub baseline_relative_max_error: Option<f64>,
    /// Certified absolute max-error bound, when the algorithm provides one.
    pub bound: Option<f64>,
    pub wall_time_s: Option<f64>,
}

/// 17 significant digits, so values round-trip exactly.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt<T>(v: Option<T>, f: impl Fn(T) -> String) -> String {
    v.map(f).unwrap_or_default()
}

impl ExperimentRecord {
    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::Parse(format!("{name} must be finite and nonnegative, got {v}")))
            }
        };
        check("relative_max_error", self.relative_max_error)?;
        for (name, v) in [
            ("baseline_relative_max_error", self.baseline_relative_max_error),
            ("bound", self.bound),
            ("wall_time_s", self.wall_time_s),
        ] {
            if let Some(v) = v {
                check(name, v)?;
            }
        }
        if self.n == 0 || self.m == 0 || self.r == 0 {
            return Err(Error::Parse("n, m and r must be positive".into()));
        }
        match (self.trial, self.seed) {
            (TrialTag::Index(_), None) => Err(Error::Parse("trial rows need a seed".into())),
            (TrialTag::Median, Some(_)) => Err(Error::Parse("median rows carry no seed".into())),
            _ => Ok(()),
        }
    }

    fn fields(&self) -> [String; 13] {
        [
            self.experiment.to_string(),
            self.function.to_string(),
            self.scheme.to_string(),
            self.n.to_string(),
            self.m.to_string(),
            self.r.to_string(),
            match self.trial {
                TrialTag::Index(i) => i.to_string(),
                TrialTag::Median => "median".into(),
            },
            opt(self.seed, |s| s.to_string()),
            self.algorithm.to_string(),
            format_float(self.relative_max_error),
            opt(self.baseline_relative_max_error, format_float),
            opt(self.bound, format_float),
            opt(self.wall_time_s, format_float),
        ]
    }

    fn from_fields(rec: &csv::StringRecord) -> Result<Self> {
        if rec.len() != COLUMNS.len() {
            return Err(Error::Parse(format!("expected {} columns, found {}", COLUMNS.len(), rec.len())));
        }
        let num = |i: usize| -> Result<usize> {
            rec[i].parse().map_err(|_| Error::Parse(format!("bad {} value {:?}", COLUMNS[i], &rec[i])))
        };
        let float = |i: usize| -> Result<Option<f64>> {
            if rec[i].is_empty() {
                return Ok(None);
            }
            rec[i].parse().map(Some).map_err(|_| Error::Parse(format!("bad {} value {:?}", COLUMNS[i], &rec[i])))
        };
        let out = ExperimentRecord {
            experiment: rec[0].parse()?,
            function: rec[1].parse()?,
            scheme: rec[2].parse()?,
            n: num(3)?,
            m: num(4)?,
            r: num(5)?,
            trial: if &rec[6] == "median" { TrialTag::Median } else { TrialTag::Index(num(6)?) },
            seed: if rec[7].is_empty() {
                None
            } else {
                Some(rec[7].parse().map_err(|_| Error::Parse(format!("bad seed {:?}", &rec[7])))?)
            },
            algorithm: rec[8].parse()?,
            relative_max_error: float(9)?.ok_or_else(|| Error::Parse("missing relative_max_error".into()))?,
            baseline_relative_max_error: float(10)?,
            bound: float(11)?,
            wall_time_s: float(12)?,
        };
        out.validate()?;
        Ok(out)
    }
}

/// Write the schema header, the column row and one line per record (LF endings).
pub fn write_records<W: Write>(mut w: W, records: &[ExperimentRecord]) -> Result<()> {
    writeln!(w, "{SCHEMA_HEADER}")?;
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(COLUMNS)?;
    for r in records {
        r.validate()?;
        out.write_record(r.fields())?;
    }
    out.flush()?;
    Ok(())
}

/// Read a file produced by [`write_records`], validating every row.
pub fn read_records<R: Read>(r: R) -> Result<Vec<ExperimentRecord>> {
    let mut reader = BufReader::new(r);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    if first.trim_end() != SCHEMA_HEADER {
        return Err(Error::Parse(format!("missing schema header `{SCHEMA_HEADER}`")));
    }
    let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    if csv.headers()?.iter().ne(COLUMNS) {
        return Err(Error::Parse("unexpected column names".into()));
    }
    csv.records().map(|rec| ExperimentRecord::from_fields(&rec?)).collect()
}
