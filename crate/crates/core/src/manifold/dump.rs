//! Plain-text field dumps.
//!
//! ```text
//! dims 64 64
//! periods 1 1
//! <one value per line, row-major, 17 significant digits>
//! ```

use std::fmt::Write as _;
use std::path::Path;

use super::{Grid, GridSpec, ScalarField};
use crate::error::{KwError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl FieldDump {
    pub fn from_field(grid: &Grid, field: &ScalarField) -> Result<Self> {
        grid.check(field)?;
        Ok(Self {
            spec: grid.spec().clone(),
            values: field.values().to_vec(),
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(24 * (self.values.len() + 2));
        out.push_str("dims");
        for n in &self.spec.points {
            let _ = write!(out, " {n}");
        }
        out.push_str("\nperiods");
        for l in &self.spec.periods {
            let _ = write!(out, " {l:?}");
        }
        out.push('\n');
        for v in &self.values {
            let _ = writeln!(out, "{v:.16e}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = |line: Option<&str>, key: &str| -> Result<Vec<String>> {
            let line = line.ok_or_else(|| KwError::Parse(format!("missing `{key}` line")))?;
            let mut words = line.split_whitespace();
            if words.next() != Some(key) {
                return Err(KwError::Parse(format!(
                    "expected `{key}` line, got `{line}`"
                )));
            }
            Ok(words.map(str::to_owned).collect())
        };
        let points = header(lines.next(), "dims")?
            .iter()
            .map(|w| {
                w.parse::<usize>()
                    .map_err(|e| KwError::Parse(format!("dims: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let periods = header(lines.next(), "periods")?
            .iter()
            .map(|w| {
                w.parse::<f64>()
                    .map_err(|e| KwError::Parse(format!("periods: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let values = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.trim()
                    .parse::<f64>()
                    .map_err(|e| KwError::Parse(format!("value `{l}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let expected: usize = points.iter().product();
        if values.len() != expected {
            return Err(KwError::Parse(format!(
                "expected {expected} values, found {}",
                values.len()
            )));
        }
        Ok(Self {
            spec: GridSpec::new(points, periods),
            values,
        })
    }

    /// Converts to a field on `grid`, requiring an identical grid description.
    pub fn into_field(self, grid: &Grid) -> Result<ScalarField> {
        if &self.spec != grid.spec() {
            return Err(KwError::InvalidArgument(format!(
                "field dump grid {:?}/{:?} does not match {:?}/{:?}",
                self.spec.points,
                self.spec.periods,
                grid.spec().points,
                grid.spec().periods
            )));
        }
        ScalarField::new(grid, self.values)
    }
}

pub fn write_field_dump(path: &Path, grid: &Grid, field: &ScalarField) -> Result<()> {
    std::fs::write(path, FieldDump::from_field(grid, field)?.to_text())?;
    Ok(())
}

pub fn read_field_dump(path: &Path) -> Result<FieldDump> {
    FieldDump::parse(&std::fs::read_to_string(path)?)
}
