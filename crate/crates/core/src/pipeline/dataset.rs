//! Loading series from M4-style and simple CSV files.

use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::signal::TimeSeries;

/// Values are shifted so the training minimum is at least this.
pub const SHIFT_FLOOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DatasetFormat {
    /// `id,v1,v2,…` rows with an optional `V1,V2,…` header and ragged tails.
    M4,
    /// `id,v1,v2,…` rows without a header; the horizon comes from the caller.
    SimpleCsv,
}

impl FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "m4" => Ok(DatasetFormat::M4),
            "simple_csv" | "csv" => Ok(DatasetFormat::SimpleCsv),
            _ => Err(invalid(format!("unknown dataset format `{s}`"))),
        }
    }
}

/// Forecast horizon of an M4 frequency category.
pub fn m4_horizon(category: &str) -> Option<usize> {
    Some(match category.to_ascii_lowercase().as_str() {
        "yearly" | "y" => 6,
        "quarterly" | "q" => 8,
        "monthly" | "m" => 18,
        "weekly" | "w" => 13,
        "daily" | "d" => 14,
        "hourly" | "h" => 48,
        _ => return None,
    })
}

/// Category implied by an M4 series id such as `H12`.
pub fn m4_category_of_id(id: &str) -> Option<&'static str> {
    Some(match id.chars().next()? {
        'Y' => "Yearly",
        'Q' => "Quarterly",
        'M' => "Monthly",
        'W' => "Weekly",
        'D' => "Daily",
        'H' => "Hourly",
        _ => return None,
    })
}

/// A series after shifting, with its held-out future if one was supplied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadedSeries {
    pub series: TimeSeries,
    pub truth: Option<Vec<f64>>,
    /// Constant added to every value; subtract it to return to the input scale.
    pub shift: f64,
}

impl LoadedSeries {
    fn new(series: TimeSeries, truth: Option<Vec<f64>>) -> Self {
        let min = series.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let shift = if min < SHIFT_FLOOR { SHIFT_FLOOR - min } else { 0.0 };
        let mut series = series;
        series.values.iter_mut().for_each(|v| *v += shift);
        let truth = truth.map(|t| t.into_iter().map(|v| v + shift).collect());
        Self { series, truth, shift }
    }

    pub fn unshift(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|v| v - self.shift).collect()
    }
}

/// A row that could not be turned into a series.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowError {
    pub location: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadedDataset {
    pub series: Vec<LoadedSeries>,
    pub errors: Vec<RowError>,
}

type Row = (String, Vec<f64>);

fn read_rows(path: &Path, errors: &mut Vec<RowError>) -> Result<Vec<Row>> {
    let mut reader =
        csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_path(path)?;
    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let location = format!("{}:{}", path.display(), idx + 1);
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                errors.push(RowError { location, message: e.to_string() });
                continue;
            }
        };
        let mut fields = record.iter();
        let id = match fields.next() {
            Some(id) if !id.is_empty() => id.to_string(),
            _ => continue,
        };
        let rest: Vec<&str> = fields.collect();
        if idx == 0 && rest.first().is_some_and(|f| f.eq_ignore_ascii_case("V2")) {
            continue;
        }
        let mut values = Vec::with_capacity(rest.len());
        let mut bad = None;
        let mut ended = false;
        for (col, f) in rest.iter().enumerate() {
            if f.is_empty() {
                ended = true;
                continue;
            }
            if ended {
                bad = Some(format!("value after a gap in column {}", col + 2));
                break;
            }
            match f.parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => {
                    bad = Some(format!("cannot parse `{f}` in column {}", col + 2));
                    break;
                }
            }
        }
        match bad {
            Some(message) => errors.push(RowError { location: format!("{location} ({id})"), message }),
            None => rows.push((id, values)),
        }
    }
    Ok(rows)
}

/// Loads a training file and an optional file of held-out futures.
///
/// `horizon` is required for [`DatasetFormat::SimpleCsv`]; for M4 it
/// overrides the category horizon. Series with malformed rows, missing
/// futures or too few observations are reported in `errors` and skipped.
pub fn load_dataset(
    train: &Path,
    test: Option<&Path>,
    format: DatasetFormat,
    horizon: Option<usize>,
) -> Result<LoadedDataset> {
    let mut errors = Vec::new();
    let train_rows = read_rows(train, &mut errors)?;
    let mut futures: Option<HashMap<String, Vec<f64>>> = match test {
        Some(p) => Some(read_rows(p, &mut errors)?.into_iter().collect()),
        None => None,
    };
    if format == DatasetFormat::SimpleCsv && horizon.is_none() {
        return Err(invalid("simple CSV input needs an explicit horizon"));
    }
    let mut series = Vec::with_capacity(train_rows.len());
    for (id, values) in train_rows {
        let location = format!("{} ({id})", train.display());
        let truth = futures.as_mut().map(|f| f.remove(&id));
        let h = match (horizon, format) {
            (Some(h), _) => Some(h),
            (None, _) => m4_category_of_id(&id).and_then(m4_horizon),
        };
        let Some(h) = h.or_else(|| truth.as_ref().and_then(|t| t.as_ref()).map(Vec::len)) else {
            errors.push(RowError { location, message: "cannot infer the forecast horizon".into() });
            continue;
        };
        let truth = match truth {
            None => None,
            Some(None) => {
                errors.push(RowError { location, message: "no held-out values".into() });
                continue;
            }
            Some(Some(t)) if t.len() < h => {
                errors.push(RowError { location, message: format!("{} held-out values for horizon {h}", t.len()) });
                continue;
            }
            Some(Some(mut t)) => {
                t.truncate(h);
                Some(t)
            }
        };
        if values.len() < 2 {
            errors.push(RowError { location, message: "fewer than two observations".into() });
            continue;
        }
        match TimeSeries::new(id.clone(), values, h) {
            Ok(mut s) => {
                if format == DatasetFormat::M4 {
                    if let Some(c) = m4_category_of_id(&id) {
                        s = s.with_frequency(c);
                    }
                }
                series.push(LoadedSeries::new(s, truth));
            }
            Err(e) => errors.push(RowError { location, message: e.to_string() }),
        }
    }
    series.sort_by(|a, b| a.series.id.cmp(&b.series.id));
    Ok(LoadedDataset { series, errors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn m4_ragged_rows_and_header() {
        let train = file("\"V1\",\"V2\",\"V3\",\"V4\"\n\"H2\",\"1\",\"2\",\"\"\n\"H1\",\"5\",\"6\",\"7\"\n");
        let test = file("V1,V2,V3\nH1,8,9\nH2,3,4\n");
        let d = load_dataset(train.path(), Some(test.path()), DatasetFormat::M4, Some(2)).unwrap();
        assert!(d.errors.is_empty(), "{:?}", d.errors);
        assert_eq!(d.series.len(), 2);
        assert_eq!(d.series[0].series.id, "H1");
        assert_eq!(d.series[0].shift, 5.0);
        assert_eq!(d.series[0].series.values, vec![10.0, 11.0, 12.0]);
        assert_eq!(d.series[0].truth, Some(vec![13.0, 14.0]));
        assert_eq!(d.series[1].series.values, vec![10.0, 11.0]);
        assert_eq!(d.series[0].unshift(&[13.0]), vec![8.0]);
    }

    #[test]
    fn bad_rows_are_reported() {
        let train = file("a,1,2,x\nb,20,30,40\nc,5\n");
        let d = load_dataset(train.path(), None, DatasetFormat::SimpleCsv, Some(1)).unwrap();
        assert_eq!(d.series.len(), 1);
        assert_eq!(d.series[0].shift, 0.0);
        assert_eq!(d.errors.len(), 2);
        assert!(load_dataset(train.path(), None, DatasetFormat::SimpleCsv, None).is_err());
    }

    #[test]
    fn m4_horizons() {
        assert_eq!(m4_horizon("Hourly"), Some(48));
        assert_eq!(m4_category_of_id("Y7").and_then(m4_horizon), Some(6));
        assert_eq!(m4_horizon("other"), None);
    }
}
