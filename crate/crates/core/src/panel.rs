//! Macro panel ingestion: stationarity transforms, grouping and event windows.
//!
//! Transform codes follow the usual FRED convention:
//!
//! | code | transform |
//! |------|-----------|
//! | 1 | `x_t` |
//! | 2 | `Δx_t` |
//! | 3 | `Δ²x_t` |
//! | 4 | `log x_t` |
//! | 5 | `Δ log x_t` |
//! | 6 | `Δ² log x_t` |
//! | 7 | `Δ(x_t / x_{t−1} − 1)` |

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::Sample;

/// One series with its transform code and group label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSpec {
    pub name: String,
    pub tcode: u8,
    pub group: String,
}

/// Inclusive ISO-date window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start: String,
    pub end: String,
}

/// Panel layout and the two comparison windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelSpec {
    pub csv_path: PathBuf,
    pub date_column: String,
    pub series: Vec<SeriesSpec>,
    pub window_pre: Window,
    pub window_post: Window,
    /// Trim both windows to the shorter length (pre keeps its latest rows,
    /// post its earliest).
    pub match_length: bool,
    /// Minimum rows per window, typically `p_max + 2`.
    pub min_length: usize,
}

/// Pre/post samples for one group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupWindows {
    pub group: String,
    pub series: Vec<String>,
    pub pre: Sample,
    pub post: Sample,
    pub pre_dates: Vec<String>,
    pub post_dates: Vec<String>,
}

/// Reads a series file with columns `series,tcode,group`.
pub fn read_series_file(path: &Path) -> Result<Vec<SeriesSpec>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        let row: (String, u8, String) = rec?;
        out.push(SeriesSpec { name: row.0, tcode: row.1, group: row.2 });
    }
    Ok(out)
}

fn check_date(s: &str) -> Result<()> {
    let b = s.as_bytes();
    let ok = b.len() == 10
        && b[4] == b'-'
        && b[7] == b'-'
        && b.iter().enumerate().all(|(i, c)| i == 4 || i == 7 || c.is_ascii_digit());
    if ok {
        Ok(())
    } else {
        Err(Error::Input(format!("'{s}' is not an ISO date (YYYY-MM-DD)")))
    }
}

/// Applies a transform code; undefined leading values are `NaN`.
pub fn transform(x: &[f64], tcode: u8) -> Result<Vec<f64>> {
    let diff = |v: &[f64]| -> Vec<f64> {
        let mut out = vec![f64::NAN; v.len()];
        for t in 1..v.len() {
            out[t] = v[t] - v[t - 1];
        }
        out
    };
    let logs = || -> Result<Vec<f64>> {
        x.iter()
            .map(|&v| {
                if v > 0.0 || v.is_nan() {
                    Ok(v.ln())
                } else {
                    Err(Error::Domain(format!("log transform of non-positive value {v}")))
                }
            })
            .collect()
    };
    Ok(match tcode {
        1 => x.to_vec(),
        2 => diff(x),
        3 => diff(&diff(x)),
        4 => logs()?,
        5 => diff(&logs()?),
        6 => diff(&diff(&logs()?)),
        7 => {
            let mut growth = vec![f64::NAN; x.len()];
            for t in 1..x.len() {
                growth[t] = x[t] / x[t - 1] - 1.0;
            }
            diff(&growth)
        }
        _ => return Err(Error::Input(format!("unknown transform code {tcode}"))),
    })
}

/// Raw panel: dates plus one column per requested series.
struct RawPanel {
    dates: Vec<String>,
    columns: Vec<Vec<f64>>,
}

fn read_panel(spec: &PanelSpec) -> Result<RawPanel> {
    let mut rdr = csv::Reader::from_path(&spec.csv_path)?;
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Input(format!("column '{name}' not found in {}", spec.csv_path.display())))
    };
    let date_idx = find(&spec.date_column)?;
    let idx: Vec<usize> = spec.series.iter().map(|s| find(&s.name)).collect::<Result<_>>()?;
    let mut dates = Vec::new();
    let mut columns = vec![Vec::new(); idx.len()];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let date = rec.get(date_idx).unwrap_or("").trim().to_string();
        check_date(&date)?;
        if let Some(prev) = dates.last() {
            if &date <= prev {
                return Err(Error::Input(format!("dates not increasing at data row {}", line + 1)));
            }
        }
        dates.push(date);
        for (c, &i) in idx.iter().enumerate() {
            let cell = rec.get(i).unwrap_or("").trim();
            let v = if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan") {
                f64::NAN
            } else {
                cell.parse::<f64>().map_err(|_| {
                    Error::Input(format!(
                        "non-numeric cell '{cell}' in column '{}' at data row {}",
                        spec.series[c].name,
                        line + 1
                    ))
                })?
            };
            columns[c].push(v);
        }
    }
    Ok(RawPanel { dates, columns })
}

fn window_rows(dates: &[String], w: &Window) -> Vec<usize> {
    (0..dates.len()).filter(|&t| dates[t] >= w.start && dates[t] <= w.end).collect()
}

/// Transforms, windows, trims and centers the panel, one entry per group.
///
/// Groups appear in order of first appearance in the series list.
pub fn ingest(spec: &PanelSpec) -> Result<Vec<GroupWindows>> {
    for w in [&spec.window_pre, &spec.window_post] {
        check_date(&w.start)?;
        check_date(&w.end)?;
        if w.start > w.end {
            return Err(Error::Input(format!("window {} .. {} is empty", w.start, w.end)));
        }
    }
    if !(spec.window_pre.end < spec.window_post.start || spec.window_post.end < spec.window_pre.start) {
        return Err(Error::Input("pre and post windows overlap".into()));
    }
    let raw = read_panel(spec)?;
    let transformed: Vec<Vec<f64>> =
        raw.columns.iter().zip(&spec.series).map(|(x, s)| transform(x, s.tcode)).collect::<Result<_>>()?;

    // drop leading rows where any series is undefined
    let first = (0..raw.dates.len()).find(|&t| transformed.iter().all(|c| c[t].is_finite())).unwrap_or(raw.dates.len());
    let dates = &raw.dates[first..];
    let cols: Vec<&[f64]> = transformed.iter().map(|c| &c[first..]).collect();

    let mut pre = window_rows(dates, &spec.window_pre);
    let mut post = window_rows(dates, &spec.window_post);
    if spec.match_length {
        let n = pre.len().min(post.len());
        pre = pre[pre.len() - n..].to_vec();
        post.truncate(n);
    }
    for (name, rows) in [("pre", &pre), ("post", &post)] {
        if rows.len() < spec.min_length.max(1) {
            return Err(Error::Input(format!(
                "{name} window has {} rows, fewer than the required {}",
                rows.len(),
                spec.min_length
            )));
        }
    }

    let mut groups: BTreeMap<usize, (String, Vec<usize>)> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    for (c, s) in spec.series.iter().enumerate() {
        let g = match order.iter().position(|x| x == &s.group) {
            Some(g) => g,
            None => {
                order.push(s.group.clone());
                order.len() - 1
            }
        };
        groups.entry(g).or_insert_with(|| (s.group.clone(), Vec::new())).1.push(c);
    }

    let build = |rows: &[usize], members: &[usize]| -> Result<Sample> {
        let x = DMatrix::from_fn(rows.len(), members.len(), |t, c| cols[members[c]][rows[t]]);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("missing or undefined values inside an analysis window".into()));
        }
        Sample::centered(x)
    };
    groups
        .into_values()
        .map(|(group, members)| {
            Ok(GroupWindows {
                series: members.iter().map(|&c| spec.series[c].name.clone()).collect(),
                pre: build(&pre, &members)?,
                post: build(&post, &members)?,
                pre_dates: pre.iter().map(|&t| dates[t].clone()).collect(),
                post_dates: post.iter().map(|&t| dates[t].clone()).collect(),
                group,
            })
        })
        .collect()
}
