//! CSV tables with `# key: value` comment metadata above the header row.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{bad_data, Result};
use crate::fit::DecayCurve;
use crate::integrate::SignalTable;
use crate::trace::{NormalizedScan, RawScan};

pub type Metadata = BTreeMap<String, String>;

/// Named numeric columns plus comment metadata.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub meta: Metadata,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self.headers.iter().position(|h| h == name).ok_or_else(|| {
            bad_data(format!(
                "missing column `{name}` (found {:?})",
                self.headers
            ))
        })?;
        Ok(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn meta_f64(&self, key: &str) -> Result<Option<f64>> {
        self.meta
            .get(key)
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| bad_data(format!("metadata `{key}` is not a number: {v}")))
            })
            .transpose()
    }
}

pub fn read_table<R: Read>(reader: R, required: &[&str]) -> Result<Table> {
    let mut meta = Metadata::new();
    let mut body = String::new();
    for line in BufReader::new(reader).lines() {
        let line = line?;
        if let Some(c) = line.strip_prefix('#') {
            if let Some((k, v)) = c.split_once(':') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
        } else if !line.trim().is_empty() {
            body.push_str(&line);
            body.push('\n');
        }
    }
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    for name in required {
        if !headers.iter().any(|h| h == name) {
            return Err(bad_data(format!(
                "malformed header: expected column `{name}`, found {headers:?}"
            )));
        }
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| bad_data(format!("row {}: `{f}` is not a number", line + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(Table {
        meta,
        headers,
        rows,
    })
}

pub fn write_table<W: Write>(
    mut w: W,
    meta: &Metadata,
    headers: &[&str],
    rows: &[Vec<f64>],
) -> Result<()> {
    for (k, v) in meta {
        writeln!(w, "# {k}: {v}")?;
    }
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(headers)?;
    for r in rows {
        wtr.write_record(r.iter().map(|v| format!("{v:e}")))?;
    }
    wtr.flush()?;
    Ok(())
}

pub const SIGNAL_COLUMNS: [&str; 3] = ["time_s", "model_signal", "scaled_counts_per_s"];

/// S(t) table with the scaled detector rate.
pub fn write_signal_csv<W: Write>(
    w: W,
    meta: &Metadata,
    table: &SignalTable,
    scaled: &[f64],
) -> Result<()> {
    let rows: Vec<Vec<f64>> = table
        .times
        .iter()
        .zip(&table.model_signal)
        .zip(scaled)
        .map(|((t, s), c)| vec![*t, *s, *c])
        .collect();
    write_table(w, meta, &SIGNAL_COLUMNS, &rows)
}

/// Decay curve from a signal table; the beam power comes from the `power_w`
/// metadata unless given.
pub fn read_decay_csv<R: Read>(reader: R, power_w: Option<f64>) -> Result<(DecayCurve, Metadata)> {
    let t = read_table(reader, &["time_s", "scaled_counts_per_s"])?;
    let power_w = match power_w {
        Some(p) => p,
        None => t
            .meta_f64("power_w")?
            .ok_or_else(|| bad_data("decay curve has no `# power_w:` metadata"))?,
    };
    let curve = DecayCurve {
        time_s: t.column("time_s")?,
        counts_per_s: t.column("scaled_counts_per_s")?,
        power_w,
    };
    Ok((curve, t.meta))
}

pub const SCAN_COLUMNS: [&str; 3] = ["freq_hz", "fluor_counts", "power_counts"];

pub fn write_scan_csv<W: Write>(w: W, meta: &Metadata, scan: &RawScan) -> Result<()> {
    let rows: Vec<Vec<f64>> = (0..scan.freq.len())
        .map(|i| vec![scan.freq[i], scan.fluor_counts[i], scan.power_monitor[i]])
        .collect();
    write_table(w, meta, &SCAN_COLUMNS, &rows)
}

/// Reads a raw scan. The AOM-off range comes from the caller, or from
/// `aom_off_start`/`aom_off_end` metadata.
pub fn read_scan_csv<R: Read>(
    reader: R,
    aom_off: Option<std::ops::Range<usize>>,
) -> Result<(RawScan, Metadata)> {
    let t = read_table(reader, &SCAN_COLUMNS)?;
    let aom_off_range = match aom_off {
        Some(r) => r,
        None => {
            let a = t.meta_f64("aom_off_start")?;
            let b = t.meta_f64("aom_off_end")?;
            match (a, b) {
                (Some(a), Some(b)) => (a as usize)..(b as usize),
                _ => {
                    return Err(bad_data(
                        "no AOM-off range given and none in the file metadata",
                    ))
                }
            }
        }
    };
    let scan = RawScan {
        freq: t.column("freq_hz")?,
        fluor_counts: t.column("fluor_counts")?,
        power_monitor: t.column("power_counts")?,
        aom_off_range,
    };
    Ok((scan, t.meta))
}

/// Treated scan: background-subtracted channels, normalized signal and the
/// excluded flag (1 = laser off).
pub fn write_treated_csv<W: Write>(
    w: W,
    meta: &Metadata,
    treated: &RawScan,
    norm: &NormalizedScan,
) -> Result<()> {
    let rows: Vec<Vec<f64>> = (0..treated.freq.len())
        .map(|i| {
            vec![
                treated.freq[i],
                treated.fluor_counts[i],
                treated.power_monitor[i],
                norm.signal[i],
                if norm.is_excluded(i) { 1.0 } else { 0.0 },
            ]
        })
        .collect();
    write_table(
        w,
        meta,
        &[
            "freq_hz",
            "fluor_counts",
            "power_counts",
            "signal",
            "excluded",
        ],
        &rows,
    )
}
