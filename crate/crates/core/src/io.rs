//! File formats: shot records as CSV and JSON lines, (x, y) point files,
//! trace CSVs and Allan CSVs. Every simulation output carries the resolved
//! config hash (CSV: leading `#` comment; JSONL: leading meta object).

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::peaks::{Channel, DetectionTrace};
use crate::pipeline::AllanResult;
use crate::sim::ShotRecord;

const FIXED_COLUMNS: [&str; 8] = [
    "index",
    "time",
    "k_sign",
    "mass_config",
    "A11",
    "A21",
    "A12",
    "A22",
];

fn monitor_columns(shots: &[ShotRecord]) -> Vec<String> {
    let mut names: BTreeMap<&str, ()> = BTreeMap::new();
    for shot in shots {
        for name in shot.monitors.keys() {
            names.insert(name, ());
        }
    }
    names.keys().map(|n| n.to_string()).collect()
}

/// Writes shots as CSV: fixed columns `index,time,k_sign,mass_config,
/// A11,A21,A12,A22` followed by the monitor channels in sorted order.
pub fn write_shots_csv<W: Write>(writer: W, shots: &[ShotRecord], config_hash: &str) -> Result<()> {
    let mut w = std::io::BufWriter::new(writer);
    writeln!(w, "# config_hash={config_hash}")?;
    let monitors = monitor_columns(shots);
    let mut header: Vec<&str> = FIXED_COLUMNS.to_vec();
    header.extend(monitors.iter().map(String::as_str));
    writeln!(w, "{}", header.join(","))?;
    for shot in shots {
        write!(
            w,
            "{},{},{},{},{},{},{},{}",
            shot.index,
            shot.time,
            shot.k_sign,
            shot.mass_config,
            shot.areas[0],
            shot.areas[1],
            shot.areas[2],
            shot.areas[3]
        )?;
        for name in &monitors {
            match shot.monitors.get(name) {
                Some(v) => write!(w, ",{v}")?,
                None => write!(w, ",")?,
            }
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a shot CSV produced by [`write_shots_csv`].
pub fn read_shots_csv<R: std::io::Read>(reader: R) -> Result<Vec<ShotRecord>> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(reader);
    let headers = csv_reader.headers()?.clone();
    for (i, expected) in FIXED_COLUMNS.iter().enumerate() {
        if headers.get(i) != Some(*expected) {
            return Err(Error::Config(format!(
                "shot CSV column {i} is {:?}, expected {expected:?}",
                headers.get(i).unwrap_or("")
            )));
        }
    }
    let monitor_names: Vec<String> = headers.iter().skip(8).map(str::to_string).collect();
    let mut shots = Vec::new();
    for record in csv_reader.records() {
        let record = record?;
        let field = |i: usize| -> Result<&str> {
            record
                .get(i)
                .ok_or_else(|| Error::Config(format!("short row in shot CSV ({record:?})")))
        };
        let parse = |i: usize| -> Result<f64> {
            field(i)?
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("bad number in shot CSV: {e}")))
        };
        let mut monitors = BTreeMap::new();
        for (j, name) in monitor_names.iter().enumerate() {
            let raw = field(8 + j)?;
            if !raw.is_empty() {
                monitors.insert(
                    name.clone(),
                    raw.parse::<f64>()
                        .map_err(|e| Error::Config(format!("bad monitor value: {e}")))?,
                );
            }
        }
        shots.push(ShotRecord {
            index: field(0)?
                .parse()
                .map_err(|e| Error::Config(format!("bad index: {e}")))?,
            time: parse(1)?,
            k_sign: field(2)?
                .parse()
                .map_err(|e| Error::Config(format!("bad k_sign: {e}")))?,
            mass_config: field(3)?.parse()?,
            areas: [parse(4)?, parse(5)?, parse(6)?, parse(7)?],
            monitors,
        });
    }
    Ok(shots)
}

/// Writes shots as JSON lines, preceded by a `{"config_hash": ...}` meta line.
pub fn write_shots_jsonl<W: Write>(
    writer: W,
    shots: &[ShotRecord],
    config_hash: &str,
) -> Result<()> {
    let mut w = std::io::BufWriter::new(writer);
    writeln!(w, "{}", serde_json::json!({ "config_hash": config_hash }))?;
    for shot in shots {
        writeln!(w, "{}", serde_json::to_string(shot)?)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads shots from JSON lines, skipping the meta line when present.
pub fn read_shots_jsonl<R: std::io::Read>(reader: R) -> Result<Vec<ShotRecord>> {
    let mut shots = Vec::new();
    for (line_number, line) in std::io::BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<ShotRecord>(&line) {
            Ok(shot) => shots.push(shot),
            Err(e) => {
                let is_meta = line_number == 0
                    && serde_json::from_str::<serde_json::Value>(&line)
                        .is_ok_and(|v| v.get("config_hash").is_some());
                if !is_meta {
                    return Err(Error::Config(format!(
                        "line {} of JSONL input: {e}",
                        line_number + 1
                    )));
                }
            }
        }
    }
    Ok(shots)
}

/// Reads a two-column (x, y) point file; `#` comments and a non-numeric
/// header line are skipped.
pub fn read_points_csv<R: std::io::Read>(reader: R) -> Result<Vec<(f64, f64)>> {
    let mut points = Vec::new();
    for line in std::io::BufReader::new(reader).lines() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = trimmed.split(',');
        let (Some(a), Some(b)) = (parts.next(), parts.next()) else {
            return Err(Error::Config(format!("point line {trimmed:?} not x,y")));
        };
        match (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
            (Ok(x), Ok(y)) => points.push((x, y)),
            _ if points.is_empty() => continue, // header line
            _ => return Err(Error::Config(format!("bad point line {trimmed:?}"))),
        }
    }
    Ok(points)
}

pub fn write_points_csv<W: Write>(writer: W, points: &[(f64, f64)]) -> Result<()> {
    let mut w = std::io::BufWriter::new(writer);
    writeln!(w, "x,y")?;
    for (x, y) in points {
        writeln!(w, "{x},{y}")?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a detection trace as two-column (time, signal) CSV.
pub fn write_trace_csv<W: Write>(writer: W, trace: &DetectionTrace) -> Result<()> {
    let mut w = std::io::BufWriter::new(writer);
    writeln!(w, "time,signal")?;
    for (t, v) in trace.points() {
        writeln!(w, "{t},{v}")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a two-column (time, signal) CSV into a trace, checking that the
/// sampling is uniform.
pub fn read_trace_csv<R: std::io::Read>(reader: R, channel: Channel) -> Result<DetectionTrace> {
    let rows = read_points_csv(reader)?;
    if rows.len() < 2 {
        return Err(Error::Config("trace needs at least 2 samples".into()));
    }
    let t0 = rows[0].0;
    let dt = rows[1].0 - rows[0].0;
    if !(dt > 0.0) {
        return Err(Error::Config("trace times must increase".into()));
    }
    for (i, row) in rows.iter().enumerate() {
        let expected = t0 + i as f64 * dt;
        if (row.0 - expected).abs() > dt * 1e-3 {
            return Err(Error::Config(format!(
                "non-uniform trace sampling at row {i}: {} vs expected {expected}",
                row.0
            )));
        }
    }
    Ok(DetectionTrace {
        channel,
        t0,
        dt,
        samples: rows.into_iter().map(|r| r.1).collect(),
    })
}

/// Writes an Allan result as (tau, sigma, count) CSV.
pub fn write_allan_csv<W: Write>(writer: W, result: &AllanResult) -> Result<()> {
    let mut w = std::io::BufWriter::new(writer);
    writeln!(w, "tau,sigma,count")?;
    for i in 0..result.taus.len() {
        writeln!(
            w,
            "{},{},{}",
            result.taus[i], result.sigmas[i], result.counts[i]
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Convenience wrapper writing any serializable report as pretty JSON.
pub fn write_json<W: Write, T: serde::Serialize>(writer: W, value: &T) -> Result<()> {
    let mut w = std::io::BufWriter::new(writer);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn create_file(path: &Path) -> Result<std::fs::File> {
    std::fs::File::create(path).map_err(Error::Io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::MassConfig;

    fn sample_shots() -> Vec<ShotRecord> {
        (0..5)
            .map(|i| {
                let mut monitors = BTreeMap::new();
                monitors.insert("probe_power".to_string(), 0.1 * i as f64);
                monitors.insert("raman_mirror_tilt_ew".to_string(), -0.001 * i as f64);
                ShotRecord {
                    index: i,
                    time: 1.9 * i as f64,
                    k_sign: if i % 2 == 0 { 1 } else { -1 },
                    mass_config: if i < 3 {
                        MassConfig::C1
                    } else {
                        MassConfig::C2
                    },
                    areas: [1.0e5 + i as f64, 0.9e5, 1.1e5, 0.95e5],
                    monitors,
                }
            })
            .collect()
    }

    #[test]
    fn csv_round_trip_exact() {
        let shots = sample_shots();
        let mut buffer = Vec::new();
        write_shots_csv(&mut buffer, &shots, "deadbeef").unwrap();
        let text = String::from_utf8(buffer.clone()).unwrap();
        assert!(text.starts_with("# config_hash=deadbeef\n"));
        assert!(text.contains("index,time,k_sign,mass_config,A11,A21,A12,A22"));
        let back = read_shots_csv(buffer.as_slice()).unwrap();
        assert_eq!(back, shots);
    }

    #[test]
    fn jsonl_round_trip_exact() {
        let shots = sample_shots();
        let mut buffer = Vec::new();
        write_shots_jsonl(&mut buffer, &shots, "deadbeef").unwrap();
        let back = read_shots_jsonl(buffer.as_slice()).unwrap();
        assert_eq!(back, shots);
    }

    #[test]
    fn points_round_trip() {
        let points = vec![(0.5, 0.25), (0.125, 0.75)];
        let mut buffer = Vec::new();
        write_points_csv(&mut buffer, &points).unwrap();
        let back = read_points_csv(buffer.as_slice()).unwrap();
        assert_eq!(back, points);
    }

    #[test]
    fn trace_round_trip_and_uniformity_check() {
        let trace = DetectionTrace {
            channel: Channel::F1,
            t0: 0.25,
            dt: 0.125,
            samples: vec![1.0, 2.0, 3.0, 2.0],
        };
        let mut buffer = Vec::new();
        write_trace_csv(&mut buffer, &trace).unwrap();
        let back = read_trace_csv(buffer.as_slice(), Channel::F1).unwrap();
        assert_eq!(back, trace);

        let bad = "time,signal\n0.0,1.0\n0.1,2.0\n0.35,3.0\n";
        assert!(read_trace_csv(bad.as_bytes(), Channel::F1).is_err());
    }
}
