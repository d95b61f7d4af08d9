//! Time-series and event CSV formats.
//!
//! Time series: header `time,<name>:<role>,...` with role one of `angle`,
//! `velocity`, `trigger`, then one row per sample on a uniform grid.
//! Events: header `time,label` with label `L` or `R`.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use cyclesym_core::{Channel, ChannelRole, Event, EventTrain, Side, TimeSeries};

use crate::error::{CliError, CliResult};

/// Relative tolerance on sample spacing.
const GRID_TOLERANCE: f64 = 1e-6;

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_num(s: &str, what: &str) -> CliResult<f64> {
    s.trim().parse::<f64>().map_err(|_| CliError::validation(format!("{what}: cannot parse {s:?} as a number")))
}

pub fn parse_header_field(field: &str) -> CliResult<(String, ChannelRole)> {
    let (name, role) = field
        .rsplit_once(':')
        .ok_or_else(|| CliError::validation(format!("column {field:?} is not of the form <name>:<role>")))?;
    let role = ChannelRole::parse(role.trim())
        .ok_or_else(|| CliError::validation(format!("column {field:?}: unknown role {role:?}")))?;
    if name.trim().is_empty() {
        return Err(CliError::validation(format!("column {field:?} has an empty name")));
    }
    Ok((name.trim().to_string(), role))
}

pub fn read_time_series_from<R: Read>(reader: R, source: &str) -> CliResult<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| CliError::validation(format!("{source}: {e}")))?.clone();
    if headers.get(0) != Some("time") {
        return Err(CliError::validation(format!("{source}: first column must be `time`")));
    }
    let cols: Vec<(String, ChannelRole)> = headers.iter().skip(1).map(parse_header_field).collect::<CliResult<_>>()?;
    if cols.is_empty() {
        return Err(CliError::validation(format!("{source}: no data columns")));
    }
    let mut times = Vec::new();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); cols.len()];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::validation(format!("{source}: {e}")))?;
        let what = format!("{source} row {}", row + 2);
        times.push(parse_num(&rec[0], &what)?);
        for (j, col) in values.iter_mut().enumerate() {
            col.push(parse_num(&rec[j + 1], &what)?);
        }
    }
    if times.len() < 2 {
        return Err(CliError::validation(format!("{source}: need at least two samples")));
    }
    let n = times.len();
    let t0 = times[0];
    let dt = (times[n - 1] - t0) / (n - 1) as f64;
    if !(dt > 0.0) {
        return Err(CliError::validation(format!("{source}: time column is not increasing")));
    }
    for (i, t) in times.iter().enumerate() {
        if (t - (t0 + i as f64 * dt)).abs() > GRID_TOLERANCE * dt.max(t.abs()) {
            return Err(CliError::validation(format!("{source}: sample {} is off the uniform time grid", i + 1)));
        }
    }
    let channels = cols.into_iter().zip(values).map(|((name, role), v)| Channel::new(name, role, v)).collect();
    TimeSeries::new(t0, dt, channels).map_err(|e| CliError::from_core(source, e))
}

pub fn read_time_series(path: &Path) -> CliResult<TimeSeries> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    read_time_series_from(file, &path.display().to_string())
}

pub fn write_time_series_to<W: Write>(writer: W, ts: &TimeSeries) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let header: Vec<String> = std::iter::once("time".to_string())
        .chain(ts.channels().iter().map(|c| format!("{}:{}", c.name, c.role.as_str())))
        .collect();
    w.write_record(&header)?;
    for i in 0..ts.n_samples() {
        let row = std::iter::once(fmt(ts.time(i))).chain(ts.channels().iter().map(|c| fmt(c.values[i])));
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_to_cli(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::validation(format!("{}: {other:?}", path.display())),
    }
}

pub fn write_time_series(path: &Path, ts: &TimeSeries) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    write_time_series_to(file, ts).map_err(|e| csv_to_cli(path, e))
}

pub fn read_events_from<R: Read>(reader: R, source: &str) -> CliResult<EventTrain> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| CliError::validation(format!("{source}: {e}")))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["time", "label"] {
        return Err(CliError::validation(format!("{source}: expected header `time,label`")));
    }
    let mut events = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::validation(format!("{source}: {e}")))?;
        let what = format!("{source} row {}", row + 2);
        let time = parse_num(&rec[0], &what)?;
        let label = Side::parse(&rec[1])
            .ok_or_else(|| CliError::validation(format!("{what}: label {:?} is not L or R", &rec[1])))?;
        events.push(Event { time, label });
    }
    EventTrain::new(events).map_err(|e| CliError::from_core(source, e))
}

pub fn read_events(path: &Path) -> CliResult<EventTrain> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    read_events_from(file, &path.display().to_string())
}

pub fn write_events(path: &Path, train: &EventTrain) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let result = (|| {
        w.write_record(["time", "label"])?;
        for e in train.events() {
            w.write_record([fmt(e.time), e.label.to_string()])?;
        }
        w.flush()?;
        Ok::<_, csv::Error>(())
    })();
    result.map_err(|e| csv_to_cli(path, e))
}

/// Writes a generic table with a header row; values are written as given.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let result = (|| {
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok::<_, csv::Error>(())
    })();
    result.map_err(|e| csv_to_cli(path, e))
}

pub fn num(v: f64) -> String {
    fmt(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TimeSeries {
        TimeSeries::new(
            0.25,
            0.005,
            vec![
                Channel::new("hip_l", ChannelRole::Angle, (0..50).map(|i| (i as f64 * 0.1).sin() / 3.0).collect()),
                Channel::new("trig_l", ChannelRole::Trigger, (0..50).map(|i| 1e-300 * i as f64 + 0.1).collect()),
            ],
        )
        .unwrap()
    }

    #[test]
    fn time_series_round_trip() {
        let ts = sample();
        let mut buf = Vec::new();
        write_time_series_to(&mut buf, &ts).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("time,hip_l:angle,trig_l:trigger\n"));
        let back = read_time_series_from(buf.as_slice(), "mem").unwrap();
        assert_eq!(back.n_samples(), 50);
        assert!((back.dt() - ts.dt()).abs() <= 1e-12 * ts.dt());
        for (a, b) in back.channels().iter().zip(ts.channels()) {
            assert_eq!((a.name.as_str(), a.role), (b.name.as_str(), b.role));
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((x - y).abs() <= 1e-12 * y.abs());
            }
        }
    }

    #[test]
    fn malformed_headers() {
        for text in ["t,a:angle\n0,1\n1,2\n", "time,a\n0,1\n1,2\n", "time,a:speed\n0,1\n1,2\n", "time,a:angle\n0,1\n"] {
            assert!(matches!(read_time_series_from(text.as_bytes(), "x"), Err(CliError::Validation(_))), "{text}");
        }
    }

    #[test]
    fn irregular_grid_is_rejected() {
        let text = "time,a:angle\n0,1\n0.1,2\n0.25,3\n0.3,4\n";
        assert!(read_time_series_from(text.as_bytes(), "x").is_err());
    }

    #[test]
    fn events_parse() {
        let text = "time,label\n1.0,L\n1.5,R\n2.0,L\n";
        let train = read_events_from(text.as_bytes(), "e").unwrap();
        assert_eq!(train.len(), 3);
        assert_eq!(train.events()[1].label, Side::Right);
        assert!(read_events_from("time,label\n1.0,L\n1.5,X\n".as_bytes(), "e").is_err());
        assert!(read_events_from("time,label\n1.0,L\n1.5,L\n".as_bytes(), "e").is_err());
    }
}
