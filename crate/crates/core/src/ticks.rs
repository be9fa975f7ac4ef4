//! Flat-file inputs: tick series (`timestamp,price`) and OHLC bars
//! (`window_id,open,high,low,close`).

use std::io::{Read, Write};

use chrono::{DateTime, NaiveDateTime};

use crate::error::{Error, Result};
use crate::paths::{PhysicalBar, Tick, Window};

fn parse_error(line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Integer epoch seconds, RFC 3339, or a naive `YYYY-MM-DD[T ]HH:MM:SS[.f]`
/// read as UTC. Returns seconds as `f64`.
pub fn parse_timestamp(raw: &str) -> Option<f64> {
    let s = raw.trim();
    if let Ok(epoch) = s.parse::<i64>() {
        return Some(epoch as f64);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp() as f64 + dt.timestamp_subsec_nanos() as f64 * 1e-9);
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            let utc = dt.and_utc();
            return Some(utc.timestamp() as f64 + utc.timestamp_subsec_nanos() as f64 * 1e-9);
        }
    }
    None
}

fn expect_header(reader: &mut csv::Reader<impl Read>, want: &[&str]) -> Result<()> {
    let headers = reader.headers()?;
    let got: Vec<String> = headers.iter().map(|h| h.trim().to_ascii_lowercase()).collect();
    if got != want {
        return Err(parse_error(1, format!("expected header `{}`, got `{}`", want.join(","), got.join(","))));
    }
    Ok(())
}

fn csv_reader(input: impl Read) -> csv::Reader<impl Read> {
    csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(input)
}

fn number(field: Option<&str>, line: u64, name: &str) -> Result<f64> {
    let raw = field.ok_or_else(|| parse_error(line, format!("missing {name}")))?;
    raw.parse::<f64>()
        .map_err(|_| parse_error(line, format!("{name} `{raw}` is not a number")))
}

pub fn read_ticks(input: impl Read) -> Result<Vec<Tick>> {
    let mut reader = csv_reader(input);
    expect_header(&mut reader, &["timestamp", "price"])?;
    let mut ticks = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let raw = record.get(0).unwrap_or_default();
        let time = parse_timestamp(raw).ok_or_else(|| parse_error(line, format!("bad timestamp `{raw}`")))?;
        let price = number(record.get(1), line, "price")?;
        ticks.push(Tick { time, price });
    }
    Ok(ticks)
}

pub fn write_ticks(out: impl Write, ticks: impl IntoIterator<Item = (i64, f64)>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["timestamp", "price"])?;
    for (t, p) in ticks {
        w.write_record([t.to_string(), p.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Split ticks into consecutive windows `[t0 + k L, t0 + (k + 1) L)`, with
/// `t0` the first timestamp. Returns `(k, window, ticks)` for non-empty
/// windows in order.
pub fn split_windows(ticks: &[Tick], length: f64) -> Result<Vec<(u64, Window, Vec<Tick>)>> {
    if !(length > 0.0) {
        return Err(Error::InvalidArgument(format!("window length must be positive, got {length}")));
    }
    let Some(first) = ticks.first() else {
        return Ok(Vec::new());
    };
    let t0 = first.time;
    let mut out: Vec<(u64, Window, Vec<Tick>)> = Vec::new();
    for tick in ticks {
        let k = ((tick.time - t0) / length).floor();
        if k < 0.0 {
            return Err(Error::NonMonotoneTime { time: tick.time });
        }
        let k = k as u64;
        match out.last_mut() {
            Some((last, _, bucket)) if *last == k => bucket.push(*tick),
            Some((last, _, _)) if *last > k => return Err(Error::NonMonotoneTime { time: tick.time }),
            _ => out.push((
                k,
                Window {
                    start: t0 + k as f64 * length,
                    length,
                },
                vec![*tick],
            )),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OhlcRow {
    pub line: u64,
    pub window_id: String,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
}

impl OhlcRow {
    /// Increments from the open. `raw_prices` converts prices to logs first.
    pub fn bar(&self, raw_prices: bool) -> Result<PhysicalBar> {
        let conv = |v: f64| -> Result<f64> {
            if !raw_prices {
                return Ok(v);
            }
            if !(v > 0.0) {
                return Err(parse_error(self.line, format!("non-positive price {v}")));
            }
            Ok(v.ln())
        };
        let open = conv(self.open)?;
        PhysicalBar::new(conv(self.high)? - open, conv(self.low)? - open, conv(self.close)? - open, 1.0)
            .map_err(|e| parse_error(self.line, e.to_string()))
    }
}

pub fn read_ohlc(input: impl Read) -> Result<Vec<OhlcRow>> {
    let mut reader = csv_reader(input);
    expect_header(&mut reader, &["window_id", "open", "high", "low", "close"])?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        rows.push(OhlcRow {
            line,
            window_id: record.get(0).unwrap_or_default().to_string(),
            open: number(record.get(1), line, "open")?,
            high: number(record.get(2), line, "high")?,
            low: number(record.get(3), line, "low")?,
            close: number(record.get(4), line, "close")?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timestamps() {
        assert_eq!(parse_timestamp("1700000000"), Some(1.7e9));
        assert_eq!(parse_timestamp("1970-01-01T00:01:00Z"), Some(60.0));
        assert_eq!(parse_timestamp("1970-01-01T00:00:01.5"), Some(1.5));
        assert_eq!(parse_timestamp("1970-01-01 00:00:02"), Some(2.0));
        assert_eq!(parse_timestamp("yesterday"), None);
    }

    #[test]
    fn tick_file() {
        let data = "timestamp,price\n# comment\n0,100\n1970-01-01T00:00:05Z,101.5\n";
        let ticks = read_ticks(data.as_bytes()).unwrap();
        assert_eq!(ticks, vec![Tick { time: 0.0, price: 100.0 }, Tick { time: 5.0, price: 101.5 }]);
    }

    #[test]
    fn bad_rows_report_line() {
        let data = "timestamp,price\n0,100\n1,abc\n";
        match read_ticks(data.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(read_ticks("time,price\n".as_bytes()).is_err());
    }

    #[test]
    fn windows() {
        let ticks: Vec<Tick> = [0.0, 1.0, 2.5, 3.0, 7.0].iter().map(|&t| Tick { time: t, price: 1.0 }).collect();
        let w = split_windows(&ticks, 3.0).unwrap();
        let ids: Vec<u64> = w.iter().map(|(k, _, _)| *k).collect();
        assert_eq!(ids, vec![0, 1, 2]);
        assert_eq!(w[0].2.len(), 3);
        assert_eq!(w[2].1.start, 6.0);
    }

    #[test]
    fn ohlc_rows() {
        let data = "window_id,open,high,low,close\na,0,1,-0.5,0.25\nb,100,110,95,105\n";
        let rows = read_ohlc(data.as_bytes()).unwrap();
        let bar = rows[0].bar(false).unwrap();
        assert_eq!((bar.high, bar.low, bar.close), (1.0, -0.5, 0.25));
        let bar = rows[1].bar(true).unwrap();
        assert!((bar.high - 1.1f64.ln()).abs() < 1e-15);
        // Raw prices parsed as logs leave a high below the open: rejected.
        let bad = "window_id,open,high,low,close\nc,1,0.5,0.2,0.3\n";
        assert!(read_ohlc(bad.as_bytes()).unwrap()[0].bar(false).is_err());
    }
}
