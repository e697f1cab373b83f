use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Dataset;
use crate::scalar::{lit, Real};
use crate::sphere::lonlat_to_unit;

/// A position in degrees; longitude normalized to `[-180, 180)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    /// Accepts latitude in `[-90, 90]` and longitude in `[-180, 360)`.
    pub fn new(lat: f64, lon: f64) -> Option<Self> {
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..360.0).contains(&lon) {
            return None;
        }
        let lon = if lon >= 180.0 { lon - 360.0 } else { lon };
        Some(Self { lat, lon })
    }
}

/// One track row. `timestamp` is `YYYYMMDDhhmm` as an integer, so numeric
/// order is time order; fields after the longitude are kept verbatim.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fix {
    pub timestamp: u64,
    pub record_id: String,
    pub status: String,
    pub point: GeoPoint,
    pub extra: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StormTrack {
    pub storm_id: String,
    pub name: String,
    pub fixes: Vec<Fix>,
}

fn fields(line: &str) -> Vec<&str> {
    let mut f: Vec<&str> = line.split(',').map(str::trim).collect();
    while f.last() == Some(&"") {
        f.pop();
    }
    f
}

fn is_storm_id(token: &str) -> bool {
    let b = token.as_bytes();
    b.len() == 8 && b[..2].iter().all(u8::is_ascii_alphabetic) && b[2..].iter().all(u8::is_ascii_digit)
}

fn is_data_row(f: &[&str]) -> bool {
    f.first().is_some_and(|t| t.len() == 8 && t.bytes().all(|c| c.is_ascii_digit()))
}

/// Parses a hemisphere-suffixed coordinate such as `28.0N` or `94.8W`.
fn coordinate(token: &str, positive: char, negative: char, line: usize) -> Result<f64> {
    let bad = || Error::BadCoordinate { line, token: token.to_string() };
    let last = token.chars().last().ok_or_else(bad)?;
    let sign = match last.to_ascii_uppercase() {
        c if c == positive => 1.0,
        c if c == negative => -1.0,
        _ => return Err(bad()),
    };
    let value: f64 = token[..token.len() - 1].trim().parse().map_err(|_| bad())?;
    if !value.is_finite() || value < 0.0 {
        return Err(bad());
    }
    Ok(sign * value)
}

fn data_row(f: &[&str], line: usize) -> Result<Fix> {
    if f.len() < 6 {
        return Err(Error::Parse(format!("line {line}: expected at least 6 fields, found {}", f.len())));
    }
    let time = f[1];
    if time.len() != 4 || !time.bytes().all(|c| c.is_ascii_digit()) || time[..2].parse::<u32>().unwrap() > 23 {
        return Err(Error::Parse(format!("line {line}: bad time {time:?}")));
    }
    let timestamp = format!("{}{}", f[0], time).parse().expect("digits");
    let lat = coordinate(f[4], 'N', 'S', line)?;
    let lon = coordinate(f[5], 'E', 'W', line)?;
    let point = GeoPoint::new(lat, lon).ok_or_else(|| Error::BadCoordinate { line, token: format!("{}, {}", f[4], f[5]) })?;
    Ok(Fix {
        timestamp,
        record_id: f[2].to_string(),
        status: f[3].to_string(),
        point,
        extra: f[6..].iter().map(|s| s.to_string()).collect(),
    })
}

/// Parses HURDAT2 text: header lines `ID, NAME, count,` each followed by
/// `count` fix rows. Blank lines are ignored. Errors carry 1-based line
/// numbers.
pub fn parse_hurdat2(text: &str) -> Result<Vec<StormTrack>> {
    let mut tracks = Vec::new();
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| !l.trim().is_empty()).peekable();
    while let Some((line, raw)) = lines.next() {
        let f = fields(raw);
        if f.len() != 3 || !is_storm_id(f[0]) {
            return Err(Error::MalformedHeader { line, msg: format!("expected `ID, NAME, count,`, found {raw:?}") });
        }
        let expected: usize =
            f[2].parse().map_err(|_| Error::MalformedHeader { line, msg: format!("bad row count {:?}", f[2]) })?;
        let mut fixes: Vec<Fix> = Vec::with_capacity(expected);
        while fixes.len() < expected {
            match lines.peek() {
                Some(&(l, r)) if is_data_row(&fields(r)) => {
                    let fix = data_row(&fields(r), l)?;
                    if fixes.last().is_some_and(|p| p.timestamp > fix.timestamp) {
                        return Err(Error::Parse(format!("line {l}: fix precedes the previous one")));
                    }
                    fixes.push(fix);
                    lines.next();
                }
                _ => break,
            }
        }
        let extra_row = lines.peek().is_some_and(|&(_, r)| is_data_row(&fields(r)));
        if fixes.len() != expected || extra_row {
            let found = fixes.len() + lines.clone().take_while(|&(_, r)| is_data_row(&fields(r))).count();
            return Err(Error::RowCountMismatch { line, storm: f[0].to_string(), expected, found });
        }
        if expected == 0 {
            return Err(Error::MalformedHeader { line, msg: "storm has no fixes".into() });
        }
        tracks.push(StormTrack { storm_id: f[0].to_string(), name: f[1].to_string(), fixes });
    }
    Ok(tracks)
}

/// One pair per track: first fix as covariate, last fix as response.
/// Returns the dataset and the number of single-fix tracks skipped.
pub fn tracks_to_regression_pairs<T: Real>(tracks: &[StormTrack]) -> (Dataset<T>, usize) {
    let unit = |g: &GeoPoint| lonlat_to_unit::<T>(lit(g.lon), lit(g.lat));
    let mut skipped = 0;
    let mut pairs = Vec::new();
    for t in tracks {
        match (t.fixes.first(), t.fixes.last()) {
            (Some(a), Some(b)) if t.fixes.len() >= 2 => pairs.push((unit(&a.point), unit(&b.point))),
            _ => skipped += 1,
        }
    }
    (Dataset::new(pairs).expect("points on the same sphere"), skipped)
}
