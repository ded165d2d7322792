//! CSV artifacts: maps, coefficients, spectra and walk paths.
//!
//! Every file starts with a format line (`# sphaera-map ...` etc.) followed
//! by a provenance line carrying the crate version, the producing command,
//! the seed and the parameters of the run.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::HarmonicCoefficients;
use crate::harmonics::{FieldMap, SphereGrid};
use crate::spectra::PowerSpectrum;
use crate::sphere_walk::WalkPath;

/// Provenance of an artifact.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunHeader {
    pub command: String,
    pub seed: Option<u64>,
    pub params: Vec<(String, String)>,
}

impl RunHeader {
    pub fn new(command: &str, seed: Option<u64>) -> Self {
        Self {
            command: command.to_string(),
            seed,
            params: Vec::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.push((key.to_string(), value.to_string()));
        self
    }

    /// The `# sphaera <version> command=.. seed=.. key=value ..` line.
    pub fn line(&self) -> String {
        let mut s = format!("# sphaera {} command={}", env!("CARGO_PKG_VERSION"), self.command);
        if let Some(seed) = self.seed {
            let _ = write!(s, " seed={seed}");
        }
        for (k, v) in &self.params {
            let _ = write!(s, " {k}={v}");
        }
        s
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Splits leading `#` lines from the body.
fn split_comments(text: &str) -> (Vec<&str>, &str) {
    let mut comments = Vec::new();
    let mut rest = text;
    while let Some(line) = rest.strip_prefix('#') {
        let end = line.find('\n').map_or(line.len(), |i| i + 1);
        comments.push(line[..end].trim());
        rest = &line[end..];
    }
    (comments, rest)
}

/// Parses `key=value` tokens of a format line whose first token is `tag`.
fn format_fields<'a>(comments: &[&'a str], tag: &str) -> Result<Vec<(&'a str, &'a str)>> {
    let line = comments
        .iter()
        .find(|c| c.split_whitespace().next() == Some(tag))
        .ok_or_else(|| Error::Parse(format!("missing `# {tag}` header")))?;
    line.split_whitespace()
        .skip(1)
        .map(|tok| {
            tok.split_once('=')
                .ok_or_else(|| Error::Parse(format!("malformed header token `{tok}`")))
        })
        .collect()
}

fn field<'a>(fields: &[(&str, &'a str)], key: &str) -> Result<&'a str> {
    fields
        .iter()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| *v)
        .ok_or_else(|| Error::Parse(format!("header lacks `{key}`")))
}

fn integer(fields: &[(&str, &str)], key: &str) -> Result<usize> {
    field(fields, key)?
        .parse()
        .map_err(|_| Error::Parse(format!("header `{key}` is not an integer")))
}

fn records(body: &str, columns: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let header = reader.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != columns {
        return Err(Error::Parse(format!(
            "expected columns {}, found {}",
            columns.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    reader.records().map(|r| r.map_err(Error::from)).collect()
}

fn parse_f64(record: &csv::StringRecord, i: usize) -> Result<f64> {
    let raw = record.get(i).unwrap_or_default();
    let v: f64 = raw
        .parse()
        .map_err(|_| Error::Parse(format!("`{raw}` is not a number")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("non-finite value `{raw}`")));
    }
    Ok(v)
}

fn parse_int<T: std::str::FromStr>(record: &csv::StringRecord, i: usize) -> Result<T> {
    let raw = record.get(i).unwrap_or_default();
    raw.parse()
        .map_err(|_| Error::Parse(format!("`{raw}` is not an integer")))
}

fn read_text(mut r: impl Read) -> Result<String> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    Ok(text)
}

pub fn write_map(mut w: impl Write, map: &FieldMap, header: &RunHeader) -> Result<()> {
    let grid = map.grid();
    writeln!(
        w,
        "# sphaera-map L={} ntheta={} nphi={}",
        grid.bandlimit(),
        grid.theta_count(),
        grid.phi_count()
    )?;
    writeln!(w, "{}", header.line())?;
    writeln!(w, "theta,phi,value")?;
    for j in 0..grid.theta_count() {
        for k in 0..grid.phi_count() {
            writeln!(w, "{},{},{}", num(grid.theta(j)), num(grid.phi(k)), num(map.value(j, k)))?;
        }
    }
    Ok(())
}

pub fn read_map(r: impl Read) -> Result<FieldMap> {
    let text = read_text(r)?;
    let (comments, body) = split_comments(&text);
    let fields = format_fields(&comments, "sphaera-map")?;
    let grid = SphereGrid::with_resolution(
        integer(&fields, "L")?,
        integer(&fields, "ntheta")?,
        integer(&fields, "nphi")?,
    )?;
    let rows = records(body, &["theta", "phi", "value"])?;
    if rows.len() != grid.theta_count() * grid.phi_count() {
        return Err(Error::Parse(format!(
            "{} rows for a {}x{} grid",
            rows.len(),
            grid.theta_count(),
            grid.phi_count()
        )));
    }
    let mut values = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let (j, k) = (i / grid.phi_count(), i % grid.phi_count());
        let (theta, phi) = (parse_f64(row, 0)?, parse_f64(row, 1)?);
        if (theta - grid.theta(j)).abs() > 1e-12 || (phi - grid.phi(k)).abs() > 1e-12 {
            return Err(Error::Parse(format!("row {i} is not at grid node ({j}, {k})")));
        }
        values.push(parse_f64(row, 2)?);
    }
    FieldMap::new(grid, values)
}

pub fn write_coefficients(mut w: impl Write, c: &HarmonicCoefficients, header: &RunHeader) -> Result<()> {
    writeln!(w, "# sphaera-coefficients L={}", c.bandlimit())?;
    writeln!(w, "{}", header.line())?;
    writeln!(w, "l,m,re,im")?;
    for (l, m, a) in c.iter() {
        writeln!(w, "{l},{m},{},{}", num(a.re), num(a.im))?;
    }
    Ok(())
}

/// Reads `l,m,re,im` rows. Negative orders are accepted and must agree with
/// `a_{l,-m} = (-1)^m conj(a_lm)`; absent entries are zero.
pub fn read_coefficients(r: impl Read) -> Result<HarmonicCoefficients> {
    let text = read_text(r)?;
    let (_, body) = split_comments(&text);
    let mut entries = Vec::new();
    for row in records(body, &["l", "m", "re", "im"])? {
        let l: usize = parse_int(&row, 0)?;
        let m: i64 = parse_int(&row, 1)?;
        if m.unsigned_abs() as usize > l {
            return Err(Error::Parse(format!("|m| > l in row ({l}, {m})")));
        }
        entries.push((l, m, Complex64::new(parse_f64(&row, 2)?, parse_f64(&row, 3)?)));
    }
    let bandlimit = entries.iter().map(|e| e.0).max().unwrap_or(0);
    let mut c = HarmonicCoefficients::zeros(bandlimit);
    let mut seen = HashSet::new();
    for &(l, m, a) in entries.iter().filter(|e| e.1 >= 0) {
        if !seen.insert((l, m)) {
            return Err(Error::Parse(format!("duplicate entry ({l}, {m})")));
        }
        c.set(l, m as usize, a)?;
    }
    for &(l, m, a) in entries.iter().filter(|e| e.1 < 0) {
        if !seen.insert((l, m)) {
            return Err(Error::Parse(format!("duplicate entry ({l}, {m})")));
        }
        let implied = c.get_signed(l, m);
        if !seen.contains(&(l, -m)) {
            let positive = if m % 2 == 0 { a.conj() } else { -a.conj() };
            c.set(l, m.unsigned_abs() as usize, positive)?;
        } else if (implied - a).norm() > 1e-12 * (1.0 + a.norm()) {
            return Err(Error::Reality((implied - a).norm()));
        }
    }
    Ok(c)
}

pub fn write_spectrum(mut w: impl Write, s: &PowerSpectrum, header: &RunHeader) -> Result<()> {
    writeln!(w, "# sphaera-spectrum L={} family={}", s.bandlimit(), s.family())?;
    writeln!(w, "{}", header.line())?;
    writeln!(w, "l,C_l")?;
    for (l, v) in s.values().iter().enumerate() {
        writeln!(w, "{l},{}", num(*v))?;
    }
    Ok(())
}

/// Reads a spectrum file as a tabulated spectrum.
pub fn read_spectrum(r: impl Read) -> Result<PowerSpectrum> {
    let text = read_text(r)?;
    let (comments, body) = split_comments(&text);
    let bandlimit = integer(&format_fields(&comments, "sphaera-spectrum")?, "L")?;
    let rows = records(body, &["l", "C_l"])?;
    if rows.len() != bandlimit + 1 {
        return Err(Error::Parse(format!("{} rows for L = {bandlimit}", rows.len())));
    }
    let mut values = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        if parse_int::<usize>(row, 0)? != i {
            return Err(Error::Parse(format!("row {i} is out of order")));
        }
        values.push(parse_f64(row, 1)?);
    }
    PowerSpectrum::tabulated(values)
}

/// Writes `t,theta,phi` rows, starting with the initial point at `t = 0`.
pub fn write_path(mut w: impl Write, path: &WalkPath, header: &RunHeader) -> Result<()> {
    writeln!(w, "# sphaera-walk steps={}", path.times.len())?;
    writeln!(w, "{}", header.line())?;
    writeln!(w, "t,theta,phi")?;
    writeln!(w, "{},{},{}", num(0.0), num(path.start.theta()), num(path.start.phi()))?;
    for (t, p) in path.times.iter().zip(&path.positions) {
        writeln!(w, "{},{},{}", num(*t), num(p.theta()), num(p.phi()))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::sample_field;
    use crate::harmonics::synthesize;
    use crate::rng::StreamFactory;
    use crate::spectra::power_law_spectrum;

    fn header() -> RunHeader {
        RunHeader::new("test", Some(3)).param("L", 6)
    }

    fn sample() -> HarmonicCoefficients {
        let s = power_law_spectrum(1.0, 3.0, 6).unwrap();
        sample_field(&s, &mut StreamFactory::new(9).stream(0))
    }

    #[test]
    fn coefficient_round_trip_is_exact() {
        let c = sample();
        let mut buf = Vec::new();
        write_coefficients(&mut buf, &c, &header()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().nth(1).unwrap().contains("command=test seed=3 L=6"));
        assert_eq!(read_coefficients(buf.as_slice()).unwrap(), c);
    }

    #[test]
    fn negative_orders() {
        let text = "l,m,re,im\n0,0,1.0,0\n1,-1,0.5,0.25\n1,1,-0.5,0.25\n2,-1,1,2\n";
        let c = read_coefficients(text.as_bytes()).unwrap();
        assert_eq!(c.get(1, 1), Complex64::new(-0.5, 0.25));
        assert_eq!(c.get(2, 1), Complex64::new(-1.0, 2.0));
        let bad = "l,m,re,im\n1,1,0.5,0.25\n1,-1,0.5,0.25\n";
        assert!(matches!(read_coefficients(bad.as_bytes()), Err(Error::Reality(_))));
        assert!(read_coefficients("l,m,re,im\n1,1,1,0\n1,1,1,0\n".as_bytes()).is_err());
        assert!(read_coefficients("l,m,re,im\n1,2,1,0\n".as_bytes()).is_err());
        assert!(read_coefficients("l,m,re\n1,1,1\n".as_bytes()).is_err());
    }

    #[test]
    fn map_round_trip() {
        let map = synthesize(&sample(), &SphereGrid::new(6)).unwrap();
        let mut buf = Vec::new();
        write_map(&mut buf, &map, &header()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# sphaera-map L=6 ntheta=7 nphi=13\n"));
        assert_eq!(read_map(buf.as_slice()).unwrap(), map);
        let truncated: String = text.lines().take(20).map(|l| format!("{l}\n")).collect();
        assert!(read_map(truncated.as_bytes()).is_err());
    }

    #[test]
    fn spectrum_round_trip() {
        let s = power_law_spectrum(2.0, 3.5, 10).unwrap();
        let mut buf = Vec::new();
        write_spectrum(&mut buf, &s, &header()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# sphaera-spectrum L=10 family=power:"));
        let back = read_spectrum(buf.as_slice()).unwrap();
        assert_eq!(back.values(), s.values());
        assert!(read_spectrum("# sphaera-spectrum L=1\nl,C_l\n0,1\n".as_bytes()).is_err());
        assert!(read_spectrum("# sphaera-spectrum L=0\nl,C_l\n0,-1\n".as_bytes()).is_err());
    }
}
