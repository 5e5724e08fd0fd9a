//! CSV datasets: header `f0,...,f{d-1},label`, one sample per row.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Tensor2;

use super::Dataset;

fn parse_err(source: &str, line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: source.to_string(),
        line,
        msg: msg.into(),
    }
}

/// Parses a dataset. Labels must lie in `0..classes`; when `classes` is
/// `None` it is taken as `max(label) + 1`.
pub fn read_csv<R: Read>(reader: R, source: &str, classes: Option<usize>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| parse_err(source, 1, e.to_string()))?
        .clone();
    if header.is_empty() || header.iter().all(str::is_empty) {
        return Err(parse_err(source, 1, "empty file"));
    }
    let cols = header.len();
    if cols < 2 || &header[cols - 1] != "label" {
        return Err(parse_err(source, 1, "header must be f0,...,f{d-1},label"));
    }
    for (k, name) in header.iter().take(cols - 1).enumerate() {
        if name != format!("f{k}") {
            return Err(parse_err(source, 1, format!("column {k} is `{name}`, expected `f{k}`")));
        }
    }
    let dim = cols - 1;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(source, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != cols {
            return Err(parse_err(source, line, format!("{} fields, expected {cols}", rec.len())));
        }
        for (k, cell) in rec.iter().take(dim).enumerate() {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| parse_err(source, line, format!("column f{k}: `{cell}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(source, line, format!("column f{k}: non-finite value")));
            }
            data.push(v);
        }
        let cell = rec[dim].trim();
        let y: usize = cell
            .parse()
            .map_err(|_| parse_err(source, line, format!("label `{cell}` is not a class index")))?;
        if let Some(c) = classes {
            if y >= c {
                return Err(parse_err(source, line, format!("label {y} out of range for {c} classes")));
            }
        }
        labels.push(y);
    }
    if labels.is_empty() {
        return Err(parse_err(source, 1, "no data rows"));
    }
    let classes = classes.unwrap_or_else(|| labels.iter().max().unwrap() + 1);
    if classes < 2 {
        return Err(parse_err(source, 1, "need at least 2 classes"));
    }
    let name = Path::new(source)
        .file_stem()
        .map_or_else(|| source.to_string(), |s| s.to_string_lossy().into_owned());
    Dataset::new(name, Tensor2::from_vec(labels.len(), dim, data)?, labels, classes)
}

pub fn load_csv(path: &Path) -> Result<Dataset> {
    load_csv_with_classes(path, None)
}

pub fn load_csv_with_classes(path: &Path, classes: Option<usize>) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, &path.display().to_string(), classes)
}

/// Writes with shortest round-trip float formatting.
pub fn write_csv<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::Data(format!("csv write: {e}"));
    let mut header: Vec<String> = (0..dataset.dim()).map(|k| format!("f{k}")).collect();
    header.push("label".into());
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..dataset.len() {
        let mut row: Vec<String> = dataset.features().row(i).iter().map(|v| v.to_string()).collect();
        row.push(dataset.labels()[i].to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Data(format!("csv write: {e}")))
}

pub fn save_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(dataset, file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_blobs, BlobSpec};
    use crate::numerics::RngStream;

    fn parse(text: &str) -> Result<Dataset> {
        read_csv(text.as_bytes(), "mem.csv", None)
    }

    fn line_of(e: Error) -> u64 {
        match e {
            Error::Parse { line, .. } => line,
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn hand_written_fixture() {
        let d = parse("f0,f1,label\n1.5,-2,0\n0.25,3e2,1\n-0,7,1\n").unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.features().row(0), &[1.5, -2.0]);
        assert_eq!(d.features().row(1), &[0.25, 300.0]);
        assert_eq!(d.features().row(2), &[0.0, 7.0]);
        assert_eq!(d.labels(), &[0, 1, 1]);
        assert_eq!(d.counts(), &[1, 2]);
    }

    #[test]
    fn empty_file_is_an_error() {
        assert!(matches!(parse(""), Err(Error::Parse { .. })));
        assert!(matches!(parse("f0,label\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert_eq!(line_of(parse("f0,f1,label\n1,2,0\n3,x,1\n").unwrap_err()), 3);
        assert_eq!(line_of(parse("f0,f1,label\n1,2,0\n3,1\n").unwrap_err()), 3);
        assert_eq!(line_of(parse("f0,f1,label\n1,2,-1\n").unwrap_err()), 2);
        let r = read_csv("f0,label\n1,0\n2,5\n".as_bytes(), "m", Some(3));
        assert_eq!(line_of(r.unwrap_err()), 3);
        assert_eq!(line_of(parse("a,b,label\n1,2,0\n").unwrap_err()), 1);
    }

    #[test]
    fn roundtrip_is_exact() {
        let spec = BlobSpec {
            classes: 3,
            dim: 4,
            center_scale: 3.0,
            noise_std: 1.0,
        };
        let d = synth_blobs(&RngStream::new(8), &spec, &[6, 3, 2]).unwrap();
        let mut buf = Vec::new();
        write_csv(&d, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), "blobs-train.csv", Some(3)).unwrap();
        assert_eq!(back.features(), d.features());
        assert_eq!(back.labels(), d.labels());

        let mut again = Vec::new();
        write_csv(&back, &mut again).unwrap();
        assert_eq!(buf, again);
    }
}
