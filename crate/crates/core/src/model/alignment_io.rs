//! Alignment TSV: `source_iri<TAB>target_iri<TAB>=<TAB>confidence<TAB>provenance`.

use super::{Alignment, Correspondence, EntityRef, Provenance};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AlignmentIoError {
    #[error("I/O error on {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}: row {row}: {message}")]
    Malformed { path: String, row: usize, message: String },
}

pub fn write_alignment(a: &Alignment, path: &Path) -> Result<(), AlignmentIoError> {
    let io_err = |source| AlignmentIoError::Io { path: path.display().to_string(), source };
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    write_rows(a, &mut w).and_then(|_| w.flush()).map_err(io_err)
}

pub(crate) fn write_rows(a: &Alignment, w: &mut impl Write) -> io::Result<()> {
    for c in a {
        // f64's Display is the shortest representation that parses back exactly.
        writeln!(
            w,
            "{}\t{}\t=\t{}\t{}",
            c.source.iri(),
            c.target.iri(),
            c.confidence,
            c.provenance.as_str()
        )?;
    }
    Ok(())
}

pub fn read_alignment(path: &Path) -> Result<Alignment, AlignmentIoError> {
    let name = path.display().to_string();
    let file = File::open(path).map_err(|source| AlignmentIoError::Io { path: name.clone(), source })?;
    read_rows(BufReader::new(file), &name)
}

/// Reads several alignment files into one alignment.
pub fn read_alignments<P: AsRef<Path>>(paths: &[P]) -> Result<Alignment, AlignmentIoError> {
    let mut out = Alignment::new();
    for p in paths {
        out.extend(read_alignment(p.as_ref())?.iter().cloned());
    }
    Ok(out)
}

pub(crate) fn read_rows(reader: impl BufRead, name: &str) -> Result<Alignment, AlignmentIoError> {
    let mut out = Alignment::new();
    for (idx, line) in reader.lines().enumerate() {
        let row = idx + 1;
        let line = line.map_err(|source| AlignmentIoError::Io { path: name.to_string(), source })?;
        let malformed = |message: String| AlignmentIoError::Malformed {
            path: name.to_string(),
            row,
            message,
        };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 5 {
            return Err(malformed(format!("expected 5 columns, found {}", cols.len())));
        }
        if cols[2] != "=" {
            return Err(malformed(format!("unsupported relation {:?}", cols[2])));
        }
        let source = EntityRef::parse(cols[0]).map_err(|e| malformed(e.to_string()))?;
        let target = EntityRef::parse(cols[1]).map_err(|e| malformed(e.to_string()))?;
        let confidence: f64 = cols[3]
            .parse()
            .map_err(|_| malformed(format!("bad confidence {:?}", cols[3])))?;
        let provenance = Provenance::parse(cols[4])
            .ok_or_else(|| malformed(format!("bad provenance {:?}", cols[4])))?;
        let c = Correspondence::new(source, target, confidence, provenance)
            .map_err(|e| malformed(e.to_string()))?;
        if out.insert(c).is_some() {
            return Err(malformed("duplicate correspondence".into()));
        }
    }
    Ok(out)
}
