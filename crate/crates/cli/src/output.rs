use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::CliError;

/// Format of tabular artifacts. Scalar summaries are always JSON.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Writes `path` through a temporary file in the same directory and a
/// rename, so readers never observe a partial file.
pub(crate) fn write_atomic(
    path: &Path,
    fill: impl FnOnce(&mut dyn Write) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = std::io::BufWriter::new(tmp.as_file_mut());
        fill(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(std::io::Error::from)?;
        writeln!(w)?;
        Ok(())
    })
}

/// Rows as CSV with a header, or as a JSON array of objects.
pub(crate) fn write_rows<T: Serialize>(path_stem: &Path, format: Format, rows: &[T]) -> Result<(), CliError> {
    let path = path_stem.with_extension(format.extension());
    match format {
        Format::Json => write_json(&path, &rows),
        Format::Csv => write_atomic(&path, |w| {
            let mut csv = csv::Writer::from_writer(w);
            for r in rows {
                csv.serialize(r).map_err(hypertwin::Error::from)?;
            }
            csv.flush()?;
            Ok(())
        }),
    }
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    write_atomic(path, |w| Ok(w.write_all(text.as_bytes())?))
}
