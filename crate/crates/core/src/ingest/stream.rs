//! Streaming readers over a table's part files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use csv::StringRecord;
use flate2::read::MultiGzDecoder;
use serde::{Deserialize, Serialize};

use super::columns::{RowError, TableColumns, TraceRow};
use super::{IngestError, Table};

/// Per-table row accounting. `rows_emitted + rows_skipped == rows_read`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableStats {
    pub files: u64,
    pub rows_read: u64,
    pub rows_emitted: u64,
    pub rows_skipped: u64,
    /// Skip count by reason.
    #[serde(default)]
    pub skip_reasons: BTreeMap<String, u64>,
}

impl TableStats {
    pub fn merge(&mut self, other: &TableStats) {
        self.files += other.files;
        self.rows_read += other.rows_read;
        self.rows_emitted += other.rows_emitted;
        self.rows_skipped += other.rows_skipped;
        for (reason, n) in &other.skip_reasons {
            *self.skip_reasons.entry(reason.clone()).or_default() += n;
        }
    }

    fn skip(&mut self, err: &RowError) {
        self.rows_skipped += 1;
        *self.skip_reasons.entry(err.kind()).or_default() += 1;
    }
}

/// Part files of `table` under `root`, in lexicographic name order.
///
/// A missing table directory is an empty table; a missing root is an error.
pub fn part_files(root: &Path, table: Table) -> Result<Vec<PathBuf>, IngestError> {
    if !root.is_dir() {
        return Err(IngestError::Io {
            path: root.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "trace root is not a directory"),
        });
    }
    let dir = root.join(table.dir_name());
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let io_err = |source| IngestError::Io { path: dir.clone(), source };
    let mut files = Vec::new();
    for entry in std::fs::read_dir(&dir).map_err(io_err)? {
        let entry = entry.map_err(io_err)?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if name.starts_with("part-") && entry.file_type().map_err(io_err)?.is_file() {
            files.push(entry.path());
        }
    }
    files.sort();
    Ok(files)
}

fn open_part(path: &Path) -> Result<Box<dyn Read + Send>, IngestError> {
    let io_err = |source| IngestError::Io { path: path.to_path_buf(), source };
    let mut reader = BufReader::with_capacity(1 << 16, File::open(path).map_err(io_err)?);
    let gz = reader.fill_buf().map_err(io_err)?.starts_with(&[0x1f, 0x8b]);
    Ok(if gz {
        Box::new(MultiGzDecoder::new(reader))
    } else {
        Box::new(reader)
    })
}

/// Parsed rows of one table, read file by file.
///
/// Yields `Err` only for fatal I/O failures, after which the stream ends.
/// Rows that fail to parse are counted in [`TableStats`] and skipped.
pub struct TableStream<T> {
    files: std::vec::IntoIter<PathBuf>,
    current: Option<(PathBuf, csv::Reader<Box<dyn Read + Send>>)>,
    columns: TableColumns,
    record: StringRecord,
    stats: TableStats,
    failed: bool,
    _row: PhantomData<fn() -> T>,
}

impl<T: TraceRow> TableStream<T> {
    /// Opens `<root>/<table>/part-*` for the table type `T`.
    pub fn open(root: &Path, columns: &TableColumns) -> Result<Self, IngestError> {
        Ok(Self::from_files(part_files(root, T::TABLE)?, columns))
    }

    pub fn from_files(files: Vec<PathBuf>, columns: &TableColumns) -> Self {
        debug_assert_eq!(columns.table(), T::TABLE);
        TableStream {
            files: files.into_iter(),
            current: None,
            columns: columns.clone(),
            record: StringRecord::new(),
            stats: TableStats::default(),
            failed: false,
            _row: PhantomData,
        }
    }

    pub fn stats(&self) -> &TableStats {
        &self.stats
    }

    pub fn into_stats(self) -> TableStats {
        self.stats
    }

    fn next_reader(&mut self) -> Result<bool, IngestError> {
        match self.files.next() {
            None => Ok(false),
            Some(path) => {
                let inner = open_part(&path)?;
                let reader = csv::ReaderBuilder::new()
                    .has_headers(false)
                    .flexible(true)
                    .buffer_capacity(1 << 16)
                    .from_reader(inner);
                self.stats.files += 1;
                self.current = Some((path, reader));
                Ok(true)
            }
        }
    }
}

impl<T: TraceRow> Iterator for TableStream<T> {
    type Item = Result<T, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            if self.current.is_none() {
                match self.next_reader() {
                    Ok(true) => {}
                    Ok(false) => return None,
                    Err(e) => {
                        self.failed = true;
                        return Some(Err(e));
                    }
                }
            }
            let (path, reader) = self.current.as_mut().expect("reader opened above");
            match reader.read_record(&mut self.record) {
                Ok(false) => {
                    self.current = None;
                }
                Ok(true) => {
                    self.stats.rows_read += 1;
                    match T::parse(&self.record, &self.columns) {
                        Ok(row) => {
                            self.stats.rows_emitted += 1;
                            return Some(Ok(row));
                        }
                        Err(e) => self.stats.skip(&e),
                    }
                }
                Err(e) => match e.into_kind() {
                    csv::ErrorKind::Io(source) => {
                        self.failed = true;
                        return Some(Err(IngestError::Io { path: path.clone(), source }));
                    }
                    _ => {
                        self.stats.rows_read += 1;
                        self.stats.skip(&RowError::Malformed);
                    }
                },
            }
        }
    }
}
