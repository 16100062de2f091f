use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;

/// Writes `bytes` to `dir/name` through a temporary file in the same
/// directory, so readers never see a partial file.
pub fn atomic_write(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, dir.join(name))?;
    Ok(())
}

/// Serializes `rows` with a header line and writes them atomically.
/// Returns the number of data rows.
pub fn write_csv<T: Serialize>(dir: &Path, name: &str, rows: &[T]) -> Result<usize> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row)?;
    }
    let bytes = writer.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    atomic_write(dir, name, &bytes)?;
    Ok(rows.len())
}
