//! User-uploaded district layers: upload validation, table parsing, LEAID
//! conversion, joining to boundaries and the persistent layer registry.

mod crosswalk;
mod layer;
mod registry;
mod table;

use std::fmt;
use std::path::Path;

use serde::Serialize;

pub use crosswalk::{resolve_code, to_cds, ConversionTable, CrosswalkError};
pub use layer::{build_layer, layer_features, CustomLayer, JoinStats, LayerScale};
pub use registry::{LayerRegistry, RegistryError};
pub use table::{normalize_cds, normalize_leaid, parse_custom_table, CodeKind, CustomRow, CustomTable};

/// Largest accepted upload: 10 MiB.
pub const MAX_UPLOAD_BYTES: u64 = 10 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum UploadErrorKind {
    TooLarge,
    BadExtension,
    MissingDataColumn,
    MissingCodeColumn,
    EmptyFile,
    DuplicateLayerName,
}

impl fmt::Display for UploadErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{kind}: {detail}")]
pub struct UploadError {
    pub kind: UploadErrorKind,
    pub detail: String,
}

impl UploadError {
    pub fn new(kind: UploadErrorKind, detail: impl Into<String>) -> Self {
        UploadError { kind, detail: detail.into() }
    }
}

/// Upload formats recognised by extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UploadFormat {
    Csv,
}

/// Checks size, extension and layer-name uniqueness before the body is
/// parsed. `name` is compared after trimming.
pub fn validate_upload<S: AsRef<str>>(
    filename: &str,
    size_bytes: u64,
    name: &str,
    existing_names: &[S],
) -> Result<UploadFormat, UploadError> {
    use UploadErrorKind::*;
    if size_bytes > MAX_UPLOAD_BYTES {
        return Err(UploadError::new(
            TooLarge,
            format!("file is {size_bytes} bytes; the maximum is {MAX_UPLOAD_BYTES} bytes (10MB)"),
        ));
    }
    let ext = Path::new(filename.trim())
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    let format = match ext.as_str() {
        "csv" => UploadFormat::Csv,
        "xlsx" | "xls" => {
            return Err(UploadError::new(
                BadExtension,
                format!(".{ext} is not supported in this build; save the sheet as .csv"),
            ))
        }
        _ => return Err(UploadError::new(BadExtension, format!("{filename:?}: expected a .csv file"))),
    };
    if size_bytes == 0 {
        return Err(UploadError::new(EmptyFile, "file is empty"));
    }
    let name = name.trim();
    if existing_names.iter().any(|n| n.as_ref() == name) {
        return Err(UploadError::new(DuplicateLayerName, format!("a layer named {name:?} already exists")));
    }
    Ok(format)
}
