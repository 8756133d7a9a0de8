//! Input loading and atomic output writing shared by the subcommands.

use std::path::{Path, PathBuf};

use mers_core::embedding::{load_embedding, load_labels, FileFormat, LabeledPool};
use mers_core::error::{Error, Result};

/// `PATH[:NAME]`; the name defaults to the file stem. A `:` is only treated
/// as a separator when the suffix contains no path separator.
pub fn parse_embedding_arg(arg: &str, index: usize) -> (PathBuf, String) {
    if let Some((path, name)) = arg.rsplit_once(':') {
        if !name.is_empty() && !name.contains('/') && !path.is_empty() {
            return (PathBuf::from(path), name.to_string());
        }
    }
    let path = PathBuf::from(arg);
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| format!("view{index}"));
    (path, name)
}

/// Explicit format, or by extension: `.bin` is binary, anything else CSV.
pub fn resolve_format(path: &Path, explicit: Option<FileFormat>) -> FileFormat {
    explicit.unwrap_or_else(|| match path.extension().and_then(|e| e.to_str()) {
        Some("bin") => FileFormat::Bin,
        _ => FileFormat::Csv,
    })
}

/// Load all embeddings plus labels into a normalized pool.
pub fn load_pool(
    embedding_args: &[String],
    labels_path: &Path,
    format: Option<FileFormat>,
) -> Result<LabeledPool> {
    if embedding_args.is_empty() {
        return Err(Error::Structure(
            "at least one --embedding is required".into(),
        ));
    }
    let mut views = Vec::new();
    for (index, arg) in embedding_args.iter().enumerate() {
        let (path, name) = parse_embedding_arg(arg, index);
        let format = resolve_format(&path, format);
        views.push(load_embedding(&path, format, &name)?);
    }
    let labels = load_labels(labels_path)?;
    let pool = LabeledPool::new(views, labels)?;
    pool.l2_normalize()
}

/// Serialize in full, write to a sibling temp file, then rename: a failed
/// run never leaves a partial report behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp-write");
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Pretty JSON plus trailing newline.
pub fn to_json_bytes<T: serde::Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| Error::Structure(format!("report serialization failed: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}
