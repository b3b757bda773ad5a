use std::path::{Path, PathBuf};

use super::{CourseDocument, DocumentKind, KbError};

const TEXT_EXTENSIONS: &[&str] = &["txt", "md", "py"];

/// Kind of a material file from its location: `.py` files are code
/// examples, files under a `slides` or `assignments` directory are slides or
/// assignments, anything else is explanatory text.
pub fn infer_kind(relative: &Path) -> DocumentKind {
    if relative.extension().is_some_and(|e| e == "py") {
        return DocumentKind::CodeExample;
    }
    let in_dir = |name: &str| {
        relative
            .parent()
            .is_some_and(|p| p.components().any(|c| c.as_os_str() == name))
    };
    if in_dir("slides") {
        DocumentKind::Slides
    } else if in_dir("assignments") {
        DocumentKind::Assignment
    } else {
        DocumentKind::ExplanatoryText
    }
}

/// Loads every `.txt`, `.md` and `.py` file below `dir`, in path order.
///
/// The doc id is the path relative to `dir` without its extension; the title
/// is the first non-blank line with leading `#` marks removed.
pub fn load_materials(dir: &Path) -> Result<Vec<CourseDocument>, KbError> {
    let mut files = Vec::new();
    collect_files(dir, &mut files)?;
    files.sort();
    let mut docs = Vec::with_capacity(files.len());
    for path in files {
        let relative = path.strip_prefix(dir).unwrap_or(&path).to_path_buf();
        let body = std::fs::read_to_string(&path)?;
        let doc_id = relative
            .with_extension("")
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect::<Vec<_>>()
            .join("/");
        if body.trim().is_empty() {
            return Err(KbError::EmptyDocument(doc_id));
        }
        let title = body
            .lines()
            .map(|l| l.trim_start_matches('#').trim())
            .find(|l| !l.is_empty())
            .unwrap_or(&doc_id)
            .to_string();
        docs.push(CourseDocument {
            doc_id,
            title,
            kind: infer_kind(&relative),
            body,
            source_path: relative.to_string_lossy().into_owned(),
        });
    }
    Ok(docs)
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), KbError> {
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else if path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| TEXT_EXTENSIONS.contains(&e))
        {
            out.push(path);
        }
    }
    Ok(())
}
