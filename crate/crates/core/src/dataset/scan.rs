use std::path::{Path, PathBuf};

use rayon::prelude::*;
use walkdir::WalkDir;

use super::Label;
use crate::ela::load_image;
use crate::{Error, Result};

const IMAGE_EXTENSIONS: [&str; 6] = ["jpg", "jpeg", "png", "tif", "tiff", "bmp"];

/// Directory names of the two classes under the corpus root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorpusLayout {
    pub authentic_dir: String,
    pub tampered_dir: String,
}

impl Default for CorpusLayout {
    /// CASIA v2 naming: `Au/` and `Tp/`.
    fn default() -> Self {
        Self {
            authentic_dir: "Au".into(),
            tampered_dir: "Tp".into(),
        }
    }
}

/// Result of a corpus scan: usable records plus the files that failed to decode.
#[derive(Clone, Debug, Default)]
pub struct ScanReport {
    pub records: Vec<(PathBuf, Label)>,
    pub skipped: Vec<(PathBuf, String)>,
}

impl ScanReport {
    /// Record paths made relative to `root` where possible.
    pub fn relative_to(&self, root: &Path) -> Vec<(PathBuf, Label)> {
        self.records
            .iter()
            .map(|(p, l)| (p.strip_prefix(root).unwrap_or(p).to_path_buf(), *l))
            .collect()
    }

    /// `path,label` rows for the given records.
    pub fn records_csv(records: &[(PathBuf, Label)]) -> Result<String> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(["path", "label"])?;
        for (path, label) in records {
            wtr.write_record([path.to_string_lossy().as_ref(), &label.index().to_string()])?;
        }
        let bytes = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("CSV writer emits UTF-8"))
    }
}

/// Lists every decodable image under the two class directories of `root`.
///
/// Records come back sorted by path. Files with an image extension that fail
/// to decode are reported in [`ScanReport::skipped`] and logged.
pub fn scan_corpus(root: &Path, layout: &CorpusLayout) -> Result<ScanReport> {
    if !root.is_dir() {
        return Err(Error::MissingDirectory(root.to_path_buf()));
    }
    let mut report = ScanReport::default();
    for (dir_name, label) in [
        (&layout.authentic_dir, Label::Authentic),
        (&layout.tampered_dir, Label::Tampered),
    ] {
        let dir = root.join(dir_name);
        if !dir.is_dir() {
            return Err(Error::MissingDirectory(dir));
        }
        let mut candidates = Vec::new();
        for entry in WalkDir::new(&dir).follow_links(true) {
            let entry = entry.map_err(|e| Error::Io(e.into()))?;
            if entry.file_type().is_file() && has_image_extension(entry.path()) {
                candidates.push(entry.into_path());
            }
        }
        let checked: Vec<(PathBuf, std::result::Result<(), String>)> = candidates
            .into_par_iter()
            .map(|path| {
                let status = load_image(&path).map(|_| ()).map_err(|e| e.to_string());
                (path, status)
            })
            .collect();
        let before = report.records.len();
        for (path, status) in checked {
            match status {
                Ok(()) => report.records.push((path, label)),
                Err(reason) => {
                    log::warn!("skipping {}: {reason}", path.display());
                    report.skipped.push((path, reason));
                }
            }
        }
        if report.records.len() == before {
            return Err(Error::EmptyCorpus(dir));
        }
    }
    report.records.sort();
    report.skipped.sort();
    Ok(report)
}

fn has_image_extension(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        .unwrap_or(false)
}
