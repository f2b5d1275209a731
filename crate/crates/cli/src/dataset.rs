use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use otalc::io::{parse_labels, parse_mapping};
use otalc::stream::{ClassMap, LabelStream};

pub fn read_mapping(path: &Path) -> Result<Arc<ClassMap>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading mapping {}", path.display()))?;
    let map = parse_mapping(&text).with_context(|| format!("in mapping {}", path.display()))?;
    Ok(Arc::new(map))
}

pub fn read_labels(path: &Path, class_map: &Arc<ClassMap>) -> Result<LabelStream> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_labels(&text, class_map.clone()).with_context(|| format!("in {}", path.display()))
}

/// Regular files in `dir`, sorted by name.
pub fn sequence_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        if path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub fn sequence_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// The ground-truth file named like `pred` inside `gt_dir`.
pub fn matching_gt(pred: &Path, gt_dir: &Path) -> Result<PathBuf> {
    let gt = gt_dir.join(pred.file_name().context("prediction path has no file name")?);
    if !gt.is_file() {
        bail!("missing ground-truth file {} for prediction {}", gt.display(), pred.display());
    }
    Ok(gt)
}

pub fn read_dir_streams(dir: &Path, class_map: &Arc<ClassMap>) -> Result<Vec<LabelStream>> {
    sequence_files(dir)?.iter().map(|p| read_labels(p, class_map)).collect()
}
