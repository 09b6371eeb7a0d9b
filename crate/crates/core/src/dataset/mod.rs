//! Corpus ingestion, stratified splitting, ELA preprocessing and synthetic
//! splices.

mod manifest;
mod preprocess;
mod scan;
pub mod synth;

pub use manifest::{parse_size, split_manifest, DatasetManifest, ManifestSettings, SplitRatios};
pub use preprocess::{ela_to_tensor, preprocess, preprocess_image, resize_bilinear, ExampleTensor};
pub use scan::{scan_corpus, CorpusLayout, ScanReport};

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::Error;

/// Class of an image. Tampered is the positive class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Authentic = 0,
    Tampered = 1,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Authentic, Label::Tampered];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: u8) -> Option<Self> {
        match i {
            0 => Some(Label::Authentic),
            1 => Some(Label::Tampered),
            _ => None,
        }
    }

    /// One-hot `(authentic, tampered)` pair.
    pub fn one_hot(self) -> [f64; 2] {
        match self {
            Label::Authentic => [1.0, 0.0],
            Label::Tampered => [0.0, 1.0],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidArgument(format!("unknown split {other:?}"))),
        }
    }
}

/// One labeled image with its split assignment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageRecord {
    pub path: PathBuf,
    pub label: Label,
    pub split: Split,
}
