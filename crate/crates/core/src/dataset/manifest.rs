use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::{ImageRecord, Label, Split};
use crate::ela::QualityLevel;
use crate::io::write_text_atomic;
use crate::rng::{shuffle, SplitMix64};
use crate::{Error, Result};

/// Train/validation/test fractions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.8,
            val: 0.2,
            test: 0.0,
        }
    }
}

impl SplitRatios {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let r = Self { train, val, test };
        r.validate()?;
        Ok(r)
    }

    fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|v| !v.is_finite() || *v < 0.0) || self.train <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "split ratios {parts:?} must be non-negative with a positive train share"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "split ratios {parts:?} sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }

    fn as_array(&self) -> [f64; 3] {
        [self.train, self.val, self.test]
    }
}

impl FromStr for SplitRatios {
    type Err = Error;

    /// Parses `a,b,c`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidArgument(format!("ratios {s:?}: {e}")))?;
        match parts.as_slice() {
            [a, b, c] => Self::new(*a, *b, *c),
            _ => Err(Error::InvalidArgument(format!(
                "ratios {s:?} must have three comma-separated values"
            ))),
        }
    }
}

/// Preprocessing settings recorded in every manifest.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ManifestSettings {
    pub quality: QualityLevel,
    /// `(width, height)` of the network input.
    pub target_size: (u32, u32),
    pub enhance: bool,
}

impl Default for ManifestSettings {
    fn default() -> Self {
        Self {
            quality: QualityLevel::DEFAULT,
            target_size: (128, 128),
            enhance: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub records: Vec<ImageRecord>,
    pub seed: u64,
    pub ratios: SplitRatios,
    pub settings: ManifestSettings,
}

/// Per-split counts for `n` items by the largest-remainder rule.
///
/// Each split first gets `floor(n · ratio)`; leftover items go to the splits
/// with the largest fractional parts, earlier splits winning ties.
fn largest_remainder(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let quotas = ratios.map(|r| n as f64 * r);
    let mut counts = quotas.map(|q| q.floor() as usize);
    let assigned: usize = counts.iter().sum();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Assigns each record to a split, stratified by label.
///
/// Records of each class are sorted by path, shuffled with
/// [`SplitMix64`] seeded by `seed` (authentic first, then tampered, from one
/// stream), and cut into train/val/test runs sized by [`largest_remainder`].
pub fn split_manifest(
    records: &[(PathBuf, Label)],
    ratios: SplitRatios,
    seed: u64,
    settings: ManifestSettings,
) -> Result<DatasetManifest> {
    ratios.validate()?;
    let mut rng = SplitMix64::new(seed);
    let mut out = Vec::with_capacity(records.len());
    for label in Label::ALL {
        let mut class: Vec<&PathBuf> = records
            .iter()
            .filter(|(_, l)| *l == label)
            .map(|(p, _)| p)
            .collect();
        if class.len() < 3 {
            return Err(Error::TooFewExamples {
                label: label as u8,
                count: class.len(),
            });
        }
        class.sort();
        shuffle(&mut class, &mut rng);
        let counts = largest_remainder(class.len(), ratios.as_array());
        if counts[0] == 0 {
            return Err(Error::InvalidArgument(format!(
                "train split would hold no {label:?} records"
            )));
        }
        let mut iter = class.into_iter();
        for (split, count) in Split::ALL.into_iter().zip(counts) {
            for path in iter.by_ref().take(count) {
                out.push(ImageRecord {
                    path: path.clone(),
                    label,
                    split,
                });
            }
        }
    }
    out.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(DatasetManifest {
        records: out,
        seed,
        ratios,
        settings,
    })
}

impl DatasetManifest {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &ImageRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    /// Number of records per `(split, label)`.
    pub fn counts(&self) -> BTreeMap<(Split, Label), usize> {
        let mut m = BTreeMap::new();
        for r in &self.records {
            *m.entry((r.split, r.label)).or_insert(0) += 1;
        }
        m
    }

    /// CSV text with a commented settings preamble.
    pub fn to_csv(&self) -> Result<String> {
        let (w, h) = self.settings.target_size;
        let mut text = String::new();
        let _ = writeln!(text, "# seed={}", self.seed);
        let _ = writeln!(text, "# quality={}", self.settings.quality);
        let _ = writeln!(text, "# size={w}x{h}");
        let _ = writeln!(text, "# enhance={}", self.settings.enhance);
        let _ = writeln!(
            text,
            "# ratios={},{},{}",
            self.ratios.train, self.ratios.val, self.ratios.test
        );
        let _ = writeln!(text, "# resize=bilinear");
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(["path", "label", "split"])?;
        for r in &self.records {
            wtr.write_record([
                r.path.to_string_lossy().as_ref(),
                &(r.label as u8).to_string(),
                r.split.as_str(),
            ])?;
        }
        let body = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        text.push_str(&String::from_utf8(body).expect("CSV writer emits UTF-8"));
        Ok(text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text_atomic(path, &self.to_csv()?)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |message: String| Error::Format {
            kind: "manifest",
            message,
        };
        let mut settings = ManifestSettings::default();
        let mut seed = None;
        let mut ratios = SplitRatios::default();
        for line in text.lines().take_while(|l| l.starts_with('#')) {
            let Some((key, value)) = line.trim_start_matches('#').trim().split_once('=') else {
                continue;
            };
            let value = value.trim();
            match key.trim() {
                "seed" => seed = Some(value.parse().map_err(|e| bad(format!("seed: {e}")))?),
                "quality" => {
                    let q: i64 = value.parse().map_err(|e| bad(format!("quality: {e}")))?;
                    settings.quality = QualityLevel::new(q)?;
                }
                "size" => settings.target_size = parse_size(value)?,
                "enhance" => {
                    settings.enhance = value.parse().map_err(|e| bad(format!("enhance: {e}")))?
                }
                "ratios" => ratios = value.parse()?,
                _ => {}
            }
        }
        let seed = seed.ok_or_else(|| bad("preamble lacks `# seed=`".into()))?;

        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["path", "label", "split"] {
            return Err(bad(format!("unexpected header {headers:?}")));
        }
        let mut records = Vec::new();
        for row in rdr.records() {
            let row = row?;
            let label = row[1]
                .parse::<u8>()
                .ok()
                .and_then(Label::from_index)
                .ok_or_else(|| bad(format!("label {:?} is not 0 or 1", &row[1])))?;
            records.push(ImageRecord {
                path: PathBuf::from(&row[0]),
                label,
                split: row[2].parse()?,
            });
        }
        Ok(Self {
            records,
            seed,
            ratios,
            settings,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}

/// Parses `WxH`.
pub fn parse_size(s: &str) -> Result<(u32, u32)> {
    let err = || Error::InvalidArgument(format!("size {s:?} must look like 128x128"));
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(err)?;
    let w: u32 = w.trim().parse().map_err(|_| err())?;
    let h: u32 = h.trim().parse().map_err(|_| err())?;
    if w == 0 || h == 0 {
        return Err(err());
    }
    Ok((w, h))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(auth: usize, tamp: usize) -> Vec<(PathBuf, Label)> {
        let mut v = Vec::new();
        for i in 0..auth {
            v.push((PathBuf::from(format!("Au/{i:04}.jpg")), Label::Authentic));
        }
        for i in 0..tamp {
            v.push((PathBuf::from(format!("Tp/{i:04}.jpg")), Label::Tampered));
        }
        v
    }

    #[test]
    fn largest_remainder_counts() {
        assert_eq!(largest_remainder(10, [0.8, 0.1, 0.1]), [8, 1, 1]);
        assert_eq!(largest_remainder(100, [0.8, 0.2, 0.0]), [80, 20, 0]);
        assert_eq!(largest_remainder(7, [0.5, 0.25, 0.25]), [3, 2, 2]);
        assert_eq!(largest_remainder(3, [1.0 / 3.0; 3]), [1, 1, 1]);
    }

    #[test]
    fn stratified_eighty_twenty() {
        let m = split_manifest(
            &corpus(100, 100),
            SplitRatios::new(0.8, 0.2, 0.0).unwrap(),
            42,
            ManifestSettings::default(),
        )
        .unwrap();
        let c = m.counts();
        assert_eq!(c[&(Split::Train, Label::Authentic)], 80);
        assert_eq!(c[&(Split::Train, Label::Tampered)], 80);
        assert_eq!(c[&(Split::Val, Label::Authentic)], 20);
        assert_eq!(c[&(Split::Val, Label::Tampered)], 20);
        assert!(!c.contains_key(&(Split::Test, Label::Authentic)));

        let again = split_manifest(
            &corpus(100, 100),
            SplitRatios::new(0.8, 0.2, 0.0).unwrap(),
            42,
            ManifestSettings::default(),
        )
        .unwrap();
        assert_eq!(m.to_csv().unwrap(), again.to_csv().unwrap());
    }

    #[test]
    fn ten_and_ten_split() {
        let m = split_manifest(
            &corpus(10, 10),
            SplitRatios::new(0.8, 0.1, 0.1).unwrap(),
            1,
            ManifestSettings::default(),
        )
        .unwrap();
        for label in Label::ALL {
            let per: Vec<usize> = Split::ALL
                .iter()
                .map(|s| m.counts().get(&(*s, label)).copied().unwrap_or(0))
                .collect();
            assert_eq!(per, vec![8, 1, 1]);
        }
    }

    #[test]
    fn ratios_must_sum_to_one() {
        assert!(SplitRatios::new(0.5, 0.5, 0.5).is_err());
        assert!("0.5,0.5,0.5".parse::<SplitRatios>().is_err());
        assert!("0.8,0.2".parse::<SplitRatios>().is_err());
        assert_eq!(
            "0.8,0.2,0".parse::<SplitRatios>().unwrap(),
            SplitRatios::default()
        );
    }

    #[test]
    fn too_few_examples() {
        let err = split_manifest(
            &corpus(2, 10),
            SplitRatios::default(),
            0,
            ManifestSettings::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::TooFewExamples { label: 0, count: 2 }));
    }

    #[test]
    fn seed_changes_assignment() {
        let a = split_manifest(&corpus(50, 50), SplitRatios::default(), 1, ManifestSettings::default()).unwrap();
        let b = split_manifest(&corpus(50, 50), SplitRatios::default(), 2, ManifestSettings::default()).unwrap();
        assert_ne!(a.records, b.records);
    }

    #[test]
    fn csv_roundtrip() {
        let settings = ManifestSettings {
            quality: QualityLevel::new(90).unwrap(),
            target_size: (64, 32),
            enhance: false,
        };
        let mut records = corpus(5, 5);
        records.push((PathBuf::from("Tp/with,comma.jpg"), Label::Tampered));
        let m = split_manifest(&records, SplitRatios::new(0.6, 0.2, 0.2).unwrap(), 9, settings).unwrap();
        let text = m.to_csv().unwrap();
        assert!(text.starts_with("# seed=9\n# quality=90\n# size=64x32\n# enhance=false\n"));
        assert!(text.contains("\npath,label,split\n"));
        assert_eq!(DatasetManifest::from_csv(&text).unwrap(), m);
    }

    #[test]
    fn size_parsing() {
        assert_eq!(parse_size("128x96").unwrap(), (128, 96));
        assert!(parse_size("128").is_err());
        assert!(parse_size("0x5").is_err());
    }
}
