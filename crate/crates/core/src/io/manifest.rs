//! Sequence manifest: a JSON description of the frames of one sequence and
//! the files that belong to each.
//!
//! Unknown keys are tolerated and reported as warnings so that newer
//! manifests still load.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;

use crate::curation::MaskSource;
use crate::error::{Error, Result};

pub const MANIFEST_VERSION: u64 = 1;

/// Grid written either as `"7x7"` or as `[7, 7]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
}

impl std::str::FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (r, c) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected ROWSxCOLS, got `{s}`"))?;
        let parse = |t: &str| {
            t.trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| format!("bad grid size `{t}` in `{s}`"))
        };
        Ok(GridSpec {
            rows: parse(r)?,
            cols: parse(c)?,
        })
    }
}

impl std::fmt::Display for GridSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

impl<'de> Deserialize<'de> for GridSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Pair([usize; 2]),
        }
        match Raw::deserialize(d)? {
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::Pair([rows, cols]) if rows > 0 && cols > 0 => Ok(GridSpec { rows, cols }),
            Raw::Pair(p) => Err(serde::de::Error::custom(format!("grid sides must be positive, got {p:?}"))),
        }
    }
}

/// Per-sequence parameter overrides. Command-line flags take precedence.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ManifestDefaults {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blur_kernel: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blur_sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band_width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_eval: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(flatten, skip_serializing)]
    extra: BTreeMap<String, Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskRef {
    pub id: String,
    #[serde(default = "automatic")]
    pub source: MaskSource,
    pub path: PathBuf,
    #[serde(flatten, skip_serializing)]
    extra: BTreeMap<String, Value>,
}

fn automatic() -> MaskSource {
    MaskSource::Automatic
}

/// Files of one frame. Only `rgb_path` is required; each subcommand checks
/// for the inputs it needs and skips frames that lack them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_id: String,
    pub rgb_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_v_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_i_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seg_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prob_v_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prob_i_path: Option<PathBuf>,
    /// Standalone prediction for `evaluate`, `pseudo-gt`, `loss` and `analyze`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pred_path: Option<PathBuf>,
    /// Binary evaluation map of the prediction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_path: Option<PathBuf>,
    /// Error probability map of the prediction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prob_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub masks: Vec<MaskRef>,
    #[serde(flatten, skip_serializing)]
    extra: BTreeMap<String, Value>,
}

impl FrameRecord {
    pub fn new(frame_id: impl Into<String>, rgb_path: impl Into<PathBuf>) -> Self {
        FrameRecord {
            frame_id: frame_id.into(),
            rgb_path: rgb_path.into(),
            alpha_v_path: None,
            alpha_i_path: None,
            gt_path: None,
            seg_path: None,
            prob_v_path: None,
            prob_i_path: None,
            pred_path: None,
            eval_path: None,
            prob_path: None,
            masks: Vec::new(),
            extra: BTreeMap::new(),
        }
    }

    /// The prediction to score: `pred_path`, else the video-branch alpha.
    pub fn prediction(&self) -> Option<&Path> {
        self.pred_path.as_deref().or(self.alpha_v_path.as_deref())
    }

    fn paths_mut(&mut self) -> impl Iterator<Item = &mut PathBuf> {
        let optional = [
            &mut self.alpha_v_path,
            &mut self.alpha_i_path,
            &mut self.gt_path,
            &mut self.seg_path,
            &mut self.prob_v_path,
            &mut self.prob_i_path,
            &mut self.pred_path,
            &mut self.eval_path,
            &mut self.prob_path,
        ];
        std::iter::once(&mut self.rgb_path)
            .chain(optional.into_iter().flatten())
            .chain(self.masks.iter_mut().map(|m| &mut m.path))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceManifest {
    pub version: u64,
    #[serde(default)]
    pub defaults: ManifestDefaults,
    pub frames: Vec<FrameRecord>,
    #[serde(flatten, skip_serializing)]
    extra: BTreeMap<String, Value>,
}

/// A validated manifest plus the warnings raised while reading it.
#[derive(Clone, Debug)]
pub struct LoadedManifest {
    pub manifest: SequenceManifest,
    /// Directory relative paths were resolved against.
    pub base_dir: PathBuf,
    pub warnings: Vec<String>,
}

impl SequenceManifest {
    pub fn new(frames: Vec<FrameRecord>) -> Self {
        SequenceManifest {
            version: MANIFEST_VERSION,
            defaults: ManifestDefaults::default(),
            frames,
            extra: BTreeMap::new(),
        }
    }
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    out
}

fn unknown_keys(prefix: &str, extra: &BTreeMap<String, Value>, warnings: &mut Vec<String>) {
    for key in extra.keys() {
        warnings.push(format!("unknown field `{prefix}/{key}` ignored"));
    }
}

/// Frame ids double as output file stems.
fn is_safe_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id.bytes().all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'-' | b'.'))
}

/// Parses and validates manifest JSON. Relative paths are resolved against
/// `base_dir`.
pub fn parse_manifest(bytes: &[u8], base_dir: &Path) -> Result<LoadedManifest> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    let mut manifest: SequenceManifest = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        Error::SchemaViolation {
            pointer: pointer_of(e.path()),
            message: e.inner().to_string(),
        }
    })?;
    de.end().map_err(|e| Error::SchemaViolation {
        pointer: String::new(),
        message: e.to_string(),
    })?;
    if manifest.version != MANIFEST_VERSION {
        return Err(Error::SchemaViolation {
            pointer: "/version".into(),
            message: format!("unsupported version {}, expected {MANIFEST_VERSION}", manifest.version),
        });
    }

    let mut warnings = Vec::new();
    unknown_keys("", &manifest.extra, &mut warnings);
    unknown_keys("/defaults", &manifest.defaults.extra, &mut warnings);
    let mut seen = HashSet::new();
    for (i, frame) in manifest.frames.iter().enumerate() {
        if !is_safe_id(&frame.frame_id) {
            return Err(Error::SchemaViolation {
                pointer: format!("/frames/{i}/frame_id"),
                message: format!(
                    "`{}` is not a valid frame id (letters, digits, `_`, `-`, `.`; no leading dot)",
                    frame.frame_id
                ),
            });
        }
        if !seen.insert(frame.frame_id.as_str()) {
            return Err(Error::DuplicateFrameId(frame.frame_id.clone()));
        }
        unknown_keys(&format!("/frames/{i}"), &frame.extra, &mut warnings);
        let mut mask_ids = HashSet::new();
        for (j, m) in frame.masks.iter().enumerate() {
            unknown_keys(&format!("/frames/{i}/masks/{j}"), &m.extra, &mut warnings);
            if !mask_ids.insert(m.id.as_str()) {
                return Err(Error::SchemaViolation {
                    pointer: format!("/frames/{i}/masks/{j}/id"),
                    message: format!("duplicate mask id `{}`", m.id),
                });
            }
        }
    }
    if manifest.frames.windows(2).any(|w| w[0].frame_id > w[1].frame_id) {
        warnings.push("frames were not sorted by frame_id; processing in sorted order".into());
        manifest.frames.sort_by(|a, b| a.frame_id.cmp(&b.frame_id));
    }
    for frame in &mut manifest.frames {
        for p in frame.paths_mut() {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        }
    }
    Ok(LoadedManifest {
        manifest,
        base_dir: base_dir.to_path_buf(),
        warnings,
    })
}

pub fn load_manifest(path: &Path) -> Result<LoadedManifest> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_manifest(&bytes, &base)
}
