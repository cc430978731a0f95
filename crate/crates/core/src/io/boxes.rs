//! JSON-lines detector boxes: one `{frame_id, boxes: [{id, x, y, w, h}]}`
//! record per line.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::curation::{FrameBoxes, InstanceBox};
use crate::error::{Error, Result};

pub fn parse_boxes(text: &str) -> Result<BTreeMap<String, Vec<InstanceBox>>> {
    let mut out: BTreeMap<String, Vec<InstanceBox>> = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut de = serde_json::Deserializer::from_str(line);
        let rec: FrameBoxes = serde_path_to_error::deserialize(&mut de).map_err(|e| Error::SchemaViolation {
            pointer: format!("line {}: {}", n + 1, e.path()),
            message: e.inner().to_string(),
        })?;
        out.entry(rec.frame_id).or_default().extend(rec.boxes);
    }
    Ok(out)
}

pub fn load_boxes(path: &Path) -> Result<BTreeMap<String, Vec<InstanceBox>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_boxes(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lines_group_by_frame() {
        let text = r#"{"frame_id": "f0", "boxes": [{"id": 1, "x": 0, "y": 0, "w": 4, "h": 4}]}

{"frame_id": "f1", "boxes": []}
{"frame_id": "f0", "boxes": [{"id": "p2", "x": 1.5, "y": 0, "w": 2, "h": 2}]}
"#;
        let b = parse_boxes(text).unwrap();
        assert_eq!(b["f0"].len(), 2);
        assert_eq!(b["f0"][0].id, "1");
        assert!(b["f1"].is_empty());
        assert!(parse_boxes("{\"frame_id\": 3}").is_err());
    }
}
