//! Mask preprocessing for segmentation datasets: redundancy removal by
//! coverage ratio and grouping of mask fragments into person instances using
//! externally supplied detector boxes.

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::image::{ensure_same_dims, Dims, SegMask};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskSource {
    Manual,
    Automatic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaskEntry {
    pub id: String,
    pub source: MaskSource,
    pub mask: SegMask,
}

/// Masks of one frame, all the same size.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct MaskSet {
    entries: Vec<MaskEntry>,
}

impl MaskSet {
    pub fn new(entries: Vec<MaskEntry>) -> Result<Self> {
        if let Some(first) = entries.first() {
            for e in &entries[1..] {
                ensure_same_dims(&first.mask, &e.mask)?;
            }
        }
        Ok(MaskSet { entries })
    }

    pub fn entries(&self) -> &[MaskEntry] {
        &self.entries
    }

    pub fn ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.id.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// `|m_i ∩ m_j| / |m_i|`. Asymmetric: how much of `m_i` lies inside `m_j`.
pub fn coverage_ratio(m_i: &SegMask, m_j: &SegMask) -> Result<f64> {
    ensure_same_dims(m_i, m_j)?;
    let area = m_i.count_ones();
    if area == 0 {
        return Err(Error::EmptyMask("m_i".into()));
    }
    let inter = m_i
        .as_slice()
        .iter()
        .zip(m_j.as_slice())
        .filter(|(&a, &b)| a == 1 && b == 1)
        .count();
    Ok(inter as f64 / area as f64)
}

/// Drops every mask covered above `threshold` by a surviving mask.
///
/// Masks are visited by descending area (ties by identifier). A mask survives
/// unless a previously kept mask covers it. If a mask `X` is covered by a
/// smaller-or-equal mask `Y`, then `Y` is covered by `X` at least as much, so
/// the larger one always wins and one pass reaches the fixed point. Empty
/// masks cannot be scored and are dropped.
pub fn remove_redundant(set: &MaskSet, threshold: f64) -> MaskSet {
    let mut order: Vec<&MaskEntry> = set.entries.iter().filter(|e| e.mask.count_ones() > 0).collect();
    order.sort_by(|a, b| {
        b.mask
            .count_ones()
            .cmp(&a.mask.count_ones())
            .then_with(|| a.id.cmp(&b.id))
    });
    let mut kept: Vec<&MaskEntry> = Vec::new();
    for candidate in order {
        let covered = kept.iter().any(|k| {
            coverage_ratio(&candidate.mask, &k.mask).is_ok_and(|c| c > threshold)
        });
        if !covered {
            kept.push(candidate);
        }
    }
    // keep the caller's ordering among survivors
    let entries = set
        .entries
        .iter()
        .filter(|e| kept.iter().any(|k| std::ptr::eq(*k, *e)))
        .cloned()
        .collect();
    MaskSet { entries }
}

fn id_from_any<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<String, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Id {
        Text(String),
        Number(i64),
    }
    Ok(match Id::deserialize(d)? {
        Id::Text(s) => s,
        Id::Number(n) => n.to_string(),
    })
}

/// A detector box in pixel coordinates; pixel `(r, c)` is inside when its
/// centre `(r + 0.5, c + 0.5)` falls in `[y, y + h) × [x, x + w)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceBox {
    #[serde(deserialize_with = "id_from_any")]
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl InstanceBox {
    pub fn contains(&self, row: usize, col: usize) -> bool {
        let (cy, cx) = (row as f64 + 0.5, col as f64 + 0.5);
        cy >= self.y && cy < self.y + self.h && cx >= self.x && cx < self.x + self.w
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn validate(&self, height: usize, width: usize) -> Result<()> {
        let ok = self.x >= 0.0
            && self.y >= 0.0
            && self.w > 0.0
            && self.h > 0.0
            && self.x + self.w <= width as f64
            && self.y + self.h <= height as f64;
        if !ok {
            return Err(Error::invalid(format!(
                "box `{}` ({}, {}, {}, {}) is outside the {height}x{width} image",
                self.id, self.x, self.y, self.w, self.h
            )));
        }
        Ok(())
    }
}

/// Detector output for one frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameBoxes {
    pub frame_id: String,
    pub boxes: Vec<InstanceBox>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub instance_id: String,
    pub mask: SegMask,
    pub member_ids: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Grouping {
    pub instances: Vec<Instance>,
    /// Masks not assigned to any person box.
    pub discarded: Vec<String>,
}

/// Assigns each mask to the box holding the largest share of its area (ties
/// go to the earlier box) when that share reaches `assign_threshold`, then
/// ORs the masks of each instance together.
pub fn group_to_instances(set: &MaskSet, boxes: &[InstanceBox], assign_threshold: f64) -> Result<Grouping> {
    let Some(first) = set.entries.first() else {
        return Ok(Grouping::default());
    };
    let (h, w) = first.mask.dims();
    for b in boxes {
        b.validate(h, w)?;
    }
    let mut members: BTreeMap<usize, Vec<&MaskEntry>> = BTreeMap::new();
    let mut discarded = Vec::new();
    for entry in &set.entries {
        let area = entry.mask.count_ones();
        let mut best: Option<(usize, f64)> = None;
        if area > 0 {
            for (bi, b) in boxes.iter().enumerate() {
                let mut inside = 0usize;
                for r in 0..h {
                    for c in 0..w {
                        if entry.mask.get(r, c) && b.contains(r, c) {
                            inside += 1;
                        }
                    }
                }
                let frac = inside as f64 / area as f64;
                if best.is_none_or(|(_, f)| frac > f) {
                    best = Some((bi, frac));
                }
            }
        }
        match best {
            Some((bi, frac)) if frac >= assign_threshold => members.entry(bi).or_default().push(entry),
            _ => discarded.push(entry.id.clone()),
        }
    }
    let instances = members
        .into_iter()
        .map(|(bi, list)| {
            let mut mask = SegMask::filled(h, w, false);
            for e in &list {
                mask = mask.zip_with(&e.mask, |a, b| a || b).expect("same dims");
            }
            Instance {
                instance_id: boxes[bi].id.clone(),
                mask,
                member_ids: list.iter().map(|e| e.id.clone()).collect(),
            }
        })
        .collect();
    Ok(Grouping {
        instances,
        discarded,
    })
}

/// Splits instances into kept and fragmentary: an instance is a fragment when
/// its mask covers less than `min_fill` of its box area.
pub fn filter_fragments(
    instances: Vec<Instance>,
    boxes: &[InstanceBox],
    min_fill: f64,
) -> (Vec<Instance>, Vec<Instance>) {
    instances.into_iter().partition(|inst| {
        boxes
            .iter()
            .find(|b| b.id == inst.instance_id)
            .is_none_or(|b| inst.mask.count_ones() as f64 >= min_fill * b.area())
    })
}
