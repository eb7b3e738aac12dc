//! Landmark selection from detector output, and panorama-column to heading
//! geometry.
//!
//! Panoramas are equirectangular: column 0 sits at `center_heading - 180°`
//! and headings grow clockwise with the column index.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{ensure_finite, Error, Result};
use crate::navgraph::normalize_heading;
use crate::provider::{DetectQuery, Detector};

/// Axis-aligned box in panorama pixels. Serialized as `[x0, y0, x1, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub const fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self { x_min, y_min, x_max, y_max }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }

    pub fn validate(&self, width: f64, height: f64) -> Result<()> {
        let ok = self.to_array().iter().all(|v| v.is_finite())
            && 0.0 <= self.x_min
            && self.x_min < self.x_max
            && self.x_max <= width
            && 0.0 <= self.y_min
            && self.y_min < self.y_max
            && self.y_max <= height;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("bbox {:?} outside a {width}x{height} panorama", self.to_array())))
        }
    }
}

impl Serialize for BBox {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for BBox {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [a, b, c, e] = <[f64; 4]>::deserialize(d)?;
        Ok(BBox::new(a, b, c, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub label: String,
    pub bbox: BBox,
    pub confidence: f64,
}

/// Headings aligned with the left and right edges of a landmark's box.
/// `min < max` always holds; `max` may exceed 180 when the box crosses the
/// panorama seam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadingBounds {
    pub min: f64,
    pub max: f64,
}

impl HeadingBounds {
    pub fn center(&self) -> f64 {
        normalize_heading((self.min + self.max) / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Landmark {
    pub viewpoint_id: String,
    pub detection: Detection,
    pub heading_bounds: HeadingBounds,
}

/// Panorama dimensions and the world heading of its center column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PanoramaGeometry {
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub center_heading: f64,
}

impl Default for PanoramaGeometry {
    fn default() -> Self {
        Self { width: 1024, height: 1024, center_heading: 0.0 }
    }
}

/// Half of the panorama facing the intended direction of movement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionSector {
    pub center: f64,
    pub half_width: f64,
}

impl DetectionSector {
    pub const HALF_WIDTH: f64 = 90.0;

    /// Membership is `(center - 90°, center + 90°]`, modulo 360.
    pub fn contains(&self, heading: f64) -> bool {
        let offset = normalize_heading(heading - self.center);
        offset > -self.half_width && offset <= self.half_width
    }
}

pub fn detection_sector(next_step_heading: f64) -> DetectionSector {
    DetectionSector { center: normalize_heading(next_step_heading), half_width: DetectionSector::HALF_WIDTH }
}

/// Maps a box's horizontal extent to headings: column `c` faces
/// `center_heading + 360·c/W - 180`. The left edge is reported in
/// `[-180, 180)` and the right edge is `left + 360·width/W`.
pub fn bbox_heading_bounds(bbox: &BBox, pano_width: f64, center_heading: f64) -> Result<HeadingBounds> {
    ensure_finite("center heading", center_heading)?;
    if pano_width <= 0.0 || !pano_width.is_finite() {
        return Err(Error::InvalidInput(format!("panorama width {pano_width}")));
    }
    if !(bbox.x_min.is_finite() && bbox.x_max.is_finite()) || bbox.x_min >= bbox.x_max {
        return Err(Error::InvalidInput(format!("bbox {:?} has no width", bbox.to_array())));
    }
    let span = bbox.width() / pano_width * 360.0;
    if span > 360.0 {
        return Err(Error::InvalidInput(format!("bbox width {} exceeds panorama width {pano_width}", bbox.width())));
    }
    let raw = center_heading + bbox.x_min / pano_width * 360.0 - 180.0;
    let mut min = normalize_heading(raw);
    if min == 180.0 {
        min = -180.0;
    }
    Ok(HeadingBounds { min, max: min + span })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Towards,
    TowardsLeftOf,
    TowardsRightOf,
}

impl Relation {
    pub const ALL: [Relation; 3] = [Relation::Towards, Relation::TowardsLeftOf, Relation::TowardsRightOf];

    pub fn phrase(self) -> &'static str {
        match self {
            Relation::Towards => "towards the",
            Relation::TowardsLeftOf => "towards the left of the",
            Relation::TowardsRightOf => "towards the right of the",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Relation::Towards => "towards",
            Relation::TowardsLeftOf => "towards_left_of",
            Relation::TowardsRightOf => "towards_right_of",
        }
    }

    pub fn from_key(key: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.key() == key)
    }
}

/// Where the next step heads relative to the landmark box. The heading is
/// first moved by whole turns into the half-open window of width 360 centered
/// on the box, so that seam-crossing bounds compare correctly.
pub fn classify_landmark_relation(heading: f64, bounds: &HeadingBounds) -> Relation {
    let mid = (bounds.min + bounds.max) / 2.0;
    let psi = mid + normalize_heading(heading - mid);
    if psi < bounds.min {
        Relation::TowardsLeftOf
    } else if psi > bounds.max {
        Relation::TowardsRightOf
    } else {
        Relation::Towards
    }
}

/// Landmark categories per scan, lowercase.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CategoryLibrary {
    by_scan: BTreeMap<String, Vec<String>>,
}

impl CategoryLibrary {
    pub fn new(by_scan: BTreeMap<String, Vec<String>>) -> Result<Self> {
        let mut normalized = BTreeMap::new();
        for (scan, cats) in by_scan {
            let mut cats: Vec<String> = cats.iter().map(|c| c.trim().to_lowercase()).collect();
            cats.retain(|c| !c.is_empty());
            cats.sort();
            cats.dedup();
            if cats.is_empty() {
                return Err(Error::Config(format!("category library for \"{scan}\" is empty")));
            }
            normalized.insert(scan, cats);
        }
        Ok(Self { by_scan: normalized })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let map = serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        Self::new(map)
    }

    pub fn categories(&self, scan: &str) -> Option<&[String]> {
        self.by_scan.get(scan).map(Vec::as_slice)
    }
}

/// Total preference order over detections: higher confidence, then
/// lexicographically smaller label, then leftmost box (remaining box
/// coordinates settle exact duplicates).
pub fn detection_preference(a: &Detection, b: &Detection) -> Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then_with(|| a.label.cmp(&b.label))
        .then_with(|| a.bbox.x_min.total_cmp(&b.bbox.x_min))
        .then_with(|| a.bbox.x_max.total_cmp(&b.bbox.x_max))
        .then_with(|| a.bbox.y_min.total_cmp(&b.bbox.y_min))
        .then_with(|| a.bbox.y_max.total_cmp(&b.bbox.y_max))
}

/// Best in-sector detection among `detections`, with its heading bounds.
pub fn best_in_sector(
    detections: &[Detection],
    sector: &DetectionSector,
    pano: &PanoramaGeometry,
) -> Result<Option<(Detection, HeadingBounds)>> {
    let mut best: Option<(Detection, HeadingBounds)> = None;
    for det in detections {
        let bounds = bbox_heading_bounds(&det.bbox, pano.width as f64, pano.center_heading)?;
        if !sector.contains(bounds.center()) {
            continue;
        }
        let better = match &best {
            None => true,
            Some((cur, _)) => detection_preference(det, cur) == Ordering::Less,
        };
        if better {
            best = Some((det.clone(), bounds));
        }
    }
    Ok(best)
}

/// Queries the detector at one viewpoint and keeps the highest-confidence
/// detection whose box center falls inside `sector`.
pub fn select_landmark(
    scan: &str,
    viewpoint_id: &str,
    sector: &DetectionSector,
    detector: &dyn Detector,
    library: &CategoryLibrary,
    pano: &PanoramaGeometry,
) -> Result<Option<Landmark>> {
    let categories =
        library.categories(scan).ok_or_else(|| Error::Config(format!("no landmark categories for scan \"{scan}\"")))?;
    let detections = detector.detect(&DetectQuery {
        scan,
        viewpoint: viewpoint_id,
        categories,
        pano_width: pano.width,
        pano_height: pano.height,
    })?;
    let mut valid = Vec::with_capacity(detections.len());
    for det in detections {
        let problem = if !(0.0..=1.0).contains(&det.confidence) {
            Some(format!("confidence {} outside [0, 1]", det.confidence))
        } else {
            det.bbox.validate(pano.width as f64, pano.height as f64).err().map(|e| e.to_string())
        };
        if let Some(problem) = problem {
            return Err(Error::Provider {
                provider: detector.name().to_string(),
                id: 0,
                message: format!("detection at {scan}/{viewpoint_id}: {problem}"),
            });
        }
        if categories.iter().any(|c| c.eq_ignore_ascii_case(&det.label)) {
            valid.push(det);
        } else {
            log::warn!("{scan}/{viewpoint_id}: ignoring detection with unknown label \"{}\"", det.label);
        }
    }
    Ok(best_in_sector(&valid, sector, pano)?.map(|(detection, heading_bounds)| Landmark {
        viewpoint_id: viewpoint_id.to_string(),
        detection,
        heading_bounds,
    }))
}
