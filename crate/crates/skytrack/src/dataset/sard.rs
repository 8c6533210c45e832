//! Attribute-annotated detection images.
//!
//! ```json
//! {"format_version": 1, "images": [
//!   {"image": "a.png", "width": 640, "height": 480,
//!    "persons": [{"box": [x, y, w, h], "pose": "laying_down", "shirt_color": "blue", "injured": true}]}
//! ]}
//! ```
//!
//! A bare array of image objects is accepted as the root too. `width` and
//! `height` are optional; when present, boxes must lie inside them.

use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde_json::{json, Map, Value};
use skytrack_core::attrs::is_color_token;
use skytrack_core::eval::SampleSource;
use skytrack_core::{BBox, Frame, PersonAttrs, Pose};

use super::{DatasetError, FORMAT_VERSION};
use crate::pngio;

#[derive(Debug, Clone, PartialEq)]
pub struct SardImage {
    /// Relative to the annotation file's directory.
    pub image: String,
    pub width: Option<u32>,
    pub height: Option<u32>,
    pub persons: Vec<PersonAttrs>,
}

/// Strict mode rejects unknown fields and injured labels on poses that cannot
/// carry them; lenient mode collects those as warnings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strictness {
    #[default]
    Strict,
    Lenient,
}

struct Parser<'a> {
    file: &'a Path,
    strictness: Strictness,
    warnings: Vec<String>,
}

impl Parser<'_> {
    fn violation(&self, field: &str, message: impl Into<String>) -> DatasetError {
        DatasetError::SchemaViolation { file: self.file.to_path_buf(), field: field.into(), message: message.into() }
    }

    fn soft(&mut self, field: &str, message: String) -> Result<(), DatasetError> {
        match self.strictness {
            Strictness::Strict => Err(self.violation(field, message)),
            Strictness::Lenient => {
                self.warnings.push(format!("{field}: {message}"));
                Ok(())
            }
        }
    }

    fn check_keys(&mut self, obj: &Map<String, Value>, at: &str, allowed: &[&str]) -> Result<(), DatasetError> {
        for key in obj.keys() {
            if !allowed.contains(&key.as_str()) {
                self.soft(&format!("{at}.{key}"), "unknown field".into())?;
            }
        }
        Ok(())
    }

    fn image(&mut self, v: &Value, at: &str) -> Result<SardImage, DatasetError> {
        let obj = v.as_object().ok_or_else(|| self.violation(at, "expected an object"))?;
        self.check_keys(obj, at, &["image", "width", "height", "persons"])?;
        let image = obj
            .get("image")
            .and_then(Value::as_str)
            .ok_or_else(|| self.violation(&format!("{at}.image"), "expected a string"))?
            .to_owned();
        let dim = |key: &str| -> Result<Option<u32>, DatasetError> {
            match obj.get(key) {
                None | Some(Value::Null) => Ok(None),
                Some(v) => v
                    .as_u64()
                    .filter(|n| (1..=u32::MAX as u64).contains(n))
                    .map(|n| Some(n as u32))
                    .ok_or_else(|| self.violation(&format!("{at}.{key}"), "expected a positive integer")),
            }
        };
        let (width, height) = (dim("width")?, dim("height")?);
        let persons_at = format!("{at}.persons");
        let persons = obj
            .get("persons")
            .and_then(Value::as_array)
            .ok_or_else(|| self.violation(&persons_at, "expected an array"))?
            .iter()
            .enumerate()
            .map(|(k, p)| self.person(p, &format!("{persons_at}[{k}]"), width, height))
            .collect::<Result<_, _>>()?;
        Ok(SardImage { image, width, height, persons })
    }

    fn person(
        &mut self,
        v: &Value,
        at: &str,
        width: Option<u32>,
        height: Option<u32>,
    ) -> Result<PersonAttrs, DatasetError> {
        let obj = v.as_object().ok_or_else(|| self.violation(at, "expected an object"))?;
        self.check_keys(obj, at, &["box", "pose", "shirt_color", "injured"])?;

        let box_at = format!("{at}.box");
        let nums: Vec<f64> = obj
            .get("box")
            .and_then(Value::as_array)
            .map(|a| a.iter().filter_map(Value::as_f64).collect())
            .unwrap_or_default();
        let [x, y, w, h] = nums[..] else {
            return Err(self.violation(&box_at, "expected [x, y, w, h]"));
        };
        let bbox = BBox::new(x, y, w, h).map_err(|e| self.violation(&box_at, e.to_string()))?;
        let outside = x < 0.0
            || y < 0.0
            || width.is_some_and(|fw| bbox.right() > fw as f64)
            || height.is_some_and(|fh| bbox.bottom() > fh as f64);
        if outside {
            return Err(self.violation(&box_at, "box leaves the image"));
        }

        let pose_at = format!("{at}.pose");
        let pose = match obj.get("pose") {
            Some(Value::Null) => Pose::Null,
            Some(Value::String(s)) => s.parse().map_err(|_| self.violation(&pose_at, format!("unknown pose {s:?}")))?,
            _ => return Err(self.violation(&pose_at, "expected a pose name")),
        };

        let color_at = format!("{at}.shirt_color");
        let shirt_color = obj
            .get("shirt_color")
            .and_then(Value::as_str)
            .filter(|c| is_color_token(c))
            .ok_or_else(|| self.violation(&color_at, "expected a lowercase color token"))?
            .to_owned();

        let injured = match obj.get("injured") {
            None => false,
            Some(v) => v.as_bool().ok_or_else(|| self.violation(&format!("{at}.injured"), "expected a boolean"))?,
        };
        if injured && !pose.is_injury_candidate() {
            self.soft(&format!("{at}.injured"), format!("injured label on pose {pose}"))?;
        }
        Ok(PersonAttrs { bbox, pose, shirt_color, injured })
    }
}

/// Parses annotation JSON. Returns the images and any lenient-mode warnings.
pub fn parse_sard_annotations(
    text: &str,
    file: &Path,
    strictness: Strictness,
) -> Result<(Vec<SardImage>, Vec<String>), DatasetError> {
    let mut p = Parser { file, strictness, warnings: Vec::new() };
    let root: Value = serde_json::from_str(text).map_err(|e| p.violation("$", e.to_string()))?;
    let (items, prefix) = match &root {
        Value::Array(a) => (a, "$".to_owned()),
        Value::Object(o) => {
            p.check_keys(o, "$", &["format_version", "images"])?;
            match o.get("format_version") {
                None => {}
                Some(v) if v.as_u64() == Some(FORMAT_VERSION as u64) => {}
                Some(v) => return Err(p.violation("$.format_version", format!("unsupported version {v}"))),
            }
            let images = o.get("images").and_then(Value::as_array);
            (images.ok_or_else(|| p.violation("$.images", "expected an array"))?, "$.images".to_owned())
        }
        _ => return Err(p.violation("$", "expected an array or an object")),
    };
    let images =
        items.iter().enumerate().map(|(i, v)| p.image(v, &format!("{prefix}[{i}]"))).collect::<Result<_, _>>()?;
    Ok((images, p.warnings))
}

pub fn load_sard_annotations(
    path: &Path,
    strictness: Strictness,
) -> Result<(Vec<SardImage>, Vec<String>), DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    parse_sard_annotations(&text, path, strictness)
}

pub fn sard_document(images: &[SardImage]) -> Value {
    let images: Vec<Value> = images
        .iter()
        .map(|img| {
            let persons: Vec<Value> = img
                .persons
                .iter()
                .map(|p| {
                    json!({
                        "box": [p.bbox.x, p.bbox.y, p.bbox.w, p.bbox.h],
                        "pose": p.pose.as_str(),
                        "shirt_color": p.shirt_color,
                        "injured": p.injured,
                    })
                })
                .collect();
            let mut o = json!({ "image": img.image, "persons": persons });
            if let (Some(w), Some(h)) = (img.width, img.height) {
                o["width"] = json!(w);
                o["height"] = json!(h);
            }
            o
        })
        .collect();
    json!({ "format_version": FORMAT_VERSION, "images": images })
}

pub fn write_sard_annotations(path: &Path, images: &[SardImage]) -> Result<(), DatasetError> {
    let bytes = serde_json::to_vec_pretty(&sard_document(images)).expect("annotations serialize");
    super::write(path, &bytes)
}

/// Annotated images whose pixels load on demand, relative to `root`.
#[derive(Debug)]
pub struct SardDataset {
    pub root: PathBuf,
    pub images: Vec<SardImage>,
    cache: RwLock<Vec<Option<Arc<Frame>>>>,
}

impl SardDataset {
    pub fn new(root: PathBuf, images: Vec<SardImage>) -> Self {
        let cache = RwLock::new(vec![None; images.len()]);
        Self { root, images, cache }
    }

    /// Loads `file` and resolves image paths against its directory.
    pub fn open(file: &Path, strictness: Strictness) -> Result<(Self, Vec<String>), DatasetError> {
        let (images, warnings) = load_sard_annotations(file, strictness)?;
        let root = file.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((Self::new(root, images), warnings))
    }

    /// Per-image person lists, in file order.
    pub fn annotations(&self) -> Vec<Vec<PersonAttrs>> {
        self.images.iter().map(|i| i.persons.clone()).collect()
    }
}

impl SampleSource for SardDataset {
    fn len(&self) -> usize {
        self.images.len()
    }

    fn persons(&self, index: usize) -> &[PersonAttrs] {
        &self.images[index].persons
    }

    fn frame(&self, index: usize) -> Result<Frame, String> {
        if let Some(Some(f)) = self.cache.read().expect("image cache poisoned").get(index) {
            return Ok((**f).clone());
        }
        let frame = pngio::load_frame(&self.root.join(&self.images[index].image), index as u64, 0.0)
            .map_err(|e| e.to_string())?;
        self.cache.write().expect("image cache poisoned")[index] = Some(Arc::new(frame.clone()));
        Ok(frame)
    }
}
