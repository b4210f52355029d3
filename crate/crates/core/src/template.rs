//! Minutiae data model and the line-oriented template file format.
//!
//! ```text
//! # id=f0007 w=500 h=500
//! 123.5 88.25 1.5708 0.9
//! 140 92 0.5
//! ```
//!
//! Lines starting with `#` are comments; the optional header comment
//! carries the id and image extent. Data lines are `x y theta [quality]`,
//! whitespace separated, theta in radians.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::normalize_angle;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minutia {
    pub x: f64,
    pub y: f64,
    /// Direction in `[0, 2π)`.
    pub theta: f64,
    /// Carried through I/O; the matchers ignore it.
    pub quality: f64,
}

impl Minutia {
    /// Builds a minutia with quality 1, normalizing `theta` into `[0, 2π)`.
    ///
    /// Panics if any coordinate is non-finite; use [`Minutia::try_new`] for
    /// untrusted input.
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self::try_new(x, y, theta, 1.0).expect("minutia fields must be finite")
    }

    pub fn try_new(x: f64, y: f64, theta: f64, quality: f64) -> Result<Self> {
        for (what, value) in [("x", x), ("y", y), ("theta", theta), ("quality", quality)] {
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    what: what.to_string(),
                    value,
                });
            }
        }
        Ok(Self {
            x,
            y,
            theta: normalize_angle(theta),
            quality,
        })
    }

    pub fn with_quality(mut self, quality: f64) -> Self {
        self.quality = quality;
        self
    }
}

/// A rotation by `angle` about `(cx, cy)` followed by a translation.
///
/// Rotation is counter-clockwise in the fingerprint frame (y up), which is
/// clockwise on screen because image y grows downward. Minutia directions
/// are advanced by `angle` so that all relative geometry is preserved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub angle: f64,
    pub cx: f64,
    pub cy: f64,
    pub tx: f64,
    pub ty: f64,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            angle: 0.0,
            cx: 0.0,
            cy: 0.0,
            tx: 0.0,
            ty: 0.0,
        }
    }

    pub fn apply(&self, m: &Minutia) -> Minutia {
        let (sin, cos) = self.angle.sin_cos();
        let dx = m.x - self.cx;
        let dy_up = self.cy - m.y;
        let rx = dx * cos - dy_up * sin;
        let ry_up = dx * sin + dy_up * cos;
        Minutia {
            x: self.cx + rx + self.tx,
            y: self.cy - ry_up + self.ty,
            theta: normalize_angle(m.theta + self.angle),
            quality: m.quality,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MinutiaeTemplate {
    pub id: String,
    /// Index order is the index space used by descriptors and pair sets.
    pub minutiae: Vec<Minutia>,
    pub width: Option<u32>,
    pub height: Option<u32>,
}

impl MinutiaeTemplate {
    pub fn new(id: impl Into<String>, minutiae: Vec<Minutia>) -> Self {
        Self {
            id: id.into(),
            minutiae,
            width: None,
            height: None,
        }
    }

    pub fn with_extent(mut self, width: u32, height: u32) -> Self {
        self.width = Some(width);
        self.height = Some(height);
        self
    }

    pub fn len(&self) -> usize {
        self.minutiae.len()
    }

    pub fn is_empty(&self) -> bool {
        self.minutiae.is_empty()
    }

    pub fn transformed(&self, transform: &RigidTransform) -> Self {
        Self {
            minutiae: self.minutiae.iter().map(|m| transform.apply(m)).collect(),
            ..self.clone()
        }
    }

    /// Parses the text format. `fallback_id` is used when no header names one.
    pub fn parse(text: &str, fallback_id: &str, path: &Path) -> Result<Self> {
        let mut template = MinutiaeTemplate::new(fallback_id, Vec::new());
        let parse_err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                parse_header(comment, &mut template).map_err(|m| parse_err(line_no, m))?;
                continue;
            }

            let fields: Vec<&str> = line.split_whitespace().collect();
            if !(3..=4).contains(&fields.len()) {
                return Err(parse_err(
                    line_no,
                    format!("expected \"x y theta [quality]\", got {} fields", fields.len()),
                ));
            }
            let mut values = [0.0, 0.0, 0.0, 1.0];
            for (slot, field) in values.iter_mut().zip(&fields) {
                *slot = field
                    .parse::<f64>()
                    .map_err(|_| parse_err(line_no, format!("not a number: {field:?}")))?;
            }
            let [x, y, theta, quality] = values;
            let minutia = Minutia::try_new(x, y, theta, quality).map_err(|e| parse_err(line_no, e.to_string()))?;
            if !(0.0..=1.0).contains(&quality) {
                return Err(parse_err(line_no, format!("quality {quality} outside [0, 1]")));
            }
            template.minutiae.push(minutia);
        }
        Ok(template)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "# id={}", self.id);
        if let Some(w) = self.width {
            let _ = write!(out, " w={w}");
        }
        if let Some(h) = self.height {
            let _ = write!(out, " h={h}");
        }
        out.push('\n');
        for m in &self.minutiae {
            let _ = writeln!(out, "{} {} {} {}", m.x, m.y, m.theta, m.quality);
        }
        out
    }
}

fn parse_header(comment: &str, template: &mut MinutiaeTemplate) -> std::result::Result<(), String> {
    let tokens: Vec<&str> = comment.split_whitespace().collect();
    if !tokens.first().is_some_and(|t| t.starts_with("id=")) {
        // ordinary comment
        return Ok(());
    }
    for token in tokens {
        let Some((key, value)) = token.split_once('=') else {
            return Err(format!("malformed header token {token:?}"));
        };
        match key {
            "id" => template.id = value.to_string(),
            "w" | "h" => {
                let v: u32 = value
                    .parse()
                    .map_err(|_| format!("header {key}= expects an integer, got {value:?}"))?;
                if key == "w" {
                    template.width = Some(v);
                } else {
                    template.height = Some(v);
                }
            }
            _ => return Err(format!("unknown header key {key:?}")),
        }
    }
    Ok(())
}

pub fn load_template(path: impl AsRef<Path>) -> Result<MinutiaeTemplate> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    MinutiaeTemplate::parse(&text, &stem, path)
}

pub fn save_template(template: &MinutiaeTemplate, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, template.to_text()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::TAU;

    fn parse(text: &str) -> Result<MinutiaeTemplate> {
        MinutiaeTemplate::parse(text, "t", Path::new("t.mnt"))
    }

    #[test]
    fn parses_data_lines_in_order() {
        let t = parse("10 20 1.57\n30 40 0.5\n").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.minutiae[0].theta, 1.57);
        assert_eq!(t.minutiae[1].theta, 0.5);
        assert_eq!(t.minutiae[1].quality, 1.0);
    }

    #[test]
    fn comment_only_file_is_empty_template() {
        let t = parse("# just a note\n#another\n").unwrap();
        assert!(t.is_empty());
        assert_eq!(t.id, "t");
    }

    #[test]
    fn bad_number_names_line() {
        match parse("10 20 abc\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
        match parse("# id=x\n1 2 3\n1 2\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn non_finite_theta_rejected() {
        assert!(matches!(parse("1 2 inf\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("1 2 NaN\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn header_sets_id_and_extent() {
        let t = parse("# id=abc w=500 h=480\n1 2 7.0 0.25\n").unwrap();
        assert_eq!(t.id, "abc");
        assert_eq!((t.width, t.height), (Some(500), Some(480)));
        assert!((t.minutiae[0].theta - (7.0 - TAU)).abs() < 1e-12);
        assert_eq!(t.minutiae[0].quality, 0.25);
    }

    #[test]
    fn missing_file_and_unwritable_path() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_template(dir.path().join("absent.mnt")), Err(Error::Io { .. })));
        let t = MinutiaeTemplate::new("x", vec![Minutia::new(1.0, 2.0, 3.0)]);
        assert!(matches!(
            save_template(&t, dir.path().join("no/such/dir/x.mnt")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn rigid_transform_keeps_relative_geometry() {
        let a = Minutia::new(10.0, 20.0, 0.3);
        let b = Minutia::new(40.0, -5.0, 2.0);
        let tr = RigidTransform {
            angle: 1.1,
            cx: 3.0,
            cy: -8.0,
            tx: 12.0,
            ty: 7.0,
        };
        let (a2, b2) = (tr.apply(&a), tr.apply(&b));
        use crate::geometry::*;
        assert!((euclidean_distance(&a, &b) - euclidean_distance(&a2, &b2)).abs() < 1e-9);
        assert!((radial_angle(&a, &b) - radial_angle(&a2, &b2)).abs() < 1e-9);
        assert!((direction_difference(&a, &b) - direction_difference(&a2, &b2)).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn save_load_round_trip(
            pts in prop::collection::vec(
                (-1e4f64..1e4, -1e4f64..1e4, -10.0f64..10.0, 0.0f64..=1.0), 0..40)
        ) {
            let minutiae: Vec<Minutia> = pts
                .iter()
                .map(|&(x, y, t, q)| Minutia::new(x, y, t).with_quality(q))
                .collect();
            let t = MinutiaeTemplate::new("rt", minutiae).with_extent(500, 400);
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("rt.mnt");
            save_template(&t, &path).unwrap();
            let back = load_template(&path).unwrap();
            prop_assert_eq!(back.len(), t.len());
            prop_assert_eq!(&back.id, &t.id);
            prop_assert_eq!((back.width, back.height), (t.width, t.height));
            for (a, b) in t.minutiae.iter().zip(&back.minutiae) {
                prop_assert!((a.x - b.x).abs() <= 1e-6);
                prop_assert!((a.y - b.y).abs() <= 1e-6);
                prop_assert!((a.theta - b.theta).abs() <= 1e-6);
                prop_assert!((a.quality - b.quality).abs() <= 1e-6);
            }
        }
    }
}
