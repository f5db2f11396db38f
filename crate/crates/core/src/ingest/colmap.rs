//! COLMAP sparse model reader (text and binary).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::scene::Camera;
use crate::{Error, Result};

/// Pinhole camera models, the only ones the projection is exact for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CameraModel {
    /// Parameters `f, cx, cy`.
    SimplePinhole,
    /// Parameters `fx, fy, cx, cy`.
    Pinhole,
}

impl CameraModel {
    pub fn id(self) -> i32 {
        match self {
            CameraModel::SimplePinhole => 0,
            CameraModel::Pinhole => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CameraModel::SimplePinhole => "SIMPLE_PINHOLE",
            CameraModel::Pinhole => "PINHOLE",
        }
    }

    pub fn num_params(self) -> usize {
        match self {
            CameraModel::SimplePinhole => 3,
            CameraModel::Pinhole => 4,
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        match name {
            "SIMPLE_PINHOLE" => Some(CameraModel::SimplePinhole),
            "PINHOLE" => Some(CameraModel::Pinhole),
            _ => None,
        }
    }

    fn from_id(id: i32) -> Option<Self> {
        match id {
            0 => Some(CameraModel::SimplePinhole),
            1 => Some(CameraModel::Pinhole),
            _ => None,
        }
    }
}

/// Parameter counts of the non-pinhole COLMAP models, so binary files can
/// name what they contain before being rejected.
const OTHER_MODELS: [(i32, &str); 9] = [
    (2, "SIMPLE_RADIAL"),
    (3, "RADIAL"),
    (4, "OPENCV"),
    (5, "OPENCV_FISHEYE"),
    (6, "FULL_OPENCV"),
    (7, "FOV"),
    (8, "SIMPLE_RADIAL_FISHEYE"),
    (9, "RADIAL_FISHEYE"),
    (10, "THIN_PRISM_FISHEYE"),
];

#[derive(Clone, Debug, PartialEq)]
pub struct Intrinsics {
    pub model: CameraModel,
    pub width: u64,
    pub height: u64,
    pub params: Vec<f64>,
}

impl Intrinsics {
    /// `(fx, fy, cx, cy)`.
    pub fn pinhole(&self) -> [f64; 4] {
        match self.model {
            CameraModel::SimplePinhole => [self.params[0], self.params[0], self.params[1], self.params[2]],
            CameraModel::Pinhole => [self.params[0], self.params[1], self.params[2], self.params[3]],
        }
    }
}

/// A registered image: world-to-camera pose and file name.
#[derive(Clone, Debug, PartialEq)]
pub struct SfmImage {
    pub camera_id: u32,
    /// `(w, x, y, z)`.
    pub qvec: [f64; 4],
    pub tvec: [f64; 3],
    pub name: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SfmPoint {
    pub id: u64,
    pub xyz: [f64; 3],
    pub rgb: [u8; 3],
    pub error: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SfmModel {
    pub cameras: BTreeMap<u32, Intrinsics>,
    pub images: BTreeMap<u32, SfmImage>,
    pub points: Vec<SfmPoint>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelFormat {
    Text,
    Binary,
}

impl SfmModel {
    /// Training camera for image `image_id`.
    pub fn camera(&self, image_id: u32) -> Result<Camera<f32>> {
        let img = self
            .images
            .get(&image_id)
            .ok_or_else(|| Error::InvalidInput(format!("no image with id {image_id}")))?;
        let intr = &self.cameras[&img.camera_id];
        let [fx, fy, cx, cy] = intr.pinhole().map(|v| v as f32);
        let width = u32::try_from(intr.width)
            .map_err(|_| Error::InvalidInput(format!("camera {} width too large", img.camera_id)))?;
        let height = u32::try_from(intr.height)
            .map_err(|_| Error::InvalidInput(format!("camera {} height too large", img.camera_id)))?;
        Camera::from_quaternion(
            image_id,
            [fx, fy],
            [cx, cy],
            width,
            height,
            img.qvec.map(|v| v as f32),
            img.tvec.map(|v| v as f32),
        )
    }

    fn validate(&self, path: &Path) -> Result<()> {
        for (id, img) in &self.images {
            if !self.cameras.contains_key(&img.camera_id) {
                return Err(Error::parse(
                    path.join("images"),
                    format!("image {id}"),
                    format!("references missing camera id {}", img.camera_id),
                ));
            }
        }
        for p in &self.points {
            if !p.xyz.iter().all(|v| v.is_finite()) {
                return Err(Error::parse(
                    path.join("points3D"),
                    format!("point {}", p.id),
                    "non-finite position",
                ));
            }
        }
        Ok(())
    }
}

/// Read `cameras`, `images` and `points3D` from a COLMAP model directory.
pub fn parse_colmap_model(dir: &Path, format: ModelFormat) -> Result<SfmModel> {
    let model = match format {
        ModelFormat::Text => SfmModel {
            cameras: text::cameras(&dir.join("cameras.txt"))?,
            images: text::images(&dir.join("images.txt"))?,
            points: text::points(&dir.join("points3D.txt"))?,
        },
        ModelFormat::Binary => SfmModel {
            cameras: binary::cameras(&dir.join("cameras.bin"))?,
            images: binary::images(&dir.join("images.bin"))?,
            points: binary::points(&dir.join("points3D.bin"))?,
        },
    };
    model.validate(dir)?;
    Ok(model)
}

/// Pick the format from whichever `cameras` file exists, binary first.
pub fn detect_format(dir: &Path) -> Option<ModelFormat> {
    if dir.join("cameras.bin").is_file() {
        Some(ModelFormat::Binary)
    } else if dir.join("cameras.txt").is_file() {
        Some(ModelFormat::Text)
    } else {
        None
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

mod text {
    use super::*;

    struct Lines<'a> {
        path: PathBuf,
        inner: std::iter::Enumerate<std::str::Lines<'a>>,
    }

    impl<'a> Lines<'a> {
        /// Next line that is neither blank nor a comment.
        fn record(&mut self) -> Option<(usize, &'a str)> {
            for (i, line) in self.inner.by_ref() {
                let t = line.trim();
                if !t.is_empty() && !t.starts_with('#') {
                    return Some((i + 1, t));
                }
            }
            None
        }

        /// Next line whatever it holds.
        fn raw(&mut self) -> Option<(usize, &'a str)> {
            self.inner.next().map(|(i, l)| (i + 1, l.trim()))
        }

        fn err(&self, line: usize, msg: impl Into<String>) -> Error {
            Error::parse(&self.path, format!("line {line}"), msg)
        }
    }

    fn load(path: &Path) -> Result<String> {
        let bytes = read(path)?;
        String::from_utf8(bytes).map_err(|e| Error::parse(path, format!("byte {}", e.utf8_error().valid_up_to()), "not UTF-8"))
    }

    fn field<V: std::str::FromStr>(lines: &Lines, line: usize, tok: Option<&str>, what: &str) -> Result<V> {
        let tok = tok.ok_or_else(|| lines.err(line, format!("missing {what}")))?;
        tok.parse()
            .map_err(|_| lines.err(line, format!("bad {what} '{tok}'")))
    }

    pub fn cameras(path: &Path) -> Result<BTreeMap<u32, Intrinsics>> {
        let src = load(path)?;
        let mut lines = Lines {
            path: path.to_owned(),
            inner: src.lines().enumerate(),
        };
        let mut out = BTreeMap::new();
        while let Some((ln, line)) = lines.record() {
            let mut tok = line.split_whitespace();
            let id: u32 = field(&lines, ln, tok.next(), "camera id")?;
            let name = tok.next().ok_or_else(|| lines.err(ln, "missing camera model"))?;
            let model = CameraModel::from_name(name).ok_or_else(|| {
                lines.err(ln, format!("unsupported camera model {name}; only SIMPLE_PINHOLE and PINHOLE are accepted"))
            })?;
            let width: u64 = field(&lines, ln, tok.next(), "width")?;
            let height: u64 = field(&lines, ln, tok.next(), "height")?;
            let params = tok
                .map(|t| field::<f64>(&lines, ln, Some(t), "camera parameter"))
                .collect::<Result<Vec<_>>>()?;
            if params.len() != model.num_params() {
                return Err(lines.err(
                    ln,
                    format!("{} expects {} parameters, found {}", model.name(), model.num_params(), params.len()),
                ));
            }
            if out.insert(id, Intrinsics { model, width, height, params }).is_some() {
                return Err(lines.err(ln, format!("duplicate camera id {id}")));
            }
        }
        Ok(out)
    }

    pub fn images(path: &Path) -> Result<BTreeMap<u32, SfmImage>> {
        let src = load(path)?;
        let mut lines = Lines {
            path: path.to_owned(),
            inner: src.lines().enumerate(),
        };
        let mut out = BTreeMap::new();
        while let Some((ln, line)) = lines.record() {
            let mut tok = line.split_whitespace();
            let id: u32 = field(&lines, ln, tok.next(), "image id")?;
            let mut qvec = [0.0; 4];
            for q in &mut qvec {
                *q = field(&lines, ln, tok.next(), "quaternion")?;
            }
            let mut tvec = [0.0; 3];
            for t in &mut tvec {
                *t = field(&lines, ln, tok.next(), "translation")?;
            }
            let camera_id: u32 = field(&lines, ln, tok.next(), "camera id")?;
            // names may contain spaces: the rest of the line
            let rest: Vec<&str> = tok.collect();
            if rest.is_empty() {
                return Err(lines.err(ln, "missing image name"));
            }
            let name = rest.join(" ");
            // the 2D point line follows directly and may be empty
            if let Some((pln, pts)) = lines.raw() {
                let n = pts.split_whitespace().count();
                if n % 3 != 0 {
                    return Err(lines.err(pln, format!("2D point list has {n} fields, not a multiple of 3")));
                }
            }
            if out.insert(id, SfmImage { camera_id, qvec, tvec, name }).is_some() {
                return Err(lines.err(ln, format!("duplicate image id {id}")));
            }
        }
        Ok(out)
    }

    pub fn points(path: &Path) -> Result<Vec<SfmPoint>> {
        let src = load(path)?;
        let mut lines = Lines {
            path: path.to_owned(),
            inner: src.lines().enumerate(),
        };
        let mut out = Vec::new();
        while let Some((ln, line)) = lines.record() {
            let mut tok = line.split_whitespace();
            let id: u64 = field(&lines, ln, tok.next(), "point id")?;
            let mut xyz = [0.0; 3];
            for v in &mut xyz {
                *v = field(&lines, ln, tok.next(), "coordinate")?;
            }
            let mut rgb = [0u8; 3];
            for v in &mut rgb {
                *v = field(&lines, ln, tok.next(), "color")?;
            }
            let error: f64 = field(&lines, ln, tok.next(), "reprojection error")?;
            let track = tok.count();
            if track % 2 != 0 {
                return Err(lines.err(ln, "track has an odd number of fields"));
            }
            out.push(SfmPoint { id, xyz, rgb, error });
        }
        Ok(out)
    }
}

mod binary {
    use super::*;

    struct Reader<'a> {
        path: &'a Path,
        buf: &'a [u8],
        pos: usize,
    }

    impl<'a> Reader<'a> {
        fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
            if self.buf.len() - self.pos < n {
                return Err(self.err(format!("truncated while reading {what}")));
            }
            let s = &self.buf[self.pos..self.pos + n];
            self.pos += n;
            Ok(s)
        }

        fn err(&self, msg: impl Into<String>) -> Error {
            Error::parse(self.path, format!("byte {}", self.pos), msg)
        }

        fn u8(&mut self, what: &str) -> Result<u8> {
            Ok(self.take(1, what)?[0])
        }

        fn u32(&mut self, what: &str) -> Result<u32> {
            Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
        }

        fn i32(&mut self, what: &str) -> Result<i32> {
            Ok(i32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
        }

        fn u64(&mut self, what: &str) -> Result<u64> {
            Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
        }

        fn f64(&mut self, what: &str) -> Result<f64> {
            Ok(f64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
        }

        /// A count that must fit in the remaining bytes at `min_size` each.
        fn count(&mut self, min_size: usize, what: &str) -> Result<usize> {
            let n = self.u64(what)?;
            let left = (self.buf.len() - self.pos) as u64;
            if n.saturating_mul(min_size as u64) > left {
                return Err(self.err(format!("{what} {n} exceeds file size")));
            }
            Ok(n as usize)
        }

        fn skip(&mut self, n: usize, what: &str) -> Result<()> {
            self.take(n, what).map(|_| ())
        }

        fn finish(&self) -> Result<()> {
            if self.pos != self.buf.len() {
                return Err(self.err("trailing bytes"));
            }
            Ok(())
        }
    }

    pub fn cameras(path: &Path) -> Result<BTreeMap<u32, Intrinsics>> {
        let buf = read(path)?;
        let mut r = Reader { path, buf: &buf, pos: 0 };
        let n = r.count(24, "camera count")?;
        let mut out = BTreeMap::new();
        for _ in 0..n {
            let at = r.pos;
            let id = r.u32("camera id")?;
            let model_id = r.i32("camera model")?;
            let model = CameraModel::from_id(model_id).ok_or_else(|| {
                let name = OTHER_MODELS
                    .iter()
                    .find(|m| m.0 == model_id)
                    .map_or("unknown", |m| m.1);
                Error::parse(
                    path,
                    format!("byte {at}"),
                    format!(
                        "camera {id}: unsupported camera model {model_id} ({name}); only SIMPLE_PINHOLE and PINHOLE are accepted"
                    ),
                )
            })?;
            let width = r.u64("width")?;
            let height = r.u64("height")?;
            let params = (0..model.num_params())
                .map(|_| r.f64("camera parameter"))
                .collect::<Result<Vec<_>>>()?;
            if out.insert(id, Intrinsics { model, width, height, params }).is_some() {
                return Err(Error::parse(path, format!("byte {at}"), format!("duplicate camera id {id}")));
            }
        }
        r.finish()?;
        Ok(out)
    }

    pub fn images(path: &Path) -> Result<BTreeMap<u32, SfmImage>> {
        let buf = read(path)?;
        let mut r = Reader { path, buf: &buf, pos: 0 };
        let n = r.count(64, "image count")?;
        let mut out = BTreeMap::new();
        for _ in 0..n {
            let at = r.pos;
            let id = r.u32("image id")?;
            let mut qvec = [0.0; 4];
            for q in &mut qvec {
                *q = r.f64("quaternion")?;
            }
            let mut tvec = [0.0; 3];
            for t in &mut tvec {
                *t = r.f64("translation")?;
            }
            let camera_id = r.u32("camera id")?;
            let mut name_bytes = Vec::new();
            loop {
                match r.u8("image name")? {
                    0 => break,
                    b => name_bytes.push(b),
                }
            }
            let name = String::from_utf8(name_bytes).map_err(|_| r.err("image name is not UTF-8"))?;
            let points = r.count(24, "2D point count")?;
            r.skip(points * 24, "2D points")?;
            if out.insert(id, SfmImage { camera_id, qvec, tvec, name }).is_some() {
                return Err(Error::parse(path, format!("byte {at}"), format!("duplicate image id {id}")));
            }
        }
        r.finish()?;
        Ok(out)
    }

    pub fn points(path: &Path) -> Result<Vec<SfmPoint>> {
        let buf = read(path)?;
        let mut r = Reader { path, buf: &buf, pos: 0 };
        let n = r.count(43, "point count")?;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let id = r.u64("point id")?;
            let mut xyz = [0.0; 3];
            for v in &mut xyz {
                *v = r.f64("coordinate")?;
            }
            let mut rgb = [0u8; 3];
            for v in &mut rgb {
                *v = r.u8("color")?;
            }
            let error = r.f64("reprojection error")?;
            let track = r.count(8, "track length")?;
            r.skip(track * 8, "track")?;
            out.push(SfmPoint { id, xyz, rgb, error });
        }
        r.finish()?;
        Ok(out)
    }
}
