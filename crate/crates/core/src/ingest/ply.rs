//! PLY reading and writing: Gaussian checkpoints and colored point clouds.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::scene::sh::{degree_for_coeffs, num_coeffs};
use crate::scene::GaussianSet;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn decode(self, b: &[u8], little: bool) -> f64 {
        macro_rules! num {
            ($t:ty, $n:expr) => {{
                let raw: [u8; $n] = b[..$n].try_into().expect("sized");
                (if little { <$t>::from_le_bytes(raw) } else { <$t>::from_be_bytes(raw) }) as f64
            }};
        }
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => num!(i16, 2),
            Scalar::U16 => num!(u16, 2),
            Scalar::I32 => num!(i32, 4),
            Scalar::U32 => num!(u32, 4),
            Scalar::F32 => num!(f32, 4),
            Scalar::F64 => num!(f64, 8),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Encoding {
    Ascii,
    BinaryLittle,
    BinaryBig,
}

#[derive(Debug)]
enum Property {
    Scalar(Scalar, String),
    List { count: Scalar, item: Scalar, name: String },
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

/// The `vertex` element of a PLY file, every scalar property decoded to
/// `f64` (lossless for all PLY scalar types).
#[derive(Debug)]
pub struct VertexTable {
    pub names: Vec<String>,
    pub rows: usize,
    /// Row-major, `names.len()` values per row.
    pub values: Vec<f64>,
}

impl VertexTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.names.len() + col]
    }
}

/// Read the `vertex` element of any PLY file. List properties on the vertex
/// element are rejected; other elements are skipped.
pub fn read_vertices(path: &Path) -> Result<VertexTable> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_vertices(&bytes).map_err(|(at, msg)| Error::parse(path, at, msg))
}

type ParseResult<T> = std::result::Result<T, (String, String)>;

fn parse_header(bytes: &[u8]) -> ParseResult<(Encoding, Vec<Element>, usize)> {
    let end_marker = b"end_header";
    let mut pos = 0;
    let mut line_no = 0;
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let Some(nl) = bytes[pos..].iter().position(|&b| b == b'\n') else {
            return Err((format!("line {}", line_no + 1), "header has no end_header".into()));
        };
        let line = String::from_utf8_lossy(&bytes[pos..pos + nl]).trim_end_matches('\r').to_string();
        pos += nl + 1;
        line_no += 1;
        let at = || format!("line {line_no}");
        let tok: Vec<&str> = line.split_whitespace().collect();
        if line_no == 1 {
            if line.trim() != "ply" {
                return Err((at(), "missing 'ply' magic".into()));
            }
            continue;
        }
        match tok.first().copied() {
            None | Some("comment") | Some("obj_info") => {}
            Some("format") => {
                encoding = Some(match tok.get(1).copied() {
                    Some("ascii") => Encoding::Ascii,
                    Some("binary_little_endian") => Encoding::BinaryLittle,
                    Some("binary_big_endian") => Encoding::BinaryBig,
                    f => return Err((at(), format!("unknown format {f:?}"))),
                });
            }
            Some("element") => {
                let (Some(name), Some(count)) = (tok.get(1), tok.get(2).and_then(|c| c.parse().ok())) else {
                    return Err((at(), "malformed element line".into()));
                };
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| (at(), "property before any element".to_string()))?;
                let ty = |s: Option<&&str>| {
                    s.and_then(|s| Scalar::parse(s))
                        .ok_or_else(|| (at(), format!("unknown property type in '{line}'")))
                };
                if tok.get(1) == Some(&"list") {
                    let count = ty(tok.get(2))?;
                    let item = ty(tok.get(3))?;
                    let name = tok.get(4).ok_or_else(|| (at(), "list property without name".to_string()))?;
                    el.properties.push(Property::List {
                        count,
                        item,
                        name: name.to_string(),
                    });
                } else {
                    let t = ty(tok.get(1))?;
                    let name = tok.get(2).ok_or_else(|| (at(), "property without name".to_string()))?;
                    el.properties.push(Property::Scalar(t, name.to_string()));
                }
            }
            Some(t) if t.as_bytes() == end_marker => break,
            Some(t) => return Err((at(), format!("unexpected header keyword '{t}'"))),
        }
    }
    let encoding = encoding.ok_or_else(|| ("header".to_string(), "missing format line".to_string()))?;
    Ok((encoding, elements, pos))
}

fn parse_vertices(bytes: &[u8]) -> ParseResult<VertexTable> {
    let (encoding, elements, mut pos) = parse_header(bytes)?;
    let mut ascii_tokens = if encoding == Encoding::Ascii {
        Some(
            String::from_utf8_lossy(&bytes[pos..])
                .split_whitespace()
                .map(str::to_owned)
                .collect::<Vec<_>>()
                .into_iter(),
        )
    } else {
        None
    };
    let little = encoding == Encoding::BinaryLittle;
    for el in &elements {
        let is_vertex = el.name == "vertex";
        if is_vertex {
            let mut names = Vec::new();
            let mut types = Vec::new();
            for p in &el.properties {
                match p {
                    Property::Scalar(t, n) => {
                        names.push(n.clone());
                        types.push(*t);
                    }
                    Property::List { name, .. } => {
                        return Err(("header".into(), format!("list property '{name}' on vertex element")));
                    }
                }
            }
            let row_size: usize = types.iter().map(|t| t.size()).sum();
            let mut values = Vec::with_capacity(el.count * names.len());
            if let Some(tokens) = ascii_tokens.as_mut() {
                for r in 0..el.count {
                    for n in &names {
                        let tok = tokens
                            .next()
                            .ok_or_else(|| (format!("vertex {r}"), format!("missing value for '{n}'")))?;
                        let v: f64 = tok
                            .parse()
                            .map_err(|_| (format!("vertex {r}"), format!("bad value '{tok}' for '{n}'")))?;
                        values.push(v);
                    }
                }
            } else {
                let need = el.count.checked_mul(row_size).filter(|&n| pos + n <= bytes.len());
                if need.is_none() {
                    return Err((
                        format!("byte {pos}"),
                        format!("file too short for {} vertices of {row_size} bytes", el.count),
                    ));
                }
                for _ in 0..el.count {
                    for t in &types {
                        values.push(t.decode(&bytes[pos..], little));
                        pos += t.size();
                    }
                }
            }
            return Ok(VertexTable {
                names,
                rows: el.count,
                values,
            });
        }
        // skip a preceding non-vertex element
        for _ in 0..el.count {
            for p in &el.properties {
                match (p, ascii_tokens.as_mut()) {
                    (Property::Scalar(..), Some(tok)) => {
                        tok.next();
                    }
                    (Property::List { .. }, Some(tok)) => {
                        let n: usize = tok.next().and_then(|t| t.parse().ok()).unwrap_or(0);
                        for _ in 0..n {
                            tok.next();
                        }
                    }
                    (Property::Scalar(t, _), None) => pos += t.size(),
                    (Property::List { count, item, .. }, None) => {
                        if pos + count.size() > bytes.len() {
                            return Err((format!("byte {pos}"), "truncated list".into()));
                        }
                        let n = count.decode(&bytes[pos..], little) as usize;
                        pos += count.size() + n * item.size();
                    }
                }
            }
        }
    }
    Err(("header".into(), "no vertex element".into()))
}

fn f_rest_count(coeffs: usize) -> usize {
    3 * (coeffs - 1)
}

/// Write a Gaussian set in the layout common splat viewers read: position,
/// zero normals, DC color, higher-order SH channel-major, opacity logit, log
/// scales and the rotation quaternion.
pub fn export_ply(set: &GaussianSet<f32>, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    write_ply(set, &mut out).map_err(|e| Error::io(path, e))?;
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_ply(set: &GaussianSet<f32>, w: &mut impl Write) -> std::io::Result<()> {
    let k = set.sh_coeffs();
    let rest = f_rest_count(k);
    let mut header = String::from("ply\nformat binary_little_endian 1.0\n");
    header += &format!("element vertex {}\n", set.len());
    for name in ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"] {
        header += &format!("property float {name}\n");
    }
    for r in 0..rest {
        header += &format!("property float f_rest_{r}\n");
    }
    header += "property float opacity\n";
    for name in ["scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"] {
        header += &format!("property float {name}\n");
    }
    header += "end_header\n";
    w.write_all(header.as_bytes())?;

    let mut row = Vec::with_capacity(4 * (17 + rest));
    for i in 0..set.len() {
        row.clear();
        let sh = set.sh_of(i);
        let mut push = |v: f32| row.extend_from_slice(&v.to_le_bytes());
        set.means[i].iter().for_each(|&v| push(v));
        (0..3).for_each(|_| push(0.0));
        sh[0].iter().for_each(|&v| push(v));
        for c in 0..3 {
            for coeff in &sh[1..] {
                push(coeff[c]);
            }
        }
        push(set.opacity_logits[i]);
        set.log_scales[i].iter().for_each(|&v| push(v));
        set.rotations[i].iter().for_each(|&v| push(v));
        w.write_all(&row)?;
    }
    Ok(())
}

/// Read a Gaussian set written by [`export_ply`] or a compatible tool. The
/// SH degree follows from the number of `f_rest_*` properties.
pub fn import_ply(path: &Path) -> Result<GaussianSet<f32>> {
    let table = read_vertices(path)?;
    gaussians_from_table(&table).map_err(|msg| Error::parse(path, "header", msg))
}

fn gaussians_from_table(t: &VertexTable) -> std::result::Result<GaussianSet<f32>, String> {
    let col = |name: &str| t.column(name).ok_or_else(|| format!("missing property '{name}'"));
    let pos = [col("x")?, col("y")?, col("z")?];
    let dc = [col("f_dc_0")?, col("f_dc_1")?, col("f_dc_2")?];
    let opacity = col("opacity")?;
    let scale = [col("scale_0")?, col("scale_1")?, col("scale_2")?];
    let rot = [col("rot_0")?, col("rot_1")?, col("rot_2")?, col("rot_3")?];
    let mut rest = Vec::new();
    while let Some(c) = t.column(&format!("f_rest_{}", rest.len())) {
        rest.push(c);
    }
    if rest.len() % 3 != 0 {
        return Err(format!("{} f_rest properties is not a multiple of 3", rest.len()));
    }
    let coeffs = rest.len() / 3 + 1;
    let degree = degree_for_coeffs(coeffs)
        .ok_or_else(|| format!("{} f_rest properties do not form a complete SH degree", rest.len()))?;
    debug_assert_eq!(num_coeffs(degree), coeffs);

    let mut set = GaussianSet::with_capacity(degree, t.rows);
    let f = |r: usize, c: usize| t.get(r, c) as f32;
    for r in 0..t.rows {
        set.means.push(pos.map(|c| f(r, c)));
        set.log_scales.push(scale.map(|c| f(r, c)));
        set.rotations.push(rot.map(|c| f(r, c)));
        set.opacity_logits.push(f(r, opacity));
        set.sh.push(dc.map(|c| f(r, c)));
        for k in 1..coeffs {
            set.sh.push([0, 1, 2].map(|ch| f(r, rest[ch * (coeffs - 1) + k - 1])));
        }
    }
    Ok(set)
}

/// Colored point cloud, e.g. a dense `fused.ply`. Points without color
/// properties come out mid-gray.
pub fn read_point_cloud(path: &Path) -> Result<(Vec<[f64; 3]>, Vec<[u8; 3]>)> {
    let t = read_vertices(path)?;
    let col = |name: &str| {
        t.column(name)
            .ok_or_else(|| Error::parse(path, "header", format!("missing property '{name}'")))
    };
    let pos = [col("x")?, col("y")?, col("z")?];
    let color = ["red", "green", "blue"]
        .map(|n| t.column(n).or_else(|| t.column(&format!("diffuse_{n}"))));
    let positions = (0..t.rows).map(|r| pos.map(|c| t.get(r, c))).collect();
    let colors = (0..t.rows)
        .map(|r| color.map(|c| c.map_or(128, |c| t.get(r, c).clamp(0.0, 255.0) as u8)))
        .collect();
    Ok((positions, colors))
}
