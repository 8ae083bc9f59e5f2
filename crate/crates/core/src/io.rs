//! Text point-cloud formats (XYZ and ASCII PLY), transforms and
//! correspondence lists.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use nalgebra::Matrix3x4;

use crate::error::{Error, Result};
use crate::geom::{Point3, PointCloud, RigidTransform};
use crate::metrics::{Correspondence, CorrespondenceSet};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    XyzAscii,
    PlyAscii,
}

impl CloudFormat {
    pub fn name(self) -> &'static str {
        match self {
            CloudFormat::XyzAscii => "xyz-ascii",
            CloudFormat::PlyAscii => "ply-ascii",
        }
    }

    /// Guesses the format from a `.xyz`/`.txt` or `.ply` extension.
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("xyz") | Some("txt") => Ok(CloudFormat::XyzAscii),
            Some("ply") => Ok(CloudFormat::PlyAscii),
            _ => Err(Error::UnsupportedFormat(format!("cannot infer format of {}", path.display()))),
        }
    }
}

impl fmt::Display for CloudFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CloudFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xyz-ascii" | "xyz" => Ok(CloudFormat::XyzAscii),
            "ply-ascii" | "ply" => Ok(CloudFormat::PlyAscii),
            other => Err(Error::UnsupportedFormat(other.to_string())),
        }
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_real<T: Real>(token: &str, line: usize) -> Result<T> {
    let v: f64 = token.parse().map_err(|_| parse_err(line, format!("'{token}' is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite coordinate '{token}'")));
    }
    T::from_f64(v).ok_or_else(|| parse_err(line, format!("'{token}' out of range")))
}

fn strip_comment(line: &str) -> &str {
    line.split('#').next().unwrap_or("").trim()
}

fn non_empty<T: Real>(points: Vec<Point3<T>>, lines: usize) -> Result<PointCloud<T>> {
    if points.is_empty() {
        return Err(parse_err(lines, "no points found (empty cloud)"));
    }
    PointCloud::new(points)
}

/// One `x y z` triple per line; blank lines and `#` comments are ignored.
/// Extra columns (normals, colors) after the first three are skipped.
pub fn parse_xyz<T: Real>(text: &str) -> Result<PointCloud<T>> {
    let mut points = Vec::new();
    let mut last = 0;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        last = line_no;
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() < 3 {
            return Err(parse_err(line_no, format!("expected 3 coordinates, found {}", tokens.len())));
        }
        points.push(Point3::new(
            parse_real(tokens[0], line_no)?,
            parse_real(tokens[1], line_no)?,
            parse_real(tokens[2], line_no)?,
        ));
    }
    non_empty(points, last)
}

struct PlyElement {
    name: String,
    count: usize,
    // property names; `None` marks a list property
    props: Vec<Option<String>>,
}

/// ASCII PLY: reads `x`, `y`, `z` from the `vertex` element and skips every
/// other element and property. Binary encodings are rejected.
pub fn parse_ply<T: Real>(text: &str) -> Result<PointCloud<T>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(parse_err(1, "missing 'ply' magic")),
    }
    let mut elements: Vec<PlyElement> = Vec::new();
    let mut format_seen = false;
    let mut header_done = false;
    let mut last = 1;
    for (n, raw) in lines.by_ref() {
        last = n;
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        match tokens.as_slice() {
            [] => {}
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", "ascii", _] => format_seen = true,
            ["format", enc, ..] => {
                return Err(Error::UnsupportedFormat(format!("PLY encoding '{enc}' (only ascii is supported)")))
            }
            ["element", name, count] => elements.push(PlyElement {
                name: name.to_string(),
                count: count.parse().map_err(|_| parse_err(n, format!("bad element count '{count}'")))?,
                props: Vec::new(),
            }),
            ["property", "list", _, _, _] => {
                elements.last_mut().ok_or_else(|| parse_err(n, "property before element"))?.props.push(None)
            }
            ["property", _, name] => elements
                .last_mut()
                .ok_or_else(|| parse_err(n, "property before element"))?
                .props
                .push(Some(name.to_string())),
            ["end_header"] => {
                header_done = true;
                break;
            }
            _ => return Err(parse_err(n, format!("unrecognized header line '{}'", raw.trim()))),
        }
    }
    if !header_done {
        return Err(parse_err(last, "missing end_header"));
    }
    if !format_seen {
        return Err(parse_err(last, "missing format line"));
    }

    let mut points = Vec::new();
    for element in &elements {
        let is_vertex = element.name == "vertex";
        let find = |axis: &str| element.props.iter().position(|p| p.as_deref() == Some(axis));
        let axes = if is_vertex {
            match (find("x"), find("y"), find("z")) {
                (Some(x), Some(y), Some(z)) => Some([x, y, z]),
                _ => return Err(parse_err(last, "vertex element lacks x, y, z properties")),
            }
        } else {
            None
        };
        let has_list = element.props.iter().any(Option::is_none);
        let mut read = 0;
        while read < element.count {
            let (n, raw) =
                lines.next().ok_or_else(|| parse_err(last + 1, format!("truncated '{}' data", element.name)))?;
            last = n;
            if raw.trim().is_empty() {
                continue;
            }
            read += 1;
            let Some(axes) = axes else { continue };
            let tokens: Vec<&str> = raw.split_whitespace().collect();
            if has_list {
                return Err(parse_err(n, "list properties in the vertex element are not supported"));
            }
            if tokens.len() < element.props.len() {
                return Err(parse_err(n, format!("expected {} values, found {}", element.props.len(), tokens.len())));
            }
            points.push(Point3::new(
                parse_real(tokens[axes[0]], n)?,
                parse_real(tokens[axes[1]], n)?,
                parse_real(tokens[axes[2]], n)?,
            ));
        }
    }
    non_empty(points, last)
}

pub fn parse_cloud<T: Real>(text: &str, format: CloudFormat) -> Result<PointCloud<T>> {
    match format {
        CloudFormat::XyzAscii => parse_xyz(text),
        CloudFormat::PlyAscii => parse_ply(text),
    }
}

/// Reads a cloud file; binary content is reported as an unsupported format.
pub fn parse_cloud_file<T: Real>(path: &Path, format: CloudFormat) -> Result<PointCloud<T>> {
    let bytes = fs::read(path)?;
    let text = String::from_utf8(bytes).map_err(|_| {
        Error::UnsupportedFormat(format!("{} is not text (binary PLY is not supported)", path.display()))
    })?;
    parse_cloud(&text, format)
}

/// Writes one `x y z` line per point using shortest round-trip formatting.
pub fn write_xyz<T: Real + fmt::Display, W: Write>(cloud: &PointCloud<T>, mut w: W) -> Result<()> {
    for p in cloud.points() {
        writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
    }
    Ok(())
}

pub fn write_ply<T: Real + fmt::Display, W: Write>(cloud: &PointCloud<T>, mut w: W) -> Result<()> {
    writeln!(w, "ply\nformat ascii 1.0\nelement vertex {}", cloud.len())?;
    writeln!(w, "property double x\nproperty double y\nproperty double z\nend_header")?;
    write_xyz(cloud, w)
}

pub fn write_cloud_file<T: Real + fmt::Display>(cloud: &PointCloud<T>, path: &Path, format: CloudFormat) -> Result<()> {
    let file = std::io::BufWriter::new(fs::File::create(path)?);
    match format {
        CloudFormat::XyzAscii => write_xyz(cloud, file),
        CloudFormat::PlyAscii => write_ply(cloud, file),
    }
}

/// Parses `identity` or twelve numbers forming the row-major `[R | t]`.
pub fn parse_transform<T: Real>(text: &str) -> Result<RigidTransform<T>> {
    let body: Vec<&str> = text.lines().map(strip_comment).filter(|l| !l.is_empty()).collect();
    if body.len() == 1 && body[0] == "identity" {
        return Ok(RigidTransform::identity());
    }
    let mut values = Vec::with_capacity(12);
    for (i, raw) in text.lines().enumerate() {
        for token in strip_comment(raw).split_whitespace() {
            values.push(parse_real::<T>(token, i + 1)?);
        }
    }
    if values.len() != 12 {
        return Err(parse_err(
            text.lines().count(),
            format!("expected 12 numbers for a 3x4 transform, found {}", values.len()),
        ));
    }
    RigidTransform::from_matrix(&Matrix3x4::from_row_slice(&values))
}

/// Three rows of `r11 r12 r13 t1` etc.
pub fn format_transform<T: Real + fmt::Display>(transform: &RigidTransform<T>) -> String {
    let m = transform.to_matrix();
    let mut out = String::new();
    for r in 0..3 {
        let row: Vec<String> = (0..4).map(|c| format!("{}", m[(r, c)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// One `sx sy sz tx ty tz` line per correspondence.
pub fn parse_correspondences<T: Real>(text: &str) -> Result<CorrespondenceSet<T>> {
    let mut items = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        let v = line.split_whitespace().map(|t| parse_real::<T>(t, i + 1)).collect::<Result<Vec<_>>>()?;
        if v.len() != 6 {
            return Err(parse_err(i + 1, format!("expected 6 numbers, found {}", v.len())));
        }
        items.push(Correspondence::new(Point3::new(v[0], v[1], v[2]), Point3::new(v[3], v[4], v[5])));
    }
    CorrespondenceSet::new(items)
}

pub fn write_correspondences<T: Real + fmt::Display, W: Write>(corrs: &CorrespondenceSet<T>, mut w: W) -> Result<()> {
    for c in corrs.iter() {
        let (s, t) = (c.source, c.target);
        writeln!(w, "{} {} {} {} {} {}", s.x, s.y, s.z, t.x, t.y, t.z)?;
    }
    Ok(())
}

/// Parses sweep values given as an inclusive `start:end:step` range or a
/// comma-separated list.
pub fn parse_sweep_values(text: &str) -> Result<Vec<f64>> {
    let bad = |msg: String| Error::BadConfig(msg);
    let num = |s: &str| -> Result<f64> {
        let v: f64 = s.trim().parse().map_err(|_| bad(format!("'{s}' is not a number")))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(bad(format!("'{s}' is not finite")))
        }
    };
    let parts: Vec<&str> = text.split(':').collect();
    let values = match parts.as_slice() {
        [start, end, step] => {
            let (start, end, step) = (num(start)?, num(end)?, num(step)?);
            if step <= 0.0 || end < start {
                return Err(bad(format!("range '{text}' needs start <= end and a positive step")));
            }
            // tolerate rounding so that 0:1:0.1 includes 1
            let count = ((end - start) / step + 1e-9).floor() as usize + 1;
            (0..count).map(|i| start + i as f64 * step).collect()
        }
        [list] => list.split(',').map(num).collect::<Result<Vec<_>>>()?,
        _ => return Err(bad(format!("'{text}' is neither a start:end:step range nor a list"))),
    };
    if values.is_empty() {
        return Err(bad("no sweep values".into()));
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_values_ranges_and_lists() {
        assert_eq!(parse_sweep_values("1:15:1").unwrap().len(), 15);
        assert_eq!(parse_sweep_values("0:1:0.1").unwrap().len(), 11);
        assert_eq!(parse_sweep_values("2.5").unwrap(), vec![2.5]);
        assert_eq!(parse_sweep_values("1, 2,4").unwrap(), vec![1.0, 2.0, 4.0]);
        assert!(parse_sweep_values("3:1:1").is_err());
        assert!(parse_sweep_values("1:2:0").is_err());
        assert!(parse_sweep_values("a,b").is_err());
        assert!(parse_sweep_values("1:2").is_err());
    }

    #[test]
    fn xyz_basic() {
        let c: PointCloud<f64> = parse_xyz("0 0 0\n1 0 0\n").unwrap();
        assert_eq!(c.len(), 2);
        let c: PointCloud<f64> = parse_xyz("# header\n\n1 2 3 # trailing\n4 5 6 0.1 0.2 0.3\n").unwrap();
        assert_eq!(c.points()[1], Point3::new(4.0, 5.0, 6.0));
    }

    #[test]
    fn xyz_errors_carry_line_numbers() {
        assert!(matches!(parse_xyz::<f64>(""), Err(Error::Parse { .. })));
        assert!(matches!(parse_xyz::<f64>("1 2 3\n1 2\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_xyz::<f64>("1 2 3\n\n1 x 3\n"), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(parse_xyz::<f64>("1 2 nan\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn ply_with_extra_elements() {
        let text = "ply\nformat ascii 1.0\ncomment made by hand\nelement vertex 3\nproperty float nx\n\
                    property float x\nproperty float y\nproperty float z\nelement face 1\n\
                    property list uchar int vertex_indices\nend_header\n9 0 0 0\n9 1 0 0\n9 0 1 0\n3 0 1 2\n";
        let c: PointCloud<f64> = parse_ply(text).unwrap();
        assert_eq!(c.points(), &[Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)]);
    }

    #[test]
    fn ply_errors() {
        let binary = "ply\nformat binary_little_endian 1.0\nelement vertex 1\nend_header\n";
        assert!(matches!(parse_ply::<f64>(binary), Err(Error::UnsupportedFormat(_))));
        let truncated = "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\n\
                         property float z\nend_header\n1 2 3\n";
        assert!(matches!(parse_ply::<f64>(truncated), Err(Error::Parse { .. })));
        assert!(parse_ply::<f64>("not a ply\n").is_err());
        let empty = "ply\nformat ascii 1.0\nelement vertex 0\nproperty float x\nproperty float y\n\
                     property float z\nend_header\n";
        assert!(matches!(parse_ply::<f64>(empty), Err(Error::Parse { .. })));
    }

    #[test]
    fn transform_text() {
        assert_eq!(parse_transform::<f64>("identity\n").unwrap(), RigidTransform::identity());
        let t = RigidTransform::from_axis_angle(
            &nalgebra::Vector3::new(1.0, 1.0, 0.0),
            0.4,
            nalgebra::Vector3::new(1.0, 2.0, 3.0),
        );
        assert_eq!(parse_transform::<f64>(&format_transform(&t)).unwrap(), t);
        assert!(parse_transform::<f64>("1 0 0 0\n0 1 0 0\n").is_err());
        assert!(parse_transform::<f64>("1 0 0 0\n0 1 0 0\n0 0 -1 0\n").is_err());
    }

    #[test]
    fn correspondence_text() {
        let c = parse_correspondences::<f64>("0 0 0 1 1 1\n# c\n1 2 3 4 5 6\n").unwrap();
        assert_eq!(c.len(), 2);
        let mut buf = Vec::new();
        write_correspondences(&c, &mut buf).unwrap();
        assert_eq!(parse_correspondences::<f64>(std::str::from_utf8(&buf).unwrap()).unwrap(), c);
        assert!(parse_correspondences::<f64>("0 0 0 1 1\n").is_err());
    }

    #[test]
    fn format_names() {
        assert_eq!("xyz-ascii".parse::<CloudFormat>().unwrap(), CloudFormat::XyzAscii);
        assert_eq!(CloudFormat::from_path(Path::new("a.PLY")).unwrap(), CloudFormat::PlyAscii);
        assert!(CloudFormat::from_path(Path::new("a.pcd")).is_err());
        assert!("ply-binary".parse::<CloudFormat>().is_err());
    }
}
