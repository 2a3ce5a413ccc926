//! Binary field files and CSV export.
//!
//! Layout (little-endian): magic `PBF1`, `u32` rank, per axis
//! `{f64 min, f64 max, u64 n}`, `u8` kind (0 real `f64`, 1 complex interleaved
//! `f64` pairs), `f64` time, then the payload row-major with x fastest.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{Amplitude, PhaseDistribution};
use crate::grid::{Boundary, PhaseSpaceGrid, SpatialGrid};
use crate::wigner::TransformField;

pub const MAGIC: &[u8; 4] = b"PBF1";

#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Amplitude(Amplitude),
    Phase(PhaseDistribution),
}

impl From<Amplitude> for Field {
    fn from(a: Amplitude) -> Self {
        Field::Amplitude(a)
    }
}

impl From<PhaseDistribution> for Field {
    fn from(w: PhaseDistribution) -> Self {
        Field::Phase(w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub n: u64,
}

/// Decoded file contents before interpretation.
#[derive(Debug, Clone, PartialEq)]
pub struct RawField {
    pub axes: Vec<Axis>,
    pub time: f64,
    pub values: Vec<Complex64>,
}

fn all_real(values: &[Complex64]) -> bool {
    values.iter().all(|v| v.im.to_bits() == 0)
}

pub fn encode(axes: &[Axis], time: f64, values: &[Complex64]) -> Vec<u8> {
    let real = all_real(values);
    let mut out = Vec::with_capacity(32 + values.len() * 16);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(axes.len() as u32).to_le_bytes());
    for a in axes {
        out.extend_from_slice(&a.min.to_le_bytes());
        out.extend_from_slice(&a.max.to_le_bytes());
        out.extend_from_slice(&a.n.to_le_bytes());
    }
    out.push(if real { 0 } else { 1 });
    out.extend_from_slice(&time.to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.re.to_le_bytes());
        if !real {
            out.extend_from_slice(&v.im.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, expected_total: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Length {
                path: self.path.to_path_buf(),
                expected: expected_total.max(self.pos + n),
                found: self.buf.len(),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, 0)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, 0)?.try_into().unwrap()))
    }
}

pub fn decode(buf: &[u8], path: &Path) -> Result<RawField> {
    let fmt = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    let mut r = Reader { buf, pos: 0, path };
    if r.take(4, 0)? != MAGIC {
        return Err(fmt("magic number mismatch".into()));
    }
    let rank = u32::from_le_bytes(r.take(4, 0)?.try_into().unwrap());
    if rank != 1 && rank != 2 {
        return Err(fmt(format!("unsupported rank {rank}")));
    }
    let mut axes = Vec::new();
    for _ in 0..rank {
        axes.push(Axis {
            min: r.f64()?,
            max: r.f64()?,
            n: r.u64()?,
        });
    }
    let kind = r.take(1, 0)?[0];
    if kind > 1 {
        return Err(fmt(format!("unknown payload kind {kind}")));
    }
    let time = r.f64()?;
    let count = axes
        .iter()
        .try_fold(1usize, |acc, a| acc.checked_mul(a.n as usize))
        .ok_or_else(|| fmt("axis sizes overflow".into()))?;
    let width = if kind == 0 { 8 } else { 16 };
    let expected = r.pos + count * width;
    if buf.len() != expected {
        return Err(Error::Length {
            path: path.to_path_buf(),
            expected,
            found: buf.len(),
        });
    }
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        let re = r.f64()?;
        let im = if kind == 1 { r.f64()? } else { 0.0 };
        values.push(Complex64::new(re, im));
    }
    Ok(RawField { axes, time, values })
}

fn spatial_axis(g: &SpatialGrid) -> Axis {
    Axis {
        min: g.x_min(),
        max: g.x_max(),
        n: g.len() as u64,
    }
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

pub fn save_field(field: &Field, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = match field {
        Field::Amplitude(a) => encode(&[spatial_axis(a.grid())], a.time(), a.values()),
        Field::Phase(w) => {
            let g = w.grid();
            let p_axis = Axis {
                min: g.p_min(),
                max: g.p_max(),
                n: g.n_p() as u64,
            };
            encode(&[spatial_axis(g.spatial()), p_axis], w.time(), w.values())
        }
    };
    write_bytes(path, &bytes)
}

fn read_raw(path: &Path) -> Result<RawField> {
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&buf, path)
}

fn spatial_from_axis(a: &Axis) -> Result<SpatialGrid> {
    // the format carries no boundary tag; loaded grids are periodic
    SpatialGrid::new(a.min, a.max, a.n as usize, Boundary::Periodic)
}

/// Load an amplitude (rank 1) or phase-space distribution (rank 2).
///
/// Amplitudes are returned as stored; normalization is not re-checked.
pub fn load_field(path: impl AsRef<Path>) -> Result<Field> {
    let path = path.as_ref();
    let raw = read_raw(path)?;
    let spatial = spatial_from_axis(&raw.axes[0])?;
    match raw.axes.len() {
        1 => Ok(Field::Amplitude(Amplitude::unchecked(spatial, raw.values, raw.time)?)),
        _ => {
            let pa = raw.axes[1];
            let grid = PhaseSpaceGrid::from_axes(spatial, pa.n as usize, pa.min, pa.max)?;
            Ok(Field::Phase(PhaseDistribution::new(grid, raw.values, raw.time)?))
        }
    }
}

/// Save a `T[W](x, y)` field; the second axis holds `y` metadata.
pub fn save_transform(t: &TransformField, path: impl AsRef<Path>) -> Result<()> {
    let g = t.grid();
    let y_axis = Axis {
        min: g.y(0),
        max: g.y(0) + g.spatial().length(),
        n: g.n_p() as u64,
    };
    write_bytes(
        path.as_ref(),
        &encode(&[spatial_axis(g.spatial()), y_axis], t.time(), t.values()),
    )
}

pub fn load_transform(path: impl AsRef<Path>, alpha: f64) -> Result<TransformField> {
    let path = path.as_ref();
    let raw = read_raw(path)?;
    if raw.axes.len() != 2 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            reason: "transform fields are rank 2".into(),
        });
    }
    let spatial = spatial_from_axis(&raw.axes[0])?;
    let grid = PhaseSpaceGrid::new(
        spatial,
        raw.axes[1].n as usize,
        crate::grid::ActionConstant::new(alpha)?,
    )?;
    TransformField::new(grid, raw.values, raw.time)
}

/// Format like C's `%.17g`.
pub fn fmt_g17(v: f64) -> String {
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    const P: i32 = 17;
    let sci = format!("{:.*e}", (P - 1) as usize, v);
    let (mant, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if exp < -4 || exp >= P {
        let mant = strip_zeros(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (P - 1 - exp) as usize;
        strip_zeros(&format!("{:.*}", decimals, v)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// CSV with header `x,re[,im]` (imaginary column only for complex data).
pub fn amplitude_csv(a: &Amplitude) -> String {
    let complex = !all_real(a.values());
    let mut s = String::from(if complex { "x,re,im\n" } else { "x,re\n" });
    for (i, v) in a.values().iter().enumerate() {
        s.push_str(&fmt_g17(a.grid().x(i)));
        s.push(',');
        s.push_str(&fmt_g17(v.re));
        if complex {
            s.push(',');
            s.push_str(&fmt_g17(v.im));
        }
        s.push('\n');
    }
    s
}

/// CSV with header `x,p,re[,im]`.
pub fn phase_csv(w: &PhaseDistribution) -> String {
    let complex = !all_real(w.values());
    let g = w.grid();
    let mut s = String::from(if complex { "x,p,re,im\n" } else { "x,p,re\n" });
    for ip in 0..g.n_p() {
        for ix in 0..g.n_x() {
            let v = w.at(ix, ip);
            s.push_str(&format!("{},{},{}", fmt_g17(g.x(ix)), fmt_g17(g.p(ip)), fmt_g17(v.re)));
            if complex {
                s.push(',');
                s.push_str(&fmt_g17(v.im));
            }
            s.push('\n');
        }
    }
    s
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    write_bytes(path.as_ref(), text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::gaussian_packet;
    use crate::grid::ActionConstant;

    #[test]
    fn g17_matches_c_printf() {
        assert_eq!(fmt_g17(0.1), "0.10000000000000001");
        assert_eq!(fmt_g17(1.0), "1");
        assert_eq!(fmt_g17(-2.5), "-2.5");
        assert_eq!(fmt_g17(1e-5), "1.0000000000000001e-05");
        assert_eq!(fmt_g17(123456789.0), "123456789");
        assert_eq!(fmt_g17(1e20), "1e+20");
        assert_eq!(fmt_g17(0.7071067811865476), "0.70710678118654757");
    }

    #[test]
    fn amplitude_round_trip_and_idempotent_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let g = SpatialGrid::centered(5.0, 64).unwrap();
        let psi = gaussian_packet(g, 0.3, 1.0, 0.8, 1.0).unwrap().with_time(0.25);
        let p1 = dir.path().join("a.pbf");
        let p2 = dir.path().join("b.pbf");
        save_field(&psi.clone().into(), &p1).unwrap();
        let back = load_field(&p1).unwrap();
        assert_eq!(back, Field::Amplitude(psi));
        save_field(&back, &p2).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    }

    #[test]
    fn phase_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let s = SpatialGrid::centered(4.0, 16).unwrap();
        let g = PhaseSpaceGrid::new(s, 32, ActionConstant::new(0.3).unwrap()).unwrap();
        let w = PhaseDistribution::from_fn(g, |x, p| (-(x * x) - p * p).exp() * (1.0 + 0.1 * x));
        let path = dir.path().join("w.pbf");
        save_field(&w.clone().into(), &path).unwrap();
        match load_field(&path).unwrap() {
            Field::Phase(back) => {
                assert_eq!(back.values(), w.values());
                assert_eq!(back.grid().p_max(), w.grid().p_max());
                assert_eq!(w.linf_distance(&back), 0.0);
            }
            other => panic!("wrong kind {other:?}"),
        }
    }

    #[test]
    fn error_paths() {
        let dir = tempfile::tempdir().unwrap();
        let g = SpatialGrid::centered(5.0, 8).unwrap();
        let psi = gaussian_packet(g, 0.0, 0.0, 1.0, 1.0).unwrap();

        let bad = dir.path().join("missing").join("x.pbf");
        let err = save_field(&psi.clone().into(), &bad).unwrap_err();
        assert!(err.to_string().contains("missing"), "{err}");

        let mut bytes = encode(&[spatial_axis(&g)], 0.0, psi.values());
        let p = dir.path().join("m.pbf");
        bytes[0] = b'X';
        fs::write(&p, &bytes).unwrap();
        assert!(matches!(load_field(&p), Err(Error::Format { .. })));

        let mut bytes = encode(&[spatial_axis(&g)], 0.0, psi.values());
        bytes.truncate(bytes.len() - 3);
        fs::write(&p, &bytes).unwrap();
        assert!(matches!(load_field(&p), Err(Error::Length { .. })));

        let ax = Axis { min: -1.0, max: 1.0, n: 12 };
        let bytes = encode(&[ax], 0.0, &vec![Complex64::new(1.0, 0.0); 12]);
        fs::write(&p, &bytes).unwrap();
        assert!(matches!(load_field(&p), Err(Error::Validation(_))));
    }

    #[test]
    fn csv_header() {
        let g = SpatialGrid::centered(5.0, 8).unwrap();
        let psi = gaussian_packet(g, 0.0, 1.0, 1.0, 1.0).unwrap();
        let csv = amplitude_csv(&psi);
        assert!(csv.starts_with("x,re,im\n"));
        assert_eq!(csv.lines().count(), 9);
    }
}
