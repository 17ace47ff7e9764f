//! `NLOSH1` impulse-response datasets.
//!
//! Layout (little endian): magic `b"NLOSH1\0"`, `dt: f64`, `n_u, n_v, n_bins: u32`,
//! relay `grid_origin, step_u, step_v, normal, laser_point` as `3 x f64` each,
//! then `n_u * n_v * n_bins` `f32` values in `[s_u][s_v][t]` order.

use std::path::Path;

use nalgebra::Unit;

use crate::error::{Error, Result};
use crate::render::ImpulseResponse;
use crate::scene::RelayAperture;
use crate::Vec3;

pub const MAGIC: &[u8; 7] = b"NLOSH1\0";
const HEADER_LEN: usize = 7 + 8 + 3 * 4 + 5 * 24;

pub fn encode_nlosh1(h: &ImpulseResponse) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * h.values.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&h.dt.to_le_bytes());
    for n in [h.relay.n_u, h.relay.n_v, h.n_bins] {
        out.extend_from_slice(&(n as u32).to_le_bytes());
    }
    let r = &h.relay;
    for v in [r.grid_origin, r.step_u, r.step_v, r.normal.into_inner(), r.laser_point] {
        for c in v.iter() {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    for v in &h.values {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Option<&[u8]> {
        let s = self.buf.get(self.pos..self.pos + n)?;
        self.pos += n;
        Some(s)
    }
    fn f64(&mut self) -> Option<f64> {
        Some(f64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }
    fn u32(&mut self) -> Option<u32> {
        Some(u32::from_le_bytes(self.take(4)?.try_into().ok()?))
    }
    fn vec3(&mut self) -> Option<Vec3> {
        Some(Vec3::new(self.f64()?, self.f64()?, self.f64()?))
    }
}

pub fn decode_nlosh1(bytes: &[u8], path: &Path) -> Result<ImpulseResponse> {
    let bad = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    if bytes.len() < HEADER_LEN || &bytes[..7] != MAGIC {
        return Err(bad("missing NLOSH1 magic or truncated header".into()));
    }
    let mut r = Reader { buf: bytes, pos: 7 };
    let truncated = || bad("truncated header".into());
    let dt = r.f64().ok_or_else(truncated)?;
    let n_u = r.u32().ok_or_else(truncated)? as usize;
    let n_v = r.u32().ok_or_else(truncated)? as usize;
    let n_bins = r.u32().ok_or_else(truncated)? as usize;
    let grid_origin = r.vec3().ok_or_else(truncated)?;
    let step_u = r.vec3().ok_or_else(truncated)?;
    let step_v = r.vec3().ok_or_else(truncated)?;
    let normal = r.vec3().ok_or_else(truncated)?;
    let laser_point = r.vec3().ok_or_else(truncated)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(bad(format!("dt = {dt} is not a positive number")));
    }
    if !(normal.norm() > 0.0) {
        return Err(bad("relay normal is zero".into()));
    }
    let count = n_u
        .checked_mul(n_v)
        .and_then(|x| x.checked_mul(n_bins))
        .ok_or_else(|| bad("dimensions overflow".into()))?;
    let expected = HEADER_LEN + 4 * count;
    if bytes.len() != expected {
        return Err(bad(format!(
            "expected {expected} bytes for {n_u}x{n_v}x{n_bins} values, found {}",
            bytes.len()
        )));
    }
    let values: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
        return Err(bad(format!("value {} at index {i} is negative or not finite", values[i])));
    }
    let relay = RelayAperture {
        grid_origin,
        step_u,
        step_v,
        n_u,
        n_v,
        normal: Unit::new_normalize(normal),
        laser_point,
    };
    relay.validate().map_err(|e| bad(e.to_string()))?;
    ImpulseResponse::from_values(relay, dt, n_bins, values).map_err(|e| bad(e.to_string()))
}

pub fn write_nlosh1(path: impl AsRef<Path>, h: &ImpulseResponse) -> Result<()> {
    std::fs::write(path, encode_nlosh1(h))?;
    Ok(())
}

pub fn read_nlosh1(path: impl AsRef<Path>) -> Result<ImpulseResponse> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    decode_nlosh1(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Point3;

    fn sample() -> ImpulseResponse {
        let relay = RelayAperture::centered(Point3::new(0.0, 0.0, 0.0), 2.0, 1.0, 3, 2);
        let values = (0..6 * 5).map(|i| (i as f64) * 0.25).collect();
        ImpulseResponse::from_values(relay, 1e-11, 5, values).unwrap()
    }

    #[test]
    fn round_trip() {
        let h = sample();
        let back = decode_nlosh1(&encode_nlosh1(&h), Path::new("mem")).unwrap();
        assert_eq!(back, h);
    }

    #[test]
    fn header_layout() {
        let b = encode_nlosh1(&sample());
        assert_eq!(&b[..7], b"NLOSH1\0");
        assert_eq!(f64::from_le_bytes(b[7..15].try_into().unwrap()), 1e-11);
        assert_eq!(u32::from_le_bytes(b[15..19].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(b[19..23].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(b[23..27].try_into().unwrap()), 5);
        assert_eq!(b.len(), HEADER_LEN + 4 * 30);
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        let good = encode_nlosh1(&sample());
        let p = Path::new("x.nlosh");
        assert!(decode_nlosh1(&good[..good.len() - 1], p).is_err());
        assert!(decode_nlosh1(b"NLOSH2\0", p).is_err());
        let mut neg = good.clone();
        let n = neg.len();
        neg[n - 4..].copy_from_slice(&(-1.0f32).to_le_bytes());
        assert!(matches!(decode_nlosh1(&neg, p), Err(Error::Format { .. })));
    }
}
