//! Binary policy-table format.
//!
//! All integers and floats are little-endian:
//!
//! ```text
//! "AVDP"                      magic
//! u32                         version (1)
//! u32                         dimension count D (4: h, dh_own, dh_int, tau)
//! u32 × D                     axis sizes
//! f64 × Σ sizes               axis coordinates, axis by axis
//! u32                         advisory count A
//! u32 × A                     advisory codes (enum order of `Advisory`)
//! u32                         parameter count P (11)
//! f64 × P                     discount, nmac penalty, alert, reversal and
//!                             strengthening costs, ownship accel, intruder
//!                             accel, intruder accel probability, nmac
//!                             vertical, step, solver residual
//! u32                         solver iterations
//! f32 × nodes·A·A             Q values, grid-major, then prev, then action
//! u32                         CRC-32 of every preceding byte
//! ```

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::mdp::{Compliance, MdpSpec, RewardWeights};
use super::table::PolicyTable;
use super::{Advisory, CasError};

pub const TABLE_MAGIC: &[u8; 4] = b"AVDP";
pub const TABLE_VERSION: u32 = 1;
const PARAM_COUNT: u32 = 11;

#[derive(Debug, Error)]
pub enum TableIoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not a policy table (magic {0:?})")]
    BadMagic([u8; 4]),
    #[error("unsupported policy table version {0}")]
    UnsupportedVersion(u32),
    #[error("policy table truncated: needed {needed} bytes, found {available}")]
    Truncated { needed: usize, available: usize },
    #[error("policy table checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    Checksum { stored: u32, computed: u32 },
    #[error("malformed policy table: {0}")]
    Format(String),
    #[error(transparent)]
    Spec(#[from] CasError),
}

pub fn write_table<W: Write>(table: &PolicyTable, mut out: W) -> Result<(), TableIoError> {
    let spec = &table.spec;
    let axes = [&spec.h, &spec.dh_own, &spec.dh_int, &spec.tau];
    let mut buf = Vec::with_capacity(64 + table.q.len() * 4);
    buf.extend_from_slice(TABLE_MAGIC);
    buf.extend_from_slice(&TABLE_VERSION.to_le_bytes());
    buf.extend_from_slice(&(axes.len() as u32).to_le_bytes());
    for axis in axes {
        buf.extend_from_slice(&(axis.len() as u32).to_le_bytes());
    }
    for axis in axes {
        for v in axis.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf.extend_from_slice(&(spec.advisories.len() as u32).to_le_bytes());
    for a in &spec.advisories {
        buf.extend_from_slice(&(*a as u32).to_le_bytes());
    }
    let r = &spec.rewards;
    let c = &spec.compliance;
    let params = [
        spec.discount,
        r.nmac_penalty,
        r.alert_cost,
        r.reversal_cost,
        r.strengthen_cost,
        c.ownship_accel,
        c.intruder_accel,
        c.intruder_accel_prob,
        spec.nmac_vertical,
        spec.step,
        table.residual,
    ];
    buf.extend_from_slice(&PARAM_COUNT.to_le_bytes());
    for p in params {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    buf.extend_from_slice(&table.iterations.to_le_bytes());
    for q in &table.q {
        buf.extend_from_slice(&q.to_le_bytes());
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    out.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    /// Bytes available for content (the trailing CRC excluded).
    limit: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], TableIoError> {
        let end = self.pos.checked_add(n).ok_or_else(|| TableIoError::Format("size overflow".into()))?;
        if end > self.limit {
            return Err(TableIoError::Truncated { needed: end + 4, available: self.bytes.len() });
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, TableIoError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, TableIoError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Parses a complete table image.
pub fn read_table<R: Read>(mut input: R) -> Result<PolicyTable, TableIoError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    parse_table(&bytes)
}

fn parse_table(bytes: &[u8]) -> Result<PolicyTable, TableIoError> {
    if bytes.len() < 4 {
        return Err(TableIoError::Truncated { needed: 4, available: bytes.len() });
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if &magic != TABLE_MAGIC {
        return Err(TableIoError::BadMagic(magic));
    }
    let mut cur = Cursor { bytes, pos: 4, limit: bytes.len().saturating_sub(4) };
    let version = cur.u32()?;
    if version != TABLE_VERSION {
        return Err(TableIoError::UnsupportedVersion(version));
    }
    let dims = cur.u32()?;
    if dims != 4 {
        return Err(TableIoError::Format(format!("expected 4 dimensions, found {dims}")));
    }
    let sizes: Vec<usize> = (0..dims).map(|_| cur.u32().map(|s| s as usize)).collect::<Result<_, _>>()?;
    let mut axes = Vec::with_capacity(4);
    for &n in &sizes {
        if n.saturating_mul(8) > cur.limit {
            return Err(TableIoError::Truncated { needed: n.saturating_mul(8), available: bytes.len() });
        }
        axes.push((0..n).map(|_| cur.f64()).collect::<Result<Vec<f64>, _>>()?);
    }
    let na = cur.u32()? as usize;
    if na == 0 || na > Advisory::ALL.len() {
        return Err(TableIoError::Format(format!("advisory count {na}")));
    }
    let mut advisories = Vec::with_capacity(na);
    for _ in 0..na {
        let code = cur.u32()? as usize;
        let adv = *Advisory::ALL
            .get(code)
            .ok_or_else(|| TableIoError::Format(format!("unknown advisory code {code}")))?;
        advisories.push(adv);
    }
    let np = cur.u32()?;
    if np != PARAM_COUNT {
        return Err(TableIoError::Format(format!("expected {PARAM_COUNT} parameters, found {np}")));
    }
    let mut p = [0.0; PARAM_COUNT as usize];
    for slot in p.iter_mut() {
        *slot = cur.f64()?;
    }
    let iterations = cur.u32()?;

    let nodes = sizes.iter().try_fold(1usize, |acc, &s| acc.checked_mul(s));
    let q_len = nodes
        .and_then(|n| n.checked_mul(na * na))
        .ok_or_else(|| TableIoError::Format("table dimensions overflow".into()))?;
    let q_bytes = cur.take(q_len.checked_mul(4).ok_or_else(|| TableIoError::Format("size overflow".into()))?)?;
    if cur.pos != cur.limit {
        return Err(TableIoError::Format(format!("{} unexpected trailing bytes", cur.limit - cur.pos)));
    }
    let stored = u32::from_le_bytes(bytes[cur.limit..].try_into().unwrap());
    let computed = crc32fast::hash(&bytes[..cur.limit]);
    if stored != computed {
        return Err(TableIoError::Checksum { stored, computed });
    }
    let q = q_bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();

    let mut axes = axes.into_iter();
    let spec = MdpSpec {
        h: axes.next().unwrap(),
        dh_own: axes.next().unwrap(),
        dh_int: axes.next().unwrap(),
        tau: axes.next().unwrap(),
        advisories,
        discount: p[0],
        rewards: RewardWeights { nmac_penalty: p[1], alert_cost: p[2], reversal_cost: p[3], strengthen_cost: p[4] },
        compliance: Compliance { ownship_accel: p[5], intruder_accel: p[6], intruder_accel_prob: p[7] },
        nmac_vertical: p[8],
        step: p[9],
    };
    Ok(PolicyTable::new(spec, q, iterations, p[10])?)
}

/// Writes through a temporary file so a failed save never leaves a partial table.
pub fn save_table(table: &PolicyTable, path: &Path) -> Result<(), TableIoError> {
    let tmp = path.with_extension("avdp.partial");
    {
        let file = fs::File::create(&tmp)?;
        let mut w = io::BufWriter::new(file);
        write_table(table, &mut w)?;
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_table(path: &Path) -> Result<PolicyTable, TableIoError> {
    parse_table(&fs::read(path)?)
}

/// One CSV row per (node, previous advisory) with a Q column per action.
pub fn export_csv<W: Write>(table: &PolicyTable, mut out: W) -> io::Result<()> {
    let advs = &table.spec.advisories;
    write!(out, "h,dh_own,dh_int,tau,prev")?;
    for a in advs {
        write!(out, ",{a}")?;
    }
    writeln!(out)?;
    let grid = table.grid();
    for node in 0..grid.len() {
        let [h, dho, dhi, tau] = grid.point(node);
        for (pi, prev) in advs.iter().enumerate() {
            write!(out, "{h},{dho},{dhi},{tau},{prev}")?;
            for q in table.q_row(node, pi) {
                write!(out, ",{q}")?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cas::mdp::{build_mdp, AxisConfig, MdpConfig};

    fn table() -> PolicyTable {
        let spec = build_mdp(&MdpConfig {
            h: AxisConfig::Values(vec![-50.0, 0.0, 50.0]),
            dh_own: AxisConfig::Values(vec![-1.0, 1.0]),
            dh_int: AxisConfig::Values(vec![0.0]),
            tau: AxisConfig::Values(vec![0.0, 1.0, 2.0]),
            advisories: vec![Advisory::COC, Advisory::DND, Advisory::SCL2500],
            ..MdpConfig::default()
        })
        .unwrap();
        let q = (0..spec.q_len()).map(|i| (i as f32).sin()).collect();
        PolicyTable::new(spec, q, 7, 1.5e-9).unwrap()
    }

    fn image(t: &PolicyTable) -> Vec<u8> {
        let mut buf = Vec::new();
        write_table(t, &mut buf).unwrap();
        buf
    }

    #[test]
    fn round_trip_is_exact() {
        let t = table();
        let back = read_table(image(&t).as_slice()).unwrap();
        assert_eq!(back, t);
        assert_eq!(image(&back), image(&t));
    }

    #[test]
    fn truncation_detected() {
        let buf = image(&table());
        for cut in [2, 10, 40, buf.len() / 2, buf.len() - 5, buf.len() - 1] {
            assert!(
                matches!(read_table(&buf[..cut]), Err(TableIoError::Truncated { .. })),
                "cut at {cut}"
            );
        }
    }

    #[test]
    fn wrong_magic_and_version() {
        let mut buf = image(&table());
        buf[0] = b'X';
        assert!(matches!(read_table(buf.as_slice()), Err(TableIoError::BadMagic(_))));
        let mut buf = image(&table());
        buf[4] = 9;
        assert!(matches!(read_table(buf.as_slice()), Err(TableIoError::UnsupportedVersion(9))));
    }

    #[test]
    fn corruption_detected() {
        let mut buf = image(&table());
        let n = buf.len();
        buf[n - 20] ^= 0x40;
        assert!(matches!(read_table(buf.as_slice()), Err(TableIoError::Checksum { .. })));
        let mut buf = image(&table());
        buf.extend_from_slice(&[0, 0, 0, 0]);
        assert!(read_table(buf.as_slice()).is_err());
    }

    #[test]
    fn csv_shape() {
        let t = table();
        let mut out = Vec::new();
        export_csv(&t, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "h,dh_own,dh_int,tau,prev,COC,DND,SCL2500");
        assert_eq!(lines.len(), 1 + 18 * 3);
    }

    #[test]
    fn save_and_load_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("policy.avdp");
        let t = table();
        save_table(&t, &path).unwrap();
        assert_eq!(load_table(&path).unwrap(), t);
        assert!(!path.with_extension("avdp.partial").exists());
    }
}
