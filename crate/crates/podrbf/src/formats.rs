//! On-disk artifacts.
//!
//! * `samples.csv`: `#`-prefixed metadata lines (strategy, seed, box) then
//!   one row per point.
//! * `snapshots.bin`: `"SNAP"`, `u32 m`, `u32 n_s`, `u32 version`, then
//!   `m · n_s` little-endian `f64` in row-major order.
//! * `snapshots.csv`: one row per stacked entry, one column per sample.
//! * `surrogate.bin`: `"SURR"` dump of the basis, coefficients, centers
//!   and metadata.
//! * `spectrum.csv`: singular values and cumulative energy.
//!
//! Floats are printed in shortest round-trip form so text outputs are
//! byte-stable and reload exactly.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use podrbf_core::integrator::{TimeGrid, Trajectory};
use podrbf_core::pod::cumulative_energy;
use podrbf_core::problem::Bounds;
use podrbf_core::rbf::{KernelKind, RbfCoefficients};
use podrbf_core::sampling::{SampleSet, Strategy};
use podrbf_core::snapshot::SnapshotMatrix;
use podrbf_core::surrogate::Surrogate;

use crate::error::CliError;

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"SNAP";
pub const SURROGATE_MAGIC: &[u8; 4] = b"SURR";
pub const FORMAT_VERSION: u32 = 1;

fn create(path: &Path) -> Result<io::BufWriter<fs::File>, CliError> {
    fs::File::create(path)
        .map(io::BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::format(path, e)
}

pub fn write_samples(path: &Path, set: &SampleSet) -> Result<(), CliError> {
    let mut out = create(path)?;
    let io_err = |e| CliError::io(path, e);
    writeln!(out, "# strategy = {}", set.strategy.label()).map_err(io_err)?;
    writeln!(out, "# seed = {}", set.seed).map_err(io_err)?;
    writeln!(out, "# lower = {}", join(set.bounds.lower())).map_err(io_err)?;
    writeln!(out, "# upper = {}", join(set.bounds.upper())).map_err(io_err)?;
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<String> = (1..=set.dim()).map(|j| format!("b{j}")).collect();
    w.write_record(&header).map_err(csv_err(path))?;
    for i in 0..set.len() {
        w.write_record(set.point(i).iter().map(f64::to_string)).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err)
}

fn parse_floats(path: &Path, text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| CliError::format(path, format!("`{v}`: {e}"))))
        .collect()
}

pub fn read_samples(path: &Path) -> Result<SampleSet, CliError> {
    let text = read_text(path)?;
    let meta = |key: &str| -> Result<&str, CliError> {
        text.lines()
            .filter_map(|l| l.strip_prefix('#'))
            .filter_map(|l| l.split_once('='))
            .find(|(k, _)| k.trim() == key)
            .map(|(_, v)| v.trim())
            .ok_or_else(|| CliError::format(path, format!("missing `# {key} = …` line")))
    };
    let strategy = Strategy::from_label(meta("strategy")?)
        .ok_or_else(|| CliError::format(path, "unknown sampling strategy"))?;
    let seed = meta("seed")?
        .parse()
        .map_err(|e| CliError::format(path, format!("seed: {e}")))?;
    let bounds = Bounds::new(parse_floats(path, meta("lower")?)?, parse_floats(path, meta("upper")?)?)
        .map_err(|e| CliError::format(path, e))?;

    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let mut values = Vec::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(csv_err(path))?;
        if record.len() != bounds.dim() {
            return Err(CliError::format(path, format!("row {} has {} columns", rows + 1, record.len())));
        }
        for v in record.iter() {
            values.push(v.parse::<f64>().map_err(|e| CliError::format(path, format!("`{v}`: {e}")))?);
        }
        rows += 1;
    }
    Ok(SampleSet {
        points: DMatrix::from_row_slice(rows, bounds.dim(), &values),
        strategy,
        seed,
        bounds,
    })
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_f64s<'a>(buf: &mut Vec<u8>, values: impl IntoIterator<Item = &'a f64>) {
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

/// Row-major iteration over a column-major matrix.
fn row_major(m: &DMatrix<f64>) -> impl Iterator<Item = &f64> + '_ {
    (0..m.nrows()).flat_map(move |i| (0..m.ncols()).map(move |j| &m[(i, j)]))
}

fn to_u32(path: &Path, v: usize) -> Result<u32, CliError> {
    u32::try_from(v).map_err(|_| CliError::format(path, format!("dimension {v} exceeds u32")))
}

/// Cursor over a little-endian byte buffer.
struct Bytes<'a> {
    path: &'a Path,
    data: &'a [u8],
}

impl<'a> Bytes<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CliError> {
        if self.data.len() < n {
            return Err(CliError::format(self.path, "truncated file"));
        }
        let (head, tail) = self.data.split_at(n);
        self.data = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32, CliError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn usize(&mut self) -> Result<usize, CliError> {
        Ok(self.u32()? as usize)
    }

    fn f64(&mut self) -> Result<f64, CliError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, CliError> {
        (0..n).map(|_| self.f64()).collect()
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<DMatrix<f64>, CliError> {
        let values = self.f64s(rows * cols)?;
        Ok(DMatrix::from_row_slice(rows, cols, &values))
    }

    fn header(&mut self, magic: &[u8; 4]) -> Result<(), CliError> {
        if self.take(4)? != magic {
            return Err(CliError::format(self.path, "bad magic bytes"));
        }
        Ok(())
    }

    fn version(&mut self) -> Result<(), CliError> {
        let v = self.u32()?;
        if v != FORMAT_VERSION {
            return Err(CliError::format(self.path, format!("unsupported version {v}")));
        }
        Ok(())
    }

    fn finish(self) -> Result<(), CliError> {
        if self.data.is_empty() {
            Ok(())
        } else {
            Err(CliError::format(self.path, format!("{} trailing bytes", self.data.len())))
        }
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

fn write_bytes(path: &Path, buf: &[u8]) -> Result<(), CliError> {
    fs::write(path, buf).map_err(|e| CliError::io(path, e))
}

pub fn encode_snapshots(path: &Path, data: &DMatrix<f64>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::with_capacity(16 + 8 * data.len());
    buf.extend_from_slice(SNAPSHOT_MAGIC);
    put_u32(&mut buf, to_u32(path, data.nrows())?);
    put_u32(&mut buf, to_u32(path, data.ncols())?);
    put_u32(&mut buf, FORMAT_VERSION);
    put_f64s(&mut buf, row_major(data));
    Ok(buf)
}

pub fn write_snapshots_bin(path: &Path, data: &DMatrix<f64>) -> Result<(), CliError> {
    write_bytes(path, &encode_snapshots(path, data)?)
}

pub fn read_snapshots_bin(path: &Path) -> Result<DMatrix<f64>, CliError> {
    let data = read_bytes(path)?;
    let mut b = Bytes { path, data: &data };
    b.header(SNAPSHOT_MAGIC)?;
    let m = b.usize()?;
    let n_s = b.usize()?;
    b.version()?;
    let out = b.matrix(m, n_s)?;
    b.finish()?;
    Ok(out)
}

pub fn write_snapshots_csv(path: &Path, y: &SnapshotMatrix) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["t".to_string(), "state".to_string()];
    header.extend((1..=y.n_s()).map(|j| format!("s{j}")));
    w.write_record(&header).map_err(csv_err(path))?;
    for r in 0..y.m() {
        let (i, state) = y.layout.position(r);
        let mut row = vec![y.grid.time(i).to_string(), (state + 1).to_string()];
        row.extend(y.data.row(r).iter().map(f64::to_string));
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn kernel_code(kind: KernelKind) -> u32 {
    match kind {
        KernelKind::LinearSpline => 0,
        KernelKind::CubicSpline => 1,
    }
}

/// Layout after the magic and version:
/// `u32` kernel, m, k, n_s, dim, n_y, n_t, n_σ; `f64` t0, T, eps_pod,
/// condition; lower and upper bounds; Φ, D and the centers row-major; σ.
pub fn encode_surrogate(path: &Path, s: &Surrogate) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    buf.extend_from_slice(SURROGATE_MAGIC);
    put_u32(&mut buf, FORMAT_VERSION);
    put_u32(&mut buf, kernel_code(s.kind()));
    for v in [s.m(), s.k, s.n_s(), s.dim(), s.layout.n_y, s.grid.n_t(), s.sigma.len()] {
        put_u32(&mut buf, to_u32(path, v)?);
    }
    put_f64s(&mut buf, &[s.grid.t0(), s.grid.t_end(), s.eps_pod, s.coeffs.condition]);
    put_f64s(&mut buf, s.training_bounds.lower());
    put_f64s(&mut buf, s.training_bounds.upper());
    put_f64s(&mut buf, row_major(&s.phi));
    put_f64s(&mut buf, row_major(&s.coeffs.d));
    put_f64s(&mut buf, row_major(&s.coeffs.centers));
    put_f64s(&mut buf, &s.sigma);
    Ok(buf)
}

pub fn write_surrogate(path: &Path, s: &Surrogate) -> Result<(), CliError> {
    write_bytes(path, &encode_surrogate(path, s)?)
}

pub fn read_surrogate(path: &Path) -> Result<Surrogate, CliError> {
    let data = read_bytes(path)?;
    let mut b = Bytes { path, data: &data };
    b.header(SURROGATE_MAGIC)?;
    b.version()?;
    let kind = match b.u32()? {
        0 => KernelKind::LinearSpline,
        1 => KernelKind::CubicSpline,
        c => return Err(CliError::format(path, format!("unknown kernel code {c}"))),
    };
    let mut dims = [0usize; 7];
    for d in &mut dims {
        *d = b.usize()?;
    }
    let [m, k, n_s, dim, n_y, n_t, n_sigma] = dims;
    let (t0, t_end, eps_pod, condition) = (b.f64()?, b.f64()?, b.f64()?, b.f64()?);
    let lower = b.f64s(dim)?;
    let upper = b.f64s(dim)?;
    let phi = b.matrix(m, k)?;
    let d = b.matrix(k, n_s)?;
    let centers = b.matrix(n_s, dim)?;
    let sigma = b.f64s(n_sigma)?;
    b.finish()?;

    let bad = |e: podrbf_core::Error| CliError::format(path, e);
    let grid = TimeGrid::new(t0, t_end, n_t).map_err(bad)?;
    let bounds = Bounds::new(lower, upper).map_err(bad)?;
    let coeffs = RbfCoefficients {
        d,
        centers,
        kind,
        condition,
    };
    Surrogate::from_parts(phi, coeffs, grid, n_y, bounds, eps_pod, sigma).map_err(bad)
}

pub fn write_spectrum(path: &Path, sigma: &[f64]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["mode", "sigma", "energy"]).map_err(csv_err(path))?;
    for (i, (s, e)) in sigma.iter().zip(cumulative_energy(sigma)).enumerate() {
        w.write_record([(i + 1).to_string(), s.to_string(), e.to_string()])
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["t".to_string()];
    header.extend((1..=traj.n_y()).map(|j| format!("y{j}")));
    header.extend((1..=traj.controls.ncols()).map(|j| format!("u{j}")));
    w.write_record(&header).map_err(csv_err(path))?;
    for i in 0..traj.grid.n_t() {
        let row = std::iter::once(traj.grid.time(i))
            .chain(traj.state(i).iter().copied())
            .chain(traj.control(i).iter().copied())
            .map(|v| v.to_string());
        w.write_record(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Writes any serializable rows as a CSV table with a header.
pub fn write_table<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for row in rows {
        w.serialize(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::format(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use podrbf_core::sampling::slhs_sample;
    use proptest::prelude::*;

    #[test]
    fn snapshot_header_layout() {
        let data = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let buf = encode_snapshots(Path::new("x"), &data).unwrap();
        assert_eq!(&buf[..4], b"SNAP");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), FORMAT_VERSION);
        assert_eq!(buf.len(), 16 + 6 * 8);
        // Row-major: second value is entry (0, 1).
        assert_eq!(f64::from_le_bytes(buf[24..32].try_into().unwrap()), 2.0);
    }

    #[test]
    fn samples_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("samples.csv");
        let bounds = Bounds::new(vec![-0.55, -1.037], vec![-0.3, -0.787]).unwrap();
        let set = slhs_sample(9, &bounds, 4).unwrap();
        write_samples(&path, &set).unwrap();
        assert_eq!(read_samples(&path).unwrap(), set);
    }

    #[test]
    fn corrupt_snapshot_files_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.bin");
        let data = DMatrix::from_element(2, 2, 1.5);
        let good = encode_snapshots(&path, &data).unwrap();
        for bad in [&good[..good.len() - 1], &good[..10], b"SNAQ\0\0\0\0\0\0\0\0\x01\0\0\0".as_slice()] {
            fs::write(&path, bad).unwrap();
            assert!(matches!(read_snapshots_bin(&path), Err(CliError::Format { .. })));
        }
        let mut extra = good.clone();
        extra.push(0);
        fs::write(&path, &extra).unwrap();
        assert!(read_snapshots_bin(&path).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn snapshot_binary_round_trip(m in 1usize..12, n in 1usize..6, seed in any::<u64>()) {
            let data = DMatrix::from_fn(m, n, |i, j| {
                let x = (seed ^ ((i * 31 + j) as u64)).wrapping_mul(0x9E37_79B9_7F4A_7C15);
                f64::from_bits(x >> 12 | 0x3FF0_0000_0000_0000) - 1.5
            });
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("s.bin");
            write_snapshots_bin(&path, &data).unwrap();
            prop_assert_eq!(read_snapshots_bin(&path).unwrap(), data);
        }
    }
}
