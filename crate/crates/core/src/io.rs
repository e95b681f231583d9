//! On-disk container: `<name>.bin` holds little-endian `f64` values in
//! frame-major, row-major order; `<name>.json` is the [`CubeHeader`] sidecar.
//! PSF stamps and 2-D maps use the same container with `t = 1`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cube::{AdiCube, Cube};
use crate::error::{Error, Result};
use crate::eval::roc::RocReport;
use crate::image::Image;
use crate::psf::{Normalization, PsfTemplate};

pub const DTYPE: &str = "f64le";
pub const ORDER: &str = "t-row-major";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeHeader {
    pub t: usize,
    pub h: usize,
    pub w: usize,
    pub angles_deg: Vec<f64>,
    pub center: [f64; 2],
    pub dtype: String,
    pub order: String,
}

impl CubeHeader {
    pub fn new(t: usize, h: usize, w: usize, angles_deg: Vec<f64>, center: (f64, f64)) -> Self {
        CubeHeader {
            t,
            h,
            w,
            angles_deg,
            center: [center.0, center.1],
            dtype: DTYPE.to_string(),
            order: ORDER.to_string(),
        }
    }

    fn validate(&self, path: &Path) -> Result<()> {
        let fail = |message: String| Error::Format {
            path: path.to_path_buf(),
            message,
        };
        if self.dtype != DTYPE {
            return Err(fail(format!("dtype must be \"{DTYPE}\", got \"{}\"", self.dtype)));
        }
        if self.order != ORDER {
            return Err(fail(format!("order must be \"{ORDER}\", got \"{}\"", self.order)));
        }
        if self.t == 0 || self.h == 0 || self.w == 0 {
            return Err(fail(format!(
                "dimensions must be positive, got t={} h={} w={}",
                self.t, self.h, self.w
            )));
        }
        if self.angles_deg.len() != self.t {
            return Err(fail(format!(
                "{} angles listed for t={}",
                self.angles_deg.len(),
                self.t
            )));
        }
        Ok(())
    }

    fn payload_bytes(&self) -> u64 {
        8 * (self.t as u64) * (self.h as u64) * (self.w as u64)
    }
}

/// `<stem>.bin` and `<stem>.json`.
pub fn container_paths(stem: impl AsRef<Path>) -> (PathBuf, PathBuf) {
    let stem = stem.as_ref();
    let with = |ext: &str| {
        let mut s = stem.as_os_str().to_os_string();
        s.push(ext);
        PathBuf::from(s)
    };
    (with(".bin"), with(".json"))
}

/// Reads and validates a header plus payload of any `t`.
pub fn load_container(bin_path: impl AsRef<Path>, json_path: impl AsRef<Path>) -> Result<(CubeHeader, Vec<f64>)> {
    let bin_path = bin_path.as_ref();
    let json_path = json_path.as_ref();
    let text = fs::read_to_string(json_path).map_err(|e| Error::io(json_path, e))?;
    let header: CubeHeader = serde_json::from_str(&text).map_err(|e| Error::Format {
        path: json_path.to_path_buf(),
        message: e.to_string(),
    })?;
    header.validate(json_path)?;

    let bytes = fs::read(bin_path).map_err(|e| Error::io(bin_path, e))?;
    let expected = header.payload_bytes();
    if bytes.len() as u64 != expected {
        return Err(Error::PayloadSize {
            path: bin_path.to_path_buf(),
            expected,
            actual: bytes.len() as u64,
        });
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            path: bin_path.to_path_buf(),
            index,
        });
    }
    Ok((header, values))
}

pub fn save_container(
    header: &CubeHeader,
    data: &[f64],
    bin_path: impl AsRef<Path>,
    json_path: impl AsRef<Path>,
) -> Result<()> {
    let bin_path = bin_path.as_ref();
    let json_path = json_path.as_ref();
    if header.t == 0 || header.h == 0 || header.w == 0 {
        return Err(Error::invalid("cannot save a container with an empty dimension"));
    }
    if data.len() != header.t * header.h * header.w || header.angles_deg.len() != header.t {
        return Err(Error::invalid("header does not describe the payload"));
    }
    let mut bytes = Vec::with_capacity(data.len() * 8);
    for v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(bin_path, bytes).map_err(|e| Error::io(bin_path, e))?;
    write_json(json_path, header)
}

pub fn load_cube(bin_path: impl AsRef<Path>, json_path: impl AsRef<Path>) -> Result<AdiCube> {
    let (header, data) = load_container(bin_path, json_path)?;
    let cube = Cube::new(header.t, header.h, header.w, data)?;
    AdiCube::with_center(cube, header.angles_deg, (header.center[0], header.center[1]))
}

pub fn save_cube(cube: &AdiCube, bin_path: impl AsRef<Path>, json_path: impl AsRef<Path>) -> Result<()> {
    let (t, h, w) = cube.shape();
    let header = CubeHeader::new(t, h, w, cube.angles_deg().to_vec(), cube.center());
    save_container(&header, cube.cube().data(), bin_path, json_path)
}

/// Loads a `t = 1` square, odd-sized stamp and rescales it to unit sum.
pub fn load_psf(bin_path: impl AsRef<Path>, json_path: impl AsRef<Path>) -> Result<PsfTemplate> {
    let json_path = json_path.as_ref();
    let (header, data) = load_container(bin_path, json_path)?;
    if header.t != 1 || header.h != header.w || header.h % 2 == 0 {
        return Err(Error::Format {
            path: json_path.to_path_buf(),
            message: format!(
                "PSF must be a single odd square frame, got t={} h={} w={}",
                header.t, header.h, header.w
            ),
        });
    }
    PsfTemplate::normalized(header.h, data, Normalization::UnitSum)
}

pub fn save_psf(psf: &PsfTemplate, bin_path: impl AsRef<Path>, json_path: impl AsRef<Path>) -> Result<()> {
    let k = psf.size();
    let c = psf.center() as f64;
    let header = CubeHeader::new(1, k, k, vec![0.0], (c, c));
    save_container(&header, psf.data(), bin_path, json_path)
}

/// Saves a 2-D map as a single-frame container.
pub fn save_image(img: &Image, center: (f64, f64), bin_path: impl AsRef<Path>, json_path: impl AsRef<Path>) -> Result<()> {
    let header = CubeHeader::new(1, img.height(), img.width(), vec![0.0], center);
    save_container(&header, img.data(), bin_path, json_path)
}

pub fn load_image(bin_path: impl AsRef<Path>, json_path: impl AsRef<Path>) -> Result<Image> {
    let json_path = json_path.as_ref();
    let (header, data) = load_container(bin_path, json_path)?;
    if header.t != 1 {
        return Err(Error::Format {
            path: json_path.to_path_buf(),
            message: format!("expected a single frame, got t={}", header.t),
        });
    }
    Image::new(header.h, header.w, data)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocSummary {
    pub auc: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

/// Writes the ROC curve as `threshold,fpr,tpr` CSV plus the `{auc, n_pos, n_neg}` summary.
pub fn save_roc(report: &RocReport, csv_path: impl AsRef<Path>, json_path: impl AsRef<Path>) -> Result<()> {
    let csv_path = csv_path.as_ref();
    let mut out = String::from("threshold,fpr,tpr\n");
    for p in report.points() {
        out.push_str(&format!("{},{},{}\n", p.threshold, p.fpr, p.tpr));
    }
    fs::write(csv_path, out).map_err(|e| Error::io(csv_path, e))?;
    let summary = RocSummary {
        auc: report.auc(),
        n_pos: report.n_pos(),
        n_neg: report.n_neg(),
    };
    write_json(json_path, &summary)
}

/// Parses a `threshold,fpr,tpr` CSV back into `(threshold, fpr, tpr)` rows.
pub fn load_roc_csv(csv_path: impl AsRef<Path>) -> Result<Vec<(f64, f64, f64)>> {
    let csv_path = csv_path.as_ref();
    let text = fs::read_to_string(csv_path).map_err(|e| Error::io(csv_path, e))?;
    let fail = |message: String| Error::Format {
        path: csv_path.to_path_buf(),
        message,
    };
    let mut lines = text.lines();
    if lines.next() != Some("threshold,fpr,tpr") {
        return Err(fail("missing `threshold,fpr,tpr` header".into()));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let parsed: std::result::Result<Vec<f64>, _> = line.split(',').map(str::parse::<f64>).collect();
            match parsed {
                Ok(v) if v.len() == 3 => Ok((v[0], v[1], v[2])),
                _ => Err(fail(format!("bad row {}: {line}", i + 2))),
            }
        })
        .collect()
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.push('\n');
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psf::make_gaussian_psf;
    use lrss_testkit as tk;

    #[test]
    fn minimal_cube_loads() {
        let dir = tempfile::tempdir().unwrap();
        let (bin, json) = container_paths(dir.path().join("c"));
        fs::write(
            &json,
            r#"{"t":2,"h":1,"w":1,"angles_deg":[0,0],"center":[0,0],"dtype":"f64le","order":"t-row-major"}"#,
        )
        .unwrap();
        let mut payload = 1.0f64.to_le_bytes().to_vec();
        payload.extend_from_slice(&2.0f64.to_le_bytes());
        fs::write(&bin, payload).unwrap();
        let cube = load_cube(&bin, &json).unwrap();
        assert_eq!(cube.shape(), (2, 1, 1));
        assert_eq!(cube.cube().frame(0), &[1.0]);
        assert_eq!(cube.cube().frame(1), &[2.0]);
    }

    #[test]
    fn round_trip_is_byte_exact() {
        let dir = tempfile::tempdir().unwrap();
        let data = tk::SplitMix(11).vec_normal(3 * 4 * 4);
        let cube = AdiCube::with_center(Cube::new(3, 4, 4, data).unwrap(), vec![0.0, 12.5, -3.25], (1.5, 1.25)).unwrap();
        let (bin, json) = container_paths(dir.path().join("nested_ok"));
        save_cube(&cube, &bin, &json).unwrap();
        let back = load_cube(&bin, &json).unwrap();
        assert_eq!(back, cube);
        let bytes = fs::read(&bin).unwrap();
        let header = fs::read(&json).unwrap();
        let (bin2, json2) = container_paths(dir.path().join("again"));
        save_cube(&back, &bin2, &json2).unwrap();
        assert_eq!(fs::read(&bin2).unwrap(), bytes);
        assert_eq!(fs::read(&json2).unwrap(), header);
    }

    #[test]
    fn short_payload_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let cube = AdiCube::new(Cube::zeros(2, 3, 3), vec![0.0, 1.0]).unwrap();
        let (bin, json) = container_paths(dir.path().join("c"));
        save_cube(&cube, &bin, &json).unwrap();
        let bytes = fs::read(&bin).unwrap();
        fs::write(&bin, &bytes[..bytes.len() - 8]).unwrap();
        let err = load_cube(&bin, &json).unwrap_err();
        match &err {
            Error::PayloadSize { expected, actual, .. } => {
                assert_eq!(*expected, 144);
                assert_eq!(*actual, 136);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("expected 144 bytes (8·T·H·W)"));
    }

    #[test]
    fn nan_payload_names_first_index() {
        let dir = tempfile::tempdir().unwrap();
        let (bin, json) = container_paths(dir.path().join("c"));
        let header = CubeHeader::new(2, 1, 2, vec![0.0, 0.0], (0.0, 0.5));
        write_json(&json, &header).unwrap();
        let mut bytes = Vec::new();
        for v in [1.0, 2.0, f64::NAN, f64::NAN] {
            bytes.extend_from_slice(&f64::to_le_bytes(v));
        }
        fs::write(&bin, bytes).unwrap();
        match load_cube(&bin, &json).unwrap_err() {
            Error::NonFinite { index, .. } => assert_eq!(index, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn header_fixed_strings_are_checked() {
        let dir = tempfile::tempdir().unwrap();
        let (bin, json) = container_paths(dir.path().join("c"));
        let mut header = CubeHeader::new(2, 1, 1, vec![0.0, 0.0], (0.0, 0.0));
        header.dtype = "f32le".into();
        write_json(&json, &header).unwrap();
        fs::write(&bin, [0u8; 16]).unwrap();
        assert!(matches!(load_cube(&bin, &json), Err(Error::Format { .. })));
    }

    #[test]
    fn save_creates_overwrites_and_reports_io() {
        let dir = tempfile::tempdir().unwrap();
        let (bin, json) = container_paths(dir.path().join("fresh"));
        let big = AdiCube::new(Cube::zeros(3, 4, 4), vec![0.0; 3]).unwrap();
        save_cube(&big, &bin, &json).unwrap();
        assert!(bin.exists() && json.exists());
        let small = AdiCube::new(Cube::zeros(2, 2, 2), vec![0.0; 2]).unwrap();
        save_cube(&small, &bin, &json).unwrap();
        assert_eq!(fs::metadata(&bin).unwrap().len(), 64);
        assert_eq!(load_cube(&bin, &json).unwrap(), small);

        let (bad_bin, bad_json) = container_paths(dir.path().join("missing_dir").join("x"));
        assert!(matches!(save_cube(&small, &bad_bin, &bad_json), Err(Error::Io { .. })));

        let empty = CubeHeader::new(0, 2, 2, vec![], (0.0, 0.0));
        assert!(save_container(&empty, &[], &bin, &json).unwrap_err().is_invalid_argument());
    }

    #[test]
    fn psf_and_map_containers() {
        let dir = tempfile::tempdir().unwrap();
        let psf = make_gaussian_psf(5, 2.0).unwrap();
        let (bin, json) = container_paths(dir.path().join("psf"));
        save_psf(&psf, &bin, &json).unwrap();
        let back = load_psf(&bin, &json).unwrap();
        for (a, b) in back.data().iter().zip(psf.data()) {
            assert!((a - b).abs() < 1e-15);
        }
        let img = Image::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let (bin, json) = container_paths(dir.path().join("map"));
        save_image(&img, (0.5, 1.0), &bin, &json).unwrap();
        assert_eq!(load_image(&bin, &json).unwrap(), img);
        assert!(load_psf(&bin, &json).is_err());
    }
}
