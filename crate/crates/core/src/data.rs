//! Dataset ingestion (IDX binary containers), seeded train/test splits,
//! and a line-oriented text checkpoint format that round-trips f64
//! parameters bit-exactly.

use crate::activations::ActivationKind;
use crate::error::{Error, Result};
use crate::nn::{Adam, CnnConfig, CnnModel};
use crate::tensor::Tensor;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Contents of one IDX file.
#[derive(Clone, Debug, PartialEq)]
pub enum IdxData {
    /// [N, rows, cols] with pixels scaled into [0, 1].
    Images(Tensor),
    Labels(Vec<u8>),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn read_u32(buf: &[u8], off: usize, path: &Path) -> Result<u32> {
    buf.get(off..off + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format(format!("{}: truncated header", path.display())))
}

/// Read one IDX file (big-endian header, uint8 payload).
pub fn read_idx(path: &Path) -> Result<IdxData> {
    let mut buf = Vec::new();
    std::fs::File::open(path)
        .map_err(io_err(path))?
        .read_to_end(&mut buf)
        .map_err(io_err(path))?;
    let magic = read_u32(&buf, 0, path)?;
    match magic {
        IDX_LABELS_MAGIC => {
            let n = read_u32(&buf, 4, path)? as usize;
            let payload = buf.get(8..).unwrap_or(&[]);
            if payload.len() != n {
                return Err(Error::Size(format!(
                    "{}: header promises {n} labels, payload has {}",
                    path.display(),
                    payload.len()
                )));
            }
            Ok(IdxData::Labels(payload.to_vec()))
        }
        IDX_IMAGES_MAGIC => {
            let n = read_u32(&buf, 4, path)? as usize;
            let rows = read_u32(&buf, 8, path)? as usize;
            let cols = read_u32(&buf, 12, path)? as usize;
            let payload = buf.get(16..).unwrap_or(&[]);
            if payload.len() != n * rows * cols {
                return Err(Error::Size(format!(
                    "{}: header promises {n}x{rows}x{cols} pixels, payload has {}",
                    path.display(),
                    payload.len()
                )));
            }
            let data = payload.iter().map(|&b| b as f64 / 255.0).collect();
            Ok(IdxData::Images(Tensor::new(vec![n, rows, cols], data)?))
        }
        other => Err(Error::Format(format!(
            "{}: bad IDX magic {other:#010x}",
            path.display()
        ))),
    }
}

/// Reference IDX image writer (uint8 pixels; values clamped to [0, 1] and
/// scaled by 255).
pub fn write_idx_images(path: &Path, images: &Tensor) -> Result<()> {
    let (n, rows, cols) = match images.shape() {
        [n, r, c] => (*n, *r, *c),
        s => return Err(Error::Shape(format!("expected [N,R,C] images, got {s:?}"))),
    };
    let mut buf = Vec::with_capacity(16 + n * rows * cols);
    buf.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    buf.extend_from_slice(&(n as u32).to_be_bytes());
    buf.extend_from_slice(&(rows as u32).to_be_bytes());
    buf.extend_from_slice(&(cols as u32).to_be_bytes());
    buf.extend(
        images
            .data()
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    std::fs::write(path, buf).map_err(io_err(path))
}

/// Reference IDX label writer.
pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut buf = Vec::with_capacity(8 + labels.len());
    buf.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    buf.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    buf.extend_from_slice(labels);
    std::fs::write(path, buf).map_err(io_err(path))
}

/// An image corpus split with provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageSet {
    /// [N, 28, 28] in [0, 1].
    pub images: Tensor,
    pub labels: Vec<u8>,
    /// Source name plus content digests of the files it was built from.
    pub provenance: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetId {
    Mnist,
    Fmnist,
    Letter,
}

impl DatasetId {
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name.to_ascii_lowercase().as_str() {
            "mnist" => DatasetId::Mnist,
            "fmnist" => DatasetId::Fmnist,
            "letter" => DatasetId::Letter,
            other => {
                return Err(Error::Argument(format!(
                    "unknown dataset {other:?} (expected mnist, fmnist, letter)"
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            DatasetId::Mnist => "mnist",
            DatasetId::Fmnist => "fmnist",
            DatasetId::Letter => "letter",
        }
    }

    fn files(&self) -> (&'static str, &'static str) {
        match self {
            DatasetId::Mnist | DatasetId::Fmnist => {
                ("train-images-idx3-ubyte", "train-labels-idx1-ubyte")
            }
            DatasetId::Letter => (
                "emnist-letters-train-images-idx3-ubyte",
                "emnist-letters-train-labels-idx1-ubyte",
            ),
        }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x1_0000_01b3);
    }
    h
}

fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    Ok(format!("fnv1a:{:016x}", fnv1a(&bytes)))
}

/// Load a dataset directory and cut a seeded, disjoint train/test split.
///
/// For `letter` (EMNIST-Letters) only classes A-J are kept, remapped to
/// labels 0..=9, and the corpus' stored transpose is corrected so glyphs
/// are upright.
pub fn load_split(
    dataset: DatasetId,
    n_train: usize,
    n_test: usize,
    seed: u64,
    data_dir: &Path,
) -> Result<(ImageSet, ImageSet)> {
    let dir = data_dir.join(dataset.name());
    let (img_name, lbl_name) = dataset.files();
    let img_path = dir.join(img_name);
    let lbl_path = dir.join(lbl_name);
    for p in [&img_path, &lbl_path] {
        if !p.exists() {
            return Err(Error::Io {
                path: p.display().to_string(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "dataset file missing"),
            });
        }
    }
    let images = match read_idx(&img_path)? {
        IdxData::Images(t) => t,
        IdxData::Labels(_) => {
            return Err(Error::Format(format!(
                "{}: expected image file",
                img_path.display()
            )))
        }
    };
    let labels = match read_idx(&lbl_path)? {
        IdxData::Labels(l) => l,
        IdxData::Images(_) => {
            return Err(Error::Format(format!(
                "{}: expected label file",
                lbl_path.display()
            )))
        }
    };
    let (n, rows, cols) = match images.shape() {
        [n, r, c] => (*n, *r, *c),
        s => return Err(Error::Shape(format!("images shape {s:?}"))),
    };
    if labels.len() != n {
        return Err(Error::Size(format!(
            "{n} images but {} labels",
            labels.len()
        )));
    }

    // Per-dataset label normalization (and orientation fix for EMNIST).
    let px = rows * cols;
    let mut kept: Vec<(Vec<f64>, u8)> = Vec::new();
    for i in 0..n {
        let raw = &images.data()[i * px..(i + 1) * px];
        match dataset {
            DatasetId::Mnist | DatasetId::Fmnist => {
                if labels[i] > 9 {
                    return Err(Error::Format(format!("label {} out of 0..=9", labels[i])));
                }
                kept.push((raw.to_vec(), labels[i]));
            }
            DatasetId::Letter => {
                // EMNIST labels letters as 1..=26; keep A-J.
                if (1..=10).contains(&labels[i]) {
                    let mut fixed = vec![0.0; px];
                    for r in 0..rows {
                        for c in 0..cols {
                            fixed[r * cols + c] = raw[c * rows + r];
                        }
                    }
                    kept.push((fixed, labels[i] - 1));
                }
            }
        }
    }
    if kept.len() < n_train + n_test {
        return Err(Error::Size(format!(
            "requested {} samples but only {} available after filtering",
            n_train + n_test,
            kept.len()
        )));
    }
    let mut order: Vec<usize> = (0..kept.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let provenance = format!(
        "{} ({}={}, {}={})",
        dataset.name(),
        img_name,
        file_digest(&img_path)?,
        lbl_name,
        file_digest(&lbl_path)?,
    );
    let take = |idx: &[usize]| -> Result<ImageSet> {
        let mut data = Vec::with_capacity(idx.len() * px);
        let mut labels = Vec::with_capacity(idx.len());
        for &i in idx {
            data.extend_from_slice(&kept[i].0);
            labels.push(kept[i].1);
        }
        Ok(ImageSet {
            images: Tensor::new(vec![idx.len(), rows, cols], data)?,
            labels,
            provenance: provenance.clone(),
        })
    };
    let train = take(&order[..n_train])?;
    let test = take(&order[n_train..n_train + n_test])?;
    Ok((train, test))
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

const CHECKPOINT_HEADER: &str = "qpoly-checkpoint v1";

/// A saved model state: free-form config strings, the epoch and metric
/// snapshot, and named flat parameter arrays (ordered, so saves are
/// byte-stable).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    pub config: Vec<(String, String)>,
    pub epoch: usize,
    pub metrics: Vec<(String, f64)>,
    pub params: Vec<(String, Vec<f64>)>,
}

impl Checkpoint {
    pub fn config_get(&self, key: &str) -> Option<&str> {
        self.config
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn params_get(&self, key: &str) -> Option<&[f64]> {
        self.params
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_slice())
    }

    /// Snapshot a CNN including its optimizer state, so training can
    /// resume exactly.
    pub fn from_cnn(model: &CnnModel, epoch: usize, metrics: &[(String, f64)]) -> Self {
        let c = &model.config;
        let mut config = vec![
            ("model".to_string(), "cnn".to_string()),
            ("activation".to_string(), c.kind.name().to_string()),
            ("input_h".to_string(), c.input_h.to_string()),
            ("input_w".to_string(), c.input_w.to_string()),
            ("channels".to_string(), c.channels.to_string()),
            ("hidden".to_string(), c.hidden.to_string()),
            ("classes".to_string(), c.classes.to_string()),
        ];
        config.push(("adam_t".to_string(), model.opt.t.to_string()));
        let mut params: Vec<(String, Vec<f64>)> = Vec::new();
        let kernel_flat: Vec<f64> = model
            .kernels
            .iter()
            .flat_map(|k| k.params().iter().copied())
            .collect();
        params.push(("kernels".to_string(), kernel_flat));
        params.push(("w1".to_string(), model.w1.clone()));
        params.push(("b1".to_string(), model.b1.clone()));
        params.push(("w2".to_string(), model.w2.clone()));
        params.push(("b2".to_string(), model.b2.clone()));
        for (i, m) in model.opt.m.iter().enumerate() {
            params.push((format!("adam_m{i}"), m.clone()));
        }
        for (i, v) in model.opt.v.iter().enumerate() {
            params.push((format!("adam_v{i}"), v.clone()));
        }
        Checkpoint {
            config,
            epoch,
            metrics: metrics.to_vec(),
            params,
        }
    }

    /// Rebuild the CNN (and its optimizer) from a snapshot.
    pub fn to_cnn(&self) -> Result<CnnModel> {
        let get = |key: &str| {
            self.config_get(key)
                .ok_or_else(|| Error::Parse {
                    section: "config".into(),
                    msg: format!("missing key {key}"),
                })
        };
        let usize_of = |key: &str| -> Result<usize> {
            get(key)?.parse().map_err(|e| Error::Parse {
                section: "config".into(),
                msg: format!("{key}: {e}"),
            })
        };
        let kind = ActivationKind::from_name(get("activation")?)?;
        let config = CnnConfig {
            input_h: usize_of("input_h")?,
            input_w: usize_of("input_w")?,
            channels: usize_of("channels")?,
            hidden: usize_of("hidden")?,
            classes: usize_of("classes")?,
            kind,
        };
        let mut model = CnnModel::new(config, 0)?;
        let want = |key: &str| {
            self.params_get(key).ok_or_else(|| Error::Parse {
                section: format!("params:{key}"),
                msg: "missing section".into(),
            })
        };
        let kernel_flat = want("kernels")?;
        let mut off = 0;
        for k in model.kernels.iter_mut() {
            let n = k.params().len();
            if off + n > kernel_flat.len() {
                return Err(Error::Size("kernel parameter array too short".into()));
            }
            k.params_mut().copy_from_slice(&kernel_flat[off..off + n]);
            off += n;
        }
        let copy_into = |dst: &mut Vec<f64>, key: &str| -> Result<()> {
            let src = want(key)?;
            if src.len() != dst.len() {
                return Err(Error::Size(format!(
                    "{key}: expected {} values, got {}",
                    dst.len(),
                    src.len()
                )));
            }
            dst.copy_from_slice(src);
            Ok(())
        };
        copy_into(&mut model.w1, "w1")?;
        copy_into(&mut model.b1, "b1")?;
        copy_into(&mut model.w2, "w2")?;
        copy_into(&mut model.b2, "b2")?;
        let mut opt = Adam::new(&[
            kernel_flat.len(),
            model.w1.len(),
            model.b1.len(),
            model.w2.len(),
            model.b2.len(),
        ]);
        opt.t = get("adam_t")?.parse().map_err(|e| Error::Parse {
            section: "config".into(),
            msg: format!("adam_t: {e}"),
        })?;
        for i in 0..opt.m.len() {
            let m = want(&format!("adam_m{i}"))?;
            let v = want(&format!("adam_v{i}"))?;
            if m.len() != opt.m[i].len() || v.len() != opt.v[i].len() {
                return Err(Error::Size(format!("adam state group {i} size mismatch")));
            }
            opt.m[i].copy_from_slice(m);
            opt.v[i].copy_from_slice(v);
        }
        model.opt = opt;
        Ok(model)
    }
}

/// Serialize a checkpoint to the line-oriented text format. f64 values use
/// Rust's shortest round-trip formatting, so load is bit-exact.
pub fn checkpoint_to_string(cp: &Checkpoint) -> String {
    let mut out = String::new();
    out.push_str(CHECKPOINT_HEADER);
    out.push('\n');
    out.push_str("[config]\n");
    for (k, v) in &cp.config {
        let _ = writeln!(out, "{k} = {v}");
    }
    out.push_str("[metrics]\n");
    let _ = writeln!(out, "epoch = {}", cp.epoch);
    for (k, v) in &cp.metrics {
        let _ = writeln!(out, "{k} = {v}");
    }
    for (name, values) in &cp.params {
        let _ = writeln!(out, "[params:{name}]");
        let _ = writeln!(out, "len = {}", values.len());
        for v in values {
            let _ = writeln!(out, "{v}");
        }
    }
    out.push_str("[end]\n");
    out
}

pub fn save_checkpoint(path: &Path, cp: &Checkpoint) -> Result<()> {
    let text = checkpoint_to_string(cp);
    let mut f = std::fs::File::create(path).map_err(io_err(path))?;
    f.write_all(text.as_bytes()).map_err(io_err(path))?;
    Ok(())
}

pub fn checkpoint_from_str(text: &str) -> Result<Checkpoint> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CHECKPOINT_HEADER => {}
        Some(h) => {
            return Err(Error::Format(format!(
                "unsupported checkpoint version line {h:?}"
            )))
        }
        None => return Err(Error::Format("empty checkpoint".into())),
    }
    let mut cp = Checkpoint::default();
    let mut section = String::new();
    let mut pending_len: Option<usize> = None;
    for line in lines {
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            if let Some(expected) = pending_len.take() {
                let got = cp.params.last().map_or(0, |(_, v)| v.len());
                if got != expected {
                    return Err(Error::Parse {
                        section: section.clone(),
                        msg: format!("declared {expected} values, found {got}"),
                    });
                }
            }
            section = name.to_string();
            if let Some(pname) = name.strip_prefix("params:") {
                cp.params.push((pname.to_string(), Vec::new()));
            } else if !matches!(name, "config" | "metrics" | "end") {
                return Err(Error::Parse {
                    section: section.clone(),
                    msg: "unknown section".into(),
                });
            }
            continue;
        }
        if section == "config" {
            let (k, v) = line.split_once(" = ").ok_or_else(|| Error::Parse {
                section: section.clone(),
                msg: format!("bad config line {line:?}"),
            })?;
            cp.config.push((k.to_string(), v.to_string()));
        } else if section == "metrics" {
            let (k, v) = line.split_once(" = ").ok_or_else(|| Error::Parse {
                section: section.clone(),
                msg: format!("bad metrics line {line:?}"),
            })?;
            if k == "epoch" {
                cp.epoch = v.parse().map_err(|e| Error::Parse {
                    section: section.clone(),
                    msg: format!("epoch: {e}"),
                })?;
            } else {
                cp.metrics.push((
                    k.to_string(),
                    v.parse().map_err(|e| Error::Parse {
                        section: section.clone(),
                        msg: format!("{k}: {e}"),
                    })?,
                ));
            }
        } else if section.starts_with("params:") {
            if let Some(rest) = line.strip_prefix("len = ") {
                pending_len = Some(rest.parse().map_err(|e| Error::Parse {
                    section: section.clone(),
                    msg: format!("len: {e}"),
                })?);
            } else {
                let v: f64 = line.parse().map_err(|e| Error::Parse {
                    section: section.clone(),
                    msg: format!("bad value {line:?}: {e}"),
                })?;
                cp.params.last_mut().unwrap().1.push(v);
            }
        } else if section == "end" {
            return Err(Error::Parse {
                section: section.clone(),
                msg: format!("content after [end]: {line:?}"),
            });
        } else {
            return Err(Error::Parse {
                section: "header".into(),
                msg: format!("content before first section: {line:?}"),
            });
        }
    }
    if section != "end" {
        return Err(Error::Format("missing [end] marker".into()));
    }
    Ok(cp)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    checkpoint_from_str(&text)
}

/// Atomically write `contents` to `path` (write to a sibling temp file,
/// then rename).
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp: PathBuf = path.with_extension("tmp");
    std::fs::write(&tmp, contents).map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::rng;
    use rand::Rng;

    #[test]
    fn idx_round_trip_labels_and_images() {
        let dir = tempfile::tempdir().unwrap();
        let lp = dir.path().join("labels");
        write_idx_labels(&lp, &[7, 2, 1]).unwrap();
        assert_eq!(read_idx(&lp).unwrap(), IdxData::Labels(vec![7, 2, 1]));

        let ip = dir.path().join("images");
        let ones = Tensor::new(vec![1, 28, 28], vec![1.0; 28 * 28]).unwrap();
        write_idx_images(&ip, &ones).unwrap();
        match read_idx(&ip).unwrap() {
            IdxData::Images(t) => {
                assert_eq!(t.shape(), &[1, 28, 28]);
                assert!(t.data().iter().all(|&v| v == 1.0));
            }
            _ => panic!("expected images"),
        }
    }

    #[test]
    fn idx_randomized_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = rng(5);
        for trial in 0..100 {
            let p = dir.path().join(format!("f{trial}"));
            if trial % 2 == 0 {
                let n = r.gen_range(1..40);
                let labels: Vec<u8> = (0..n).map(|_| r.gen_range(0..10)).collect();
                write_idx_labels(&p, &labels).unwrap();
                assert_eq!(read_idx(&p).unwrap(), IdxData::Labels(labels));
            } else {
                let (n, rows, cols) =
                    (r.gen_range(1..5), r.gen_range(1..12), r.gen_range(1..12));
                // Quantized pixels so the u8 round trip is exact.
                let data: Vec<f64> = (0..n * rows * cols)
                    .map(|_| r.gen_range(0..=255u16) as f64 / 255.0)
                    .collect();
                let t = Tensor::new(vec![n, rows, cols], data).unwrap();
                write_idx_images(&p, &t).unwrap();
                match read_idx(&p).unwrap() {
                    IdxData::Images(got) => {
                        assert_eq!(got.shape(), t.shape());
                        for (a, b) in got.data().iter().zip(t.data()) {
                            assert!((a - b).abs() < 1e-12);
                        }
                    }
                    _ => panic!("expected images"),
                }
            }
        }
    }

    #[test]
    fn idx_error_paths() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad");
        std::fs::write(&p, 0xDEADBEEFu32.to_be_bytes()).unwrap();
        assert!(matches!(read_idx(&p), Err(Error::Format(_))));

        // Truncated payload.
        let mut buf = Vec::new();
        buf.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
        buf.extend_from_slice(&5u32.to_be_bytes());
        buf.extend_from_slice(&[1, 2]);
        std::fs::write(&p, buf).unwrap();
        assert!(matches!(read_idx(&p), Err(Error::Size(_))));

        assert!(read_idx(&dir.path().join("missing")).is_err());
    }

    fn synth_corpus(dir: &Path, name: &str, n: usize, label_of: impl Fn(usize) -> u8) {
        let sub = dir.join(name);
        std::fs::create_dir_all(&sub).unwrap();
        let mut r = rng(7);
        let data: Vec<f64> = (0..n * 28 * 28)
            .map(|_| r.gen_range(0..=255u16) as f64 / 255.0)
            .collect();
        let images = Tensor::new(vec![n, 28, 28], data).unwrap();
        let labels: Vec<u8> = (0..n).map(label_of).collect();
        let (img_name, lbl_name) = if name == "letter" {
            (
                "emnist-letters-train-images-idx3-ubyte",
                "emnist-letters-train-labels-idx1-ubyte",
            )
        } else {
            ("train-images-idx3-ubyte", "train-labels-idx1-ubyte")
        };
        write_idx_images(&sub.join(img_name), &images).unwrap();
        write_idx_labels(&sub.join(lbl_name), &labels).unwrap();
    }

    #[test]
    fn split_determinism_and_disjointness() {
        let dir = tempfile::tempdir().unwrap();
        synth_corpus(dir.path(), "mnist", 60, |i| (i % 10) as u8);
        let (tr1, te1) = load_split(DatasetId::Mnist, 40, 15, 11, dir.path()).unwrap();
        let (tr2, te2) = load_split(DatasetId::Mnist, 40, 15, 11, dir.path()).unwrap();
        assert_eq!(tr1, tr2);
        assert_eq!(te1, te2);
        assert_eq!(tr1.images.shape(), &[40, 28, 28]);
        assert_eq!(te1.labels.len(), 15);
        assert!(tr1.provenance.contains("mnist"));

        // Different seed shuffles differently.
        let (tr3, _) = load_split(DatasetId::Mnist, 40, 15, 12, dir.path()).unwrap();
        assert_ne!(tr1.images.data(), tr3.images.data());

        // Oversized request.
        assert!(matches!(
            load_split(DatasetId::Mnist, 50, 20, 0, dir.path()),
            Err(Error::Size(_))
        ));

        // Missing files.
        assert!(matches!(
            load_split(DatasetId::Fmnist, 1, 1, 0, dir.path()),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn letter_split_filters_and_remaps() {
        let dir = tempfile::tempdir().unwrap();
        // EMNIST-style labels 1..=26; only 1..=10 survive.
        synth_corpus(dir.path(), "letter", 130, |i| (i % 26 + 1) as u8);
        let (tr, te) = load_split(DatasetId::Letter, 30, 10, 3, dir.path()).unwrap();
        let mut hist = [0usize; 10];
        for &l in tr.labels.iter().chain(&te.labels) {
            assert!(l <= 9);
            hist[l as usize] += 1;
        }
        assert_eq!(hist.iter().sum::<usize>(), 40);
    }

    #[test]
    fn letter_transpose_correction() {
        let dir = tempfile::tempdir().unwrap();
        let sub = dir.path().join("letter");
        std::fs::create_dir_all(&sub).unwrap();
        // One image whose (r, c) pixel encodes its transposed position.
        let mut data = vec![0.0; 28 * 28];
        data[3 * 28 + 5] = 1.0; // stored at (3, 5)
        let images = Tensor::new(vec![2, 28, 28], [data.clone(), data].concat()).unwrap();
        write_idx_images(&sub.join("emnist-letters-train-images-idx3-ubyte"), &images).unwrap();
        write_idx_labels(&sub.join("emnist-letters-train-labels-idx1-ubyte"), &[1, 2]).unwrap();
        let (tr, te) = load_split(DatasetId::Letter, 1, 1, 0, dir.path()).unwrap();
        for set in [&tr, &te] {
            // After the transpose fix the pixel lives at (5, 3).
            assert_eq!(set.images.data()[5 * 28 + 3], 1.0);
            assert_eq!(set.images.data()[3 * 28 + 5], 0.0);
        }
    }

    #[test]
    fn checkpoint_round_trip_bytes() {
        let mut r = rng(13);
        let cp = Checkpoint {
            config: vec![
                ("model".into(), "cnn".into()),
                ("seed".into(), "42".into()),
            ],
            epoch: 3,
            metrics: vec![("test_loss".into(), 0.125), ("test_acc".into(), 0.91)],
            params: vec![
                (
                    "w".into(),
                    (0..50).map(|_| r.gen_range(-10.0..10.0)).collect(),
                ),
                ("b".into(), vec![0.0, -0.0, 1e-300, std::f64::consts::PI]),
            ],
        };
        let text = checkpoint_to_string(&cp);
        let back = checkpoint_from_str(&text).unwrap();
        assert_eq!(back.epoch, 3);
        assert_eq!(back.config, cp.config);
        for ((ka, va), (kb, vb)) in back.params.iter().zip(&cp.params) {
            assert_eq!(ka, kb);
            for (a, b) in va.iter().zip(vb) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
        // save -> load -> save is byte-identical.
        assert_eq!(checkpoint_to_string(&back), text);

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cp.txt");
        save_checkpoint(&p, &cp).unwrap();
        assert_eq!(load_checkpoint(&p).unwrap(), back);
    }

    #[test]
    fn checkpoint_parse_errors() {
        assert!(matches!(
            checkpoint_from_str("qpoly-checkpoint v9\n[end]\n"),
            Err(Error::Format(_))
        ));
        assert!(checkpoint_from_str("").is_err());
        let bad = format!("{CHECKPOINT_HEADER}\n[params:w]\nlen = 3\n1.0\n[end]\n");
        match checkpoint_from_str(&bad) {
            Err(Error::Parse { section, .. }) => assert_eq!(section, "params:w"),
            other => panic!("expected parse error, got {other:?}"),
        }
        let no_end = format!("{CHECKPOINT_HEADER}\n[config]\na = b\n");
        assert!(matches!(checkpoint_from_str(&no_end), Err(Error::Format(_))));
        let garbage = format!("{CHECKPOINT_HEADER}\n[params:w]\nlen = 1\nxyz\n[end]\n");
        assert!(matches!(
            checkpoint_from_str(&garbage),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn cnn_checkpoint_reconstructs_model() {
        use crate::activations::ActivationKind;
        let config = CnnConfig {
            input_h: 4,
            input_w: 4,
            channels: 2,
            hidden: 3,
            classes: 10,
            kind: ActivationKind::Af3,
        };
        let mut model = CnnModel::new(config, 99).unwrap();
        model.opt.t = 17;
        model.opt.m[1][0] = 0.25;
        model.opt.v[3][1] = 1e-9;
        let cp = Checkpoint::from_cnn(&model, 2, &[("test_loss".into(), 0.5)]);
        let text = checkpoint_to_string(&cp);
        let back = checkpoint_from_str(&text).unwrap().to_cnn().unwrap();
        assert_eq!(back.w1, model.w1);
        assert_eq!(back.w2, model.w2);
        assert_eq!(back.b1, model.b1);
        assert_eq!(back.b2, model.b2);
        assert_eq!(back.opt.t, 17);
        assert_eq!(back.opt.m, model.opt.m);
        assert_eq!(back.opt.v, model.opt.v);
        for (a, b) in back.kernels.iter().zip(&model.kernels) {
            assert_eq!(a.params(), b.params());
        }
    }

    #[test]
    fn write_atomic_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        write_atomic(&p, "one").unwrap();
        write_atomic(&p, "two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert!(!p.with_extension("tmp").exists());
    }
}
