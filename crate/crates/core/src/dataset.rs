//! Multi-block ensembles: equally sized observation matrices stacked along
//! the third mode, each with a class label.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dtf1;
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Scalar;
use crate::tensor::{matrix_outer_sum, DenseTensor, Matrix};

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleDataset<T> {
    /// `O × P × Q`, observation `q` in frontal slice `q`.
    pub tensor: DenseTensor<T>,
    pub labels: Vec<usize>,
    pub source: Source,
}

/// Where a dataset came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Source {
    Files { paths: Vec<PathBuf> },
    ColorEnsemble { height: usize, width: usize, seed: u64 },
    FaceFixture { seed: u64 },
    Tensor { path: PathBuf },
}

impl<T: Scalar> EnsembleDataset<T> {
    pub fn new(tensor: DenseTensor<T>, labels: Vec<usize>, source: Source) -> Result<Self> {
        let (_, _, q) = crate::decomp::check_order3(&tensor)?;
        if labels.len() != q {
            return Err(Error::shape(format!("{q} observations but {} labels", labels.len())));
        }
        Ok(Self { tensor, labels, source })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image(&self, q: usize) -> Result<Matrix<T>> {
        self.tensor.frontal_slice(q)
    }

    /// Distinct labels in ascending order.
    pub fn classes(&self) -> Vec<usize> {
        let mut c = self.labels.clone();
        c.sort_unstable();
        c.dedup();
        c
    }

    /// Sub-ensemble of the given observations, in the given order.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        let slices = idx.iter().map(|&q| self.image(q)).collect::<Result<Vec<_>>>()?;
        let labels = idx.iter().map(|&q| self.labels[q]).collect();
        Self::new(DenseTensor::from_frontal_slices(&slices)?, labels, self.source.clone())
    }

    pub fn manifest(&self) -> DatasetManifest {
        DatasetManifest {
            shape: self.tensor.shape().to_vec(),
            labels: self.labels.clone(),
            source: self.source.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub shape: Vec<usize>,
    pub labels: Vec<usize>,
    pub source: Source,
}

/// Write `tensor.dtf1` and `manifest.json` into `dir`.
pub fn save_dataset<T: Scalar>(dir: impl AsRef<Path>, ds: &EnsembleDataset<T>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    dtf1::save(&ds.tensor, dir.join("tensor.dtf1"))?;
    let mut json = serde_json::to_string_pretty(&ds.manifest())?;
    json.push('\n');
    fs::write(dir.join("manifest.json"), json)?;
    Ok(())
}

pub fn load_dataset<T: Scalar>(dir: impl AsRef<Path>) -> Result<EnsembleDataset<T>> {
    let dir = dir.as_ref();
    let man: DatasetManifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    let tensor = dtf1::load(dir.join("tensor.dtf1"))?;
    if tensor.shape() != man.shape.as_slice() {
        return Err(Error::format("manifest", "shape does not match tensor.dtf1"));
    }
    EnsembleDataset::new(tensor, man.labels, man.source)
}

// ---------------------------------------------------------------------------
// PGM

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&b| b != b'\n' && b != b'\r') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format("PGM", format!("expected {what} at byte {start}")))
    }
}

/// Decode a `P2` or `P5` image into a `height × width` matrix scaled to `[0, 1]`.
pub fn parse_pgm<T: Scalar>(bytes: &[u8]) -> Result<Matrix<T>> {
    let binary = match bytes.get(..2) {
        Some(b"P5") => true,
        Some(b"P2") => false,
        _ => return Err(Error::format("PGM", "magic must be P2 or P5")),
    };
    let mut h = Header { bytes, pos: 2 };
    let width = h.number("width")? as usize;
    let height = h.number("height")? as usize;
    let maxval = h.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::format("PGM", "zero image dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::format("PGM", format!("maxval {maxval} outside 1..=65535")));
    }
    let count = width * height;
    let mut raster = Vec::with_capacity(count);
    if binary {
        // exactly one whitespace byte separates the header from the raster
        if !bytes.get(h.pos).is_some_and(u8::is_ascii_whitespace) {
            return Err(Error::format("PGM", "missing whitespace after maxval"));
        }
        let start = h.pos + 1;
        let width_bytes = if maxval > 255 { 2 } else { 1 };
        let body = bytes
            .get(start..start + count * width_bytes)
            .ok_or_else(|| Error::format("PGM", "truncated pixel data"))?;
        if width_bytes == 1 {
            raster.extend(body.iter().map(|&b| b as u32));
        } else {
            raster.extend(body.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as u32));
        }
    } else {
        for _ in 0..count {
            h.skip_space_and_comments();
            if h.pos >= bytes.len() {
                return Err(Error::format("PGM", "truncated pixel data"));
            }
            raster.push(h.number("pixel value")?);
        }
    }
    if let Some(v) = raster.iter().find(|&&v| v > maxval) {
        return Err(Error::format("PGM", format!("pixel value {v} exceeds maxval {maxval}")));
    }
    let scale = T::of(maxval as f64);
    // raster is row-major
    Ok(Matrix::from_fn(height, width, |r, c| T::of(raster[r * width + c] as f64) / scale))
}

pub fn load_pgm<T: Scalar>(path: impl AsRef<Path>) -> Result<Matrix<T>> {
    parse_pgm(&fs::read(path)?)
}

/// Stack PGM images along the third mode in argument order.
pub fn load_pgm_ensemble<T: Scalar>(paths: &[PathBuf], labels: &[usize]) -> Result<EnsembleDataset<T>> {
    if paths.is_empty() {
        return Err(Error::invalid("no image paths given"));
    }
    if paths.len() != labels.len() {
        return Err(Error::shape(format!("{} images but {} labels", paths.len(), labels.len())));
    }
    let mut slices: Vec<Matrix<T>> = Vec::with_capacity(paths.len());
    for p in paths {
        let m = load_pgm(p)?;
        if let Some(first) = slices.first() {
            if first.dims() != m.dims() {
                return Err(Error::shape(format!(
                    "{} is {}x{}, expected {}x{}",
                    p.display(),
                    m.rows(),
                    m.cols(),
                    first.rows(),
                    first.cols()
                )));
            }
        }
        slices.push(m);
    }
    EnsembleDataset::new(
        DenseTensor::from_frontal_slices(&slices)?,
        labels.to_vec(),
        Source::Files { paths: paths.to_vec() },
    )
}

/// ORL-style directory: `s1/1.pgm .. s40/10.pgm`, or any `<class>/<image>.pgm`
/// layout. Classes are numbered by sorted directory name, images by sorted
/// file name.
pub fn load_pgm_tree<T: Scalar>(root: impl AsRef<Path>) -> Result<EnsembleDataset<T>> {
    let mut dirs: Vec<PathBuf> =
        fs::read_dir(root)?.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.is_dir()).collect();
    dirs.sort_by_key(|a| natural_key(a));
    let mut paths = Vec::new();
    let mut labels = Vec::new();
    for (class, d) in dirs.iter().enumerate() {
        let mut files: Vec<PathBuf> = fs::read_dir(d)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")))
            .collect();
        files.sort_by_key(|a| natural_key(a));
        labels.extend(std::iter::repeat_n(class, files.len()));
        paths.extend(files);
    }
    load_pgm_ensemble(&paths, &labels)
}

/// Sort key that orders `s2` before `s10`.
fn natural_key(p: &Path) -> (String, u64, String) {
    let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let digits: String = name.chars().filter(char::is_ascii_digit).collect();
    let prefix: String = name.chars().take_while(|c| !c.is_ascii_digit()).collect();
    (prefix, digits.parse().unwrap_or(0), name)
}

// ---------------------------------------------------------------------------
// Synthetic ensembles

/// Rows are observations, columns the red, green and blue weights.
pub const COLOR_MIXING: [[f64; 3]; 5] =
    [[128.0, 128.0, 128.0], [256.0, 256.0, 0.0], [256.0, 0.0, 256.0], [0.0, 256.0, 256.0], [256.0, 128.0, 32.0]];

/// The generating factors of [`synthetic_color_ensemble`].
#[derive(Clone, Debug, PartialEq)]
pub struct ColorTruth<T> {
    /// Rank-1 base slices `a_k b_kᵀ`, red, green, blue.
    pub bases: Vec<Matrix<T>>,
    /// `5 × 3` copy of [`COLOR_MIXING`].
    pub mixing: Matrix<T>,
}

/// Five observations mixing three non-negative rank-1 base slices with the
/// weights of [`COLOR_MIXING`]; the resulting tensor has rank three.
pub fn synthetic_color_ensemble<T: Scalar>(
    height: usize,
    width: usize,
    seed: u64,
) -> Result<(EnsembleDataset<T>, ColorTruth<T>)> {
    if height == 0 || width == 0 {
        return Err(Error::invalid("image dimensions must be positive"));
    }
    let mut r = rng::stream(seed, "color-ensemble");
    let bases: Vec<Matrix<T>> = (0..3)
        .map(|_| {
            let a: Vec<T> = (0..height).map(|_| T::of(r.gen::<f64>())).collect();
            let b: Vec<T> = (0..width).map(|_| T::of(r.gen::<f64>())).collect();
            Matrix::from_fn(height, width, |i, j| a[i] * b[j])
        })
        .collect();
    let mixing = Matrix::from_fn(5, 3, |n, k| T::of(COLOR_MIXING[n][k]));
    let cols: Vec<Vec<T>> = mixing.columns().map(<[T]>::to_vec).collect();
    let parts: Vec<(Matrix<T>, &[T])> = bases.iter().cloned().zip(cols.iter().map(|c| &c[..])).collect();
    let tensor = matrix_outer_sum(&parts)?;
    let ds = EnsembleDataset::new(tensor, (0..5).collect(), Source::ColorEnsemble { height, width, seed })?;
    Ok((ds, ColorTruth { bases, mixing }))
}

pub const FIXTURE_CLASSES: usize = 4;
pub const FIXTURE_SAMPLES: usize = 6;
pub const FIXTURE_HEIGHT: usize = 12;
pub const FIXTURE_WIDTH: usize = 10;

/// A miniature face-like ensemble: 4 classes × 6 samples of 12×10 images.
///
/// Each image is a faint class-specific pattern plus two strong shared
/// "illumination" slices with random non-negative weights and a little
/// noise. Raw pixel distances are dominated by the illumination, which the
/// common features capture. Samples are ordered class-major.
pub fn face_fixture<T: Scalar>(seed: u64) -> Result<EnsembleDataset<T>> {
    let (h, w) = (FIXTURE_HEIGHT, FIXTURE_WIDTH);
    let mut r = rng::stream(seed, "face-fixture");
    let identity: Vec<Matrix<f64>> =
        (0..FIXTURE_CLASSES).map(|_| Matrix::from_fn(h, w, |_, _| 0.25 * r.gen::<f64>())).collect();
    // smooth gradients, like light from the left/top
    let light = [
        Matrix::from_fn(h, w, |i, j| (1.0 + j as f64) / w as f64 * (0.5 + 0.5 * (i as f64 / h as f64))),
        Matrix::from_fn(h, w, |i, j| (1.0 + i as f64) / h as f64 * (1.0 - 0.4 * (j as f64 / w as f64))),
    ];
    let mut slices = Vec::with_capacity(FIXTURE_CLASSES * FIXTURE_SAMPLES);
    let mut labels = Vec::with_capacity(slices.capacity());
    for (class, pattern) in identity.iter().enumerate() {
        for _ in 0..FIXTURE_SAMPLES {
            let w0 = 4.0 * r.gen::<f64>();
            let w1 = 4.0 * r.gen::<f64>();
            let img = Matrix::from_fn(h, w, |i, j| {
                let noise: f64 = StandardNormal.sample(&mut r);
                T::of((pattern[(i, j)] + w0 * light[0][(i, j)] + w1 * light[1][(i, j)] + 0.01 * noise).max(0.0))
            });
            slices.push(img);
            labels.push(class);
        }
    }
    EnsembleDataset::new(DenseTensor::from_frontal_slices(&slices)?, labels, Source::FaceFixture { seed })
}

// ---------------------------------------------------------------------------
// Group splits

/// Observations dealt into groups holding one sample of every class, the
/// groups then divided into training and test sets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    /// Observation indices per group, ordered by class.
    pub groups: Vec<Vec<usize>>,
    pub train_groups: Vec<usize>,
    pub test_groups: Vec<usize>,
    pub seed: u64,
}

impl SplitPlan {
    pub fn train_indices(&self) -> Vec<usize> {
        self.train_groups.iter().flat_map(|&g| self.groups[g].iter().copied()).collect()
    }

    pub fn test_indices(&self) -> Vec<usize> {
        self.test_groups.iter().flat_map(|&g| self.groups[g].iter().copied()).collect()
    }
}

pub fn make_group_splits(labels: &[usize], groups: usize, train: usize, seed: u64) -> Result<SplitPlan> {
    if groups == 0 || train == 0 || train >= groups {
        return Err(Error::invalid(format!("need 1 <= train < groups, got train {train} of {groups}")));
    }
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.is_empty() {
        return Err(Error::invalid("no labelled observations"));
    }
    let mut r = rng::stream(seed, "group-splits");
    let mut plan = vec![Vec::with_capacity(classes.len()); groups];
    for &c in &classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&q| labels[q] == c).collect();
        if members.len() < groups {
            return Err(Error::invalid(format!(
                "class {c} has {} samples, {groups} groups need one each",
                members.len()
            )));
        }
        members.shuffle(&mut r);
        for (g, &q) in plan.iter_mut().zip(&members) {
            g.push(q);
        }
    }
    let mut order: Vec<usize> = (0..groups).collect();
    order.shuffle(&mut r);
    let mut train_groups = order[..train].to_vec();
    let mut test_groups = order[train..].to_vec();
    train_groups.sort_unstable();
    test_groups.sort_unstable();
    Ok(SplitPlan { groups: plan, train_groups, test_groups, seed })
}
