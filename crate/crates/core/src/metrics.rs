//! Evaluation metrics over externally computed feature vectors (FID,
//! FID over CLIP features, CLIP score) and over SVG files (size, primitives).

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::reconstruct;
use crate::svg::{self, SvgDocument};

/// Eigenvalues below this are treated as zero in matrix square roots.
pub const EIGEN_CLAMP: f64 = 1e-10;
const EIGEN_MAX_ITER: usize = 10_000;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("{count} vectors of dimension {d}: need at least d + 1 to estimate a covariance")]
    CovarianceRankError { count: usize, d: usize },
    #[error("eigen decomposition did not converge")]
    NumericalFailure,
    #[error("zero vector at index {0}")]
    ZeroVector(usize),
    #[error("{0} image vectors but {1} text vectors")]
    CountMismatch(usize, usize),
    #[error("feature set needs dimension >= 2 and finite entries")]
    InvalidFeatures,
    #[error("no input")]
    EmptyInput,
    #[error("feature file: {0}")]
    Io(String),
}

/// Equal-length vectors from one embedding family.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub d: usize,
    pub vectors: Vec<Vec<f64>>,
    pub source_tag: String,
}

impl FeatureSet {
    pub fn new(vectors: Vec<Vec<f64>>, source_tag: impl Into<String>) -> Result<Self, MetricsError> {
        let d = vectors.first().map_or(0, Vec::len);
        if d < 2 {
            return Err(MetricsError::InvalidFeatures);
        }
        for v in &vectors {
            if v.len() != d {
                return Err(MetricsError::DimensionMismatch(d, v.len()));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(MetricsError::InvalidFeatures);
            }
        }
        Ok(Self { d, vectors, source_tag: source_tag.into() })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Mean and unbiased covariance, accumulated sequentially in input order.
    pub fn moments(&self) -> Result<(DVector<f64>, DMatrix<f64>), MetricsError> {
        let (n, d) = (self.vectors.len(), self.d);
        if n < d + 1 {
            return Err(MetricsError::CovarianceRankError { count: n, d });
        }
        let mut mean = DVector::zeros(d);
        for v in &self.vectors {
            mean += DVector::from_column_slice(v);
        }
        mean /= n as f64;
        let mut cov = DMatrix::zeros(d, d);
        for v in &self.vectors {
            let c = DVector::from_column_slice(v) - &mean;
            cov.ger(1.0, &c, &c, 1.0);
        }
        cov /= (n - 1) as f64;
        Ok((mean, cov))
    }
}

/// Square root of a symmetric positive semi-definite matrix.
fn sqrt_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>, MetricsError> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, EIGEN_MAX_ITER).ok_or(MetricsError::NumericalFailure)?;
    let roots = eig.eigenvalues.map(|l| if l > EIGEN_CLAMP { l.sqrt() } else { 0.0 });
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose())
}

/// Sum of square roots of the eigenvalues of a symmetric matrix.
fn trace_sqrt(m: &DMatrix<f64>) -> Result<f64, MetricsError> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, EIGEN_MAX_ITER).ok_or(MetricsError::NumericalFailure)?;
    Ok(eig.eigenvalues.iter().map(|&l| if l > EIGEN_CLAMP { l.sqrt() } else { 0.0 }).sum())
}

/// Fréchet distance between Gaussians fitted to the two sets:
/// ‖μ₁−μ₂‖² + tr(Σ₁ + Σ₂ − 2(Σ₁Σ₂)^½).
///
/// tr((Σ₁Σ₂)^½) is computed as tr((Σ₁^½ Σ₂ Σ₁^½)^½), which has the same
/// eigenvalues and is symmetric.
pub fn fid(real: &FeatureSet, gen: &FeatureSet) -> Result<f64, MetricsError> {
    if real.d != gen.d {
        return Err(MetricsError::DimensionMismatch(real.d, gen.d));
    }
    let (m1, s1) = real.moments()?;
    let (m2, s2) = gen.moments()?;
    let diff = (&m1 - &m2).norm_squared();
    let r1 = sqrt_psd(&s1)?;
    let cross = trace_sqrt(&(&r1 * &s2 * &r1))?;
    let value = diff + s1.trace() + s2.trace() - 2.0 * cross;
    Ok(value.max(0.0))
}

/// FID over CLIP-family image features; the same computation as [`fid`].
pub fn fid_clip(real_img: &FeatureSet, gen_img: &FeatureSet) -> Result<f64, MetricsError> {
    fid(real_img, gen_img)
}

/// Mean cosine similarity of index-paired image and text vectors.
pub fn clip_score(image: &FeatureSet, text: &FeatureSet) -> Result<f64, MetricsError> {
    if image.len() != text.len() {
        return Err(MetricsError::CountMismatch(image.len(), text.len()));
    }
    if image.d != text.d {
        return Err(MetricsError::DimensionMismatch(image.d, text.d));
    }
    if image.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut total = 0.0;
    for (i, (a, b)) in image.vectors.iter().zip(&text.vectors).enumerate() {
        total += crate::annotation::cosine(a, b).ok_or(MetricsError::ZeroVector(i))?;
    }
    Ok(total / image.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureHeader {
    pub d: usize,
    pub count: usize,
    pub source_tag: String,
}

/// Sidecar path for a feature matrix file: `x.f32` → `x.json`.
pub fn sidecar_path(matrix: &Path) -> PathBuf {
    matrix.with_extension("json")
}

/// Writes the matrix as little-endian f32, row per vector, plus its sidecar.
pub fn write_features(matrix: &Path, set: &FeatureSet) -> Result<(), MetricsError> {
    let io = |e: std::io::Error| MetricsError::Io(e.to_string());
    let mut bytes = Vec::with_capacity(set.len() * set.d * 4);
    for v in &set.vectors {
        for x in v {
            bytes.extend_from_slice(&(*x as f32).to_le_bytes());
        }
    }
    std::fs::File::create(matrix).and_then(|mut f| f.write_all(&bytes)).map_err(io)?;
    let header = FeatureHeader { d: set.d, count: set.len(), source_tag: set.source_tag.clone() };
    let json = serde_json::to_string_pretty(&header).map_err(|e| MetricsError::Io(e.to_string()))?;
    std::fs::write(sidecar_path(matrix), json).map_err(io)
}

pub fn read_features(matrix: &Path) -> Result<FeatureSet, MetricsError> {
    let io = |e: std::io::Error| MetricsError::Io(format!("{}: {e}", matrix.display()));
    let header: FeatureHeader = serde_json::from_slice(&std::fs::read(sidecar_path(matrix)).map_err(io)?)
        .map_err(|e| MetricsError::Io(e.to_string()))?;
    let mut bytes = Vec::new();
    std::fs::File::open(matrix).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(io)?;
    if bytes.len() != header.d * header.count * 4 {
        return Err(MetricsError::Io(format!(
            "{}: {} bytes, header says {}×{} f32",
            matrix.display(),
            bytes.len(),
            header.count,
            header.d
        )));
    }
    let values: Vec<f64> = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect();
    let vectors = values.chunks(header.d.max(1)).map(<[f64]>::to_vec).collect();
    FeatureSet::new(vectors, header.source_tag)
}

/// Averages over the non-degenerate documents of a set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvgStats {
    /// Canonical byte length / 1024, averaged.
    pub avg_file_size_kb: f64,
    /// Render steps after flattening, averaged.
    pub avg_primitives_used: f64,
    pub count: usize,
    /// Documents without any visible primitive, left out of the averages.
    pub degenerate: usize,
}

impl SvgStats {
    /// File size as shown in reports, two decimals.
    pub fn file_size_text(&self) -> String {
        format!("{:.2}", self.avg_file_size_kb)
    }

    /// Primitive count as shown in reports, three decimals.
    pub fn primitives_text(&self) -> String {
        format!("{:.3}", self.avg_primitives_used)
    }

    /// Count-weighted combination of two disjoint sets' statistics.
    pub fn merge(&self, other: &SvgStats) -> SvgStats {
        let n = self.count + other.count;
        let w = |a: f64, b: f64| if n == 0 { 0.0 } else { (a * self.count as f64 + b * other.count as f64) / n as f64 };
        SvgStats {
            avg_file_size_kb: w(self.avg_file_size_kb, other.avg_file_size_kb),
            avg_primitives_used: w(self.avg_primitives_used, other.avg_primitives_used),
            count: n,
            degenerate: self.degenerate + other.degenerate,
        }
    }
}

pub fn svg_stats<'a>(docs: impl IntoIterator<Item = &'a SvgDocument>) -> Result<SvgStats, MetricsError> {
    let (mut bytes, mut prims, mut count, mut degenerate, mut seen) = (0.0, 0.0, 0usize, 0usize, 0usize);
    for doc in docs {
        seen += 1;
        // Documents that cannot be flattened count as having no primitives.
        let steps = reconstruct::flatten(doc).map_or(0, |seq| seq.n());
        if steps == 0 {
            degenerate += 1;
            continue;
        }
        bytes += svg::svg_length(doc) as f64 / 1024.0;
        prims += steps as f64;
        count += 1;
    }
    if seen == 0 {
        return Err(MetricsError::EmptyInput);
    }
    let avg = |s: f64| if count == 0 { 0.0 } else { s / count as f64 };
    Ok(SvgStats { avg_file_size_kb: avg(bytes), avg_primitives_used: avg(prims), count, degenerate })
}

/// The evaluation table: one row of metrics over a generated set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub fid: Option<f64>,
    pub clip_score: Option<f64>,
    pub fid_clip: Option<f64>,
    pub avg_file_size_kb: Option<f64>,
    pub avg_primitives_used: Option<f64>,
    pub sample_count: usize,
    pub source_tags: Vec<String>,
}
