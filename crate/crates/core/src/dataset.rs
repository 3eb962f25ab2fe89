//! Vector storage, the AVF1 file format, and the synthetic generator.
//!
//! The generator plants a power law between cluster size and cluster
//! coherence. Concept sizes follow a Zipf law over rank, and each concept's
//! Gaussian spread shrinks with its size: spread_c = base_spread *
//! (size_c / size_0)^(-alpha). Frequent concepts are therefore tighter,
//! which is exactly the relationship the stats module recovers when it
//! fits coherence against frequency.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::binio;
use crate::error::{Error, Result};
use crate::vecmath;

const MAGIC: &[u8; 4] = b"AVF1";
const CENTER_MAX_DOT: f64 = 0.8;
const CENTER_ATTEMPTS: usize = 10_000;

/// Parameters for the synthetic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n: usize,
    pub dim: usize,
    pub m_concepts: usize,
    pub zipf_exponent_sizes: f64,
    pub alpha: f64,
    pub base_spread: f64,
    pub seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::InvalidParameter(format!(
                "dim must be at least 2, got {}",
                self.dim
            )));
        }
        if self.m_concepts < 2 {
            return Err(Error::InvalidParameter(format!(
                "m_concepts must be at least 2, got {}",
                self.m_concepts
            )));
        }
        if self.n < self.m_concepts {
            return Err(Error::InvalidParameter(format!(
                "n = {} cannot give each of {} concepts at least one vector",
                self.n, self.m_concepts
            )));
        }
        if !(self.zipf_exponent_sizes >= 0.0) {
            return Err(Error::InvalidParameter(
                "zipf_exponent_sizes must be nonnegative".into(),
            ));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidParameter("alpha must be positive".into()));
        }
        if !(self.base_spread > 0.0) {
            return Err(Error::InvalidParameter("base_spread must be positive".into()));
        }
        Ok(())
    }
}

/// A dense collection of fixed-dimension f32 vectors.
///
/// Ids are always 0..n in storage order. Labels, when present, record which
/// generator concept each vector came from.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSet {
    dim: usize,
    vectors: Vec<f32>,
    ids: Vec<u32>,
    labels: Option<Vec<u32>>,
}

impl VectorSet {
    pub fn new(dim: usize, vectors: Vec<f32>, labels: Option<Vec<u32>>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidParameter(format!(
                "dim must be at least 2, got {dim}"
            )));
        }
        if vectors.len() % dim != 0 {
            return Err(Error::InvalidParameter(format!(
                "vector data length {} is not a multiple of dim {}",
                vectors.len(),
                dim
            )));
        }
        let n = vectors.len() / dim;
        if n > u32::MAX as usize {
            return Err(Error::InvalidParameter(format!("{n} vectors exceed id space")));
        }
        if let Some(ref l) = labels {
            if l.len() != n {
                return Err(Error::InvalidParameter(format!(
                    "have {} labels for {} vectors",
                    l.len(),
                    n
                )));
            }
        }
        let ids = (0..n as u32).collect();
        Ok(Self { dim, vectors, ids, labels })
    }

    pub fn from_rows(rows: &[Vec<f32>], labels: Option<Vec<u32>>) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::EmptyInput("from_rows needs at least one row".into()))?;
        let dim = first.len();
        let mut flat = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: row.len() });
            }
            flat.extend_from_slice(row);
        }
        Self::new(dim, flat, labels)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    pub fn vectors(&self) -> &[f32] {
        &self.vectors
    }
}

/// Splits n into m_concepts Zipf-proportioned sizes that sum to exactly n.
///
/// Largest-remainder rounding keeps the sizes non-increasing in rank. Ranks
/// that would round to zero borrow one vector from the last largest concept
/// so every concept stays populated.
pub fn concept_sizes(n: usize, m_concepts: usize, zipf_exponent_sizes: f64) -> Result<Vec<usize>> {
    if m_concepts < 2 {
        return Err(Error::InvalidParameter(format!(
            "m_concepts must be at least 2, got {m_concepts}"
        )));
    }
    if n < m_concepts {
        return Err(Error::InvalidParameter(format!(
            "n = {n} cannot give each of {m_concepts} concepts at least one vector"
        )));
    }
    if !(zipf_exponent_sizes >= 0.0) {
        return Err(Error::InvalidParameter(
            "zipf_exponent_sizes must be nonnegative".into(),
        ));
    }
    let weights: Vec<f64> = (1..=m_concepts)
        .map(|j| (j as f64).powf(-zipf_exponent_sizes))
        .collect();
    let total: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| n as f64 * w / total).collect();
    let mut sizes: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();

    let mut order: Vec<usize> = (0..m_concepts).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &c in order.iter().take(n - assigned) {
        sizes[c] += 1;
    }

    for c in 0..m_concepts {
        if sizes[c] == 0 {
            let max = *sizes.iter().max().expect("nonempty");
            let donor = (0..m_concepts)
                .rev()
                .find(|&i| sizes[i] == max)
                .expect("nonempty");
            sizes[donor] -= 1;
            sizes[c] = 1;
        }
    }

    debug_assert_eq!(sizes.iter().sum::<usize>(), n);
    debug_assert!(sizes.windows(2).all(|w| w[0] >= w[1]));
    Ok(sizes)
}

fn sample_unit(rng: &mut ChaCha12Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn sample_separated_centers(
    rng: &mut ChaCha12Rng,
    m_concepts: usize,
    dim: usize,
) -> Result<Vec<Vec<f64>>> {
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(m_concepts);
    for _ in 0..m_concepts {
        let mut placed = false;
        for _ in 0..CENTER_ATTEMPTS {
            let cand = sample_unit(rng, dim);
            let separated = centers.iter().all(|prev| {
                prev.iter().zip(&cand).map(|(a, b)| a * b).sum::<f64>() <= CENTER_MAX_DOT
            });
            if separated {
                centers.push(cand);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::InvalidParameter(format!(
                "could not place {m_concepts} concept centers with pairwise inner product <= {CENTER_MAX_DOT} at dim {dim}"
            )));
        }
    }
    Ok(centers)
}

fn sample_member(rng: &mut ChaCha12Rng, center: &[f64], spread: f64) -> Vec<f64> {
    loop {
        let mut row: Vec<f64> = center
            .iter()
            .map(|&c| c + spread * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            for x in row.iter_mut() {
                *x /= norm;
            }
            return row;
        }
    }
}

/// Generates a unit-normalized synthetic set with planted concept labels.
pub fn generate_synthetic(config: &SynthConfig) -> Result<VectorSet> {
    config.validate()?;
    let sizes = concept_sizes(config.n, config.m_concepts, config.zipf_exponent_sizes)?;
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let centers = sample_separated_centers(&mut rng, config.m_concepts, config.dim)?;

    let mut vectors = Vec::with_capacity(config.n * config.dim);
    let mut labels = Vec::with_capacity(config.n);
    let size_0 = sizes[0] as f64;
    for (c, &size) in sizes.iter().enumerate() {
        let spread = config.base_spread * (size as f64 / size_0).powf(-config.alpha);
        for _ in 0..size {
            let row = sample_member(&mut rng, &centers[c], spread);
            vectors.extend(row.iter().map(|&x| x as f32));
            labels.push(c as u32);
        }
    }
    VectorSet::new(config.dim, vectors, Some(labels))
}

/// Scales every row to unit L2 norm. Ids and labels carry over.
pub fn normalize(vs: &VectorSet) -> Result<VectorSet> {
    let mut out = Vec::with_capacity(vs.vectors.len());
    for i in 0..vs.len() {
        let row = vs.row(i);
        let norm = vecmath::l2_norm(row);
        if !(norm > 0.0) {
            return Err(Error::ZeroNormRow { id: vs.ids[i] });
        }
        out.extend(row.iter().map(|&x| (x as f64 / norm) as f32));
    }
    VectorSet::new(vs.dim, out, vs.labels.clone())
}

pub fn save_vectors(vs: &VectorSet, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    binio::write_u32(&mut w, vs.len() as u32)?;
    binio::write_u32(&mut w, vs.dim as u32)?;
    let has_labels = u8::from(vs.labels.is_some());
    w.write_all(&[has_labels, 0, 0, 0])?;
    for &x in &vs.vectors {
        binio::write_f32(&mut w, x)?;
    }
    if let Some(labels) = &vs.labels {
        for &l in labels {
            binio::write_u32(&mut w, l)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_vectors(path: &Path) -> Result<VectorSet> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| binio::truncated(e, "magic"))?;
    if &magic != MAGIC {
        return Err(Error::Format(format!(
            "bad magic {magic:?}, expected {MAGIC:?}"
        )));
    }
    let n = binio::read_u32(&mut r, "header n")? as usize;
    let dim = binio::read_u32(&mut r, "header dim")? as usize;
    let mut flags = [0u8; 4];
    r.read_exact(&mut flags)
        .map_err(|e| binio::truncated(e, "header flags"))?;
    if flags[1] != 0 || flags[2] != 0 || flags[3] != 0 {
        return Err(Error::Format("nonzero padding bytes in header".into()));
    }
    let has_labels = match flags[0] {
        0 => false,
        1 => true,
        other => return Err(Error::Format(format!("bad has_labels flag {other}"))),
    };
    let vectors = binio::read_f32_vec(&mut r, n * dim, "vector payload")?;
    let labels = if has_labels {
        Some(binio::read_u32_vec(&mut r, n, "labels")?)
    } else {
        None
    };
    binio::expect_eof(&mut r, "vector payload")?;
    VectorSet::new(dim, vectors, labels)
}
