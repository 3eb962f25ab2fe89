//! Inverted-file index: build, probed search, brute-force oracle, and the
//! AIVF disk format.
//!
//! Cost accounting follows the "vectors examined" convention: cost_vectors
//! counts list entries scored, cost_centroids counts centroid scores, and
//! the two are never mixed.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::binio;
use crate::dataset::VectorSet;
use crate::error::{Error, Result};
use crate::quantizer::{self, Centroids};
use crate::vecmath;

const MAGIC: &[u8; 4] = b"AIVF";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub id: u32,
    pub score: f32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    /// Ranked by score descending, ties by id ascending.
    pub hits: Vec<Hit>,
    /// List entries whose score was computed.
    pub cost_vectors: usize,
    /// Centroid scores computed while ranking lists.
    pub cost_centroids: usize,
    pub probes_used: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct PostingList {
    ids: Vec<u32>,
    vectors: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    centroids: Centroids,
    lists: Vec<PostingList>,
    n_total: usize,
    dim: usize,
}

fn by_score_desc(a: &(f32, u32), b: &(f32, u32)) -> std::cmp::Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

/// Partitions the set into one posting list per centroid, assigning each
/// vector by maximum inner product. List entries stay in ascending id order.
pub fn build_ivf(vs: &VectorSet, centroids: Centroids) -> Result<InvertedIndex> {
    if vs.dim() != centroids.dim() {
        return Err(Error::DimensionMismatch { expected: centroids.dim(), got: vs.dim() });
    }
    let m = centroids.m();
    let mut lists: Vec<PostingList> = (0..m)
        .map(|_| PostingList { ids: Vec::new(), vectors: Vec::new() })
        .collect();
    for i in 0..vs.len() {
        let row = vs.row(i);
        let c = quantizer::assign(&centroids, row)?;
        lists[c].ids.push(vs.ids()[i]);
        lists[c].vectors.extend_from_slice(row);
    }
    Ok(InvertedIndex { lists, n_total: vs.len(), dim: vs.dim(), centroids })
}

impl InvertedIndex {
    pub fn m(&self) -> usize {
        self.lists.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn centroids(&self) -> &Centroids {
        &self.centroids
    }

    pub fn list_len(&self, cluster: usize) -> usize {
        self.lists[cluster].ids.len()
    }

    pub fn list_ids(&self, cluster: usize) -> &[u32] {
        &self.lists[cluster].ids
    }

    /// Dense id -> cluster map reconstructed from the lists.
    pub fn assignments(&self) -> Vec<u32> {
        let mut out = vec![0u32; self.n_total];
        for (c, list) in self.lists.iter().enumerate() {
            for &id in &list.ids {
                out[id as usize] = c as u32;
            }
        }
        out
    }

    /// Ranks all m centroids by inner product, scans the best `probes`
    /// lists, and returns the top_r entries overall.
    pub fn search(&self, q: &[f32], probes: usize, top_r: usize) -> Result<SearchResult> {
        if q.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: q.len() });
        }
        let m = self.m();
        if probes == 0 || probes > m {
            return Err(Error::ProbesOutOfRange { probes, m });
        }
        if top_r == 0 {
            return Err(Error::InvalidParameter("top_r must be at least 1".into()));
        }

        let mut ranked: Vec<(f32, u32)> = (0..m)
            .map(|c| (vecmath::dot(self.centroids.row(c), q), c as u32))
            .collect();
        if probes < m {
            ranked.select_nth_unstable_by(probes - 1, by_score_desc);
            ranked.truncate(probes);
        }
        ranked.sort_unstable_by(by_score_desc);

        let mut candidates: Vec<(f32, u32)> = Vec::new();
        let mut cost_vectors = 0usize;
        for &(_, c) in &ranked {
            let list = &self.lists[c as usize];
            cost_vectors += list.ids.len();
            for (j, &id) in list.ids.iter().enumerate() {
                let v = &list.vectors[j * self.dim..(j + 1) * self.dim];
                candidates.push((vecmath::dot(v, q), id));
            }
        }
        if candidates.len() > top_r {
            candidates.select_nth_unstable_by(top_r - 1, by_score_desc);
            candidates.truncate(top_r);
        }
        candidates.sort_unstable_by(by_score_desc);

        let hits = candidates.into_iter().map(|(score, id)| Hit { id, score }).collect();
        Ok(SearchResult { hits, cost_vectors, cost_centroids: m, probes_used: probes })
    }
}

/// Exact top_r by inner product over the whole set. The ground-truth oracle:
/// scores are computed with the same arithmetic as search, so full probing
/// and brute force agree bit for bit.
pub fn brute_force(vs: &VectorSet, q: &[f32], top_r: usize) -> Result<SearchResult> {
    if q.len() != vs.dim() {
        return Err(Error::DimensionMismatch { expected: vs.dim(), got: q.len() });
    }
    if top_r == 0 {
        return Err(Error::InvalidParameter("top_r must be at least 1".into()));
    }
    let mut candidates: Vec<(f32, u32)> = (0..vs.len())
        .map(|i| (vecmath::dot(vs.row(i), q), vs.ids()[i]))
        .collect();
    if candidates.len() > top_r {
        candidates.select_nth_unstable_by(top_r - 1, by_score_desc);
        candidates.truncate(top_r);
    }
    candidates.sort_unstable_by(by_score_desc);
    let hits = candidates.into_iter().map(|(score, id)| Hit { id, score }).collect();
    Ok(SearchResult { hits, cost_vectors: vs.len(), cost_centroids: 0, probes_used: 0 })
}

pub fn save_index(ix: &InvertedIndex, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    binio::write_u32(&mut w, VERSION)?;
    binio::write_u32(&mut w, ix.m() as u32)?;
    binio::write_u32(&mut w, ix.dim as u32)?;
    binio::write_u64(&mut w, ix.n_total as u64)?;
    for &x in ix.centroids.vectors() {
        binio::write_f32(&mut w, x)?;
    }
    for list in &ix.lists {
        binio::write_u64(&mut w, list.ids.len() as u64)?;
        for (j, &id) in list.ids.iter().enumerate() {
            binio::write_u32(&mut w, id)?;
            for &x in &list.vectors[j * ix.dim..(j + 1) * ix.dim] {
                binio::write_f32(&mut w, x)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Loads an index written by save_index. Training metadata (SSE, iteration
/// count) is not stored in the format; loaded centroids report zero for it.
pub fn load_index(path: &Path) -> Result<InvertedIndex> {
    let file_size = std::fs::metadata(path)?.len();
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| binio::truncated(e, "magic"))?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}, expected {MAGIC:?}")));
    }
    let version = binio::read_u32(&mut r, "version")?;
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported index version {version}, expected {VERSION}"
        )));
    }
    let m = binio::read_u32(&mut r, "header m")? as usize;
    let dim = binio::read_u32(&mut r, "header dim")? as usize;
    let n_total64 = binio::read_u64(&mut r, "header n_total")?;
    if m == 0 || dim < 2 {
        return Err(Error::Format(format!("bad index header: m = {m}, dim = {dim}")));
    }
    if m as u64 > file_size / (dim as u64 * 4) {
        return Err(Error::Format(format!(
            "centroid block for m = {m}, dim = {dim} exceeds the file size"
        )));
    }
    let entry_bytes = 4 + dim as u64 * 4;
    if n_total64 > file_size / entry_bytes {
        return Err(Error::Format(format!(
            "header n_total {n_total64} exceeds what the file can hold"
        )));
    }
    let n_total = n_total64 as usize;
    let centroid_block = binio::read_f32_vec(&mut r, m * dim, "centroid block")?;
    let mut lists = Vec::with_capacity(m);
    let mut total = 0usize;
    let mut seen = vec![false; n_total];
    for _ in 0..m {
        let len64 = binio::read_u64(&mut r, "list length")?;
        if len64 > n_total as u64 {
            return Err(Error::Format(format!(
                "list length {len64} exceeds n_total {n_total}"
            )));
        }
        let len = len64 as usize;
        let mut ids = Vec::with_capacity(len);
        let mut vectors = Vec::with_capacity(len * dim);
        for _ in 0..len {
            let id = binio::read_u32(&mut r, "list entry id")?;
            if id as usize >= n_total {
                return Err(Error::Format(format!(
                    "entry id {id} out of range for n_total {n_total}"
                )));
            }
            if seen[id as usize] {
                return Err(Error::Format(format!("id {id} appears in more than one list")));
            }
            seen[id as usize] = true;
            ids.push(id);
            let row = binio::read_f32_vec(&mut r, dim, "list entry vector")?;
            vectors.extend_from_slice(&row);
        }
        total += len;
        lists.push(PostingList { ids, vectors });
    }
    if total != n_total {
        return Err(Error::Format(format!(
            "list lengths sum to {total}, header says n_total {n_total}"
        )));
    }
    binio::expect_eof(&mut r, "index payload")?;
    let centroids = Centroids::from_parts(dim, centroid_block, 0.0, 0);
    Ok(InvertedIndex { centroids, lists, n_total, dim })
}
