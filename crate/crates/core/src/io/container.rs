//! Binary index container.
//!
//! ```text
//! magic      8 bytes  "LPANNIDX"
//! major      u32 LE
//! minor      u32 LE
//! header_len u64 LE
//! header     header_len bytes of UTF-8 JSON (IndexHeader)
//! blocks     header.blocks typed blocks, to end of file
//! ```
//!
//! A block is a kind byte (`1` f64, `2` u64, `3` i64), a u64 LE element count
//! and that many 8-byte LE values. The block sequence is a pre-order walk of
//! the scheme tree; `docs/index-format.md` lists it in full.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::base::{CoarseScheme, HashTable, L2Params, L2Scheme, ShiftedGrid};
use crate::cover::{Cluster, SparseCover};
use crate::error::{LpError, Result};
use crate::geometry::{Dataset, MazurMapSpec, NormParam};
use crate::recursive::{
    approximation_bound, exact_table, normalize_norm, AnnIndex, BoundConstants, ClusterEntry, Ladder,
    LadderLevel, LevelSummary, LpScheme, SchemeBody, SchemeConfig,
};

pub const MAGIC: &[u8; 8] = b"LPANNIDX";
pub const FORMAT_MAJOR: u32 = 1;
pub const FORMAT_MINOR: u32 = 0;

const KIND_F64: u8 = 1;
const KIND_U64: u8 = 2;
const KIND_I64: u8 = 3;

const BODY_L2: u64 = 0;
const BODY_LADDER: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexHeader {
    pub version: String,
    pub p: f64,
    pub p_eff: f64,
    pub r: f64,
    pub d: usize,
    pub n: usize,
    pub distinct: usize,
    pub config: SchemeConfig,
    pub holder_factor: f64,
    pub c_p: f64,
    pub achieved_approx: f64,
    pub levels: Vec<LevelSummary>,
    pub blocks: usize,
}

fn bad(msg: impl Into<String>) -> LpError {
    LpError::Format(msg.into())
}

#[derive(Default)]
struct Blocks {
    buf: Vec<u8>,
    count: usize,
}

impl Blocks {
    fn raw(&mut self, kind: u8, len: usize, bytes: impl Iterator<Item = [u8; 8]>) {
        self.buf.push(kind);
        self.buf.extend_from_slice(&(len as u64).to_le_bytes());
        for b in bytes {
            self.buf.extend_from_slice(&b);
        }
        self.count += 1;
    }

    fn f64s(&mut self, v: &[f64]) {
        self.raw(KIND_F64, v.len(), v.iter().map(|x| x.to_le_bytes()));
    }

    fn u64s<I: ExactSizeIterator<Item = u64>>(&mut self, v: I) {
        self.raw(KIND_U64, v.len(), v.map(u64::to_le_bytes));
    }

    fn usizes(&mut self, v: &[usize]) {
        self.u64s(v.iter().map(|&x| x as u64));
    }

    fn i64s(&mut self, v: &[i64]) {
        self.raw(KIND_I64, v.len(), v.iter().map(|x| x.to_le_bytes()));
    }
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
    read: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len());
        let end = end.ok_or_else(|| bad(format!("truncated at byte {}", self.pos)))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn block(&mut self, kind: u8) -> Result<impl Iterator<Item = [u8; 8]> + 'a> {
        let at = self.read;
        let k = self.take(1)?[0];
        if k != kind {
            return Err(bad(format!("block {at}: expected kind {kind}, found {k}")));
        }
        let len = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        let bytes = usize::try_from(len)
            .ok()
            .and_then(|l| l.checked_mul(8))
            .ok_or_else(|| bad(format!("block {at}: length {len} too large")))?;
        let payload = self.take(bytes)?;
        self.read += 1;
        Ok(payload.chunks_exact(8).map(|c| c.try_into().unwrap()))
    }

    fn f64s(&mut self) -> Result<Vec<f64>> {
        Ok(self.block(KIND_F64)?.map(f64::from_le_bytes).collect())
    }

    fn u64s(&mut self) -> Result<Vec<u64>> {
        Ok(self.block(KIND_U64)?.map(u64::from_le_bytes).collect())
    }

    fn i64s(&mut self) -> Result<Vec<i64>> {
        Ok(self.block(KIND_I64)?.map(i64::from_le_bytes).collect())
    }

    fn usizes(&mut self) -> Result<Vec<usize>> {
        self.u64s()?
            .into_iter()
            .map(|x| usize::try_from(x).map_err(|_| bad(format!("id {x} out of range"))))
            .collect()
    }

    fn f64s_n<const N: usize>(&mut self) -> Result<[f64; N]> {
        let v = self.f64s()?;
        let n = v.len();
        v.try_into().map_err(|_| bad(format!("expected {N} scalars, found {n}")))
    }

    fn usizes_n<const N: usize>(&mut self) -> Result<[usize; N]> {
        let v = self.usizes()?;
        let n = v.len();
        v.try_into().map_err(|_| bad(format!("expected {N} counts, found {n}")))
    }
}

fn check_ids(ids: &[usize], bound: usize, what: &str) -> Result<()> {
    match ids.iter().find(|&&i| i >= bound) {
        Some(i) => Err(bad(format!("{what} id {i} out of range 0..{bound}"))),
        None => Ok(()),
    }
}

fn dataset(dim: usize, coords: Vec<f64>) -> Result<Dataset> {
    Dataset::new(dim, coords).map_err(|e| bad(format!("stored points: {e}")))
}

// ---- encoding ----

fn put_node(b: &mut Blocks, node: &LpScheme) {
    b.f64s(&[node.t, node.radius, node.approx]);
    match &node.body {
        SchemeBody::L2(copies) => {
            b.usizes(&[BODY_L2 as usize, copies.len()]);
            for s in copies {
                put_l2(b, s);
            }
        }
        SchemeBody::Ladder(ladder) => {
            let per_copy = ladder.bases.first().map_or(0, Vec::len);
            b.usizes(&[BODY_LADDER as usize, ladder.bases.len(), per_copy, ladder.levels.len()]);
            b.f64s(&[ladder.c0]);
            for s in ladder.bases.iter().flatten() {
                put_coarse(b, s);
            }
            for level in &ladder.levels {
                put_level(b, level);
            }
        }
    }
}

fn put_l2(b: &mut Blocks, s: &L2Scheme) {
    let p = &s.params;
    b.u64s([p.k as u64, p.tables as u64, p.max_probe as u64, s.seed].into_iter());
    b.f64s(&[s.radius, p.width]);
    for t in &s.tables {
        b.f64s(&t.projections);
        b.f64s(&t.offsets);
        let mut keys: Vec<u64> = t.buckets.keys().copied().collect();
        keys.sort_unstable();
        b.u64s(keys.iter().copied());
        b.u64s(keys.iter().map(|k| t.buckets[k].len() as u64));
        let ids: Vec<u64> = keys.iter().flat_map(|k| t.buckets[k].iter().map(|&i| i as u64)).collect();
        b.u64s(ids.into_iter());
    }
}

fn put_coarse(b: &mut Blocks, s: &CoarseScheme) {
    b.f64s(&[s.p.get(), s.radius, s.cell_side, s.approx]);
    b.u64s([s.seed, s.grids.len() as u64].into_iter());
    for g in &s.grids {
        b.f64s(&g.shift);
        let mut cells: Vec<(&[i64], u32)> = g.cells.iter().map(|(k, &v)| (&k[..], v)).collect();
        cells.sort_unstable();
        let flat: Vec<i64> = cells.iter().flat_map(|(k, _)| k.iter().copied()).collect();
        b.i64s(&flat);
        b.u64s(cells.iter().map(|&(_, v)| v as u64));
    }
}

fn put_level(b: &mut Blocks, level: &LadderLevel) {
    let c = &level.cover;
    b.usizes(&[level.index, c.sparsity, c.clusters.len()]);
    b.f64s(&[
        level.base_approx,
        level.new_approx,
        level.beta_eff,
        level.child_approx,
        c.beta,
        c.radius,
        c.diameter_bound,
    ]);
    b.usizes(&c.covering_ref);
    b.u64s(c.clusters.iter().map(|k| k.member_ids.len() as u64));
    let members: Vec<usize> = c.clusters.iter().flat_map(|k| k.member_ids.iter().copied()).collect();
    b.usizes(&members);
    b.u64s(c.clusters.iter().map(|k| k.center_id as u64));
    b.f64s(&c.clusters.iter().map(|k| k.ball_radius).collect::<Vec<_>>());
    for entry in &level.clusters {
        match &entry.map {
            None => b.usizes(&[0]),
            Some(map) => {
                b.usizes(&[1, entry.children.len()]);
                b.f64s(&[map.source(), map.target(), map.c0()]);
                let images = entry.children.first().map(|c| c.points.coords()).unwrap_or(&[]);
                b.f64s(images);
                for child in &entry.children {
                    put_node(b, child);
                }
            }
        }
    }
}

/// Encode the index into `w`.
pub fn write_index<W: Write>(index: &AnnIndex, mut w: W) -> std::io::Result<()> {
    let mut b = Blocks::default();
    b.usizes(&[index.dim, index.internal_of.len(), index.representatives.len()]);
    b.f64s(index.root.points.coords());
    b.usizes(&index.representatives);
    b.usizes(&index.internal_of);
    put_node(&mut b, &index.root);

    let header = IndexHeader {
        version: format!("{FORMAT_MAJOR}.{FORMAT_MINOR}"),
        p: index.config.p,
        p_eff: index.norm.p_eff,
        r: index.config.r,
        d: index.dim,
        n: index.len(),
        distinct: index.distinct_points(),
        config: index.config.clone(),
        holder_factor: index.norm.holder_factor,
        c_p: index.bound.c_p,
        achieved_approx: index.achieved_approx(),
        levels: index.ladder_summary(),
        blocks: b.count,
    };
    let json = serde_json::to_vec(&header).map_err(std::io::Error::other)?;
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_MAJOR.to_le_bytes())?;
    w.write_all(&FORMAT_MINOR.to_le_bytes())?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    w.write_all(&b.buf)
}

pub fn save_index(index: &AnnIndex, path: &Path) -> Result<()> {
    let mut bytes = Vec::new();
    write_index(index, &mut bytes).map_err(|e| LpError::io(path, e))?;
    super::write_atomic(path, &bytes)
}

// ---- decoding ----

struct Decoder<'a> {
    cur: Cursor<'a>,
    dim: usize,
}

impl Decoder<'_> {
    fn node(&mut self, points: Arc<Dataset>) -> Result<LpScheme> {
        let [t, radius, approx] = self.cur.f64s_n()?;
        let head = self.cur.usizes()?;
        match head.first().map(|&k| k as u64) {
            Some(BODY_L2) => {
                let [_, copies] = <[usize; 2]>::try_from(head).map_err(|_| bad("malformed l2 node"))?;
                let copies = (0..copies)
                    .map(|_| self.l2(points.clone()))
                    .collect::<Result<Vec<_>>>()?;
                Ok(LpScheme {
                    t,
                    radius,
                    points,
                    approx,
                    body: SchemeBody::L2(copies),
                })
            }
            Some(BODY_LADDER) => {
                let [_, copies, per_copy, levels] =
                    <[usize; 4]>::try_from(head).map_err(|_| bad("malformed ladder node"))?;
                let [c0] = self.cur.f64s_n()?;
                let bases = (0..copies)
                    .map(|_| {
                        (0..per_copy)
                            .map(|_| self.coarse(points.clone()))
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                let levels = (0..levels)
                    .map(|_| self.level(&points, t, copies))
                    .collect::<Result<Vec<_>>>()?;
                Ok(LpScheme {
                    t,
                    radius,
                    points,
                    approx,
                    body: SchemeBody::Ladder(Ladder { c0, bases, levels }),
                })
            }
            _ => Err(bad("unknown node kind")),
        }
    }

    fn l2(&mut self, points: Arc<Dataset>) -> Result<L2Scheme> {
        let head = self.cur.u64s()?;
        let [k, tables, max_probe, seed] = <[u64; 4]>::try_from(head).map_err(|_| bad("malformed l2 scheme"))?;
        let [radius, width] = self.cur.f64s_n()?;
        let (k, tables) = (k as usize, tables as usize);
        let n = points.len();
        let tables_vec = (0..tables)
            .map(|_| {
                let projections = self.cur.f64s()?;
                let offsets = self.cur.f64s()?;
                if projections.len() != k * self.dim || offsets.len() != k {
                    return Err(bad("hash table projection shape"));
                }
                let keys = self.cur.u64s()?;
                let lens = self.cur.usizes()?;
                let ids = self.cur.usizes()?;
                if lens.len() != keys.len() || lens.iter().sum::<usize>() != ids.len() {
                    return Err(bad("hash table bucket shape"));
                }
                check_ids(&ids, n, "bucket")?;
                let mut buckets = HashMap::with_capacity(keys.len());
                let mut rest = &ids[..];
                for (key, len) in keys.into_iter().zip(lens) {
                    let (head, tail) = rest.split_at(len);
                    buckets.insert(key, head.iter().map(|&i| i as u32).collect());
                    rest = tail;
                }
                Ok(HashTable {
                    projections,
                    offsets,
                    buckets,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(L2Scheme {
            points,
            radius,
            params: L2Params {
                k,
                tables,
                width,
                max_probe: max_probe as usize,
            },
            seed,
            tables: tables_vec,
        })
    }

    fn coarse(&mut self, points: Arc<Dataset>) -> Result<CoarseScheme> {
        let [p, radius, cell_side, approx] = self.cur.f64s_n()?;
        let head = self.cur.u64s()?;
        let [seed, grids] = <[u64; 2]>::try_from(head).map_err(|_| bad("malformed grid scheme"))?;
        let dim = self.dim;
        let n = points.len();
        let grids = (0..grids)
            .map(|_| {
                let shift = self.cur.f64s()?;
                let flat = self.cur.i64s()?;
                let reps = self.cur.usizes()?;
                if shift.len() != dim || flat.len() != reps.len() * dim {
                    return Err(bad("grid shape"));
                }
                check_ids(&reps, n, "grid representative")?;
                let cells = flat
                    .chunks_exact(dim)
                    .zip(reps)
                    .map(|(k, v)| (Box::<[i64]>::from(k), v as u32))
                    .collect();
                Ok(ShiftedGrid { shift, cells })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CoarseScheme {
            points,
            p: NormParam::new(p).map_err(|e| bad(e.to_string()))?,
            radius,
            cell_side,
            approx,
            seed,
            grids,
        })
    }

    fn level(&mut self, points: &Arc<Dataset>, t: f64, copies: usize) -> Result<LadderLevel> {
        let [index, sparsity, n_clusters] = self.cur.usizes_n()?;
        let [base_approx, new_approx, beta_eff, child_approx, beta, radius, diameter_bound] = self.cur.f64s_n()?;
        let n = points.len();
        let covering_ref = self.cur.usizes()?;
        let lens = self.cur.usizes()?;
        let members = self.cur.usizes()?;
        let centers = self.cur.usizes()?;
        let radii = self.cur.f64s()?;
        if covering_ref.len() != n
            || lens.len() != n_clusters
            || centers.len() != n_clusters
            || radii.len() != n_clusters
            || lens.iter().sum::<usize>() != members.len()
        {
            return Err(bad(format!("cover shape at ladder level {index}")));
        }
        check_ids(&covering_ref, n_clusters, "cluster")?;
        check_ids(&members, n, "member")?;
        check_ids(&centers, n, "center")?;

        let mut clusters = Vec::with_capacity(n_clusters);
        let mut entries = Vec::with_capacity(n_clusters);
        let mut rest = &members[..];
        for ((len, center_id), ball_radius) in lens.into_iter().zip(centers).zip(radii) {
            let (head, tail) = rest.split_at(len);
            rest = tail;
            if head.is_empty() || head.windows(2).any(|w| w[0] >= w[1]) {
                return Err(bad(format!("unsorted or empty cluster at ladder level {index}")));
            }
            let cluster = Cluster {
                member_ids: head.to_vec(),
                center_id,
                ball_radius,
            };
            let flag = self.cur.usizes()?;
            let entry = match flag.as_slice() {
                [0] => ClusterEntry {
                    map: None,
                    children: Vec::new(),
                },
                [1, kids] if *kids == copies => {
                    let [p, q, c0] = self.cur.f64s_n()?;
                    let map = MazurMapSpec::new(p, q, c0).map_err(|e| bad(e.to_string()))?;
                    if p != t {
                        return Err(bad("Mazur map exponent does not match its level"));
                    }
                    let images = Arc::new(dataset(self.dim, self.cur.f64s()?)?);
                    if images.len() != cluster.len() {
                        return Err(bad("image count differs from cluster size"));
                    }
                    let children = (0..copies)
                        .map(|_| self.node(images.clone()))
                        .collect::<Result<Vec<_>>>()?;
                    ClusterEntry {
                        map: Some(map),
                        children,
                    }
                }
                _ => return Err(bad("malformed cluster entry")),
            };
            clusters.push(cluster);
            entries.push(entry);
        }
        Ok(LadderLevel {
            index,
            base_approx,
            new_approx,
            beta_eff,
            child_approx,
            cover: SparseCover {
                clusters,
                covering_ref,
                beta,
                radius,
                diameter_bound,
                sparsity,
            },
            clusters: entries,
        })
    }
}

/// Decode a whole container held in memory.
pub fn read_index(bytes: &[u8]) -> Result<(IndexHeader, AnnIndex)> {
    let mut cur = Cursor {
        data: bytes,
        pos: 0,
        read: 0,
    };
    if cur.take(8).ok() != Some(&MAGIC[..]) {
        return Err(bad("not an index file (bad magic)"));
    }
    let major = u32::from_le_bytes(cur.take(4)?.try_into().unwrap());
    let _minor = u32::from_le_bytes(cur.take(4)?.try_into().unwrap());
    if major != FORMAT_MAJOR {
        return Err(bad(format!("unsupported format version {major}, expected {FORMAT_MAJOR}")));
    }
    let len = u64::from_le_bytes(cur.take(8)?.try_into().unwrap());
    let len = usize::try_from(len).map_err(|_| bad("header too large"))?;
    let header: IndexHeader =
        serde_json::from_slice(cur.take(len)?).map_err(|e| bad(format!("header: {e}")))?;
    header.config.validate().map_err(|e| bad(format!("header config: {e}")))?;

    let [dim, n, distinct] = cur.usizes_n()?;
    if dim != header.d || n != header.n || distinct != header.distinct || dim == 0 {
        return Err(bad("header and body disagree on d or n"));
    }
    let points = Arc::new(dataset(dim, cur.f64s()?)?);
    let representatives = cur.usizes()?;
    let internal_of = cur.usizes()?;
    if points.len() != distinct || representatives.len() != distinct || internal_of.len() != n {
        return Err(bad("id table sizes"));
    }
    check_ids(&representatives, n, "representative")?;
    check_ids(&internal_of, distinct, "internal")?;

    let mut dec = Decoder { cur, dim };
    let root = dec.node(points.clone())?;
    if dec.cur.read != header.blocks || dec.cur.pos != bytes.len() {
        return Err(bad(format!(
            "expected {} blocks ending the file, read {} ending at byte {} of {}",
            header.blocks,
            dec.cur.read,
            dec.cur.pos,
            bytes.len()
        )));
    }

    let config = header.config.clone();
    let index = AnnIndex {
        norm: normalize_norm(config.p, dim),
        dim,
        representatives,
        internal_of,
        exact: exact_table(&points),
        bound: approximation_bound(&config, dim, BoundConstants::Implemented),
        config,
        root,
    };
    Ok((header, index))
}

pub fn load_index(path: &Path) -> Result<(IndexHeader, AnnIndex)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| LpError::io(path, e))?;
    read_index(&bytes)
}
