//! Exact Cayley balls.
//!
//! `enumerate_ball` runs breadth-first multiplication from the identity and
//! keeps every element with its exact word norm. Elements are stored in
//! canonical order, meaning sorted by (norm, canonical key); since norms are
//! discovered level by level, the list for radius r-1 is always a prefix of
//! the list for radius r, which the analysis modules lean on heavily.

use crate::backend::Element;
use crate::config::DEFAULT_ELEMENT_CAP;
use crate::error::{Error, Result};
use crate::marked::MarkedGroup;
use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

pub const NO_NEIGHBOR: u32 = u32::MAX;
const CACHE_MAGIC: &[u8; 7] = b"FGBALL1";

pub struct Ball {
    group: MarkedGroup,
    radius: u32,
    elements: Vec<Element>,
    keys: Vec<Vec<u8>>,
    norms: Vec<u32>,
    sphere_sizes: Vec<u64>,
    cum_sizes: Vec<usize>,
    index: HashMap<Vec<u8>, u32>,
    /// Flat |B| x |S| table: index of element * generator, or NO_NEIGHBOR.
    neighbors: Vec<u32>,
    saturated_at: Option<u32>,
}

impl std::fmt::Debug for Ball {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Ball")
            .field("group", &self.group.backend().describe())
            .field("radius", &self.radius)
            .field("len", &self.elements.len())
            .finish()
    }
}

pub fn enumerate_ball(group: &MarkedGroup, radius: u32, cap: usize) -> Result<Ball> {
    let id = group.identity();
    let mut elements = vec![id.clone()];
    let mut keys = vec![id.canonical_key()];
    let mut norms = vec![0u32];
    let mut index: HashMap<Vec<u8>, u32> = HashMap::new();
    index.insert(keys[0].clone(), 0);

    let mut sphere_sizes = vec![1u64];
    let mut saturated_at = None;
    let mut level_start = 0usize;

    for r in 1..=radius {
        let level_end = elements.len();
        let mut fresh: Vec<(Vec<u8>, Element)> = Vec::new();
        if saturated_at.is_none() {
            for i in level_start..level_end {
                for s in group.generators() {
                    let y = group.multiply(&elements[i], s)?;
                    let k = y.canonical_key();
                    if !index.contains_key(&k) {
                        // reserve the slot now so duplicates within the level
                        // are caught; real indices are assigned after sorting
                        index.insert(k.clone(), u32::MAX);
                        fresh.push((k, y));
                    }
                }
            }
            fresh.sort_by(|a, b| a.0.cmp(&b.0));
            if fresh.is_empty() {
                saturated_at = Some(r);
            }
            if elements.len() + fresh.len() > cap {
                return Err(Error::ElementBudget {
                    count: elements.len() + fresh.len(),
                    radius: r,
                    cap,
                });
            }
        }
        sphere_sizes.push(fresh.len() as u64);
        for (k, e) in fresh {
            let idx = elements.len() as u32;
            *index.get_mut(&k).expect("reserved") = idx;
            elements.push(e);
            keys.push(k);
            norms.push(r);
        }
        level_start = level_end;
    }

    let mut cum_sizes = Vec::with_capacity(sphere_sizes.len());
    let mut acc = 0usize;
    for &s in &sphere_sizes {
        acc += s as usize;
        cum_sizes.push(acc);
    }

    let mut ball = Ball {
        group: group.clone(),
        radius,
        elements,
        keys,
        norms,
        sphere_sizes,
        cum_sizes,
        index,
        neighbors: Vec::new(),
        saturated_at,
    };
    ball.build_neighbors()?;
    Ok(ball)
}

impl Ball {
    fn build_neighbors(&mut self) -> Result<()> {
        let ngen = self.group.generator_count();
        let mut table = vec![NO_NEIGHBOR; self.elements.len() * ngen];
        for i in 0..self.elements.len() {
            for (j, s) in self.group.generators().iter().enumerate() {
                let y = self.group.multiply(&self.elements[i], s)?;
                if let Some(&idx) = self.index.get(&y.canonical_key()) {
                    table[i * ngen + j] = idx;
                }
            }
        }
        self.neighbors = table;
        Ok(())
    }

    pub fn group(&self) -> &MarkedGroup {
        &self.group
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn element(&self, i: usize) -> &Element {
        &self.elements[i]
    }

    pub fn key(&self, i: usize) -> &[u8] {
        &self.keys[i]
    }

    pub fn norm(&self, i: usize) -> u32 {
        self.norms[i]
    }

    pub fn index_of(&self, e: &Element) -> Option<usize> {
        self.index.get(&e.canonical_key()).map(|&i| i as usize)
    }

    pub fn index_of_key(&self, key: &[u8]) -> Option<usize> {
        self.index.get(key).map(|&i| i as usize)
    }

    pub fn sphere_size(&self, r: u32) -> u64 {
        self.sphere_sizes[r as usize]
    }

    /// |B(r)| for any r up to the enumerated radius.
    pub fn ball_size(&self, r: u32) -> usize {
        self.cum_sizes[r as usize]
    }

    /// Elements 0..prefix_len(r) are exactly the ball of radius r.
    pub fn prefix_len(&self, r: u32) -> usize {
        self.cum_sizes[r as usize]
    }

    /// Radius at which the sphere first came back empty (finite group fully
    /// enumerated), if that happened within this ball.
    pub fn saturated_at(&self) -> Option<u32> {
        self.saturated_at
    }

    /// Index of element(i) * generator(j), if the product stays in the ball.
    pub fn neighbor(&self, i: usize, j: usize) -> Option<usize> {
        let v = self.neighbors[i * self.group.generator_count() + j];
        if v == NO_NEIGHBOR {
            None
        } else {
            Some(v as usize)
        }
    }

    /// Exact word norm of an element of this ball.
    pub fn norm_of(&self, e: &Element) -> Option<u32> {
        self.index_of(e).map(|i| self.norms[i])
    }

    pub fn check_radius(&self, r: u32) -> Result<()> {
        if r > self.radius {
            Err(Error::RadiusOutOfRange { radius: r, available: self.radius })
        } else {
            Ok(())
        }
    }

    /// Serializes the ball: versioned header (magic, fingerprint, radius,
    /// counts, sphere sizes) followed by length-prefixed canonical keys in
    /// canonical order. The write goes through a temp file and a rename so a
    /// crashed run never leaves a torn cache.
    pub fn write_cache(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(self.keys.iter().map(|k| k.len() + 4).sum::<usize>() + 64);
        buf.extend_from_slice(CACHE_MAGIC);
        let fp = self.group.fingerprint().as_bytes();
        buf.extend_from_slice(&(fp.len() as u16).to_le_bytes());
        buf.extend_from_slice(fp);
        buf.extend_from_slice(&self.radius.to_le_bytes());
        buf.extend_from_slice(&(self.elements.len() as u64).to_le_bytes());
        for &s in &self.sphere_sizes {
            buf.extend_from_slice(&s.to_le_bytes());
        }
        for k in &self.keys {
            buf.extend_from_slice(&(k.len() as u32).to_le_bytes());
            buf.extend_from_slice(k);
        }
        let tmp = path.with_extension("tmp");
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(&buf)?;
        f.sync_all()?;
        drop(f);
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Loads a cached ball for the given marked group, verifying the magic,
    /// the fingerprint and every key round trip.
    pub fn read_cache(group: &MarkedGroup, path: &Path) -> Result<Ball> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let mut pos = 0usize;
        let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
            if *pos + n > bytes.len() {
                return Err(Error::CacheCorrupt("truncated".into()));
            }
            let s = &bytes[*pos..*pos + n];
            *pos += n;
            Ok(s)
        };
        if take(&mut pos, 7)? != CACHE_MAGIC {
            return Err(Error::CacheCorrupt("bad magic".into()));
        }
        let fp_len = u16::from_le_bytes(take(&mut pos, 2)?.try_into().unwrap()) as usize;
        let fp = String::from_utf8(take(&mut pos, fp_len)?.to_vec())
            .map_err(|_| Error::CacheCorrupt("fingerprint not utf-8".into()))?;
        if fp != group.fingerprint() {
            return Err(Error::CacheMismatch(format!(
                "cache built for fingerprint {fp}, group has {}",
                group.fingerprint()
            )));
        }
        let radius = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap());
        let count = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()) as usize;
        let mut sphere_sizes = Vec::with_capacity(radius as usize + 1);
        for _ in 0..=radius {
            sphere_sizes.push(u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()));
        }
        if sphere_sizes.iter().map(|&s| s as usize).sum::<usize>() != count {
            return Err(Error::CacheCorrupt("sphere sizes disagree with count".into()));
        }
        let mut elements = Vec::with_capacity(count);
        let mut keys = Vec::with_capacity(count);
        let mut norms = Vec::with_capacity(count);
        let mut index = HashMap::with_capacity(count);
        let mut cum_sizes = Vec::with_capacity(radius as usize + 1);
        let mut acc = 0usize;
        let mut saturated_at = None;
        for (r, &s) in sphere_sizes.iter().enumerate() {
            if s == 0 && r > 0 && saturated_at.is_none() {
                saturated_at = Some(r as u32);
            }
            for _ in 0..s {
                let klen = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
                let k = take(&mut pos, klen)?.to_vec();
                let e = group.backend().element_from_key(&k)?;
                if e.canonical_key() != k {
                    return Err(Error::CacheCorrupt("key does not round trip".into()));
                }
                index.insert(k.clone(), elements.len() as u32);
                elements.push(e);
                keys.push(k);
                norms.push(r as u32);
            }
            acc += s as usize;
            cum_sizes.push(acc);
        }
        if pos != bytes.len() {
            return Err(Error::CacheCorrupt("trailing bytes".into()));
        }
        let mut ball = Ball {
            group: group.clone(),
            radius,
            elements,
            keys,
            norms,
            sphere_sizes,
            cum_sizes,
            index,
            neighbors: Vec::new(),
            saturated_at,
        };
        ball.build_neighbors()?;
        Ok(ball)
    }
}

/// Exact word norm by breadth-first search, `None` if the element is not
/// reached within `max_radius`.
pub fn word_norm(group: &MarkedGroup, target: &Element, max_radius: u32) -> Result<Option<u32>> {
    word_norm_capped(group, target, max_radius, DEFAULT_ELEMENT_CAP)
}

pub fn word_norm_capped(
    group: &MarkedGroup,
    target: &Element,
    max_radius: u32,
    cap: usize,
) -> Result<Option<u32>> {
    group.backend().check(target)?;
    let target_key = target.canonical_key();
    let id = group.identity();
    if id.canonical_key() == target_key {
        return Ok(Some(0));
    }
    let mut seen: HashMap<Vec<u8>, ()> = HashMap::new();
    seen.insert(id.canonical_key(), ());
    let mut frontier = vec![id];
    for r in 1..=max_radius {
        let mut next = Vec::new();
        for x in &frontier {
            for s in group.generators() {
                let y = group.multiply(x, s)?;
                let k = y.canonical_key();
                if k == target_key {
                    return Ok(Some(r));
                }
                if !seen.contains_key(&k) {
                    seen.insert(k, ());
                    next.push(y);
                }
            }
        }
        if seen.len() > cap {
            return Err(Error::ElementBudget { count: seen.len(), radius: r, cap });
        }
        if next.is_empty() {
            return Ok(None);
        }
        frontier = next;
    }
    Ok(None)
}
