//! Seeded generators for synthetic feature data with known structure.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::store::{FeatureGrid, FeatureStore};
use crate::vectors::{dot, norm, VectorSet};

pub fn random_unit<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Draws one sample from vMF(`mu`, `kappa`) with Wood's rejection scheme.
pub fn sample_vmf<R: Rng + ?Sized>(rng: &mut R, mu: &[f64], kappa: f64) -> Vec<f64> {
    let d = mu.len();
    assert!(d >= 2 && kappa > 0.0);
    let dm1 = (d - 1) as f64;
    let b = dm1 / (2.0 * kappa + (4.0 * kappa * kappa + dm1 * dm1).sqrt());
    let x0 = (1.0 - b) / (1.0 + b);
    let c = kappa * x0 + dm1 * (1.0 - x0 * x0).ln();
    let beta = Beta::new(dm1 / 2.0, dm1 / 2.0).expect("valid beta parameters");
    let w = loop {
        let z: f64 = beta.sample(rng);
        let w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
        let u: f64 = rng.gen();
        if kappa * w + dm1 * (1.0 - x0 * w).ln() - c >= u.ln() {
            break w;
        }
    };
    // unit direction orthogonal to mu
    let perp = loop {
        let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let proj = dot(&g, mu);
        let p: Vec<f64> = g.iter().zip(mu).map(|(x, m)| x - proj * m).collect();
        let n = norm(&p);
        if n > 1e-12 {
            break p.into_iter().map(|x| x / n).collect::<Vec<_>>();
        }
    };
    let s = (1.0 - w * w).max(0.0).sqrt();
    mu.iter().zip(&perp).map(|(m, p)| w * m + s * p).collect()
}

/// Unit vectors drawn from `k` vMF clusters with random mean directions.
pub struct PlantedClusters {
    pub vectors: VectorSet,
    pub labels: Vec<usize>,
    pub means: Vec<Vec<f64>>,
}

pub fn planted_clusters(dim: usize, k: usize, per_cluster: usize, kappa: f64, seed: u64) -> PlantedClusters {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means: Vec<Vec<f64>> = (0..k).map(|_| random_unit(&mut rng, dim)).collect();
    let mut data = Vec::with_capacity(dim * k * per_cluster);
    let mut labels = Vec::with_capacity(k * per_cluster);
    for (c, mu) in means.iter().enumerate() {
        for _ in 0..per_cluster {
            data.extend(sample_vmf(&mut rng, mu, kappa));
            labels.push(c);
        }
    }
    PlantedClusters {
        vectors: VectorSet::new(dim, data),
        labels,
        means,
    }
}

fn category_table(n: usize) -> BTreeMap<u32, String> {
    (0..n as u32).map(|c| (c, format!("category_{c:02}"))).collect()
}

fn grid(image_id: String, category_id: u32, height: u32, width: u32, channels: u32, data: Vec<f32>) -> FeatureGrid {
    FeatureGrid {
        image_id,
        category_id,
        height,
        width,
        channels,
        data,
        rf_stride: 8,
        rf_size: 36,
        rf_offset: 4,
    }
}

/// Category-specific part directions planted at fixed lattice positions over
/// a background of directions shared by all categories.
#[derive(Clone, Debug)]
pub struct PlantedParts {
    pub categories: usize,
    pub images_per_category: usize,
    pub height: u32,
    pub width: u32,
    pub channels: u32,
    pub parts_per_category: usize,
    pub background_directions: usize,
    pub kappa: f64,
    pub seed: u64,
}

impl Default for PlantedParts {
    fn default() -> Self {
        Self {
            categories: 10,
            images_per_category: 20,
            height: 5,
            width: 5,
            channels: 16,
            parts_per_category: 10,
            background_directions: 4,
            kappa: 30.0,
            seed: 7,
        }
    }
}

impl PlantedParts {
    pub fn generate(&self) -> FeatureStore {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let dim = self.channels as usize;
        let positions = (self.height * self.width) as usize;
        assert!(self.parts_per_category <= positions);
        let background: Vec<Vec<f64>> = (0..self.background_directions.max(1))
            .map(|_| random_unit(&mut rng, dim))
            .collect();
        let background_map: Vec<usize> = (0..positions)
            .map(|_| rng.gen_range(0..background.len()))
            .collect();
        let mut grids = Vec::new();
        for cat in 0..self.categories {
            let sites = rand::seq::index::sample(&mut rng, positions, self.parts_per_category).into_vec();
            let parts: Vec<Vec<f64>> = sites.iter().map(|_| random_unit(&mut rng, dim)).collect();
            for img in 0..self.images_per_category {
                let mut data = Vec::with_capacity(positions * dim);
                for p in 0..positions {
                    let mu = match sites.iter().position(|&s| s == p) {
                        Some(j) => &parts[j],
                        None => &background[background_map[p]],
                    };
                    let scale: f64 = rng.gen_range(0.5..2.0);
                    data.extend(sample_vmf(&mut rng, mu, self.kappa).iter().map(|x| (x * scale) as f32));
                }
                grids.push(grid(
                    format!("c{cat:02}_i{img:03}"),
                    cat as u32,
                    self.height,
                    self.width,
                    self.channels,
                    data,
                ));
            }
        }
        FeatureStore::new("synthetic-parts", category_table(self.categories), grids)
            .expect("generator output is valid")
    }
}

/// Independent Gaussian features with no category structure.
pub fn structureless_store(categories: usize, images_per_category: usize, height: u32, width: u32, channels: u32, seed: u64) -> FeatureStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (height * width * channels) as usize;
    let mut grids = Vec::new();
    for cat in 0..categories {
        for img in 0..images_per_category {
            let data = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) as f32).collect();
            grids.push(grid(format!("c{cat:02}_i{img:03}"), cat as u32, height, width, channels, data));
        }
    }
    FeatureStore::new("synthetic-noise", category_table(categories), grids).expect("generator output is valid")
}

/// Every category holds two grids with identical data, so with one shot and
/// one query the query always duplicates the support.
pub fn duplicate_pairs_store(categories: usize, height: u32, width: u32, channels: u32, seed: u64) -> FeatureStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (height * width * channels) as usize;
    let mut grids = Vec::new();
    for cat in 0..categories {
        let data: Vec<f32> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) as f32).collect();
        for copy in 0..2 {
            grids.push(grid(format!("c{cat:02}_dup{copy}"), cat as u32, height, width, channels, data.clone()));
        }
    }
    FeatureStore::new("synthetic-duplicates", category_table(categories), grids).expect("generator output is valid")
}

/// One grid per sample of [`planted_clusters`]: category = cluster, so
/// hard-assignment purity against categories measures cluster recovery.
pub fn cluster_store(clusters: &PlantedClusters, images_per_cluster: usize) -> FeatureStore {
    let dim = clusters.vectors.dim() as u32;
    let k = clusters.means.len();
    let mut per_cluster: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &l) in clusters.labels.iter().enumerate() {
        per_cluster[l].push(i);
    }
    let mut grids = Vec::new();
    for (c, rows) in per_cluster.iter().enumerate() {
        let chunk = rows.len().div_ceil(images_per_cluster.max(1));
        for (img, part) in rows.chunks(chunk.max(1)).enumerate() {
            let data = part
                .iter()
                .flat_map(|&i| clusters.vectors.row(i).iter().map(|&x| x as f32))
                .collect();
            grids.push(grid(format!("k{c:02}_i{img:03}"), c as u32, 1, part.len() as u32, dim, data));
        }
    }
    FeatureStore::new("synthetic-clusters", category_table(k), grids).expect("generator output is valid")
}
