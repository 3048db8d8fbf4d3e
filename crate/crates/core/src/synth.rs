//! Seeded synthetic vectors, corpora with known geometry, and a small
//! on-disk fixture corpus for end-to-end runs.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::embed::{quantize, EmbeddingTable, QuantizedVector, ReducedVector, REDUCED_DIM};
use crate::search::InMemoryVectors;

/// Uniformly random direction in 256 dimensions.
pub fn random_unit(rng: &mut impl Rng) -> [f64; REDUCED_DIM] {
    loop {
        let mut v = [0.0; REDUCED_DIM];
        v.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
        if let Ok(r) = ReducedVector::normalized(v) {
            v.copy_from_slice(r.as_slice());
            return v;
        }
    }
}

pub fn quantize_unit(v: [f64; REDUCED_DIM]) -> QuantizedVector {
    quantize(&ReducedVector::normalized(v).expect("nonzero input")).expect("unit input quantizes")
}

pub fn random_quantized(rng: &mut impl Rng) -> QuantizedVector {
    quantize_unit(random_unit(rng))
}

/// `centroid + noise`, renormalized, where the noise is isotropic Gaussian
/// with expected total norm `sigma`.
pub fn perturbed(centroid: &[f64; REDUCED_DIM], sigma: f64, rng: &mut impl Rng) -> [f64; REDUCED_DIM] {
    let per_component = sigma / (REDUCED_DIM as f64).sqrt();
    let mut v = *centroid;
    v.iter_mut().for_each(|x| *x += per_component * rng.sample::<f64, _>(StandardNormal));
    let r = ReducedVector::normalized(v).expect("perturbed centroid is nonzero");
    v.copy_from_slice(r.as_slice());
    v
}

#[derive(Debug, Clone)]
pub struct PlantedCorpus {
    pub docs: InMemoryVectors,
    pub centroid: QuantizedVector,
    pub cluster_ids: BTreeSet<u64>,
}

/// `n_random` uniformly random documents plus `n_cluster` documents drawn
/// around one random centroid. Cluster ids are scattered among the rest.
pub fn planted_cluster(n_random: usize, n_cluster: usize, sigma: f64, seed: u64) -> PlantedCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centroid = random_unit(&mut rng);
    let total = n_random + n_cluster;
    let mut ids: Vec<u64> = (0..total as u64).collect();
    rand::seq::SliceRandom::shuffle(&mut ids[..], &mut rng);
    let cluster_ids: BTreeSet<u64> = ids[..n_cluster].iter().copied().collect();
    let mut docs = InMemoryVectors::new();
    for id in 0..total as u64 {
        let v = if cluster_ids.contains(&id) { perturbed(&centroid, sigma, &mut rng) } else { random_unit(&mut rng) };
        docs.push(id, quantize_unit(v).as_slice());
    }
    PlantedCorpus { docs, centroid: quantize_unit(centroid), cluster_ids }
}

/// Topic stems of the fixture corpus.
pub const FIXTURE_TOPICS: [&str; 5] = ["glioma", "cardio", "neuro", "immuno", "renal"];

const TOPIC_WORDS: usize = 30;
const GENERIC_WORDS: usize = 60;

/// Paths of a generated fixture corpus.
#[derive(Debug, Clone)]
pub struct FixtureCorpus {
    pub sidecar: PathBuf,
    pub table: PathBuf,
    pub fixture_dir: PathBuf,
    pub queries: PathBuf,
    pub n_docs: usize,
}

fn topic_word(topic: &str, i: usize) -> String {
    format!("{topic}{i:02}")
}

/// Writes a small topical corpus into `dir`: a sidecar, a base embedding
/// table of dimension `dim`, a stub-expander fixture directory and a
/// queries file. Fully determined by `(n_docs, dim, seed)`.
///
/// Each document leans on one topic. Topic words share a topic direction
/// in the table, and every token also carries a common offset, so mean
/// removal matters. A few documents hold only out-of-table tokens.
pub fn write_fixture_corpus(dir: &Path, n_docs: usize, dim: usize, seed: u64) -> std::io::Result<FixtureCorpus> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gaussian = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..dim).map(|_| rng.sample(StandardNormal)).collect() };
    let unit = |v: Vec<f64>| -> Vec<f64> {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / n).collect()
    };
    let common = unit(gaussian(&mut rng));
    let topic_dirs: Vec<Vec<f64>> = FIXTURE_TOPICS.iter().map(|_| unit(gaussian(&mut rng))).collect();

    let mut table = EmbeddingTable::new(dim);
    let add = |table: &mut EmbeddingTable, token: &str, base: &[f64], own_scale: f64, rng: &mut ChaCha8Rng| {
        let own = unit(gaussian(rng));
        let v: Vec<f32> = (0..dim).map(|i| (common[i] + base[i] + own_scale * own[i]) as f32).collect();
        table.insert(token, &v).expect("fixture vectors are finite");
    };
    let zero = vec![0.0; dim];
    for (t, topic) in FIXTURE_TOPICS.iter().enumerate() {
        for i in 0..TOPIC_WORDS {
            add(&mut table, &topic_word(topic, i), &topic_dirs[t], 0.8, &mut rng);
        }
        add(&mut table, &format!("{topic}_growth_factor"), &topic_dirs[t], 0.5, &mut rng);
    }
    for i in 0..GENERIC_WORDS {
        add(&mut table, &format!("common{i:02}"), &zero, 1.0, &mut rng);
    }

    fs::create_dir_all(dir)?;
    let sidecar = dir.join("corpus.sidecar");
    let mut out = BufWriter::new(File::create(&sidecar)?);
    for d in 0..n_docs {
        let doc_id = 1000 + 7 * d as u64;
        let mut tokens: Vec<(String, u32)> = Vec::new();
        if d % 97 == 13 {
            tokens.push((format!("unseen{d}"), 1));
        } else {
            let t = rng.gen_range(0..FIXTURE_TOPICS.len());
            let topic = FIXTURE_TOPICS[t];
            for i in rand::seq::index::sample(&mut rng, TOPIC_WORDS, 8) {
                tokens.push((topic_word(topic, i), rng.gen_range(1..4)));
            }
            if rng.gen_bool(0.3) {
                tokens.push((format!("{topic}_growth_factor"), 1));
            }
            for i in rand::seq::index::sample(&mut rng, GENERIC_WORDS, 6) {
                tokens.push((format!("common{i:02}"), rng.gen_range(1..3)));
            }
            if rng.gen_bool(0.1) {
                let other = FIXTURE_TOPICS[(t + 1) % FIXTURE_TOPICS.len()];
                tokens.push((topic_word(other, rng.gen_range(0..TOPIC_WORDS)), 1));
            }
            if rng.gen_bool(0.05) {
                tokens.push((format!("rare{}", rng.gen_range(0..1000)), 1));
            }
        }
        let body: Vec<String> = tokens.iter().map(|(t, c)| format!("{t}:{c}")).collect();
        writeln!(out, "{doc_id}\t{}", body.join(" "))?;
    }
    out.flush()?;

    let table_path = dir.join("table.emb");
    table.save(&table_path).map_err(|e| std::io::Error::other(e.to_string()))?;

    let fixture_dir = dir.join("expansions");
    fs::create_dir_all(&fixture_dir)?;
    let mut fixtures = serde_json::Map::new();
    for topic in FIXTURE_TOPICS {
        let mut phrases: Vec<String> = (0..22).map(|i| topic_word(topic, i)).collect();
        phrases.push(format!("{topic} growth factor"));
        phrases.push(format!("{} {}", topic_word(topic, 22), topic_word(topic, 23)));
        phrases.push("unrelated nonsense phrase".into());
        fixtures.insert(format!("{topic} research"), serde_json::json!(phrases));
    }
    fs::write(fixture_dir.join("fixture.json"), serde_json::to_string_pretty(&fixtures)?)?;

    let queries = dir.join("queries.tsv");
    let mut q = BufWriter::new(File::create(&queries)?);
    for (t, topic) in FIXTURE_TOPICS.iter().enumerate() {
        writeln!(q, "q{t}\texpanded\t{topic} research")?;
        writeln!(q, "q{t}\traw\t{} {} {}", topic_word(topic, 0), topic_word(topic, 1), topic_word(topic, 2))?;
    }
    q.flush()?;

    Ok(FixtureCorpus { sidecar, table: table_path, fixture_dir, queries, n_docs })
}
