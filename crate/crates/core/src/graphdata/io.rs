//! Native dataset directory format.
//!
//! ```text
//! <dir>/meta.json      {"name", "num_nodes", "num_features", "num_classes"}
//! <dir>/edges.tsv      src<TAB>dst per line, undirected
//! <dir>/features.bin   f32 little-endian, row-major, num_nodes x num_features
//! <dir>/labels.bin     i32 little-endian, num_nodes, -1 = unlabeled
//! <dir>/splits.json    optional {"train", "valid", "test"}
//! ```
//!
//! A benchmark is a directory of such datasets plus `benchmark.json`.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Benchmark, ClassMapping, Graph, OodUnit, Splits};
use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

const META: &str = "meta.json";
const EDGES: &str = "edges.tsv";
const FEATURES: &str = "features.bin";
const LABELS: &str = "labels.bin";
const SPLITS: &str = "splits.json";
const MANIFEST: &str = "benchmark.json";

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    name: String,
    num_nodes: usize,
    num_features: usize,
    num_classes: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UnitEntry {
    graph: String,
    mask: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    scenario: String,
    id: String,
    ood_test: Vec<UnitEntry>,
    ood_exposure: Option<UnitEntry>,
    class_remap: Option<Vec<ClassMapping>>,
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable value");
    text.push('\n');
    write(path, text.as_bytes())
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::format(path, e.to_string()))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Reads and validates a dataset directory.
pub fn load_graph(dir: &Path) -> Result<Graph> {
    let meta_path = dir.join(META);
    let meta: Meta = read_json(&meta_path)?;
    let (n, d) = (meta.num_nodes, meta.num_features);

    let edges_path = dir.join(EDGES);
    let text = String::from_utf8(read(&edges_path)?)
        .map_err(|_| Error::format(&edges_path, "not valid UTF-8"))?;
    let mut edges = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::format(&edges_path, format!("line {}: expected 'src<TAB>dst'", lineno + 1));
        let (a, b) = line.split_once('\t').ok_or_else(bad)?;
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        if a >= n || b >= n {
            return Err(Error::format(
                &edges_path,
                format!("line {}: node id out of range for {n} nodes", lineno + 1),
            ));
        }
        edges.push((a, b));
    }

    let feat_path = dir.join(FEATURES);
    let raw = read(&feat_path)?;
    if raw.len() != 4 * n * d {
        return Err(Error::format(
            &feat_path,
            format!(
                "expected {n} x {d} = {} values, found {} bytes",
                n * d,
                raw.len()
            ),
        ));
    }
    let values: Vec<f64> = raw
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::format(&feat_path, "contains non-finite values"));
    }
    let features = DenseMatrix::new(n, d, values).map_err(|e| Error::format(&feat_path, e.to_string()))?;

    let label_path = dir.join(LABELS);
    let raw = read(&label_path)?;
    if raw.len() != 4 * n {
        return Err(Error::format(
            &label_path,
            format!("expected {n} labels, found {} bytes", raw.len()),
        ));
    }
    let labels: Vec<i32> = raw
        .chunks_exact(4)
        .map(|c| i32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    if let Some((i, y)) = labels
        .iter()
        .enumerate()
        .find(|(_, &y)| y < -1 || (y >= 0 && y as usize >= meta.num_classes))
    {
        return Err(Error::format(
            &label_path,
            format!("node {i} has label {y}, outside -1..{}", meta.num_classes),
        ));
    }

    Graph::from_edges(meta.name, &edges, features, labels, meta.num_classes)
        .map_err(|e| Error::format(dir, e.to_string()))
}

/// Writes `g` in the native format. Features are narrowed to `f32`.
pub fn save_graph(g: &Graph, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    let meta = Meta {
        name: g.name().to_string(),
        num_nodes: g.num_nodes(),
        num_features: g.num_features(),
        num_classes: g.num_classes(),
    };
    write_json(&dir.join(META), &meta)?;

    let mut text = String::new();
    for (a, b) in g.edges() {
        text.push_str(&format!("{a}\t{b}\n"));
    }
    write(&dir.join(EDGES), text.as_bytes())?;

    let mut bytes = Vec::with_capacity(4 * g.features().as_slice().len());
    for &v in g.features().as_slice() {
        let narrow = v as f32;
        if !narrow.is_finite() {
            return Err(Error::invalid(format!("feature value {v} overflows f32")));
        }
        bytes.extend_from_slice(&narrow.to_le_bytes());
    }
    write(&dir.join(FEATURES), &bytes)?;

    let bytes: Vec<u8> = g.labels().iter().flat_map(|y| y.to_le_bytes()).collect();
    write(&dir.join(LABELS), &bytes)
}

/// Reads `splits.json` from a dataset directory, if present.
pub fn load_splits(dir: &Path) -> Result<Option<Splits>> {
    let path = dir.join(SPLITS);
    if !path.exists() {
        return Ok(None);
    }
    read_json(&path).map(Some)
}

pub fn save_splits(splits: &Splits, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    write_json(&dir.join(SPLITS), splits)
}

/// Writes a benchmark directory: one dataset subdirectory per distinct
/// graph and a `benchmark.json` manifest.
pub fn save_benchmark(b: &Benchmark, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    let mut written: Vec<(Arc<Graph>, String)> = Vec::new();
    let mut place = |g: &Arc<Graph>, preferred: String| -> Result<String> {
        if let Some((_, name)) = written.iter().find(|(w, _)| Arc::ptr_eq(w, g)) {
            return Ok(name.clone());
        }
        save_graph(g, &dir.join(&preferred))?;
        written.push((g.clone(), preferred.clone()));
        Ok(preferred)
    };
    let id = place(&b.id_graph, "id".to_string())?;
    save_splits(&b.splits, &dir.join(&id))?;
    let mut ood_test = Vec::new();
    for (i, u) in b.ood_test.iter().enumerate() {
        ood_test.push(UnitEntry {
            graph: place(&u.graph, format!("ood_test_{i}"))?,
            mask: u.mask.clone(),
        });
    }
    let ood_exposure = match &b.ood_exposure {
        Some(u) => Some(UnitEntry {
            graph: place(&u.graph, "ood_exposure".to_string())?,
            mask: u.mask.clone(),
        }),
        None => None,
    };
    let manifest = Manifest {
        scenario: b.scenario.clone(),
        id,
        ood_test,
        ood_exposure,
        class_remap: b.class_remap.clone(),
    };
    write_json(&dir.join(MANIFEST), &manifest)
}

/// Reads a benchmark directory written by [`save_benchmark`].
pub fn load_benchmark(dir: &Path) -> Result<Benchmark> {
    let manifest_path = dir.join(MANIFEST);
    let manifest: Manifest = read_json(&manifest_path)?;
    let mut graphs: HashMap<String, Arc<Graph>> = HashMap::new();
    let mut get = |name: &str| -> Result<Arc<Graph>> {
        if name.is_empty() || name.contains(['/', '\\']) || name == ".." {
            return Err(Error::format(&manifest_path, format!("bad graph directory '{name}'")));
        }
        if let Some(g) = graphs.get(name) {
            return Ok(g.clone());
        }
        let g = Arc::new(load_graph(&dir.join(name))?);
        graphs.insert(name.to_string(), g.clone());
        Ok(g)
    };
    let id_graph = get(&manifest.id)?;
    let id_dir: PathBuf = dir.join(&manifest.id);
    let splits = load_splits(&id_dir)?
        .ok_or_else(|| Error::format(id_dir.join(SPLITS), "benchmark needs splits for the in-distribution graph"))?;
    let unit = |e: &UnitEntry, get: &mut dyn FnMut(&str) -> Result<Arc<Graph>>| -> Result<OodUnit> {
        OodUnit::new(get(&e.graph)?, e.mask.clone()).map_err(|err| Error::format(&manifest_path, err.to_string()))
    };
    let mut ood_test = Vec::new();
    for e in &manifest.ood_test {
        ood_test.push(unit(e, &mut get)?);
    }
    let ood_exposure = match &manifest.ood_exposure {
        Some(e) => Some(unit(e, &mut get)?),
        None => None,
    };
    let mut b = Benchmark::new(manifest.scenario, id_graph, splits, ood_test, ood_exposure)
        .map_err(|e| Error::format(&manifest_path, e.to_string()))?;
    b.class_remap = manifest.class_remap;
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Random graph whose features are exactly representable in f32.
    fn random_graph(seed: u64, n: usize, d: usize) -> Graph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.gen::<f64>() < 0.1 {
                    edges.push((i, j));
                }
            }
        }
        let feats = (0..n * d).map(|_| f64::from(rng.gen_range(-5.0f32..5.0))).collect();
        let labels = (0..n).map(|_| rng.gen_range(-1..4)).collect();
        Graph::from_edges("rand", &edges, DenseMatrix::new(n, d, feats).unwrap(), labels, 4).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let tmp = tempfile::tempdir().unwrap();
        for (seed, n) in [(1, 30), (2, 400)] {
            let g = random_graph(seed, n, 7);
            save_graph(&g, tmp.path()).unwrap();
            let back = load_graph(tmp.path()).unwrap();
            assert_eq!(back, g);
        }
    }

    #[test]
    fn minimal_single_node() {
        let tmp = tempfile::tempdir().unwrap();
        let g = Graph::from_edges("one", &[], DenseMatrix::zeros(1, 1), vec![0], 1).unwrap();
        save_graph(&g, tmp.path()).unwrap();
        let back = load_graph(tmp.path()).unwrap();
        assert_eq!(back.num_nodes(), 1);
        assert_eq!(back.num_edges(), 0);
    }

    #[test]
    fn loader_cleans_edges() {
        let tmp = tempfile::tempdir().unwrap();
        let g = Graph::from_edges("g", &[], DenseMatrix::zeros(3, 1), vec![0; 3], 1).unwrap();
        save_graph(&g, tmp.path()).unwrap();
        fs::write(tmp.path().join(EDGES), "0\t1\n1\t0\n2\t2\n\n1\t2\n").unwrap();
        let back = load_graph(tmp.path()).unwrap();
        assert_eq!(back.edges(), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn feature_count_mismatch_names_the_file() {
        let tmp = tempfile::tempdir().unwrap();
        let g = random_graph(3, 10, 2);
        save_graph(&g, tmp.path()).unwrap();
        let bytes = fs::read(tmp.path().join(FEATURES)).unwrap();
        fs::write(tmp.path().join(FEATURES), &bytes[..9 * 2 * 4]).unwrap();
        let err = load_graph(tmp.path()).unwrap_err();
        assert!(matches!(&err, Error::Format { file, .. } if file.ends_with(FEATURES)), "{err}");
    }

    #[test]
    fn label_out_of_range_names_the_file() {
        let tmp = tempfile::tempdir().unwrap();
        let g = random_graph(4, 5, 1);
        save_graph(&g, tmp.path()).unwrap();
        let bad: Vec<u8> = [0i32, 1, 2, 9, 0].iter().flat_map(|y| y.to_le_bytes()).collect();
        fs::write(tmp.path().join(LABELS), bad).unwrap();
        let err = load_graph(tmp.path()).unwrap_err();
        assert!(matches!(&err, Error::Format { file, .. } if file.ends_with(LABELS)), "{err}");
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let tmp = tempfile::tempdir().unwrap();
        let g = random_graph(5, 5, 1);
        save_graph(&g, tmp.path()).unwrap();
        fs::remove_file(tmp.path().join(EDGES)).unwrap();
        assert!(matches!(load_graph(tmp.path()), Err(Error::Io { .. })));
    }

    #[test]
    fn malformed_edge_line() {
        let tmp = tempfile::tempdir().unwrap();
        let g = random_graph(6, 5, 1);
        save_graph(&g, tmp.path()).unwrap();
        fs::write(tmp.path().join(EDGES), "0 1\n").unwrap();
        assert!(matches!(load_graph(tmp.path()), Err(Error::Format { .. })));
        fs::write(tmp.path().join(EDGES), "0\t7\n").unwrap();
        assert!(matches!(load_graph(tmp.path()), Err(Error::Format { .. })));
    }

    #[test]
    fn overwrite_and_unwritable_target() {
        let tmp = tempfile::tempdir().unwrap();
        let g = random_graph(7, 6, 2);
        save_graph(&g, tmp.path()).unwrap();
        save_graph(&g, tmp.path()).unwrap();
        let blocker = tmp.path().join("file");
        fs::write(&blocker, b"x").unwrap();
        assert!(matches!(save_graph(&g, &blocker.join("sub")), Err(Error::Io { .. })));
    }
}
