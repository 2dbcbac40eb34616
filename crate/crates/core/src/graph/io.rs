//! Edge-list ingestion, graph bundle serialization and the summary manifest.
//!
//! Edge files are TSV with a `src<TAB>dst` header and an optional `score`
//! column. The bundle is a single TSV-like file:
//!
//! ```text
//! # dglink graph v1
//! node<TAB>gene<TAB>ABCA1
//! node<TAB>disease<TAB>C0002395
//! edge<TAB>GD<TAB>ABCA1<TAB>C0002395
//! ```
//!
//! Nodes are listed in index order, edges in relation order GG, DD, GD.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{HeteroGraph, NodeKind, RelationKind};
use crate::error::{Error, Result};

pub const BUNDLE_FILE: &str = "graph.tsv";
pub const MANIFEST_FILE: &str = "manifest.tsv";
const BUNDLE_MAGIC: &str = "# dglink graph v1";

/// Score threshold for the DisGeNET-derived graph variants 1-5.
/// Variant 5 (curated) applies no threshold.
pub fn variant_threshold(variant: u8) -> Option<Option<f64>> {
    match variant {
        1 => Some(Some(0.9)),
        2 => Some(Some(0.5)),
        3 => Some(Some(0.1)),
        4 => Some(Some(0.05)),
        5 => Some(None),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRecord {
    pub src: String,
    pub dst: String,
    pub score: Option<f64>,
}

/// Reads an edge TSV. With `threshold`, rows scoring below it are dropped and
/// the file must carry a `score` column.
pub fn read_edge_file(path: &Path, threshold: Option<f64>) -> Result<Vec<EdgeRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "missing header"))?;
    let cols: Vec<&str> = header.split('\t').map(str::trim).collect();
    let find = |name: &str| cols.iter().position(|c| *c == name);
    let (src_col, dst_col) = match (find("src"), find("dst")) {
        (Some(s), Some(d)) => (s, d),
        _ => return Err(Error::parse(path, 1, "header must contain `src` and `dst`")),
    };
    let score_col = find("score");
    if threshold.is_some() && score_col.is_none() {
        return Err(Error::MissingScoreColumn(path.to_path_buf()));
    }

    let mut out = Vec::new();
    for (lineno, line) in lines {
        let fields: Vec<&str> = line.split('\t').collect();
        let get = |c: usize| {
            fields
                .get(c)
                .map(|s| s.trim())
                .filter(|s| !s.is_empty())
                .ok_or_else(|| Error::parse(path, lineno + 1, format!("missing column {}", c + 1)))
        };
        let score = match score_col {
            Some(c) => Some(get(c)?.parse::<f64>().map_err(|e| {
                Error::parse(path, lineno + 1, format!("bad score: {e}"))
            })?),
            None => None,
        };
        if let (Some(t), Some(s)) = (threshold, score) {
            if s < t {
                continue;
            }
        }
        out.push(EdgeRecord {
            src: get(src_col)?.to_string(),
            dst: get(dst_col)?.to_string(),
            score,
        });
    }
    Ok(out)
}

impl HeteroGraph {
    /// Assembles a graph from GG (gene-gene), DD (disease-disease) and GD
    /// (src gene, dst disease) edge records. Genes are indexed first, then
    /// diseases, each in sorted id order, so indexing does not depend on file
    /// row order. Self-pairs in the inputs are dropped.
    pub fn from_edge_records(gg: &[EdgeRecord], dd: &[EdgeRecord], gd: &[EdgeRecord]) -> Result<Self> {
        let mut genes = BTreeSet::new();
        let mut diseases = BTreeSet::new();
        for e in gg {
            genes.extend([e.src.as_str(), e.dst.as_str()]);
        }
        for e in dd {
            diseases.extend([e.src.as_str(), e.dst.as_str()]);
        }
        for e in gd {
            genes.insert(e.src.as_str());
            diseases.insert(e.dst.as_str());
        }
        if let Some(both) = genes.intersection(&diseases).next() {
            return Err(Error::DuplicateNode(both.to_string()));
        }

        let mut g = HeteroGraph::new();
        for id in genes {
            g.add_node(id, NodeKind::Gene)?;
        }
        for id in diseases {
            g.add_node(id, NodeKind::Disease)?;
        }
        for (rel, recs) in [(RelationKind::GG, gg), (RelationKind::DD, dd), (RelationKind::GD, gd)] {
            for e in recs {
                let (a, b) = (g.index_of(&e.src).unwrap(), g.index_of(&e.dst).unwrap());
                if a != b {
                    g.add_edge(rel, a, b)?;
                }
            }
        }
        Ok(g)
    }

    pub fn to_bundle_string(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{BUNDLE_MAGIC}").unwrap();
        for i in 0..self.node_count() {
            writeln!(s, "node\t{}\t{}", self.kind(i), self.id(i)).unwrap();
        }
        for rel in RelationKind::ALL {
            for (a, b) in self.edges(rel) {
                writeln!(s, "edge\t{rel}\t{}\t{}", self.id(a), self.id(b)).unwrap();
            }
        }
        s
    }

    pub fn from_bundle_str(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l == BUNDLE_MAGIC => {}
            _ => return Err(Error::parse(path, 1, "not a dglink graph bundle")),
        }
        let mut g = HeteroGraph::new();
        for (i, line) in lines {
            let lineno = i + 1;
            let f: Vec<&str> = line.split('\t').collect();
            let bad = |m: String| Error::parse(path, lineno, m);
            match f.as_slice() {
                ["node", kind, id] => {
                    g.add_node(id, kind.parse().map_err(bad)?)?;
                }
                ["edge", rel, a, b] => {
                    let rel: RelationKind = rel.parse().map_err(bad)?;
                    let lookup = |id: &str| {
                        g.index_of(id)
                            .ok_or_else(|| Error::parse(path, lineno, format!("edge references unknown node `{id}`")))
                    };
                    let (a, b) = (lookup(a)?, lookup(b)?);
                    g.add_edge(rel, a, b)?;
                }
                [""] => {}
                _ => return Err(Error::parse(path, lineno, "unrecognized bundle line")),
            }
        }
        Ok(g)
    }
}

/// Node and edge counts, in Table-I column order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphManifest {
    pub name: String,
    pub genes: usize,
    pub diseases: usize,
    pub gga: usize,
    pub dda: usize,
    pub gda: usize,
}

impl GraphManifest {
    pub const HEADER: &'static str = "graph\tgenes\tdiseases\tgga\tdda\tgda";

    pub fn of(name: &str, g: &HeteroGraph) -> Self {
        Self {
            name: name.to_string(),
            genes: g.count_of_kind(NodeKind::Gene),
            diseases: g.count_of_kind(NodeKind::Disease),
            gga: g.edge_count(RelationKind::GG),
            dda: g.edge_count(RelationKind::DD),
            gda: g.edge_count(RelationKind::GD),
        }
    }

    pub fn to_tsv(&self) -> String {
        format!(
            "{}\n{}\t{}\t{}\t{}\t{}\t{}\n",
            Self::HEADER,
            self.name,
            self.genes,
            self.diseases,
            self.gga,
            self.dda,
            self.gda
        )
    }
}

/// Writes `graph.tsv` and `manifest.tsv` into `dir`.
pub fn save_bundle(dir: &Path, name: &str, g: &HeteroGraph) -> Result<GraphManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let bundle = dir.join(BUNDLE_FILE);
    fs::write(&bundle, g.to_bundle_string()).map_err(|e| Error::io(&bundle, e))?;
    let manifest = GraphManifest::of(name, g);
    let mpath = dir.join(MANIFEST_FILE);
    fs::write(&mpath, manifest.to_tsv()).map_err(|e| Error::io(&mpath, e))?;
    Ok(manifest)
}

/// Loads a bundle from a directory (or a direct path to `graph.tsv`), returning
/// the graph and the raw bundle bytes for hashing.
pub fn load_bundle(path: &Path) -> Result<(HeteroGraph, Vec<u8>)> {
    let file = if path.is_dir() {
        path.join(BUNDLE_FILE)
    } else {
        path.to_path_buf()
    };
    let bytes = fs::read(&file).map_err(|e| Error::io(&file, e))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| Error::parse(&file, 0, "bundle is not UTF-8"))?;
    Ok((HeteroGraph::from_bundle_str(&text, &file)?, bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn threshold_filtering() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "gd.tsv", "src\tdst\tscore\nG1\tD1\t0.95\nG2\tD1\t0.4\n");
        assert_eq!(read_edge_file(&p, Some(0.9)).unwrap().len(), 1);
        assert_eq!(read_edge_file(&p, Some(0.05)).unwrap().len(), 2);
        assert_eq!(read_edge_file(&p, None).unwrap().len(), 2);

        let plain = write(dir.path(), "gg.tsv", "src\tdst\nG1\tG2\n");
        assert!(matches!(read_edge_file(&plain, Some(0.5)), Err(Error::MissingScoreColumn(_))));
    }

    #[test]
    fn parse_errors_carry_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "gd.tsv", "src\tdst\tscore\nG1\tD1\t0.9\nG2\tD1\tnope\n");
        match read_edge_file(&p, None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let p = write(dir.path(), "x.tsv", "a\tb\n");
        assert!(matches!(read_edge_file(&p, None), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn bundle_round_trip_and_manifest() {
        let rec = |a: &str, b: &str| EdgeRecord {
            src: a.into(),
            dst: b.into(),
            score: None,
        };
        let g = HeteroGraph::from_edge_records(
            &[rec("G1", "G2"), rec("G2", "G3")],
            &[rec("D1", "D2"), rec("D2", "D3")],
            &[rec("G1", "D1"), rec("G3", "D3")],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let m = save_bundle(dir.path(), "toy", &g).unwrap();
        assert_eq!((m.genes, m.diseases, m.gga, m.dda, m.gda), (3, 3, 2, 2, 2));
        let (back, _) = load_bundle(dir.path()).unwrap();
        assert_eq!(back, g);
        assert_eq!(
            fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap(),
            "graph\tgenes\tdiseases\tgga\tdda\tgda\ntoy\t3\t3\t2\t2\t2\n"
        );
    }

    #[test]
    fn gene_and_disease_id_clash() {
        let rec = |a: &str, b: &str| EdgeRecord {
            src: a.into(),
            dst: b.into(),
            score: None,
        };
        let err = HeteroGraph::from_edge_records(&[rec("X", "G2")], &[rec("X", "D2")], &[]).unwrap_err();
        assert!(matches!(err, Error::DuplicateNode(id) if id == "X"));
    }
}
