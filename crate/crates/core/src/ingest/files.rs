//! CSV readers and writers.
//!
//! nodes:    `id,kind,name`
//! edges:    `src,dst,relation`      relation in R1..R5
//! features: `id,f0,...,f{d-1}`      one row per node
//! scores:   `entity_id,side,score,term`

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::{synth_features, ExpertScore, IngestError, Side};
use crate::hin::{Hin, NodeKind, RelationKind};
use crate::numkit::Matrix;

/// Where node features come from.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureSource {
    File(PathBuf),
    /// Standard-normal features of the given width.
    Synthetic {
        seed: u64,
        dim: usize,
    },
}

impl FeatureSource {
    /// Parses a path or the `synthetic:<seed>` token.
    pub fn parse(spec: &str, synthetic_dim: usize) -> Result<Self, IngestError> {
        match spec.strip_prefix("synthetic:") {
            Some(seed) => {
                let seed = seed.trim().parse().map_err(|_| {
                    IngestError::Invalid(format!("bad synthetic feature seed in {spec:?}"))
                })?;
                Ok(FeatureSource::Synthetic {
                    seed,
                    dim: synthetic_dim,
                })
            }
            None => Ok(FeatureSource::File(PathBuf::from(spec))),
        }
    }
}

fn reader(path: &Path) -> Result<csv::Reader<File>, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn expect_header(
    r: &mut csv::Reader<File>,
    path: &Path,
    expected: &[&str],
) -> Result<usize, IngestError> {
    let header = r.headers().map_err(|source| IngestError::Csv {
        path: path.display().to_string(),
        source,
    })?;
    let got: Vec<&str> = header.iter().collect();
    if got.len() < expected.len() || got[..expected.len()] != *expected {
        return Err(IngestError::Parse {
            path: path.display().to_string(),
            line: 1,
            message: format!(
                "expected header starting {:?}, got {:?}",
                expected.join(","),
                got.join(",")
            ),
        });
    }
    Ok(got.len())
}

struct Rows<'a> {
    path: &'a Path,
}

impl Rows<'_> {
    fn err(&self, rec: &csv::StringRecord, message: impl Into<String>) -> IngestError {
        IngestError::Parse {
            path: self.path.display().to_string(),
            line: rec.position().map_or(0, |p| p.line()),
            message: message.into(),
        }
    }

    fn field<T: FromStr>(
        &self,
        rec: &csv::StringRecord,
        i: usize,
        what: &str,
    ) -> Result<T, IngestError> {
        let raw = rec
            .get(i)
            .ok_or_else(|| self.err(rec, format!("missing {what}")))?;
        raw.parse()
            .map_err(|_| self.err(rec, format!("bad {what} {raw:?}")))
    }

    fn records(&self, r: &mut csv::Reader<File>) -> Result<Vec<csv::StringRecord>, IngestError> {
        r.records()
            .collect::<Result<_, _>>()
            .map_err(|source| IngestError::Csv {
                path: self.path.display().to_string(),
                source,
            })
    }
}

/// Reads `id,f0..` rows into an `n x d` matrix; ids must cover 0..n-1.
pub fn load_features(path: &Path, n: usize) -> Result<Matrix, IngestError> {
    let mut r = reader(path)?;
    let width = expect_header(&mut r, path, &["id"])?;
    let d = width - 1;
    let rows = Rows { path };
    let recs = rows.records(&mut r)?;
    if recs.len() != n {
        return Err(IngestError::Invalid(format!(
            "{}: {} feature rows for {n} nodes",
            path.display(),
            recs.len()
        )));
    }
    let mut m = Matrix::zeros(n, d);
    let mut seen = vec![false; n];
    for rec in &recs {
        let id: usize = rows.field(rec, 0, "id")?;
        if id >= n || seen[id] {
            return Err(rows.err(rec, format!("feature id {id} duplicated or out of range")));
        }
        seen[id] = true;
        if rec.len() != width {
            return Err(rows.err(rec, format!("expected {width} columns, got {}", rec.len())));
        }
        for c in 0..d {
            let v: f64 = rows.field(rec, c + 1, "feature value")?;
            m.set(id, c, v);
        }
    }
    Ok(m)
}

pub fn load_graph(
    nodes_path: &Path,
    edges_path: &Path,
    features: &FeatureSource,
) -> Result<Hin, IngestError> {
    let mut r = reader(nodes_path)?;
    expect_header(&mut r, nodes_path, &["id", "kind", "name"])?;
    let rows = Rows { path: nodes_path };
    let mut parsed = Vec::new();
    for rec in rows.records(&mut r)? {
        let id: usize = rows.field(&rec, 0, "id")?;
        let kind: NodeKind = rec
            .get(1)
            .unwrap_or("")
            .parse()
            .map_err(|e: crate::hin::HinError| rows.err(&rec, e.to_string()))?;
        let name = rec.get(2).unwrap_or("").to_string();
        parsed.push((id, kind, name, rec));
    }
    parsed.sort_by_key(|p| p.0);
    let mut hin = Hin::new();
    for (expect, (id, kind, name, rec)) in parsed.iter().enumerate() {
        if *id != expect {
            return Err(rows.err(
                rec,
                format!("node ids must be dense from 0; expected {expect}, found {id}"),
            ));
        }
        hin.add_node(*kind, name)
            .map_err(|e| rows.err(rec, e.to_string()))?;
    }

    let mut r = reader(edges_path)?;
    expect_header(&mut r, edges_path, &["src", "dst", "relation"])?;
    let rows = Rows { path: edges_path };
    for rec in rows.records(&mut r)? {
        let src: usize = rows.field(&rec, 0, "src")?;
        let dst: usize = rows.field(&rec, 1, "dst")?;
        let rel: RelationKind = rec
            .get(2)
            .unwrap_or("")
            .parse()
            .map_err(|e: crate::hin::HinError| rows.err(&rec, e.to_string()))?;
        hin.add_edge(src, dst, rel)
            .map_err(|e| rows.err(&rec, e.to_string()))?;
    }

    let n = hin.node_count();
    let feats = match features {
        FeatureSource::File(p) => load_features(p, n)?,
        FeatureSource::Synthetic { seed, dim } => synth_features(n, *dim, *seed),
    };
    hin.set_features(feats)?;
    Ok(hin)
}

pub fn load_scores(path: &Path) -> Result<Vec<ExpertScore>, IngestError> {
    let mut r = reader(path)?;
    expect_header(&mut r, path, &["entity_id", "side", "score", "term"])?;
    let rows = Rows { path };
    let mut out = Vec::new();
    for rec in rows.records(&mut r)? {
        let entity: usize = rows.field(&rec, 0, "entity_id")?;
        let side: Side = rows.field(&rec, 1, "side")?;
        let score: f64 = rows.field(&rec, 2, "score")?;
        if !(0.0..=1.0).contains(&score) {
            return Err(rows.err(&rec, format!("score {score} outside [0, 1]")));
        }
        let term = rec.get(3).filter(|t| !t.is_empty()).map(str::to_string);
        out.push(ExpertScore {
            entity,
            side,
            score,
            term,
        });
    }
    Ok(out)
}

fn create(path: &Path) -> Result<std::io::BufWriter<File>, IngestError> {
    File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|source| IngestError::Io {
            path: path.display().to_string(),
            source,
        })
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Writes a matrix with a leading key column. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_features(path: &Path, m: &Matrix) -> Result<(), IngestError> {
    let mut w = create(path)?;
    let e = io_err(path);
    let header: Vec<String> = std::iter::once("id".to_string())
        .chain((0..m.cols()).map(|c| format!("f{c}")))
        .collect();
    writeln!(w, "{}", header.join(",")).map_err(&e)?;
    for r in 0..m.rows() {
        write!(w, "{r}").map_err(&e)?;
        for v in m.row(r) {
            write!(w, ",{v}").map_err(&e)?;
        }
        writeln!(w).map_err(&e)?;
    }
    w.flush().map_err(&e)
}

/// Writes `nodes.csv`, `edges.csv` and `features.csv` into `dir`.
pub fn write_graph(hin: &Hin, dir: &Path) -> Result<(), IngestError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let p = dir.join("nodes.csv");
    let mut w = create(&p)?;
    let e = io_err(&p);
    writeln!(w, "id,kind,name").map_err(&e)?;
    for (i, n) in hin.nodes().iter().enumerate() {
        writeln!(w, "{i},{},{}", n.kind, csv_field(&n.name)).map_err(&e)?;
    }
    w.flush().map_err(&e)?;

    let p = dir.join("edges.csv");
    let mut w = create(&p)?;
    let e = io_err(&p);
    writeln!(w, "src,dst,relation").map_err(&e)?;
    for rel in RelationKind::ALL {
        for &(s, d) in hin.edges(rel) {
            writeln!(w, "{s},{d},{rel}").map_err(&e)?;
        }
    }
    w.flush().map_err(&e)?;

    write_features(&dir.join("features.csv"), hin.features())
}

pub fn write_scores(path: &Path, scores: &[ExpertScore]) -> Result<(), IngestError> {
    let mut w = create(path)?;
    let e = io_err(path);
    writeln!(w, "entity_id,side,score,term").map_err(&e)?;
    for s in scores {
        writeln!(
            w,
            "{},{},{},{}",
            s.entity,
            s.side,
            s.score,
            s.term.as_deref().map(csv_field).unwrap_or_default()
        )
        .map_err(&e)?;
    }
    w.flush().map_err(&e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn three_node_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let nodes = write(
            dir.path(),
            "n.csv",
            "id,kind,name\n0,legislator,Jane Doe\n1,party,Democratic Party\n2,state,Ohio\n",
        );
        let edges = write(dir.path(), "e.csv", "src,dst,relation\n0,1,R1\n0,2,R2\n");
        let feats = write(dir.path(), "f.csv", "id,f0,f1\n0,1,2\n1,3,4\n2,5,6\n");
        let h = load_graph(&nodes, &edges, &FeatureSource::File(feats.clone())).unwrap();
        assert_eq!(h.node_count(), 3);
        assert_eq!(h.kind(0), NodeKind::Legislator);
        assert_eq!(h.kind(1), NodeKind::Party);
        assert_eq!(h.feature_dim(), 2);
        assert_eq!(h.features().row(2), &[5.0, 6.0]);

        let short = write(dir.path(), "short.csv", "id,f0,f1\n0,1,2\n1,3,4\n");
        let err = load_graph(&nodes, &edges, &FeatureSource::File(short)).unwrap_err();
        assert!(
            err.to_string().contains("2 feature rows for 3 nodes"),
            "{err}"
        );
    }

    #[test]
    fn schema_violation_names_equation() {
        let dir = tempfile::tempdir().unwrap();
        let nodes = write(
            dir.path(),
            "n.csv",
            "id,kind,name\n0,justice,J\n1,party,P\n",
        );
        let edges = write(dir.path(), "e.csv", "src,dst,relation\n0,1,R1\n");
        let err = load_graph(
            &nodes,
            &edges,
            &FeatureSource::Synthetic { seed: 0, dim: 4 },
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("Eq 1") && msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn unknown_tokens() {
        let dir = tempfile::tempdir().unwrap();
        let nodes = write(dir.path(), "n.csv", "id,kind,name\n0,senator,J\n");
        let edges = write(dir.path(), "e.csv", "src,dst,relation\n");
        assert!(load_graph(
            &nodes,
            &edges,
            &FeatureSource::Synthetic { seed: 0, dim: 1 }
        )
        .is_err());
        let nodes = write(
            dir.path(),
            "n2.csv",
            "id,kind,name\n0,legislator,J\n1,party,P\n",
        );
        let edges = write(dir.path(), "e2.csv", "src,dst,relation\n0,1,R9\n");
        let err = load_graph(
            &nodes,
            &edges,
            &FeatureSource::Synthetic { seed: 0, dim: 1 },
        )
        .unwrap_err();
        assert!(err.to_string().contains("R9"));
    }

    #[test]
    fn graph_and_scores_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = super::super::synth_hin(&super::super::SynthConfig {
            n_actors: 12,
            n_context: 4,
            d_in: 3,
            ..Default::default()
        });
        write_graph(&g.hin, dir.path()).unwrap();
        let back = load_graph(
            &dir.path().join("nodes.csv"),
            &dir.path().join("edges.csv"),
            &FeatureSource::File(dir.path().join("features.csv")),
        )
        .unwrap();
        assert_eq!(back, g.hin);
        let sp = dir.path().join("scores.csv");
        write_scores(&sp, &g.scores).unwrap();
        assert_eq!(load_scores(&sp).unwrap(), g.scores);
    }

    #[test]
    fn feature_source_token() {
        assert_eq!(
            FeatureSource::parse("synthetic:42", 8).unwrap(),
            FeatureSource::Synthetic { seed: 42, dim: 8 }
        );
        assert_eq!(
            FeatureSource::parse("f.csv", 8).unwrap(),
            FeatureSource::File(PathBuf::from("f.csv"))
        );
        assert!(FeatureSource::parse("synthetic:x", 8).is_err());
    }
}
