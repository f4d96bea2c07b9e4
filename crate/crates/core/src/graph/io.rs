use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::SpatialGraph;
use crate::error::{Error, Result};

fn parse_err(source: &str, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: source.to_string(),
        line,
        message: message.into(),
    }
}

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(r)
}

fn check_header<R: Read>(
    rdr: &mut csv::Reader<R>,
    source: &str,
    expected: &[&str],
) -> Result<()> {
    let header = rdr
        .headers()
        .map_err(|e| parse_err(source, 1, e.to_string()))?;
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(parse_err(
            source,
            1,
            format!("expected header `{}`, found `{}`", expected.join(","), got.join(",")),
        ));
    }
    Ok(())
}

/// Reads a node table with header `id,x,y`.
pub fn read_nodes<R: Read>(r: R, source: &str) -> Result<(Vec<String>, Vec<[f64; 2]>)> {
    let mut rdr = csv_reader(r);
    check_header(&mut rdr, source, &["id", "x", "y"])?;
    let mut ids = Vec::new();
    let mut coords = Vec::new();
    let mut seen = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(source, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != 3 {
            return Err(parse_err(source, line, format!("expected 3 fields, found {}", rec.len())));
        }
        let id = rec[0].to_string();
        if id.is_empty() {
            return Err(parse_err(source, line, "empty node id"));
        }
        let mut xy = [0.0; 2];
        for (k, slot) in xy.iter_mut().enumerate() {
            let field = &rec[k + 1];
            *slot = field
                .parse::<f64>()
                .map_err(|_| parse_err(source, line, format!("cannot parse coordinate `{field}`")))?;
            if !slot.is_finite() {
                return Err(parse_err(source, line, format!("non-finite coordinate `{field}`")));
            }
        }
        if seen.insert(id.clone(), line).is_some() {
            return Err(parse_err(source, line, format!("duplicate node id `{id}`")));
        }
        ids.push(id);
        coords.push(xy);
    }
    Ok((ids, coords))
}

/// Reads an edge table with header `src,dst`, resolving ids against `ids`.
pub fn read_edges<R: Read>(r: R, source: &str, ids: &[String]) -> Result<Vec<(usize, usize)>> {
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut rdr = csv_reader(r);
    check_header(&mut rdr, source, &["src", "dst"])?;
    let mut edges = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(source, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != 2 {
            return Err(parse_err(source, line, format!("expected 2 fields, found {}", rec.len())));
        }
        let lookup = |s: &str| {
            index
                .get(s)
                .copied()
                .ok_or_else(|| parse_err(source, line, format!("unknown node id `{s}`")))
        };
        let a = lookup(&rec[0])?;
        let b = lookup(&rec[1])?;
        if a == b {
            return Err(parse_err(source, line, format!("self-loop on `{}`", &rec[0])));
        }
        edges.push((a, b));
    }
    Ok(edges)
}

pub fn load_graph(nodes_path: impl AsRef<Path>, edges_path: impl AsRef<Path>) -> Result<SpatialGraph> {
    let np = nodes_path.as_ref();
    let ep = edges_path.as_ref();
    let nf = File::open(np).map_err(|e| Error::io(np, e))?;
    let (ids, coords) = read_nodes(nf, &np.display().to_string())?;
    let ef = File::open(ep).map_err(|e| Error::io(ep, e))?;
    let edges = read_edges(ef, &ep.display().to_string(), &ids)?;
    SpatialGraph::new(ids, coords, edges)
}

pub fn write_nodes<W: Write>(g: &SpatialGraph, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let map = |e: csv::Error| Error::InvalidInput(e.to_string());
    wtr.write_record(["id", "x", "y"]).map_err(map)?;
    for (id, c) in g.node_ids().iter().zip(g.coords()) {
        wtr.write_record([id.clone(), c[0].to_string(), c[1].to_string()])
            .map_err(map)?;
    }
    wtr.flush().map_err(|e| Error::InvalidInput(e.to_string()))
}

/// Writes edges in canonical form: each row has its endpoints ordered by id
/// string, and rows are sorted lexicographically.
pub fn write_edges<W: Write>(g: &SpatialGraph, w: W) -> Result<()> {
    let ids = g.node_ids();
    let mut rows: Vec<(&str, &str)> = g
        .edges()
        .iter()
        .map(|&(a, b)| {
            let (x, y) = (ids[a].as_str(), ids[b].as_str());
            if x <= y {
                (x, y)
            } else {
                (y, x)
            }
        })
        .collect();
    rows.sort_unstable();
    let mut wtr = csv::Writer::from_writer(w);
    let map = |e: csv::Error| Error::InvalidInput(e.to_string());
    wtr.write_record(["src", "dst"]).map_err(map)?;
    for (a, b) in rows {
        wtr.write_record([a, b]).map_err(map)?;
    }
    wtr.flush().map_err(|e| Error::InvalidInput(e.to_string()))
}

pub fn write_graph(
    g: &SpatialGraph,
    nodes_path: impl AsRef<Path>,
    edges_path: impl AsRef<Path>,
) -> Result<()> {
    let np = nodes_path.as_ref();
    let ep = edges_path.as_ref();
    write_nodes(g, File::create(np).map_err(|e| Error::io(np, e))?)?;
    write_edges(g, File::create(ep).map_err(|e| Error::io(ep, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(nodes: &str, edges: &str) -> Result<SpatialGraph> {
        let (ids, coords) = read_nodes(nodes.as_bytes(), "nodes")?;
        let e = read_edges(edges.as_bytes(), "edges", &ids)?;
        SpatialGraph::new(ids, coords, e)
    }

    #[test]
    fn three_four_five() {
        let g = load("id,x,y\na,0,0\nb,3,4\n", "src,dst\na,b\n").unwrap();
        assert_eq!(g.degrees(), vec![1, 1]);
        assert_eq!(super::super::pairwise_distances(&g).get(0, 1), 5.0);
    }

    #[test]
    fn empty_edge_file() {
        let g = load("id,x,y\na,0,0\nb,1,0\nc,2,0\n", "src,dst\n").unwrap();
        assert_eq!(g.edge_count(), 0);
        assert_eq!(g.degrees(), vec![0, 0, 0]);
    }

    #[test]
    fn reversed_duplicate_collapses() {
        let g = load("id,x,y\na,0,0\nb,3,4\n", "src,dst\na,b\nb,a\n").unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.degrees(), vec![1, 1]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = load("id,x,y\na,0,0\nb,zz,4\n", "src,dst\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let err = load("id,x,y\na,0,0\nb,1,inf\n", "src,dst\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let err = load("id,x,y\na,0,0\nb,1,1\n", "src,dst\na,b\na,q\n").unwrap_err();
        assert!(err.to_string().contains("line 3") && err.to_string().contains("`q`"), "{err}");
        let err = load("id,x,y\na,0,0\n", "src,dst\na,a\n").unwrap_err();
        assert!(err.to_string().contains("self-loop"), "{err}");
        let err = load("name,x,y\na,0,0\n", "src,dst\n").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
    }

    #[test]
    fn canonical_edges_sorted_by_id() {
        let g = load(
            "id,x,y\nz,0,0\nb,1,0\nm,2,0\n",
            "src,dst\nz,b\nm,b\nm,z\n",
        )
        .unwrap();
        let mut out = Vec::new();
        write_edges(&g, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "src,dst\nb,m\nb,z\nm,z\n");
    }
}
