//! File formats: tab-separated matrices with a header row, JSON tree
//! specifications, dendrogram merge tables, and fit reports.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so every
//! file parses back to bit-identical values through the readers here.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::solver::FitResult;
use crate::tree::{OutputTree, TreeFile};
use crate::treelearn::{Dendrogram, Merge};

fn parse_f64(tok: &str, path: &Path, line: usize) -> Result<f64> {
    tok.parse().map_err(|_| {
        Error::Parse(format!(
            "{}:{line}: cannot parse '{tok}' as a number",
            path.display()
        ))
    })
}

/// Writes a matrix as TSV with a `{prefix}0..{prefix}{n-1}` header row.
pub fn write_matrix(path: &Path, m: &Array2<f64>, prefix: &str) -> Result<()> {
    let mut out = String::new();
    for k in 0..m.ncols() {
        if k > 0 {
            out.push('\t');
        }
        out.push_str(prefix);
        out.push_str(&k.to_string());
    }
    out.push('\n');
    for row in m.rows() {
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                out.push('\t');
            }
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a TSV matrix. A first line that does not parse as numbers is
/// treated as a header; lines starting with `#` are metadata and skipped.
pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut ncols = None;
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split('\t').collect();
        if rows.is_empty() && ncols.is_none() && toks[0].parse::<f64>().is_err() {
            ncols = Some(toks.len());
            continue; // header row
        }
        let row: Vec<f64> = toks
            .iter()
            .map(|t| parse_f64(t, path, idx + 1))
            .collect::<Result<_>>()?;
        if let Some(n) = ncols {
            if row.len() != n {
                return Err(Error::Parse(format!(
                    "{}:{}: row has {} fields, expected {n}",
                    path.display(),
                    idx + 1,
                    row.len()
                )));
            }
        } else {
            ncols = Some(row.len());
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse(format!("{}: no data rows", path.display())));
    }
    let ncols = ncols.expect("set by the first parsed row");
    let nrows = rows.len();
    Array2::from_shape_vec((nrows, ncols), rows.into_iter().flatten().collect())
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Writes a tree as pretty-printed JSON in the interchange form.
pub fn write_tree(path: &Path, tree: &OutputTree) -> Result<()> {
    let spec = tree.to_spec();
    let json = serde_json::to_string_pretty(&spec)
        .map_err(|e| Error::Parse(format!("tree serialization: {e}")))?;
    fs::write(path, json + "\n")?;
    Ok(())
}

/// Reads and validates a JSON tree file.
pub fn read_tree(path: &Path) -> Result<OutputTree> {
    let text = fs::read_to_string(path)?;
    let spec: TreeFile = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    OutputTree::from_spec(&spec)
}

/// Writes the merge table: one `left  right  height` row per merge, clusters
/// numbered leaves-first as in [`Dendrogram`].
pub fn write_dendrogram(path: &Path, dend: &Dendrogram) -> Result<()> {
    let mut out = String::from("left\tright\theight\n");
    for m in &dend.merges {
        out.push_str(&format!("{}\t{}\t{}\n", m.left, m.right, m.height));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a merge table written by [`write_dendrogram`]. A full dendrogram
/// over K leaves has K-1 merges.
pub fn read_dendrogram(path: &Path) -> Result<Dendrogram> {
    let text = fs::read_to_string(path)?;
    let mut merges = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() || line.starts_with("left") {
            continue;
        }
        let toks: Vec<&str> = line.split('\t').collect();
        if toks.len() != 3 {
            return Err(Error::Parse(format!(
                "{}:{}: expected 3 fields, got {}",
                path.display(),
                idx + 1,
                toks.len()
            )));
        }
        let left = toks[0]
            .parse()
            .map_err(|_| Error::Parse(format!("{}:{}: bad cluster id", path.display(), idx + 1)))?;
        let right = toks[1]
            .parse()
            .map_err(|_| Error::Parse(format!("{}:{}: bad cluster id", path.display(), idx + 1)))?;
        let height = parse_f64(toks[2], path, idx + 1)?;
        merges.push(Merge { left, right, height });
    }
    if merges.is_empty() {
        return Err(Error::Parse(format!("{}: no merges", path.display())));
    }
    Ok(Dendrogram {
        leaf_count: merges.len() + 1,
        merges,
        normalized_heights: None,
    })
}

/// Writes the fit report: `# key: value` metadata followed by the objective
/// trace as a two-column table. Parses back through [`read_matrix`].
pub fn write_fit_report(path: &Path, fit: &FitResult) -> Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "# lambda: {}", fit.lambda)?;
    writeln!(f, "# iterations: {}", fit.iterations)?;
    writeln!(f, "# converged: {}", fit.converged)?;
    writeln!(f, "# final_objective: {}", fit.objective_trace.last().unwrap_or(&f64::NAN))?;
    writeln!(f, "iteration\tobjective")?;
    for (i, obj) in fit.objective_trace.iter().enumerate() {
        writeln!(f, "{i}\t{obj}")?;
    }
    Ok(())
}

/// Writes a generic TSV table with a header row.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = header.join("\t");
    out.push('\n');
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::Input(format!(
                "table row has {} fields, header has {}",
                row.len(),
                header.len()
            )));
        }
        out.push_str(&row.join("\t"));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a TSV table written by [`write_table`]: (header, rows of strings).
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Parse(format!("{}: empty table", path.display())))?
        .split('\t')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| l.split('\t').map(str::to_string).collect())
        .collect();
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;
    use tempfile::tempdir;

    #[test]
    fn matrix_roundtrip_bit_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.tsv");
        let m = arr2(&[
            [1.0, -0.5, 3.141592653589793],
            [1e-17, 2.2250738585072014e-308, 0.1],
        ]);
        write_matrix(&path, &m, "x").unwrap();
        let back = read_matrix(&path).unwrap();
        assert_eq!(m, back);
        // First line really is a header.
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x0\tx1\tx2\n"));
    }

    #[test]
    fn headerless_matrix_reads() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("raw.tsv");
        fs::write(&path, "1\t2\n3\t4\n").unwrap();
        assert_eq!(read_matrix(&path).unwrap(), arr2(&[[1.0, 2.0], [3.0, 4.0]]));
    }

    #[test]
    fn ragged_and_garbage_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.tsv");
        fs::write(&path, "h0\th1\n1\t2\n3\n").unwrap();
        assert!(matches!(read_matrix(&path), Err(Error::Parse(_))));
        fs::write(&path, "h0\n1\npotato\n").unwrap();
        assert!(matches!(read_matrix(&path), Err(Error::Parse(_))));
        fs::write(&path, "h0\th1\n").unwrap();
        assert!(read_matrix(&path).is_err());
    }

    #[test]
    fn tree_json_roundtrip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("tree.json");
        let tree = crate::tree::tests::example_tree(0.5, 0.3);
        write_tree(&path, &tree).unwrap();
        let back = read_tree(&path).unwrap();
        assert_eq!(back.num_outputs(), 3);
        for (a, b) in tree.nodes().iter().zip(back.nodes().iter()) {
            assert_eq!(a.children, b.children);
            assert_eq!(a.group, b.group);
            assert!((a.derived_w - b.derived_w).abs() < 1e-15);
        }
    }

    #[test]
    fn dendrogram_roundtrip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("dend.tsv");
        let dend = Dendrogram {
            merges: vec![
                Merge { left: 0, right: 1, height: 0.2 },
                Merge { left: 3, right: 2, height: 0.7 },
            ],
            leaf_count: 3,
            normalized_heights: None,
        };
        write_dendrogram(&path, &dend).unwrap();
        let back = read_dendrogram(&path).unwrap();
        assert_eq!(back.leaf_count, 3);
        assert_eq!(back.merges.len(), 2);
        assert_eq!(back.merges[1].height, 0.7);
    }

    #[test]
    fn fit_report_parses_as_trace_table() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("report.tsv");
        let fit = FitResult {
            b: Array2::zeros((2, 2)),
            objective_trace: vec![10.0, 4.0, 3.5],
            duals: crate::solver::DualWeights {
                d: Array2::zeros((2, 3)),
                degenerate: false,
            },
            iterations: 2,
            converged: true,
            lambda: 0.5,
        };
        write_fit_report(&path, &fit).unwrap();
        let trace = read_matrix(&path).unwrap();
        assert_eq!(trace.nrows(), 3);
        assert_eq!(trace[(2, 1)], 3.5);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("# lambda: 0.5"));
        assert!(text.contains("# converged: true"));
    }

    #[test]
    fn table_roundtrip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("metrics.tsv");
        let rows = vec![
            vec!["tree".into(), "0.4".into(), "0.91".into()],
            vec!["lasso".into(), "0.4".into(), "0.84".into()],
        ];
        write_table(&path, &["method", "signal", "auc"], &rows).unwrap();
        let (header, back) = read_table(&path).unwrap();
        assert_eq!(header, vec!["method", "signal", "auc"]);
        assert_eq!(back, rows);
        let bad = vec![vec!["only-one".into()]];
        assert!(write_table(&path, &["a", "b"], &bad).is_err());
    }
}
