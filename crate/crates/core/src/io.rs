//! File formats: problem and partition JSON, block-diagonalization JSON,
//! QAPLib instances and DIMACS graphs. All external indices are 1-based.

use serde::{Deserialize, Serialize};

use crate::blockdiag::{BlockDiagonalization, Field};
use crate::builders::{Graph, QapInstance};
use crate::conic::{ConicProblem, Sense, SymMatrix};
use crate::error::{Error, Result};
use crate::partition::Partition;

/// `[row, col, value]` with `row ≤ col`.
pub type Entry = (usize, usize, f64);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintFile {
    pub entries: Vec<Entry>,
    pub b: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub n: usize,
    pub sense: Sense,
    pub c: Vec<Entry>,
    pub constraints: Vec<ConstraintFile>,
}

fn entries_to_sym(n: usize, entries: &[Entry], what: &str) -> Result<SymMatrix> {
    let mut trip = Vec::with_capacity(entries.len());
    for &(i, j, v) in entries {
        if i == 0 || j == 0 || i > n || j > n {
            return Err(Error::InvalidInput(format!(
                "{what}: index ({i}, {j}) out of range 1..={n}"
            )));
        }
        if i > j {
            return Err(Error::InvalidInput(format!(
                "{what}: entry ({i}, {j}) is below the diagonal; give i ≤ j"
            )));
        }
        if !v.is_finite() {
            return Err(Error::InvalidInput(format!("{what}: non-finite value at ({i}, {j})")));
        }
        trip.push((i - 1, j - 1, v));
    }
    SymMatrix::from_triplets(n, &trip)
}

fn sym_to_entries(m: &SymMatrix) -> Vec<Entry> {
    m.iter().map(|(i, j, v)| (i + 1, j + 1, v)).collect()
}

impl ProblemFile {
    pub fn to_problem(&self) -> Result<ConicProblem> {
        let c = entries_to_sym(self.n, &self.c, "objective")?;
        let mut rows = Vec::with_capacity(self.constraints.len());
        let mut b = Vec::with_capacity(self.constraints.len());
        for (k, con) in self.constraints.iter().enumerate() {
            rows.push(entries_to_sym(self.n, &con.entries, &format!("constraint {}", k + 1))?);
            if !con.b.is_finite() {
                return Err(Error::InvalidInput(format!("constraint {}: non-finite b", k + 1)));
            }
            b.push(con.b);
        }
        ConicProblem::new(self.n, self.sense, c, rows, b)
    }

    pub fn from_problem(p: &ConicProblem) -> Self {
        ProblemFile {
            n: p.n(),
            sense: p.sense(),
            c: sym_to_entries(p.c()),
            constraints: p
                .rows()
                .iter()
                .zip(p.b())
                .map(|(r, &b)| ConstraintFile {
                    entries: sym_to_entries(r),
                    b,
                })
                .collect(),
        }
    }
}

pub fn parse_problem(text: &str) -> Result<ConicProblem> {
    let file: ProblemFile = serde_json::from_str(text)?;
    file.to_problem()
}

pub fn write_problem(p: &ConicProblem) -> String {
    serde_json::to_string_pretty(&ProblemFile::from_problem(p)).expect("plain data serializes")
}

/// Row-major `n²` labels, 1-based. `null_part` names the part outside the
/// span, when there is one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionFile {
    pub n: usize,
    pub n_parts: usize,
    pub labels: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub null_part: Option<u32>,
}

pub fn partition_to_file(p: &Partition) -> PartitionFile {
    PartitionFile {
        n: p.n(),
        n_parts: p.n_parts(),
        labels: p.labels().iter().map(|&l| l + 1).collect(),
        null_part: p.null_part().map(|z| z as u32 + 1),
    }
}

pub fn partition_from_file(f: &PartitionFile) -> Result<Partition> {
    if f.labels.len() != f.n * f.n {
        return Err(Error::InvalidInput(format!(
            "labels must hold {} row-major entries",
            f.n * f.n
        )));
    }
    if f.labels.contains(&0) {
        return Err(Error::InvalidInput("labels are 1-based".into()));
    }
    let flat: Vec<u32> = f.labels.iter().map(|&l| l - 1).collect();
    let p = Partition::from_labels(f.n, &flat)?;
    if p.n_parts() != f.n_parts {
        return Err(Error::InvalidInput(format!(
            "n_parts is {} but the labels use {}",
            f.n_parts,
            p.n_parts()
        )));
    }
    let null = match f.null_part {
        None => None,
        Some(z) => match f.labels.iter().position(|&l| l == z) {
            Some(cell) => Some(p.labels()[cell] as usize),
            None => return Err(Error::InvalidInput(format!("null part {z} has no cells"))),
        },
    };
    p.with_null_part(null)
}

pub fn parse_partition(text: &str) -> Result<Partition> {
    partition_from_file(&serde_json::from_str(text)?)
}

pub fn write_partition(p: &Partition) -> String {
    serde_json::to_string(&partition_to_file(p)).expect("plain data serializes")
}

#[derive(Clone, Debug, Serialize)]
pub struct BlockFile {
    pub size: usize,
    pub multiplicity: usize,
    pub field: Field,
    /// Size of the real form (twice `size` for complex blocks).
    pub real_size: usize,
    /// Real form of each part's image, row-major.
    pub images: Vec<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BlockDiagFile {
    pub field: Field,
    pub structure: String,
    pub blk_sizes: Vec<usize>,
    pub multiplicities: Vec<usize>,
    pub blocks: Vec<BlockFile>,
}

pub fn block_diagonalization_to_file(bd: &BlockDiagonalization) -> BlockDiagFile {
    let blocks = bd
        .blocks
        .iter()
        .map(|b| BlockFile {
            size: b.size,
            multiplicity: b.multiplicity,
            field: b.field(),
            real_size: b.real_size(),
            images: (0..b.n_parts())
                .map(|i| {
                    let m = b.real_image(i);
                    m.row_iter().map(|r| r.iter().copied().collect()).collect()
                })
                .collect(),
        })
        .collect();
    BlockDiagFile {
        field: bd.field,
        structure: bd.structure_string(),
        blk_sizes: bd.blk_sizes(),
        multiplicities: bd.multiplicities(),
        blocks,
    }
}

pub fn write_block_diagonalization(bd: &BlockDiagonalization) -> String {
    serde_json::to_string(&block_diagonalization_to_file(bd)).expect("plain data serializes")
}

/// QAPLib format: `n`, then the `n × n` matrices `A` and `B`, whitespace
/// separated. Both must be exactly symmetric.
pub fn parse_qaplib(text: &str) -> Result<QapInstance> {
    let mut tokens = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                line: ln + 1,
                msg: format!("'{tok}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: ln + 1,
                    msg: format!("non-finite value '{tok}'"),
                });
            }
            tokens.push((ln + 1, v));
        }
    }
    let Some(&(_, nv)) = tokens.first() else {
        return Err(Error::Parse { line: 1, msg: "empty instance".into() });
    };
    if nv < 1.0 || nv.fract() != 0.0 {
        return Err(Error::Parse {
            line: tokens[0].0,
            msg: format!("size {nv} is not a positive integer"),
        });
    }
    let n = nv as usize;
    if tokens.len() != 1 + 2 * n * n {
        return Err(Error::Parse {
            line: tokens.last().map_or(1, |t| t.0),
            msg: format!("expected {} numbers for n = {n}, found {}", 1 + 2 * n * n, tokens.len()),
        });
    }
    let read = |offset: usize, name: &str| -> Result<SymMatrix> {
        let at = |i: usize, j: usize| tokens[offset + i * n + j];
        let mut trip = Vec::new();
        for i in 0..n {
            for j in i..n {
                let (line, v) = at(i, j);
                let (_, w) = at(j, i);
                if v != w {
                    return Err(Error::Parse {
                        line,
                        msg: format!(
                            "matrix {name} is not symmetric at ({}, {}): {v} vs {w}",
                            i + 1,
                            j + 1
                        ),
                    });
                }
                if v != 0.0 {
                    trip.push((i, j, v));
                }
            }
        }
        SymMatrix::from_triplets(n, &trip)
    };
    let a = read(1, "A")?;
    let b = read(1 + n * n, "B")?;
    QapInstance::new(a, b)
}

fn fmt_num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:e}")
    }
}

pub fn write_qaplib(inst: &QapInstance) -> String {
    let n = inst.n();
    let mut out = format!("{n}\n");
    for m in [inst.a(), inst.b()] {
        out.push('\n');
        for i in 0..n {
            let row: Vec<String> = (0..n).map(|j| fmt_num(m.get(i, j))).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
    }
    out
}

/// DIMACS edge format: `c` comments, one `p edge n m` line, `e i j` lines.
pub fn parse_dimacs_graph(text: &str) -> Result<Graph> {
    let mut n: Option<usize> = None;
    let mut edges = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line_no = ln + 1;
        let parts: Vec<&str> = line.split_whitespace().collect();
        let perr = |msg: String| Error::Parse { line: line_no, msg };
        match parts.first().copied() {
            None | Some("c") => {}
            Some("p") => {
                if n.is_some() {
                    return Err(perr("duplicate problem line".into()));
                }
                if parts.len() != 4 || !matches!(parts[1], "edge" | "col") {
                    return Err(perr("expected 'p edge <n> <m>'".into()));
                }
                n = Some(parts[2].parse().map_err(|_| perr(format!("bad vertex count '{}'", parts[2])))?);
                let _: usize = parts[3].parse().map_err(|_| perr(format!("bad edge count '{}'", parts[3])))?;
            }
            Some("e") => {
                let nv = n.ok_or_else(|| perr("edge before the problem line".into()))?;
                if parts.len() != 3 {
                    return Err(perr("expected 'e <i> <j>'".into()));
                }
                let i: usize = parts[1].parse().map_err(|_| perr(format!("bad vertex '{}'", parts[1])))?;
                let j: usize = parts[2].parse().map_err(|_| perr(format!("bad vertex '{}'", parts[2])))?;
                if i == 0 || j == 0 || i > nv || j > nv {
                    return Err(perr(format!("vertex out of range 1..={nv}")));
                }
                if i == j {
                    return Err(perr(format!("loop at vertex {i}")));
                }
                edges.push((i - 1, j - 1));
            }
            Some(other) => return Err(perr(format!("unknown line type '{other}'"))),
        }
    }
    let n = n.ok_or(Error::Parse {
        line: text.lines().count().max(1),
        msg: "missing problem line".into(),
    })?;
    Graph::new(n, &edges)
}

pub fn write_dimacs_graph(g: &Graph) -> String {
    let edges = g.edges();
    let mut out = format!("p edge {} {}\n", g.n_vertices(), edges.len());
    for (i, j) in edges {
        out.push_str(&format!("e {} {}\n", i + 1, j + 1));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builders::{build_theta_prime, er_graph};

    #[test]
    fn problem_json_round_trip() {
        let p = build_theta_prime(&Graph::cycle(5)).unwrap();
        let text = write_problem(&p);
        assert_eq!(parse_problem(&text).unwrap(), p);
    }

    #[test]
    fn problem_json_rejects_lower_entries() {
        let text = r#"{"n":2,"sense":"min","c":[[2,1,1.0]],"constraints":[{"entries":[[1,1,1.0]],"b":1.0}]}"#;
        assert!(matches!(parse_problem(text), Err(Error::InvalidInput(_))));
        let text = r#"{"n":2,"sense":"min","c":[[0,1,1.0]],"constraints":[{"entries":[[1,1,1.0]],"b":1.0}]}"#;
        assert!(parse_problem(text).is_err());
    }

    #[test]
    fn partition_json_is_one_based() {
        let p = Partition::from_labels(2, &[0, 1, 1, 2]).unwrap();
        let text = write_partition(&p);
        assert_eq!(text, r#"{"n":2,"n_parts":3,"labels":[1,2,2,3]}"#);
        assert_eq!(parse_partition(&text).unwrap(), p);
        let q = p.with_null_part(Some(1)).unwrap();
        let text = write_partition(&q);
        assert!(text.ends_with(r#""null_part":2}"#));
        assert_eq!(parse_partition(&text).unwrap(), q);
        assert!(parse_partition(r#"{"n":2,"n_parts":3,"labels":[1,2,2,3],"null_part":4}"#).is_err());
        assert!(parse_partition(r#"{"n":2,"n_parts":2,"labels":[1,2,2,3]}"#).is_err());
    }

    #[test]
    fn qaplib_identity_round_trip() {
        let text = "3\n\n1 0 0\n0 1 0\n0 0 1\n\n1 0 0\n0 1 0\n0 0 1\n";
        let inst = parse_qaplib(text).unwrap();
        assert_eq!(inst.n(), 3);
        assert_eq!(write_qaplib(&inst), text);
        assert_eq!(parse_qaplib(&write_qaplib(&inst)).unwrap(), inst);
    }

    #[test]
    fn qaplib_rejects_bad_input() {
        assert!(parse_qaplib("2\n0 1\n2 0\n0 1\n1 0\n").is_err());
        assert!(parse_qaplib("2\n0 1\n1 0\n0 1\n").is_err());
        assert!(parse_qaplib("2\n0 x\n1 0\n0 1\n1 0\n").is_err());
        assert!(parse_qaplib("").is_err());
    }

    #[test]
    fn dimacs_cycle_and_empty() {
        let g = parse_dimacs_graph("c five-cycle\np edge 5 5\ne 1 2\ne 2 3\ne 3 4\ne 4 5\ne 5 1\ne 2 1\n").unwrap();
        assert_eq!((g.n_vertices(), g.n_edges()), (5, 5));
        let g = parse_dimacs_graph("p edge 4 0\n").unwrap();
        assert_eq!((g.n_vertices(), g.n_edges()), (4, 0));
        assert!(parse_dimacs_graph("p edge 3 1\ne 1 4\n").is_err());
        assert!(parse_dimacs_graph("e 1 2\n").is_err());
    }

    #[test]
    fn dimacs_er3_round_trip() {
        let g = er_graph(3).unwrap();
        let back = parse_dimacs_graph(&write_dimacs_graph(&g)).unwrap();
        assert_eq!(back.adjacency(), g.adjacency());
    }
}
