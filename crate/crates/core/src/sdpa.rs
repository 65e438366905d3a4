//! Export of a reduced problem in SDPA sparse format.
//!
//! Equalities are eliminated first (`x = x_p + Z y`), so the file holds the
//! pure LMI problem `min cᵀy` s.t. `Σ_j y_j F_j − F_0 ⪰ 0`. Scalar blocks and
//! variable signs are merged into one diagonal block. The constant
//! `new_cᵀ x_p` and the original sense are recorded in a comment header.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::conic::Sense;
use crate::error::{Error, Result};
use crate::reduced::ReducedProblem;
use crate::solver::lmi_form;

pub fn write_sdpa(rp: &ReducedProblem) -> Result<String> {
    let form = lmi_form(rp, true)?;
    let (aff, lmi) = (&form.affine, &form.lmi);
    let d = aff.z.ncols();
    if d == 0 {
        return Err(Error::InvalidProblem(
            "the equalities fix a single point; nothing to export".into(),
        ));
    }
    let sign = rp.sense.sign();
    let newc = nalgebra::DVector::from_column_slice(&rp.new_c);
    let c = aff.z.transpose() * &newc * sign;
    let offset = newc.dot(&aff.x_p);

    let mut out = String::new();
    let sense = match rp.sense {
        Sense::Min => "min",
        Sense::Max => "max",
    };
    writeln!(out, "* sense {sense}").unwrap();
    writeln!(out, "* offset {offset:.17e}").unwrap();
    writeln!(out, "* objective = offset {} cᵀy", if sign > 0.0 { "+" } else { "-" }).unwrap();
    let n_lin = lmi.lin_a.nrows();
    let n_blocks = lmi.blocks.len() + usize::from(n_lin > 0);
    writeln!(out, "{d}").unwrap();
    writeln!(out, "{n_blocks}").unwrap();
    let mut sizes: Vec<String> = lmi.blocks.iter().map(|(f0, _)| f0.nrows().to_string()).collect();
    if n_lin > 0 {
        sizes.push(format!("-{n_lin}"));
    }
    writeln!(out, "{}", sizes.join(" ")).unwrap();
    let cs: Vec<String> = c.iter().map(|v| format!("{v:.17e}")).collect();
    writeln!(out, "{}", cs.join(" ")).unwrap();

    let mut emit = |mat: usize, blk: usize, m: &DMatrix<f64>, negate: bool| {
        let scale = m.amax();
        for i in 0..m.nrows() {
            for j in i..m.ncols() {
                let v = if negate { -m[(i, j)] } else { m[(i, j)] };
                if v.abs() > 1e-15 * scale {
                    writeln!(out, "{mat} {blk} {} {} {v:.17e}", i + 1, j + 1).unwrap();
                }
            }
        }
    };
    for (k, (f0, fs)) in lmi.blocks.iter().enumerate() {
        emit(0, k + 1, f0, true);
        for (j, f) in fs.iter().enumerate() {
            emit(j + 1, k + 1, f, false);
        }
    }
    if n_lin > 0 {
        let blk = lmi.blocks.len() + 1;
        emit(0, blk, &DMatrix::from_diagonal(&lmi.lin_0), true);
        for j in 0..d {
            emit(j + 1, blk, &DMatrix::from_diagonal(&lmi.lin_a.column(j).into_owned()), false);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_counts() {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let blocks = [[1.0, 2.0, 2.0], [1.0, phi - 1.0, -phi], [1.0, -phi, phi - 1.0]]
            .iter()
            .map(|r| crate::reduced::LmiBlock {
                size: 1,
                mats: r.iter().map(|&v| DMatrix::from_element(1, 1, v)).collect(),
            })
            .collect();
        let rp = ReducedProblem {
            n_vars: 3,
            sense: Sense::Max,
            new_c: vec![5.0, 10.0, 10.0],
            new_a: DMatrix::from_row_slice(2, 3, &[5.0, 0.0, 0.0, 0.0, 10.0, 0.0]),
            new_b: vec![1.0, 0.0],
            blocks,
            nonneg_vars: true,
        };
        let text = write_sdpa(&rp).unwrap();
        let lines: Vec<&str> = text.lines().filter(|l| !l.starts_with('*')).collect();
        // presolve fixes b = 0, leaving only c free
        assert_eq!(lines[0], "1");
        assert_eq!(lines[1], "1");
        assert!(lines[2].starts_with('-'));
        assert!(text.contains("* sense max"));
        let offset: f64 = text.lines().nth(1).unwrap().split_whitespace().nth(2).unwrap().parse().unwrap();
        assert!((offset - 1.0).abs() < 1e-12);
    }
}
