//! SDPA sparse-format export and import.
//!
//! Export writes the standard `.dat-s` layout for
//! `min c.x  s.t.  X = sum_t x_t F_t - F_0  PSD`:
//! the equality-pinned variables of a [`LinearSdp`] (the relaxation's
//! `y_0 = 1`) are substituted out and their contributions folded into `F_0`,
//! so the file is in pure standard form. Any constant objective term that the
//! substitution produces is recorded in a `*OFFSET <value>` comment line,
//! which foreign solvers ignore and [`import_sdpa`] restores. Output is
//! byte-deterministic for a given problem.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DVector;

use super::{reduce, SdpError, SolveStatus};
use crate::moments::{LinearSdp, MomentSolution, PsdBlockTemplate};
use crate::scalar::Scalar;

/// Render a linear SDP in SDPA sparse format.
pub fn sdpa_to_string<T: Scalar>(sdp: &LinearSdp<T>) -> Result<String, SdpError> {
    let red = reduce(sdp)?;
    let m = red.vars.len();
    let mut out = String::new();
    if red.offset != T::zero() {
        writeln!(out, "*OFFSET {:e}", red.offset.to_f64()).unwrap();
    }
    writeln!(out, "{m}").unwrap();
    writeln!(out, "{}", red.blocks.len()).unwrap();
    let sizes: Vec<String> = red.blocks.iter().map(|b| b.size.to_string()).collect();
    writeln!(out, "{}", sizes.join(" ")).unwrap();
    let qline: Vec<String> = red.q.iter().map(|v| format!("{:e}", v.to_f64())).collect();
    writeln!(out, "{}", qline.join(" ")).unwrap();

    // F0 = -A0, then F_t = A_t, undoing the internal block normalization;
    // entries sorted by (mat, block, i, j).
    for (bno, b) in red.blocks.iter().enumerate() {
        for i in 0..b.size {
            for j in i..b.size {
                let v = b.a0[(i, j)] * b.data_scale;
                if v != T::zero() {
                    writeln!(out, "0 {} {} {} {:e}", bno + 1, i + 1, j + 1, -v.to_f64()).unwrap();
                }
            }
        }
    }
    for t in 0..m {
        for (bno, b) in red.blocks.iter().enumerate() {
            for (u, triplets) in &b.entries {
                if *u != t {
                    continue;
                }
                for &(i, j, v) in triplets {
                    writeln!(
                        out,
                        "{} {} {} {} {:e}",
                        t + 1,
                        bno + 1,
                        i + 1,
                        j + 1,
                        (v * b.data_scale).to_f64()
                    )
                    .unwrap();
                }
            }
        }
    }
    Ok(out)
}

/// Write a linear SDP to a `.dat-s` file.
pub fn export_sdpa<T: Scalar>(sdp: &LinearSdp<T>, path: &Path) -> Result<(), SdpError> {
    let text = sdpa_to_string(sdp)?;
    std::fs::write(path, text).map_err(|source| SdpError::Io { path: path.into(), source })
}

struct LineReader<'a> {
    lines: std::str::Lines<'a>,
    line_no: usize,
}

impl<'a> LineReader<'a> {
    fn new(text: &'a str) -> Self {
        LineReader { lines: text.lines(), line_no: 0 }
    }

    /// Next content line, skipping comments (`*` or `"`) and blanks.
    fn next_content(&mut self) -> Option<(usize, &'a str)> {
        loop {
            let line = self.lines.next()?;
            self.line_no += 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('*') || trimmed.starts_with('"') {
                continue;
            }
            return Some((self.line_no, trimmed));
        }
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> SdpError {
    SdpError::Parse { line, message: message.into() }
}

/// Read a problem in SDPA sparse format. Negative (diagonal) block sizes are
/// expanded into 1x1 blocks.
pub fn import_sdpa<T: Scalar>(path: &Path) -> Result<LinearSdp<T>, SdpError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| SdpError::Io { path: path.into(), source })?;
    import_sdpa_str(&text)
}

pub fn import_sdpa_str<T: Scalar>(text: &str) -> Result<LinearSdp<T>, SdpError> {
    let mut offset = T::zero();
    for line in text.lines() {
        let t = line.trim();
        if let Some(rest) = t.strip_prefix("*OFFSET") {
            offset = T::c(
                rest.trim()
                    .parse::<f64>()
                    .map_err(|e| parse_err(0, format!("bad *OFFSET value: {e}")))?,
            );
        }
    }

    let mut rd = LineReader::new(text);
    let (ln, mline) = rd.next_content().ok_or_else(|| parse_err(0, "missing variable count"))?;
    let m: usize =
        mline.split_whitespace().next().unwrap().parse().map_err(|e| parse_err(ln, format!("{e}")))?;
    let (ln, bline) = rd.next_content().ok_or_else(|| parse_err(ln, "missing block count"))?;
    let nblocks: usize =
        bline.split_whitespace().next().unwrap().parse().map_err(|e| parse_err(ln, format!("{e}")))?;
    let (ln, sline) = rd.next_content().ok_or_else(|| parse_err(ln, "missing block sizes"))?;
    let raw_sizes: Vec<i64> = sline
        .split(|c: char| c.is_whitespace() || c == ',' || c == '(' || c == ')' || c == '{' || c == '}')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<i64>().map_err(|e| parse_err(ln, format!("bad block size: {e}"))))
        .collect::<Result<_, _>>()?;
    if raw_sizes.len() != nblocks {
        return Err(parse_err(ln, format!("expected {nblocks} block sizes, got {}", raw_sizes.len())));
    }
    let (ln, cline) = rd.next_content().ok_or_else(|| parse_err(ln, "missing objective line"))?;
    let c: Vec<f64> = cline
        .split(|ch: char| ch.is_whitespace() || ch == ',')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|e| parse_err(ln, format!("bad objective entry: {e}"))))
        .collect::<Result<_, _>>()?;
    if c.len() != m {
        return Err(parse_err(ln, format!("expected {m} objective entries, got {}", c.len())));
    }

    // Expand diagonal blocks; map (sdpa block, index) -> template block.
    let mut base = Vec::with_capacity(nblocks);
    let mut blocks: Vec<PsdBlockTemplate<T>> = Vec::new();
    for &s in &raw_sizes {
        base.push(blocks.len());
        if s >= 0 {
            blocks.push(PsdBlockTemplate::new(s as usize));
        } else {
            for _ in 0..(-s) as usize {
                blocks.push(PsdBlockTemplate::new(1));
            }
        }
    }

    while let Some((ln, line)) = rd.next_content() {
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() != 5 {
            return Err(parse_err(ln, format!("expected `mat blk i j value`, got `{line}`")));
        }
        let mat: usize = tok[0].parse().map_err(|e| parse_err(ln, format!("{e}")))?;
        let blk: usize = tok[1].parse().map_err(|e| parse_err(ln, format!("{e}")))?;
        let i: usize = tok[2].parse().map_err(|e| parse_err(ln, format!("{e}")))?;
        let j: usize = tok[3].parse().map_err(|e| parse_err(ln, format!("{e}")))?;
        let v: f64 = tok[4].parse().map_err(|e| parse_err(ln, format!("{e}")))?;
        if mat > m || blk == 0 || blk > nblocks || i == 0 || j == 0 {
            return Err(parse_err(ln, "entry indices out of range"));
        }
        let diag = raw_sizes[blk - 1] < 0;
        let (tpl_idx, bi, bj) = if diag {
            if i != j {
                return Err(parse_err(ln, "off-diagonal entry in a diagonal block"));
            }
            if i > (-raw_sizes[blk - 1]) as usize {
                return Err(parse_err(ln, "entry indices out of range"));
            }
            (base[blk - 1] + i - 1, 0u32, 0u32)
        } else {
            let sz = raw_sizes[blk - 1] as usize;
            if i > sz || j > sz {
                return Err(parse_err(ln, "entry indices out of range"));
            }
            (base[blk - 1], (i.min(j) - 1) as u32, (i.max(j) - 1) as u32)
        };
        if mat == 0 {
            // F0 enters the slack as A0 = -F0
            blocks[tpl_idx].constant.push((bi, bj, T::c(-v)));
        } else {
            blocks[tpl_idx].terms.push((mat - 1, bi, bj, T::c(v)));
        }
    }

    let objective: Vec<(usize, T)> = c
        .iter()
        .enumerate()
        .filter(|(_, &v)| v != 0.0)
        .map(|(t, &v)| (t, T::c(v)))
        .collect();
    Ok(LinearSdp {
        n_vars: m,
        objective,
        objective_offset: offset,
        blocks,
        equalities: Vec::new(),
    })
}

/// Read a solver output file holding the primal variable vector, either as an
/// SDPA-style `xVec = {v1, v2, ...}` line or as bare whitespace/comma
/// separated numbers. Pinned variables of `sdp` are re-inserted and the
/// solution is graded against the problem's blocks.
pub fn import_sdpa_solution<T: Scalar>(
    path: &Path,
    sdp: &LinearSdp<T>,
) -> Result<MomentSolution<T>, SdpError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| SdpError::Io { path: path.into(), source })?;
    let values = parse_solution_vector(&text)?;
    let red = reduce(sdp)?;
    if values.len() != red.vars.len() {
        return Err(parse_err(
            0,
            format!("expected {} primal values, got {}", red.vars.len(), values.len()),
        ));
    }

    let mut y = DVector::<T>::zeros(sdp.n_vars);
    for &(v, val) in &sdp.equalities {
        y[v] = val;
    }
    for (t, &orig) in red.vars.iter().enumerate() {
        y[orig] = T::c(values[t]);
    }

    // Grade feasibility: every block must be PSD within a loose tolerance.
    let x_red = DVector::from_iterator(red.vars.len(), values.iter().map(|&v| T::c(v)));
    let mut worst = T::zero();
    for b in &red.blocks {
        let mut s = b.a0.clone();
        for (t, tr) in &b.entries {
            super::solver_add_scaled_sym(&mut s, tr, x_red[*t]);
        }
        let eigs = s.symmetric_eigenvalues();
        let lam_min = eigs.iter().copied().fold(T::huge(), |a, b| a.min(b));
        let scale = T::one() + b.a0.norm();
        worst = worst.max((-lam_min / scale).max(T::zero()));
    }
    let objective = sdp.objective_value(&y);
    let status = if worst <= T::c(1e-6) { SolveStatus::Optimal } else { SolveStatus::Inaccurate };
    Ok(MomentSolution {
        y,
        objective,
        dual_objective: objective,
        status,
        rel_gap: T::zero(),
        primal_residual: worst,
        dual_residual: T::zero(),
    })
}

fn parse_solution_vector(text: &str) -> Result<Vec<f64>, SdpError> {
    // Preferred: an `xVec = { ... }` section.
    if let Some(pos) = text.find("xVec") {
        let rest = &text[pos..];
        let open = rest.find('{').ok_or_else(|| parse_err(0, "xVec without `{`"))?;
        let close = rest[open..].find('}').ok_or_else(|| parse_err(0, "xVec without `}`"))? + open;
        let body = &rest[open + 1..close];
        return body
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().map_err(|e| parse_err(0, format!("bad xVec entry `{s}`: {e}"))))
            .collect();
    }
    // Fallback: all tokens on non-comment lines.
    let mut values = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('*') || t.starts_with('"') {
            continue;
        }
        for tok in t.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()) {
            values.push(
                tok.parse::<f64>()
                    .map_err(|e| parse_err(no + 1, format!("bad value `{tok}`: {e}")))?,
            );
        }
    }
    if values.is_empty() {
        return Err(parse_err(0, "no solution values found"));
    }
    Ok(values)
}
