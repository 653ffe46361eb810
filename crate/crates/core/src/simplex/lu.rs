//! Sparse LU factorization of the basis matrix with product-form updates.
//!
//! The factorization eliminates one (row, column) pivot at a time, choosing
//! the sparsest remaining column and, within it, the sparsest row among
//! entries passing a relative threshold. Each pivot records the multipliers
//! (L part) and the remaining pivot row (U part). Basis changes between
//! refactorizations are appended as eta columns.

/// Relative threshold for accepting a pivot inside its column.
const PIVOT_THRESHOLD: f64 = 0.1;
/// Entries below this magnitude mark a column as dependent.
const SINGULAR_TOL: f64 = 1e-11;
/// Fill-in below this magnitude is dropped.
const DROP_TOL: f64 = 1e-14;

#[derive(Debug, Clone)]
struct Eta {
    pos: usize,
    pivot: f64,
    /// Entries of the FTRAN'd entering column, excluding `pos`.
    col: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Factor {
    m: usize,
    pivot_row: Vec<usize>,
    pivot_col: Vec<usize>,
    pivot_val: Vec<f64>,
    l_cols: Vec<Vec<(usize, f64)>>,
    u_rows: Vec<Vec<(usize, f64)>>,
    etas: Vec<Eta>,
}

/// Columns that could not be pivoted and the rows left without a pivot.
#[derive(Debug, Clone)]
pub(crate) struct Singular {
    pub cols: Vec<usize>,
    pub rows: Vec<usize>,
}

impl Factor {
    /// Factorizes the `m × m` matrix whose column `k` is `cols[k]` (row, value).
    pub fn new(m: usize, cols: &[Vec<(usize, f64)>]) -> Result<Self, Singular> {
        debug_assert_eq!(cols.len(), m);
        let mut col_vals: Vec<Vec<(usize, f64)>> = cols
            .iter()
            .map(|c| c.iter().copied().filter(|&(_, v)| v != 0.0).collect())
            .collect();
        let mut row_cols: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (c, entries) in col_vals.iter().enumerate() {
            for &(r, _) in entries {
                row_cols[r].push(c);
            }
        }
        let mut row_count: Vec<usize> = row_cols.iter().map(Vec::len).collect();
        let mut row_active = vec![true; m];
        let mut col_active = vec![true; m];
        let mut position = vec![usize::MAX; m];

        let mut f = Factor {
            m,
            ..Default::default()
        };
        let mut bad_cols = Vec::new();

        // Columns bucketed by count would be faster; a linear scan keeps the
        // pivot order deterministic and is cheap at desk scale.
        for _ in 0..m {
            let mut best: Option<(usize, usize)> = None;
            for c in 0..m {
                if col_active[c] {
                    let count = col_vals[c].len();
                    if best.is_none_or(|(_, bc)| count < bc) {
                        best = Some((c, count));
                        if count <= 1 {
                            break;
                        }
                    }
                }
            }
            let Some((pc, _)) = best else { break };
            let max_abs = col_vals[pc].iter().fold(0.0_f64, |a, &(_, v)| a.max(v.abs()));
            if max_abs < SINGULAR_TOL {
                col_active[pc] = false;
                bad_cols.push(pc);
                for &(r, _) in &col_vals[pc] {
                    row_count[r] = row_count[r].saturating_sub(1);
                }
                continue;
            }
            let mut pick: Option<(usize, f64, usize)> = None;
            for &(r, v) in &col_vals[pc] {
                if v.abs() >= PIVOT_THRESHOLD * max_abs {
                    let better = match pick {
                        None => true,
                        Some((pr, pv, prc)) => {
                            row_count[r] < prc
                                || (row_count[r] == prc && (v.abs() > pv.abs() || (v.abs() == pv.abs() && r < pr)))
                        }
                    };
                    if better {
                        pick = Some((r, v, row_count[r]));
                    }
                }
            }
            let (pr, piv, _) = pick.expect("column has an entry above threshold");

            let column = std::mem::take(&mut col_vals[pc]);
            let l: Vec<(usize, f64)> = column
                .iter()
                .filter(|&&(r, _)| r != pr)
                .map(|&(r, v)| (r, v / piv))
                .collect();
            for &(r, _) in &column {
                row_count[r] = row_count[r].saturating_sub(1);
            }
            col_active[pc] = false;
            row_active[pr] = false;

            let mut u_row = Vec::new();
            let pattern = std::mem::take(&mut row_cols[pr]);
            for &cc in &pattern {
                if !col_active[cc] {
                    continue;
                }
                let entries = &mut col_vals[cc];
                let Some(k) = entries.iter().position(|&(r, _)| r == pr) else {
                    continue;
                };
                let (_, u) = entries.swap_remove(k);
                u_row.push((cc, u));
                if l.is_empty() {
                    continue;
                }
                for (k, &(r, _)) in entries.iter().enumerate() {
                    position[r] = k;
                }
                for &(r, mult) in &l {
                    let delta = -mult * u;
                    match position[r] {
                        usize::MAX => {
                            if delta.abs() > DROP_TOL {
                                entries.push((r, delta));
                                row_cols[r].push(cc);
                                row_count[r] += 1;
                            }
                        }
                        k => entries[k].1 += delta,
                    }
                }
                for &(r, _) in entries.iter() {
                    position[r] = usize::MAX;
                }
                // Row counts stay approximate after cancellation; they only
                // steer pivot choice.
                entries.retain(|&(_, v)| v.abs() > DROP_TOL);
            }

            f.pivot_row.push(pr);
            f.pivot_col.push(pc);
            f.pivot_val.push(piv);
            f.l_cols.push(l);
            f.u_rows.push(u_row);
        }

        if bad_cols.is_empty() && f.pivot_row.len() == m {
            Ok(f)
        } else {
            let mut cols: Vec<usize> = bad_cols;
            cols.extend((0..m).filter(|&c| col_active[c]));
            cols.sort_unstable();
            cols.dedup();
            let rows = (0..m).filter(|&r| row_active[r]).collect();
            Err(Singular { cols, rows })
        }
    }

    pub fn num_etas(&self) -> usize {
        self.etas.len()
    }

    /// Solves `B x = rhs`; `rhs` is indexed by row, the result by basis position.
    pub fn ftran(&self, rhs: &mut Vec<f64>) {
        let b = rhs;
        for (k, l) in self.l_cols.iter().enumerate() {
            let v = b[self.pivot_row[k]];
            if v != 0.0 {
                for &(r, mult) in l {
                    b[r] -= mult * v;
                }
            }
        }
        let mut x = vec![0.0; self.m];
        for k in (0..self.pivot_row.len()).rev() {
            let mut s = b[self.pivot_row[k]];
            for &(c, u) in &self.u_rows[k] {
                s -= u * x[c];
            }
            x[self.pivot_col[k]] = s / self.pivot_val[k];
        }
        for eta in &self.etas {
            let xp = x[eta.pos] / eta.pivot;
            x[eta.pos] = xp;
            if xp != 0.0 {
                for &(i, d) in &eta.col {
                    x[i] -= d * xp;
                }
            }
        }
        *b = x;
    }

    /// Solves `Bᵀ y = rhs`; `rhs` is indexed by basis position, the result by row.
    pub fn btran(&self, rhs: &mut Vec<f64>) {
        let c = rhs;
        for eta in self.etas.iter().rev() {
            let s: f64 = eta.col.iter().map(|&(i, d)| d * c[i]).sum();
            c[eta.pos] = (c[eta.pos] - s) / eta.pivot;
        }
        let mut w = vec![0.0; self.m];
        for k in 0..self.pivot_row.len() {
            let wk = c[self.pivot_col[k]] / self.pivot_val[k];
            w[self.pivot_row[k]] = wk;
            if wk != 0.0 {
                for &(cc, u) in &self.u_rows[k] {
                    c[cc] -= u * wk;
                }
            }
        }
        for k in (0..self.pivot_row.len()).rev() {
            let s: f64 = self.l_cols[k].iter().map(|&(r, mult)| mult * w[r]).sum();
            w[self.pivot_row[k]] -= s;
        }
        *c = w;
    }

    /// Records that basis position `pos` now holds the column whose FTRAN is `d`.
    pub fn update(&mut self, pos: usize, d: &[f64]) {
        let col = d
            .iter()
            .enumerate()
            .filter(|&(i, &v)| i != pos && v != 0.0)
            .map(|(i, &v)| (i, v))
            .collect();
        self.etas.push(Eta {
            pos,
            pivot: d[pos],
            col,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_to_cols(a: &[Vec<f64>]) -> Vec<Vec<(usize, f64)>> {
        let m = a.len();
        (0..m)
            .map(|c| (0..m).filter(|&r| a[r][c] != 0.0).map(|r| (r, a[r][c])).collect())
            .collect()
    }

    fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
    }

    fn transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let m = a.len();
        (0..m).map(|c| (0..m).map(|r| a[r][c]).collect()).collect()
    }

    fn sample() -> Vec<Vec<f64>> {
        vec![
            vec![4.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 2.0, -1.0],
            vec![1.0, 3.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 5.0],
        ]
    }

    #[test]
    fn solves_both_directions() {
        let a = sample();
        let f = Factor::new(4, &dense_to_cols(&a)).unwrap();
        let rhs = vec![1.0, -2.0, 0.5, 3.0];
        let mut x = rhs.clone();
        f.ftran(&mut x);
        for (l, r) in matvec(&a, &x).iter().zip(&rhs) {
            assert!((l - r).abs() < 1e-12);
        }
        let mut y = rhs.clone();
        f.btran(&mut y);
        for (l, r) in matvec(&transpose(&a), &y).iter().zip(&rhs) {
            assert!((l - r).abs() < 1e-12);
        }
    }

    #[test]
    fn eta_updates_track_column_replacement() {
        let mut a = sample();
        let mut f = Factor::new(4, &dense_to_cols(&a)).unwrap();
        for (pos, newcol) in [(1usize, [0.0, 2.0, 1.0, 1.0]), (3, [1.0, 0.0, 0.0, 2.0]), (0, [0.5, 0.5, 0.5, 0.0])] {
            let mut d = newcol.to_vec();
            f.ftran(&mut d);
            f.update(pos, &d);
            for r in 0..4 {
                a[r][pos] = newcol[r];
            }
            let rhs = vec![1.0, 2.0, 3.0, 4.0];
            let mut x = rhs.clone();
            f.ftran(&mut x);
            for (l, r) in matvec(&a, &x).iter().zip(&rhs) {
                assert!((l - r).abs() < 1e-10);
            }
            let mut y = rhs.clone();
            f.btran(&mut y);
            for (l, r) in matvec(&transpose(&a), &y).iter().zip(&rhs) {
                assert!((l - r).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn reports_dependent_columns() {
        let a = vec![
            vec![1.0, 2.0, 0.0],
            vec![2.0, 4.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        let err = Factor::new(3, &dense_to_cols(&a)).unwrap_err();
        assert_eq!(err.cols.len(), 1);
        assert_eq!(err.rows.len(), 1);
    }
}
