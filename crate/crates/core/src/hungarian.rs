//! Rectangular linear assignment (Hungarian / Kuhn-Munkres with potentials).
//!
//! The solver is generic over the cost type so the same routine handles plain
//! `f64` costs and lexicographic multi-tier objectives ([`Lex3`]). Any ordered
//! abelian group works: the algorithm only adds, subtracts and compares.

use std::cmp::Ordering;
use std::ops::{Add, Sub};

pub trait AssignmentCost: Copy + PartialOrd + Add<Output = Self> + Sub<Output = Self> {
    fn zero() -> Self;
    fn infinity() -> Self;
}

impl AssignmentCost for f64 {
    fn zero() -> Self {
        0.0
    }

    fn infinity() -> Self {
        f64::INFINITY
    }
}

/// Three-tier cost compared lexicographically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lex3(pub f64, pub f64, pub f64);

impl PartialOrd for Lex3 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.0.partial_cmp(&other.0)? {
            Ordering::Equal => {}
            ord => return Some(ord),
        }
        match self.1.partial_cmp(&other.1)? {
            Ordering::Equal => {}
            ord => return Some(ord),
        }
        self.2.partial_cmp(&other.2)
    }
}

impl Add for Lex3 {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Lex3(self.0 + o.0, self.1 + o.1, self.2 + o.2)
    }
}

impl Sub for Lex3 {
    type Output = Self;

    fn sub(self, o: Self) -> Self {
        Lex3(self.0 - o.0, self.1 - o.1, self.2 - o.2)
    }
}

impl AssignmentCost for Lex3 {
    fn zero() -> Self {
        Lex3(0.0, 0.0, 0.0)
    }

    fn infinity() -> Self {
        Lex3(f64::INFINITY, f64::INFINITY, f64::INFINITY)
    }
}

/// Minimum-cost assignment on a `rows x cols` matrix.
///
/// Every row of the smaller side is assigned; the result maps each row to its
/// column (`None` only for surplus rows when `rows > cols`). Costs must be
/// finite.
pub fn solve_min<C, F>(rows: usize, cols: usize, cost: F) -> Vec<Option<usize>>
where
    C: AssignmentCost,
    F: Fn(usize, usize) -> C,
{
    if rows == 0 || cols == 0 {
        return vec![None; rows];
    }
    if rows <= cols {
        let col_of_row = solve_tall(rows, cols, &cost);
        col_of_row.into_iter().map(Some).collect()
    } else {
        let row_of_col = solve_tall(cols, rows, &|i, j| cost(j, i));
        let mut out = vec![None; rows];
        for (c, r) in row_of_col.into_iter().enumerate() {
            out[r] = Some(c);
        }
        out
    }
}

// n <= m; returns the column assigned to each of the n rows.
fn solve_tall<C, F>(n: usize, m: usize, cost: &F) -> Vec<usize>
where
    C: AssignmentCost,
    F: Fn(usize, usize) -> C,
{
    let inf = C::infinity();
    let mut u = vec![C::zero(); n + 1];
    let mut v = vec![C::zero(); m + 1];
    // p[j]: row (1-based) assigned to column j; p[0] is the row being inserted
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut minv = vec![inf; m + 1];
    let mut used = vec![false; m + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|x| *x = inf);
        used.iter_mut().for_each(|x| *x = false);

        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] = u[p[j]] + delta;
                    v[j] = v[j] - delta;
                } else {
                    minv[j] = minv[j] - delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }

        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=m {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}
