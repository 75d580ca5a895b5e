//! Preconditioned conjugate gradients for the reduced conductance system.

use super::sparse::CsrMatrix;
use super::FemError;

/// Incomplete Cholesky factor with zero fill, stored row-wise as the lower
/// triangle (diagonal last in each row).
pub struct Ic0 {
    l: CsrMatrix,
}

impl Ic0 {
    /// Factorizes `A + shift * diag(A)`; `None` on a non-positive pivot.
    pub fn new(a: &CsrMatrix, shift: f64) -> Option<Self> {
        let n = a.n;
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j < i {
                    col_idx.push(j);
                    values.push(v);
                } else if j == i {
                    col_idx.push(j);
                    values.push(v * (1.0 + shift));
                }
            }
            if col_idx.last() != Some(&i) {
                return None;
            }
            row_ptr.push(col_idx.len());
        }
        let mut l = CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        };
        for i in 0..n {
            let (si, ei) = (l.row_ptr[i], l.row_ptr[i + 1]);
            for k in si..ei - 1 {
                let j = l.col_idx[k];
                let (sj, ej) = (l.row_ptr[j], l.row_ptr[j + 1]);
                // dot of rows i and j over columns < j
                let (mut p, mut q) = (si, sj);
                let mut dot = 0.0;
                while p < k && q < ej - 1 {
                    let (cp, cq) = (l.col_idx[p], l.col_idx[q]);
                    if cp == cq {
                        dot += l.values[p] * l.values[q];
                        p += 1;
                        q += 1;
                    } else if cp < cq {
                        p += 1;
                    } else {
                        q += 1;
                    }
                }
                l.values[k] = (l.values[k] - dot) / l.values[ej - 1];
            }
            let d = l.values[ei - 1] - l.values[si..ei - 1].iter().map(|v| v * v).sum::<f64>();
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            l.values[ei - 1] = d.sqrt();
        }
        Some(Self { l })
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let l = &self.l;
        for i in 0..l.n {
            let (s, e) = (l.row_ptr[i], l.row_ptr[i + 1]);
            let mut acc = r[i];
            for k in s..e - 1 {
                acc -= l.values[k] * z[l.col_idx[k]];
            }
            z[i] = acc / l.values[e - 1];
        }
        for i in (0..l.n).rev() {
            let (s, e) = (l.row_ptr[i], l.row_ptr[i + 1]);
            z[i] /= l.values[e - 1];
            let zi = z[i];
            for k in s..e - 1 {
                z[l.col_idx[k]] -= l.values[k] * zi;
            }
        }
    }
}

pub enum Preconditioner {
    Ic0(Ic0),
    Jacobi(Vec<f64>),
}

impl Preconditioner {
    /// IC(0), with diagonal shifts on breakdown, falling back to Jacobi.
    pub fn for_matrix(a: &CsrMatrix) -> Self {
        for shift in [0.0, 1e-3, 1e-2, 1e-1] {
            if let Some(f) = Ic0::new(a, shift) {
                if shift > 0.0 {
                    log::debug!("IC(0) needed a diagonal shift of {shift}");
                }
                return Preconditioner::Ic0(f);
            }
        }
        log::debug!("IC(0) broke down, using Jacobi");
        Preconditioner::jacobi(a)
    }

    pub fn jacobi(a: &CsrMatrix) -> Self {
        Preconditioner::Jacobi(
            a.diagonal()
                .into_iter()
                .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
                .collect(),
        )
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Preconditioner::Ic0(f) => f.apply(r, z),
            Preconditioner::Jacobi(inv) => {
                for ((zi, ri), di) in z.iter_mut().zip(r).zip(inv) {
                    *zi = ri * di;
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PcgOutcome {
    pub iterations: usize,
    /// Final true relative residual.
    pub residual: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` in place from the initial guess in `x`.
pub fn pcg(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    precond: &Preconditioner,
    tol: f64,
    max_iter: usize,
) -> Result<PcgOutcome, FemError> {
    let n = a.n;
    let bnorm = norm(b);
    if n == 0 {
        return Ok(PcgOutcome {
            iterations: 0,
            residual: 0.0,
        });
    }
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(PcgOutcome {
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut history = Vec::new();
    let mut it = 0;
    // restarts guard against drift between recursive and true residuals
    for _restart in 0..4 {
        a.matvec_into(x, &mut ap);
        for i in 0..n {
            r[i] = b[i] - ap[i];
        }
        let mut rel = norm(&r) / bnorm;
        history.push(rel);
        if rel <= tol {
            return Ok(PcgOutcome {
                iterations: it,
                residual: rel,
            });
        }
        precond.apply(&r, &mut z);
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);
        while it < max_iter {
            it += 1;
            a.matvec_into(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                break;
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            rel = norm(&r) / bnorm;
            if it % 50 == 0 {
                history.push(rel);
            }
            if rel <= tol {
                break;
            }
            precond.apply(&r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        if it >= max_iter {
            break;
        }
    }
    a.matvec_into(x, &mut ap);
    let true_rel = norm(&b.iter().zip(&ap).map(|(bi, ai)| bi - ai).collect::<Vec<_>>()) / bnorm;
    if true_rel <= tol {
        return Ok(PcgOutcome {
            iterations: it,
            residual: true_rel,
        });
    }
    history.push(true_rel);
    Err(FemError::LinearSolver {
        iterations: it,
        residual_history: history,
    })
}

/// PCG with IC(0), retrying once with Jacobi if the first attempt fails.
pub fn solve_spd(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<PcgOutcome, FemError> {
    let start = x.to_vec();
    match pcg(a, b, x, &Preconditioner::for_matrix(a), tol, max_iter) {
        Ok(o) => Ok(o),
        Err(first) => {
            log::debug!("PCG with IC(0) failed ({first}), retrying with Jacobi");
            x.copy_from_slice(&start);
            pcg(a, b, x, &Preconditioner::jacobi(a), tol, max_iter).map_err(|_| first)
        }
    }
}
