use num_complex::Complex64;

/// Result of a restarted GMRES run.
#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub x: Vec<Complex64>,
    pub iterations: usize,
    /// Relative residual `|b - A x| / |b|` tracked by the Arnoldi recurrence.
    pub residual: f64,
    pub converged: bool,
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn dotc(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Restarted GMRES with modified Gram–Schmidt and Givens rotations, starting
/// from zero.
pub fn gmres<F>(matvec: F, b: &[Complex64], tol: f64, max_iter: usize, restart: usize) -> GmresOutcome
where
    F: Fn(&[Complex64]) -> Vec<Complex64>,
{
    let n = b.len();
    let restart = restart.max(1).min(n.max(1));
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return GmresOutcome {
            x,
            iterations: 0,
            residual: 0.0,
            converged: true,
        };
    }
    let mut iterations = 0;
    let mut rel = 1.0;
    while iterations < max_iter {
        let ax = matvec(&x);
        let r: Vec<Complex64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm(&r);
        rel = beta / bnorm;
        if rel <= tol {
            return GmresOutcome {
                x,
                iterations,
                residual: rel,
                converged: true,
            };
        }
        let mut basis: Vec<Vec<Complex64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut hess: Vec<Vec<Complex64>> = Vec::new(); // column j has j+2 entries
        let mut cs: Vec<f64> = Vec::new();
        let mut sn: Vec<Complex64> = Vec::new();
        let mut g = vec![Complex64::new(beta, 0.0)];
        let mut j = 0;
        while j < restart && iterations < max_iter {
            let mut w = matvec(&basis[j]);
            let mut h = vec![Complex64::new(0.0, 0.0); j + 2];
            for (i, v) in basis.iter().enumerate() {
                let c = dotc(v, &w);
                h[i] = c;
                for (wk, vk) in w.iter_mut().zip(v) {
                    *wk -= c * vk;
                }
            }
            let wn = norm(&w);
            h[j + 1] = Complex64::new(wn, 0.0);
            for i in 0..j {
                let t = cs[i] * h[i] + sn[i] * h[i + 1];
                h[i + 1] = -sn[i].conj() * h[i] + cs[i] * h[i + 1];
                h[i] = t;
            }
            let (a, bb) = (h[j], h[j + 1]);
            let denom = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            let (c, s) = if denom == 0.0 {
                (1.0, Complex64::new(0.0, 0.0))
            } else if a.norm() == 0.0 {
                (0.0, bb.conj() / bb.norm())
            } else {
                let c = a.norm() / denom;
                (c, (a / a.norm()) * bb.conj() / denom)
            };
            h[j] = c * a + s * bb;
            h[j + 1] = Complex64::new(0.0, 0.0);
            cs.push(c);
            sn.push(s);
            let gj = g[j];
            g.push(-s.conj() * gj);
            g[j] = c * gj;
            hess.push(h);
            iterations += 1;
            rel = g[j + 1].norm() / bnorm;
            j += 1;
            if rel <= tol || wn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        // back substitution on the triangular system
        let mut y = vec![Complex64::new(0.0, 0.0); j];
        for i in (0..j).rev() {
            let mut s = g[i];
            for l in i + 1..j {
                s -= hess[l][i] * y[l];
            }
            y[i] = s / hess[i][i];
        }
        for (i, yi) in y.iter().enumerate() {
            for (xk, vk) in x.iter_mut().zip(&basis[i]) {
                *xk += yi * vk;
            }
        }
        if rel <= tol {
            let ax = matvec(&x);
            let true_rel = norm(&b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect::<Vec<_>>()) / bnorm;
            if true_rel <= tol {
                return GmresOutcome {
                    x,
                    iterations,
                    residual: true_rel,
                    converged: true,
                };
            }
            rel = true_rel;
        }
    }
    GmresOutcome {
        x,
        iterations,
        residual: rel,
        converged: rel <= tol,
    }
}
