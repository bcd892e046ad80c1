//! Eigenvalues of small dense real matrices.
//!
//! Balancing, reduction to upper Hessenberg form by stabilized elementary
//! similarity transforms, then Francis double-shift QR iteration.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Result, SimError};

/// Largest dimension accepted by [`eigenvalues_real`].
pub const MAX_DIM: usize = 16;

const MAX_ITERATIONS_PER_ROOT: usize = 60;
const RADIX: f64 = 2.0;

/// 1-based square scratch matrix, mirroring the textbook index ranges.
struct Scratch {
    n: usize,
    data: Vec<f64>,
}

impl Scratch {
    fn from_matrix(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        let mut data = vec![0.0; (n + 1) * (n + 1)];
        for i in 0..n {
            for j in 0..n {
                data[(i + 1) * (n + 1) + j + 1] = m[(i, j)];
            }
        }
        Self { n, data }
    }
}

impl std::ops::Index<(usize, usize)> for Scratch {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * (self.n + 1) + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Scratch {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * (self.n + 1) + j]
    }
}

fn balance(a: &mut Scratch) {
    let n = a.n;
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 1..=n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 1..=n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / RADIX;
                let mut f = 1.0;
                let s = c + r;
                while c < g {
                    f *= RADIX;
                    c *= sqrdx;
                }
                g = r * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= sqrdx;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    for j in 1..=n {
                        a[(i, j)] *= g;
                    }
                    for j in 1..=n {
                        a[(j, i)] *= f;
                    }
                }
            }
        }
    }
}

fn to_hessenberg(a: &mut Scratch) {
    let n = a.n;
    for m in 2..n {
        let mut x = 0.0f64;
        let mut i = m;
        for j in m..=n {
            if a[(j, m - 1)].abs() > x.abs() {
                x = a[(j, m - 1)];
                i = j;
            }
        }
        if i != m {
            for j in (m - 1)..=n {
                let tmp = a[(i, j)];
                a[(i, j)] = a[(m, j)];
                a[(m, j)] = tmp;
            }
            for j in 1..=n {
                let tmp = a[(j, i)];
                a[(j, i)] = a[(j, m)];
                a[(j, m)] = tmp;
            }
        }
        if x != 0.0 {
            for i in (m + 1)..=n {
                let mut y = a[(i, m - 1)];
                if y != 0.0 {
                    y /= x;
                    a[(i, m - 1)] = y;
                    for j in m..=n {
                        a[(i, j)] -= y * a[(m, j)];
                    }
                    for j in 1..=n {
                        a[(j, m)] += y * a[(j, i)];
                    }
                }
            }
        }
    }
    for i in 3..=n {
        for j in 1..(i - 1) {
            a[(i, j)] = 0.0;
        }
    }
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

fn hessenberg_qr(a: &mut Scratch) -> Result<Vec<Complex64>> {
    let n = a.n;
    let mut wr = vec![0.0; n + 1];
    let mut wi = vec![0.0; n + 1];
    let mut anorm = 0.0;
    for i in 1..=n {
        for j in (i.max(2) - 1)..=n {
            anorm += a[(i, j)].abs();
        }
    }
    let mut nn = n;
    let mut t = 0.0;
    let (mut p, mut q, mut r): (f64, f64, f64);
    while nn >= 1 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l >= 2 {
                let mut s = a[(l - 1, l - 1)].abs() + a[(l, l)].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[(l, l - 1)].abs() + s == s {
                    a[(l, l - 1)] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[(nn, nn)];
            if l == nn {
                wr[nn] = x + t;
                wi[nn] = 0.0;
                nn -= 1;
            } else {
                let mut y = a[(nn - 1, nn - 1)];
                let mut w = a[(nn, nn - 1)] * a[(nn - 1, nn)];
                if l == nn - 1 {
                    p = 0.5 * (y - x);
                    q = p * p + w;
                    let mut z = q.abs().sqrt();
                    x += t;
                    if q >= 0.0 {
                        z = p + sign(z, p);
                        wr[nn - 1] = x + z;
                        wr[nn] = x + z;
                        if z != 0.0 {
                            wr[nn] = x - w / z;
                        }
                        wi[nn - 1] = 0.0;
                        wi[nn] = 0.0;
                    } else {
                        wr[nn - 1] = x + p;
                        wr[nn] = x + p;
                        wi[nn - 1] = -z;
                        wi[nn] = z;
                    }
                    nn -= 2;
                } else {
                    if its == MAX_ITERATIONS_PER_ROOT {
                        return Err(SimError::NoConvergence { iterations: its });
                    }
                    if its == 10 || its == 20 || its == 40 {
                        // Exceptional shift.
                        t += x;
                        for i in 1..=nn {
                            a[(i, i)] -= x;
                        }
                        let s = a[(nn, nn - 1)].abs() + a[(nn - 1, nn - 2)].abs();
                        x = 0.75 * s;
                        y = x;
                        w = -0.4375 * s * s;
                    }
                    its += 1;
                    let mut m = nn - 2;
                    loop {
                        let z = a[(m, m)];
                        let r0 = x - z;
                        let s0 = y - z;
                        p = (r0 * s0 - w) / a[(m + 1, m)] + a[(m, m + 1)];
                        q = a[(m + 1, m + 1)] - z - r0 - s0;
                        r = a[(m + 2, m + 1)];
                        let s = p.abs() + q.abs() + r.abs();
                        p /= s;
                        q /= s;
                        r /= s;
                        if m == l {
                            break;
                        }
                        let u = a[(m, m - 1)].abs() * (q.abs() + r.abs());
                        let v =
                            p.abs() * (a[(m - 1, m - 1)].abs() + z.abs() + a[(m + 1, m + 1)].abs());
                        if u + v == v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in (m + 2)..=nn {
                        a[(i, i - 2)] = 0.0;
                        if i != m + 2 {
                            a[(i, i - 3)] = 0.0;
                        }
                    }
                    let mut k = m;
                    while k < nn {
                        if k != m {
                            p = a[(k, k - 1)];
                            q = a[(k + 1, k - 1)];
                            r = 0.0;
                            if k != nn - 1 {
                                r = a[(k + 2, k - 1)];
                            }
                            x = p.abs() + q.abs() + r.abs();
                            if x != 0.0 {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        let s = sign((p * p + q * q + r * r).sqrt(), p);
                        if s != 0.0 {
                            if k == m {
                                if l != m {
                                    a[(k, k - 1)] = -a[(k, k - 1)];
                                }
                            } else {
                                a[(k, k - 1)] = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            let z = r / s;
                            q /= p;
                            r /= p;
                            for j in k..=nn {
                                let mut pp = a[(k, j)] + q * a[(k + 1, j)];
                                if k != nn - 1 {
                                    pp += r * a[(k + 2, j)];
                                    a[(k + 2, j)] -= pp * z;
                                }
                                a[(k + 1, j)] -= pp * y;
                                a[(k, j)] -= pp * x;
                            }
                            let mmin = nn.min(k + 3);
                            for i in l..=mmin {
                                let mut pp = x * a[(i, k)] + y * a[(i, k + 1)];
                                if k != nn - 1 {
                                    pp += z * a[(i, k + 2)];
                                    a[(i, k + 2)] -= pp * r;
                                }
                                a[(i, k + 1)] -= pp * q;
                                a[(i, k)] -= pp;
                            }
                        }
                        k += 1;
                    }
                }
            }
            if nn == 0 || l + 1 >= nn {
                break;
            }
        }
    }
    Ok((1..=n).map(|i| Complex64::new(wr[i], wi[i])).collect())
}

/// All eigenvalues of a real square matrix (n <= 16), in no particular order.
pub fn eigenvalues_real(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "eigenvalues_real needs a square matrix");
    assert!(n <= MAX_DIM, "eigenvalues_real supports n <= {MAX_DIM}");
    match n {
        0 => return Ok(Vec::new()),
        1 => return Ok(vec![Complex64::new(m[(0, 0)], 0.0)]),
        _ => {}
    }
    let mut a = Scratch::from_matrix(m);
    balance(&mut a);
    to_hessenberg(&mut a);
    hessenberg_qr(&mut a)
}

/// Largest real part of the spectrum.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues_real(m)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| {
            a.re.partial_cmp(&b.re)
                .unwrap()
                .then(a.im.partial_cmp(&b.im).unwrap())
        });
        v
    }

    /// Companion matrix of prod (x - r_i) for real roots.
    fn companion(roots: &[f64]) -> DMatrix<f64> {
        let n = roots.len();
        // Coefficients of the monic polynomial, c[k] multiplies x^k.
        let mut c = vec![0.0; n + 1];
        c[0] = 1.0;
        for (deg, &r) in roots.iter().enumerate() {
            for k in (0..=deg + 1).rev() {
                let lower = if k > 0 { c[k - 1] } else { 0.0 };
                c[k] = lower - r * c[k];
            }
        }
        let mut m = DMatrix::zeros(n, n);
        for i in 1..n {
            m[(i, i - 1)] = 1.0;
        }
        for i in 0..n {
            m[(i, n - 1)] = -c[i];
        }
        m
    }

    #[test]
    fn diagonal() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let e = sorted(eigenvalues_real(&m).unwrap());
        for (z, want) in e.iter().zip([1.0, 2.0, 3.0]) {
            assert!((z - Complex64::new(want, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn rotation_generator() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let e = sorted(eigenvalues_real(&m).unwrap());
        assert!((e[0] - Complex64::new(0.0, -1.0)).norm() < 1e-14);
        assert!((e[1] - Complex64::new(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn companion_roots() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let mut roots: Vec<f64> = (0..6).map(|_| rng.random_range(-3.0..3.0)).collect();
            roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
            if roots.windows(2).any(|w| w[1] - w[0] < 0.2) {
                continue;
            }
            let e = sorted(eigenvalues_real(&companion(&roots)).unwrap());
            for (z, r) in e.iter().zip(&roots) {
                assert!((z.re - r).abs() < 1e-9 && z.im.abs() < 1e-9, "{z} vs {r}");
            }
        }
    }

    #[test]
    fn complex_pairs_match_characteristic_polynomial() {
        // Block-diagonal rotation-scaling blocks hidden by a similarity transform.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pairs = [(-0.5, 1.0), (-0.001, 2.0), (0.3, 0.7)];
        let mut d = DMatrix::zeros(6, 6);
        for (k, (re, im)) in pairs.iter().enumerate() {
            d[(2 * k, 2 * k)] = *re;
            d[(2 * k + 1, 2 * k + 1)] = *re;
            d[(2 * k, 2 * k + 1)] = *im;
            d[(2 * k + 1, 2 * k)] = -*im;
        }
        let s = DMatrix::from_fn(
            6,
            6,
            |i, j| if i == j { 2.0 } else { 0.0 } + rng.random_range(-0.5..0.5),
        );
        let m = &s * d * s.clone().try_inverse().unwrap();
        let e = eigenvalues_real(&m).unwrap();
        for (re, im) in pairs {
            for target in [Complex64::new(re, im), Complex64::new(re, -im)] {
                let best = e
                    .iter()
                    .map(|z| (z - target).norm())
                    .fold(f64::INFINITY, f64::min);
                assert!(best < 1e-9, "missing {target}: {e:?}");
            }
        }
    }

    #[test]
    fn backward_error_via_determinant() {
        // det(M - lambda I) relative to |M|^n must vanish for every eigenvalue.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let m = DMatrix::from_fn(6, 6, |_, _| rng.random_range(-1.0..1.0));
            let norm = m.abs().max();
            for z in eigenvalues_real(&m).unwrap() {
                let mc =
                    m.map(|v| Complex64::new(v, 0.0)) - DMatrix::<Complex64>::identity(6, 6) * z;
                let sv = mc.singular_values();
                let smallest = sv.iter().cloned().fold(f64::INFINITY, f64::min);
                assert!(smallest <= 1e-12 * norm * 6.0, "sigma_min {smallest:e}");
            }
        }
    }
}
