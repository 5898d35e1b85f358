//! Proper orthogonal decomposition: batch bases from a snapshot matrix and
//! incremental updates by additive SVD modification.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Inner-product magnitude between the first and last basis columns above which
/// the combined basis is re-orthonormalized.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_TOL: f64 = 1e-14;

/// Orthonormal spatial basis with its singular values.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedBasis {
    z: DMatrix<f64>,
    sigma: Vec<f64>,
    eps: f64,
    total_energy: f64,
}

/// Which of the three batch algorithms computes the POD.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PodBranch {
    /// Pick by aspect ratio: SVD when `q/n ∈ [0.1, 10]`, otherwise the smaller Gram matrix.
    Auto,
    /// Thin SVD of the snapshot matrix.
    Svd,
    /// Eigen-decomposition of `Y Yᵀ` (`n × n`).
    Outer,
    /// Eigen-decomposition of `Yᵀ Y` (`q × q`), vectors recovered as `YΦ/√λ`.
    Inner,
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::config("eps", format!("energy threshold must lie in (0, 1], got {eps}")));
    }
    Ok(())
}

/// Smallest `N` with `(total - discarded - Σ_{i>N} σ_i²) ≥ eps·total`, capped at the
/// numerical rank of `sigma` (sorted descending).
fn truncation(sigma: &[f64], discarded: f64, total: f64, eps: f64) -> usize {
    let Some(&first) = sigma.first() else { return 0 };
    if !(first > 0.0) {
        return 0;
    }
    let rank = sigma.iter().take_while(|&&s| s > RANK_TOL * first).count();
    let budget = (1.0 - eps) * total;
    // Tail sums accumulated from the small end for accuracy.
    let mut tail = vec![0.0; sigma.len() + 1];
    for i in (0..sigma.len()).rev() {
        tail[i] = tail[i + 1] + sigma[i] * sigma[i];
    }
    (1..=rank).find(|&n| discarded + tail[n] <= budget).unwrap_or(rank)
}

fn sorted_desc(values: &DVector<f64>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}

impl ReducedBasis {
    /// Basis with no vectors for `n` unknowns.
    pub fn empty(n: usize, eps: f64) -> Self {
        ReducedBasis { z: DMatrix::zeros(n, 0), sigma: Vec::new(), eps, total_energy: 0.0 }
    }

    /// Basis with given orthonormal columns; `sigma` defaults to ones.
    pub fn from_columns(z: DMatrix<f64>, sigma: Option<Vec<f64>>, eps: f64) -> Result<Self> {
        let sigma = sigma.unwrap_or_else(|| vec![1.0; z.ncols()]);
        if sigma.len() != z.ncols() {
            return Err(Error::Dimension(format!("{} singular values for {} columns", sigma.len(), z.ncols())));
        }
        let total_energy = sigma.iter().map(|s| s * s).sum();
        Ok(ReducedBasis { z, sigma, eps, total_energy })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Squared Frobenius norm of every snapshot absorbed so far.
    pub fn total_energy(&self) -> f64 {
        self.total_energy
    }

    /// Fraction of `total_energy` retained by the current singular values.
    pub fn retained_energy(&self) -> f64 {
        if self.total_energy == 0.0 {
            return 1.0;
        }
        self.sigma.iter().map(|s| s * s).sum::<f64>() / self.total_energy
    }

    pub fn dim(&self) -> usize {
        self.z.nrows()
    }

    pub fn len(&self) -> usize {
        self.z.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.z.ncols() == 0
    }

    /// `‖ZᵀZ - I‖_∞` (entrywise maximum).
    pub fn orthogonality_error(&self) -> f64 {
        let g = self.z.transpose() * &self.z;
        (g - DMatrix::identity(self.len(), self.len())).amax()
    }

    /// Writes `u64 n`, `u64 N`, `Z` column-major and `σ` as little-endian `f64`.
    pub fn write_to(&self, mut out: impl Write) -> Result<()> {
        out.write_all(&(self.dim() as u64).to_le_bytes())?;
        out.write_all(&(self.len() as u64).to_le_bytes())?;
        for x in self.z.iter().chain(self.sigma.iter()) {
            out.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads the format of [`ReducedBasis::write_to`]. The energy history is not
    /// stored, so the total energy restarts at `Σσ²`.
    pub fn read_from(mut input: impl Read, eps: f64) -> Result<Self> {
        let mut word = [0u8; 8];
        let mut next = |input: &mut dyn Read| -> Result<[u8; 8]> {
            input.read_exact(&mut word)?;
            Ok(word)
        };
        let n = u64::from_le_bytes(next(&mut input)?) as usize;
        let len = u64::from_le_bytes(next(&mut input)?) as usize;
        let mut z = DMatrix::zeros(n, len);
        for x in z.iter_mut() {
            *x = f64::from_le_bytes(next(&mut input)?);
        }
        let mut sigma = vec![0.0; len];
        for s in &mut sigma {
            *s = f64::from_le_bytes(next(&mut input)?);
        }
        Self::from_columns(z, Some(sigma), eps)
    }
}

/// POD basis of the columns of `y` retaining a fraction `eps` of the energy.
pub fn pod_batch(y: &DMatrix<f64>, eps: f64) -> Result<ReducedBasis> {
    pod_batch_with(y, eps, PodBranch::Auto)
}

/// [`pod_batch`] with an explicit choice of algorithm.
pub fn pod_batch_with(y: &DMatrix<f64>, eps: f64, branch: PodBranch) -> Result<ReducedBasis> {
    check_eps(eps)?;
    let (n, q) = y.shape();
    if q == 0 {
        return Err(Error::Dimension("snapshot matrix has no columns".into()));
    }
    let total = y.norm_squared();
    if total == 0.0 {
        return Ok(ReducedBasis::empty(n, eps));
    }
    let branch = match branch {
        PodBranch::Auto => {
            let ratio = q as f64 / n as f64;
            if (0.1..=10.0).contains(&ratio) {
                PodBranch::Svd
            } else if ratio > 10.0 {
                PodBranch::Outer
            } else {
                PodBranch::Inner
            }
        }
        b => b,
    };
    let (vectors, sigma) = match branch {
        PodBranch::Svd | PodBranch::Auto => {
            let svd = y.clone().svd(true, false);
            let u = svd.u.expect("requested left singular vectors");
            let order = sorted_desc(&svd.singular_values);
            let sigma: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
            (u.select_columns(&order), sigma)
        }
        PodBranch::Outer => {
            let eig = (y * y.transpose()).symmetric_eigen();
            let order = sorted_desc(&eig.eigenvalues);
            let sigma = order.iter().map(|&i| eig.eigenvalues[i].max(0.0).sqrt()).collect();
            (eig.eigenvectors.select_columns(&order), sigma)
        }
        PodBranch::Inner => {
            let eig = (y.transpose() * y).symmetric_eigen();
            let order = sorted_desc(&eig.eigenvalues);
            let sigma: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0).sqrt()).collect();
            let top = sigma[0];
            let mut psi = DMatrix::zeros(n, order.len());
            for (c, &i) in order.iter().enumerate() {
                if sigma[c] > RANK_TOL * top {
                    psi.set_column(c, &(y * eig.eigenvectors.column(i) / sigma[c]));
                }
            }
            (psi, sigma)
        }
    };
    let keep = truncation(&sigma, 0.0, total, eps);
    Ok(ReducedBasis {
        z: vectors.columns(0, keep).into_owned(),
        sigma: sigma[..keep].to_vec(),
        eps,
        total_energy: total,
    })
}

/// Absorbs the snapshot columns of `bunch` into `basis`.
///
/// Projects the bunch onto the basis, orthonormalizes the remainder by QR,
/// re-orthonormalizes the combined basis when its first and last columns have
/// drifted apart, and truncates the SVD of the small core matrix by energy.
pub fn ipod_update(basis: &ReducedBasis, bunch: &DMatrix<f64>) -> Result<ReducedBasis> {
    let eps = basis.eps;
    check_eps(eps)?;
    let (n, b) = bunch.shape();
    if n != basis.dim() {
        return Err(Error::Dimension(format!("bunch has {n} rows, basis has {}", basis.dim())));
    }
    if b == 0 {
        return Ok(basis.clone());
    }
    let total = basis.total_energy + bunch.norm_squared();
    let retained: f64 = basis.sigma.iter().map(|s| s * s).sum();
    let discarded = (basis.total_energy - retained).max(0.0);
    if basis.is_empty() {
        let all = pod_batch(bunch, 1.0)?;
        let keep = truncation(&all.sigma, discarded, total, eps);
        return Ok(ReducedBasis {
            z: all.z.columns(0, keep).into_owned(),
            sigma: all.sigma[..keep].to_vec(),
            eps,
            total_energy: total,
        });
    }
    let nb = basis.len();
    let h = basis.z.transpose() * bunch;
    let p = bunch - &basis.z * &h;
    let qr = p.qr();
    let qp = qr.q();
    let rp = qr.r();
    let kp = qp.ncols();

    let mut q = DMatrix::zeros(n, nb + kp);
    q.columns_mut(0, nb).copy_from(&basis.z);
    q.columns_mut(nb, kp).copy_from(&qp);
    let mut f = DMatrix::zeros(nb + kp, nb + b);
    for (i, s) in basis.sigma.iter().enumerate() {
        f[(i, i)] = *s;
    }
    f.view_mut((0, nb), (nb, b)).copy_from(&h);
    f.view_mut((nb, nb), (kp, b)).copy_from(&rp);

    let last = q.ncols() - 1;
    if q.column(0).dot(&q.column(last)).abs() > ORTHOGONALITY_TOL {
        let re = q.clone().qr();
        f = re.r() * f;
        q = re.q();
    }

    let svd = f.svd(true, false);
    let u = svd.u.expect("requested left singular vectors");
    let order = sorted_desc(&svd.singular_values);
    let sigma: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let keep = truncation(&sigma, discarded, total, eps);
    let u = u.select_columns(&order[..keep]);
    Ok(ReducedBasis { z: q * u, sigma: sigma[..keep].to_vec(), eps, total_energy: total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, q: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, q, |_, _| rng.random_range(-1.0..1.0))
    }

    /// Largest sine of the principal angles between two orthonormal bases of equal size.
    fn max_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        let residual = b - a * (a.transpose() * b);
        residual.singular_values().iter().cloned().fold(0.0, f64::max)
    }

    #[test]
    fn single_column() {
        let y = DMatrix::from_column_slice(3, 1, &[3.0, 0.0, 4.0]);
        let basis = pod_batch(&y, 0.99).unwrap();
        assert_eq!(basis.len(), 1);
        assert!((basis.sigma()[0] - 5.0).abs() < 1e-14);
        let col = basis.matrix().column(0) * basis.matrix()[(0, 0)].signum();
        assert!((col - y.column(0) / 5.0).amax() < 1e-14);
    }

    #[test]
    fn identity_keeps_everything_at_full_energy() {
        let basis = pod_batch(&DMatrix::identity(2, 2), 1.0).unwrap();
        assert_eq!(basis.len(), 2);
        assert!(basis.sigma().iter().all(|s| (s - 1.0).abs() < 1e-14));
    }

    #[test]
    fn zero_snapshots_give_an_empty_basis() {
        let basis = pod_batch(&DMatrix::zeros(5, 3), 0.9).unwrap();
        assert!(basis.is_empty());
        assert!(pod_batch(&DMatrix::zeros(5, 3), 0.0).is_err());
    }

    #[test]
    fn forced_branches_agree_with_the_svd_oracle() {
        let y = random(40, 6, 7);
        let oracle = y.clone().svd(true, false);
        let mut expected: Vec<f64> = oracle.singular_values.iter().cloned().collect();
        expected.sort_by(|a, b| b.total_cmp(a));
        let eps = 1.0 - 1e-10;
        let reference = pod_batch_with(&y, eps, PodBranch::Svd).unwrap();
        for branch in [PodBranch::Svd, PodBranch::Outer, PodBranch::Inner, PodBranch::Auto] {
            let b = pod_batch_with(&y, eps, branch).unwrap();
            assert_eq!(b.len(), 6, "{branch:?}");
            for (s, e) in b.sigma().iter().zip(&expected) {
                assert!((s - e).abs() < 1e-10 * e.max(1.0), "{branch:?}");
            }
            assert!(max_angle(b.matrix(), reference.matrix()) < 1e-8, "{branch:?}");
            assert!(b.orthogonality_error() < 1e-10);
        }
    }

    #[test]
    fn energy_truncation_picks_the_smallest_sufficient_rank() {
        // Orthogonal columns with energies 100, 10, 1 (total 111).
        let mut y = DMatrix::zeros(4, 3);
        y[(0, 0)] = 10.0;
        y[(1, 1)] = 10f64.sqrt();
        y[(2, 2)] = 1.0;
        assert_eq!(pod_batch(&y, 0.9).unwrap().len(), 1);
        assert_eq!(pod_batch(&y, 0.95).unwrap().len(), 2);
        assert_eq!(pod_batch(&y, 110.0 / 111.0).unwrap().len(), 2);
        assert_eq!(pod_batch(&y, 0.995).unwrap().len(), 3);
    }

    #[test]
    fn duplicate_column_keeps_the_rank() {
        let mut e1 = DMatrix::zeros(3, 1);
        e1[(0, 0)] = 1.0;
        let basis = ReducedBasis::from_columns(e1.clone(), Some(vec![1.0]), 1.0 - 1e-12).unwrap();
        let up = ipod_update(&basis, &e1).unwrap();
        assert_eq!(up.len(), 1);
        assert!((up.sigma()[0] - 2f64.sqrt()).abs() < 1e-14);
        assert!((up.matrix()[(0, 0)].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn orthogonal_column_extends_the_span() {
        let mut e1 = DMatrix::zeros(3, 1);
        e1[(0, 0)] = 1.0;
        let mut e2 = DMatrix::zeros(3, 1);
        e2[(1, 0)] = 1.0;
        let basis = ReducedBasis::from_columns(e1, Some(vec![1.0]), 1.0).unwrap();
        let up = ipod_update(&basis, &e2).unwrap();
        assert_eq!(up.len(), 2);
        assert!(up.matrix().row(2).amax() < 1e-15);
        assert!(up.orthogonality_error() < 1e-15);
    }

    #[test]
    fn streaming_matches_batch() {
        let y = random(50, 20, 3);
        let eps = 1.0 - 1e-12;
        let mut basis = ReducedBasis::empty(50, eps);
        for c in (0..20).step_by(2) {
            let before = basis.len();
            basis = ipod_update(&basis, &y.columns(c, 2).into_owned()).unwrap();
            assert!(basis.len() <= before + 2);
            assert!(basis.orthogonality_error() < 1e-8);
        }
        let batch = pod_batch_with(&y, eps, PodBranch::Svd).unwrap();
        assert_eq!(basis.len(), batch.len());
        for (s, e) in basis.sigma().iter().zip(batch.sigma()) {
            assert!((s - e).abs() < 1e-8 * e);
        }
        assert!(max_angle(basis.matrix(), batch.matrix()) < 1e-6);
        assert!((basis.total_energy() - y.norm_squared()).abs() < 1e-10 * y.norm_squared());
    }

    #[test]
    fn energy_bookkeeping_includes_discarded_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let eps = 0.99;
        let mut basis = ReducedBasis::empty(30, eps);
        let mut total = 0.0;
        for k in 0..40 {
            let scale = 0.7f64.powi(k % 10);
            let col = DMatrix::from_fn(30, 1, |i, _| scale * ((i as f64) * 0.1 * (k as f64 + 1.0)).sin() + 1e-3 * rng.random_range(-1.0..1.0));
            total += col.norm_squared();
            basis = ipod_update(&basis, &col).unwrap();
            assert!((basis.total_energy() - total).abs() < 1e-12 * total);
            assert!(basis.retained_energy() >= eps - 1e-12);
        }
    }

    #[test]
    fn serialization_round_trip() {
        let basis = pod_batch(&random(7, 3, 1), 1.0).unwrap();
        let mut bytes = Vec::new();
        basis.write_to(&mut bytes).unwrap();
        assert_eq!(bytes.len(), 16 + 8 * (21 + 3));
        let back = ReducedBasis::read_from(bytes.as_slice(), 1.0).unwrap();
        assert_eq!(back.matrix(), basis.matrix());
        assert_eq!(back.sigma(), basis.sigma());
        assert!(ReducedBasis::read_from(&bytes[..20], 1.0).is_err());
    }
}
