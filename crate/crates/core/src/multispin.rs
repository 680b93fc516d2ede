//! Non-interacting multi-spin Hamiltonians built as Kronecker sums of
//! single-spin Hamiltonians. Dense matrices only; at most 12 spins.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::propagators::Propagator;
use crate::spincore::{Hamiltonian2, PhysicalConstants, Spinor, C64};

pub const MAX_SPINS: usize = 12;

pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

#[derive(Debug, Clone, PartialEq)]
pub struct MultiSpinHamiltonian {
    n: usize,
    m: CMatrix,
}

impl MultiSpinHamiltonian {
    pub fn spins(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    /// Ascending eigenvalues (J).
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.m)
    }
}

/// `A (+) B = A (x) I_n + I_m (x) B` where `n = dim B`, `m = dim A`.
pub fn kronecker_sum(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    for m in [a, b] {
        if !m.is_square() {
            return Err(Error::NonSquare(m.nrows(), m.ncols()));
        }
    }
    let id_a = CMatrix::identity(a.nrows(), a.nrows());
    let id_b = CMatrix::identity(b.nrows(), b.nrows());
    Ok(a.kronecker(&id_b) + id_a.kronecker(b))
}

fn to_dense(h: &Hamiltonian2) -> CMatrix {
    CMatrix::from_iterator(2, 2, h.matrix().iter().copied())
}

/// Left fold `((H1 (+) H2) (+) H3) ...`. Spin 1 is the most significant
/// index of the product basis.
pub fn n_spin_hamiltonian(hs: &[Hamiltonian2]) -> Result<MultiSpinHamiltonian> {
    let (first, rest) = hs.split_first().ok_or(Error::EmptyList)?;
    if hs.len() > MAX_SPINS {
        return Err(Error::TooManySpins(hs.len()));
    }
    let mut m = to_dense(first);
    for h in rest {
        m = kronecker_sum(&m, &to_dense(h))?;
    }
    Ok(MultiSpinHamiltonian { n: hs.len(), m })
}

/// `s1 (x) s2 (x) ...` in the same ordering as [`n_spin_hamiltonian`].
pub fn product_state(states: &[Spinor]) -> CVector {
    states.iter().fold(CVector::from_element(1, C64::new(1.0, 0.0)), |acc, s| {
        acc.kronecker(&CVector::from_column_slice(&[s.x2, s.x1]))
    })
}

/// Propagates each spin with its own propagator and returns the tensor
/// product of the results.
pub fn product_state_evolution(states: &[Spinor], propagators: &[Propagator]) -> Result<CVector> {
    if states.len() != propagators.len() {
        return Err(Error::LengthMismatch(states.len(), propagators.len()));
    }
    let evolved: Vec<Spinor> = states.iter().zip(propagators).map(|(s, u)| u.apply(s)).collect();
    Ok(product_state(&evolved))
}

/// Ascending eigenvalues of a Hermitian matrix. The matrix is rescaled to
/// unit max entry before decomposition.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return vec![0.0; m.nrows()];
    }
    let eig = (m / C64::new(scale, 0.0)).symmetric_eigenvalues();
    let mut v: Vec<f64> = eig.iter().map(|x| x * scale).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// All sums taking one eigenvalue from each single-spin Hamiltonian, sorted.
pub fn eigenvalue_sums(hs: &[Hamiltonian2]) -> Vec<f64> {
    let mut sums = vec![0.0];
    for h in hs {
        let (lo, hi) = h.eigenvalues();
        sums = sums.iter().flat_map(|s| [s + lo, s + hi]).collect();
    }
    sums.sort_by(f64::total_cmp);
    sums
}

/// `exp(-i H t / hbar)` on the full product space via Hermitian
/// eigendecomposition.
pub fn full_space_propagator(h: &MultiSpinHamiltonian, t: f64, c: &PhysicalConstants) -> CMatrix {
    let freq = h.matrix() / C64::new(c.hbar(), 0.0);
    let eig = freq.symmetric_eigen();
    let phases = CMatrix::from_diagonal(&eig.eigenvalues.map(|w| C64::from_polar(1.0, -w * t)));
    &eig.eigenvectors * phases * eig.eigenvectors.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagators::{free_evolution, general_propagator};
    use crate::spincore::{hamiltonian_general, hamiltonian_static, make_spinor, FieldConfig};

    fn diag(v: &[f64]) -> CMatrix {
        CMatrix::from_diagonal(&CVector::from_iterator(v.len(), v.iter().map(|x| C64::new(*x, 0.0))))
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        let scale = a.iter().chain(b).map(|x| x.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol * scale, "{x} vs {y}");
        }
    }

    #[test]
    fn diagonal_pair() {
        let s = kronecker_sum(&diag(&[1.0, -1.0]), &diag(&[2.0, -2.0])).unwrap();
        assert_eq!(s.nrows(), 4);
        assert_close(&hermitian_eigenvalues(&s), &[-3.0, -1.0, 1.0, 3.0], 1e-14);
    }

    #[test]
    fn zero_one_by_one_is_neutral() {
        let a = CMatrix::from_row_slice(2, 2, &[
            C64::new(1.0, 0.0), C64::new(0.5, -0.2),
            C64::new(0.5, 0.2), C64::new(-3.0, 0.0),
        ]);
        assert_eq!(kronecker_sum(&a, &diag(&[0.0])).unwrap(), a);
    }

    #[test]
    fn errors() {
        let rect = CMatrix::zeros(2, 3);
        assert_eq!(kronecker_sum(&rect, &diag(&[1.0])), Err(Error::NonSquare(2, 3)));
        assert_eq!(n_spin_hamiltonian(&[]), Err(Error::EmptyList));
        let c = PhysicalConstants::default();
        let h = hamiltonian_static(&FieldConfig::static_field(1.0), &c);
        assert_eq!(n_spin_hamiltonian(&vec![h; 13]).unwrap_err(), Error::TooManySpins(13));
        assert_eq!(product_state_evolution(&[Spinor::ground()], &[]), Err(Error::LengthMismatch(1, 0)));
    }

    #[test]
    fn identical_static_spins() {
        let c = PhysicalConstants::default();
        let fc = FieldConfig::static_field(2.0);
        let h = hamiltonian_static(&fc, &c);
        let e = 0.5 * c.gamma() * c.hbar() * 2.0;

        assert_eq!(n_spin_hamiltonian(&[h]).unwrap().matrix(), &to_dense(&h));

        let two = n_spin_hamiltonian(&[h, h]).unwrap();
        assert_close(&two.eigenvalues(), &[-2.0 * e, 0.0, 0.0, 2.0 * e], 1e-12);

        // 2^3 sign combinations of +/- e
        let three = n_spin_hamiltonian(&[h, h, h]).unwrap();
        assert_eq!(three.dim(), 8);
        let expect = [-3.0, -1.0, -1.0, -1.0, 1.0, 1.0, 1.0, 3.0].map(|k| k * e);
        assert_close(&three.eigenvalues(), &expect, 1e-12);
    }

    #[test]
    fn heterogeneous_pair_has_four_levels() {
        let c = PhysicalConstants::default();
        let h1 = hamiltonian_static(&FieldConfig::static_field(1.0), &c);
        let h2 = hamiltonian_static(&FieldConfig::static_field(2.5), &c);
        let ev = n_spin_hamiltonian(&[h1, h2]).unwrap().eigenvalues();
        assert_close(&ev, &eigenvalue_sums(&[h1, h2]), 1e-12);
        assert!(ev.windows(2).all(|w| w[1] - w[0] > 1e-3 * ev[3].abs()));
    }

    #[test]
    fn product_states() {
        let a = make_spinor(0.6, 0.1, 0.8, 0.2).unwrap();
        let b = make_spinor(0.3, -1.0, 0.4, 0.5).unwrap();
        let one = product_state_evolution(&[a], &[free_evolution(2.0, 0.3)]).unwrap();
        let direct = free_evolution(2.0, 0.3).apply(&a);
        assert_eq!(one.as_slice(), &[direct.x2, direct.x1]);

        let id = Propagator::identity();
        let two = product_state_evolution(&[a, b], &[id, id]).unwrap();
        let expect = [a.x2 * b.x2, a.x2 * b.x1, a.x1 * b.x2, a.x1 * b.x1];
        assert_eq!(two.as_slice(), &expect);
    }

    #[test]
    fn three_spins_separable() {
        let c = PhysicalConstants::default();
        let g = c.gamma();
        let fields = [
            FieldConfig { b0: 2.0 / g, bx: 0.3 / g, kprime: 0.1 * c.hbar(), ..Default::default() },
            FieldConfig { b0: 1.1 / g, by: -0.7 / g, bz_offset: 0.2 / g, ..Default::default() },
            FieldConfig { b0: 3.3 / g, bx: -0.4 / g, by: 0.5 / g, kprime: 0.3 * c.hbar(), ..Default::default() },
        ];
        let states = [
            make_spinor(0.6, 0.1, 0.8, 0.2).unwrap(),
            make_spinor(0.3, -1.0, 0.4, 0.5).unwrap(),
            Spinor::excited(),
        ];
        let t = 1.37;
        let hs: Vec<_> = fields.iter().map(|f| hamiltonian_general(f, &c)).collect();
        let props: Vec<_> = fields
            .iter()
            .map(|f| general_propagator(f.omega_x(&c), f.omega_y(&c), f.omega0(&c) + f.omega_z(&c), f.k(&c), t))
            .collect();
        let separable = product_state_evolution(&states, &props).unwrap();
        let h = n_spin_hamiltonian(&hs).unwrap();
        let full = full_space_propagator(&h, t, &c) * product_state(&states);
        assert!((separable - full).camax() < 1e-9);
    }
}
