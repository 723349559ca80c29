//! Operators on the truncated qubit ⊗ cavity Hilbert space.
//!
//! Conventions, fixed for reproducible serialization:
//! - composite ordering is qubit-major: index = qubit_level * (n_max + 1) + fock,
//! - qubit basis is (|g>, |e>) with σz|g> = -|g>, σz|e> = +|e>,
//! - σ- |e> = |g>,
//! - cavity ladder: <n-1| a |n> = sqrt(n).

use num_complex::Complex64;

use crate::error::CoreError;
use crate::matrix::{CMatrix, ONE, ZERO};

/// Truncation of the composite Hilbert space. The cavity keeps Fock states
/// 0..=n_max; the qubit is a two-level system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HilbertConfig {
    pub n_max: usize,
}

impl HilbertConfig {
    pub fn new(n_max: usize) -> Result<Self, CoreError> {
        if n_max < 1 {
            return Err(CoreError::InvalidParam("n_max must be >= 1".into()));
        }
        Ok(HilbertConfig { n_max })
    }

    pub const fn qubit_dim(&self) -> usize {
        2
    }

    pub fn cavity_dim(&self) -> usize {
        self.n_max + 1
    }

    pub fn dim(&self) -> usize {
        self.qubit_dim() * self.cavity_dim()
    }
}

/// Cavity annihilation operator on the bare cavity factor.
pub fn cavity_annihilation(cavity_dim: usize) -> CMatrix {
    let mut a = CMatrix::zeros(cavity_dim);
    for n in 1..cavity_dim {
        a.set(n - 1, n, Complex64::new((n as f64).sqrt(), 0.0));
    }
    a
}

/// The operator set entering the cavity–qubit master equation, embedded in
/// the composite space.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub cfg: HilbertConfig,
    pub a: CMatrix,
    pub a_dag: CMatrix,
    pub n_op: CMatrix,
    pub sx: CMatrix,
    pub sz: CMatrix,
    pub sm: CMatrix,
    pub sp: CMatrix,
    pub identity: CMatrix,
    /// x = a + a†, the monitored quadrature.
    pub x_op: CMatrix,
}

/// Build {a, a†, n̂, σx, σz, σ−, 1} on qubit ⊗ cavity.
pub fn build_operators(cfg: HilbertConfig) -> OperatorSet {
    let qd = cfg.qubit_dim();
    let cd = cfg.cavity_dim();
    let iq = CMatrix::identity(qd);
    let ic = CMatrix::identity(cd);

    let a_c = cavity_annihilation(cd);
    let a = CMatrix::kron(&iq, &a_c);
    let a_dag = a.adjoint();
    let n_op = CMatrix::mul(&a_dag, &a);

    // (|g>, |e>) basis: ground state at index 0.
    let mut sz_q = CMatrix::zeros(qd);
    sz_q.set(0, 0, -ONE);
    sz_q.set(1, 1, ONE);
    let mut sm_q = CMatrix::zeros(qd);
    sm_q.set(0, 1, ONE);
    let mut sx_q = CMatrix::zeros(qd);
    sx_q.set(0, 1, ONE);
    sx_q.set(1, 0, ONE);

    let sz = CMatrix::kron(&sz_q, &ic);
    let sm = CMatrix::kron(&sm_q, &ic);
    let sp = sm.adjoint();
    let sx = CMatrix::kron(&sx_q, &ic);
    let identity = CMatrix::identity(cfg.dim());
    let x_op = &a + &a_dag;

    OperatorSet { cfg, a, a_dag, n_op, sx, sz, sm, sp, identity, x_op }
}

/// Ket |qubit_level> ⊗ |fock> in the composite space.
pub fn basis_ket(cfg: HilbertConfig, qubit_level: usize, fock: usize) -> Vec<Complex64> {
    let mut v = vec![ZERO; cfg.dim()];
    v[qubit_level * cfg.cavity_dim() + fock] = ONE;
    v
}

/// Density matrix with validated invariants: Hermitian, unit trace,
/// eigenvalues bounded below by a small negative tolerance.
#[derive(Debug, Clone)]
pub struct DensityMatrix(CMatrix);

pub const HERM_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-9;
pub const POSITIVITY_TOL: f64 = -1e-8;

impl DensityMatrix {
    pub fn from_matrix(m: CMatrix) -> Result<Self, CoreError> {
        let defect = m.herm_defect();
        if defect > HERM_TOL {
            return Err(CoreError::InvalidParam(format!(
                "density matrix not Hermitian: defect {defect:.3e}"
            )));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(CoreError::InvalidParam(format!("density matrix trace {tr} != 1")));
        }
        let min_eig = m.eigvalsh().into_iter().next().unwrap_or(0.0);
        if min_eig < POSITIVITY_TOL {
            return Err(CoreError::InvalidParam(format!(
                "density matrix not positive: min eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(DensityMatrix(m))
    }

    /// |psi><psi| for a normalized ket.
    pub fn pure(ket: &[Complex64]) -> Self {
        let norm2: f64 = ket.iter().map(|c| c.norm_sqr()).sum();
        let scale = Complex64::new(1.0 / norm2.sqrt(), 0.0);
        let normed: Vec<Complex64> = ket.iter().map(|&c| c * scale).collect();
        DensityMatrix(CMatrix::outer(&normed, &normed))
    }

    /// Ground qubit ⊗ cavity vacuum.
    pub fn ground_vacuum(cfg: HilbertConfig) -> Self {
        DensityMatrix::pure(&basis_ket(cfg, 0, 0))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }
}

/// D[A]ρ = AρA† − ½(A†Aρ + ρA†A).
pub fn apply_dissipator(a: &CMatrix, rho: &CMatrix) -> Result<CMatrix, CoreError> {
    a.check_same_dim(rho)?;
    let a_dag = a.adjoint();
    let ada = CMatrix::mul(&a_dag, a);
    let mut out = CMatrix::mul(&CMatrix::mul(a, rho), &a_dag);
    out.add_scaled_assign(&CMatrix::mul(&ada, rho), Complex64::new(-0.5, 0.0));
    out.add_scaled_assign(&CMatrix::mul(rho, &ada), Complex64::new(-0.5, 0.0));
    Ok(out)
}

/// H[A]ρ = Aρ + ρA† − tr(Aρ + ρA†) ρ.
pub fn apply_measurement_superop(a: &CMatrix, rho: &CMatrix) -> Result<CMatrix, CoreError> {
    a.check_same_dim(rho)?;
    let a_dag = a.adjoint();
    let mut out = CMatrix::mul(a, rho);
    out.add_scaled_assign(&CMatrix::mul(rho, &a_dag), ONE);
    let tr = out.trace();
    out.add_scaled_assign(rho, -tr);
    Ok(out)
}

/// tr(Aρ).
pub fn expectation(a: &CMatrix, rho: &CMatrix) -> Result<Complex64, CoreError> {
    a.check_same_dim(rho)?;
    Ok(CMatrix::trace_of_product(a, rho))
}
