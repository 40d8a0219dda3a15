//! Average gate fidelity between unitary channels.

use nalgebra::DMatrix;

use crate::error::{invalid, Result};
use crate::su2::{Unitary2, C64};

/// `(|Tr(Ut† Uc)|² + d) / (d (d + 1))` from a precomputed trace.
pub fn fidelity_from_trace(trace: C64, d: usize) -> f64 {
    let d = d as f64;
    ((trace.norm_sqr() + d) / (d * (d + 1.0))).clamp(0.0, 1.0)
}

pub fn unitarity_error(u: &DMatrix<C64>) -> f64 {
    let n = u.nrows();
    let p = u.adjoint() * u - DMatrix::<C64>::identity(n, n);
    p.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn check_pair(ut: &DMatrix<C64>, uc: &DMatrix<C64>) -> Result<usize> {
    let d = ut.nrows();
    if d == 0 || ut.ncols() != d || uc.shape() != ut.shape() {
        return Err(invalid(format!(
            "fidelity needs square matrices of equal size, got {:?} and {:?}",
            ut.shape(),
            uc.shape()
        )));
    }
    for (name, u) in [("target", ut), ("actual", uc)] {
        let e = unitarity_error(u);
        if e > 1e-8 {
            return Err(invalid(format!("{name} is not unitary (error {e:.2e})")));
        }
    }
    Ok(d)
}

/// Average gate fidelity of `uc` against `ut`, closed form.
pub fn average_gate_fidelity(ut: &DMatrix<C64>, uc: &DMatrix<C64>) -> Result<f64> {
    let d = check_pair(ut, uc)?;
    // Tr(A† B) = Σ conj(A_ij) B_ij, without forming the product
    let tr: C64 = ut.iter().zip(uc.iter()).map(|(a, b)| a.conj() * b).sum();
    Ok(fidelity_from_trace(tr, d))
}

/// All `4^n` Pauli strings on `n` qubits, leftmost factor most significant.
pub fn pauli_strings(n_qubits: usize) -> Vec<DMatrix<C64>> {
    let single: Vec<DMatrix<C64>> =
        [Unitary2::identity(), Unitary2::pauli_x(), Unitary2::pauli_y(), Unitary2::pauli_z()]
            .iter()
            .map(|p| DMatrix::from_fn(2, 2, |r, c| p.entry(r, c)))
            .collect();
    let mut out = vec![DMatrix::<C64>::identity(1, 1)];
    for _ in 0..n_qubits {
        out = out.iter().flat_map(|m| single.iter().map(move |p| m.kronecker(p))).collect();
    }
    out
}

/// Average gate fidelity by explicit twirl over the Pauli group.
pub fn pauli_sum_fidelity(ut: &DMatrix<C64>, uc: &DMatrix<C64>) -> Result<f64> {
    let d = check_pair(ut, uc)?;
    if !d.is_power_of_two() {
        return Err(invalid(format!("dimension {d} is not a power of two")));
    }
    let n = d.trailing_zeros() as usize;
    let ut_dag = ut.adjoint();
    let uc_dag = uc.adjoint();
    let sum: C64 = pauli_strings(n).iter().map(|p| (ut * p.adjoint() * &ut_dag * uc * p * &uc_dag).trace()).sum();
    let d = d as f64;
    Ok((sum.re + d * d) / (d * d * (d + 1.0)))
}
