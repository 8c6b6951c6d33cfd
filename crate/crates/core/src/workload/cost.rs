//! Closed-form flop and byte counts for each kernel family.

use super::fixture::FamilyCoefs;
use crate::error::{Result, SimError};

/// Bytes of a directory entry (owner stack, address, length).
pub const DIRECTORY_ENTRY_BYTES: f64 = 16.0;
/// Bytes of a shared block header.
pub const BLOCK_HEADER_BYTES: u64 = 32;

/// Size parameters of one kernel instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelShape {
    /// Real double-precision `(m x k) * (k x n)`.
    Gemm { m: f64, n: f64, k: f64 },
    /// Complex double transform of length `n`.
    Fft { n: u64 },
    /// Element-wise complex product of two length-`n` vectors.
    FaceSplit { n: f64 },
    /// Exchange of `bytes` across all partitions.
    Alltoall { bytes: f64 },
    /// Symmetric eigendecomposition of an `n x n` matrix.
    Syevd { n: u64 },
    /// Projector application: `wavefunctions` vectors times `atoms` blocks of
    /// `projectors` entries, plus packing of `owned_atoms` blocks.
    Pseudo {
        wavefunctions: f64,
        atoms: u64,
        owned_atoms: u64,
        projectors: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelCost {
    pub flops: f64,
    pub bytes_read: f64,
    pub bytes_written: f64,
}

impl KernelCost {
    pub fn bytes(&self) -> f64 {
        self.bytes_read + self.bytes_written
    }

    pub fn scaled(&self, factor: f64) -> KernelCost {
        KernelCost {
            flops: self.flops * factor,
            bytes_read: self.bytes_read * factor,
            bytes_written: self.bytes_written * factor,
        }
    }
}

/// `ceil(log2(n))`; non-power-of-two transform lengths round up.
pub fn log2_ceil(n: u64) -> u32 {
    if n <= 1 {
        0
    } else {
        64 - (n - 1).leading_zeros()
    }
}

/// Length in bytes of a packed shared block with `indices` projector indices
/// and an `m x m` coefficient matrix.
pub fn block_length(indices: u64, m: u64) -> u64 {
    BLOCK_HEADER_BYTES + 4 * indices + 8 * m * m
}

pub fn kernel_cost(shape: KernelShape, coefs: FamilyCoefs) -> Result<KernelCost> {
    let FamilyCoefs {
        flop_coef: fc,
        byte_coef: bc,
    } = coefs;
    let positive = |what: &str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(SimError::domain(format!("{what} must be positive, got {v}")))
        }
    };
    let cost = match shape {
        KernelShape::Gemm { m, n, k } => {
            positive("gemm m", m)?;
            positive("gemm n", n)?;
            positive("gemm k", k)?;
            KernelCost {
                flops: fc * 2.0 * m * n * k,
                bytes_read: bc * 8.0 * (m * k + k * n),
                bytes_written: bc * 8.0 * m * n,
            }
        }
        KernelShape::Fft { n } => {
            positive("fft length", n as f64)?;
            let n_f = n as f64;
            KernelCost {
                flops: fc * 5.0 * n_f * log2_ceil(n) as f64,
                bytes_read: bc * 16.0 * n_f,
                bytes_written: bc * 16.0 * n_f,
            }
        }
        KernelShape::FaceSplit { n } => {
            positive("face-split length", n)?;
            KernelCost {
                flops: fc * 6.0 * n,
                bytes_read: bc * 32.0 * n,
                bytes_written: bc * 16.0 * n,
            }
        }
        KernelShape::Alltoall { bytes } => {
            positive("all-to-all payload", bytes)?;
            KernelCost {
                flops: 0.0,
                bytes_read: bc * bytes,
                bytes_written: bc * bytes,
            }
        }
        KernelShape::Syevd { n } => {
            positive("syevd dimension", n as f64)?;
            let n_f = n as f64;
            let traffic = bc * n_f * n_f * log2_ceil(n).max(1) as f64;
            KernelCost {
                flops: fc * n_f * n_f * n_f,
                bytes_read: traffic / 2.0,
                bytes_written: traffic / 2.0,
            }
        }
        KernelShape::Pseudo {
            wavefunctions,
            atoms,
            owned_atoms,
            projectors,
        } => {
            positive("pseudopotential atoms", atoms as f64)?;
            positive("projector count", projectors as f64)?;
            let m = projectors as f64;
            let pairs = wavefunctions * atoms as f64;
            // Per (wavefunction, atom): gather m, dense m x m apply, scatter-add m.
            let flops = pairs * (2.0 * m * m + m);
            let read = pairs * (8.0 * m * m + 4.0 * m + 16.0 * m)
                + atoms as f64 * DIRECTORY_ENTRY_BYTES;
            let written =
                pairs * 8.0 * m + owned_atoms as f64 * block_length(projectors as u64, projectors as u64) as f64;
            KernelCost {
                flops: fc * flops,
                bytes_read: bc * read,
                bytes_written: bc * written,
            }
        }
    };
    Ok(cost)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log2_rounds_up() {
        assert_eq!(log2_ceil(1), 0);
        assert_eq!(log2_ceil(2), 1);
        assert_eq!(log2_ceil(8), 3);
        assert_eq!(log2_ceil(9), 4);
        assert_eq!(log2_ceil(4096), 12);
    }

    #[test]
    fn closed_forms() {
        let u = FamilyCoefs::UNIT;
        let g = kernel_cost(KernelShape::Gemm { m: 4.0, n: 4.0, k: 4.0 }, u).unwrap();
        assert_eq!(g.flops, 128.0);
        assert_eq!(g.bytes(), 8.0 * 48.0);
        let f = kernel_cost(KernelShape::Fft { n: 8 }, u).unwrap();
        assert_eq!(f.flops, 120.0);
        assert_eq!(f.bytes(), 256.0);
        let fs = kernel_cost(KernelShape::FaceSplit { n: 1000.0 }, u).unwrap();
        assert_eq!(fs.flops, 6000.0);
        assert_eq!(fs.bytes(), 48000.0);
        let a = kernel_cost(KernelShape::Alltoall { bytes: 100.0 }, u).unwrap();
        assert_eq!((a.flops, a.bytes()), (0.0, 200.0));
        let s = kernel_cost(KernelShape::Syevd { n: 16 }, FamilyCoefs::new(9.0, 2.0)).unwrap();
        assert_eq!(s.flops, 9.0 * 4096.0);
        assert_eq!(s.bytes(), 2.0 * 256.0 * 4.0);
    }

    #[test]
    fn non_power_of_two_fft_rounds_log_up() {
        let f = kernel_cost(KernelShape::Fft { n: 1000 }, FamilyCoefs::UNIT).unwrap();
        assert_eq!(f.flops, 5.0 * 1000.0 * 10.0);
    }

    #[test]
    fn rejects_empty_sizes() {
        assert!(kernel_cost(KernelShape::Fft { n: 0 }, FamilyCoefs::UNIT).is_err());
        assert!(kernel_cost(KernelShape::Gemm { m: 0.0, n: 1.0, k: 1.0 }, FamilyCoefs::UNIT).is_err());
    }

    #[test]
    fn block_length_formula() {
        assert_eq!(block_length(5, 3), 124);
    }
}
