use serde::{Deserialize, Serialize};

use super::{from_choi, ChoiMatrix, KrausChannel};
use crate::error::{Error, Result};
use crate::linalg::{inv_sqrt_psd, kron, partial_trace, sample_ginibre, sample_haar_unitary, Matrix};
use crate::rng::RngStream;
use crate::scalar::Real;

const SINGULAR_RETRIES: usize = 3;

/// Which random-map construction to sample from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Construction {
    #[default]
    GinibreKraus,
    Stinespring,
    Choi,
}

impl Construction {
    pub fn sample<T: Real>(self, n_qubits: usize, rank: usize, rng: &mut RngStream) -> Result<KrausChannel<T>> {
        match self {
            Construction::GinibreKraus => random_ginibre_kraus(n_qubits, rank, rng),
            Construction::Stinespring => random_stinespring(n_qubits, rank, rng),
            Construction::Choi => random_choi(n_qubits, rank, rng),
        }
    }
}

impl std::str::FromStr for Construction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ginibre-kraus" | "ginibre" => Ok(Construction::GinibreKraus),
            "stinespring" => Ok(Construction::Stinespring),
            "choi" => Ok(Construction::Choi),
            other => Err(Error::InvalidParams(format!("unknown construction '{other}'"))),
        }
    }
}

fn check_rank(n_qubits: usize, rank: usize) -> Result<usize> {
    let dim = 1usize
        .checked_shl(n_qubits as u32)
        .filter(|_| n_qubits < 16)
        .ok_or_else(|| Error::InvalidParams(format!("{n_qubits} qubits is beyond desk scale")))?;
    if rank == 0 || rank > dim * dim {
        return Err(Error::InvalidParams(format!(
            "rank must lie in 1..={} for {n_qubits} qubits, got {rank}",
            dim * dim
        )));
    }
    Ok(dim)
}

/// `K_i = G_i S^{-1/2}` with `S = sum G_i^dagger G_i` and Ginibre `G_i`.
pub fn random_ginibre_kraus<T: Real>(n_qubits: usize, rank: usize, rng: &mut RngStream) -> Result<KrausChannel<T>> {
    let dim = check_rank(n_qubits, rank)?;
    let mut last = None;
    for _ in 0..SINGULAR_RETRIES {
        let gs: Vec<Matrix<T>> = (0..rank).map(|_| sample_ginibre(dim, dim, rng)).collect();
        let mut s = Matrix::zeros(dim, dim);
        for g in &gs {
            s = &s + &g.adjoint_matmul(g);
        }
        match inv_sqrt_psd(&s.hermitian_part()) {
            Ok(r) => return KrausChannel::new(gs.iter().map(|g| g.matmul(&r)).collect()),
            Err(e @ Error::Singular { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Kraus blocks `K_i = <e_i| U |e_0>` of a Haar unitary on system (x) environment,
/// environment dimension `rank`.
pub fn random_stinespring<T: Real>(n_qubits: usize, rank: usize, rng: &mut RngStream) -> Result<KrausChannel<T>> {
    let dim = check_rank(n_qubits, rank)?;
    let u = sample_haar_unitary::<T>(dim * rank, rng);
    let kraus = stinespring_blocks(u.matrix(), dim, rank);
    KrausChannel::new(kraus)
}

/// Splits a unitary on `sys (x) env` (index `s * env + e`) into the Kraus
/// operators of the channel with the environment starting in `|0>`.
pub(crate) fn stinespring_blocks<T: Real>(u: &Matrix<T>, dim: usize, env: usize) -> Vec<Matrix<T>> {
    (0..env)
        .map(|i| Matrix::from_fn(dim, dim, |so, si| u[(so * env + i, si * env)]))
        .collect()
}

/// Samples a rank-`r` Choi matrix `W = G G^dagger` (G of shape `N^2 x r`) and
/// rescales the input factor so that `Tr_out = I`.
pub fn random_choi<T: Real>(n_qubits: usize, rank: usize, rng: &mut RngStream) -> Result<KrausChannel<T>> {
    let dim = check_rank(n_qubits, rank)?;
    let mut last = None;
    for _ in 0..SINGULAR_RETRIES {
        let g = sample_ginibre::<T>(dim * dim, rank, rng);
        let w = g.matmul_adjoint(&g);
        let a = partial_trace(&w, &[dim, dim], &[0])?;
        match inv_sqrt_psd(&a.hermitian_part()) {
            Ok(x) => {
                let lift = kron(&x, &Matrix::identity(dim));
                let c = lift.matmul(&w).matmul_adjoint(&lift).hermitian_part();
                return from_choi(&ChoiMatrix::new(c)?);
            }
            Err(e @ Error::Singular { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigvals_general;

    #[test]
    fn rank_one_constructions_are_unitary() {
        let mut rng = RngStream::new(11, 0);
        for c in [Construction::GinibreKraus, Construction::Stinespring, Construction::Choi] {
            let ch = c.sample::<f64>(2, 1, &mut rng).unwrap();
            assert_eq!(ch.rank(), 1);
            let k = &ch.kraus_ops()[0];
            assert!(k.adjoint_matmul(k).max_abs_diff(&Matrix::identity(4)) < 1e-10, "{c:?}");
        }
    }

    #[test]
    fn constructions_are_trace_preserving() {
        let mut rng = RngStream::new(12, 0);
        for c in [Construction::GinibreKraus, Construction::Stinespring, Construction::Choi] {
            for rank in [2, 3, 4, 16] {
                let ch = c.sample::<f64>(2, rank, &mut rng).unwrap();
                assert_eq!(ch.rank(), rank);
                assert!(ch.tp_deviation() <= 1e-10, "{c:?} rank {rank}");
            }
        }
    }

    #[test]
    fn rejects_bad_rank() {
        let mut rng = RngStream::new(13, 0);
        assert!(matches!(
            random_ginibre_kraus::<f64>(1, 0, &mut rng),
            Err(Error::InvalidParams(_))
        ));
        assert!(matches!(
            random_stinespring::<f64>(1, 5, &mut rng),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = random_ginibre_kraus::<f64>(2, 2, &mut RngStream::new(14, 3)).unwrap();
        let b = random_ginibre_kraus::<f64>(2, 2, &mut RngStream::new(14, 3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ginibre_kraus_subleading_spectrum_in_girko_disk() {
        let mut rng = RngStream::new(15, 0);
        let (mut inside, mut total) = (0usize, 0usize);
        for _ in 0..20 {
            let ch = random_ginibre_kraus::<f64>(3, 2, &mut rng).unwrap();
            let vals = eigvals_general(ch.to_superoperator().matrix()).unwrap();
            for v in &vals[1..] {
                total += 1;
                if v.norm() <= 1.0 / 2f64.sqrt() + 0.05 {
                    inside += 1;
                }
            }
        }
        assert!(inside as f64 / total as f64 >= 0.95);
    }

    #[test]
    fn construction_parses() {
        assert_eq!("stinespring".parse::<Construction>().unwrap(), Construction::Stinespring);
        assert_eq!("ginibre-kraus".parse::<Construction>().unwrap(), Construction::GinibreKraus);
        assert!("lindblad".parse::<Construction>().is_err());
    }
}
