//! Benchmark problem families: random SPD matrices with a prescribed
//! spectrum, the finite-difference two-point boundary value problem, and
//! nonsymmetric perturbations of either. Right-hand sides are always built as
//! `b = A x*` from a random known solution.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::vector::{norm2, sub};
use crate::linalg::{EigenBasis, SparseMatrix, SpectralModel, DENSE_EIGEN_CAP};

/// Seed for every random choice a generator makes. The same seed always
/// produces a bit-identical problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed(pub u64);

impl RngSeed {
    /// Independent ChaCha stream for one purpose within a generator.
    fn stream(self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(stream);
        rng
    }

    /// Seed of repetition `rep` in a batch started from `self`.
    pub fn offset(self, rep: u64) -> RngSeed {
        RngSeed(self.0.wrapping_add(rep))
    }
}

const STREAM_SPECTRUM: u64 = 1;
const STREAM_SOLUTION: u64 = 2;
const STREAM_ROTATION: u64 = 3;
const STREAM_PERTURBATION: u64 = 4;

/// Number of Householder reflections applied by the rotated random generator.
pub const ROTATION_REFLECTIONS: usize = 3;

/// Density of the nonsymmetric perturbation `V`.
pub const PERTURBATION_DENSITY: f64 = 0.1;

/// A linear system together with what is known about it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub a: SparseMatrix,
    pub b: Vec<f64>,
    pub x_star: Option<Vec<f64>>,
    pub spectrum: Option<SpectralModel>,
    /// Intended condition number of the (unperturbed) operator.
    pub kappa: Option<f64>,
    pub label: String,
    pub generator: String,
    pub seed: Option<RngSeed>,
}

impl Problem {
    pub fn n(&self) -> usize {
        self.a.n()
    }

    /// Wraps a matrix with a random solution in (-10, 10) and `b = A x*`.
    pub fn from_matrix(a: SparseMatrix, seed: RngSeed, label: impl Into<String>) -> Result<Self> {
        let x_star = random_solution(a.n(), seed);
        let b = a.spmv(&x_star)?;
        Ok(Problem {
            a,
            b,
            x_star: Some(x_star),
            spectrum: None,
            kappa: None,
            label: label.into(),
            generator: "matrix".into(),
            seed: Some(seed),
        })
    }

    /// Diagonal system `diag(eigenvalues) x = b` with the given solution.
    /// Used to build verification fixtures with an exactly known eigenbasis.
    pub fn diagonal_fixture(eigenvalues: &[f64], x_star: Vec<f64>) -> Result<Self> {
        if x_star.len() != eigenvalues.len() {
            return Err(Error::DimensionMismatch {
                expected: eigenvalues.len(),
                got: x_star.len(),
            });
        }
        let spectrum = SpectralModel::new(eigenvalues.to_vec(), EigenBasis::Coordinate)?;
        let a = SparseMatrix::diagonal(eigenvalues);
        let b = a.spmv(&x_star)?;
        Ok(Problem {
            a,
            b,
            x_star: Some(x_star),
            kappa: Some(spectrum.kappa()),
            spectrum: Some(spectrum),
            label: format!("diag-n{}", eigenvalues.len()),
            generator: "diagonal".into(),
            seed: None,
        })
    }

    /// Returns the system `(sA) x = s b`. The solution is unchanged and the
    /// spectrum, when attached, is scaled along with the operator.
    pub fn scaled(&self, s: f64) -> Result<Problem> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::config(format!(
                "scale must be finite and > 0, got {s}"
            )));
        }
        let a = SparseMatrix::from_triplets(
            self.n(),
            self.a.triplets().map(|(i, j, v)| (i, j, s * v)),
            self.a.is_symmetric(),
        )?;
        let spectrum = match &self.spectrum {
            Some(sm) => Some(SpectralModel::new(
                sm.eigenvalues().iter().map(|l| s * l).collect(),
                sm.basis().clone(),
            )?),
            None => None,
        };
        Ok(Problem {
            a,
            b: self.b.iter().map(|v| s * v).collect(),
            spectrum,
            label: format!("{}-x{s:e}", self.label),
            ..self.clone()
        })
    }

    /// Same system scaled so the largest eigenvalue is 1. Needs a spectrum.
    pub fn unit_normalized(&self) -> Result<Problem> {
        let sm = self.spectrum.as_ref().ok_or_else(|| {
            Error::Precondition("unit normalization needs a known spectrum".into())
        })?;
        self.scaled(1.0 / sm.lambda_max())
    }

    /// ‖A x* − b‖ / ‖b‖, or `None` without a known solution.
    pub fn solution_residual(&self) -> Option<f64> {
        let x = self.x_star.as_ref()?;
        let ax = self.a.spmv(x).ok()?;
        let bn = norm2(&self.b);
        let r = norm2(&sub(&ax, &self.b));
        Some(if bn > 0.0 { r / bn } else { r })
    }
}

fn random_solution(n: usize, seed: RngSeed) -> Vec<f64> {
    let mut rng = seed.stream(STREAM_SOLUTION);
    (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect()
}

/// Random SPD system with eigenvalues 1 and `kappa` pinned and the interior
/// log-uniform in [1, kappa].
///
/// Without `rotate` the matrix is `diag(λ)` with ascending entries. With
/// `rotate` three random sparse Householder reflections `H = I − 2uuᵀ/uᵀu` are
/// applied as similarity transforms, giving a non-diagonal matrix with the
/// same spectrum; the eigenvectors are attached when `n` is within the dense
/// eigensolver cap.
pub fn gen_random_spd(n: usize, kappa: f64, seed: RngSeed, rotate: bool) -> Result<Problem> {
    if n < 2 {
        return Err(Error::config(format!("random SPD needs n >= 2, got {n}")));
    }
    if !(kappa >= 1.0) || !kappa.is_finite() {
        return Err(Error::config(format!(
            "condition number must be >= 1, got {kappa}"
        )));
    }

    let mut rng = seed.stream(STREAM_SPECTRUM);
    let log_kappa = kappa.ln();
    let mut eigs = Vec::with_capacity(n);
    eigs.push(1.0);
    for _ in 1..n - 1 {
        let u: f64 = rng.gen();
        eigs.push((u * log_kappa).exp().clamp(1.0, kappa));
    }
    eigs.push(kappa);
    eigs.sort_by(f64::total_cmp);

    let x_star = random_solution(n, seed);
    let (a, basis) = if rotate {
        rotated_matrix(&eigs, seed)?
    } else {
        (SparseMatrix::diagonal(&eigs), EigenBasis::Coordinate)
    };
    let b = a.spmv(&x_star)?;
    let spectrum = SpectralModel::new(eigs, basis)?;
    Ok(Problem {
        a,
        b,
        x_star: Some(x_star),
        spectrum: Some(spectrum),
        kappa: Some(kappa),
        label: format!(
            "random{}-n{n}-k{kappa:e}-s{}",
            if rotate { "-rot" } else { "" },
            seed.0
        ),
        generator: if rotate {
            "random_spd_rotated"
        } else {
            "random_spd"
        }
        .into(),
        seed: Some(seed),
    })
}

/// Sparse reflection vector: sorted support indices with their values.
type Reflector = Vec<(usize, f64)>;

fn rotated_matrix(eigs: &[f64], seed: RngSeed) -> Result<(SparseMatrix, EigenBasis)> {
    let n = eigs.len();
    let support = n.min((n / 10).max(4));
    let mut rng = seed.stream(STREAM_ROTATION);

    let mut entries: BTreeMap<(usize, usize), f64> =
        eigs.iter().enumerate().map(|(i, &l)| ((i, i), l)).collect();
    let mut reflectors: Vec<Reflector> = Vec::with_capacity(ROTATION_REFLECTIONS);

    for _ in 0..ROTATION_REFLECTIONS {
        let mut idx = sample(&mut rng, n, support).into_vec();
        idx.sort_unstable();
        let u: Reflector = idx
            .into_iter()
            .map(|i| (i, rng.gen_range(-1.0..1.0)))
            .collect();
        let uu: f64 = u.iter().map(|(_, v)| v * v).sum();
        if uu == 0.0 {
            continue;
        }
        let beta = 2.0 / uu;

        // w = A u, using symmetry to read column j as row j
        let mut w: BTreeMap<usize, f64> = BTreeMap::new();
        for &(j, uj) in &u {
            for (&(_, i), &aji) in entries.range((j, 0)..(j + 1, 0)) {
                *w.entry(i).or_insert(0.0) += aji * uj;
            }
        }
        let gamma: f64 = u
            .iter()
            .map(|&(i, ui)| ui * w.get(&i).copied().unwrap_or(0.0))
            .sum();

        // A <- A − β(u wᵀ + w uᵀ) + β²γ u uᵀ; the update is symmetric in (i, j)
        let ud: BTreeMap<usize, f64> = u.iter().copied().collect();
        let touched: Vec<usize> = {
            let mut t: Vec<usize> = ud.keys().chain(w.keys()).copied().collect();
            t.sort_unstable();
            t.dedup();
            t
        };
        let get = |m: &BTreeMap<usize, f64>, k: usize| m.get(&k).copied().unwrap_or(0.0);
        for &i in &touched {
            for &j in &touched {
                let (ui, uj) = (get(&ud, i), get(&ud, j));
                if ui == 0.0 && uj == 0.0 {
                    continue;
                }
                let (wi, wj) = (get(&w, i), get(&w, j));
                let delta = -beta * (ui * wj + wi * uj) + beta * beta * gamma * (ui * uj);
                *entries.entry((i, j)).or_insert(0.0) += delta;
            }
        }
        reflectors.push(u);
    }

    let a = SparseMatrix::from_triplets(n, entries.into_iter().map(|((i, j), v)| (i, j, v)), true)?;
    debug_assert!(a.is_symmetric());

    let basis = if n <= DENSE_EIGEN_CAP {
        // v_k = H_last ⋯ H_1 e_k
        let vectors = (0..n)
            .map(|k| {
                let mut v = vec![0.0; n];
                v[k] = 1.0;
                for u in &reflectors {
                    let uu: f64 = u.iter().map(|(_, x)| x * x).sum();
                    let proj: f64 = u.iter().map(|&(i, ui)| ui * v[i]).sum();
                    let scale = 2.0 * proj / uu;
                    for &(i, ui) in u {
                        v[i] -= scale * ui;
                    }
                }
                v
            })
            .collect();
        EigenBasis::Vectors(vectors)
    } else {
        EigenBasis::Unknown
    };
    Ok((a, basis))
}

/// Two-point boundary value problem discretized by central differences:
/// `A = tridiag(−1/h², 2/h², −1/h²)` with `h = 11/n`.
pub fn gen_bvp(n: usize, seed: RngSeed) -> Result<Problem> {
    if n < 2 {
        return Err(Error::config(format!(
            "boundary value problem needs n >= 2, got {n}"
        )));
    }
    let h = 11.0 / n as f64;
    let inv_h2 = 1.0 / (h * h);
    let a = SparseMatrix::tridiagonal(n, -inv_h2, 2.0 * inv_h2);

    // λ_k = (2/h²)(1 − cos(kπ/(n+1))), written as 4/h² sin²(kπ/(2(n+1))) to
    // keep relative accuracy for small k
    let np1 = (n + 1) as f64;
    let eigs: Vec<f64> = (1..=n)
        .map(|k| {
            let s = (k as f64 * std::f64::consts::PI / (2.0 * np1)).sin();
            4.0 * inv_h2 * s * s
        })
        .collect();
    let basis = if n <= DENSE_EIGEN_CAP {
        let scale = (2.0 / np1).sqrt();
        EigenBasis::Vectors(
            (1..=n)
                .map(|k| {
                    (1..=n)
                        .map(|j| scale * ((j * k) as f64 * std::f64::consts::PI / np1).sin())
                        .collect()
                })
                .collect(),
        )
    } else {
        EigenBasis::Unknown
    };
    let spectrum = SpectralModel::new(eigs, basis)?;

    let x_star = random_solution(n, seed);
    let b = a.spmv(&x_star)?;
    Ok(Problem {
        a,
        b,
        x_star: Some(x_star),
        kappa: Some(spectrum.kappa()),
        spectrum: Some(spectrum),
        label: format!("bvp-n{n}-s{}", seed.0),
        generator: "bvp".into(),
        seed: Some(seed),
    })
}

/// Random nonsymmetric `n × n` matrix with about `density·n²` entries drawn
/// uniformly from (0, 1) at uniformly random positions.
pub fn random_perturbation(n: usize, density: f64, seed: RngSeed) -> SparseMatrix {
    let mut rng = seed.stream(STREAM_PERTURBATION);
    let draws = (density * (n * n) as f64).round() as usize;
    let mut positions: Vec<(usize, usize, f64)> = (0..draws)
        .map(|_| (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen::<f64>()))
        .collect();
    // keep the first draw at a repeated position
    positions.sort_by_key(|&(i, j, _)| (i, j));
    positions.dedup_by_key(|&mut (i, j, _)| (i, j));
    SparseMatrix::from_triplets(n, positions, false)
        .expect("indices are in range by construction")
        .into_general()
}

/// `Ã = A + δV` with `V` from [`random_perturbation`]. The solution is kept and
/// `b` recomputed, so `x*` still solves the perturbed system.
pub fn gen_perturbed(p: &Problem, delta: f64, seed: RngSeed) -> Result<Problem> {
    if !(delta > 0.0) {
        return Err(Error::config(format!(
            "perturbation size must be > 0, got {delta}"
        )));
    }
    let n = p.n();
    let v = random_perturbation(n, PERTURBATION_DENSITY, seed);
    let triplets =
        p.a.triplets()
            .chain(v.triplets().map(|(i, j, x)| (i, j, delta * x)));
    let a = SparseMatrix::from_triplets(n, triplets, false)?.into_general();
    let x_star = match &p.x_star {
        Some(x) => x.clone(),
        None => random_solution(n, seed),
    };
    let b = a.spmv(&x_star)?;
    Ok(Problem {
        a,
        b,
        x_star: Some(x_star),
        spectrum: None,
        kappa: p.kappa,
        label: format!("{}-pert{delta:e}-s{}", p.label, seed.0),
        generator: format!("{}+perturbed", p.generator),
        seed: Some(seed),
    })
}
