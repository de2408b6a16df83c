//! Dense-matrix reference implementation used to cross-check the simulator.
//!
//! Everything here is built from explicit Kronecker products of 2×2 matrices
//! and full matrix–vector products, sharing no code with the library's
//! bit-indexed kernels.

#![allow(dead_code)]

use num_complex::Complex64 as C;
use weakval_core::qstate::PauliAxis;
use weakval_core::sampling::{Label, OutcomeDistribution};

pub type Mat = Vec<Vec<C>>;
pub type Vector = Vec<C>;

const R: f64 = std::f64::consts::FRAC_1_SQRT_2;

pub fn c(re: f64) -> C {
    C::new(re, 0.0)
}

pub fn identity(dim: usize) -> Mat {
    (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| c(if i == j { 1.0 } else { 0.0 }))
                .collect()
        })
        .collect()
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    let (n, m) = (a.len(), b.len());
    let mut out = vec![vec![c(0.0); n * m]; n * m];
    for i in 0..n {
        for j in 0..n {
            for k in 0..m {
                for l in 0..m {
                    out[i * m + k][j * m + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

pub fn kron_vec(a: &[C], b: &[C]) -> Vector {
    a.iter()
        .flat_map(|x| b.iter().map(move |y| x * y))
        .collect()
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

pub fn add(a: &Mat, b: &Mat) -> Mat {
    a.iter()
        .zip(b)
        .map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect())
        .collect()
}

pub fn scale(a: &Mat, k: C) -> Mat {
    a.iter()
        .map(|r| r.iter().map(|x| x * k).collect())
        .collect()
}

pub fn apply(m: &Mat, v: &[C]) -> Vector {
    m.iter()
        .map(|r| r.iter().zip(v).map(|(x, y)| x * y).sum())
        .collect()
}

pub fn pauli_z() -> Mat {
    vec![vec![c(1.0), c(0.0)], vec![c(0.0), c(-1.0)]]
}

pub fn pauli_x() -> Mat {
    vec![vec![c(0.0), c(1.0)], vec![c(1.0), c(0.0)]]
}

pub fn hadamard() -> Mat {
    vec![vec![c(R), c(R)], vec![c(R), c(-R)]]
}

pub fn projector(v: &[C]) -> Mat {
    v.iter()
        .map(|a| v.iter().map(|b| a * b.conj()).collect())
        .collect()
}

/// `g` acting on qubit `q` of `n`, qubit 0 being the leftmost factor.
pub fn on_qubit(n: usize, q: usize, g: &Mat) -> Mat {
    let id = identity(2);
    let mut out = identity(1);
    for k in 0..n {
        out = kron(&out, if k == q { g } else { &id });
    }
    out
}

pub fn cnot(n: usize, control: usize, target: usize, axis: PauliAxis) -> Mat {
    let p0 = projector(&[c(1.0), c(0.0)]);
    let p1 = projector(&[c(0.0), c(1.0)]);
    let plain = add(
        &on_qubit(n, control, &p0),
        &matmul(&on_qubit(n, control, &p1), &on_qubit(n, target, &pauli_x())),
    );
    match axis {
        PauliAxis::Z => plain,
        PauliAxis::X => {
            let hh = matmul(
                &on_qubit(n, control, &hadamard()),
                &on_qubit(n, target, &hadamard()),
            );
            matmul(&hh, &matmul(&plain, &hh))
        }
    }
}

/// `exp(−i δt σz⊗σx)` or its first-order truncation.
pub fn coupling(n: usize, system: usize, probe: usize, dt: f64, exact: bool) -> Mat {
    let zx = matmul(
        &on_qubit(n, system, &pauli_z()),
        &on_qubit(n, probe, &pauli_x()),
    );
    let (keep, mix) = if exact {
        (dt.cos(), dt.sin())
    } else {
        (1.0, dt)
    };
    add(
        &scale(&identity(1 << n), c(keep)),
        &scale(&zx, C::new(0.0, -mix)),
    )
}

pub fn eigen(axis: PauliAxis, bit: usize) -> Vector {
    match (axis, bit) {
        (PauliAxis::Z, 0) => vec![c(1.0), c(0.0)],
        (PauliAxis::Z, _) => vec![c(0.0), c(1.0)],
        (PauliAxis::X, 0) => vec![c(R), c(R)],
        (PauliAxis::X, _) => vec![c(R), c(-R)],
    }
}

/// `cos(θ/2)|b0⟩ + sin(θ/2)|b1⟩` in the eigenbasis of `axis`.
pub fn meter(theta: f64, axis: PauliAxis) -> Vector {
    let (b0, b1) = (eigen(axis, 0), eigen(axis, 1));
    let (cs, sn) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    b0.iter().zip(&b1).map(|(x, y)| x * cs + y * sn).collect()
}

pub fn norm_sqr(v: &[C]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum()
}

pub fn normalize(v: &[C]) -> Vector {
    let n = norm_sqr(v).sqrt();
    v.iter().map(|x| x / n).collect()
}

/// Born probability of a product of basis vectors, after normalizing `psi`.
pub fn born(psi: &[C], factors: &[Vector]) -> f64 {
    let mut basis = vec![c(1.0)];
    for f in factors {
        basis = kron_vec(&basis, f);
    }
    let amp: C = basis.iter().zip(psi).map(|(b, p)| b.conj() * p).sum();
    amp.norm_sqr() / norm_sqr(psi)
}

/// Compares `dist` against the dense Born rule for `psi`, with the system
/// measured in `{phi_f, phi_f⊥}` and the meters in the given axes.
pub fn max_deviation(
    dist: &OutcomeDistribution,
    psi: &[C],
    phi_f: &[C],
    axes: &[PauliAxis],
) -> f64 {
    let perp = vec![-phi_f[1].conj(), phi_f[0].conj()];
    let mut worst: f64 = 0.0;
    for (outcome, p) in dist.iter() {
        let labels = outcome.labels();
        let mut factors = Vec::new();
        for (slot, &label) in labels.iter().enumerate() {
            factors.push(match label {
                Label::F => phi_f.to_vec(),
                Label::FPerp => perp.clone(),
                Label::Zero | Label::Plus => eigen(axes[slot - 1], 0),
                Label::One | Label::Minus => eigen(axes[slot - 1], 1),
            });
        }
        worst = worst.max((born(psi, &factors) - p).abs());
    }
    worst
}
