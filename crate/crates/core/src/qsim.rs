//! Pure-state statevector simulator.
//!
//! Amplitudes are stored little-endian: qubit `q` is bit `q` of the basis
//! index, so qubit 0 is the least significant bit. Rotations follow
//! `R_P(theta) = exp(-i theta P / 2)`. Expectations are exact; there is no
//! shot sampling.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const MAX_QUBITS: usize = 24;

const NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    Rx { target: usize, angle: f64 },
    Ry { target: usize, angle: f64 },
    Rz { target: usize, angle: f64 },
    Cnot { control: usize, target: usize },
}

impl Gate {
    pub fn target(&self) -> usize {
        match *self {
            Gate::Rx { target, .. }
            | Gate::Ry { target, .. }
            | Gate::Rz { target, .. }
            | Gate::Cnot { target, .. } => target,
        }
    }

    pub fn control(&self) -> Option<usize> {
        match *self {
            Gate::Cnot { control, .. } => Some(control),
            _ => None,
        }
    }

    pub fn angle(&self) -> Option<f64> {
        match *self {
            Gate::Rx { angle, .. } | Gate::Ry { angle, .. } | Gate::Rz { angle, .. } => Some(angle),
            Gate::Cnot { .. } => None,
        }
    }

    /// Same gate with its rotation angle replaced. CNOT is returned unchanged.
    pub fn with_angle(self, angle: f64) -> Gate {
        match self {
            Gate::Rx { target, .. } => Gate::Rx { target, angle },
            Gate::Ry { target, .. } => Gate::Ry { target, angle },
            Gate::Rz { target, .. } => Gate::Rz { target, angle },
            g @ Gate::Cnot { .. } => g,
        }
    }

    fn validate(&self, n_qubits: usize) -> Result<()> {
        let t = self.target();
        if t >= n_qubits {
            return Err(Error::QubitIndex {
                index: t,
                n_qubits,
            });
        }
        if let Some(c) = self.control() {
            if c >= n_qubits {
                return Err(Error::QubitIndex {
                    index: c,
                    n_qubits,
                });
            }
            if c == t {
                return Err(Error::InvalidGate(format!(
                    "CNOT control and target are both qubit {c}"
                )));
            }
        }
        Ok(())
    }

    /// 2x2 unitary for a rotation, row-major `[u00, u01, u10, u11]`.
    fn rotation_matrix(&self) -> Option<[Complex64; 4]> {
        let (c, s) = match self.angle() {
            Some(a) => ((a / 2.0).cos(), (a / 2.0).sin()),
            None => return None,
        };
        let z = Complex64::new(0.0, 0.0);
        Some(match self {
            Gate::Rx { .. } => [
                Complex64::new(c, 0.0),
                Complex64::new(0.0, -s),
                Complex64::new(0.0, -s),
                Complex64::new(c, 0.0),
            ],
            Gate::Ry { .. } => [
                Complex64::new(c, 0.0),
                Complex64::new(-s, 0.0),
                Complex64::new(s, 0.0),
                Complex64::new(c, 0.0),
            ],
            Gate::Rz { .. } => [Complex64::new(c, -s), z, z, Complex64::new(c, s)],
            Gate::Cnot { .. } => unreachable!(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl Statevector {
    /// |0...0> on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&n_qubits) {
            return Err(Error::QubitCount(n_qubits));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Wraps raw amplitudes; the vector must have power-of-two length and unit norm.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "amplitude count {len} is not a power of two >= 2"
            )));
        }
        let n_qubits = len.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(Error::QubitCount(n_qubits));
        }
        let sv = Self { n_qubits, amps };
        if (sv.norm_sqr() - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidArgument(format!(
                "state is not normalized (norm^2 = {})",
                sv.norm_sqr()
            )));
        }
        Ok(sv)
    }

    /// Computational basis state with the given little-endian index.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        let mut sv = Self::zero(n_qubits)?;
        if index >= sv.amps.len() {
            return Err(Error::InvalidArgument(format!(
                "basis index {index} out of range for {n_qubits} qubits"
            )));
        }
        sv.amps[0] = Complex64::new(0.0, 0.0);
        sv.amps[index] = Complex64::new(1.0, 0.0);
        Ok(sv)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Applies `gate` in place.
    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        match *gate {
            Gate::Cnot { control, target } => {
                let cmask = 1usize << control;
                let tmask = 1usize << target;
                for i in 0..self.amps.len() {
                    // visit each swapped pair once, from the side with target bit 0
                    if i & cmask != 0 && i & tmask == 0 {
                        self.amps.swap(i, i | tmask);
                    }
                }
            }
            _ => {
                let [u00, u01, u10, u11] = gate.rotation_matrix().expect("rotation gate");
                let tmask = 1usize << gate.target();
                for i in 0..self.amps.len() {
                    if i & tmask == 0 {
                        let j = i | tmask;
                        let a0 = self.amps[i];
                        let a1 = self.amps[j];
                        self.amps[i] = u00 * a0 + u01 * a1;
                        self.amps[j] = u10 * a0 + u11 * a1;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn apply_all<'a>(&mut self, gates: impl IntoIterator<Item = &'a Gate>) -> Result<()> {
        for g in gates {
            self.apply(g)?;
        }
        Ok(())
    }

    /// CNOT(q, (q+1) mod n) for q = 0, 1, ..., n-1, in that order.
    pub fn apply_ring_entangler(&mut self) -> Result<()> {
        for g in ring_entangler(self.n_qubits)? {
            self.apply(&g)?;
        }
        Ok(())
    }

    /// `<Z_q>` computed exactly from the amplitudes.
    pub fn expect_z(&self, qubit: usize) -> Result<f64> {
        if qubit >= self.n_qubits {
            return Err(Error::QubitIndex {
                index: qubit,
                n_qubits: self.n_qubits,
            });
        }
        let mask = 1usize << qubit;
        Ok(self
            .amps
            .iter()
            .enumerate()
            .map(|(i, a)| if i & mask == 0 { a.norm_sqr() } else { -a.norm_sqr() })
            .sum())
    }

    /// `<Z_q>` for every qubit in a single pass over the amplitudes.
    pub fn expect_z_all(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_qubits];
        for (i, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            for (q, o) in out.iter_mut().enumerate() {
                if (i >> q) & 1 == 0 {
                    *o += p;
                } else {
                    *o -= p;
                }
            }
        }
        out
    }
}

/// Functional form of [`Statevector::apply`].
pub fn apply_gate(mut state: Statevector, gate: &Gate) -> Result<Statevector> {
    state.apply(gate)?;
    Ok(state)
}

/// Gate list for the ring entangler on `n_qubits` qubits.
pub fn ring_entangler(n_qubits: usize) -> Result<Vec<Gate>> {
    if n_qubits < 2 {
        return Err(Error::InvalidArgument(format!(
            "ring entangler needs at least 2 qubits, got {n_qubits}"
        )));
    }
    Ok((0..n_qubits)
        .map(|q| Gate::Cnot {
            control: q,
            target: (q + 1) % n_qubits,
        })
        .collect())
}

/// Runs `gates` from |0...0> and returns the final state.
pub fn run_circuit(n_qubits: usize, gates: &[Gate]) -> Result<Statevector> {
    let mut sv = Statevector::zero(n_qubits)?;
    sv.apply_all(gates)?;
    Ok(sv)
}
